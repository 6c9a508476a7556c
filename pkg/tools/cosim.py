"""Replay golden vectors through the emitted Verilog with yosys CXXRTL.

Developer tool, not part of the test suite.  Needs ``yowasp-yosys`` (or a
``yosys`` binary) and a C++ compiler:

    python tools/cosim.py --fmt binary64 --acc 30:30:-30 --vectors 2000
"""

from __future__ import annotations

import argparse
import os
import shutil
import subprocess
import sys
import tempfile

from fdpkit.accumulator import AccumConfig
from fdpkit.formats import parse_format
from fdpkit.rtl_gen import default_module_name, derive_params, emit_fdp, emit_golden

HARNESS = r"""
#include <cstdio>
#include <cstdint>
#include <cstring>
#include "design.cc"

template <size_t N>
static void load(cxxrtl::value<N> &v, const char *hex) {
    for (auto &c : v.data) c = 0;
    size_t len = strlen(hex);
    for (size_t i = 0; i < len; i++) {
        char ch = hex[len - 1 - i];
        uint32_t d = (ch >= '0' && ch <= '9') ? ch - '0' : (ch | 32) - 'a' + 10;
        if (i / 8 < sizeof(v.data) / sizeof(v.data[0]))
            v.data[i / 8] |= d << (4 * (i % 8));
    }
}

template <size_t N>
static void print(const cxxrtl::value<N> &v) {
    size_t digits = (N + 3) / 4;
    printf("0x");
    for (size_t i = digits; i-- > 0;)
        printf("%X", (v.data[i / 8] >> (4 * (i % 8))) & 0xF);
    printf("\n");
}

int main() {
    cxxrtl_design::p_@NAME@ top;
    auto tick = [&]() {
        top.p_clk.set<bool>(false); top.step();
        top.p_clk.set<bool>(true); top.step();
    };
    top.p_rst.set<bool>(true); tick();
    top.p_rst.set<bool>(false);
    char a[64], b[64];
    int last;
    while (scanf("%63s %63s %d", a, b, &last) == 3) {
        load(top.p_a, a);
        load(top.p_b, b);
        top.p_last.set<bool>(last != 0);
        top.p_valid__in.set<bool>(true);
        tick();
        if (top.p_valid__out.get<bool>()) print(top.p_result.curr);
    }
    return 0;
}
"""


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--fmt", default="binary64")
    ap.add_argument("--out-fmt")
    ap.add_argument("--acc", default="30:30:-30")
    ap.add_argument("--vectors", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=20221)
    args = ap.parse_args(argv)

    fmt_in = parse_format(args.fmt)
    fmt_out = parse_format(args.out_fmt or args.fmt)
    cfg = AccumConfig.parse(args.acc)
    params = derive_params(fmt_in, cfg, fmt_out)
    name = default_module_name(fmt_in, cfg, fmt_out)
    gv = emit_golden(fmt_in, cfg, fmt_out, args.vectors, args.seed)
    yosys = shutil.which("yosys") or shutil.which("yowasp-yosys")
    if yosys is None:
        print("no yosys found", file=sys.stderr)
        return 3
    with tempfile.TemporaryDirectory() as tmp:
        with open(os.path.join(tmp, "design.v"), "w") as fh:
            fh.write(emit_fdp(params, cfg, fmt_in, fmt_out, name))
        subprocess.run([yosys, "-q", "-p", "read_verilog design.v; proc; opt; write_cxxrtl design.cc"],
                       cwd=tmp, check=True)
        with open(os.path.join(tmp, "tb.cc"), "w") as fh:
            fh.write(HARNESS.replace("@NAME@", name.replace("_", "__")))
        if yosys.endswith("yowasp-yosys"):
            import yowasp_yosys
            inc = os.path.join(os.path.dirname(yowasp_yosys.__file__), "share", "include",
                               "backends", "cxxrtl", "runtime")
        else:
            inc = subprocess.run(["yosys-config", "--datdir"], capture_output=True, text=True).stdout.strip()
            inc = os.path.join(inc, "include", "backends", "cxxrtl", "runtime")
        subprocess.run(["g++", "-std=c++14", "-O1", "-I", inc, "tb.cc", "-o", "tb"], cwd=tmp, check=True)
        stim = "".join(f"{r.a:X} {r.b:X} {int(r.last)}\n" for r in gv.rows)
        out = subprocess.run([os.path.join(tmp, "tb")], input=stim, capture_output=True, text=True,
                             check=True).stdout.split()
    expected = [fmt_out.hex(e) for _, _, e in gv.groups()]
    bad = [i for i, (got, want) in enumerate(zip(out, expected)) if got != want]
    if len(out) != len(expected):
        print(f"result count {len(out)} != {len(expected)}")
        return 1
    for i in bad[:10]:
        print(f"group {i}: rtl {out[i]} expected {expected[i]}")
    print(f"{name}: {len(expected) - len(bad)}/{len(expected)} dot products match")
    return 1 if bad else 0


if __name__ == "__main__":
    sys.exit(main())
