"""``fdpkit`` command line: dot, ssh-sweep, repro, gemm, gendot, rtl.

Exit codes: 0 ok, 2 usage or contract violation, 3 unsupported feature.
Every randomized run reports its seed; the default seed is ``DEFAULT_SEED``.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from typing import List, Optional

import numpy as np

from . import _backend
from .accumulator import AccumConfig, InvalidConfig
from .analysis import (
    DEFAULT_SEED,
    FIXED_POWER,
    correct_bits,
    condition,
    exact_dot,
    gen_dot,
    repro_probe,
    report_rows,
    rows_to_csv,
    rows_to_json,
    ssh_sweep,
    window_grid,
)
from .formats import FormatError, FormatSpec, UnpackedReal, decode, encode, parse_format, parse_value
from .kernels import KernelSpec, PackedMatrix, ShapeError, gemm
from .rtl_gen import (
    UnsupportedFeature,
    default_module_name,
    derive_params,
    emit_fdp,
    emit_golden,
    lint,
)


class UsageError(Exception):
    pass


def exact_str(x: UnpackedReal) -> str:
    if x.is_nan:
        return "nan"
    if not x.is_finite:
        return "-inf" if x.sign else "inf"
    if x.is_zero:
        return "-0" if x.sign else "0"
    return f"{'-' if x.sign else ''}{x.significand}*2^{x.exponent}"


def _num(v: float) -> str:
    if isinstance(v, float) and v.is_integer():
        return str(int(v))
    return f"{v:.6g}"


def _fmt_arg(text: str) -> FormatSpec:
    try:
        return parse_format(text)
    except FormatError as e:
        raise argparse.ArgumentTypeError(str(e))


def _acc_arg(text: str) -> AccumConfig:
    try:
        return AccumConfig.parse(text)
    except InvalidConfig as e:
        raise argparse.ArgumentTypeError(str(e))


def _float_list(text: str) -> List[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _int_list(text: str) -> List[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _kv(pairs, mode: str, out: Optional[str]) -> None:
    if mode == "json":
        _emit(json.dumps(dict(pairs), indent=2) + "\n", out)
    else:
        _emit("".join(f"{k},{v}\n" for k, v in pairs), out)


def _note_seed(seed: int) -> None:
    print(f"seed={seed}", file=sys.stderr)


def _kernel(args, out_fmt: FormatSpec) -> KernelSpec:
    try:
        return KernelSpec.parse(args.kernel, out_fmt, args.acc)
    except (ValueError, FormatError) as e:
        raise UsageError(str(e))


# -- subcommands ----------------------------------------------------------------

def cmd_dot(args) -> int:
    fmt = args.fmt
    out_fmt = args.out_fmt or fmt
    x = [parse_value(t, fmt) for t in args.x.split(",") if t.strip()]
    y = [parse_value(t, fmt) for t in args.y.split(",") if t.strip()]
    if len(x) != len(y):
        raise UsageError(f"--x has {len(x)} values but --y has {len(y)}")
    kernel = _kernel(args, out_fmt)
    bits = kernel.dot(x, y, fmt)
    xd = [decode(v, fmt) for v in x]
    yd = [decode(v, fmt) for v in y]
    exact = exact_dot(xd, yd)
    pairs = [
        ("kernel", kernel.ident),
        ("format", fmt.name),
        ("out_format", kernel.out_fmt.name),
        ("result", kernel.out_fmt.hex(bits)),
        ("correct_bits", _num(correct_bits(bits, kernel.out_fmt, exact))),
        ("exact", exact_str(exact)),
        ("correctly_rounded", kernel.out_fmt.hex(encode(exact, kernel.out_fmt))),
    ]
    if exact.is_finite:
        pairs.append(("cond", _num(condition(xd, yd, exact))))
    _kv(pairs, args.mode, args.out)
    return 0


def _grid(args, cfg: AccumConfig) -> Optional[int]:
    if args.grid == "auto":
        return window_grid(cfg.lsb)
    if args.grid == "none":
        return None
    try:
        return int(args.grid)
    except ValueError:
        raise UsageError(f"--grid must be auto, none or an integer, got {args.grid!r}")


def cmd_ssh_sweep(args) -> int:
    if not args.sizes or not args.conds:
        raise UsageError("--sizes and --conds must be nonempty")
    if any(n < 6 for n in args.sizes):
        raise UsageError("every size must be at least 6")
    if any(not c >= 1 for c in args.conds):
        raise UsageError("every condition target must be >= 1")
    if args.seeds < 1:
        raise UsageError("--seeds must be positive")
    _note_seed(args.seed)
    kernels = [
        KernelSpec.make_fma(parse_format("binary64")),
        KernelSpec.make_fma(parse_format("binary128")),
        KernelSpec.make_fdp(args.acc, args.fmt),
    ]
    grid = _grid(args, args.acc)
    reports = ssh_sweep(args.sizes, args.conds, kernels, args.fmt, args.seeds, args.seed, grid)
    rows = report_rows(reports, FIXED_POWER)
    if args.mode == "json":
        text = rows_to_json(rows, seed=args.seed, grid_exp=grid, format=args.fmt.name,
                            power_source="paper_constant") + "\n"
    else:
        text = rows_to_csv(rows)
    _emit(text, args.out)
    return 0


def cmd_repro(args) -> int:
    if args.n < 6:
        raise UsageError("--n must be at least 6")
    if args.K < 2:
        raise UsageError("--K must be at least 2")
    _note_seed(args.seed)
    kernel = _kernel(args, args.fmt)
    g = gen_dot(args.n, args.cond, args.fmt, args.seed, _grid(args, args.acc))
    rep = repro_probe(g.x, g.y, args.fmt, kernel, args.K, args.seed)
    pairs = [
        ("kernel", rep.kernel),
        ("n", rep.n),
        ("target_cond", _num(args.cond)),
        ("cond", _num(g.cond)),
        ("permutations", rep.permutations),
        ("distinct_results", rep.distinct_results),
        ("max_abs_deviation", repr(rep.max_abs_deviation)),
        ("bit_identical", int(rep.bit_identical)),
        ("seed", rep.seed),
    ]
    _kv(pairs, args.mode, args.out)
    return 0


def _random_matrix(rng: np.random.Generator, rows: int, cols: int, fmt: FormatSpec) -> PackedMatrix:
    vals = rng.standard_normal(rows * cols) * np.exp2(rng.integers(-8, 9, rows * cols))
    return PackedMatrix(rows, cols, fmt, [parse_value(repr(float(v)), fmt) for v in vals])


def cmd_gemm(args) -> int:
    fmt = args.fmt
    if args.random:
        try:
            m, k, n = (int(t) for t in args.random.lower().split("x"))
        except ValueError:
            raise UsageError(f"--random must look like MxKxN, got {args.random!r}")
        _note_seed(args.seed)
        rng = np.random.default_rng(args.seed)
        A = _random_matrix(rng, m, k, fmt)
        B = _random_matrix(rng, k, n, fmt)
        C = _random_matrix(rng, m, n, fmt)
    else:
        if not (args.a and args.b):
            raise UsageError("give --a and --b matrix files, or --random MxKxN")
        A, B = PackedMatrix.load(args.a), PackedMatrix.load(args.b)
        C = PackedMatrix.load(args.c) if args.c else None
        fmt = A.fmt
    out_fmt = args.out_fmt or fmt
    kernel = _kernel(args, out_fmt)
    alpha = parse_value(args.alpha, fmt)
    beta = parse_value(args.beta, fmt)
    if C is None and not decode(beta, fmt).is_zero:
        raise UsageError("--beta is nonzero but no --c matrix was given")
    R = gemm(alpha, A, B, beta, C, kernel, workers=args.workers)
    _emit(R.to_csv(), args.out)
    return 0


def cmd_gendot(args) -> int:
    if args.n < 6:
        raise UsageError("--n must be at least 6")
    if not args.cond >= 1:
        raise UsageError("--cond must be >= 1")
    _note_seed(args.seed)
    grid = None if args.grid == "none" else int(args.grid)
    g = gen_dot(args.n, args.cond, args.fmt, args.seed, grid)
    meta = {"n": args.n, "target_cond": args.cond, "cond": g.cond, "format": args.fmt.name,
            "exact": exact_str(g.exact), "seed": args.seed, "grid_exp": grid}
    if args.mode == "json":
        meta["x"] = [args.fmt.hex(v) for v in g.x]
        meta["y"] = [args.fmt.hex(v) for v in g.y]
        _emit(json.dumps(meta, indent=2) + "\n", args.out)
    else:
        head = "".join(f"# {k}={v}\n" for k, v in meta.items())
        body = "".join(f"{args.fmt.hex(a)},{args.fmt.hex(b)}\n" for a, b in zip(g.x, g.y))
        _emit(head + "x_hex,y_hex\n" + body, args.out)
    return 0


def cmd_rtl(args) -> int:
    fmt_in = args.fmt
    fmt_out = args.out_fmt or fmt_in
    if not (fmt_in.is_ieee and fmt_out.is_ieee):
        raise UnsupportedFeature(
            f"no RTL for {fmt_in.name} -> {fmt_out.name}: posit decode/encode hardware is not emitted"
        )
    _note_seed(args.seed)
    params = derive_params(fmt_in, args.acc, fmt_out)
    name = args.name or default_module_name(fmt_in, args.acc, fmt_out)
    text = emit_fdp(params, args.acc, fmt_in, fmt_out, name)
    problems = lint(text, params)
    if problems:
        raise RuntimeError("emitted Verilog failed lint: " + "; ".join(problems))
    gv = emit_golden(fmt_in, args.acc, fmt_out, args.vectors, args.seed)
    os.makedirs(args.outdir, exist_ok=True)
    vpath = os.path.join(args.outdir, f"{name}.v")
    gpath = os.path.join(args.outdir, f"{name}_golden.csv")
    with open(vpath, "w", newline="") as fh:
        fh.write(text)
    with open(gpath, "w", newline="") as fh:
        fh.write(gv.to_csv())
    pairs = [("module", name), ("verilog", vpath), ("golden", gpath), ("seed", args.seed)]
    pairs += [(k, v) for k, v in vars(params).items()]
    _kv(pairs, args.mode, None)
    return 0


# -- parser ---------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="fdpkit",
        description="Fused dot products over tailored <ovf:msb:lsb> accumulators.",
        epilog=f"backend: {_backend.BACKEND}; default seed {DEFAULT_SEED}",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, fmt_default="binary64", kernel=True, seed=True, acc="30:30:-30"):
        p.add_argument("--fmt", type=_fmt_arg, default=parse_format(fmt_default),
                       help=f"operand format (default {fmt_default})")
        p.add_argument("--acc", type=_acc_arg, default=AccumConfig.parse(acc),
                       help=f"accumulator ovf:msb:lsb with signed lsb (default {acc})")
        if kernel:
            p.add_argument("--kernel", default="fdp",
                           help="fdp, fdp:OVF:MSB:LSB or fma:FORMAT (default fdp)")
        if seed:
            p.add_argument("--seed", type=int, default=DEFAULT_SEED,
                           help=f"RNG seed (default {DEFAULT_SEED})")
        p.add_argument("--mode", choices=("csv", "json"), default="csv", help="output mode")

    p = sub.add_parser("dot", help="one dot product with correct bits against the exact value")
    common(p, seed=False)
    p.add_argument("--out-fmt", type=_fmt_arg, help="result format (default: --fmt)")
    p.add_argument("--x", required=True, help="comma-separated hex patterns or decimals")
    p.add_argument("--y", required=True, help="comma-separated hex patterns or decimals")
    p.add_argument("--out", help="write to a file instead of stdout")
    p.set_defaults(func=cmd_dot)

    p = sub.add_parser("ssh-sweep", help="correct bits of fma:binary64, fma:binary128 and fdp "
                                         "over ill-conditioned surrogates")
    common(p, kernel=False)
    p.add_argument("--sizes", type=_int_list, default=[64, 256, 1024], help="vector lengths")
    p.add_argument("--conds", type=_float_list, default=[1e5, 1e10, 1e15, 1e20],
                   help="target condition numbers")
    p.add_argument("--seeds", type=int, default=3, help="instances per (size, cond)")
    p.add_argument("--grid", default="auto",
                   help="operand grid exponent: auto (fits the accumulator lsb), none, or an integer")
    p.add_argument("--out", help="write to a file instead of stdout")
    p.set_defaults(func=cmd_ssh_sweep)

    p = sub.add_parser("repro", help="distinct results over K permutations of one instance")
    common(p)
    p.add_argument("--n", type=int, default=512, help="vector length")
    p.add_argument("--cond", type=float, default=1e12, help="target condition number")
    p.add_argument("--K", type=int, default=1000, help="number of permutations")
    p.add_argument("--grid", default="none", help="operand grid exponent: auto, none, or an integer")
    p.add_argument("--out", help="write to a file instead of stdout")
    p.set_defaults(func=cmd_repro)

    p = sub.add_parser("gemm", help="alpha*A@B + beta*C on CSV matrices")
    common(p)
    p.add_argument("--a", help="matrix CSV (header rows,cols,format)")
    p.add_argument("--b", help="matrix CSV")
    p.add_argument("--c", help="matrix CSV (optional when beta is 0)")
    p.add_argument("--random", help="use seeded random MxKxN matrices instead of files")
    p.add_argument("--alpha", default="1", help="hex pattern or decimal (default 1)")
    p.add_argument("--beta", default="0", help="hex pattern or decimal (default 0)")
    p.add_argument("--out-fmt", type=_fmt_arg, help="result format (default: operand format)")
    p.add_argument("--workers", type=int, default=1, help="threads over output rows")
    p.add_argument("--out", help="write to a file instead of stdout")
    p.set_defaults(func=cmd_gemm)

    p = sub.add_parser("gendot", help="generate an ill-conditioned dot product")
    common(p, kernel=False)
    p.add_argument("--n", type=int, default=128, help="vector length (>= 6)")
    p.add_argument("--cond", type=float, default=1e15, help="target condition number")
    p.add_argument("--grid", default="none", help="operand grid exponent or none")
    p.add_argument("--out", help="write to a file instead of stdout")
    p.set_defaults(func=cmd_gendot)

    p = sub.add_parser("rtl", help="emit <name>.v and <name>_golden.csv")
    common(p, kernel=False)
    p.add_argument("--out-fmt", type=_fmt_arg, help="result format (default: --fmt)")
    p.add_argument("--name", help="module name (default derived from formats and config)")
    p.add_argument("--outdir", default=".", help="output directory")
    p.add_argument("--vectors", type=int, default=256, help="number of golden operand pairs")
    p.set_defaults(func=cmd_rtl)
    return ap


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except UnsupportedFeature as e:
        print(f"fdpkit {args.command}: unsupported: {e}", file=sys.stderr)
        return 3
    except (UsageError, FormatError, InvalidConfig, ShapeError, ValueError, OSError) as e:
        print(f"fdpkit {args.command}: error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
