"""Behavioral Verilog for the fused dot product, plus golden vectors.

The emitted module is unpipelined (one accumulate per clock); retiming is left
to synthesis.  Golden vectors are computed with :func:`fdpkit.kernels.fdp` so
the RTL can be checked against the software model by any simulator.
"""

from __future__ import annotations

import io
import math
import re
from dataclasses import asdict, dataclass, field
from typing import List, NamedTuple, Optional

import numpy as np

from .accumulator import AccumConfig
from .formats import FormatSpec, UnpackedReal, encode, parse_format
from .kernels import fdp


class UnsupportedFeature(NotImplementedError):
    pass


@dataclass(frozen=True)
class PipelineParams:
    in_width: int
    sig_prod_width: int
    exp_prod_min: int
    exp_prod_max: int
    max_shift: int
    max_right_shift: int
    shift_count_width: int
    acc_width: int
    out_width: int


def derive_params(fmt_in: FormatSpec, cfg: AccumConfig, fmt_out: FormatSpec) -> PipelineParams:
    """Datapath widths for ``fmt_in`` products into ``cfg``, rounded to ``fmt_out``.

    ``exp_prod_*`` bound the weight of a product's least significant bit.
    ``max_shift`` is the largest useful left shift onto the accumulator grid;
    shifts of ``acc_width`` or more leave nothing in the register.
    """
    p = fmt_in.precision
    unit_min = fmt_in.emin - (p - 1)
    unit_max = fmt_in.emax - (p - 1)
    lo, hi = 2 * unit_min, 2 * unit_max
    w = cfg.width
    max_shift = min(max(hi - cfg.lsb, 0), w - 1)
    max_right = min(max(cfg.lsb - lo, 0), 2 * p)
    return PipelineParams(
        in_width=fmt_in.width,
        sig_prod_width=2 * p,
        exp_prod_min=lo,
        exp_prod_max=hi,
        max_shift=max_shift,
        max_right_shift=max_right,
        shift_count_width=max(1, math.ceil(math.log2(max_shift + 1))),
        acc_width=w,
        out_width=fmt_out.width,
    )


def default_module_name(fmt_in: FormatSpec, cfg: AccumConfig, fmt_out: FormatSpec) -> str:
    tag = "_".join(str(v).replace("-", "m") for v in (cfg.ovf, cfg.msb, cfg.lsb))
    return f"fdp_{fmt_in.name}_{tag}_{fmt_out.name}"


def _signed_bits(lo: int, hi: int) -> int:
    """Bits of a two's-complement field holding every integer in ``[lo, hi]``."""
    return max(abs(lo), abs(hi) + 1).bit_length() + 1


_TEMPLATE = """\
// {name}: behavioral fused dot product
//   operands  {fin} ({in_w} bits)
//   scratch   <ovf:{ovf}, msb:{msb}, lsb:{lsb}>, {acc_w}-bit two's complement, wraps mod 2^{acc_w}
//   result    {fout} ({out_w} bits), one round-to-nearest-even at `last`
// Products are floored onto the 2^({lsb}) grid; nothing is rounded between accumulations.
module {name} (
    input  wire                clk,
    input  wire                rst,
    input  wire                valid_in,
    input  wire                last,
    input  wire [{in_hi}:0] a,
    input  wire [{in_hi}:0] b,
    output reg                 valid_out,
    output reg  [{out_hi}:0] result
);
    localparam integer IN_W     = {in_w};
    localparam integer IN_E     = {in_e};
    localparam integer IN_F     = {in_f};
    localparam integer P        = {p};
    localparam integer ACC_W    = {acc_w};
    localparam integer LSB      = {lsb};
    localparam integer SH_W     = {sh_w};
    localparam integer XW       = {xw};
    localparam integer SHIFT_K  = {shift_k};
    localparam integer OUT_W    = {out_w};
    localparam integer OUT_E    = {out_e};
    localparam integer OUT_F    = {out_f};
    localparam integer OUT_P    = {out_p};
    localparam integer OUT_BIAS = {out_bias};
    localparam integer OUT_EMIN = {out_emin};
    localparam integer OUT_EMAX = {out_emax};
    localparam integer LEAD_W   = {lead_w};

    // operand decode
    wire            sa    = a[IN_W-1];
    wire            sb    = b[IN_W-1];
    wire [IN_E-1:0] ea    = a[IN_W-2:IN_F];
    wire [IN_E-1:0] eb    = b[IN_W-2:IN_F];
    wire [IN_F-1:0] fa    = a[IN_F-1:0];
    wire [IN_F-1:0] fb    = b[IN_F-1:0];
    wire            a_max = &ea;
    wire            b_max = &eb;
    wire            a_zero = (ea == {{IN_E{{1'b0}}}}) && (fa == {{IN_F{{1'b0}}}});
    wire            b_zero = (eb == {{IN_E{{1'b0}}}}) && (fb == {{IN_F{{1'b0}}}});
    wire            a_nan = a_max && (fa != {{IN_F{{1'b0}}}});
    wire            b_nan = b_max && (fb != {{IN_F{{1'b0}}}});
    wire            a_inf = a_max && (fa == {{IN_F{{1'b0}}}});
    wire            b_inf = b_max && (fb == {{IN_F{{1'b0}}}});
    wire [P-1:0]    ma    = {{|ea, fa}};
    wire [P-1:0]    mb    = {{|eb, fb}};
    // subnormals share the smallest normal exponent
    wire signed [SH_W-1:0] xa = (|ea) ? $signed({{{{(SH_W-IN_E){{1'b0}}}}, ea}}) : $signed({{{{(SH_W-1){{1'b0}}}}, 1'b1}});
    wire signed [SH_W-1:0] xb = (|eb) ? $signed({{{{(SH_W-IN_E){{1'b0}}}}, eb}}) : $signed({{{{(SH_W-1){{1'b0}}}}, 1'b1}});

    // exact product, signed and aligned to the accumulator grid
    wire [2*P-1:0]         prod   = ma * mb;
    wire                   psign  = sa ^ sb;
    wire signed [XW-1:0]   uprod  = $signed({{{{(XW-2*P){{1'b0}}}}, prod}});
    wire signed [XW-1:0]   sprod  = psign ? -uprod : uprod;
    wire signed [SH_W-1:0] shift  = xa + xb - SHIFT_K;
    wire [SH_W-1:0]        lshamt = $unsigned(shift);
    wire [SH_W-1:0]        rshamt = $unsigned(-shift);
    wire signed [XW-1:0]   aligned = shift[SH_W-1] ? (sprod >>> rshamt) : (sprod <<< lshamt);
    wire signed [ACC_W-1:0] addend = $signed(aligned[ACC_W-1:0]);

    wire p_nan = a_nan | b_nan | (a_inf & b_zero) | (b_inf & a_zero);
    wire p_inf = (a_inf | b_inf) & ~p_nan;

    reg signed [{acc_hi}:0] acc;
    reg              nan_q, pinf_q, ninf_q;
    wire signed [ACC_W-1:0] acc_next = (p_nan | p_inf) ? acc : acc + addend;
    wire             nan_next  = nan_q | p_nan;
    wire             pinf_next = pinf_q | (p_inf & ~psign);
    wire             ninf_next = ninf_q | (p_inf & psign);

    // single round-to-nearest-even of acc * 2^LSB into the output format
    function [OUT_W-1:0] round_out;
        input signed [ACC_W-1:0] acc_v;
        input             nan_v;
        input             pinf_v;
        input             ninf_v;
        reg               s;
        reg [ACC_W-1:0]   mag;
        reg [ACC_W-1:0]   low;
        reg [LEAD_W-1:0]  mant;
        reg               guard;
        reg               sticky;
        integer           i, lead, top, q, sh, fld;
        begin
            s = acc_v[ACC_W-1];
            mag = s ? $unsigned(-acc_v) : $unsigned(acc_v);
            lead = -1;
            for (i = 0; i < ACC_W; i = i + 1)
                if (mag[i]) lead = i;
            if (nan_v || (pinf_v && ninf_v)) begin
                round_out = {{1'b0, {{OUT_E{{1'b1}}}}, 1'b1, {{(OUT_F-1){{1'b0}}}}}};
            end else if (pinf_v || ninf_v) begin
                round_out = {{ninf_v, {{OUT_E{{1'b1}}}}, {{OUT_F{{1'b0}}}}}};
            end else if (lead < 0) begin
                round_out = {{OUT_W{{1'b0}}}};
            end else begin
                top = lead + LSB;
                q = ((top > OUT_EMIN) ? top : OUT_EMIN) - (OUT_P - 1);
                sh = q - LSB;
                if (sh <= 0) begin
                    mant = mag << (-sh);
                end else begin
                    mant = mag >> sh;
                    low = mag >> (sh - 1);
                    guard = low[0];
                    low = mag << (ACC_W - sh + 1);
                    sticky = (sh > 1) && (low != {{ACC_W{{1'b0}}}});
                    if (guard && (sticky || mant[0]))
                        mant = mant + 1'b1;
                end
                if (mant[OUT_P]) begin
                    mant = mant >> 1;
                    q = q + 1;
                end
                if (mant[OUT_P-1]) begin
                    top = q + OUT_P - 1;
                    fld = top + OUT_BIAS;
                    if (top > OUT_EMAX)
                        round_out = {{s, {{OUT_E{{1'b1}}}}, {{OUT_F{{1'b0}}}}}};
                    else
                        round_out = {{s, fld[OUT_E-1:0], mant[OUT_F-1:0]}};
                end else begin
                    round_out = {{s, {{OUT_E{{1'b0}}}}, mant[OUT_F-1:0]}};
                end
            end
        end
    endfunction

    always @(posedge clk) begin
        if (rst) begin
            acc       <= {{ACC_W{{1'b0}}}};
            nan_q     <= 1'b0;
            pinf_q    <= 1'b0;
            ninf_q    <= 1'b0;
            valid_out <= 1'b0;
            result    <= {{OUT_W{{1'b0}}}};
        end else begin
            valid_out <= 1'b0;
            if (valid_in) begin
                if (last) begin
                    result    <= round_out(acc_next, nan_next, pinf_next, ninf_next);
                    valid_out <= 1'b1;
                    acc       <= {{ACC_W{{1'b0}}}};
                    nan_q     <= 1'b0;
                    pinf_q    <= 1'b0;
                    ninf_q    <= 1'b0;
                end else begin
                    acc       <= acc_next;
                    nan_q     <= nan_next;
                    pinf_q    <= pinf_next;
                    ninf_q    <= ninf_next;
                end
            end
        end
    end
endmodule
"""


def emit_fdp(params: PipelineParams, cfg: AccumConfig, fmt_in: FormatSpec, fmt_out: FormatSpec,
             module_name: Optional[str] = None) -> str:
    """Verilog-2001 source for one FDP module; byte-identical for equal inputs."""
    if not (fmt_in.is_ieee and fmt_out.is_ieee):
        raise UnsupportedFeature("posit datapaths are not emitted; use an IEEE-like format")
    if params != derive_params(fmt_in, cfg, fmt_out):
        raise ValueError("params do not match the given formats and config")
    name = module_name or default_module_name(fmt_in, cfg, fmt_out)
    if not re.fullmatch(r"[A-Za-z_][A-Za-z0-9_]*", name):
        raise ValueError(f"{name!r} is not a Verilog identifier")
    p = fmt_in.precision
    unit_bias = fmt_in.bias + p - 1
    shift_k = 2 * unit_bias + cfg.lsb
    # biased exponents 1..2^E-1 on each side
    emax_biased = (1 << fmt_in.exp_bits) - 1
    sh_w = max(_signed_bits(2 - shift_k, 2 * emax_biased - shift_k), fmt_in.exp_bits + 2)
    xw = params.acc_width + 2 * p + 1
    # mant must hold a left-aligned copy of the register as well as OUT_P+1 bits
    lead_w = max(fmt_out.precision + 1, params.acc_width) + 1
    return _TEMPLATE.format(
        name=name, fin=fmt_in.name, fout=fmt_out.name,
        ovf=cfg.ovf, msb=cfg.msb, lsb=cfg.lsb,
        in_w=params.in_width, in_hi=params.in_width - 1,
        in_e=fmt_in.exp_bits, in_f=fmt_in.frac_bits, p=p,
        acc_w=params.acc_width, acc_hi=params.acc_width - 1, sh_w=sh_w, xw=xw, shift_k=shift_k,
        out_w=params.out_width, out_hi=params.out_width - 1,
        out_e=fmt_out.exp_bits, out_f=fmt_out.frac_bits, out_p=fmt_out.precision,
        out_bias=fmt_out.bias, out_emin=fmt_out.emin, out_emax=fmt_out.emax,
        lead_w=lead_w,
    )


# -- structural lint ----------------------------------------------------------

_PORT_RE = re.compile(r"^\s*(input|output)\s+(wire|reg)\s+(?:\[(\d+):0\]\s+)?(\w+)\s*,?\s*$", re.M)
_WORD_RE = re.compile(r"\b(module|endmodule|begin|end|function|endfunction)\b")


def lint(text: str, params: Optional[PipelineParams] = None) -> List[str]:
    """Cheap structural checks; returns a list of problems (empty when clean)."""
    problems = []
    code = re.sub(r"//[^\n]*", "", text)
    words = _WORD_RE.findall(code)
    for opener, closer in (("module", "endmodule"), ("begin", "end"), ("function", "endfunction")):
        if words.count(opener) != words.count(closer):
            problems.append(f"unbalanced {opener}/{closer}: {words.count(opener)} vs {words.count(closer)}")
    depth = 0
    for w in words:
        if w in ("begin", "module", "function"):
            depth += 1
        elif w in ("end", "endmodule", "endfunction"):
            depth -= 1
            if depth < 0:
                problems.append(f"'{w}' without opener")
                depth = 0
    if code.count("(") != code.count(")"):
        problems.append("unbalanced parentheses")
    if code.count("{") != code.count("}"):
        problems.append("unbalanced braces")
    ports = {m.group(4): (m.group(1), int(m.group(3)) + 1 if m.group(3) else 1)
             for m in _PORT_RE.finditer(code)}
    expected = {"clk": ("input", 1), "rst": ("input", 1), "valid_in": ("input", 1),
                "last": ("input", 1), "valid_out": ("output", 1)}
    if params is not None:
        expected.update(a=("input", params.in_width), b=("input", params.in_width),
                        result=("output", params.out_width))
        if not re.search(rf"reg\s+signed\s+\[{params.acc_width - 1}:0\]\s+acc\b", code):
            problems.append(f"no {params.acc_width}-bit accumulator register")
    for port, want in expected.items():
        got = ports.get(port)
        if got != want:
            problems.append(f"port {port}: expected {want}, found {got}")
    return problems


# -- golden vectors -----------------------------------------------------------

class GoldenRow(NamedTuple):
    a: int
    b: int
    last: bool
    expected: Optional[int]


@dataclass
class GoldenVectors:
    fmt_in: FormatSpec
    cfg: AccumConfig
    fmt_out: FormatSpec
    seed: Optional[int]
    rows: list = field(default_factory=list)

    def groups(self):
        """Operand pairs split at ``last`` markers, with each group's expected result."""
        cur = []
        for r in self.rows:
            cur.append(r)
            if r.last:
                yield [c.a for c in cur], [c.b for c in cur], r.expected
                cur = []

    def to_csv(self) -> str:
        out = io.StringIO()
        seed = "" if self.seed is None else self.seed
        out.write(f"# {self.fmt_in.name},{self.cfg},{self.fmt_out.name},{seed}\n")
        out.write("a_hex,b_hex,last,expected_hex\n")
        for r in self.rows:
            exp = self.fmt_out.hex(r.expected) if r.last else ""
            out.write(f"{self.fmt_in.hex(r.a)},{self.fmt_in.hex(r.b)},{int(r.last)},{exp}\n")
        return out.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> GoldenVectors:
        lines = text.splitlines()
        head = lines[0].lstrip("#").strip().split(",")
        fmt_in, cfg, fmt_out = parse_format(head[0]), AccumConfig.parse(head[1]), parse_format(head[2])
        seed = int(head[3]) if len(head) > 3 and head[3] else None
        rows = []
        for ln in lines[2:]:
            if not ln.strip():
                continue
            a, b, last, exp = ln.split(",")
            rows.append(GoldenRow(int(a, 16), int(b, 16), last == "1", int(exp, 16) if exp else None))
        return cls(fmt_in, cfg, fmt_out, seed, rows)


def golden_from_groups(groups, fmt_in: FormatSpec, cfg: AccumConfig, fmt_out: FormatSpec,
                       seed: Optional[int] = None) -> GoldenVectors:
    """Golden vectors for explicit ``(xs, ys)`` groups, expected values from ``fdp``."""
    gv = GoldenVectors(fmt_in, cfg, fmt_out, seed)
    for xs, ys in groups:
        if not xs or len(xs) != len(ys):
            raise ValueError("each group needs matching, nonempty operand lists")
        expected = fdp(xs, ys, fmt_in, cfg, fmt_out)
        for k, (a, b) in enumerate(zip(xs, ys)):
            last = k == len(xs) - 1
            gv.rows.append(GoldenRow(int(a), int(b), last, expected if last else None))
    return gv


def _rand_bits(rng: np.random.Generator, nbits: int) -> int:
    v = 0
    for _ in range(0, nbits, 32):
        v = (v << 32) | int(rng.integers(0, 1 << 32))
    return v & ((1 << nbits) - 1)


def _random_operand(rng: np.random.Generator, fmt: FormatSpec, lo: int, hi: int) -> int:
    r = rng.random()
    if r < 0.03:
        return 0
    if fmt.is_ieee and r < 0.05:
        # subnormal or extreme exponent
        return _rand_bits(rng, fmt.width)
    e = int(rng.integers(lo, hi + 1))
    m = (1 << fmt.fraction_bits) | _rand_bits(rng, fmt.fraction_bits)
    sign = int(rng.integers(0, 2))
    return encode(UnpackedReal.from_int(-m if sign else m, e - fmt.fraction_bits), fmt)


def emit_golden(fmt_in: FormatSpec, cfg: AccumConfig, fmt_out: FormatSpec, n_vectors: int,
                seed: int, max_group: int = 8) -> GoldenVectors:
    """``n_vectors`` seeded operand pairs grouped into dot products of 1..max_group terms."""
    if n_vectors < 1:
        raise ValueError("need at least one vector")
    rng = np.random.default_rng(seed)
    # exponents spread around the accumulator window so both wrap and truncation show up
    lo = max(cfg.lsb // 2 - 4, fmt_in.emin)
    hi = min((cfg.msb + cfg.ovf) // 2 + 2, fmt_in.emax)
    if lo > hi:
        lo, hi = hi, lo
    groups = []
    left = n_vectors
    while left:
        k = min(left, int(rng.integers(1, max_group + 1)))
        xs = [_random_operand(rng, fmt_in, lo, hi) for _ in range(k)]
        ys = [_random_operand(rng, fmt_in, lo, hi) for _ in range(k)]
        groups.append((xs, ys))
        left -= k
    return golden_from_groups(groups, fmt_in, cfg, fmt_out, seed)


def replay(gv: GoldenVectors) -> List[int]:
    """Indices of groups whose expected result the software model does not reproduce."""
    bad = []
    for i, (xs, ys, expected) in enumerate(gv.groups()):
        if fdp(xs, ys, gv.fmt_in, gv.cfg, gv.fmt_out) != expected:
            bad.append(i)
    return bad


def params_dict(params: PipelineParams) -> dict:
    return asdict(params)
