"""Ground truth and metrics: exact oracle, correct bits, reproducibility probe,
ill-conditioned dot-product generator and bits-per-watt reporting."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, NamedTuple, Optional, Sequence

import numpy as np

from .formats import (
    BINARY64,
    NAN,
    FormatSpec,
    Kind,
    UnpackedReal,
    decode,
    encode,
)
from .kernels import KernelSpec

DEFAULT_SEED = 20221


# -- oracle -------------------------------------------------------------------

def exact_dot(x: Sequence[UnpackedReal], y: Sequence[UnpackedReal]) -> UnpackedReal:
    """Exact ``sum(x[i] * y[i])`` by brute-force big-integer alignment.

    Shares no code with the accumulator.  Any non-finite operand yields NaN.
    """
    if len(x) != len(y):
        raise ValueError(f"length mismatch: {len(x)} vs {len(y)}")
    terms = []
    for a, b in zip(x, y):
        if not (a.is_finite and b.is_finite):
            return NAN
        if a.kind is Kind.ZERO or b.kind is Kind.ZERO:
            continue
        m = a.significand * b.significand
        terms.append((-m if a.sign != b.sign else m, a.exponent + b.exponent))
    if not terms:
        return UnpackedReal.zero()
    low = min(e for _, e in terms)
    return UnpackedReal.from_int(sum(m << (e - low) for m, e in terms), low)


def exact_dot_bits(x: Sequence[int], y: Sequence[int], fmt: FormatSpec) -> UnpackedReal:
    return exact_dot([decode(int(v), fmt) for v in x], [decode(int(v), fmt) for v in y])


def abs_dot(x: Sequence[UnpackedReal], y: Sequence[UnpackedReal]) -> Fraction:
    """``sum(|x[i] * y[i]|)`` exactly (finite operands)."""
    return sum((abs(a.to_fraction() * b.to_fraction()) for a, b in zip(x, y)), Fraction(0))


def condition(x: Sequence[UnpackedReal], y: Sequence[UnpackedReal],
              exact: Optional[UnpackedReal] = None) -> float:
    """Dot-product condition number ``sum|x*y| / |sum x*y|`` (inf when the sum is 0)."""
    if exact is None:
        exact = exact_dot(x, y)
    if exact.is_zero:
        return math.inf
    ratio = abs_dot(x, y) / abs(exact.to_fraction())
    return _fraction_to_float(ratio)


def _fraction_to_float(q: Fraction) -> float:
    try:
        return float(q)
    except OverflowError:
        return math.inf


# -- correct bits -------------------------------------------------------------

def correct_bits(result: int, fmt: FormatSpec, exact: UnpackedReal) -> float:
    """``-log2`` of the relative error, capped at the format's fraction bits.

    The cap is reached exactly when ``result`` is the correctly rounded value.
    """
    v = decode(int(result), fmt)
    if not v.is_finite or not exact.is_finite:
        return 0.0
    cap = float(fmt.fraction_bits)
    if exact.is_zero:
        return cap if v.is_zero else 0.0
    if int(result) == encode(exact, fmt):
        return cap
    e = exact.to_fraction()
    err = abs(v.to_fraction() - e) / abs(e)
    if err == 0:
        # only a signed-zero mismatch can land here
        return cap
    bits = math.log2(err.denominator) - math.log2(err.numerator)
    return max(0.0, min(bits, math.nextafter(cap, 0.0)))


# -- reproducibility ----------------------------------------------------------

@dataclass
class ReproReport:
    kernel: str
    n: int
    permutations: int
    distinct_results: int
    max_abs_deviation: float
    seed: int

    @property
    def bit_identical(self) -> bool:
        return self.distinct_results == 1

    def as_dict(self) -> dict:
        d = asdict(self)
        d["bit_identical"] = self.bit_identical
        return d


def _as_array(x: Sequence[int], fmt: FormatSpec) -> np.ndarray:
    if fmt.width <= 64:
        return np.asarray([int(v) for v in x], dtype=np.uint64)
    return np.asarray([int(v) for v in x], dtype=object)


def repro_probe(x: Sequence[int], y: Sequence[int], in_fmt: FormatSpec, kernel: KernelSpec,
                K: int = 1000, seed: int = DEFAULT_SEED) -> ReproReport:
    """Run ``kernel`` on ``K`` seeded simultaneous permutations of the pairs."""
    if K < 2:
        raise ValueError("need at least two permutations")
    if len(x) != len(y):
        raise ValueError(f"length mismatch: {len(x)} vs {len(y)}")
    xs, ys = _as_array(x, in_fmt), _as_array(y, in_fmt)
    rng = np.random.default_rng(seed)
    results = set()
    for _ in range(K):
        perm = rng.permutation(len(xs))
        results.add(kernel.dot(xs[perm], ys[perm], in_fmt))
    values = [decode(r, kernel.out_fmt) for r in results]
    finite = [v.to_fraction() for v in values if v.is_finite]
    if len(finite) != len(values):
        dev = 0.0 if len(values) == 1 else math.nan
    else:
        dev = float(max(finite) - min(finite))
    return ReproReport(kernel.ident, len(xs), K, len(results), dev, seed)


# -- ill-conditioned generator ------------------------------------------------

class GenDot(NamedTuple):
    x: list
    y: list
    exact: UnpackedReal
    cond: float


def _snap(value: Fraction, fmt: FormatSpec, grid_exp: Optional[int]) -> int:
    if grid_exp is not None:
        step = Fraction(2) ** grid_exp
        value = round(value / step) * step
    return encode(value, fmt)


def gen_dot(n: int, target_cond: float, fmt: FormatSpec = BINARY64, seed: int = DEFAULT_SEED,
            grid_exp: Optional[int] = None) -> GenDot:
    """Ill-conditioned dot product in the style of Ogita, Rump and Oishi's GenDot.

    Half of the pairs get random exponents in ``[0, log2(cond)/2]``; each
    remaining ``y[i]`` is chosen to cancel the exact running sum, driving the
    dot product toward a small value at exponents linearly decreasing to 0.
    With ``grid_exp`` every operand is a multiple of ``2**grid_exp``, which
    keeps products on an accumulator grid of ``2**(2*grid_exp)``.
    """
    if n < 6:
        raise ValueError(f"n must be at least 6, got {n}")
    if not target_cond >= 1:
        raise ValueError(f"target condition must be >= 1, got {target_cond}")
    rng = np.random.default_rng(seed)
    b = math.log2(target_cond)

    def rand_val(e: float) -> Fraction:
        return Fraction(float((2.0 * rng.random() - 1.0) * 2.0 ** e))

    x: list = [0] * n
    y: list = [0] * n
    if b < 1:
        for i in range(n):
            x[i] = _snap(Fraction(float(rng.uniform(0.5, 1.0))), fmt, grid_exp)
            y[i] = _snap(Fraction(float(rng.uniform(0.5, 1.0))), fmt, grid_exp)
    else:
        half = n // 2
        exps = np.rint(rng.random(half) * b / 2).astype(int)
        exps[0] = round(b / 2) + 1
        exps[-1] = 0
        partial = Fraction(0)
        for i in range(half):
            xi = _snap(rand_val(int(exps[i])), fmt, grid_exp)
            yi = _snap(rand_val(int(exps[i])), fmt, grid_exp)
            x[i], y[i] = xi, yi
            partial += decode(xi, fmt).to_fraction() * decode(yi, fmt).to_fraction()
        tail = np.rint(np.linspace(b / 2, 0, n - half)).astype(int)
        for j, i in enumerate(range(half, n)):
            while True:
                xi = _snap(rand_val(int(tail[j])), fmt, grid_exp)
                xv = decode(xi, fmt)
                if xv.kind is Kind.FINITE:
                    break
            target = rand_val(int(tail[j]))
            yi = _snap((target - partial) / xv.to_fraction(), fmt, grid_exp)
            x[i], y[i] = xi, yi
            partial += xv.to_fraction() * decode(yi, fmt).to_fraction()
        order = rng.permutation(n)
        x = [x[k] for k in order]
        y = [y[k] for k in order]
    xd = [decode(v, fmt) for v in x]
    yd = [decode(v, fmt) for v in y]
    exact = exact_dot(xd, yd)
    return GenDot(x, y, exact, condition(xd, yd, exact))


def window_grid(lsb: int) -> int:
    """Operand grid exponent that puts every product on an accumulator grid of ``2**lsb``."""
    return -((-lsb) // 2)


# -- power ----------------------------------------------------------------

@dataclass(frozen=True)
class PowerConstants:
    """Fixed unit-power literals in watts, used only as reporting constants; nothing here measures power."""

    fma_binary64: float = 0.266
    fma_binary128: float = 0.549
    fdp_91bit: float = 0.491

    def __post_init__(self) -> None:
        for k, v in asdict(self).items():
            if not v > 0:
                raise ValueError(f"{k} must be positive")

    def watts(self, key: str) -> float:
        table = asdict(self)
        if key not in table:
            raise UnknownKernel(key)
        return table[key]


FIXED_POWER = PowerConstants()


class UnknownKernel(KeyError):
    pass


def power_key(kernel: KernelSpec) -> Optional[str]:
    """Name of the power constant matching ``kernel``, if any."""
    if kernel.kind == "fma":
        key = f"fma_{kernel.acc_fmt.name}"
        return key if key in ("fma_binary64", "fma_binary128") else None
    return f"fdp_{kernel.cfg.width}bit" if kernel.cfg.width == 91 else None


def bits_per_watt(bits: Mapping[str, float],
                  constants: PowerConstants = FIXED_POWER) -> dict:
    """``ratio[(k1, k2)] = (bits[k1] / W[k1]) / (bits[k2] / W[k2])`` for every pair."""
    per_watt = {k: b / constants.watts(k) for k, b in bits.items()}
    table = {}
    for k1, v1 in per_watt.items():
        for k2, v2 in per_watt.items():
            if v2 == 0:
                table[(k1, k2)] = 1.0 if v1 == 0 else math.inf
            else:
                table[(k1, k2)] = v1 / v2
    return table


# -- dot reports ---------------------------------------------------------------

@dataclass
class DotReport:
    n: int
    condition: float
    exact: UnpackedReal
    fmt: FormatSpec
    seed: Optional[int] = None
    target_cond: Optional[float] = None
    results: dict = field(default_factory=dict)  # kernel id -> (bits, correct_bits, power key)


def dot_report(x: Sequence[int], y: Sequence[int], in_fmt: FormatSpec,
               kernels: Iterable[KernelSpec], seed: Optional[int] = None,
               target_cond: Optional[float] = None) -> DotReport:
    xd = [decode(int(v), in_fmt) for v in x]
    yd = [decode(int(v), in_fmt) for v in y]
    exact = exact_dot(xd, yd)
    cond = condition(xd, yd, exact) if exact.kind is not Kind.NAN else math.nan
    rep = DotReport(len(x), cond, exact, in_fmt, seed, target_cond)
    for k in kernels:
        bits = k.dot(x, y, in_fmt)
        rep.results[k.ident] = (bits, correct_bits(bits, k.out_fmt, exact), power_key(k), k.out_fmt)
    return rep


def ssh_sweep(sizes: Sequence[int], conds: Sequence[float], kernels: Sequence[KernelSpec],
              fmt: FormatSpec = BINARY64, seeds: int = 1, seed: int = DEFAULT_SEED,
              grid_exp: Optional[int] = None) -> list:
    """Surrogate for a correct-bits-vs-size study: gen_dot instances through every kernel."""
    reports = []
    for n in sizes:
        for c in conds:
            for s in range(seeds):
                inst_seed = seed + 1000 * s + n
                g = gen_dot(n, c, fmt, inst_seed, grid_exp)
                reports.append(dot_report(g.x, g.y, fmt, kernels, inst_seed, c))
    return reports


CSV_FIELDS = [
    "n", "target_cond", "cond", "seed", "kernel", "result_hex", "correct_bits",
    "watts_paper_constant", "bits_per_watt_paper_constant",
    "ratio_vs_fma_binary64_paper_constant", "ratio_vs_fma_binary128_paper_constant",
]


def report_rows(reports: Iterable[DotReport], constants: PowerConstants = FIXED_POWER) -> list:
    rows = []
    for rep in reports:
        keyed = {pk: cb for (_, cb, pk, _) in rep.results.values() if pk is not None}
        ratios = bits_per_watt(keyed, constants) if keyed else {}
        for kid, (bits, cb, pk, out_fmt) in rep.results.items():
            row = {
                "n": rep.n,
                "target_cond": "" if rep.target_cond is None else f"{rep.target_cond:.6g}",
                "cond": f"{rep.condition:.6g}",
                "seed": "" if rep.seed is None else rep.seed,
                "kernel": kid,
                "result_hex": out_fmt.hex(bits),
                "correct_bits": f"{cb:.4f}",
                "watts_paper_constant": "",
                "bits_per_watt_paper_constant": "",
                "ratio_vs_fma_binary64_paper_constant": "",
                "ratio_vs_fma_binary128_paper_constant": "",
            }
            if pk is not None:
                w = constants.watts(pk)
                row["watts_paper_constant"] = f"{w:g}"
                row["bits_per_watt_paper_constant"] = f"{cb / w:.4f}"
                for other in ("fma_binary64", "fma_binary128"):
                    if other in keyed and other != pk:
                        row[f"ratio_vs_{other}_paper_constant"] = f"{ratios[(pk, other)]:.4f}"
            rows.append(row)
    return rows


def rows_to_csv(rows: Sequence[dict], fields: Sequence[str] = CSV_FIELDS) -> str:
    out = io.StringIO()
    w = csv.DictWriter(out, fieldnames=list(fields), lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return out.getvalue()


def rows_to_json(rows: Sequence[dict], **meta) -> str:
    return json.dumps({**meta, "rows": list(rows)}, indent=2, sort_keys=True)
