"""Dot-product and GEMM kernels: the fused dot product and FMA-chain baselines."""

from __future__ import annotations

import io
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import _backend
from .accumulator import AccumConfig, Accumulator, Sticky, zero
from .formats import (
    BFLOAT16,
    BINARY16,
    BINARY32,
    BINARY64,
    ONE,
    FormatError,
    FormatSpec,
    UnpackedReal,
    add,
    decode,
    encode,
    mul,
    parse_format,
    parse_value,
    round_to,
)


class ShapeError(ValueError):
    """Operand lengths or matrix dimensions do not agree."""


# -- binary64 widening for the compiled path ---------------------------------

_WIDENABLE = {BINARY64: None, BINARY32: np.float32, BFLOAT16: np.float32, BINARY16: np.float16}


def _as_f64_bits(x, fmt: FormatSpec) -> Optional[np.ndarray]:
    """Bit patterns of ``fmt`` re-expressed exactly as binary64 patterns, or None."""
    if fmt not in _WIDENABLE:
        return None
    if isinstance(x, np.ndarray) and x.dtype == np.uint64 and fmt == BINARY64:
        return np.ascontiguousarray(x)
    try:
        raw = np.asarray(x, dtype=np.uint64)
    except (OverflowError, ValueError, TypeError):
        return None
    if raw.ndim != 1:
        raise ShapeError("operands must be one-dimensional")
    if raw.size and int(raw.max()) >> fmt.width:
        raise FormatError(f"bit pattern wider than {fmt.width}-bit {fmt.name}")
    if fmt == BINARY64:
        return np.ascontiguousarray(raw)
    if fmt == BFLOAT16:
        raw = raw << np.uint64(16)
    narrow = raw.astype(np.uint32 if _WIDENABLE[fmt] is np.float32 else np.uint16)
    with np.errstate(invalid="ignore"):
        return narrow.view(_WIDENABLE[fmt]).astype(np.float64).view(np.uint64)


def _check_lengths(x, y) -> None:
    if len(x) != len(y):
        raise ShapeError(f"length mismatch: {len(x)} vs {len(y)}")


# -- dot products -------------------------------------------------------------

def accumulate(x: Sequence[int], y: Sequence[int], in_fmt: FormatSpec, cfg: AccumConfig,
               acc: Optional[Accumulator] = None) -> Accumulator:
    """Add every exact product ``x[i]*y[i]`` into ``acc`` (a fresh one by default)."""
    _check_lengths(x, y)
    if acc is None:
        acc = zero(cfg)
    xa = _as_f64_bits(x, in_fmt)
    ya = _as_f64_bits(y, in_fmt) if xa is not None else None
    if xa is not None and ya is not None:
        register, flags = _backend.fdp_f64(xa, ya, cfg.width, cfg.lsb)
        acc.sticky |= Sticky(flags)
        acc.add_scaled(register, cfg.lsb)
        return acc
    for a, b in zip(x, y):
        acc.mac(decode(int(a), in_fmt), decode(int(b), in_fmt))
    return acc


def fdp(x: Sequence[int], y: Sequence[int], in_fmt: FormatSpec, cfg: AccumConfig,
        out_fmt: Optional[FormatSpec] = None) -> int:
    """Fused dot product: exact accumulation, one rounding into ``out_fmt``."""
    return accumulate(x, y, in_fmt, cfg).round_into(out_fmt or in_fmt)


def fma_chain_dot(x: Sequence[int], y: Sequence[int], in_fmt: FormatSpec,
                  acc_fmt: FormatSpec) -> int:
    """Strict left-to-right ``s = round(s + x[i]*y[i])`` in ``acc_fmt``."""
    _check_lengths(x, y)
    if not acc_fmt.is_ieee:
        raise FormatError("FMA chains accumulate in IEEE-like formats only")
    if acc_fmt == BINARY64:
        xa = _as_f64_bits(x, in_fmt)
        ya = _as_f64_bits(y, in_fmt) if xa is not None else None
        if xa is not None and ya is not None:
            bits = int(_backend.fma_chain_f64(xa, ya))
            # hardware NaNs carry sign/payload; report the canonical one
            return encode(decode(bits, BINARY64), BINARY64)
    s = UnpackedReal.zero()
    for a, b in zip(x, y):
        s = round_to(add(s, mul(decode(int(a), in_fmt), decode(int(b), in_fmt))), acc_fmt)
    return encode(s, acc_fmt)


@dataclass(frozen=True)
class KernelSpec:
    """Either ``fdp`` with an accumulator config or ``fma`` with an accumulation format."""

    kind: str
    out_fmt: FormatSpec
    cfg: Optional[AccumConfig] = None
    acc_fmt: Optional[FormatSpec] = None

    def __post_init__(self) -> None:
        if self.kind == "fdp":
            if self.cfg is None:
                raise ValueError("fdp kernel needs an accumulator config")
        elif self.kind == "fma":
            if self.acc_fmt is None or not self.acc_fmt.is_ieee:
                raise ValueError("fma kernel needs an IEEE-like accumulation format")
        else:
            raise ValueError(f"unknown kernel kind {self.kind!r}")

    @classmethod
    def make_fdp(cls, cfg: AccumConfig, out_fmt: FormatSpec) -> KernelSpec:
        return cls("fdp", out_fmt, cfg=cfg)

    @classmethod
    def make_fma(cls, acc_fmt: FormatSpec, out_fmt: Optional[FormatSpec] = None) -> KernelSpec:
        return cls("fma", out_fmt or acc_fmt, acc_fmt=acc_fmt)

    @classmethod
    def parse(cls, text: str, out_fmt: FormatSpec, cfg: Optional[AccumConfig] = None) -> KernelSpec:
        """``fdp``, ``fdp:30:30:-30`` or ``fma:binary64``."""
        kind, _, rest = text.strip().partition(":")
        if kind == "fdp":
            return cls.make_fdp(AccumConfig.parse(rest) if rest else cfg, out_fmt)
        if kind == "fma":
            acc_fmt = parse_format(rest) if rest else out_fmt
            return cls.make_fma(acc_fmt, acc_fmt)
        raise ValueError(f"unknown kernel {text!r}")

    @property
    def ident(self) -> str:
        if self.kind == "fdp":
            return f"fdp:{self.cfg}"
        return f"fma:{self.acc_fmt.name}"

    def dot(self, x: Sequence[int], y: Sequence[int], in_fmt: FormatSpec) -> int:
        if self.kind == "fdp":
            return fdp(x, y, in_fmt, self.cfg, self.out_fmt)
        bits = fma_chain_dot(x, y, in_fmt, self.acc_fmt)
        if self.out_fmt != self.acc_fmt:
            bits = encode(decode(bits, self.acc_fmt), self.out_fmt)
        return bits


# -- matrices -----------------------------------------------------------------

@dataclass
class PackedMatrix:
    """Row-major matrix of bit patterns in one format."""

    rows: int
    cols: int
    fmt: FormatSpec
    data: list = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.rows <= 0 or self.cols <= 0:
            raise ShapeError(f"bad matrix shape {self.rows}x{self.cols}")
        self.data = [int(v) for v in self.data]
        if len(self.data) != self.rows * self.cols:
            raise ShapeError(f"{len(self.data)} elements for a {self.rows}x{self.cols} matrix")
        for v in self.data:
            if v < 0 or v >> self.fmt.width:
                raise FormatError(f"{v:#x} is not a {self.fmt.name} pattern")

    @classmethod
    def zeros(cls, rows: int, cols: int, fmt: FormatSpec) -> PackedMatrix:
        return cls(rows, cols, fmt, [0] * (rows * cols))

    @classmethod
    def identity(cls, n: int, fmt: FormatSpec) -> PackedMatrix:
        one = encode(ONE, fmt)
        return cls(n, n, fmt, [one if i == j else 0 for i in range(n) for j in range(n)])

    def row(self, i: int) -> list:
        return self.data[i * self.cols:(i + 1) * self.cols]

    def col(self, j: int) -> list:
        return self.data[j::self.cols]

    def __getitem__(self, ij) -> int:
        i, j = ij
        return self.data[i * self.cols + j]

    def to_csv(self) -> str:
        out = io.StringIO()
        out.write(f"{self.rows},{self.cols},{self.fmt.name}\n")
        for i in range(self.rows):
            out.write(",".join(self.fmt.hex(v) for v in self.row(i)))
            out.write("\n")
        return out.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> PackedMatrix:
        """Parse the ``rows,cols,format`` header plus hex or decimal cells."""
        lines = [ln for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
        if not lines:
            raise ShapeError("empty matrix file")
        head = [h.strip() for h in lines[0].split(",")]
        if len(head) != 3:
            raise ShapeError(f"matrix header must be rows,cols,format; got {lines[0]!r}")
        try:
            rows, cols = int(head[0]), int(head[1])
        except ValueError:
            raise ShapeError(f"matrix header must be rows,cols,format; got {lines[0]!r}") from None
        fmt = parse_format(head[2])
        data = []
        for ln in lines[1:]:
            cells = [c for c in ln.split(",") if c.strip()]
            if len(cells) != cols:
                raise ShapeError(f"row has {len(cells)} cells, expected {cols}")
            data.extend(parse_value(c, fmt) for c in cells)
        return cls(rows, cols, fmt, data)

    @classmethod
    def load(cls, path: str | os.PathLike) -> PackedMatrix:
        with open(path) as fh:
            return cls.from_csv(fh.read())

    def save(self, path: str | os.PathLike) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(self.to_csv())


def _is_one(x: UnpackedReal) -> bool:
    return x == ONE


def gemm(alpha: int, A: PackedMatrix, B: PackedMatrix, beta: int, C: Optional[PackedMatrix],
         kernel: KernelSpec, workers: int = 1) -> PackedMatrix:
    """``alpha*A@B + beta*C`` with one rounding per element for the fdp kernel.

    For the fdp kernel ``alpha*A[i,k]`` is formed exactly and every term plus
    ``beta*C[i,j]`` lands in one private accumulator per element.  As in BLAS,
    ``C`` is not read when ``beta`` is zero.  Output is independent of
    ``workers``.
    """
    fmt = A.fmt
    if B.fmt != fmt or (C is not None and C.fmt != fmt):
        raise FormatError("A, B and C must share one storage format")
    if A.cols != B.rows:
        raise ShapeError(f"inner dimensions differ: {A.cols} vs {B.rows}")
    if C is not None and (C.rows, C.cols) != (A.rows, B.cols):
        raise ShapeError(f"C is {C.rows}x{C.cols}, expected {A.rows}x{B.cols}")
    alpha_v = decode(alpha, fmt)
    beta_v = decode(beta, fmt)
    use_c = C is not None and not beta_v.is_zero
    cols_b = [B.col(j) for j in range(B.cols)]

    if kernel.kind == "fdp":
        def element(i: int, j: int) -> int:
            a_row = A.row(i)
            if _is_one(alpha_v):
                acc = accumulate(a_row, cols_b[j], fmt, kernel.cfg)
            else:
                acc = zero(kernel.cfg)
                for a, b in zip(a_row, cols_b[j]):
                    acc.mac(mul(alpha_v, decode(a, fmt)), decode(b, fmt))
            if use_c:
                acc.mac(beta_v, decode(C[i, j], fmt))
            return acc.round_into(kernel.out_fmt)
    else:
        acc_fmt = kernel.acc_fmt

        def element(i: int, j: int) -> int:
            s = decode(fma_chain_dot(A.row(i), cols_b[j], fmt, acc_fmt), acc_fmt)
            if not _is_one(alpha_v):
                s = round_to(mul(alpha_v, s), acc_fmt)
            if use_c:
                s = round_to(add(s, mul(beta_v, decode(C[i, j], fmt))), acc_fmt)
            return encode(s, kernel.out_fmt)

    def row_job(i: int) -> list:
        return [element(i, j) for j in range(B.cols)]

    if workers <= 1:
        rows = [row_job(i) for i in range(A.rows)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(row_job, range(A.rows)))
    return PackedMatrix(A.rows, B.cols, kernel.out_fmt, [v for r in rows for v in r])


__all__ = [
    "KernelSpec", "PackedMatrix", "ShapeError", "accumulate", "fdp", "fma_chain_dot", "gemm",
]
