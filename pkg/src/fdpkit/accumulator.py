"""Tailored fixed-point accumulator with <ovf, msb, lsb> geometry.

The register holds a W-bit two's-complement integer whose unit weighs
``2**lsb``.  Exact products are floored onto that grid and added modulo
``2**W``; nothing is rounded until :meth:`Accumulator.round_into`.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass

from .formats import NAN, FormatSpec, Kind, UnpackedReal, encode


class InvalidConfig(ValueError):
    pass


class Sticky(enum.IntFlag):
    NONE = 0
    NAN = 1
    INF_POS = 2
    INF_NEG = 4
    OVERFLOW = 8
    INEXACT = 16

    @property
    def poisoned(self) -> bool:
        return bool(self & (Sticky.NAN | Sticky.INF_POS | Sticky.INF_NEG))


_ACC_RE = re.compile(r"^\s*(\d+)\s*:\s*([+-]?\d+)\s*:\s*([+-]?\d+)\s*$")


@dataclass(frozen=True, slots=True)
class AccumConfig:
    ovf: int
    msb: int
    lsb: int

    def __post_init__(self) -> None:
        if self.ovf < 0:
            raise InvalidConfig(f"ovf must be nonnegative, got {self.ovf}")
        if self.lsb > self.msb:
            raise InvalidConfig(f"lsb {self.lsb} above msb {self.msb}")
        if self.width < 2:
            raise InvalidConfig(f"width {self.width} < 2 for {self}")

    @property
    def width(self) -> int:
        return self.ovf + self.msb - self.lsb + 1

    @classmethod
    def parse(cls, text: str) -> AccumConfig:
        """Parse ``ovf:msb:lsb`` (lsb is signed, e.g. ``30:30:-30``)."""
        m = _ACC_RE.match(text)
        if not m:
            raise InvalidConfig(f"accumulator config must look like ovf:msb:lsb, got {text!r}")
        return cls(int(m.group(1)), int(m.group(2)), int(m.group(3)))

    def __str__(self) -> str:
        return f"{self.ovf}:{self.msb}:{self.lsb}"


def width(cfg: AccumConfig) -> int:
    return cfg.width


class Accumulator:
    """Single-owner mutable scratchpad.  Use :func:`zero` to create one."""

    __slots__ = ("cfg", "register", "sticky", "_w", "_mod", "_lo", "_hi")

    def __init__(self, cfg: AccumConfig, register: int = 0, sticky: Sticky = Sticky.NONE):
        self.cfg = cfg
        self._w = cfg.width
        self._mod = 1 << self._w
        self._hi = (1 << (self._w - 1)) - 1
        self._lo = -(1 << (self._w - 1))
        if not self._lo <= register <= self._hi:
            raise ValueError(f"register {register} outside {self._w}-bit range")
        self.register = register
        self.sticky = Sticky(sticky)

    def __repr__(self) -> str:
        return f"Accumulator(<{self.cfg}>, register={self.register}, sticky={self.sticky!r})"

    @property
    def poisoned(self) -> bool:
        return self.sticky.poisoned

    def add_scaled(self, mantissa: int, exponent: int) -> Accumulator:
        """Accumulate the exact value ``mantissa * 2**exponent``."""
        if mantissa == 0:
            return self
        shift = exponent - self.cfg.lsb
        if shift >= 0:
            if shift >= self._w:
                # contributes 0 mod 2**W but certainly leaves the signed range
                self.sticky |= Sticky.OVERFLOW
                return self
            addend = mantissa << shift
        else:
            addend = mantissa >> -shift
            if addend << -shift != mantissa:
                self.sticky |= Sticky.INEXACT
        total = self.register + addend
        if total < self._lo or total > self._hi:
            self.sticky |= Sticky.OVERFLOW
            total = ((total - self._lo) % self._mod) + self._lo
        self.register = total
        return self

    def add(self, x: UnpackedReal) -> Accumulator:
        """Accumulate a single exact value (poison rules as for a product with 1)."""
        if x.kind is Kind.FINITE:
            return self.add_scaled(x.signed_significand(), x.exponent)
        if x.kind is Kind.INF:
            self.sticky |= Sticky.INF_NEG if x.sign else Sticky.INF_POS
        elif x.is_nan:
            self.sticky |= Sticky.NAN
        return self

    def mac(self, a: UnpackedReal, b: UnpackedReal) -> Accumulator:
        """Accumulate the exact product ``a * b``."""
        ka, kb = a.kind, b.kind
        if ka is Kind.FINITE and kb is Kind.FINITE:
            m = a.significand * b.significand
            return self.add_scaled(-m if a.sign ^ b.sign else m, a.exponent + b.exponent)
        if a.is_nan or b.is_nan:
            self.sticky |= Sticky.NAN
        elif ka is Kind.INF or kb is Kind.INF:
            if ka is Kind.ZERO or kb is Kind.ZERO:
                self.sticky |= Sticky.NAN
            else:
                self.sticky |= Sticky.INF_NEG if a.sign ^ b.sign else Sticky.INF_POS
        return self

    def to_exact(self) -> UnpackedReal:
        """``register * 2**lsb``; a poisoned accumulator yields NaN or a signed inf."""
        if self.sticky & Sticky.NAN:
            return NAN
        pos = bool(self.sticky & Sticky.INF_POS)
        neg = bool(self.sticky & Sticky.INF_NEG)
        if pos and neg:
            return NAN
        if pos or neg:
            return UnpackedReal.inf(1 if neg else 0)
        return UnpackedReal.from_int(self.register, self.cfg.lsb)

    def round_into(self, fmt: FormatSpec) -> int:
        """The single final rounding into ``fmt``."""
        return encode(self.to_exact(), fmt)

    def copy(self) -> Accumulator:
        return Accumulator(self.cfg, self.register, self.sticky)


def zero(cfg: AccumConfig) -> Accumulator:
    return Accumulator(cfg)
