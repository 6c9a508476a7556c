"""Pure-Python twins of the compiled kernels in ``_core.pyx``."""

from __future__ import annotations

from .accumulator import Sticky

_FRAC_MASK = (1 << 52) - 1


def _unpack(bits: int):
    field = (bits >> 52) & 0x7FF
    frac = bits & _FRAC_MASK
    if field == 0x7FF:
        return (2 if frac else 1), 0, 0
    if field == 0:
        return 0, frac, -1074
    return 0, frac | (1 << 52), field - 1075


def fdp_f64(x, y, width: int, lsb: int):
    """Accumulate ``sum(x[i] * y[i])`` into a ``width``-bit register with unit ``2**lsb``.

    Returns ``(register, flags)``.
    """
    if len(x) != len(y):
        raise ValueError("length mismatch")
    hi = (1 << (width - 1)) - 1
    lo = -(1 << (width - 1))
    mod = 1 << width
    reg = 0
    flags = 0
    for xb, yb in zip(x, y):
        xb = int(xb)
        yb = int(yb)
        ka, sa, ea = _unpack(xb)
        kb, sb, eb = _unpack(yb)
        neg = (xb ^ yb) >> 63
        if ka == 2 or kb == 2:
            flags |= Sticky.NAN
            continue
        if ka == 1 or kb == 1:
            if (ka == 0 and sa == 0) or (kb == 0 and sb == 0):
                flags |= Sticky.NAN
            else:
                flags |= Sticky.INF_NEG if neg else Sticky.INF_POS
            continue
        if sa == 0 or sb == 0:
            continue
        p = sa * sb
        if neg:
            p = -p
        shift = ea + eb - lsb
        if shift >= width:
            flags |= Sticky.OVERFLOW
            continue
        if shift >= 0:
            addend = p << shift
        else:
            addend = p >> -shift
            if addend << -shift != p:
                flags |= Sticky.INEXACT
            if addend == 0:
                continue
        reg += addend
        if reg < lo or reg > hi:
            flags |= Sticky.OVERFLOW
            reg = ((reg - lo) % mod) + lo
    return reg, int(flags)


def _decode(bits: int):
    kind, sig, exp = _unpack(bits)
    sign = bits >> 63
    return kind, (-sig if sign else sig), exp, sign


def fma_chain_f64(x, y) -> int:
    """Left-to-right ``s = fma(x[i], y[i], s)`` from ``s = +0``; returns the bits of ``s``."""
    from .formats import BINARY64, UnpackedReal, add, decode, encode, mul

    if len(x) != len(y):
        raise ValueError("length mismatch")
    s = UnpackedReal.zero()
    for xb, yb in zip(x, y):
        s = decode(encode(add(s, mul(decode(int(xb), BINARY64), decode(int(yb), BINARY64))), BINARY64), BINARY64)
    return encode(s, BINARY64)
