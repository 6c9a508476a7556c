import struct
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fdpkit.formats import (
    BFLOAT16,
    BINARY16,
    BINARY32,
    BINARY64,
    BINARY128,
    NAN,
    NAR,
    POSIT16,
    POSIT32,
    FormatError,
    Kind,
    UnpackedReal,
    add,
    decode,
    encode,
    ieee,
    mul,
    parse_format,
    parse_value,
    posit,
    round_to,
)


def f64_bits(v: float) -> int:
    return struct.unpack("<Q", struct.pack("<d", v))[0]


def f32_bits(v) -> int:
    return struct.unpack("<I", struct.pack("<f", v))[0]


# -- reference examples ---------------------------------------------------------

def test_decode_one_binary32():
    assert decode(0x3F800000, BINARY32) == UnpackedReal(0, 0, 1)


def test_decode_smallest_subnormal():
    assert decode(0x00000001, BINARY32) == UnpackedReal(0, -149, 1)


def test_decode_posit_one_and_nar():
    assert decode(0x4000, POSIT16) == UnpackedReal(0, 0, 1)
    assert decode(0x8000, POSIT16).kind is Kind.NAR
    assert decode(0x0000, POSIT16).is_zero


def test_encode_tie_to_even():
    x = UnpackedReal.from_int((1 << 24) + 1, -24)
    assert encode(x, BINARY32) == 0x3F800000
    # one ulp above the tie rounds up
    assert encode(Fraction(1) + Fraction(3, 1 << 25), BINARY32) == 0x3F800001


def test_posit_saturates_to_maxpos():
    assert encode(UnpackedReal.from_int(1, 1000), POSIT16) == 0x7FFF
    assert encode(UnpackedReal.from_int(-1, 1000), POSIT16) == 0x8001
    assert encode(UnpackedReal.from_int(1, -1000), POSIT16) == 0x0001


def test_nan_inf_into_posit_is_nar():
    assert encode(NAN, POSIT16) == 0x8000
    assert encode(UnpackedReal.inf(1), POSIT32) == 0x80000000


def test_overflow_to_inf_and_underflow_to_zero():
    assert encode(UnpackedReal.from_int(1, 128), BINARY32) == 0x7F800000
    assert encode(UnpackedReal.from_int(-1, 128), BINARY32) == 0xFF800000
    assert encode(UnpackedReal.from_int(1, -151), BINARY32) == 0
    # exactly half the smallest subnormal ties to zero, just above rounds up
    assert encode(UnpackedReal.from_int(1, -150), BINARY32) == 0
    assert encode(UnpackedReal.from_int(3, -151), BINARY32) == 1


def test_width_mismatch_rejected():
    with pytest.raises(FormatError):
        decode(1 << 16, BINARY16)
    with pytest.raises(FormatError):
        decode(-1, BINARY32)


def test_format_names_round_trip():
    for fmt in (BINARY16, BFLOAT16, BINARY32, BINARY64, BINARY128, POSIT16, POSIT32):
        assert parse_format(fmt.name) == fmt
    assert parse_format("double") == BINARY64
    assert parse_format("bf16") == BFLOAT16
    assert parse_format("posit8_0") == posit(8, 0)
    with pytest.raises(FormatError):
        parse_format("binary7")


def test_specs_reject_nonsense():
    with pytest.raises(FormatError):
        ieee(1, 3)
    with pytest.raises(FormatError):
        posit(2, 0)


def test_parse_value():
    assert parse_value("0x3ff0000000000000", BINARY64) == 0x3FF0000000000000
    assert parse_value("1", BINARY64) == 0x3FF0000000000000
    assert parse_value("-0", BINARY64) == 1 << 63
    assert parse_value("0.1", BINARY64) == f64_bits(0.1)
    assert parse_value("0.1", BINARY32) == f32_bits(np.float32(0.1))
    assert parse_value("nar", POSIT16) == 0x8000
    with pytest.raises(FormatError):
        parse_value("0x10000", BINARY16)
    with pytest.raises(FormatError):
        parse_value("one", BINARY16)


def test_canonical_nan_collapse():
    assert decode(0x7FC00001, BINARY32).kind is Kind.NAN
    assert encode(decode(0xFFF0000000000001, BINARY64), BINARY64) == 0x7FF8000000000000


def test_zero_signs():
    pz, nz = decode(0, BINARY64), decode(1 << 63, BINARY64)
    assert add(pz, nz) == UnpackedReal.zero(0)
    assert add(nz, nz) == UnpackedReal.zero(1)
    assert mul(nz, decode(f64_bits(3.0), BINARY64)) == UnpackedReal.zero(1)


def test_mul_specials():
    inf, z = UnpackedReal.inf(0), UnpackedReal.zero(0)
    assert mul(inf, z).is_nan
    assert mul(inf, UnpackedReal.from_int(-3)) == UnpackedReal.inf(1)
    assert add(inf, -inf).is_nan
    assert mul(NAR, UnpackedReal.from_int(1)).is_nan


# -- exhaustive 16-bit round trips ----------------------------------------------

@pytest.mark.parametrize("fmt", [BFLOAT16, BINARY16, POSIT16, posit(16, 0), posit(16, 2)],
                         ids=lambda f: f.name)
def test_round_trip_exhaustive_16bit(fmt):
    for bits in range(1 << 16):
        x = decode(bits, fmt)
        out = encode(x, fmt)
        if x.kind is Kind.NAN:
            assert decode(out, fmt).kind is Kind.NAN
        else:
            assert out == bits, hex(bits)


def test_binary16_decode_matches_numpy():
    pats = np.arange(1 << 16, dtype=np.uint16)
    vals = pats.view(np.float16).astype(np.float64)
    for bits, v in zip(pats.tolist(), vals.tolist()):
        x = decode(bits, BINARY16)
        if np.isnan(v):
            assert x.is_nan
        else:
            assert float(x) == v and (x.sign == 1) == (np.signbit(v))


def _posit_reference(bits: int, n: int, es: int) -> Fraction | None:
    """Textbook posit decode from the bit string; None for NaR."""
    if bits == 0:
        return Fraction(0)
    if bits == 1 << (n - 1):
        return None
    neg = bits >> (n - 1)
    if neg:
        bits = (-bits) & ((1 << n) - 1)
    s = format(bits, f"0{n}b")[1:]
    run = len(s) - len(s.lstrip(s[0]))
    k = run - 1 if s[0] == "1" else -run
    rest = s[run + 1:]
    e_str = (rest[:es]).ljust(es, "0")
    e = int(e_str, 2) if es else 0
    f_str = rest[es:]
    frac = Fraction(int(f_str, 2), 1 << len(f_str)) if f_str else Fraction(0)
    v = (1 + frac) * Fraction(2) ** (k * (1 << es) + e)
    return -v if neg else v


@pytest.mark.parametrize("n,es", [(8, 0), (8, 1), (8, 2), (12, 1), (16, 1)])
def test_posit_decode_matches_reference(n, es):
    fmt = posit(n, es)
    for bits in range(1 << n):
        ref = _posit_reference(bits, n, es)
        x = decode(bits, fmt)
        if ref is None:
            assert x.kind is Kind.NAR
        else:
            assert x.to_fraction() == ref


def test_posit_order_is_signed_integer_order():
    fmt = posit(12, 1)
    vals = []
    for s in range(-(1 << 11) + 1, 1 << 11):
        vals.append(decode(s & 0xFFF, fmt).to_fraction())
    assert vals == sorted(vals) and len(set(vals)) == len(vals)


# -- property tests -------------------------------------------------------------

@given(st.floats(allow_nan=False, allow_infinity=True))
def test_binary64_decode_matches_float(v):
    x = decode(f64_bits(v), BINARY64)
    assert float(x) == v
    assert encode(x, BINARY64) == f64_bits(v)


@given(st.floats(allow_nan=False))
def test_encode_binary32_matches_numpy_rounding(v):
    with np.errstate(over="ignore"):
        ref = f32_bits(np.float32(v))
    assert encode(decode(f64_bits(v), BINARY64), BINARY32) == ref


@given(st.floats(allow_nan=False, width=64))
def test_encode_binary16_matches_numpy_rounding(v):
    with np.errstate(over="ignore"):
        ref = int(np.array([v]).astype(np.float16).view(np.uint16)[0])
    assert encode(decode(f64_bits(v), BINARY64), BINARY16) == ref


def _neighbours_worse(q: Fraction, bits: int, fmt) -> bool:
    """No representable neighbour of ``bits`` is strictly nearer to q."""
    mine = abs(decode(bits, fmt).to_fraction() - q)
    for nb in ((bits + 1) % (1 << fmt.width), (bits - 1) % (1 << fmt.width)):
        d = decode(nb, fmt)
        if not d.is_finite or (d.is_zero and not fmt.is_ieee):
            continue  # posits never round a nonzero value to zero
        if abs(d.to_fraction() - q) < mine:
            return False
    return True


@given(st.fractions(min_value=Fraction(1, 1 << 6), max_value=Fraction(1 << 6)), st.booleans())
def test_posit_encode_is_nearest(q, neg):
    # inside this range every posit8/posit16 pattern keeps its full exponent field
    q = -q if neg else q
    for fmt in (POSIT16, posit(8, 1)):
        bits = encode(q, fmt)
        assert _neighbours_worse(q, bits, fmt)


def test_posit_rounds_on_packed_pattern_when_exponent_truncated():
    # near minpos the exponent bit is cut off; 2^-26.68 lies between 2^-28 (0x0001)
    # and 2^-26 (0x0002) and rounds on the bit string, not by value
    q = Fraction(20187, 2177314586624)
    assert encode(q, POSIT16) == 0x0002


@given(st.fractions(min_value=Fraction(-1 << 10), max_value=Fraction(1 << 10)))
def test_ieee_encode_is_nearest(q):
    for fmt in (BINARY16, BFLOAT16):
        bits = encode(q, fmt)
        d = decode(bits, fmt)
        if d.is_finite:
            assert _neighbours_worse(q, bits, fmt)


@given(st.integers(-(1 << 80), 1 << 80), st.integers(-200, 200))
def test_from_int_canonical(m, e):
    x = UnpackedReal.from_int(m, e)
    if m == 0:
        assert x.is_zero
    else:
        assert x.significand % 2 == 1
        assert x.to_fraction() == Fraction(m) * Fraction(2) ** e


@given(st.floats(allow_nan=False, allow_infinity=False), st.floats(allow_nan=False, allow_infinity=False))
def test_exact_mul_add(a, b):
    xa, xb = decode(f64_bits(a), BINARY64), decode(f64_bits(b), BINARY64)
    assert mul(xa, xb).to_fraction() == Fraction(a) * Fraction(b)
    assert add(xa, xb).to_fraction() == Fraction(a) + Fraction(b)
    # one rounding of the exact product is IEEE multiplication
    with np.errstate(all="ignore"):
        assert encode(mul(xa, xb), BINARY64) == f64_bits(float(np.float64(a) * np.float64(b))) or a * b == 0


@given(st.integers(0, (1 << 64) - 1))
def test_round_to_idempotent(bits):
    x = decode(bits, BINARY64)
    y = round_to(x, BINARY32)
    if not y.is_nan:
        assert round_to(y, BINARY32) == y
