"""Bit-exact codecs between packed computer formats and exact dyadic values.

Every supported format (IEEE-like binaryN, bfloat16 and posit<n,es>) encodes
a finite set of dyadic rationals, so decoding is always exact.  Encoding rounds
once: round-to-nearest-even for IEEE kinds, nearest/ties-to-even on the packed
integer grid for posits.
"""

from __future__ import annotations

import enum
import functools
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Union


class FormatError(ValueError):
    """Raised on malformed format names or bit patterns of the wrong width."""


class Kind(enum.Enum):
    FINITE = "finite"
    ZERO = "zero"
    INF = "inf"
    NAN = "nan"
    NAR = "nar"


@dataclass(frozen=True, slots=True)
class UnpackedReal:
    """Format-agnostic real: ``(-1)**sign * significand * 2**exponent``.

    Finite values are canonical (odd significand).  Zero keeps its sign only so
    IEEE signed zeros survive a round trip.
    """

    sign: int
    exponent: int
    significand: int
    kind: Kind = Kind.FINITE

    @classmethod
    def from_int(cls, mantissa: int, exponent: int = 0) -> UnpackedReal:
        """Canonical value of ``mantissa * 2**exponent`` (mantissa may be negative)."""
        if mantissa == 0:
            return ZERO
        sign = 1 if mantissa < 0 else 0
        m = -mantissa if sign else mantissa
        tz = (m & -m).bit_length() - 1
        return cls(sign, exponent + tz, m >> tz)

    @classmethod
    def zero(cls, sign: int = 0) -> UnpackedReal:
        return cls(sign, 0, 0, Kind.ZERO)

    @classmethod
    def inf(cls, sign: int = 0) -> UnpackedReal:
        return cls(sign, 0, 0, Kind.INF)

    @property
    def is_finite(self) -> bool:
        return self.kind is Kind.FINITE or self.kind is Kind.ZERO

    @property
    def is_zero(self) -> bool:
        return self.kind is Kind.ZERO

    @property
    def is_nan(self) -> bool:
        return self.kind is Kind.NAN or self.kind is Kind.NAR

    def signed_significand(self) -> int:
        if self.kind is not Kind.FINITE:
            return 0
        return -self.significand if self.sign else self.significand

    def to_fraction(self) -> Fraction:
        if self.kind is Kind.ZERO:
            return Fraction(0)
        if self.kind is not Kind.FINITE:
            raise ValueError(f"{self.kind.value} has no rational value")
        m = self.signed_significand()
        if self.exponent >= 0:
            return Fraction(m << self.exponent)
        return Fraction(m, 1 << -self.exponent)

    def __float__(self) -> float:
        if self.kind is Kind.NAN or self.kind is Kind.NAR:
            return float("nan")
        if self.kind is Kind.INF:
            return float("-inf") if self.sign else float("inf")
        if self.kind is Kind.ZERO:
            return -0.0 if self.sign else 0.0
        try:
            return float(self.to_fraction())
        except OverflowError:
            return float("-inf") if self.sign else float("inf")

    def __neg__(self) -> UnpackedReal:
        if self.is_nan:
            return self
        return UnpackedReal(self.sign ^ 1, self.exponent, self.significand, self.kind)


ZERO = UnpackedReal(0, 0, 0, Kind.ZERO)
ONE = UnpackedReal(0, 0, 1)
NAN = UnpackedReal(0, 0, 0, Kind.NAN)
NAR = UnpackedReal(0, 0, 0, Kind.NAR)


@dataclass(frozen=True, slots=True)
class FormatSpec:
    """Descriptor of a packed format.

    ``kind`` is ``"ieee"`` (with ``exp_bits``/``frac_bits``) or ``"posit"``
    (with ``n``/``es``).  bfloat16 is simply ``ieee(8, 7)``.
    """

    kind: str
    exp_bits: int = 0
    frac_bits: int = 0
    n: int = 0
    es: int = 0

    def __post_init__(self) -> None:
        if self.kind == "ieee":
            if self.exp_bits < 2 or self.frac_bits < 1:
                raise FormatError(f"bad IEEE geometry ({self.exp_bits}, {self.frac_bits})")
        elif self.kind == "posit":
            if self.n < 3 or self.es < 0:
                raise FormatError(f"bad posit geometry <{self.n},{self.es}>")
        else:
            raise FormatError(f"unknown format kind {self.kind!r}")

    @property
    def is_ieee(self) -> bool:
        return self.kind == "ieee"

    @property
    def is_posit(self) -> bool:
        return self.kind == "posit"

    @property
    def width(self) -> int:
        if self.is_ieee:
            return 1 + self.exp_bits + self.frac_bits
        return self.n

    @property
    def precision(self) -> int:
        """Significand bits including the hidden bit (posit: at the shortest regime)."""
        if self.is_ieee:
            return self.frac_bits + 1
        return max(self.n - 2 - self.es, 1)

    @property
    def fraction_bits(self) -> int:
        return self.precision - 1

    @property
    def bias(self) -> int:
        if self.is_ieee:
            return (1 << (self.exp_bits - 1)) - 1
        return 0

    @property
    def emax(self) -> int:
        if self.is_ieee:
            return self.bias
        return (self.n - 2) << self.es

    @property
    def emin(self) -> int:
        if self.is_ieee:
            return 1 - self.bias
        return -((self.n - 2) << self.es)

    @property
    def name(self) -> str:
        if self.is_posit:
            return f"posit{self.n}_{self.es}"
        for alias, spec in _NAMED.items():
            if spec == self:
                return alias
        return f"ieee{self.exp_bits}_{self.frac_bits}"

    @property
    def hex_digits(self) -> int:
        return (self.width + 3) // 4

    def hex(self, bits: int) -> str:
        return f"0x{int(bits):0{self.hex_digits}X}"

    def __str__(self) -> str:
        return self.name


def ieee(exp_bits: int, frac_bits: int) -> FormatSpec:
    return FormatSpec("ieee", exp_bits=exp_bits, frac_bits=frac_bits)


def posit(n: int, es: int) -> FormatSpec:
    return FormatSpec("posit", n=n, es=es)


BINARY16 = ieee(5, 10)
BFLOAT16 = ieee(8, 7)
BINARY32 = ieee(8, 23)
BINARY64 = ieee(11, 52)
BINARY128 = ieee(15, 112)
POSIT16 = posit(16, 1)
POSIT32 = posit(32, 2)

_NAMED = {
    "binary16": BINARY16,
    "bfloat16": BFLOAT16,
    "binary32": BINARY32,
    "binary64": BINARY64,
    "binary128": BINARY128,
}
_ALIASES = {"half": "binary16", "float": "binary32", "single": "binary32",
            "double": "binary64", "quad": "binary128", "bf16": "bfloat16"}

_POSIT_RE = re.compile(r"posit(\d+)(?:_|es|<|,)?(\d+)?>?$")
_IEEE_RE = re.compile(r"ieee_?(\d+)_(\d+)$")


def parse_format(name: str) -> FormatSpec:
    """Resolve ``binary64``, ``bfloat16``, ``posit16_1``, ``ieee8_23`` and friends."""
    key = name.strip().lower()
    key = _ALIASES.get(key, key)
    if key in _NAMED:
        return _NAMED[key]
    m = _POSIT_RE.match(key)
    if m:
        n = int(m.group(1))
        es = int(m.group(2)) if m.group(2) is not None else (1 if n <= 16 else 2)
        return posit(n, es)
    m = _IEEE_RE.match(key)
    if m:
        return ieee(int(m.group(1)), int(m.group(2)))
    raise FormatError(f"unknown format {name!r}")


def _rne_shift(m: int, k: int) -> int:
    """Round ``m / 2**k`` to nearest, ties to even (m >= 0, k > 0)."""
    q = m >> k
    r = m - (q << k)
    half = 1 << (k - 1)
    if r > half or (r == half and q & 1):
        q += 1
    return q


# -- decode -----------------------------------------------------------------

@functools.lru_cache(maxsize=1 << 17)
def decode(bits: int, fmt: FormatSpec) -> UnpackedReal:
    """Exact value of a packed bit pattern."""
    bits = int(bits)
    if bits < 0 or bits >> fmt.width:
        raise FormatError(f"{bits:#x} does not fit in {fmt.width}-bit {fmt.name}")
    if fmt.is_ieee:
        return _decode_ieee(bits, fmt)
    return _decode_posit(bits, fmt)


def _decode_ieee(bits: int, fmt: FormatSpec) -> UnpackedReal:
    f = fmt.frac_bits
    sign = bits >> (fmt.width - 1)
    field = (bits >> f) & ((1 << fmt.exp_bits) - 1)
    frac = bits & ((1 << f) - 1)
    if field == (1 << fmt.exp_bits) - 1:
        return NAN if frac else UnpackedReal.inf(sign)
    if field == 0:
        if frac == 0:
            return UnpackedReal.zero(sign)
        m, e = frac, fmt.emin - f
    else:
        m, e = frac | (1 << f), field - fmt.bias - f
    tz = (m & -m).bit_length() - 1
    return UnpackedReal(sign, e + tz, m >> tz)


def _decode_posit(bits: int, fmt: FormatSpec) -> UnpackedReal:
    n, es = fmt.n, fmt.es
    if bits == 0:
        return ZERO
    if bits == 1 << (n - 1):
        return NAR
    sign = bits >> (n - 1)
    if sign:
        bits = (-bits) & ((1 << n) - 1)
    first = (bits >> (n - 2)) & 1
    i = n - 2
    run = 0
    while i >= 0 and (bits >> i) & 1 == first:
        run += 1
        i -= 1
    k = run - 1 if first else -run
    # bit i is the regime terminator; everything below it is exponent + fraction
    rest_len = max(i, 0)
    rest = bits & ((1 << rest_len) - 1)
    if rest_len >= es:
        fl = rest_len - es
        ex = rest >> fl
        frac = rest & ((1 << fl) - 1)
    else:
        fl = 0
        ex = rest << (es - rest_len)
        frac = 0
    m = (1 << fl) | frac
    tz = (m & -m).bit_length() - 1
    return UnpackedReal(sign, (k << es) + ex - fl + tz, m >> tz)


# -- encode -----------------------------------------------------------------

Number = Union[UnpackedReal, Fraction, int]


def encode(x: Number, fmt: FormatSpec) -> int:
    """Round an exact value into ``fmt`` and return its bit pattern.

    ``x`` may also be an ``int`` or a non-dyadic ``Fraction`` (e.g. a parsed
    decimal literal); those are rounded correctly as well.
    """
    if not isinstance(x, UnpackedReal):
        x = _from_rational(Fraction(x), fmt)
    if fmt.is_ieee:
        return _encode_ieee(x, fmt)
    return _encode_posit(x, fmt)


def _from_rational(q: Fraction, fmt: FormatSpec) -> UnpackedReal:
    num, den = q.numerator, q.denominator
    if num == 0:
        return ZERO
    if den & (den - 1) == 0:
        return UnpackedReal.from_int(num, 1 - den.bit_length())
    sign = 1 if num < 0 else 0
    num = abs(num)
    # enough bits below the leading one that a trailing sticky bit decides ties
    keep = max(fmt.precision, fmt.width) + 4
    k = keep - (num.bit_length() - den.bit_length())
    if k >= 0:
        m, r = divmod(num << k, den)
    else:
        m, r = divmod(num, den << -k)
    m = (m << 1) | (1 if r else 0)
    return UnpackedReal.from_int(-m if sign else m, -k - 1)


def _encode_ieee(x: UnpackedReal, fmt: FormatSpec) -> int:
    f, p, w = fmt.frac_bits, fmt.precision, fmt.width
    expmask = (1 << fmt.exp_bits) - 1
    if x.kind is Kind.NAN or x.kind is Kind.NAR:
        return (expmask << f) | (1 << (f - 1))
    sbit = x.sign << (w - 1)
    if x.kind is Kind.INF:
        return sbit | (expmask << f)
    if x.kind is Kind.ZERO:
        return sbit
    m, e = x.significand, x.exponent
    top = e + m.bit_length() - 1
    q = max(top, fmt.emin) - (p - 1)
    if e >= q:
        mant = m << (e - q)
    else:
        mant = _rne_shift(m, q - e)
    if mant >> p:
        mant >>= 1
        q += 1
    if mant >> (p - 1):
        top = q + p - 1
        if top > fmt.emax:
            return sbit | (expmask << f)
        return sbit | ((top + fmt.bias) << f) | (mant - (1 << f))
    return sbit | mant


def _encode_posit(x: UnpackedReal, fmt: FormatSpec) -> int:
    n, es = fmt.n, fmt.es
    if x.kind is Kind.ZERO:
        return 0
    if x.kind is not Kind.FINITE:
        return 1 << (n - 1)
    m, e = x.significand, x.exponent
    fl = m.bit_length() - 1
    top = e + fl
    if top >= fmt.emax:
        body = (1 << (n - 1)) - 1
    elif top < fmt.emin:
        body = 1
    else:
        k = top >> es
        ex = top & ((1 << es) - 1)
        if k >= 0:
            regime, rl = ((1 << (k + 1)) - 1) << 1, k + 2
        else:
            regime, rl = 1, 1 - k
        string = (((regime << es) | ex) << fl) | (m - (1 << fl))
        length = rl + es + fl
        if length <= n - 1:
            body = string << (n - 1 - length)
        else:
            body = _rne_shift(string, length - (n - 1))
    if x.sign:
        return (-body) & ((1 << n) - 1)
    return body


# -- exact arithmetic helpers ------------------------------------------------

def mul(a: UnpackedReal, b: UnpackedReal) -> UnpackedReal:
    """Exact product with IEEE special-value rules (NaR behaves as NaN)."""
    if a.is_nan or b.is_nan:
        return NAN
    sign = a.sign ^ b.sign
    if a.kind is Kind.INF or b.kind is Kind.INF:
        if a.is_zero or b.is_zero:
            return NAN
        return UnpackedReal.inf(sign)
    if a.is_zero or b.is_zero:
        return UnpackedReal.zero(sign)
    # odd * odd stays odd, so the product is already canonical
    return UnpackedReal(sign, a.exponent + b.exponent, a.significand * b.significand)


def add(a: UnpackedReal, b: UnpackedReal) -> UnpackedReal:
    """Exact sum; an exact zero result is +0 unless both operands are -0."""
    if a.is_nan or b.is_nan:
        return NAN
    if a.kind is Kind.INF or b.kind is Kind.INF:
        if a.kind is Kind.INF and b.kind is Kind.INF and a.sign != b.sign:
            return NAN
        return a if a.kind is Kind.INF else b
    if a.is_zero and b.is_zero:
        return UnpackedReal.zero(a.sign & b.sign)
    if a.is_zero:
        return b
    if b.is_zero:
        return a
    e = min(a.exponent, b.exponent)
    total = (a.signed_significand() << (a.exponent - e)) + (b.signed_significand() << (b.exponent - e))
    return UnpackedReal.from_int(total, e)


def round_to(x: UnpackedReal, fmt: FormatSpec) -> UnpackedReal:
    """Value of ``x`` after one rounding into ``fmt``."""
    return decode(encode(x, fmt), fmt)


_HEX_RE = re.compile(r"0x[0-9a-f_]+$", re.IGNORECASE)


def parse_value(text: str, fmt: FormatSpec) -> int:
    """Parse a hex bit pattern (``0x...``) or a decimal literal into ``fmt``.

    Decimal literals are rounded once into the format.
    """
    s = text.strip()
    if _HEX_RE.match(s):
        bits = int(s, 16)
        if bits >> fmt.width:
            raise FormatError(f"{s} is wider than {fmt.width}-bit {fmt.name}")
        return bits
    low = s.lower().lstrip("+")
    if low in ("nan", "-nan", "nar"):
        return encode(NAN, fmt)
    if low in ("inf", "infinity", "-inf", "-infinity"):
        return encode(UnpackedReal.inf(1 if low.startswith("-") else 0), fmt)
    try:
        q = Fraction(s)
    except ValueError:
        raise FormatError(f"cannot parse {text!r} as a number") from None
    if q == 0 and s.startswith("-"):
        return encode(UnpackedReal.zero(1), fmt)
    return encode(q, fmt)
