import random
import struct
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from fdpkit.accumulator import AccumConfig, Accumulator, InvalidConfig, Sticky, width, zero
from fdpkit.formats import BINARY32, BINARY64, NAN, POSIT16, UnpackedReal, decode

ONE = UnpackedReal.from_int(1)


def val(m, e=0):
    return UnpackedReal.from_int(m, e)


def test_width_examples():
    assert width(AccumConfig(30, 30, -30)) == 91
    assert width(AccumConfig(9, 6, -20)) == 36
    with pytest.raises(InvalidConfig):
        AccumConfig(0, 0, 0)
    with pytest.raises(InvalidConfig):
        AccumConfig(1, -3, 2)
    with pytest.raises(InvalidConfig):
        AccumConfig(-1, 3, 0)


@pytest.mark.parametrize("text,cfg", [
    ("30:30:-30", AccumConfig(30, 30, -30)),
    (" 9 : 6 : -20 ", AccumConfig(9, 6, -20)),
    ("0:4:+0", AccumConfig(0, 4, 0)),
])
def test_parse(text, cfg):
    assert AccumConfig.parse(text) == cfg


@pytest.mark.parametrize("bad", ["30:30", "a:b:c", "-1:3:0", "1:2:3:4", ""])
def test_parse_rejects(bad):
    with pytest.raises(InvalidConfig):
        AccumConfig.parse(bad)


def test_str_round_trips():
    cfg = AccumConfig(9, 6, -20)
    assert str(cfg) == "9:6:-20"
    assert AccumConfig.parse(str(cfg)) == cfg


def test_zero():
    acc = zero(AccumConfig(2, 4, -4))
    assert acc.register == 0 and acc.sticky == Sticky.NONE
    assert acc.to_exact().is_zero
    assert acc.round_into(BINARY32) == 0


def test_grid_placement():
    acc = zero(AccumConfig(2, 4, -4)).mac(ONE, ONE)
    assert acc.register == 16
    assert acc.to_exact() == ONE


def test_wraparound_cancels():
    acc = zero(AccumConfig(0, 4, 0))
    for p in (val(1, 20), val(-1, 20), val(3)):
        acc.mac(p, ONE)
    assert acc.register == 3
    assert acc.sticky & Sticky.OVERFLOW


def test_floor_semantics():
    cfg = AccumConfig(2, 4, -4)
    acc = zero(cfg).mac(val(1, -6), ONE)
    assert acc.register == 0 and acc.sticky & Sticky.INEXACT
    acc = zero(cfg).mac(val(-1, -6), ONE)
    assert acc.register == -1
    assert acc.to_exact() == val(-1, -4)


def test_round_into_examples():
    acc = zero(AccumConfig(4, 4, -4)).mac(val(3), ONE)
    assert acc.round_into(BINARY64) == 0x4008000000000000
    acc = zero(AccumConfig(2, 2, -60)).mac(ONE, ONE).mac(val(1, -52), ONE)
    assert acc.round_into(BINARY64) == 0x3FF0000000000001
    acc = zero(AccumConfig(2, 2, -2)).mac(NAN, ONE)
    assert acc.round_into(POSIT16) == 0x8000


def test_poison_rules():
    cfg = AccumConfig(2, 4, -4)
    inf = UnpackedReal.inf(0)
    assert zero(cfg).mac(inf, val(-2)).to_exact() == UnpackedReal.inf(1)
    assert zero(cfg).mac(inf, UnpackedReal.zero()).to_exact().is_nan
    both = zero(cfg).mac(inf, ONE).mac(inf, val(-1))
    assert both.to_exact().is_nan
    # poison survives later finite products
    acc = zero(cfg).mac(inf, ONE).mac(val(5), ONE)
    assert acc.to_exact() == UnpackedReal.inf(0)
    assert acc.round_into(POSIT16) == 0x8000


def test_huge_product_is_zero_mod_register():
    acc = zero(AccumConfig(0, 4, 0)).mac(val(1, 5), ONE)
    assert acc.register == 0 and acc.sticky & Sticky.OVERFLOW


def test_register_range_checked():
    with pytest.raises(ValueError):
        Accumulator(AccumConfig(0, 4, 0), register=16)


# -- properties -----------------------------------------------------------------

configs = st.builds(
    lambda ovf, msb, span: AccumConfig(ovf, msb, msb - span),
    st.integers(0, 12), st.integers(-20, 20), st.integers(1, 60),
)
dyadics = st.builds(val, st.integers(-(1 << 40), 1 << 40), st.integers(-80, 40))


@given(configs, st.lists(st.tuples(dyadics, dyadics), max_size=30), st.randoms())
def test_permutation_invariant_register(cfg, pairs, rnd):
    ref = zero(cfg)
    for a, b in pairs:
        ref.mac(a, b)
    lo, hi = -(1 << (cfg.width - 1)), (1 << (cfg.width - 1)) - 1
    assert lo <= ref.register <= hi
    for _ in range(5):
        shuffled = pairs[:]
        rnd.shuffle(shuffled)
        acc = zero(cfg)
        for a, b in shuffled:
            acc.mac(a, b)
        assert acc.register == ref.register


def test_permutation_invariance_1000_shuffles():
    rng = random.Random(7)
    cfg = AccumConfig(4, 10, -40)
    pairs = [(val(rng.randrange(-(1 << 50), 1 << 50), rng.randrange(-70, -30)),
              val(rng.randrange(-(1 << 20), 1 << 20), rng.randrange(-30, 0))) for _ in range(200)]
    seen = set()
    for _ in range(1000):
        rng.shuffle(pairs)
        acc = zero(cfg)
        for a, b in pairs:
            acc.mac(a, b)
        seen.add(acc.register)
    assert len(seen) == 1


@given(configs, st.lists(st.integers(), max_size=30))
def test_wrap_correctness(cfg, ks):
    # on-grid addends whose exact total fits: the register recovers it
    w = cfg.width
    lo, hi = -(1 << (w - 1)), (1 << (w - 1)) - 1
    total = sum(ks)
    if not lo <= total <= hi:
        ks = ks + [lo - total if total < lo else hi - total]
    acc = zero(cfg)
    for k in ks:
        acc.mac(val(k, cfg.lsb), ONE)
    assert acc.to_exact().to_fraction() == Fraction(sum(ks)) * Fraction(2) ** cfg.lsb
    assert not acc.sticky & Sticky.INEXACT


@given(configs, st.lists(st.tuples(dyadics, dyadics), max_size=20))
def test_truncation_bound(cfg, pairs):
    exact = sum((a.to_fraction() * b.to_fraction() for a, b in pairs), Fraction(0))
    acc = zero(cfg)
    for a, b in pairs:
        acc.mac(a, b)
    unit = Fraction(2) ** cfg.lsb
    modulus = Fraction(2) ** (cfg.width) * unit
    got = acc.to_exact().to_fraction()
    # floor error lies in (-n*ulp, 0]; compare modulo the register span
    diff = (exact - got) % modulus
    assert diff < len(pairs) * unit or (len(pairs) == 0 and diff == 0)


@given(configs, st.lists(st.tuples(dyadics, dyadics), max_size=20))
def test_flags_are_sticky(cfg, pairs):
    acc = zero(cfg)
    prev = Sticky.NONE
    for a, b in pairs:
        acc.mac(a, b)
        assert acc.sticky & prev == prev
        prev = acc.sticky


def test_exactness_window_binary64():
    rng = random.Random(3)
    cfg = AccumConfig(30, 30, -30)
    for _ in range(200):
        xs = [rng.uniform(-4, 4) for _ in range(50)]
        ys = [rng.uniform(-4, 4) for _ in range(50)]
        # trim to 15 fractional bits so products fall on the 2^-30 grid
        xs = [round(v * 2**15) / 2**15 for v in xs]
        ys = [round(v * 2**15) / 2**15 for v in ys]
        acc = zero(cfg)
        for a, b in zip(xs, ys):
            acc.mac(decode_float(a), decode_float(b))
        exact = sum((Fraction(a) * Fraction(b) for a, b in zip(xs, ys)), Fraction(0))
        assert acc.to_exact().to_fraction() == exact
        assert not acc.sticky


def decode_float(v: float) -> UnpackedReal:
    return decode(struct.unpack("<Q", struct.pack("<d", v))[0], BINARY64)
