"""Compiled core and pure-Python fallback must agree bit for bit."""

import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fdpkit import _backend, _pycore

core = pytest.importorskip("fdpkit._core")

bits64 = st.integers(0, (1 << 64) - 1)
interesting = st.sampled_from([
    0, 1 << 63, 0x7FF0000000000000, 0xFFF0000000000000, 0x7FF8000000000000, 0x0000000000000001,
    0x000FFFFFFFFFFFFF, 0x7FEFFFFFFFFFFFFF, 0x3FF0000000000000, 0xBFF0000000000001,
])
operand = st.one_of(bits64, interesting)


def arr(xs):
    return np.asarray(xs, dtype=np.uint64)


@given(st.lists(st.tuples(operand, operand), max_size=25), st.integers(2, 260), st.integers(-1200, 200))
def test_fdp_f64_agrees(pairs, width, lsb):
    x = arr([a for a, _ in pairs])
    y = arr([b for _, b in pairs])
    assert core.fdp_f64(x, y, width, lsb) == _pycore.fdp_f64(x, y, width, lsb)


@given(st.lists(st.tuples(operand, operand), max_size=25))
def test_fma_chain_agrees(pairs):
    x = arr([a for a, _ in pairs])
    y = arr([b for _, b in pairs])
    got, want = core.fma_chain_f64(x, y), _pycore.fma_chain_f64(x, y)
    nan = lambda v: (v >> 52) & 0x7FF == 0x7FF and v & ((1 << 52) - 1)  # noqa: E731
    assert got == want or (nan(got) and nan(want))


def test_long_random_vectors_agree():
    rng = np.random.default_rng(0)
    for n in (1, 100, 5000):
        x = (rng.standard_normal(n) * 2.0 ** rng.integers(-40, 40, n)).view(np.uint64)
        y = (rng.standard_normal(n) * 2.0 ** rng.integers(-40, 40, n)).view(np.uint64)
        for width, lsb in ((91, -30), (36, -20), (2200, -1100)):
            assert core.fdp_f64(x, y, width, lsb) == _pycore.fdp_f64(x, y, width, lsb)
        assert core.fma_chain_f64(x, y) == _pycore.fma_chain_f64(x, y)


def test_core_rejects_length_mismatch():
    with pytest.raises(ValueError):
        core.fdp_f64(arr([1]), arr([]), 91, -30)


def test_backend_selection():
    assert _backend.BACKEND in ("cython", "python")
    code = "from fdpkit import _backend; print(_backend.BACKEND)"
    env = dict(os.environ, FDPKIT_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


def test_pure_python_end_to_end():
    code = (
        "from fdpkit.kernels import fdp, fma_chain_dot\n"
        "from fdpkit.accumulator import AccumConfig\n"
        "from fdpkit.formats import BINARY64\n"
        "x = [0x3FF0000000000000, 0x3CA0000000000000, 0x3CA0000000000000]\n"
        "y = [0x3FF0000000000000] * 3\n"
        "print(hex(fdp(x, y, BINARY64, AccumConfig(30, 30, -60))), hex(fma_chain_dot(x, y, BINARY64, BINARY64)))\n"
    )
    env = dict(os.environ, FDPKIT_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.split() == ["0x3ff0000000000001", "0x3ff0000000000000"]
