"""Fused dot products over tailored fixed-point accumulators."""

from ._backend import BACKEND
from .accumulator import AccumConfig, Accumulator, Sticky
from .formats import FormatSpec, UnpackedReal, decode, encode, parse_format
from .kernels import KernelSpec, PackedMatrix, fdp, fma_chain_dot, gemm

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "AccumConfig", "Accumulator", "Sticky", "FormatSpec", "UnpackedReal", "decode",
    "encode", "parse_format", "KernelSpec", "PackedMatrix", "fdp", "fma_chain_dot", "gemm",
]
