# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels on binary64 bit patterns.

Same contract as :mod:`fdpkit._pycore`; ``fdpkit._backend`` picks one.
"""

from libc.stdint cimport uint64_t, int64_t
from libc.stdlib cimport calloc, free
from libc.string cimport memcpy

cdef extern from "math.h" nogil:
    double fma(double x, double y, double z)

cdef extern from *:
    """
    typedef unsigned __int128 fdp_u128;

    static inline void fdp_mul53(uint64_t a, uint64_t b, uint64_t *lo, uint64_t *hi) {
        fdp_u128 p = (fdp_u128)a * b;
        *lo = (uint64_t)p;
        *hi = (uint64_t)(p >> 64);
    }
    """
    void fdp_mul53(uint64_t a, uint64_t b, uint64_t *lo, uint64_t *hi) nogil

cdef enum:
    NAN_FLAG = 1
    INF_POS_FLAG = 2
    INF_NEG_FLAG = 4
    OVERFLOW_FLAG = 8
    INEXACT_FLAG = 16
    MAX_LIMBS = 4096


cdef inline void _addsub(uint64_t *limbs, int nlimbs, int at, uint64_t w0, uint64_t w1,
                         uint64_t w2, bint negative) noexcept nogil:
    # limbs += or -= (w2:w1:w0) << (64*at), modulo 2**(64*nlimbs)
    cdef uint64_t words[3]
    cdef uint64_t carry = 0, cur, s, t
    cdef bint c1, b1
    cdef int i = at, j = 0
    words[0] = w0
    words[1] = w1
    words[2] = w2
    if not negative:
        while i < nlimbs and (j < 3 or carry):
            cur = limbs[i]
            t = words[j] if j < 3 else 0
            s = cur + t
            c1 = s < cur
            limbs[i] = s + carry
            carry = c1 | (limbs[i] < s)
            i += 1
            j += 1
    else:
        while i < nlimbs and (j < 3 or carry):
            cur = limbs[i]
            t = words[j] if j < 3 else 0
            s = cur - t
            b1 = cur < t
            limbs[i] = s - carry
            carry = b1 | (s < carry)
            i += 1
            j += 1


cdef inline bint _wrap(uint64_t *limbs, int nlimbs, int top) noexcept nogil:
    # Sign-extend from bit ``top``; report whether the value left the signed range.
    cdef int t = top >> 6, b = top & 63, i
    cdef uint64_t upper_mask, fill, sign
    cdef bint overflow = False
    sign = (limbs[t] >> b) & 1
    fill = <uint64_t>0 - sign
    upper_mask = (~<uint64_t>0) << b
    if (limbs[t] & upper_mask) != (fill & upper_mask):
        overflow = True
        limbs[t] = (limbs[t] & ~upper_mask) | (fill & upper_mask)
    for i in range(t + 1, nlimbs):
        if limbs[i] != fill:
            overflow = True
            limbs[i] = fill
    return overflow


cdef uint64_t FRAC_MASK = (<uint64_t>1 << 52) - 1


cdef inline int _unpack(uint64_t bits, uint64_t *sig, int *exp) noexcept nogil:
    # 0 finite (sig may be 0), 1 inf, 2 nan
    cdef uint64_t field = (bits >> 52) & 0x7FF
    cdef uint64_t frac = bits & FRAC_MASK
    if field == 0x7FF:
        return 2 if frac else 1
    if field == 0:
        sig[0] = frac
        exp[0] = -1074
    else:
        sig[0] = frac | (<uint64_t>1 << 52)
        exp[0] = <int>field - 1075
    return 0


def fdp_f64(const uint64_t[::1] x, const uint64_t[::1] y, int width, int lsb):
    """Accumulate ``sum(x[i] * y[i])`` into a ``width``-bit register with unit ``2**lsb``.

    Returns ``(register, flags)`` with the flag bits of :class:`fdpkit.accumulator.Sticky`.
    """
    cdef Py_ssize_t n = x.shape[0], i
    if y.shape[0] != n:
        raise ValueError("length mismatch")
    # room for the register plus a full left-shifted 106-bit product
    cdef int nlimbs = (width + 106 + 64) // 64 + 1
    if nlimbs > MAX_LIMBS:
        raise ValueError("accumulator too wide for the compiled kernel")
    cdef uint64_t *limbs = <uint64_t *>calloc(nlimbs, sizeof(uint64_t))
    if limbs == NULL:
        raise MemoryError()
    cdef int flags = 0, ka, kb, ea, eb, shift, k, bit
    cdef uint64_t sa, sb, lo, hi, w0, w1, w2, rem
    cdef bint neg
    try:
        with nogil:
            for i in range(n):
                ka = _unpack(x[i], &sa, &ea)
                kb = _unpack(y[i], &sb, &eb)
                neg = ((x[i] ^ y[i]) >> 63) & 1
                if ka == 2 or kb == 2:
                    flags |= NAN_FLAG
                    continue
                if ka == 1 or kb == 1:
                    if (ka == 0 and sa == 0) or (kb == 0 and sb == 0):
                        flags |= NAN_FLAG
                    elif neg:
                        flags |= INF_NEG_FLAG
                    else:
                        flags |= INF_POS_FLAG
                    continue
                if sa == 0 or sb == 0:
                    continue
                fdp_mul53(sa, sb, &lo, &hi)
                shift = ea + eb - lsb
                if shift >= width:
                    flags |= OVERFLOW_FLAG
                    continue
                if shift >= 0:
                    bit = shift & 63
                    if bit:
                        w0 = lo << bit
                        w1 = (hi << bit) | (lo >> (64 - bit))
                        w2 = hi >> (64 - bit)
                    else:
                        w0 = lo
                        w1 = hi
                        w2 = 0
                    _addsub(limbs, nlimbs, shift >> 6, w0, w1, w2, neg)
                else:
                    k = -shift
                    if k >= 128:
                        w0 = 0
                        w1 = 0
                        rem = lo | hi
                    elif k >= 64:
                        w0 = hi >> (k - 64) if k < 128 else 0
                        w1 = 0
                        rem = lo | ((hi << (128 - k)) if k > 64 else 0)
                    else:
                        w0 = (lo >> k) | (hi << (64 - k))
                        w1 = hi >> k
                        rem = lo << (64 - k)
                    if rem:
                        flags |= INEXACT_FLAG
                        if neg:
                            # floor of a negative value rounds the magnitude up
                            w0 += 1
                            if w0 == 0:
                                w1 += 1
                    if w0 == 0 and w1 == 0:
                        continue
                    _addsub(limbs, nlimbs, 0, w0, w1, 0, neg)
                if _wrap(limbs, nlimbs, width - 1):
                    flags |= OVERFLOW_FLAG
        raw = bytes((<char *>limbs)[:nlimbs * 8])
    finally:
        free(limbs)
    return int.from_bytes(raw, "little", signed=True), flags


def fma_chain_f64(const uint64_t[::1] x, const uint64_t[::1] y):
    """Left-to-right ``s = fma(x[i], y[i], s)`` from ``s = +0``; returns the bits of ``s``."""
    cdef Py_ssize_t n = x.shape[0], i
    if y.shape[0] != n:
        raise ValueError("length mismatch")
    cdef double s = 0.0, a, b
    cdef uint64_t out
    with nogil:
        for i in range(n):
            memcpy(&a, &x[i], 8)
            memcpy(&b, &y[i], 8)
            s = fma(a, b, s)
    memcpy(&out, &s, 8)
    return out
