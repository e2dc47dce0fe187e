# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: counter-based SplitMix64 draws and the shift-apply loop.

Must stay bit-identical to the numpy fallback (_numpy_impl): same integer
pipeline, multiply-then-add float order (the build disables fp contraction).
"""

from libc.stdint cimport uint64_t

import numpy as np

cimport numpy as cnp

cnp.import_array()

BACKEND = "compiled"

cdef uint64_t GOLDEN = 0x9E3779B97F4A7C15UL
cdef uint64_t MIX1 = 0xBF58476D1CE4E5B9UL
cdef uint64_t MIX2 = 0x94D049BB133111EBUL
cdef double TWO_NEG52 = 2.0 ** -52


cdef inline uint64_t mix64(uint64_t z) noexcept nogil:
    z = (z ^ (z >> 30)) * MIX1
    z = (z ^ (z >> 27)) * MIX2
    return z ^ (z >> 31)


def uniform_block(object seed, object start, object n):
    cdef uint64_t s = <uint64_t> seed
    cdef uint64_t c0 = <uint64_t> start
    cdef Py_ssize_t m = <Py_ssize_t> n
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(m, dtype=np.float64)
    cdef double[::1] view = out
    cdef Py_ssize_t i
    cdef uint64_t z, k
    with nogil:
        for i in range(m):
            z = mix64(s + (c0 + <uint64_t> i + 1UL) * GOLDEN)
            k = z >> 12
            view[i] = (2.0 * <double> k + 1.0) * TWO_NEG52 - 1.0
    return out


def rademacher_block(object seed, object start, object n):
    cdef uint64_t s = <uint64_t> seed
    cdef uint64_t c0 = <uint64_t> start
    cdef Py_ssize_t m = <Py_ssize_t> n
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(m, dtype=np.float64)
    cdef double[::1] view = out
    cdef Py_ssize_t i
    cdef uint64_t z
    with nogil:
        for i in range(m):
            z = mix64(s + (c0 + <uint64_t> i + 1UL) * GOLDEN)
            view[i] = 1.0 if (z >> 63) else -1.0
    return out


def apply_shift(const double[:, ::1] base, const double[:, ::1] eps, const double[::1] scale):
    cdef Py_ssize_t rows = base.shape[0]
    cdef Py_ssize_t cols = base.shape[1]
    if eps.shape[0] != rows or eps.shape[1] != cols or scale.shape[0] != cols:
        raise ValueError("apply_shift: shape mismatch")
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.empty((rows, cols), dtype=np.float64)
    cdef double[:, ::1] view = out
    cdef Py_ssize_t i, j
    cdef double t
    with nogil:
        for i in range(rows):
            for j in range(cols):
                t = eps[i, j] * scale[j]
                view[i, j] = base[i, j] + t
    return out
