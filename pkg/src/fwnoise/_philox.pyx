# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled Philox4x32-10 block generator.

Produces the same uniforms as :func:`fwnoise._philox_py.uniforms`, bit for bit.
"""
import numpy as np
cimport numpy as cnp
from libc.stdint cimport uint32_t, uint64_t

cnp.import_array()

cdef uint32_t M0 = 0xD2511F53u
cdef uint32_t M1 = 0xCD9E8D57u
cdef uint32_t W0 = 0x9E3779B9u
cdef uint32_t W1 = 0xBB67AE85u
cdef double TWO_M53 = 1.0 / 9007199254740992.0


cdef inline void _philox(uint32_t* c, uint32_t k0, uint32_t k1) noexcept nogil:
    cdef uint64_t p0, p1
    cdef uint32_t hi0, lo0, hi1, lo1
    cdef int r
    for r in range(10):
        p0 = <uint64_t>M0 * c[0]
        p1 = <uint64_t>M1 * c[2]
        hi0 = <uint32_t>(p0 >> 32)
        lo0 = <uint32_t>p0
        hi1 = <uint32_t>(p1 >> 32)
        lo1 = <uint32_t>p1
        c[0] = hi1 ^ c[1] ^ k0
        c[1] = lo1
        c[2] = hi0 ^ c[3] ^ k1
        c[3] = lo0
        k0 = k0 + W0
        k1 = k1 + W1


def philox_block(ctr, key):
    """Run one Philox4x32-10 bijection; used for known-answer tests."""
    cdef uint32_t c[4]
    for i in range(4):
        c[i] = <uint32_t>ctr[i]
    _philox(c, <uint32_t>key[0], <uint32_t>key[1])
    return (c[0], c[1], c[2], c[3])


def uniforms(uint64_t seed, uint32_t stream, uint64_t path_start,
             Py_ssize_t n_paths, Py_ssize_t n_blocks):
    """Return an (n_paths, 2*n_blocks) array of doubles in [0, 1)."""
    out = np.empty((n_paths, 2 * n_blocks), dtype=np.float64)
    cdef double[:, ::1] view = out
    cdef uint32_t k0 = <uint32_t>(seed & 0xFFFFFFFFu)
    cdef uint32_t k1 = <uint32_t>(seed >> 32)
    cdef uint32_t c[4]
    cdef Py_ssize_t p, b
    cdef uint64_t path
    with nogil:
        for p in range(n_paths):
            path = path_start + <uint64_t>p
            for b in range(n_blocks):
                c[0] = <uint32_t>b
                c[1] = stream
                c[2] = <uint32_t>(path & 0xFFFFFFFFu)
                c[3] = <uint32_t>(path >> 32)
                _philox(c, k0, k1)
                view[p, 2 * b] = ((c[0] >> 5) * 67108864.0 + (c[1] >> 6)) * TWO_M53
                view[p, 2 * b + 1] = ((c[2] >> 5) * 67108864.0 + (c[3] >> 6)) * TWO_M53
    return out
