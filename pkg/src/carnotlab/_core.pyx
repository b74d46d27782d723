# cython: boundscheck=False, wraparound=False, cdivision=True
# cython: language_level=3
"""Compiled fast path: Philox blocks and the H-type integral triple.

Contracts match carnotlab._ref exactly; that module carries the normative
documentation.  Philox bits must be bit-identical to the reference; the
integral triple may differ by summation order only (about one ulp).
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport cos, exp, sin

cnp.import_array()

BACKEND_NAME = "compiled"


def philox4x32(ctr, key):
    """Philox-4x32-10 block function; see carnotlab._ref.philox4x32."""
    cdef cnp.uint32_t[:, ::1] c = np.ascontiguousarray(ctr, dtype=np.uint32)
    if c.shape[1] != 4:
        raise ValueError("ctr must have shape (N, 4)")
    out_arr = np.empty((c.shape[0], 4), dtype=np.uint32)
    cdef cnp.uint32_t[:, ::1] out = out_arr
    cdef cnp.uint32_t key0 = <cnp.uint32_t>(int(key[0]) & 0xFFFFFFFF)
    cdef cnp.uint32_t key1 = <cnp.uint32_t>(int(key[1]) & 0xFFFFFFFF)
    cdef Py_ssize_t n = c.shape[0], i
    cdef int r
    cdef cnp.uint32_t c0, c1, c2, c3, k0, k1, hi0, lo0, hi1, lo1
    cdef cnp.uint64_t p0, p1
    with nogil:
        for i in range(n):
            c0 = c[i, 0]; c1 = c[i, 1]; c2 = c[i, 2]; c3 = c[i, 3]
            k0 = key0; k1 = key1
            for r in range(10):
                if r > 0:
                    k0 = k0 + <cnp.uint32_t>0x9E3779B9u
                    k1 = k1 + <cnp.uint32_t>0xBB67AE85u
                p0 = <cnp.uint64_t>0xD2511F53u * c0
                p1 = <cnp.uint64_t>0xCD9E8D57u * c2
                hi0 = <cnp.uint32_t>(p0 >> 32)
                lo0 = <cnp.uint32_t>(p0 & 0xFFFFFFFFu)
                hi1 = <cnp.uint32_t>(p1 >> 32)
                lo1 = <cnp.uint32_t>(p1 & 0xFFFFFFFFu)
                c0 = hi1 ^ c1 ^ k0
                c1 = lo1
                c2 = hi0 ^ c3 ^ k1
                c3 = lo0
            out[i, 0] = c0; out[i, 1] = c1; out[i, 2] = c2; out[i, 3] = c3
    return out_arr


def htype_m1_batch(r2, z, gfac, sfac, lam, w):
    """H-type (m=1) integral triple; see carnotlab._ref.htype_m1_batch."""
    cdef double[::1] r2v = np.ascontiguousarray(r2, dtype=np.float64)
    cdef double[::1] zv = np.ascontiguousarray(z, dtype=np.float64)
    cdef double[::1] gv = np.ascontiguousarray(gfac, dtype=np.float64)
    cdef double[::1] sv = np.ascontiguousarray(sfac, dtype=np.float64)
    cdef double[::1] lv = np.ascontiguousarray(lam, dtype=np.float64)
    cdef double[::1] wv = np.ascontiguousarray(w, dtype=np.float64)
    cdef Py_ssize_t n = r2v.shape[0], m = gv.shape[0], j, k
    if zv.shape[0] != n:
        raise ValueError("r2 and z must have equal length")
    if sv.shape[0] != m or lv.shape[0] != m or wv.shape[0] != m:
        raise ValueError("gfac, sfac, lam, w must have equal length")
    I0_arr = np.empty(n)
    I1_arr = np.empty(n)
    I2_arr = np.empty(n)
    cdef double[::1] I0 = I0_arr
    cdef double[::1] I1 = I1_arr
    cdef double[::1] I2 = I2_arr
    cdef double rj, zj, e, ph, cv, svn, a0, a1, a2, g, l
    with nogil:
        for j in range(n):
            rj = -0.25 * r2v[j]
            zj = zv[j]
            a0 = 0.0; a1 = 0.0; a2 = 0.0
            for k in range(m):
                g = gv[k]
                l = lv[k]
                e = exp(rj * g) * sv[k]
                ph = zj * l
                cv = cos(ph) * e
                svn = sin(ph) * e
                a0 += wv[k] * cv
                a1 += (wv[k] * g) * cv
                a2 += (wv[k] * l) * svn
            I0[j] = a0; I1[j] = a1; I2[j] = a2
    return I0_arr, I1_arr, I2_arr
