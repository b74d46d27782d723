"""Numpy reference implementations of the two hot kernels.

This is the always-available fallback for the compiled `_core` extension.
Both backends implement exactly the same contracts:

  philox4x32(ctr, key)      counter-based RNG block function, bit-identical
                            across backends (pure uint32 arithmetic).
  htype_m1_batch(...)       the batched H-type (m=1) heat-kernel integral
                            triple; backends may differ by summation order
                            (~1 ulp), never more.
"""

from __future__ import annotations

import numpy as np

BACKEND_NAME = "numpy"

_PHILOX_M0 = np.uint64(0xD2511F53)
_PHILOX_M1 = np.uint64(0xCD9E8D57)
_PHILOX_W0 = np.uint32(0x9E3779B9)
_PHILOX_W1 = np.uint32(0xBB67AE85)
_MASK32 = np.uint64(0xFFFFFFFF)


def philox4x32(ctr, key):
    """Philox-4x32-10 block function.

    ctr: (N, 4) uint32 counters; key: length-2 uint32 sequence.
    Returns (N, 4) uint32 of random bits.
    """
    c0 = ctr[:, 0].astype(np.uint64)
    c1 = ctr[:, 1].astype(np.uint64)
    c2 = ctr[:, 2].astype(np.uint64)
    c3 = ctr[:, 3].astype(np.uint64)
    k0 = np.uint64(int(key[0]) & 0xFFFFFFFF)
    k1 = np.uint64(int(key[1]) & 0xFFFFFFFF)
    w0 = np.uint64(int(_PHILOX_W0))
    w1 = np.uint64(int(_PHILOX_W1))
    for r in range(10):
        if r > 0:
            k0 = (k0 + w0) & _MASK32
            k1 = (k1 + w1) & _MASK32
        p0 = _PHILOX_M0 * c0
        p1 = _PHILOX_M1 * c2
        hi0 = p0 >> np.uint64(32)
        lo0 = p0 & _MASK32
        hi1 = p1 >> np.uint64(32)
        lo1 = p1 & _MASK32
        c0 = hi1 ^ c1 ^ k0
        c1 = lo1
        c2 = hi0 ^ c3 ^ k1
        c3 = lo0
    out = np.empty_like(ctr)
    out[:, 0] = c0.astype(np.uint32)
    out[:, 1] = c1.astype(np.uint32)
    out[:, 2] = c2.astype(np.uint32)
    out[:, 3] = c3.astype(np.uint32)
    return out


def htype_m1_batch(r2, z, gfac, sfac, lam, w):
    """Heat-kernel integral triple for H-type groups with 1-dim center.

    Per sample j, with E_jk = exp(-r2_j * gfac_k / 4) * sfac_k:
        I0_j = sum_k w_k           * cos(lam_k z_j) * E_jk
        I1_j = sum_k w_k * gfac_k  * cos(lam_k z_j) * E_jk
        I2_j = sum_k w_k * lam_k   * sin(lam_k z_j) * E_jk
    gfac_k = lam_k*coth(lam_k t) and sfac_k = (lam_k/sinh(lam_k t))^n are
    precomputed by the caller (shared across backends).
    """
    r2 = np.asarray(r2, dtype=float)
    z = np.asarray(z, dtype=float)
    with np.errstate(under="ignore"):
        E = np.exp(np.multiply.outer(r2, -0.25 * gfac)) * sfac
        ph = np.multiply.outer(z, lam)
        C = np.cos(ph) * E
        S = np.sin(ph) * E
    I0 = C @ w
    I1 = C @ (w * gfac)
    I2 = S @ (w * lam)
    return I0, I1, I2
