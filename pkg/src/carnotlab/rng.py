"""Counter-based normal variates for reproducible parallel Monte Carlo.

Stream layout: one Philox-4x32-10 block per (sample, block) pair,
    counter = (sample_lo32, sample_hi32, block_index, stream_tag),
    key     = (seed_lo32, seed_hi32).
Each block yields two uint64 words -> two open-interval uniforms -> one
Box-Muller pair.  Values depend only on (seed, sample index, block index,
tag), never on chunking or thread count, so any partition of the sample range
reproduces identical variates.  The Box-Muller transform lives here (above
the backend boundary) so compiled and numpy backends draw identical streams.
"""

from __future__ import annotations

import numpy as np

from ._fastpath import philox4x32

_TWO_PI = 2.0 * np.pi
_INV_2_53 = 2.0 ** -53


def _u64_to_unit(hi, lo):
    """Map two uint32 words to a double in the open interval (0, 1)."""
    x = (hi.astype(np.uint64) << np.uint64(32)) | lo.astype(np.uint64)
    return ((x >> np.uint64(11)).astype(np.float64) + 0.5) * _INV_2_53


def normal_blocks(seed, sample_start, n_samples, block_start, n_blocks, tag=0):
    """Standard normals of shape (n_samples, 2*n_blocks)."""
    seed = int(seed)
    if not 0 <= seed < 2 ** 64:
        raise ValueError("seed must fit in 64 bits")
    key = (np.uint32(seed & 0xFFFFFFFF), np.uint32(seed >> 32))
    samples = np.arange(sample_start, sample_start + n_samples, dtype=np.uint64)
    blocks = np.arange(block_start, block_start + n_blocks, dtype=np.uint32)
    ctr = np.empty((n_samples * n_blocks, 4), dtype=np.uint32)
    ctr[:, 0] = np.repeat((samples & np.uint64(0xFFFFFFFF)).astype(np.uint32),
                          n_blocks)
    ctr[:, 1] = np.repeat((samples >> np.uint64(32)).astype(np.uint32), n_blocks)
    ctr[:, 2] = np.tile(blocks, n_samples)
    ctr[:, 3] = np.uint32(tag)
    bits = philox4x32(ctr, key)
    u1 = _u64_to_unit(bits[:, 0], bits[:, 1])
    u2 = _u64_to_unit(bits[:, 2], bits[:, 3])
    r = np.sqrt(-2.0 * np.log(u1))
    theta = _TWO_PI * u2
    out = np.empty((n_samples * n_blocks, 2))
    out[:, 0] = r * np.cos(theta)
    out[:, 1] = r * np.sin(theta)
    return out.reshape(n_samples, 2 * n_blocks)


def step_normals(seed, sample_start, n_samples, step, ndim, tag=0):
    """Normals for one time step: shape (n_samples, ndim).

    Blocks are indexed so that distinct steps never share Philox blocks:
    blocks_per_step = ceil(ndim / 2).
    """
    bps = (ndim + 1) // 2
    z = normal_blocks(seed, sample_start, n_samples, step * bps, bps, tag)
    return z[:, :ndim]
