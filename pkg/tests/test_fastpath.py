"""Backend selection, Philox known answers, cross-backend agreement."""

import os
import subprocess
import sys

import numpy as np
import pytest

from carnotlab import BACKEND, available_backends
from carnotlab import _ref
from carnotlab.rng import normal_blocks, step_normals

try:
    from carnotlab import _core
except ImportError:
    _core = None

_M = (0xD2511F53, 0xCD9E8D57)
_W = (0x9E3779B9, 0xBB67AE85)
_32 = 0xFFFFFFFF


def _philox_textbook(ctr, key):
    """Independent scalar Philox-4x32-10 straight from the round definition."""
    c, k = [int(v) for v in ctr], [int(v) for v in key]
    for r in range(10):
        if r > 0:
            k = [(k[0] + _W[0]) & _32, (k[1] + _W[1]) & _32]
        p0, p1 = _M[0] * c[0], _M[1] * c[2]
        c = [((p1 >> 32) & _32) ^ c[1] ^ k[0], p1 & _32,
             ((p0 >> 32) & _32) ^ c[3] ^ k[1], p0 & _32]
    return tuple(c)


def _backends():
    impls = [_ref]
    if _core is not None:
        impls.append(_core)
    return impls


@pytest.mark.parametrize("impl", _backends(), ids=lambda m: m.BACKEND_NAME)
def test_philox_known_answers(impl):
    # the all-ones and pi-digit vectors are the published reference values
    cases = [
        ((0, 0, 0, 0), (0, 0),
         (0x6627E8D5, 0xE169C58D, 0xBC57AC4C, 0x9B00DBD8)),
        ((0xFFFFFFFF,) * 4, (0xFFFFFFFF,) * 2,
         (0x408F276D, 0x41C83B0E, 0xA20BC7C6, 0x6D5451FD)),
        ((0x243F6A88, 0x85A308D3, 0x13198A2E, 0x03707344),
         (0xA4093822, 0x299F31D0),
         (0xD16CFE09, 0x94FDCCEB, 0x5001E420, 0x24126EA1)),
    ]
    for ctr, key, want in cases:
        got = impl.philox4x32(np.array([ctr], dtype=np.uint32),
                              np.array(key, dtype=np.uint32))[0]
        assert tuple(int(v) for v in got) == want


@pytest.mark.parametrize("impl", _backends(), ids=lambda m: m.BACKEND_NAME)
def test_philox_matches_textbook_scalar(impl):
    rng = np.random.default_rng(99)
    ctr = rng.integers(0, 1 << 32, size=(20, 4), dtype=np.uint32)
    key = rng.integers(0, 1 << 32, size=2, dtype=np.uint32)
    got = impl.philox4x32(ctr, key)
    for row, g in zip(ctr, got):
        assert tuple(int(v) for v in g) == _philox_textbook(row, key)


def test_philox_bit_identical_across_backends():
    if _core is None:
        pytest.skip("compiled backend not built")
    rng = np.random.default_rng(5)
    ctr = rng.integers(0, 1 << 32, size=(4096, 4), dtype=np.uint32)
    key = rng.integers(0, 1 << 32, size=2, dtype=np.uint32)
    assert np.array_equal(_ref.philox4x32(ctr, key), _core.philox4x32(ctr, key))


def test_htype_integral_cross_backend():
    if _core is None:
        pytest.skip("compiled backend not built")
    rng = np.random.default_rng(17)
    n, k = 500, 301
    r2 = rng.uniform(0.0, 40.0, n)
    z = rng.normal(0.0, 2.0, n)
    lam = np.linspace(1e-4, 30.0, k)
    t = 1.0
    gfac = lam / np.tanh(lam * t)
    sfac = (lam / np.sinh(lam * t)) ** 1
    w = rng.uniform(0.1, 1.0, k)
    ref = _ref.htype_m1_batch(r2, z, gfac, sfac, lam, w)
    core = _core.htype_m1_batch(r2, z, gfac, sfac, lam, w)
    # envelope-relative agreement: I0 with |cos| replaced by 1 dominates all
    env = np.maximum((w * sfac * np.exp(-np.outer(r2, gfac) / 4.0)).sum(axis=1),
                     1e-300)
    for a, b in zip(ref, core):
        assert np.max(np.abs(a - b) / env) < 1e-13


def test_htype_integral_against_python_loop():
    rng = np.random.default_rng(8)
    n, k = 7, 23
    r2 = rng.uniform(0.0, 10.0, n)
    z = rng.normal(size=n)
    lam = rng.uniform(0.05, 5.0, k)
    gfac = lam / np.tanh(lam)
    sfac = lam / np.sinh(lam)
    w = rng.uniform(0.1, 1.0, k)
    I0, I1, I2 = _ref.htype_m1_batch(r2, z, gfac, sfac, lam, w)
    for j in range(n):
        e = np.exp(-r2[j] * gfac / 4.0) * sfac
        assert np.isclose(I0[j], np.sum(w * np.cos(lam * z[j]) * e), rtol=1e-13)
        assert np.isclose(I1[j], np.sum(w * gfac * np.cos(lam * z[j]) * e),
                          rtol=1e-13)
        assert np.isclose(I2[j], np.sum(w * lam * np.sin(lam * z[j]) * e),
                          rtol=1e-13)


def test_normals_chunk_invariance():
    full = normal_blocks(42, 0, 100, 0, 3)
    parts = np.vstack([normal_blocks(42, 0, 37, 0, 3),
                       normal_blocks(42, 37, 40, 0, 3),
                       normal_blocks(42, 77, 23, 0, 3)])
    assert np.array_equal(full, parts)
    cols = np.hstack([normal_blocks(42, 0, 100, 0, 1),
                      normal_blocks(42, 0, 100, 1, 2)])
    assert np.array_equal(full, cols)


def test_normals_stream_separation():
    a = normal_blocks(1, 0, 50, 0, 2)
    assert not np.array_equal(a, normal_blocks(2, 0, 50, 0, 2))
    assert not np.array_equal(a, normal_blocks(1, 0, 50, 0, 2, tag=1))
    assert np.isfinite(a).all()
    with pytest.raises(ValueError):
        normal_blocks(-1, 0, 10, 0, 1)
    with pytest.raises(ValueError):
        normal_blocks(1 << 64, 0, 10, 0, 1)


def test_step_normals_disjoint_blocks():
    # consecutive steps must never reuse Philox blocks, odd ndim included
    z0 = step_normals(7, 0, 64, 0, 3)
    z1 = step_normals(7, 0, 64, 1, 3)
    assert z0.shape == (64, 3)
    assert not np.allclose(z0, z1)
    blocks = normal_blocks(7, 0, 64, 0, 4)
    assert np.array_equal(z0, blocks[:, 0:3])
    assert np.array_equal(z1, blocks[:, 4:7])


def test_normals_moments():
    z = normal_blocks(2024, 0, 200000, 0, 1)
    flat = z.ravel()
    n = flat.size
    assert abs(flat.mean()) < 4.0 / np.sqrt(n)
    assert abs(flat.var() - 1.0) < 6.0 / np.sqrt(n)
    assert abs((flat ** 3).mean()) < 4.0 * np.sqrt(15.0 / n)


def test_backend_reporting():
    names = available_backends()
    assert "numpy" in names
    assert BACKEND in names
    if _core is not None:
        assert names[0] == "compiled"
        assert _core.BACKEND_NAME == "compiled"
    assert _ref.BACKEND_NAME == "numpy"


def _run_with_backend(value):
    env = dict(os.environ, CARNOTLAB_BACKEND=value)
    return subprocess.run(
        [sys.executable, "-c", "import carnotlab; print(carnotlab.BACKEND)"],
        capture_output=True, text=True, env=env)


def test_backend_env_selection():
    out = _run_with_backend("numpy")
    assert out.returncode == 0 and out.stdout.strip() == "numpy"
    if _core is not None:
        out = _run_with_backend("compiled")
        assert out.returncode == 0 and out.stdout.strip() == "compiled"
    out = _run_with_backend("bogus")
    assert out.returncode != 0
    assert "CARNOTLAB_BACKEND" in out.stderr


def test_endpoints_bit_identical_across_backends(h1):
    if _core is None:
        pytest.skip("compiled backend not built")
    code = (
        "import numpy as np\n"
        "from carnotlab import MCConfig, heisenberg\n"
        "from carnotlab.mc import sample_endpoint\n"
        "b = sample_endpoint(heisenberg(1), 1.0,"
        " MCConfig(seed=3, n_samples=512, substeps=16))\n"
        "print(np.asarray(b.points).tobytes().hex())\n")
    outs = []
    for name in ("numpy", "compiled"):
        env = dict(os.environ, CARNOTLAB_BACKEND=name)
        res = subprocess.run([sys.executable, "-c", code], capture_output=True,
                             text=True, env=env)
        assert res.returncode == 0, res.stderr
        outs.append(res.stdout)
    assert outs[0] == outs[1]
