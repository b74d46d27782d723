"""Heat kernel evaluators: closed forms, scaling, gradients, PDE residual."""

import numpy as np
import pytest

from carnotlab import (KernelEvaluator, NumericalUnderflow, UnsupportedGroup,
                       dilate, preset, product)
from carnotlab.groups import htype_group


@pytest.fixture(scope="module")
def ev1(h1):
    return KernelEvaluator(h1)


@pytest.fixture(scope="module")
def quaternionic():
    # left multiplication by i and j on R^4: J^2 = -I, anticommuting
    Li = np.array([[0.0, -1.0, 0.0, 0.0],
                   [1.0, 0.0, 0.0, 0.0],
                   [0.0, 0.0, 0.0, -1.0],
                   [0.0, 0.0, 1.0, 0.0]])
    Lj = np.array([[0.0, 0.0, -1.0, 0.0],
                   [0.0, 0.0, 0.0, 1.0],
                   [1.0, 0.0, 0.0, 0.0],
                   [0.0, -1.0, 0.0, 0.0]])
    return htype_group(2, 2, np.stack([Li, Lj]), name="quaternionic-2-2")


def test_supports(all_presets):
    names = {s.name: KernelEvaluator.supports(s) for s in all_presets}
    assert names == {"abelian-3": True, "heisenberg-1": True,
                     "heisenberg-2": True, "htype-2-1": True, "engel": False}


def test_engel_unsupported(eng):
    with pytest.raises(UnsupportedGroup):
        KernelEvaluator(eng)


def test_abelian_gaussian(ab3, rng):
    ev = KernelEvaluator(ab3)
    pts = rng.normal(size=(20, 3))
    for t in (0.25, 1.0, 4.0):
        p, ok = ev.kernel_batch(t, pts)
        want = (4 * np.pi * t) ** -1.5 * np.exp(-np.sum(pts ** 2, 1) / (4 * t))
        assert ok.all()
        assert np.allclose(p, want, rtol=1e-14)
        res, _ = ev.kernel_pde_residual_batch(t, pts)
        assert np.abs(res).max() < 1e-12


def test_h1_origin_closed_form(ev1):
    for t in (0.25, 1.0, 4.0):
        assert abs(ev1.kernel_at_origin(t) - 1 / (16 * t * t)) < 1e-10 / t / t


def test_h1_radiality(ev1):
    r = np.linspace(0.1, 2.0, 9)
    z = 0.4
    A = np.column_stack([r, np.zeros_like(r), np.full_like(r, z)])
    B = np.column_stack([np.zeros_like(r), r, np.full_like(r, -z)])
    pa, oka = ev1.kernel_batch(1.0, A)
    pb, okb = ev1.kernel_batch(1.0, B)
    assert oka.all() and okb.all()
    assert np.max(np.abs(pa - pb) / pa) < 1e-10


def test_kernel_scaling_covariance(h1, ev1):
    # p_{c^2 t}(dilate(c, g)) = c^{-Q} p_t(g)
    g = np.array([[0.7, -0.3, 0.2], [1.1, 0.4, -0.5]])
    for c in (0.5, 2.0):
        p1, _ = ev1.kernel_batch(1.0, g)
        p2, _ = ev1.kernel_batch(c * c, dilate(h1, c, g))
        assert np.allclose(p2, p1 * c ** (-float(h1.Q)), rtol=1e-9)


def test_log_gradients_match_finite_differences(h1, ev1):
    pts = np.array([[0.4, -0.2, 0.15], [1.0, 0.5, -0.3]])
    t, eps = 1.0, 1e-5
    for hat in (True, False):
        _, grads, ok = ev1.kernel_and_log_gradient_batch(t, pts, hat=hat)
        assert ok.all()
        for i in range(h1.d):
            shift = np.zeros(3)
            shift[i] = eps
            if hat:
                plus = product(h1, shift, pts)
                minus = product(h1, -shift, pts)
            else:
                plus = product(h1, pts, shift)
                minus = product(h1, pts, -shift)
            pp, _ = ev1.kernel_batch(t, plus)
            pm, _ = ev1.kernel_batch(t, minus)
            fd = (np.log(pp) - np.log(pm)) / (2 * eps)
            assert np.allclose(grads[:, i], fd, atol=1e-7), (hat, i)


def test_left_right_gradients_at_origin_agree(ev1):
    origin = np.zeros((1, 3))
    gr, _ = ev1.log_gradient_right_batch(1.0, origin)
    gl, _ = ev1.log_gradient_left_batch(1.0, origin)
    assert np.allclose(gr, gl)
    assert np.allclose(gr, 0.0, atol=1e-12)  # radial maximum at the origin


def test_pde_residual_normalized(ev1, rng):
    pts = rng.uniform(-1.5, 1.5, size=(30, 3))
    for t in (0.25, 1.0, 4.0):
        res, ok = ev1.kernel_pde_residual_batch(t, pts)
        assert ok.all()
        assert np.abs(res).max() < 1e-6


def test_underflow_flagged(ev1):
    far = np.array([[80.0, 0.0, 0.0]])
    p, ok = ev1.kernel_batch(0.25, far)
    assert not ok[0]
    with pytest.raises(NumericalUnderflow):
        ev1.kernel(0.25, far[0])


def test_invalid_t_rejected(ev1):
    for bad in (0.0, -1.0, np.nan, np.inf):
        with pytest.raises(ValueError):
            ev1.kernel_batch(bad, np.zeros((1, 3)))


def test_h2_and_htype21_kernels(h2, ht21):
    for spec in (h2, ht21):
        ev = KernelEvaluator(spec)
        pts = np.zeros((4, spec.dim))
        pts[1, 0] = 1.0
        pts[2, -1] = 0.5
        pts[3] = 0.3
        for t in (0.5, 1.0):
            p, ok = ev.kernel_batch(t, pts)
            assert ok.all() and (p > 0).all()
            res, _ = ev.kernel_pde_residual_batch(t, pts)
            assert np.abs(res).max() < 1e-6, spec.name
        # dilation covariance as an independent oracle
        g = pts[3]
        c = 1.5
        assert np.isclose(ev.kernel(c * c, dilate(spec, c, g)),
                          ev.kernel(1.0, g) * c ** (-float(spec.Q)), rtol=1e-8)


def test_m2_tensor_kernel(quaternionic):
    spec = quaternionic
    assert KernelEvaluator.supports(spec)
    ev = KernelEvaluator(spec)
    pts = np.array([
        [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [0.8, 0.0, 0.0, 0.0, 0.2, 0.0],
        [0.0, 0.8, 0.0, 0.0, 0.0, -0.2],
        [0.3, 0.3, 0.3, 0.3, 0.1, 0.1],
    ])
    p, ok = ev.kernel_batch(1.0, pts)
    assert ok.all() and (p > 0).all()
    # radiality: p depends on (|x|, |z|) only
    assert np.isclose(p[1], p[2], rtol=1e-8)
    res, _ = ev.kernel_pde_residual_batch(1.0, pts)
    assert np.abs(res).max() < 1e-6
    g = pts[3]
    c = 2.0
    assert np.isclose(ev.kernel(c * c, dilate(spec, c, g)),
                      ev.kernel(1.0, g) * c ** (-float(spec.Q)), rtol=1e-8)
