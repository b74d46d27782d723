"""Inequality certificates: reverse/pseudo Poincare, isoperimetry, gradient bound."""

import numpy as np
import pytest
from scipy.integrate import dblquad

from carnotlab import (BoxSet, Bump, CarnotLabError, ClampedCoordinate,
                       DimensionTooLarge, InequalityCertificate, MCConfig,
                       MinimizationFailed, Polynomial, QuadratureNotConverged,
                       abelian, default_lambda, gradient_bound_check,
                       horizontal_perimeter, isoperimetric_check,
                       pseudo_poincare_check, reverse_poincare_exact,
                       reverse_poincare_mc)


def test_certificate_basics():
    cert = InequalityCertificate("demo", "g", 1.0, 2.0, 0.1, 1.5, "computed",
                                 "a", "b")
    assert cert.passed and cert.slack == 1.0
    d = cert.to_dict()
    assert list(d.keys()) == ["kind", "group", "lhs", "rhs", "slack",
                              "tolerance", "pass", "lambda",
                              "lambda_provenance", "method", "inputs", "extras"]
    bad = InequalityCertificate("demo", "g", 2.0, 1.0, 0.1, 1.5, "computed",
                                "a", "b")
    assert not bad.passed and "FAIL" in repr(bad)


def test_default_lambda(h1, eng):
    for spec in (h1, eng):
        lam, prov = default_lambda(spec)
        assert lam == 0.5 * spec.Q
        assert prov == "upper-bound-Q/2"


def test_boxset_validation_and_dilation(h1):
    with pytest.raises(CarnotLabError):
        BoxSet([1.0, -1.0])
    with pytest.raises(CarnotLabError):
        BoxSet([])
    box = BoxSet([1.0, 2.0, 3.0])
    assert box.volume == 48.0
    dil = box.dilated(h1, 2.0)
    # weights (1, 1, 2): horizontal widths double, the center one quadruples
    assert np.allclose(dil.half_widths, [2.0, 4.0, 12.0])


def test_bump_properties(h1):
    bump = Bump(h1, [1.0, 1.2, 0.8])
    assert bump.value_batch(np.zeros((1, 3)))[0] == 1.0
    outside = np.array([[1.5, 0.0, 0.0], [0.0, 0.0, 2.0]])
    assert np.all(bump.value_batch(outside) == 0.0)
    assert np.all(bump.sqrt_gamma_batch(outside) == 0.0)
    pts = np.random.default_rng(3).normal(size=(40, 3)) * 0.5
    assert np.all(bump.sqrt_gamma_batch(pts) >= 0.0)
    # dilated(c) composes with the dilation by sqrt(c)
    c = 1.7
    w = np.asarray(h1.weights, dtype=float)
    scaled = pts * c ** (0.5 * w)
    assert np.array_equal(bump.dilated(c).value_batch(pts),
                          bump.value_batch(scaled))
    with pytest.raises(CarnotLabError):
        Bump(h1, [1.0, 1.0])


def test_clamped_coordinate(h1):
    f = ClampedCoordinate(h1, 0, cap=0.5)
    vals = f.value_batch(np.array([[2.0, 0, 0], [-2.0, 0, 0], [0.1, 9, 9]]))
    assert np.allclose(vals, [0.5, -0.5, 0.1])
    assert f.sup_norm == 0.5
    with pytest.raises(CarnotLabError):
        ClampedCoordinate(h1, 5)
    with pytest.raises(CarnotLabError):
        ClampedCoordinate(h1, 0, cap=0.0)


def test_reverse_poincare_exact_oracle(h1):
    # f = x1: Gamma(P_t f) = 1 and P_t f^2 - (P_t f)^2 = 2t everywhere
    f = Polynomial.coordinate(3, 0)
    for t, lam in ((0.5, 1.0), (2.0, 2.0)):
        cert = reverse_poincare_exact(h1, t, [0.3, -0.4, 0.2], f, lam,
                                      provenance="computed")
        assert cert.passed
        assert np.isclose(cert.lhs, 1.0, rtol=1e-12)
        assert np.isclose(cert.rhs, 2.0 * lam, rtol=1e-12)
        assert np.isclose(cert.extras["variance"], 2.0 * t, rtol=1e-12)
        assert cert.lam_provenance == "computed"
    with pytest.raises(CarnotLabError):
        reverse_poincare_exact(h1, 0.0, np.zeros(3), f, 1.0)


def test_reverse_poincare_mc_agrees_with_exact(h1):
    f = Polynomial.coordinate(3, 0) ** 2
    g = np.array([0.3, -0.2, 0.5])
    t = 1.0
    exact = reverse_poincare_exact(h1, t, g, f, 2.0)
    cfg = MCConfig(seed=11, n_samples=40000, substeps=64)
    mc = reverse_poincare_mc(h1, t, g, f, 2.0, cfg)
    assert mc.passed
    assert abs(mc.lhs - exact.lhs) <= 4.0 * mc.extras["se_lhs"] + 1e-3
    assert abs(mc.rhs - exact.rhs) <= 4.0 * mc.extras["se_rhs"] + 1e-3
    assert mc.inputs["scheme"] == "exact-step2"


def test_reverse_poincare_mc_batch_reuse(h1):
    from carnotlab.mc import sample_endpoint
    f = Polynomial.coordinate(3, 2)
    cfg = MCConfig(seed=9, n_samples=5000, substeps=32)
    batch = sample_endpoint(h1, 0.5, cfg)
    c1 = reverse_poincare_mc(h1, 0.5, np.zeros(3), f, 2.0, cfg, batch=batch)
    c2 = reverse_poincare_mc(h1, 0.5, np.zeros(3), f, 2.0, cfg, batch=batch)
    assert c1.lhs == c2.lhs and c1.rhs == c2.rhs
    with pytest.raises(CarnotLabError):
        reverse_poincare_mc(h1, 0.5, np.zeros(3), Bump(h1), 2.0, cfg)


def test_perimeter_face_oracle(h1):
    # straight faces city-block, z-faces integrate |x_hor|/2
    a, b, c = 0.7, 1.1, 0.9
    per = horizontal_perimeter(h1, BoxSet([a, b, c]))
    zface, _ = dblquad(lambda y, x: 0.5 * np.hypot(x, y), -a, a, -b, b,
                       epsabs=1e-12)
    oracle = 8.0 * b * c + 8.0 * a * c + 2.0 * zface
    assert np.isclose(per, oracle, rtol=1e-6)


def test_perimeter_abelian_is_surface_area():
    spec = abelian(2)
    per = horizontal_perimeter(spec, BoxSet([1.5, 0.5]))
    assert np.isclose(per, 2 * (2 * 0.5) + 2 * (2 * 1.5), rtol=1e-12)


def test_perimeter_dilation_homogeneity(h1):
    box = BoxSet([1.0, 1.0, 1.0])
    p1 = horizontal_perimeter(h1, box)
    for r in (0.5, 2.0):
        pr = horizontal_perimeter(h1, box.dilated(h1, r))
        assert np.isclose(pr, r ** (h1.Q - 1) * p1, rtol=1e-9)


def test_perimeter_guards(h1):
    with pytest.raises(CarnotLabError):
        horizontal_perimeter(h1, BoxSet([1.0, 1.0]))
    with pytest.raises(QuadratureNotConverged):
        horizontal_perimeter(h1, BoxSet([1.0, 1.0, 1.0]), rel_tol=0.0,
                             max_nodes=32)


def test_isoperimetric_h1(h1):
    box = BoxSet([1.0, 1.0, 1.0])
    cert = isoperimetric_check(h1, box, 1.0, provenance="computed")
    assert cert.passed
    ex = cert.extras
    # minimized constant is sharper than the closed form, and the closed
    # forms differ by the factor sqrt(lambda)
    assert ex["c_numeric"] <= ex["c_closed_sqrt"] * (1 + 1e-9)
    A = ex["perimeter"]
    B = ex["p1_origin"] * ex["volume"] ** 2
    t_analytic = (h1.Q * B / A) ** (2.0 / (h1.Q + 1.0))
    assert np.isclose(ex["t_star"], t_analytic, rtol=1e-6)
    cert2 = isoperimetric_check(h1, box, 2.0)
    assert np.isclose(cert2.extras["c_closed_lambda"],
                      np.sqrt(2.0) * cert2.extras["c_closed_sqrt"], rtol=1e-12)


def test_isoperimetric_scale_invariant_ratio(h1):
    # lhs/rhs is invariant under dilation of E when Lambda is fixed
    box = BoxSet([1.0, 1.0, 1.0])
    ratios = []
    for r in (0.5, 1.0, 2.0):
        cert = isoperimetric_check(h1, box.dilated(h1, r), 1.0)
        assert cert.passed
        ratios.append(cert.extras["ratio"])
    assert max(ratios) - min(ratios) <= 1e-6 * max(ratios)


def test_isoperimetric_infeasible_lambda(h1):
    with pytest.raises(MinimizationFailed):
        isoperimetric_check(h1, BoxSet([1.0, 1.0, 1.0]), 1e-8)


def test_pseudo_poincare_h1(h1):
    cfg = MCConfig(seed=5, n_samples=4000, substeps=32)
    cert = pseudo_poincare_check(h1, 0.5, 2.0, cfg, nodes_coarse=12,
                                 nodes_fine=16)
    assert cert.passed
    assert cert.lhs > 0.0
    assert cert.rhs == pytest.approx(
        2.0 * np.sqrt(2.0 * 0.5) * cert.extras["rhs_integral"])
    assert cert.inputs["scheme"] == "exact-step2"


def test_pseudo_poincare_dimension_guard():
    spec = abelian(5)
    with pytest.raises(DimensionTooLarge):
        pseudo_poincare_check(spec, 0.5, 0.5 * spec.Q,
                              MCConfig(seed=1, n_samples=100))


def test_gradient_bound_h1(h1):
    cfg = MCConfig(seed=6, n_samples=20000, substeps=32)
    cert = gradient_bound_check(h1, 1.0, ClampedCoordinate(h1, 0, cap=1.0),
                                2.0, cfg)
    assert cert.passed
    assert cert.rhs == 2.0
    assert 0.0 < cert.lhs < cert.rhs
    with pytest.raises(CarnotLabError):
        gradient_bound_check(h1, -1.0, ClampedCoordinate(h1, 0), 2.0, cfg)
