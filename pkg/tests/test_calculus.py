"""Sub-Laplacian calculus: heat action on polynomials and the lemma suite."""

import numpy as np
import pytest

from carnotlab import (carre_du_champ, heat_apply, horizontal_frame,
                       left_translate, polynomial_corpus, preset,
                       sample_points, sublaplacian)
from carnotlab.calculus import (gamma_identity_residual, verify_ad_lemma,
                                verify_commutation, verify_scaling)
from carnotlab.groups import left_translation_polys
from carnotlab.poly import Polynomial


def test_heat_apply_h1_oracles(h1):
    z2 = Polynomial.coordinate(3, 2) ** 2
    x1 = Polynomial.coordinate(3, 0)
    x2 = Polynomial.coordinate(3, 1)
    for t in (0.25, 1.0, 4.0):
        want = z2 + (x1 ** 2 + x2 ** 2) * (0.5 * t) + t * t
        assert (heat_apply(h1, t, z2) - want).max_abs_coeff() < 1e-12
    got = heat_apply(h1, 1.0, x1 ** 2)
    assert (got - (x1 ** 2 + 2.0)).max_abs_coeff() < 1e-12


def test_heat_apply_constant_and_linear(h1):
    c = Polynomial.constant(3, 7.5)
    assert (heat_apply(h1, 2.0, c) - c).max_abs_coeff() == 0.0
    x1 = Polynomial.coordinate(3, 0)
    assert (heat_apply(h1, 2.0, x1) - x1).max_abs_coeff() == 0.0


def test_semigroup_property(all_presets):
    for spec in all_presets:
        f = Polynomial.coordinate(spec.dim, spec.dim - 1) ** 2
        one = heat_apply(spec, 0.7, heat_apply(spec, 0.3, f))
        two = heat_apply(spec, 1.0, f)
        assert (one - two).max_abs_coeff() < 1e-12, spec.name


def test_generator_property(h1):
    # d/dt at t=0: (P_t f - f)/t -> Lf as t -> 0, exact on the Taylor form
    f = Polynomial.coordinate(3, 2) ** 2
    Lf = sublaplacian(h1, f)
    t = 1e-4
    diff = (heat_apply(h1, t, f) - f) * (1.0 / t) - Lf
    assert diff.max_abs_coeff() < 1e-3


def test_left_invariance_of_L(all_presets, rng):
    for spec in all_presets:
        f = Polynomial.coordinate(spec.dim, spec.dim - 1) ** 2
        g = rng.uniform(-1, 1, spec.dim)
        lhs = sublaplacian(spec, left_translate(spec, g, f))
        rhs = left_translate(spec, g, sublaplacian(spec, f))
        assert (lhs - rhs).max_abs_coeff() < 1e-10, spec.name


def test_left_translate_matches_product(h1, rng):
    f = polynomial_corpus(h1, count=4)[-1]
    g = rng.uniform(-1, 1, 3)
    h = rng.uniform(-1, 1, 3)
    from carnotlab.groups import product
    assert np.isclose(left_translate(h1, g, f).eval(h),
                      f.eval(product(h1, g, h)))


def test_gamma_nonnegative_and_identity(all_presets):
    for spec in all_presets:
        corpus = polynomial_corpus(spec, count=8)
        pts = sample_points(spec, 25, seed=99)
        for f in corpus:
            gam = carre_du_champ(spec, f)
            assert gam.eval_batch(pts).min() > -1e-12, spec.name
            assert gamma_identity_residual(spec, f).max_abs_coeff() < 1e-10


def test_gamma_polarization(h1):
    x1 = Polynomial.coordinate(3, 0)
    z = Polynomial.coordinate(3, 2)
    gfg = carre_du_champ(h1, x1, z)
    # Gamma(f,g) = (Gamma(f+g) - Gamma(f) - Gamma(g)) / 2
    via = (carre_du_champ(h1, x1 + z) - carre_du_champ(h1, x1)
           - carre_du_champ(h1, z)) * 0.5
    assert (gfg - via).max_abs_coeff() < 1e-12


def test_horizontal_frame_shapes(all_presets):
    for spec in all_presets:
        V = horizontal_frame(spec)
        Vh = horizontal_frame(spec, hat=True)
        assert len(V) == len(Vh) == spec.d
        x1 = Polynomial.coordinate(spec.dim, 0)
        # frames agree on layer-1 coordinates at the origin
        origin = np.zeros((1, spec.dim))
        for a in range(spec.d):
            va = V[a].apply(x1).eval_batch(origin)
            wa = Vh[a].apply(x1).eval_batch(origin)
            assert np.allclose(va, wa)


def test_lemma_suite_clean(all_presets):
    for spec in all_presets:
        corpus = polynomial_corpus(spec, count=6)
        pts = sample_points(spec, 3, seed=17)
        for f in corpus:
            assert verify_scaling(spec, 0.7, 2.0, f).max_abs_coeff() < 1e-9
            assert verify_commutation(spec, 0.7, f).max_abs_coeff() < 1e-9
            for g in pts:
                assert abs(verify_ad_lemma(spec, 1.0, g, f)) < 1e-9


def test_commutation_needs_factor_two(h1):
    # dropping the 2 in 2t P_t Lf leaves a t * P_t(Lf) residual
    from carnotlab.calculus import dilation_field
    f = Polynomial.coordinate(3, 0) ** 2
    D = dilation_field(h1)
    t = 0.7
    bad = (heat_apply(h1, t, D.apply(f)) - D.apply(heat_apply(h1, t, f))
           - heat_apply(h1, t, sublaplacian(h1, f)) * t)
    want = heat_apply(h1, t, sublaplacian(h1, f)) * t
    assert (bad - want).max_abs_coeff() < 1e-12
    assert bad.max_abs_coeff() > 1.0


def test_corpus_properties(all_presets):
    for spec in all_presets:
        corpus = polynomial_corpus(spec, count=20)
        assert len(corpus) >= 20
        w = spec.weights
        assert all(f.hdeg(w) <= 6 for f in corpus)
        # corpus is deterministic
        again = polynomial_corpus(spec, count=20)
        assert all((a - b).max_abs_coeff() == 0.0 for a, b in zip(corpus, again))


def test_sample_points_deterministic(h1):
    a = sample_points(h1, 10)
    b = sample_points(h1, 10)
    assert np.array_equal(a, b)
    assert a.shape == (10, 3)
