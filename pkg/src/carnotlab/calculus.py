"""Sub-Riemannian operator calculus on polynomials.

The sub-Laplacian L = sum_i V_i^2 (horizontal frame, no 1/2), the carre du
champ Gamma(f, g) = sum_i V_i f V_i g, the dilation generator
D = sum_a w_a xi_a d/dxi_a, and the heat semigroup e^{tL} acting on
polynomials.  L lowers homogeneous degree by exactly 2, so the Taylor series
of e^{tL} terminates on polynomials and all identities here are checked
exactly (up to float roundoff in the coefficients).
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionMismatch
from .groups import (GroupSpec, ad_inverse_polys, dilate,
                     left_invariant_fields, left_translation_polys,
                     right_invariant_fields)
from .poly import Polynomial, VectorField

__all__ = [
    "apply_field", "sublaplacian", "carre_du_champ", "dilation_field",
    "heat_apply", "left_translate", "verify_commutation", "verify_scaling",
    "verify_ad_lemma", "gamma_identity_residual", "polynomial_corpus",
]


def _check_poly(spec, f):
    if f.nvars != spec.dim:
        raise DimensionMismatch(
            f"{spec.name} is {spec.dim}-dimensional; polynomial has {f.nvars} vars")


def apply_field(field, f):
    """Apply a vector field to a polynomial (thin alias for field.apply)."""
    return field.apply(f)


def horizontal_frame(spec, hat=False):
    fields = right_invariant_fields(spec) if hat else left_invariant_fields(spec)
    return fields[:spec.d]


def sublaplacian(spec, f, hat=False):
    """L f = sum_{i<=d} V_i(V_i f); hat=True uses the right-invariant frame."""
    _check_poly(spec, f)
    out = Polynomial.zero(spec.dim)
    for V in horizontal_frame(spec, hat):
        out = out + V.apply(V.apply(f))
    return out


def carre_du_champ(spec, f, g=None, hat=False):
    """Gamma(f, g) = sum_{i<=d} V_i f * V_i g (g defaults to f)."""
    _check_poly(spec, f)
    if g is None:
        g = f
    else:
        _check_poly(spec, g)
    out = Polynomial.zero(spec.dim)
    for V in horizontal_frame(spec, hat):
        out = out + V.apply(f) * V.apply(g)
    return out


def dilation_field(spec):
    """Generator of the dilation group, D = sum_a w_a xi_a d/dxi_a."""
    comps = {a: Polynomial.coordinate(spec.dim, a) * float(w)
             for a, w in enumerate(spec.weights)}
    return VectorField(spec.dim, comps)


def heat_apply(spec, t, f, hat=False):
    """P_t f = e^{tL} f; exact because the Taylor series terminates.

    L strictly lowers homogeneous degree by 2, so at most hdeg(f)//2 + 1
    terms are ever nonzero; the loop is guarded against that bound.
    """
    _check_poly(spec, f)
    jmax = f.hdeg(spec.weights) // 2 + 1
    out = f
    term = f
    for j in range(1, jmax + 2):
        term = sublaplacian(spec, term, hat=hat) * (float(t) / j)
        if term.is_zero():
            break
        out = out + term
    else:
        raise AssertionError("heat series failed to terminate; grading bug")
    return out


def left_translate(spec, g, f):
    """f composed with the left translation h -> g * h."""
    _check_poly(spec, f)
    return f.compose(left_translation_polys(spec, g))


# ---------------------------------------------------------------------------
# Lemma verifiers: each returns a residual the caller can assert small.
# ---------------------------------------------------------------------------

def verify_commutation(spec, t, f):
    """Residual of P_t D f - D P_t f - 2t P_t L f (identically 0 in theory).

    The identity is the c-derivative at c = 1 of the scaling relation
    P_t (f o Delta_c) = (P_{c^2 t} f) o Delta_c, where d(c^2 t)/dc = 2t.
    """
    D = dilation_field(spec)
    lhs = heat_apply(spec, t, D.apply(f))
    rhs = D.apply(heat_apply(spec, t, f)) + heat_apply(
        spec, t, sublaplacian(spec, f)) * (2.0 * float(t))
    return lhs - rhs


def verify_scaling(spec, t, c, f):
    """Residual of P_t(f o Delta_sqrt(c)) - (P_{ct} f) o Delta_sqrt(c)."""
    root = float(c) ** 0.5
    factors = [root ** w for w in spec.weights]
    lhs = heat_apply(spec, t, f.scale_coords(factors))
    rhs = heat_apply(spec, float(c) * float(t), f).scale_coords(factors)
    return lhs - rhs


def verify_ad_lemma(spec, t, g, f):
    """Residual at the point g of hat(P)_t f (g) - P_t (f o Ad_{g^{-1}}) (g)."""
    lhs = heat_apply(spec, t, f, hat=True).eval(g)
    rhs = heat_apply(spec, t, f.compose(ad_inverse_polys(spec, g))).eval(g)
    return lhs - rhs


def gamma_identity_residual(spec, f):
    """Residual of Gamma(f) - (L(f^2) - 2 f L f) / 2."""
    direct = carre_du_champ(spec, f)
    via_L = (sublaplacian(spec, f * f) - f * sublaplacian(spec, f) * 2.0) * 0.5
    return direct - via_L


def field_homogeneity_residual(spec, r, f, index=0):
    """Residual of V_i(f o Delta_r) - r * (V_i f) o Delta_r for i in layer 1."""
    V = left_invariant_fields(spec)[index]
    factors = [float(r) ** w for w in spec.weights]
    lhs = V.apply(f.scale_coords(factors))
    rhs = V.apply(f).scale_coords(factors) * float(r)
    return lhs - rhs


# ---------------------------------------------------------------------------
# Deterministic polynomial corpus for cross-checks
# ---------------------------------------------------------------------------

def polynomial_corpus(spec, count=24, max_hdeg=6, seed=20260814):
    """Seeded corpus of sparse polynomials of homogeneous degree <= max_hdeg.

    Coefficients are small integers so that symbolic identities are checked
    away from any float-noise floor.
    """
    rng = np.random.default_rng(seed)
    w = spec.weights
    n = spec.dim
    out = []
    # always include the coordinates themselves and a couple of squares
    for a in range(min(n, 3)):
        out.append(Polynomial.coordinate(n, a))
    out.append(Polynomial.coordinate(n, n - 1) ** 2)
    while len(out) < count:
        nterms = int(rng.integers(1, 5))
        p = Polynomial.zero(n)
        for _ in range(nterms):
            exps = [0] * n
            budget = int(rng.integers(1, max_hdeg + 1))
            while budget > 0:
                a = int(rng.integers(0, n))
                if w[a] <= budget:
                    exps[a] += 1
                    budget -= w[a]
                else:
                    break
            coeff = float(rng.integers(1, 4)) * (1.0 if rng.random() < 0.5 else -1.0)
            p = p + Polynomial.monomial(n, exps, coeff)
        if not p.is_zero() and p.hdeg(w) <= max_hdeg:
            out.append(p)
    return out[:count]


def sample_points(spec, count, seed=4711, radius=1.5):
    """Deterministic bounded sample points for pointwise checks."""
    rng = np.random.default_rng(seed)
    return rng.uniform(-radius, radius, size=(count, spec.dim))
