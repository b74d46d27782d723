"""Sparse multivariate polynomials and polynomial-coefficient vector fields.

Everything symbolic in the package (group law, invariant fields, sub-Laplacian,
carre du champ, the finite Taylor heat semigroup) reduces to the arithmetic in
this module.  Polynomials are immutable-by-convention dicts mapping exponent
tuples to float coefficients; coordinates are the exponential coordinates of
the ambient group.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import DimensionMismatch

__all__ = ["Polynomial", "VectorField"]


def _check_same_nvars(a, b):
    if a.nvars != b.nvars:
        raise DimensionMismatch(
            f"operands have {a.nvars} and {b.nvars} variables")


class Polynomial:
    """Sparse polynomial: dict of exponent tuple -> coefficient.

    Zero coefficients are dropped eagerly so `terms` only holds structural
    content; tiny-but-nonzero coefficients from float arithmetic are kept
    (callers decide what counts as zero via `max_abs_coeff`).
    """

    __slots__ = ("nvars", "terms")

    def __init__(self, nvars, terms=None):
        self.nvars = int(nvars)
        self.terms = {}
        if terms:
            for exps, coeff in terms.items():
                if len(exps) != self.nvars:
                    raise DimensionMismatch(
                        f"exponent tuple {exps} does not have {self.nvars} entries")
                c = float(coeff)
                if c != 0.0:
                    self.terms[tuple(int(e) for e in exps)] = c

    # ---- constructors -------------------------------------------------

    @classmethod
    def zero(cls, nvars):
        return cls(nvars)

    @classmethod
    def constant(cls, nvars, value):
        p = cls(nvars)
        if float(value) != 0.0:
            p.terms[(0,) * nvars] = float(value)
        return p

    @classmethod
    def coordinate(cls, nvars, index):
        if not 0 <= index < nvars:
            raise DimensionMismatch(f"coordinate {index} out of range for {nvars} vars")
        exps = [0] * nvars
        exps[index] = 1
        p = cls(nvars)
        p.terms[tuple(exps)] = 1.0
        return p

    @classmethod
    def monomial(cls, nvars, exps, coeff=1.0):
        return cls(nvars, {tuple(exps): coeff})

    # ---- ring operations ----------------------------------------------

    def __add__(self, other):
        if not isinstance(other, Polynomial):
            other = Polynomial.constant(self.nvars, other)
        _check_same_nvars(self, other)
        out = dict(self.terms)
        for exps, c in other.terms.items():
            s = out.get(exps, 0.0) + c
            if s == 0.0:
                out.pop(exps, None)
            else:
                out[exps] = s
        res = Polynomial(self.nvars)
        res.terms = out
        return res

    __radd__ = __add__

    def __neg__(self):
        res = Polynomial(self.nvars)
        res.terms = {e: -c for e, c in self.terms.items()}
        return res

    def __sub__(self, other):
        if not isinstance(other, Polynomial):
            other = Polynomial.constant(self.nvars, other)
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, Polynomial):
            c = float(other)
            res = Polynomial(self.nvars)
            if c != 0.0:
                res.terms = {e: c * v for e, v in self.terms.items()}
            return res
        _check_same_nvars(self, other)
        out = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                key = tuple(a + b for a, b in zip(e1, e2))
                s = out.get(key, 0.0) + c1 * c2
                if s == 0.0:
                    out.pop(key, None)
                else:
                    out[key] = s
        res = Polynomial(self.nvars)
        res.terms = out
        return res

    __rmul__ = __mul__

    def __pow__(self, k):
        k = int(k)
        if k < 0:
            raise ValueError("negative powers not supported")
        result = Polynomial.constant(self.nvars, 1.0)
        base = self
        while k:
            if k & 1:
                result = result * base
            base = base * base if k > 1 else base
            k >>= 1
        return result

    # ---- calculus ------------------------------------------------------

    def diff(self, index):
        """Partial derivative with respect to coordinate `index`."""
        out = {}
        for exps, c in self.terms.items():
            e = exps[index]
            if e == 0:
                continue
            key = exps[:index] + (e - 1,) + exps[index + 1:]
            s = out.get(key, 0.0) + c * e
            if s == 0.0:
                out.pop(key, None)
            else:
                out[key] = s
        res = Polynomial(self.nvars)
        res.terms = out
        return res

    # ---- evaluation / substitution --------------------------------------

    def eval(self, point):
        pt = tuple(float(x) for x in point)
        if len(pt) != self.nvars:
            raise DimensionMismatch(
                f"point has {len(pt)} coordinates, polynomial has {self.nvars}")
        total = 0.0
        for exps, c in self.terms.items():
            v = c
            for x, e in zip(pt, exps):
                if e:
                    v *= x ** e
            total += v
        return total

    def eval_batch(self, points):
        """Evaluate on an (N, nvars) array; returns shape (N,)."""
        pts = np.asarray(points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != self.nvars:
            raise DimensionMismatch(
                f"expected (N, {self.nvars}) array, got {pts.shape}")
        out = np.zeros(pts.shape[0])
        for exps, c in self.terms.items():
            v = np.full(pts.shape[0], c)
            for a, e in enumerate(exps):
                if e:
                    v = v * pts[:, a] ** e
            out += v
        return out

    def compose(self, subs):
        """Substitute polynomial `subs[a]` for coordinate a."""
        if len(subs) != self.nvars:
            raise DimensionMismatch(
                f"need {self.nvars} substitutions, got {len(subs)}")
        nv = subs[0].nvars
        for s in subs:
            if s.nvars != nv:
                raise DimensionMismatch("substitutions live on different spaces")
        # cache powers of each substitution
        powers = [{0: Polynomial.constant(nv, 1.0)} for _ in subs]

        def power(a, k):
            store = powers[a]
            if k not in store:
                store[k] = power(a, k - 1) * subs[a]
            return store[k]

        total = Polynomial.zero(nv)
        for exps, c in self.terms.items():
            term = Polynomial.constant(nv, c)
            for a, e in enumerate(exps):
                if e:
                    term = term * power(a, e)
            total = total + term
        return total

    def partial_eval(self, assignments):
        """Fix some coordinates to numbers; keeps the ambient variable count."""
        res = Polynomial(self.nvars)
        out = {}
        for exps, c in self.terms.items():
            v = c
            key = list(exps)
            for a, x in assignments.items():
                e = exps[a]
                if e:
                    v *= float(x) ** e
                key[a] = 0
            if v == 0.0:
                continue
            k = tuple(key)
            s = out.get(k, 0.0) + v
            if s == 0.0:
                out.pop(k, None)
            else:
                out[k] = s
        res.terms = out
        return res

    def scale_coords(self, factors):
        """Coordinate scaling xi_a -> factors[a] * xi_a (used by dilations)."""
        if len(factors) != self.nvars:
            raise DimensionMismatch("factor count mismatch")
        res = Polynomial(self.nvars)
        out = {}
        for exps, c in self.terms.items():
            v = c
            for f, e in zip(factors, exps):
                if e:
                    v *= float(f) ** e
            if v != 0.0:
                out[exps] = v
        res.terms = out
        return res

    # ---- structure queries ----------------------------------------------

    def total_degree(self):
        return max((sum(e) for e in self.terms), default=0)

    def hdeg(self, weights):
        """Homogeneous degree: max over monomials of sum(w_a * e_a)."""
        if len(weights) != self.nvars:
            raise DimensionMismatch("weight count mismatch")
        return max((sum(w * e for w, e in zip(weights, exps))
                    for exps in self.terms), default=0)

    def max_abs_coeff(self):
        return max((abs(c) for c in self.terms.values()), default=0.0)

    def is_zero(self, tol=0.0):
        return self.max_abs_coeff() <= tol

    def allclose(self, other, tol=1e-12):
        return (self - other).max_abs_coeff() <= tol

    def drop_small(self, tol):
        """Copy without coefficients of magnitude <= tol (test hygiene only)."""
        res = Polynomial(self.nvars)
        res.terms = {e: c for e, c in self.terms.items() if abs(c) > tol}
        return res

    # ---- presentation ----------------------------------------------------

    def to_str(self, names=None):
        if not self.terms:
            return "0"
        if names is None:
            names = [f"x{a+1}" for a in range(self.nvars)]
        pieces = []
        for exps in sorted(self.terms, key=lambda e: (sum(e), e)):
            c = self.terms[exps]
            factors = []
            for nm, e in zip(names, exps):
                if e == 1:
                    factors.append(nm)
                elif e > 1:
                    factors.append(f"{nm}^{e}")
            body = "*".join(factors)
            coeff = f"{c:.12g}"
            pieces.append(f"{coeff}*{body}" if body else coeff)
        return " + ".join(pieces).replace("+ -", "- ")

    def __repr__(self):
        return f"Polynomial({self.nvars}, {self.to_str()})"

    def __eq__(self, other):
        if not isinstance(other, Polynomial):
            return NotImplemented
        return self.nvars == other.nvars and self.terms == other.terms

    def __hash__(self):
        return hash((self.nvars, frozenset(self.terms.items())))


class VectorField:
    """First-order operator sum_a comp[a] * d/dxi_a with polynomial comp."""

    __slots__ = ("nvars", "components")

    def __init__(self, nvars, components):
        self.nvars = int(nvars)
        self.components = {}
        for a, p in components.items():
            if not isinstance(p, Polynomial):
                p = Polynomial.constant(nvars, p)
            if p.nvars != self.nvars:
                raise DimensionMismatch("component lives on wrong space")
            if not p.is_zero():
                self.components[int(a)] = p

    def apply(self, f):
        if f.nvars != self.nvars:
            raise DimensionMismatch(
                f"field on {self.nvars} vars applied to {f.nvars}-var polynomial")
        out = Polynomial.zero(self.nvars)
        for a, coeff in self.components.items():
            out = out + coeff * f.diff(a)
        return out

    __call__ = apply

    def component(self, a):
        return self.components.get(a, Polynomial.zero(self.nvars))

    def component_matrix_eval(self, points):
        """Evaluate all components on an (N, nvars) batch -> (N, nvars)."""
        pts = np.asarray(points, dtype=float)
        out = np.zeros((pts.shape[0], self.nvars))
        for a, coeff in self.components.items():
            out[:, a] = coeff.eval_batch(pts)
        return out

    def __add__(self, other):
        if not isinstance(other, VectorField):
            return NotImplemented
        _check_same_nvars(self, other)
        comps = dict(self.components)
        for a, p in other.components.items():
            comps[a] = comps.get(a, Polynomial.zero(self.nvars)) + p
        return VectorField(self.nvars, comps)

    def __mul__(self, scalar):
        return VectorField(self.nvars,
                           {a: p * scalar for a, p in self.components.items()})

    __rmul__ = __mul__

    def commutator(self, other):
        """[X, Y] = XY - YX as a vector field (first-order part is exact)."""
        _check_same_nvars(self, other)
        comps = {}
        for a in range(self.nvars):
            xa = self.apply(other.component(a)) - other.apply(self.component(a))
            if not xa.is_zero():
                comps[a] = xa
        return VectorField(self.nvars, comps)

    def to_str(self, names=None):
        if names is None:
            names = [f"x{a+1}" for a in range(self.nvars)]
        parts = []
        for a in sorted(self.components):
            parts.append(f"({self.components[a].to_str(names)}) d/d{names[a]}")
        return " + ".join(parts) if parts else "0"

    def __repr__(self):
        return f"VectorField({self.to_str()})"
