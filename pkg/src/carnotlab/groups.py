"""Carnot groups in exponential coordinates of the first kind.

A group is described by its graded Lie algebra: layer dimensions and structure
constants c^k_{ij} with [e_i, e_j] = sum_k c^k_{ij} e_k.  The group law is the
Baker-Campbell-Hausdorff series, which truncates exactly at step <= 4:

    Z = A + B + 1/2 [A,B] + 1/12 ([A,[A,B]] + [B,[B,A]]) - 1/24 [B,[A,[A,B]]]

Left/right-invariant frames are extracted mechanically from the BCH product
with an auxiliary flow variable; no closed-form field formulas are assumed.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import DimensionMismatch, SpecFileError, UnsupportedStep
from .poly import Polynomial, VectorField

__all__ = [
    "GroupSpec", "HTypeSpec", "product", "inverse", "dilate",
    "left_invariant_fields", "right_invariant_fields", "abelian",
    "heisenberg", "engel", "htype_group", "preset", "load_spec_file",
    "parse_spec_dict", "left_translation_polys", "ad_inverse_polys",
]


@dataclass(frozen=True, eq=False)
class HTypeSpec:
    """H-type data: R^{2n} x R^m with skew maps J_1..J_m.

    Requirements: each J_l is 2n x 2n, skew-symmetric, J_l^2 = -I, and
    J_l J_p + J_p J_l = 0 for l != p.
    """

    n: int
    m: int
    J: np.ndarray  # shape (m, 2n, 2n)

    def validate(self):
        n, m = self.n, self.m
        J = np.asarray(self.J, dtype=float)
        if n < 1 or m < 1:
            raise SpecFileError("h-type: n and m must be positive")
        if J.shape != (m, 2 * n, 2 * n):
            raise SpecFileError(
                f"h-type: J has shape {J.shape}, expected {(m, 2*n, 2*n)}")
        eye = np.eye(2 * n)
        for l in range(m):
            if not np.allclose(J[l], -J[l].T, atol=1e-12):
                raise SpecFileError(f"h-type: J_{l+1} is not skew-symmetric")
            if not np.allclose(J[l] @ J[l], -eye, atol=1e-12):
                raise SpecFileError(f"h-type: J_{l+1}^2 != -I")
        for l in range(m):
            for p in range(l + 1, m):
                if not np.allclose(J[l] @ J[p] + J[p] @ J[l], 0.0, atol=1e-12):
                    raise SpecFileError(
                        f"h-type: J_{l+1} and J_{p+1} do not anticommute")


@dataclass(frozen=True, eq=False)
class GroupSpec:
    """Graded nilpotent Lie algebra presented on an adapted basis."""

    name: str
    layers: tuple
    brackets: np.ndarray          # (dim, dim, dim); brackets[i, j, k] = c^k_{ij}
    htype: HTypeSpec | None = None
    coord_names: tuple | None = None

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(int(d) for d in self.layers))
        object.__setattr__(self, "brackets",
                           np.ascontiguousarray(self.brackets, dtype=float))

    # ---- derived structure ------------------------------------------------

    @property
    def dim(self):
        return sum(self.layers)

    @property
    def step(self):
        return len(self.layers)

    @property
    def d(self):
        """Horizontal dimension, dim V_1."""
        return self.layers[0]

    @property
    def weights(self):
        w = []
        for i, sz in enumerate(self.layers, start=1):
            w.extend([i] * sz)
        return tuple(w)

    @property
    def Q(self):
        """Homogeneous dimension sum_i i * dim V_i."""
        return sum((i + 1) * sz for i, sz in enumerate(self.layers))

    @property
    def names(self):
        if self.coord_names is not None:
            return self.coord_names
        out = []
        for i, sz in enumerate(self.layers, start=1):
            base = "x" if i == 1 else f"u{i}" if self.step > 2 else "z"
            for j in range(sz):
                out.append(f"{base}{j+1}" if sz > 1 or i == 1 else base)
        return tuple(out)

    # ---- validation ---------------------------------------------------------

    def validate(self):
        """Check structural invariants, reporting the first violated one."""
        n = self.dim
        c = self.brackets
        if not all(sz >= 1 for sz in self.layers):
            raise SpecFileError("layers must all be positive")
        if c.shape != (n, n, n):
            raise SpecFileError(
                f"brackets have shape {c.shape}, expected {(n, n, n)}")
        if not np.array_equal(c, -np.swapaxes(c, 0, 1)):
            raise SpecFileError("antisymmetry violated: c^k_ij != -c^k_ji")
        w = self.weights
        for i in range(n):
            for j in range(n):
                for k in range(n):
                    if c[i, j, k] != 0.0 and w[k] != w[i] + w[j]:
                        raise SpecFileError(
                            f"grading violated: [e{i+1},e{j+1}] hits e{k+1} "
                            f"but weights are {w[i]}+{w[j]} -> {w[k]}")
        # Jacobi: [[i,j],k] + [[j,k],i] + [[k,i],j] = 0
        jac = (np.einsum("ijm,mkl->ijkl", c, c)
               + np.einsum("jkm,mil->ijkl", c, c)
               + np.einsum("kim,mjl->ijkl", c, c))
        bad = np.argwhere(np.abs(jac) > 1e-12)
        if bad.size:
            i, j, k, _ = bad[0]
            raise SpecFileError(
                f"Jacobi identity violated on (e{i+1}, e{j+1}, e{k+1})")
        # nilpotency beyond the top layer (implied by grading; asserted anyway)
        N = self.step
        for i in range(n):
            for j in range(n):
                if w[i] + w[j] > N and np.any(c[i, j] != 0.0):
                    raise SpecFileError(
                        f"nilpotency violated: [e{i+1},e{j+1}] nonzero above step {N}")
        if self.htype is not None:
            self.htype.validate()
        return self

    # ---- small numeric helpers ---------------------------------------------

    @property
    def _bracket_nonzeros(self):
        nz = self.__dict__.get("_nz")
        if nz is None:
            idx = np.argwhere(self.brackets != 0.0)
            nz = tuple((int(i), int(j), int(k), float(self.brackets[i, j, k]))
                       for i, j, k in idx)
            object.__setattr__(self, "_nz", nz)
        return nz

    def bracket(self, u, v):
        """[u, v] for batched coefficient vectors (..., dim).

        The structure tensor is sparse for every group here, so the sum runs
        over its nonzero entries; this is the hot path under Monte Carlo
        stepping and grid quadratures.
        """
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        shape = np.broadcast_shapes(u.shape[:-1], v.shape[:-1]) + (self.dim,)
        out = np.zeros(shape)
        for i, j, k, c in self._bracket_nonzeros:
            out[..., k] += c * (u[..., i] * v[..., j])
        return out

    def point(self, *coords):
        g = np.asarray(coords, dtype=float).reshape(-1)
        if g.shape != (self.dim,):
            raise DimensionMismatch(
                f"{self.name}: point needs {self.dim} coordinates, got {g.shape[0]}")
        return g

    def __repr__(self):
        return f"GroupSpec({self.name!r}, layers={self.layers}, Q={self.Q})"


# ---------------------------------------------------------------------------
# BCH group law (numeric, batched) and its symbolic counterpart
# ---------------------------------------------------------------------------

def _require_step4(spec):
    if spec.step > 4:
        raise UnsupportedStep(
            f"{spec.name} has step {spec.step}; the BCH truncation used here "
            "is exact only for step <= 4")


def product(spec, g, h):
    """Group product g * h in exponential coordinates (batched ok).

    Brackets of weight above the step vanish identically, so the higher BCH
    terms are skipped rather than multiplied out to zero.
    """
    _require_step4(spec)
    A = np.asarray(g, dtype=float)
    B = np.asarray(h, dtype=float)
    AB = spec.bracket(A, B)
    out = A + B + 0.5 * AB
    if spec.step >= 3:
        A_AB = spec.bracket(A, AB)
        out = out + (A_AB - spec.bracket(B, AB)) / 12.0
        if spec.step >= 4:
            out = out - spec.bracket(B, A_AB) / 24.0
    return out


def inverse(spec, g):
    """Inverse is negation in exponential coordinates of the first kind."""
    return -np.asarray(g, dtype=float)


def dilate(spec, t, g):
    """Anisotropic dilation Delta_t, coordinate a scaled by t^{w_a}."""
    if t < 0:
        raise ValueError("dilation parameter must be nonnegative")
    g = np.asarray(g, dtype=float)
    factors = np.array([float(t) ** w for w in spec.weights])
    return g * factors


def _bracket_polys(spec, U, V):
    """[U, V] where U, V are length-dim lists of Polynomials."""
    nv = U[0].nvars
    out = [Polynomial.zero(nv) for _ in range(spec.dim)]
    c = spec.brackets
    for i, j, k in zip(*np.nonzero(c)):
        out[k] = out[k] + (U[i] * V[j]) * c[i, j, k]
    return out


def _bch_polys(spec, A, B):
    """Symbolic BCH product of two polynomial-coefficient algebra elements."""
    _require_step4(spec)
    AB = _bracket_polys(spec, A, B)
    A_AB = _bracket_polys(spec, A, AB)
    B_AB = _bracket_polys(spec, B, AB)
    B_A_AB = _bracket_polys(spec, B, A_AB)
    out = []
    for a in range(spec.dim):
        z = (A[a] + B[a] + AB[a] * 0.5
             + (A_AB[a] - B_AB[a]) * (1.0 / 12.0)
             - B_A_AB[a] * (1.0 / 24.0))
        out.append(z)
    return out


@lru_cache(maxsize=None)
def product_polys(spec):
    """Coordinates of g*h as polynomials in 2*dim variables (g then h)."""
    n = spec.dim
    A = [Polynomial.coordinate(2 * n, a) for a in range(n)]
    B = [Polynomial.coordinate(2 * n, n + a) for a in range(n)]
    return tuple(_bch_polys(spec, A, B))


def _fields_from_bch(spec, left):
    """Derive the invariant frame by differentiating the BCH product.

    Flow variable s rides as coordinate index `dim`; the field generated by
    e_i is the s-linear part of BCH(xi, s e_i) (left-invariant frame) or
    BCH(s e_i, xi) (right-invariant frame).
    """
    n = spec.dim
    nv = n + 1
    coords = [Polynomial.coordinate(nv, a) for a in range(n)]
    s = Polynomial.coordinate(nv, n)
    fields = []
    for i in range(n):
        direction = [Polynomial.zero(nv) for _ in range(n)]
        direction[i] = s
        Z = (_bch_polys(spec, coords, direction) if left
             else _bch_polys(spec, direction, coords))
        comps = {}
        for a in range(n):
            lin = Polynomial.zero(n)
            for exps, c in Z[a].terms.items():
                if exps[n] == 1:
                    lin = lin + Polynomial.monomial(n, exps[:n], c)
                elif exps[n] > 1:
                    # higher flow powers never contribute to the generator
                    continue
            if not lin.is_zero():
                comps[a] = lin
        fields.append(VectorField(n, comps))
    return tuple(fields)


@lru_cache(maxsize=None)
def left_invariant_fields(spec):
    """Frame V_1..V_dim; the first spec.d entries span the horizontal layer."""
    return _fields_from_bch(spec, left=True)


@lru_cache(maxsize=None)
def right_invariant_fields(spec):
    return _fields_from_bch(spec, left=False)


def left_translation_polys(spec, g):
    """Coordinates of g*h as polynomials in h (g numeric)."""
    n = spec.dim
    A = [Polynomial.constant(n, x) for x in np.asarray(g, dtype=float)]
    B = [Polynomial.coordinate(n, a) for a in range(n)]
    return _bch_polys(spec, A, B)


def ad_inverse_polys(spec, g):
    """Coordinates of Ad_{g^{-1}} h = g^{-1} * h * g as polynomials in h."""
    n = spec.dim
    gv = np.asarray(g, dtype=float)
    neg = [Polynomial.constant(n, -x) for x in gv]
    pos = [Polynomial.constant(n, x) for x in gv]
    coords = [Polynomial.coordinate(n, a) for a in range(n)]
    inner = _bch_polys(spec, neg, coords)     # g^{-1} * h
    return _bch_polys(spec, inner, pos)       # (g^{-1} h) * g


# ---------------------------------------------------------------------------
# Presets
# ---------------------------------------------------------------------------

def abelian(dmax):
    """R^d with trivial brackets; heat flow is the classical one."""
    d = int(dmax)
    if d < 1:
        raise SpecFileError("abelian dimension must be positive")
    c = np.zeros((d, d, d))
    return GroupSpec(name=f"abelian-{d}", layers=(d,), brackets=c,
                     coord_names=tuple(f"x{i+1}" for i in range(d))).validate()


def htype_group(n, m, J, name):
    """Assemble an H-type group from its J maps: c^{2n+l}_{ij} = (J_l)_{ji}."""
    ht = HTypeSpec(n=int(n), m=int(m), J=np.asarray(J, dtype=float))
    ht.validate()
    dim = 2 * ht.n + ht.m
    c = np.zeros((dim, dim, dim))
    for l in range(ht.m):
        for i in range(2 * ht.n):
            for j in range(2 * ht.n):
                c[i, j, 2 * ht.n + l] = ht.J[l][j, i]
    names = tuple(f"x{i+1}" for i in range(2 * ht.n)) + (
        ("z",) if ht.m == 1 else tuple(f"z{l+1}" for l in range(ht.m)))
    return GroupSpec(name=name, layers=(2 * ht.n, ht.m), brackets=c,
                     htype=ht, coord_names=names).validate()


def heisenberg(n):
    """H_n = R^{2n} x R with the symplectic form omega(x,y) = x^T S y.

    S = [[0, -I], [I, 0]]; the induced J = S^T satisfies <Jx, y> = omega(x, y).
    """
    n = int(n)
    if n < 1:
        raise SpecFileError("heisenberg index must be positive")
    S = np.zeros((2 * n, 2 * n))
    S[:n, n:] = -np.eye(n)
    S[n:, :n] = np.eye(n)
    return htype_group(n, 1, S.T[None, :, :], name=f"heisenberg-{n}")


def generic_htype_21():
    """An H-type group with n=2, m=1 that is not a Heisenberg preset."""
    J = np.array([[0.0, 0.0, 0.0, 1.0],
                  [0.0, 0.0, 1.0, 0.0],
                  [0.0, -1.0, 0.0, 0.0],
                  [-1.0, 0.0, 0.0, 0.0]])
    return htype_group(2, 1, J[None, :, :], name="htype-2-1")


def engel():
    """Step-3 filiform group: [X, Y] = W, [X, W] = Z, dim 4, Q = 7."""
    c = np.zeros((4, 4, 4))
    c[0, 1, 2] = 1.0
    c[1, 0, 2] = -1.0
    c[0, 2, 3] = 1.0
    c[2, 0, 3] = -1.0
    return GroupSpec(name="engel", layers=(2, 1, 1), brackets=c,
                     coord_names=("x", "y", "w", "z")).validate()


def preset(name):
    """Look up a named preset; `abelian-<d>` and `heisenberg-<n>` are families."""
    name = str(name).strip()
    if name == "engel":
        return engel()
    if name == "htype-2-1":
        return generic_htype_21()
    for family, builder in (("abelian-", abelian), ("heisenberg-", heisenberg)):
        if name.startswith(family):
            try:
                idx = int(name[len(family):])
            except ValueError:
                raise SpecFileError(f"malformed preset name {name!r}") from None
            return builder(idx)
    raise SpecFileError(
        f"unknown group {name!r}; presets: abelian-<d>, heisenberg-<n>, "
        "htype-2-1, engel (or pass a spec file path)")


# ---------------------------------------------------------------------------
# Spec-file loader
# ---------------------------------------------------------------------------

_GRADED_FIELDS = {"type", "name", "layers", "brackets"}
_HTYPE_FIELDS = {"type", "name", "n", "m", "J"}
_BRACKET_ENTRY_FIELDS = {"i", "j", "k", "c"}


def parse_spec_dict(data):
    """Build and validate a GroupSpec from a parsed JSON document.

    Graded form:  {"type": "graded", "name": ..., "layers": [..],
                   "brackets": [{"i":0,"j":1,"k":2,"c":1.0}, ...]}  (0-based)
    H-type form:  {"type": "h-type", "name": ..., "n": 1, "m": 1,
                   "J": [ [[...2n x 2n...]], ... m matrices ]}
    Unknown fields are rejected.
    """
    if not isinstance(data, dict):
        raise SpecFileError("spec document must be a JSON object")
    kind = data.get("type")
    if kind == "graded":
        extra = set(data) - _GRADED_FIELDS
        if extra:
            raise SpecFileError(f"unexpected field(s) in graded spec: {sorted(extra)}")
        missing = _GRADED_FIELDS - set(data)
        if missing:
            raise SpecFileError(f"missing field(s) in graded spec: {sorted(missing)}")
        layers = tuple(int(x) for x in data["layers"])
        n = sum(layers)
        c = np.zeros((n, n, n))
        for ent in data["brackets"]:
            extra = set(ent) - _BRACKET_ENTRY_FIELDS
            if extra:
                raise SpecFileError(
                    f"unexpected field(s) in bracket entry: {sorted(extra)}")
            try:
                i, j, k, v = int(ent["i"]), int(ent["j"]), int(ent["k"]), float(ent["c"])
            except KeyError as exc:
                raise SpecFileError(f"bracket entry missing field {exc}") from None
            if not (0 <= i < n and 0 <= j < n and 0 <= k < n):
                raise SpecFileError(f"bracket entry index out of range: {ent}")
            c[i, j, k] += v
        # fill antisymmetric mirrors the author left implicit
        for i in range(n):
            for j in range(i + 1, n):
                for k in range(n):
                    if c[i, j, k] != 0.0 and c[j, i, k] == 0.0:
                        c[j, i, k] = -c[i, j, k]
                    elif c[j, i, k] != 0.0 and c[i, j, k] == 0.0:
                        c[i, j, k] = -c[j, i, k]
        spec = GroupSpec(name=str(data["name"]), layers=layers, brackets=c)
        return spec.validate()
    if kind == "h-type":
        extra = set(data) - _HTYPE_FIELDS
        if extra:
            raise SpecFileError(f"unexpected field(s) in h-type spec: {sorted(extra)}")
        missing = _HTYPE_FIELDS - set(data)
        if missing:
            raise SpecFileError(f"missing field(s) in h-type spec: {sorted(missing)}")
        J = np.asarray(data["J"], dtype=float)
        return htype_group(data["n"], data["m"], J, name=str(data["name"]))
    raise SpecFileError(f"unknown spec type {kind!r}; expected 'graded' or 'h-type'")


def load_spec_file(path):
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SpecFileError(f"{path}: invalid JSON ({exc})") from None
    return parse_spec_dict(data)


def resolve_group(name_or_path):
    """CLI helper: preset name, else a path to a JSON spec file."""
    s = str(name_or_path)
    if s.endswith(".json") or "/" in s:
        return load_spec_file(s)
    return preset(s)
