"""Heat-kernel evaluators for groups with explicit formulas.

Supported: abelian (closed-form Gaussian, generator sum of plain second
derivatives so the variance is 2t per coordinate) and H-type groups via the
oscillatory integral

    p_t(x, z) = (2 pi)^{-m} (4 pi)^{-n} int_{R^m} cos(lam . z)
                e^{-(|lam| |x|^2 / 4) coth(|lam| t)} (|lam|/sinh(|lam| t))^n dlam

reduced to [0, inf) by even symmetry when m = 1.  Quadrature is adaptive
Gauss-Legendre panels on [0, R] with an analytic tail bound: for u = lam*t >= 1,
sinh(u) >= e^u (1 - e^{-2})/2, so the integrand tail is below
(c0 lam)^n e^{-n lam t} with c0 = 2/(1 - e^{-2}), integrable in closed form
via the integer upper incomplete gamma.  Oscillation in cos(lam z) sets the
panel width ~ pi/(|z|+1).  Step-3 groups (Engel) have no evaluator.

Derivatives are taken under the integral sign analytically; finite-difference
versions exist only in the tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ._fastpath import htype_m1_batch
from .errors import (DimensionMismatch, NumericalUnderflow,
                     QuadratureNotConverged, UnsupportedGroup)

__all__ = ["QuadratureConfig", "KernelEvaluator", "UNDERFLOW_FLOOR"]

UNDERFLOW_FLOOR = 1e-280
_CHUNK = 8192


@dataclass(frozen=True)
class QuadratureConfig:
    rel_tol: float = 1e-11          # panel-doubling agreement target
    pde_rel_tol: float = 1e-15      # stricter target for residual node sets
    nodes_per_panel: int = 16
    max_doublings: int = 8
    tail_rel: float = 1e-18         # analytic tail vs origin-scale integral
    tensor_nodes_per_panel: int = 8
    max_tensor_axis_nodes: int = 4096
    max_tensor_grid_points: int = 1 << 24


def _upper_gamma_int(a, y):
    """Gamma(a, y) for integer a >= 1: (a-1)! e^{-y} sum_{k<a} y^k/k!."""
    s = 0.0
    term = 1.0
    for k in range(a):
        if k > 0:
            term *= y / k
        s += term
    return math.factorial(a - 1) * math.exp(-y) * s


def _gl_panels(lo, hi, n_panels, nodes_per_panel):
    """Gauss-Legendre nodes/weights on n_panels equal panels of [lo, hi]."""
    x, w = np.polynomial.legendre.leggauss(nodes_per_panel)
    h = (hi - lo) / n_panels
    starts = lo + h * np.arange(n_panels)
    nodes = (starts[:, None] + 0.5 * h * (x[None, :] + 1.0)).ravel()
    weights = np.tile(0.5 * h * w, n_panels)
    return nodes, weights


@lru_cache(maxsize=8)
def _leggauss_ld(n):
    """Gauss-Legendre base rule on [-1, 1] in longdouble.

    float64 node positions limit quadrature accuracy near 1e-15 of the
    integrand envelope (the node jitter couples to f'), which is not enough
    for the strict PDE node sets; a few Newton steps on the recurrence give
    the extra digits.
    """
    x = np.polynomial.legendre.leggauss(n)[0].astype(np.longdouble)
    one = np.longdouble(1.0)
    for _ in range(8):
        p0 = np.ones_like(x)
        p1 = x.copy()
        for k in range(2, n + 1):
            p0, p1 = p1, ((2 * k - 1) * x * p1 - (k - 1) * p0) / k
        dp = n * (x * p1 - p0) / (x * x - one)
        dx = p1 / dp
        x = x - dx
        if float(np.max(np.abs(dx))) < 1e-19:
            break
    p0 = np.ones_like(x)
    p1 = x.copy()
    for k in range(2, n + 1):
        p0, p1 = p1, ((2 * k - 1) * x * p1 - (k - 1) * p0) / k
    dp = n * (x * p1 - p0) / (x * x - one)
    w = 2 / ((one - x * x) * dp * dp)
    return x, w


def _gl_panels_ld(lo, hi, n_panels, nodes_per_panel):
    """Longdouble version of _gl_panels for the strict node sets."""
    x, w = _leggauss_ld(nodes_per_panel)
    h = (np.longdouble(hi) - np.longdouble(lo)) / n_panels
    starts = np.longdouble(lo) + h * np.arange(n_panels, dtype=np.longdouble)
    nodes = (starts[:, None] + 0.5 * h * (x[None, :] + 1)).ravel()
    weights = np.tile(0.5 * h * w, n_panels)
    return nodes, weights


def _coth_factor(lam, t):
    """lam * coth(lam * t), with the analytic limit 1/t at lam = 0."""
    u = lam * t
    out = np.empty_like(lam)
    small = u < 1e-3
    us = u[small]
    out[small] = (1.0 + us * us / 3.0 - us ** 4 / 45.0) / t
    ul = u[~small]
    out[~small] = lam[~small] / np.tanh(ul)
    return out


def _sinh_factor(lam, t):
    """lam / sinh(lam * t), with the analytic limit 1/t at lam = 0."""
    u = lam * t
    out = np.empty_like(lam)
    small = u < 1e-3
    us = u[small]
    out[small] = (1.0 - us * us / 6.0 + 7.0 * us ** 4 / 360.0) / t
    with np.errstate(over="ignore", under="ignore"):
        out[~small] = lam[~small] / np.sinh(u[~small])
    return out


def _bucket(v, floor):
    """Smallest power of two >= max(v, floor)."""
    return float(2.0 ** math.ceil(math.log2(max(float(v), floor))))


class _AbelianKernel:
    """Closed-form Gaussian for (R^d, +): p_t(x) = (4 pi t)^{-d/2} e^{-|x|^2/4t}."""

    def __init__(self, spec, quad):
        self.spec = spec
        self.d = spec.dim

    def kernel_batch(self, t, pts):
        pts = np.asarray(pts, dtype=float)
        r2 = np.sum(pts * pts, axis=1)
        p = (4.0 * np.pi * t) ** (-0.5 * self.d) * np.exp(-r2 / (4.0 * t))
        ok = p >= UNDERFLOW_FLOOR
        return p, ok

    def log_gradient_batch(self, t, pts, hat=True):
        pts = np.asarray(pts, dtype=float)
        p, ok = self.kernel_batch(t, pts)
        return -pts / (2.0 * t), ok

    def kernel_and_log_gradient_batch(self, t, pts, hat=True):
        pts = np.asarray(pts, dtype=float)
        p, ok = self.kernel_batch(t, pts)
        return p, -pts / (2.0 * t), ok

    def pde_residual_batch(self, t, pts):
        # (tL + D/2 + Q/2) p_t vanishes identically for the Gaussian; the
        # closed form makes the residual exactly zero in exact arithmetic.
        pts = np.asarray(pts, dtype=float)
        r2 = np.sum(pts * pts, axis=1)
        d = self.d
        p, ok = self.kernel_batch(t, pts)
        lap = p * (r2 / (4.0 * t * t) - d / (2.0 * t))
        dil = p * (-r2 / (2.0 * t))
        res = (t * lap + 0.5 * dil + 0.5 * d * p) / (p * (d / (2.0 * t)))
        return res, ok

    def kernel_at_origin(self, t):
        return (4.0 * np.pi * t) ** (-0.5 * self.d)


class _HTypeM1Kernel:
    """Quadrature evaluator for H-type groups with a 1-dimensional center."""

    def __init__(self, spec, quad):
        self.spec = spec
        self.quad = quad
        ht = spec.htype
        self.n = ht.n
        self.J = np.asarray(ht.J[0], dtype=float)
        self.pref = 2.0 / (2.0 * np.pi) / (4.0 * np.pi) ** self.n
        self._nodes_cache = {}

    # -- node construction -------------------------------------------------

    def _tail_radius(self, t):
        n = self.n
        c0 = 2.0 / (1.0 - math.exp(-2.0))
        kappa = (c0 ** n) * (1.0 / math.tanh(1.0)) ** 2  # covers the g^2 factor
        target = self.quad.tail_rel * (0.85 ** n) * t ** (-(n + 1.0))
        R = 2.0 / t
        for _ in range(600):
            nt = n * t
            bound = kappa * _upper_gamma_int(n + 3, nt * R) / nt ** (n + 3)
            if bound <= target:
                return R
            R *= 1.2
        raise QuadratureNotConverged(
            f"tail bound not reachable for t={t} (last R={R:.3g})")

    def _factors(self, t, nodes, weights):
        gfac = _coth_factor(nodes, t)
        sfac = _sinh_factor(nodes, t) ** self.n
        return {"lam": nodes, "w": weights, "gfac": gfac, "sfac": sfac}

    def _factors_strict(self, t, nodes_ld, weights_ld):
        """Node factors held in longdouble, with float64 mirrors."""
        t_ld = np.longdouble(t)
        g = _coth_factor(nodes_ld, t_ld)
        s = _sinh_factor(nodes_ld, t_ld) ** self.n
        return {"lam": nodes_ld.astype(float), "w": weights_ld.astype(float),
                "gfac": g.astype(float), "sfac": s.astype(float),
                "ld": (nodes_ld, weights_ld, g, s)}

    def _probe_values(self, t, fac, r2_probes, z_probes, strict):
        """Convergence probe covering all integrand weights used downstream.

        Returns the integrals and their envelopes max |integrand|.  The
        lam^2-weighted integral (PDE path) converges slowest, so checking
        I0 alone would accept node sets too coarse for the residual checks.
        Envelopes matter at large |z|: the oscillatory sums cancel by
        e^{-pi z/t}, so agreement relative to the cancelled value is not
        achievable in doubles and relative to the envelope is what the
        quadrature can honestly deliver.  Strict probes run in longdouble
        because their tolerance sits below float64 summation noise.
        """
        if strict:
            lam, w, g, s = self._ld_factors(t, fac)
        else:
            lam, w = fac["lam"], fac["w"]
            g, s = fac["gfac"], fac["sfac"]
        out, env = [], []
        for r2, z in zip(r2_probes, z_probes):
            with np.errstate(under="ignore"):
                E = np.exp(-0.25 * r2 * g) * s
                C = np.cos(lam * z) * E
                S = np.sin(lam * z) * E
                out.append([C @ w, C @ (w * g * g), S @ (w * lam)])
                env.append([E.max(), (E * g * g).max(), (E * lam).max()])
        return np.asarray(out, dtype=float), np.asarray(env, dtype=float)

    def _build_nodes(self, t, zmax, r2max, strict):
        R = self._tail_radius(t)
        # r2max does not enter: the e^{-r2 g/4} factor is a smooth low-lambda
        # feature the probe-and-double loop resolves on its own; seeding the
        # panel width from it explodes the node count for far-tail buckets
        h0 = min(np.pi / (zmax + 1.0), 3.0 / (1.0 + self.n * t))
        panels = max(8, int(math.ceil(R / h0)))
        probes_r2 = np.array([0.0, r2max, r2max, 0.25 * r2max, 0.0])
        probes_z = np.array([0.0, 0.0, zmax, zmax, zmax])
        rel_tol = self.quad.pde_rel_tol if strict else self.quad.rel_tol
        doublings = self.quad.max_doublings + (2 if strict else 0)

        def build(n_panels):
            if strict:
                nodes, weights = _gl_panels_ld(0.0, R, n_panels,
                                               self.quad.nodes_per_panel)
                return self._factors_strict(t, nodes, weights)
            nodes, weights = _gl_panels(0.0, R, n_panels,
                                        self.quad.nodes_per_panel)
            return self._factors(t, nodes, weights)

        fac = build(panels)
        vals, _ = self._probe_values(t, fac, probes_r2, probes_z, strict)
        for _ in range(doublings):
            panels *= 2
            fac2 = build(panels)
            vals2, env2 = self._probe_values(t, fac2, probes_r2, probes_z, strict)
            scale = np.maximum(env2, UNDERFLOW_FLOOR / self.pref)
            if np.all(np.abs(vals2 - vals) <= rel_tol * scale):
                return fac2
            fac, vals = fac2, vals2
        raise QuadratureNotConverged(
            f"panel doubling did not converge (t={t}, zmax={zmax}, r2max={r2max})")

    def _nodes_for(self, t, zmax, r2max, strict=False):
        zb = _bucket(zmax, 0.5)
        rb = _bucket(r2max, 16.0)
        key = (float(t), zb, rb, strict)
        if key not in self._nodes_cache:
            self._nodes_cache[key] = self._build_nodes(t, zb, rb, strict)
        return self._nodes_cache[key]

    # -- core integrals ------------------------------------------------------

    def _split(self, t, pts):
        pts = np.asarray(pts, dtype=float)
        if pts.shape[1] != self.spec.dim:
            raise DimensionMismatch(
                f"points have {pts.shape[1]} coords, group dim is {self.spec.dim}")
        x = pts[:, :2 * self.n]
        z = pts[:, 2 * self.n]
        r2 = np.sum(x * x, axis=1)
        return x, r2, z

    def _prescreen(self, t, r2, z):
        """Points whose kernel value provably underflows are flagged upfront."""
        return (r2 / (4.0 * t) < 650.0) & (np.abs(z) / (t * t) < 256.0)

    def _triple(self, t, r2, z):
        """(I0, I1, I2) per sample, bucketed by |z| and r2 magnitudes."""
        N = r2.shape[0]
        I0 = np.zeros(N)
        I1 = np.zeros(N)
        I2 = np.zeros(N)
        live = self._prescreen(t, r2, z)
        idx = np.nonzero(live)[0]
        if idx.size == 0:
            return I0, I1, I2, live
        az = np.abs(z[idx])
        zb = np.ceil(np.log2(np.maximum(az, 0.5))).astype(int)
        rb = np.ceil(np.log2(np.maximum(r2[idx], 16.0))).astype(int)
        codes = zb * 64 + rb
        for code in np.unique(codes):
            sel = idx[codes == code]
            fac = self._nodes_for(t, float(np.max(np.abs(z[sel]))),
                                  float(np.max(r2[sel])))
            # keep the (chunk x nodes) work matrices around 200 MB
            chunk = max(128, min(_CHUNK, (24 << 20) // fac["lam"].size))
            for lo in range(0, sel.size, chunk):
                sl = sel[lo:lo + chunk]
                a, b, c = htype_m1_batch(r2[sl], z[sl], fac["gfac"],
                                         fac["sfac"], fac["lam"], fac["w"])
                I0[sl], I1[sl], I2[sl] = a, b, c
        return I0, I1, I2, live

    def _ld_factors(self, t, fac):
        """Extended-precision copy of a node set, built once per bucket."""
        if "ld" not in fac:
            lam = fac["lam"].astype(np.longdouble)
            w = fac["w"].astype(np.longdouble)
            t_ld = np.longdouble(t)
            g = _coth_factor(lam, t_ld)
            s = _sinh_factor(lam, t_ld) ** self.n
            fac["ld"] = (lam, w, g, s)
        return fac["ld"]

    def _extended(self, t, r2, z):
        """Adds the second-derivative integrals (cold path, numpy only).

        Computed in longdouble: the PDE residual divides a combination that
        cancels to zero by a kernel value that is itself e^{-pi z/t} below
        the integrand envelope, so float64 node roundoff alone would leave
        residual noise near 1e-6 at pure-center points for small t.
        """
        N = r2.shape[0]
        out = {k: np.zeros(N, dtype=np.longdouble)
               for k in ("I0", "I1", "I2", "I11", "Izz")}
        live = self._prescreen(t, r2, z)
        idx = np.nonzero(live)[0]
        for j in idx:
            fac = self._nodes_for(t, abs(float(z[j])), float(r2[j]),
                                  strict=True)
            lam, w, g, s = self._ld_factors(t, fac)
            with np.errstate(under="ignore"):
                E = np.exp(np.longdouble(-0.25) * np.longdouble(r2[j]) * g) * s
                C = np.cos(lam * np.longdouble(z[j])) * E
                S = np.sin(lam * np.longdouble(z[j])) * E
            out["I0"][j] = C @ w
            out["I1"][j] = C @ (w * g)
            out["I2"][j] = S @ (w * lam)
            out["I11"][j] = C @ (w * g * g)
            out["Izz"][j] = C @ (w * lam * lam)
        return out, live

    # -- public surface --------------------------------------------------------

    def kernel_batch(self, t, pts):
        _, r2, z = self._split(t, pts)
        I0, _, _, live = self._triple(t, r2, z)
        p = self.pref * I0
        ok = live & (p >= UNDERFLOW_FLOOR)
        return p, ok

    def log_gradient_batch(self, t, pts, hat=True):
        """(V-hat_i ln p_t) rows; hat=False gives the left-invariant frame."""
        _, grads, ok = self.kernel_and_log_gradient_batch(t, pts, hat=hat)
        return grads, ok

    def kernel_and_log_gradient_batch(self, t, pts, hat=True):
        x, r2, z = self._split(t, pts)
        I0, I1, I2, live = self._triple(t, r2, z)
        p = self.pref * I0
        ok = live & (p >= UNDERFLOW_FLOOR)
        safe_I0 = np.where(ok, I0, 1.0)
        Jx = x @ self.J.T
        sign = 1.0 if hat else -1.0
        grads = (-0.5 * x * I1[:, None] + sign * 0.5 * Jx * I2[:, None]) \
            / safe_I0[:, None]
        return p, grads, ok

    def pde_residual_batch(self, t, pts):
        _, r2, z = self._split(t, pts)
        ints, live = self._extended(t, r2, z)
        I0, I1, I2 = ints["I0"], ints["I1"], ints["I2"]
        I11, Izz = ints["I11"], ints["Izz"]
        ok = live & (self.pref * I0 >= UNDERFLOW_FLOOR)
        n = self.n
        Q = np.longdouble(self.spec.Q)
        r2l = r2.astype(np.longdouble)
        zl = z.astype(np.longdouble)
        lap = -n * I1 + 0.25 * r2l * I11 - 0.25 * r2l * Izz
        dil = -0.5 * r2l * I1 - 2.0 * zl * I2
        safe_I0 = np.where(ok, I0, np.longdouble(1.0))
        # (tL + D/2 + Q/2) p_t = 0: differentiate p_{ct}(dilate(sqrt(c), g))
        # = c^{-Q/2} p_t(g) at c = 1; the D coefficient is 1/2, not 1
        res = (t * lap + 0.5 * dil + 0.5 * Q * I0) / (safe_I0 * (Q / t))
        return res.astype(float), ok

    def kernel_at_origin(self, t):
        fac = self._nodes_for(t, 0.0, 0.0)
        p = self.pref * float(fac["sfac"] @ fac["w"])
        return p


class _HTypeTensorKernel:
    """Tensor-product quadrature for H-type centers of dimension 2 or 3.

    A correct slow path: full grid over [-R, R]^m, no Hankel reduction.
    """

    def __init__(self, spec, quad):
        self.spec = spec
        self.quad = quad
        ht = spec.htype
        self.n = ht.n
        self.m = ht.m
        self.J = np.asarray(ht.J, dtype=float)
        self.pref = (2.0 * np.pi) ** (-self.m) * (4.0 * np.pi) ** (-self.n)
        self._cache = {}

    def _tail_radius(self, t):
        n, m = self.n, self.m
        c0 = 2.0 / (1.0 - math.exp(-2.0))
        kappa = (c0 ** n) * (1.0 / math.tanh(1.0)) ** 2 * (2.0 ** m) * np.pi
        target = self.quad.tail_rel * (0.85 ** n) * t ** (-(n + m))
        R = 2.0 / t
        for _ in range(600):
            nt = n * t
            bound = kappa * _upper_gamma_int(n + m + 3, nt * R) / nt ** (n + m + 3)
            if bound <= target:
                return R
            R *= 1.2
        raise QuadratureNotConverged(f"tensor tail bound not reachable (t={t})")

    def _axis(self, t, zmax, r2max, panels):
        R = self._tail_radius(t)
        return _gl_panels(-R, R, panels, self.quad.tensor_nodes_per_panel), R

    def _check_budget(self, panels):
        """Fail fast before building an oversized tensor grid (m=3 mostly)."""
        axis = panels * self.quad.tensor_nodes_per_panel
        if axis > self.quad.max_tensor_axis_nodes or \
                axis ** self.m > self.quad.max_tensor_grid_points:
            raise QuadratureNotConverged(
                f"tensor grid budget exceeded ({axis} axis nodes, m={self.m}); "
                "tighten the point range or relax the tolerance")

    def _grid(self, t, zmax, r2max):
        key = (float(t), _bucket(zmax, 0.5), _bucket(r2max, 16.0))
        if key in self._cache:
            return self._cache[key]
        R = self._tail_radius(t)
        h0 = min(np.pi / (zmax + 1.0), 3.0 / (1.0 + self.n * t + r2max / 4.0))
        panels = max(4, int(math.ceil(2.0 * R / h0)))
        self._check_budget(panels)
        grid = self._make_grid(t, R, panels)
        probe_pts = np.array([[0.0, 0.0], [r2max, 0.0], [r2max, zmax],
                              [0.0, zmax]])
        vals, _ = self._grid_I0(grid, probe_pts[:, 0],
                                np.tile(probe_pts[:, 1:2], (1, self.m)) / np.sqrt(self.m))
        for _ in range(self.quad.max_doublings):
            panels *= 2
            self._check_budget(panels)
            grid2 = self._make_grid(t, R, panels)
            vals2, env2 = self._grid_I0(grid2, probe_pts[:, 0],
                                        np.tile(probe_pts[:, 1:2], (1, self.m)) / np.sqrt(self.m))
            scale = np.maximum(env2, UNDERFLOW_FLOOR / self.pref)
            if np.all(np.abs(vals2 - vals) <= 100.0 * self.quad.rel_tol * scale):
                self._cache[key] = grid2
                return grid2
            grid, vals = grid2, vals2
        raise QuadratureNotConverged("tensor panel doubling did not converge")

    def _make_grid(self, t, R, panels):
        nodes, weights = _gl_panels(-R, R, panels, self.quad.tensor_nodes_per_panel)
        axes = [nodes] * self.m
        mesh = np.meshgrid(*axes, indexing="ij")
        LAM = np.stack([mm.ravel() for mm in mesh], axis=1)
        wmesh = np.meshgrid(*([weights] * self.m), indexing="ij")
        W = np.ones(LAM.shape[0])
        for wm in wmesh:
            W = W * wm.ravel()
        rho = np.linalg.norm(LAM, axis=1)
        gfac = _coth_factor(rho, t)
        sfac = _sinh_factor(rho, t) ** self.n
        return {"LAM": LAM, "W": W, "rho": rho, "gfac": gfac, "sfac": sfac}

    def _grid_I0(self, grid, r2, zvecs):
        out = np.empty((r2.shape[0], 2))
        env = np.empty((r2.shape[0], 2))
        g2 = grid["gfac"] * grid["gfac"]
        for j in range(r2.shape[0]):
            with np.errstate(under="ignore"):
                E = np.exp(-0.25 * r2[j] * grid["gfac"]) * grid["sfac"]
                C = np.cos(grid["LAM"] @ zvecs[j]) * E
            out[j, 0] = C @ grid["W"]
            out[j, 1] = C @ (grid["W"] * g2)
            env[j, 0] = E.max()
            env[j, 1] = (E * g2).max()
        return out, env

    def _split(self, pts):
        pts = np.asarray(pts, dtype=float)
        if pts.shape[1] != self.spec.dim:
            raise DimensionMismatch("point dimension mismatch")
        x = pts[:, :2 * self.n]
        zv = pts[:, 2 * self.n:]
        return x, np.sum(x * x, axis=1), zv

    def _prescreen(self, t, r2, zv):
        zn = np.linalg.norm(zv, axis=1)
        return (r2 / (4.0 * t) < 650.0) & (zn / (t * t) < 256.0)

    def _integrals(self, t, pts, want_second=False):
        x, r2, zv = self._split(pts)
        live = self._prescreen(t, r2, zv)
        N = r2.shape[0]
        res = {"I0": np.zeros(N), "I1": np.zeros(N),
               "IZ": np.zeros((N, self.m)), "I11": np.zeros(N),
               "Izz": np.zeros(N), "zdot": np.zeros(N)}
        idx = np.nonzero(live)[0]
        if idx.size == 0:
            return res, live, x, r2, zv
        zmax = float(np.max(np.abs(zv[idx]))) if idx.size else 0.0
        grid = self._grid(t, zmax, float(np.max(r2[idx])))
        LAM, W = grid["LAM"], grid["W"]
        g, s = grid["gfac"], grid["sfac"]
        for j in idx:
            with np.errstate(under="ignore"):
                E = np.exp(-0.25 * r2[j] * g) * s
                phase = LAM @ zv[j]
                C = np.cos(phase) * E
                S = np.sin(phase) * E
            res["I0"][j] = C @ W
            res["I1"][j] = C @ (W * g)
            res["IZ"][j] = (S * W) @ LAM
            if want_second:
                res["I11"][j] = C @ (W * g * g)
                res["Izz"][j] = C @ (W * grid["rho"] ** 2)
        return res, live, x, r2, zv

    def kernel_batch(self, t, pts):
        res, live, _, _, _ = self._integrals(t, pts)
        p = self.pref * res["I0"]
        ok = live & (p >= UNDERFLOW_FLOOR)
        return p, ok

    def log_gradient_batch(self, t, pts, hat=True):
        _, grads, ok = self.kernel_and_log_gradient_batch(t, pts, hat=hat)
        return grads, ok

    def kernel_and_log_gradient_batch(self, t, pts, hat=True):
        res, live, x, r2, zv = self._integrals(t, pts)
        I0, I1, IZ = res["I0"], res["I1"], res["IZ"]
        p = self.pref * I0
        ok = live & (p >= UNDERFLOW_FLOOR)
        safe = np.where(ok, I0, 1.0)
        sign = 1.0 if hat else -1.0
        grads = -0.5 * x * I1[:, None]
        for l in range(self.m):
            Jx = x @ self.J[l].T
            grads = grads + sign * 0.5 * Jx * IZ[:, l][:, None]
        return p, grads / safe[:, None], ok

    def pde_residual_batch(self, t, pts):
        res, live, x, r2, zv = self._integrals(t, pts, want_second=True)
        I0, I1, IZ = res["I0"], res["I1"], res["IZ"]
        I11, Izz = res["I11"], res["Izz"]
        ok = live & (self.pref * I0 >= UNDERFLOW_FLOOR)
        n = self.n
        Q = float(self.spec.Q)
        lap = -n * I1 + 0.25 * r2 * I11 - 0.25 * r2 * Izz
        dil = -0.5 * r2 * I1 - 2.0 * np.sum(zv * IZ, axis=1)
        safe = np.where(ok, I0, 1.0)
        out = (t * lap + 0.5 * dil + 0.5 * Q * I0) / (safe * (Q / t))
        return out, ok

    def kernel_at_origin(self, t):
        grid = self._grid(t, 0.0, 0.0)
        return self.pref * float(grid["sfac"] @ grid["W"])


class KernelEvaluator:
    """Facade dispatching to the closed-form or quadrature implementation."""

    def __init__(self, spec, quad=None):
        self.spec = spec
        self.quad = quad or QuadratureConfig()
        if spec.step == 1:
            self._impl = _AbelianKernel(spec, self.quad)
        elif spec.htype is not None and spec.htype.m == 1:
            self._impl = _HTypeM1Kernel(spec, self.quad)
        elif spec.htype is not None and spec.htype.m in (2, 3):
            self._impl = _HTypeTensorKernel(spec, self.quad)
        else:
            raise UnsupportedGroup(
                f"no explicit heat-kernel formula for {spec.name} "
                f"(step {spec.step}); kernel-dependent operations are unsupported")

    @staticmethod
    def supports(spec):
        return spec.step == 1 or (spec.htype is not None and spec.htype.m <= 3)

    def _check_t(self, t):
        if not (t > 0.0 and np.isfinite(t)):
            raise ValueError(f"t must be positive and finite, got {t}")

    def kernel(self, t, g):
        self._check_t(t)
        p, ok = self._impl.kernel_batch(t, np.atleast_2d(np.asarray(g, dtype=float)))
        if not ok[0]:
            raise NumericalUnderflow(
                f"p_{t}({np.asarray(g).tolist()}) below floor {UNDERFLOW_FLOOR}")
        if p[0] <= 0.0:
            raise QuadratureNotConverged("kernel positivity lost (cancellation)")
        return float(p[0])

    def kernel_batch(self, t, pts):
        self._check_t(t)
        return self._impl.kernel_batch(t, pts)

    def log_gradient_right(self, t, g):
        self._check_t(t)
        grads, ok = self._impl.log_gradient_batch(
            t, np.atleast_2d(np.asarray(g, dtype=float)), hat=True)
        if not ok[0]:
            raise NumericalUnderflow("kernel underflow at requested point")
        return grads[0]

    def log_gradient_right_batch(self, t, pts):
        self._check_t(t)
        return self._impl.log_gradient_batch(t, pts, hat=True)

    def log_gradient_left_batch(self, t, pts):
        self._check_t(t)
        return self._impl.log_gradient_batch(t, pts, hat=False)

    def kernel_and_log_gradient_batch(self, t, pts, hat=True):
        """One-pass (p_t, grad ln p_t, ok); the integrals are shared."""
        self._check_t(t)
        return self._impl.kernel_and_log_gradient_batch(t, pts, hat=hat)

    def kernel_pde_residual(self, t, g):
        self._check_t(t)
        res, ok = self._impl.pde_residual_batch(
            t, np.atleast_2d(np.asarray(g, dtype=float)))
        if not ok[0]:
            raise NumericalUnderflow("kernel underflow at requested point")
        return float(res[0])

    def kernel_pde_residual_batch(self, t, pts):
        self._check_t(t)
        return self._impl.pde_residual_batch(t, pts)

    def kernel_at_origin(self, t):
        self._check_t(t)
        p = self._impl.kernel_at_origin(t)
        # internal consistency: p_t(0) = t^{-Q/2} p_1(0)
        p1 = self._impl.kernel_at_origin(1.0)
        pred = t ** (-0.5 * self.spec.Q) * p1
        if abs(p - pred) > 1e-8 * abs(p):
            raise QuadratureNotConverged(
                f"origin scaling self-check failed: p={p!r} vs {pred!r}")
        return p
