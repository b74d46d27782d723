"""The matrix M, the sharp constant Lambda, and its identities.

M_ij = int (hatV_i ln p_1)(hatV_j ln p_1) p_1 dmu over the group, a d x d
symmetric positive semidefinite matrix.  Lambda is its largest eigenvalue
and satisfies Q/(2d) <= Lambda <= Q/2, with trace M = Q/2 at t = 1.
"""

import numpy as np

from .errors import CarnotLabError, DimensionTooLarge, ExcessiveRejection
from .groups import product
from .heat import KernelEvaluator
from .mc import sample_endpoint

MAX_REJECTION_FRACTION = 1e-4
EIGEN_TIE_TOL = 1e-10


class GridConfig:
    """Tensor-product Gauss-Legendre box for the deterministic M path.

    Half-widths are per coordinate weight at t = 1: x_half for the
    horizontal layer, z_half for every higher layer; at other times the
    box scales by t^(w/2) per the dilation.
    """

    def __init__(self, x_half=10.0, z_half=8.0, nodes_coarse=48,
                 nodes_fine=64):
        if x_half <= 0 or z_half <= 0:
            raise ValueError("half-widths must be positive")
        if not (2 <= nodes_coarse < nodes_fine):
            raise ValueError("need 2 <= nodes_coarse < nodes_fine")
        self.x_half = float(x_half)
        self.z_half = float(z_half)
        self.nodes_coarse = int(nodes_coarse)
        self.nodes_fine = int(nodes_fine)


class SpectralReport:
    """Computed M with its eigendata and error information."""

    def __init__(self, spec, M, lam, top_vector, trace, method,
                 lambda_tol, standard_errors=None, errors=None):
        self.spec = spec
        self.M = M
        self.lam = lam
        self.top_vector = top_vector
        self.trace = trace
        self.method = method
        self.lambda_tol = lambda_tol
        self.standard_errors = standard_errors
        self.errors = dict(errors or {})
        self.Q = int(spec.Q)
        self.d = int(spec.d)

    def bounds_dict(self):
        b = bound_check(self)
        return {"lower": 0.5 * self.Q / self.d, "upper": 0.5 * self.Q,
                "pass": bool(b["pass"])}

    def to_dict(self):
        return {
            "group": self.spec.name,
            "Q": self.Q,
            "d": self.d,
            "M": self.M.tolist(),
            "lambda": float(self.lam),
            "top_vector": self.top_vector.tolist(),
            "trace": float(self.trace),
            "trace_target": 0.5 * self.Q,
            "bounds": self.bounds_dict(),
            "errors": self.errors,
        }


def _jacobi_sweeps(M, max_sweeps=60, off_tol=1e-14):
    A = np.array(M, dtype=float)
    d = A.shape[0]
    V = np.eye(d)
    norm = float(np.linalg.norm(A))
    if norm == 0.0 or d == 1:
        return np.diag(A).copy(), V
    offdiag = ~np.eye(d, dtype=bool)
    for _ in range(max_sweeps):
        # measured on the entries themselves: the sum-of-squares shortcut
        # sum(A^2) - sum(diag^2) cancels to 0 long before convergence
        off = float(np.abs(A[offdiag]).max())
        if off <= off_tol * norm:
            break
        for p in range(d - 1):
            for q in range(p + 1, d):
                apq = A[p, q]
                if abs(apq) <= 1e-3 * off_tol * norm:
                    continue
                theta = 0.5 * (A[q, q] - A[p, p]) / apq
                tpar = np.sign(theta) / (abs(theta) + np.hypot(theta, 1.0)) \
                    if theta != 0.0 else 1.0
                c = 1.0 / np.hypot(tpar, 1.0)
                s = tpar * c
                rows_p, rows_q = A[p].copy(), A[q].copy()
                A[p] = c * rows_p - s * rows_q
                A[q] = s * rows_p + c * rows_q
                cols_p, cols_q = A[:, p].copy(), A[:, q].copy()
                A[:, p] = c * cols_p - s * cols_q
                A[:, q] = s * cols_p + c * cols_q
                vp, vq = V[:, p].copy(), V[:, q].copy()
                V[:, p] = c * vp - s * vq
                V[:, q] = s * vp + c * vq
    return np.diag(A).copy(), V


def lambda_of(M):
    """Largest eigenvalue and unit eigenvector via cyclic Jacobi rotations.

    Eigenvalue ties within 1e-10 are broken deterministically by the lowest
    Jacobi column index, and the vector's first sizable component is made
    positive, so reports on isotropic M are reproducible.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("M must be a square matrix")
    if not np.allclose(M, M.T, atol=1e-12 * max(1.0, np.abs(M).max())):
        raise ValueError("M must be symmetric")
    evals, V = _jacobi_sweeps(M)
    top = evals.max()
    candidates = np.nonzero(evals >= top - EIGEN_TIE_TOL)[0]
    k = int(candidates[0])
    lam = float(evals[k])
    vec = V[:, k].copy()
    nz = np.nonzero(np.abs(vec) > 1e-8)[0]
    if nz.size and vec[nz[0]] < 0:
        vec = -vec
    norm = float(np.linalg.norm(M))
    resid = float(np.linalg.norm(M @ vec - lam * vec))
    if norm > 0 and resid > 1e-12 * norm:
        raise CarnotLabError(
            f"jacobi eigensolver residual {resid:.3e} exceeds 1e-12 * ||M||")
    return lam, vec


def _lambda_tol_mc(grads, vec, n):
    proj = (grads @ vec) ** 2
    return 3.0 * float(proj.std(ddof=1) / np.sqrt(n))


def compute_M_mc(spec, config, batch=None):
    """Monte Carlo estimate of M at t = 1 with per-entry jackknife errors."""
    ev = KernelEvaluator(spec)
    if batch is None:
        batch = sample_endpoint(spec, 1.0, config)
    grads, ok = ev.log_gradient_right_batch(1.0, batch.points)
    N = grads.shape[0]
    n_rej = int(N - ok.sum())
    frac = n_rej / N
    if frac >= MAX_REJECTION_FRACTION:
        raise ExcessiveRejection(
            f"{n_rej}/{N} samples rejected (kernel underflow); "
            f"fraction {frac:.2e} >= {MAX_REJECTION_FRACTION}")
    G = grads[ok]
    n = G.shape[0]
    prods = G[:, :, None] * G[:, None, :]
    M = prods.mean(axis=0)
    M = 0.5 * (M + M.T)
    se = prods.std(axis=0, ddof=1) / np.sqrt(n)
    lam, vec = lambda_of(M)
    report = SpectralReport(
        spec, M, lam, vec, float(np.trace(M)), "monte-carlo",
        lambda_tol=_lambda_tol_mc(G, vec, n),
        standard_errors=se,
        errors={"rejected": n_rej, "rejection_fraction": frac,
                "n_samples": N, "max_entry_se": float(se.max())})
    return report


def _grid_axes(spec, t, half_x, half_z, nodes):
    base_x, base_w = np.polynomial.legendre.leggauss(nodes)
    axes, weights = [], []
    for a in range(spec.dim):
        h = (half_x if spec.weights[a] == 1 else half_z) * t ** (
            0.5 * spec.weights[a])
        axes.append(h * base_x)
        weights.append(h * base_w)
    return axes, weights


def _grid_M(spec, ev, t, axes, weights, hat=True):
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([mm.ravel() for mm in mesh], axis=1)
    wmesh = np.meshgrid(*weights, indexing="ij")
    W = np.ones(pts.shape[0])
    for wm in wmesh:
        W = W * wm.ravel()
    d = spec.d
    M = np.zeros((d, d))
    mass = 0.0
    chunk = 1 << 16
    for lo in range(0, pts.shape[0], chunk):
        P, G, ok = ev.kernel_and_log_gradient_batch(
            t, pts[lo:lo + chunk], hat=hat)
        wp = np.where(ok, W[lo:lo + chunk] * P, 0.0)
        mass += float(wp.sum())
        M += np.einsum("s,si,sj->ij", wp, G, G)
    return 0.5 * (M + M.T), mass


def compute_M_quadrature(spec, grid=None):
    """Deterministic M at t = 1 on a tensor grid; groups of dimension <= 4."""
    if spec.dim > 4:
        raise DimensionTooLarge(
            f"tensor-grid quadrature supports dimension <= 4; "
            f"{spec.name} has dimension {spec.dim}")
    grid = grid or GridConfig()
    ev = KernelEvaluator(spec)
    ax_c, w_c = _grid_axes(spec, 1.0, grid.x_half, grid.z_half,
                           grid.nodes_coarse)
    ax_f, w_f = _grid_axes(spec, 1.0, grid.x_half, grid.z_half,
                           grid.nodes_fine)
    Mc, _ = _grid_M(spec, ev, 1.0, ax_c, w_c)
    Mf, mass = _grid_M(spec, ev, 1.0, ax_f, w_f)
    delta = float(np.abs(Mf - Mc).max())
    mass_dev = abs(mass - 1.0)
    lam, vec = lambda_of(Mf)
    report = SpectralReport(
        spec, Mf, lam, vec, float(np.trace(Mf)), "quadrature",
        lambda_tol=10.0 * delta + 3.0 * mass_dev + 1e-9,
        standard_errors=None,
        errors={"mass_deviation": mass_dev, "grid_delta": delta,
                "nodes_coarse": grid.nodes_coarse,
                "nodes_fine": grid.nodes_fine})
    return report


def bound_check(report):
    """Q/(2d) <= Lambda <= Q/2 and trace/d <= Lambda <= trace, with tolerance."""
    Q, d = report.Q, report.d
    lam, tr, tol = report.lam, report.trace, report.lambda_tol
    checks = {
        "lower": lam >= 0.5 * Q / d - tol,
        "upper": lam <= 0.5 * Q + tol,
        "trace_lower": lam >= tr / d - tol,
        "trace_upper": lam <= tr + tol,
    }
    checks["pass"] = all(checks.values())
    return checks


def trace_identity_check(spec, t, config, method="mc", detail=False,
                         grid=None):
    """Check int Gamma(ln p_t) p_t dmu = Q/(2t).

    Returns (lhs, rhs, passed); detail=True returns a dict with the error
    estimate as well.  Gamma uses the left-invariant frame; the hat frame
    integral is equal (both equal trace M at the rescaled time).
    """
    rhs = 0.5 * spec.Q / t
    ev = KernelEvaluator(spec)
    if method == "mc":
        batch = sample_endpoint(spec, t, config)
        grads, ok = ev.log_gradient_left_batch(t, batch.points)
        N = grads.shape[0]
        n_rej = int(N - ok.sum())
        if n_rej / N >= MAX_REJECTION_FRACTION:
            raise ExcessiveRejection(
                f"{n_rej}/{N} samples rejected in trace identity check")
        gam = np.sum(grads[ok] ** 2, axis=1)
        lhs = float(gam.mean())
        err = float(gam.std(ddof=1) / np.sqrt(gam.shape[0]))
        tol = max(3.0 * err, 1e-3 * rhs)
    elif method == "quad":
        if spec.dim > 4:
            raise DimensionTooLarge(
                "quadrature trace check needs dimension <= 4")
        grid = grid or GridConfig()
        ax_c, w_c = _grid_axes(spec, t, grid.x_half, grid.z_half,
                               grid.nodes_coarse)
        ax_f, w_f = _grid_axes(spec, t, grid.x_half, grid.z_half,
                               grid.nodes_fine)
        Mc, _ = _grid_M(spec, ev, t, ax_c, w_c, hat=False)
        Mf, _ = _grid_M(spec, ev, t, ax_f, w_f, hat=False)
        lhs = float(np.trace(Mf))
        err = abs(lhs - float(np.trace(Mc)))
        tol = max(3.0 * err, 1e-3 * rhs)
    else:
        raise ValueError(f"unknown method {method!r}; use 'mc' or 'quad'")
    passed = bool(abs(lhs - rhs) <= tol)
    if detail:
        return {"lhs": lhs, "rhs": rhs, "pass": passed, "error": err,
                "tolerance": tol, "method": method, "t": float(t)}
    return lhs, rhs, passed


def sharpness_probe(spec, report, config, eps=1e-3):
    """Cauchy-Schwarz ratio for f* = sum_i a_i hatV_i ln p_1 at the origin.

    Estimates (sum_i a_i V_i P_1 f*(0))^2 / Var_{p_1}(f*), which the
    sharpness mechanism puts at Lambda.  The directional derivatives use
    central differences along coordinate flows with one common batch, so
    the difference quotients are common-random-number smooth.
    """
    ev = KernelEvaluator(spec)
    a = report.top_vector
    batch = sample_endpoint(spec, 1.0, config)

    def fstar(pts):
        grads, ok = ev.log_gradient_right_batch(1.0, pts)
        vals = np.where(ok, grads @ a, 0.0)
        return vals, ok

    vals0, ok0 = fstar(batch.points)
    kept = vals0[ok0]
    n = kept.shape[0]
    var = float(kept.var(ddof=1))
    var_se = float(np.sqrt(2.0 / max(1, n - 1)) * var)

    deriv = np.zeros(spec.d)
    deriv_se = np.zeros(spec.d)
    shape = batch.points.shape
    for i in range(spec.d):
        shift = np.zeros(spec.dim)
        shift[i] = eps
        plus, okp = fstar(product(spec, np.broadcast_to(shift, shape),
                                  batch.points))
        shift[i] = -eps
        minus, okm = fstar(product(spec, np.broadcast_to(shift, shape),
                                   batch.points))
        ok = ok0 & okp & okm
        quot = (plus[ok] - minus[ok]) / (2.0 * eps)
        deriv[i] = float(quot.mean())
        deriv_se[i] = float(quot.std(ddof=1) / np.sqrt(quot.shape[0]))

    num = float((a @ deriv) ** 2)
    ratio = num / var
    return {
        "group": spec.name,
        "lambda": float(report.lam),
        "ratio": ratio,
        "numerator": num,
        "variance": var,
        "variance_se": var_se,
        "derivative": deriv.tolist(),
        "derivative_se": deriv_se.tolist(),
        "threshold": 0.9 * float(report.lam),
        "pass": bool(ratio >= 0.9 * float(report.lam)),
        "n_samples": int(n),
    }
