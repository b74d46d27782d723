"""Monte Carlo simulation of the hypoelliptic diffusion with generator L.

Endpoints of the diffusion started at the identity are distributed as
p_t dmu (up to the scheme's O(delta) vertical bias).  Each substep
concatenates a horizontal increment exp(sum_i sqrt(2 delta) xi_i e_i)
via the group product, which is the Baker-Campbell-Hausdorff expansion
truncated at the group's own step.  For step <= 2 groups this
concatenation is exact in law except for the Levy-area discretization
("exact-step2"); for higher step the same concatenation is the
Stratonovich-Heun scheme.

Randomness is counter-based (Philox) and indexed by (sample, substep),
so runs are bit-reproducible regardless of chunking or thread count.
"""

import numpy as np

from .errors import CarnotLabError, SchemeUnsupported
from .groups import product
from .rng import step_normals
from .calculus import heat_apply
from .poly import Polynomial

_CHUNK = 1 << 16

SCHEMES = ("exact-step2", "stratonovich-heun")


def resolve_scheme(spec, scheme):
    """Map "auto" to the best scheme for the group; validate explicit picks."""
    if scheme == "auto":
        return "exact-step2" if spec.step <= 2 else "stratonovich-heun"
    if scheme not in SCHEMES:
        raise SchemeUnsupported(
            f"unknown scheme {scheme!r}; expected one of {SCHEMES} or 'auto'")
    if scheme == "exact-step2" and spec.step > 2:
        raise SchemeUnsupported(
            f"exact-step2 requires step <= 2, but {spec.name} has step {spec.step}")
    return scheme


class MCConfig:
    """Simulation parameters.

    substeps is per unit time: a run to time t uses
    n_steps = max(1, round(substeps * t)) so that delta stays O(1/substeps)
    uniformly in t.
    """

    def __init__(self, seed, n_samples, substeps=256, scheme="auto"):
        seed = int(seed)
        if not (0 <= seed < 2 ** 64):
            raise ValueError("seed must fit in 64 bits")
        if n_samples < 1:
            raise ValueError("n_samples must be positive")
        if substeps < 1:
            raise ValueError("substeps must be >= 1")
        if scheme not in SCHEMES and scheme != "auto":
            raise SchemeUnsupported(
                f"unknown scheme {scheme!r}; expected one of {SCHEMES} or 'auto'")
        self.seed = seed
        self.n_samples = int(n_samples)
        self.substeps = int(substeps)
        self.scheme = scheme

    def n_steps(self, t):
        return max(1, int(round(self.substeps * t)))

    def as_dict(self):
        return {"seed": self.seed, "n_samples": self.n_samples,
                "substeps": self.substeps, "scheme": self.scheme}

    def __repr__(self):
        return (f"MCConfig(seed={self.seed}, n_samples={self.n_samples}, "
                f"substeps={self.substeps}, scheme={self.scheme!r})")


class SampleBatch:
    """Diffusion endpoints at time t plus the resolved configuration."""

    def __init__(self, points, t, config, scheme_used, side):
        self.points = points
        self.t = float(t)
        self.config = config
        self.scheme_used = scheme_used
        self.side = side

    def __len__(self):
        return self.points.shape[0]


def _walk(spec, t, seed, lo, m, n_steps, side, tag):
    d = spec.d
    delta = t / n_steps
    amp = np.sqrt(2.0 * delta)
    G = np.zeros((m, spec.dim))
    H = np.zeros((m, spec.dim))
    for s in range(n_steps):
        H[:, :d] = amp * step_normals(seed, lo, m, s, d, tag=tag)
        G = product(spec, G, H) if side == "right" else product(spec, H, G)
    return G


def sample_endpoint(spec, t, config, side="right"):
    """Sample n_samples endpoints of the diffusion at time t.

    side="right" concatenates increments on the right (the semigroup P_t);
    side="left" uses left concatenation (the hat semigroup), drawn from an
    independent stream so the two estimates are statistically independent.
    """
    if not (t > 0.0 and np.isfinite(t)):
        raise ValueError(f"t must be positive and finite, got {t}")
    if side not in ("right", "left"):
        raise ValueError("side must be 'right' or 'left'")
    scheme = resolve_scheme(spec, config.scheme)
    n_steps = config.n_steps(t)
    tag = 0 if side == "right" else 1
    N = config.n_samples
    out = np.empty((N, spec.dim))
    for lo in range(0, N, _CHUNK):
        m = min(_CHUNK, N - lo)
        out[lo:lo + m] = _walk(spec, t, config.seed, lo, m, n_steps, side, tag)
    if not np.all(np.isfinite(out)):
        bad = int(np.nonzero(~np.all(np.isfinite(out), axis=1))[0][0])
        raise CarnotLabError(f"non-finite endpoint at sample {bad}")
    return SampleBatch(out, t, config, scheme, side)


def _f_values(spec, f, pts):
    if isinstance(f, Polynomial):
        return f.eval_batch(pts)
    vals = np.asarray([f(p) for p in pts], dtype=float)
    return vals


def estimate_Ptf(spec, t, f, g, config, batch=None):
    """Estimate P_t f(g) = E[f(g . xi_t)] with its standard error.

    Passing a precomputed batch reuses the same endpoints across many base
    points g (common random numbers), which makes differences between base
    points far less noisy than independent runs.
    """
    if batch is None:
        batch = sample_endpoint(spec, t, config)
    g = np.asarray(g, dtype=float).reshape(1, spec.dim)
    pts = product(spec, np.broadcast_to(g, batch.points.shape), batch.points)
    vals = _f_values(spec, f, pts)
    finite = np.isfinite(vals)
    if not np.all(finite):
        bad = int(np.nonzero(~finite)[0][0])
        raise CarnotLabError(
            f"f evaluation produced a non-finite value at sample {bad}")
    n = vals.shape[0]
    est = float(vals.mean())
    if n < 2:
        return est, float("inf")
    # delete-1 jackknife of the mean; algebraically equal to s/sqrt(n)
    se = float(vals.std(ddof=1) / np.sqrt(n))
    return est, se


def _vertical_square_targets(spec, t):
    """Exact E[coord^2] for every coordinate, from the polynomial semigroup."""
    targets = {}
    for a in range(spec.dim):
        sq = Polynomial.coordinate(spec.dim, a) ** 2
        targets[a] = heat_apply(spec, t, sq).eval(np.zeros(spec.dim))
    return targets


def bias_diagnostic(spec, t, config):
    """Richardson bias report for the vertical second moments.

    Runs the scheme at n and 2n substeps on the same Brownian paths (the
    coarse path sums adjacent fine increments), so the level difference is
    estimated with common random numbers.  For an O(delta) scheme the
    coarse bias is ~2x the fine bias and the extrapolated value
    2*fine - coarse removes the leading error term.
    """
    if not (t > 0.0 and np.isfinite(t)):
        raise ValueError(f"t must be positive and finite, got {t}")
    scheme = resolve_scheme(spec, config.scheme)
    n_c = config.n_steps(t)
    n_f = 2 * n_c
    delta_f = t / n_f
    amp = np.sqrt(2.0 * delta_f)
    d = spec.d
    N = config.n_samples

    vertical = [a for a in range(spec.dim) if spec.weights[a] >= 2]
    targets = _vertical_square_targets(spec, t)

    sums_c = np.zeros(spec.dim)
    sums_f = np.zeros(spec.dim)
    sums_c2 = np.zeros(spec.dim)
    sums_f2 = np.zeros(spec.dim)
    sums_dd = np.zeros(spec.dim)
    sums_dd2 = np.zeros(spec.dim)
    for lo in range(0, N, _CHUNK):
        m = min(_CHUNK, N - lo)
        Gf = np.zeros((m, spec.dim))
        Gc = np.zeros((m, spec.dim))
        Hf = np.zeros((m, spec.dim))
        Hc = np.zeros((m, spec.dim))
        for k in range(n_c):
            xi1 = step_normals(config.seed, lo, m, 2 * k, d, tag=0)
            xi2 = step_normals(config.seed, lo, m, 2 * k + 1, d, tag=0)
            Hf[:, :d] = amp * xi1
            Gf = product(spec, Gf, Hf)
            Hf[:, :d] = amp * xi2
            Gf = product(spec, Gf, Hf)
            Hc[:, :d] = amp * (xi1 + xi2)
            Gc = product(spec, Gc, Hc)
        qc, qf = Gc * Gc, Gf * Gf
        sums_c += qc.sum(axis=0)
        sums_f += qf.sum(axis=0)
        sums_c2 += (qc * qc).sum(axis=0)
        sums_f2 += (qf * qf).sum(axis=0)
        sums_dd += (qc - qf).sum(axis=0)
        sums_dd2 += ((qc - qf) ** 2).sum(axis=0)

    def mean_se(s1, s2):
        mean = s1 / N
        var = max(0.0, (s2 / N - mean * mean)) * N / max(1, N - 1)
        return mean, np.sqrt(var / N)

    moments = []
    for a in vertical:
        m_c, se_c = mean_se(sums_c[a], sums_c2[a])
        m_f, se_f = mean_se(sums_f[a], sums_f2[a])
        diff, se_diff = mean_se(sums_dd[a], sums_dd2[a])
        exact = targets[a]
        entry = {
            "coordinate": spec.names[a],
            "weight": int(spec.weights[a]),
            "coarse": float(m_c), "se_coarse": float(se_c),
            "fine": float(m_f), "se_fine": float(se_f),
            "diff_coarse_minus_fine": float(diff), "se_diff": float(se_diff),
            "extrapolated": float(2.0 * m_f - m_c),
            "bias_fine_richardson": float(diff),
            "exact": float(exact),
            "bias_coarse_exact": float(m_c - exact),
            "bias_fine_exact": float(m_f - exact),
        }
        bf = entry["bias_fine_exact"]
        entry["bias_ratio_exact"] = (
            float(entry["bias_coarse_exact"] / bf) if abs(bf) > 5 * se_f
            else None)
        moments.append(entry)

    return {
        "group": spec.name,
        "t": float(t),
        "scheme": scheme,
        "substeps": config.substeps,
        "n_steps_coarse": n_c,
        "n_steps_fine": n_f,
        "n_samples": N,
        "moments": moments,
    }
