"""Monte Carlo estimators for centroid-body supports, moments, widths and ψ_α norms."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .errors import (
    AllZeroInnerProducts,
    NoRoot,
    OracleUnavailable,
    QOutOfRange,
)
from .geometry import ConvexBody, Subspace
from .measures import LogConcaveMeasure, UniformOnBody, gaussian_abs_moment_constant
from .rng import RngStream, as_generator

PSI_BOOTSTRAPS = 20
PSI_RTOL = 1e-6
# Tail-coefficient threshold (fraction of alpha) below which the ψ_α root is
# treated as sample-limited rather than a finite norm.
PSI_TAIL_FRACTION = 0.675


@dataclass
class Estimate:
    value: float
    stderr: float
    n_samples: int
    seed: int | None
    method: str
    flags: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "value": self.value,
            "stderr": self.stderr,
            "n_samples": self.n_samples,
            "seed": self.seed,
            "method": self.method,
            "flags": self.flags,
        }


def seed_of(rng):
    return rng.root_seed if isinstance(rng, RngStream) else None


# --------------------------------------------------------------------------
# Power means in the log domain


def power_mean_estimate(abs_vals: np.ndarray, q: float):
    """(value, stderr, n_zero) for ``(mean |a|^q)^{1/q}`` with a delta-method error."""
    a = np.asarray(abs_vals, dtype=float)
    N = a.shape[0]
    nz = a > 0
    n_zero = int(N - np.count_nonzero(nz))
    if n_zero == N:
        raise AllZeroInnerProducts("every inner product vanished")
    with np.errstate(divide="ignore"):
        la = np.log(a)
    z = q * la
    zmax = float(np.max(z))
    w = np.exp(z - zmax)
    mw = float(np.mean(w))
    log_mean = zmax + math.log(mw)
    value = math.exp(log_mean / q)
    rel = float(np.std(w, ddof=1)) / (math.sqrt(N) * mw) if N > 1 else math.inf
    return value, abs(value * rel / q), n_zero


def centroid_support(mu: LogConcaveMeasure, q: float, y, N: int = 100_000, rng=None, method: str = "mc",
                     sample: np.ndarray | None = None) -> Estimate:
    """``h_{Z_q(mu)}(y) = (E|<X, y>|^q)^{1/q}``.

    ``method`` is ``"mc"`` (sample average), ``"exact"`` (closed-form moment
    oracle) or ``"auto"`` (exact when available).  A precomputed ``sample``
    may be passed to share random numbers across calls.
    """
    if q < 1:
        raise QOutOfRange("centroid bodies need q >= 1")
    y = np.asarray(y, dtype=float)
    if method not in ("mc", "exact", "auto"):
        raise ValueError(f"unknown method {method!r}")
    if method in ("exact", "auto"):
        try:
            m = float(mu.abs_moment(y, q))
            if m <= 0:
                raise AllZeroInnerProducts("y is orthogonal to the support of the measure")
            return Estimate(m ** (1.0 / q), 0.0, 0, seed_of(rng), "exact")
        except OracleUnavailable:
            if method == "exact":
                raise
    if sample is None:
        if N < 1000:
            raise ValueError("centroid_support needs N >= 1000")
        sample = mu.sample(int(N), as_generator(rng))
    value, se, n_zero = power_mean_estimate(np.abs(sample @ y), q)
    flags = {"zero_terms": n_zero} if n_zero else {}
    return Estimate(value, se, len(sample), seed_of(rng), "mc", flags)


def _sample_for(mu_or_body, N, gen):
    if isinstance(mu_or_body, ConvexBody):
        return UniformOnBody(mu_or_body).sample(int(N), gen)
    return mu_or_body.sample(int(N), gen)


def moment_radius(mu_or_body, q: float, N: int = 100_000, rng=None) -> Estimate:
    """``I_q = (E ||X||^q)^{1/q}`` (uniform measure for a body); q in (-n, inf) minus 0."""
    n = mu_or_body.dim
    if q == 0 or q <= -n:
        raise QOutOfRange(f"q must lie in (-{n}, inf) and be nonzero")
    gen = as_generator(rng)
    X = _sample_for(mu_or_body, N, gen)
    value, se, n_zero = power_mean_estimate(np.linalg.norm(X, axis=1), q)
    return Estimate(value, se, len(X), seed_of(rng), "mc")


def mean_width(body: ConvexBody, N_dirs: int = 10_000, rng=None) -> Estimate:
    """Average of the support function over uniform directions."""
    if not body.has_support():
        raise OracleUnavailable(f"{body.type_name} has no support route")
    gen = as_generator(rng)
    theta = gen.standard_normal((int(N_dirs), body.dim))
    theta /= np.linalg.norm(theta, axis=1, keepdims=True)
    h = body.support(theta)
    se = float(np.std(h, ddof=1) / math.sqrt(len(h))) if len(h) > 1 else 0.0
    if se < 1e-14 * abs(float(np.mean(h))):
        se = 0.0
    return Estimate(float(np.mean(h)), se, int(N_dirs), seed_of(rng), "mc")


def centroid_mean_width(mu: LogConcaveMeasure, q: float, N_dirs: int = 64, N_samples: int = 20_000, rng=None,
                        method: str = "mc") -> Estimate:
    """Two-level estimate of ``w(Z_q(mu))``: fresh inner samples per direction."""
    stream = rng if isinstance(rng, RngStream) else None
    gen = None if stream is not None else as_generator(rng)
    vals, ses = [], []
    for i in range(int(N_dirs)):
        g = stream.derive(i).generator() if stream is not None else gen
        theta = g.standard_normal(mu.dim)
        theta /= np.linalg.norm(theta)
        est = centroid_support(mu, q, theta, N_samples, g, method=method)
        vals.append(est.value)
        ses.append(est.stderr)
    vals = np.asarray(vals)
    outer = float(np.std(vals, ddof=1)) ** 2 / len(vals) if len(vals) > 1 else 0.0
    inner = float(np.sum(np.square(ses))) / len(vals) ** 2
    used = "exact" if all(s == 0 for s in ses) and method != "mc" else "mc"
    return Estimate(float(vals.mean()), math.sqrt(outer + inner), int(N_dirs) * int(N_samples), seed_of(rng), used)


def vrad_section(body: ConvexBody, F: Subspace, N_dirs: int = 20_000, rng=None) -> Estimate:
    """``(mean_{θ in S_F} ||θ||_K^{-m})^{1/m}`` with a heavy-tail flag."""
    if not body.has_gauge():
        raise OracleUnavailable(f"{body.type_name} has no gauge route")
    gen = as_generator(rng)
    m = F.dim
    u = gen.standard_normal((int(N_dirs), m))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    g = body.gauge(F.embed(u))
    with np.errstate(divide="ignore"):
        rho = 1.0 / g
    value, se, _ = power_mean_estimate(rho, m)
    terms = np.sort(rho**m)
    top = max(1, int(math.ceil(0.01 * len(terms))))
    share = float(terms[-top:].sum() / terms.sum())
    flags = {"heavy_tail": True} if share > 0.5 else {}
    if m == 1:
        se = se if len(rho) > 1 else 0.0
    return Estimate(value, se, int(N_dirs), seed_of(rng), "mc", flags)


# --------------------------------------------------------------------------
# ψ_α norms


def _psi_root(a: np.ndarray, alpha: float, rtol: float = PSI_RTOL) -> float:
    """Root of ``mean exp((a/t)^alpha) = 2`` for a fixed sample ``a >= 0``."""
    N_total = a.size
    if not np.any(a > 0):
        raise NoRoot("all inner products are zero")

    def excess(t):
        # log G(t) - log 2, with G(t) = mean exp((a/t)^alpha); zeros contribute 1.
        z = (a / t) ** alpha
        return float(logsumexp(z) - math.log(N_total)) - math.log(2.0)

    top = float(np.max(a))
    lo = top / math.log(2.0 * N_total) ** (1.0 / alpha)  # G(lo) >= 2
    hi = max(top, lo) * 1.0
    while excess(hi) > 0:
        hi *= 2.0
    while excess(lo) < 0:
        lo *= 0.5
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if excess(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def psi_roots(A: np.ndarray, alpha: float, rtol: float = PSI_RTOL) -> np.ndarray:
    """Column-wise :func:`_psi_root` for an ``(N, B)`` array of ``|<X_i, θ_j>|``."""
    A = np.asarray(A, dtype=float)
    N = A.shape[0]
    if not np.all(np.any(A > 0, axis=0)):
        raise NoRoot("all inner products are zero in some direction")

    # In s = t^{-alpha}, log mean exp(P s) is convex and increasing, and at
    # s0 = log(2N)/max P it is already >= log 2; Newton from s0 therefore
    # decreases monotonically onto the root.
    P = A**alpha
    ptop = P.max(axis=0)
    s = math.log(2.0 * N) / ptop
    for _ in range(200):
        m = ptop * s
        w = np.exp(P * s - m)
        sw = w.sum(axis=0)
        f = np.log(sw) + m - math.log(2.0 * N)
        df = (P * w).sum(axis=0) / sw
        s_new = np.maximum(s - f / df, 0.5 * s)
        done = np.abs(s_new - s) <= 0.5 * rtol * s
        s = s_new
        if np.all(done):
            break
    return s ** (-1.0 / alpha)


def weibull_tail_coefficient(a: np.ndarray, k: int | None = None) -> float:
    """Tail coefficient β with ``P(|a| > s) ≈ exp(-c s^β)`` from the top ``k`` order statistics."""
    s = np.sort(np.asarray(a, dtype=float))[::-1]
    N = len(s)
    k = int(math.sqrt(N)) if k is None else int(k)
    k = max(2, min(k, N - 1))
    top = s[:k]
    if top[-1] <= 0:
        return math.inf
    i = np.arange(1, k + 1)
    num = np.sum(np.log(np.log(N / i)) - math.log(math.log(N / k)))
    den = np.sum(np.log(top) - math.log(top[-1]))
    return math.inf if den <= 0 else float(num / den)


def psi_alpha_norm(mu: LogConcaveMeasure, theta, alpha: float = 2.0, N: int = 100_000, rng=None,
                   sample: np.ndarray | None = None, bootstraps: int = PSI_BOOTSTRAPS) -> Estimate:
    """Smallest ``t`` with ``E exp((|<X,θ>|/t)^α) <= 2`` on a fixed sample."""
    if not 1.0 <= alpha <= 2.0:
        raise ValueError("alpha must lie in [1, 2]")
    # A generator is only needed to draw the sample or the bootstrap indices.
    gen = as_generator(rng) if (sample is None or bootstraps > 0) else None
    theta = np.asarray(theta, dtype=float)
    if sample is None:
        if N < 10_000:
            raise ValueError("psi_alpha_norm needs N >= 10^4")
        sample = mu.sample(int(N), gen)
    a = np.abs(sample @ theta)
    root = _psi_root(a, alpha)
    boots = []
    for _ in range(bootstraps):
        idx = gen.integers(0, len(a), size=len(a))
        boots.append(_psi_root(a[idx], alpha))
    se = float(np.std(boots, ddof=1)) if bootstraps > 1 else 0.0
    l2 = math.sqrt(float(np.mean(a**2)))
    beta = weibull_tail_coefficient(a)
    diverging = root > 10.0 * l2 * math.sqrt(math.log(len(a))) or beta < PSI_TAIL_FRACTION * alpha
    flags = {"tail_coefficient": beta}
    if diverging:
        flags["diverging"] = True
    return Estimate(root, se, len(a), seed_of(rng), "mc", flags)


def psi2_support(mu: LogConcaveMeasure, y, N: int = 100_000, rng=None, method: str = "mc",
                 sample: np.ndarray | None = None) -> Estimate:
    """Dyadic ``max_q h_{Z_q}(y)/sqrt(q)`` over ``q = 2, 4, ..., 2^ceil(log2 n)``."""
    n = mu.dim
    top = max(1, int(math.ceil(math.log2(max(n, 2)))))
    gen = None
    if sample is None and method == "mc":
        gen = as_generator(rng)
        sample = mu.sample(int(N), gen)
    best = None
    for j in range(1, top + 1):
        q = 2.0**j
        est = centroid_support(mu, q, y, N, gen, method=method, sample=sample)
        ratio = est.value / math.sqrt(q)
        if best is None or ratio > best[0]:
            best = (ratio, est.stderr / math.sqrt(q), q)
    flags = {"argmax_q": best[2]}
    n_used = 0 if sample is None else len(sample)
    return Estimate(best[0], best[1], n_used, seed_of(rng), method if sample is None else "mc", flags)


def gaussian_centroid_constant(q: float) -> float:
    return gaussian_abs_moment_constant(q)
