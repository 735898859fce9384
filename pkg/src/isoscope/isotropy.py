"""Moments, isotropic position and isotropic constants."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionTooLarge, RankDeficientCovariance, VolumeUnavailable
from .geometry import Affine, Ball, ConvexBody, Subspace, log_ball_volume, section_body
from .measures import LogConcaveMeasure, UniformOnBody, hit_and_run
from .rng import as_generator

EIG_FLOOR = 1e-12
MAX_SECTION_DIM = 12
JACKKNIFE_BLOCKS = 20


@dataclass
class MomentReport:
    barycenter: np.ndarray
    covariance: np.ndarray
    n_samples: int
    stderr_scale: float
    covariance_stderr: np.ndarray = field(repr=False, default=None)


@dataclass
class IsotropicResult:
    transform: np.ndarray
    translation: np.ndarray
    L: float
    stderr: float
    descriptor: dict

    def to_dict(self):
        return {
            "L": self.L,
            "stderr": self.stderr,
            "transform": self.transform.tolist(),
            "translation": self.translation.tolist(),
            "normalized": self.descriptor,
        }


def moments_from_samples(X: np.ndarray, blocks: int = JACKKNIFE_BLOCKS) -> MomentReport:
    """Mean and covariance with delete-one-block jackknife errors."""
    X = np.asarray(X, dtype=float)
    N, n = X.shape
    mean = X.mean(axis=0)
    Xc = X - mean
    cov = Xc.T @ Xc / (N - 1)
    blocks = max(2, min(blocks, N // 2))
    edges = np.linspace(0, N, blocks + 1).astype(int)
    s1 = X.sum(axis=0)
    s2 = X.T @ X
    reps = np.empty((blocks, n, n))
    for b in range(blocks):
        Xb = X[edges[b] : edges[b + 1]]
        m = N - len(Xb)
        mu = (s1 - Xb.sum(axis=0)) / m
        reps[b] = ((s2 - Xb.T @ Xb) - m * np.outer(mu, mu)) / (m - 1)
    jack = np.sqrt((blocks - 1) / blocks * ((reps - reps.mean(axis=0)) ** 2).sum(axis=0))
    cov = 0.5 * (cov + cov.T)
    return MomentReport(mean, cov, N, float(np.max(jack)), jack)


def estimate_moments(mu: LogConcaveMeasure, N: int, rng) -> MomentReport:
    if N < 100:
        raise ValueError("estimate_moments needs N >= 100")
    return moments_from_samples(mu.sample(int(N), as_generator(rng)))


def inverse_sqrt(cov: np.ndarray) -> np.ndarray:
    """Symmetric ``cov^{-1/2}`` with a relative eigenvalue floor."""
    w, v = np.linalg.eigh(0.5 * (cov + cov.T))
    if w[-1] <= 0 or w[0] < EIG_FLOOR * w[-1]:
        raise RankDeficientCovariance("covariance is numerically rank deficient")
    return (v / np.sqrt(w)) @ v.T


def _l_from_cov(logdet, log_sup_density, n):
    # L = (sup f)^{1/n} det(Cov)^{1/2n}
    return math.exp(log_sup_density / n + logdet / (2 * n))


def _l_stderr(X, L, blocks=JACKKNIFE_BLOCKS):
    # Jackknife of log det over contiguous blocks; L scales as exp(logdet / 2n).
    N, n = X.shape
    edges = np.linspace(0, N, blocks + 1).astype(int)
    vals = []
    for b in range(blocks):
        keep = np.concatenate([X[: edges[b]], X[edges[b + 1] :]])
        vals.append(np.linalg.slogdet(np.cov(keep.T).reshape(n, n))[1])
    vals = np.asarray(vals)
    se_logdet = math.sqrt((blocks - 1) / blocks * np.sum((vals - vals.mean()) ** 2))
    return L * se_logdet / (2 * n)


def isotropic_transform(body: ConvexBody, N: int, rng) -> IsotropicResult:
    """Affine map putting ``body`` in isotropic position.

    ``T = s Cov^{-1/2}`` after recentring, with ``s`` fixed by the exact
    volume so that ``|T(K - b)| = 1``; then ``L = s``.
    """
    vol = body.volume()  # raises VolumeUnavailable
    n = body.dim
    X = UniformOnBody(body).sample(int(N), as_generator(rng))
    rep = moments_from_samples(X)
    W = inverse_sqrt(rep.covariance)
    # |W K| = vol * det(W); scale to volume one.
    logdet_w = float(np.linalg.slogdet(W)[1])
    s = math.exp(-(math.log(vol) + logdet_w) / n)
    T = s * W
    L = s
    se = _l_stderr(X, _l_from_cov(-2 * logdet_w, -math.log(vol), n))
    descriptor = {"type": "affine", "T": T.tolist(), "child": body.to_dict()}
    return IsotropicResult(T, -T @ rep.barycenter, L, se, descriptor)


def isotropic_constant(mu: LogConcaveMeasure, N: int, rng) -> float:
    """``(sup f)^{1/n} det(Cov_N)^{1/2n}`` from ``N`` draws."""
    return isotropic_constant_estimate(mu, N, rng)[0]


def isotropic_constant_estimate(mu: LogConcaveMeasure, N: int, rng):
    """Like :func:`isotropic_constant` but returns ``(L, stderr)``."""
    log_sup = mu.log_sup_density()  # raises DensityUnavailable
    X = mu.sample(int(N), as_generator(rng))
    n = mu.dim
    sign, logdet = np.linalg.slogdet(np.cov(X.T).reshape(n, n))
    if sign <= 0:
        raise RankDeficientCovariance("sample covariance is singular")
    L = _l_from_cov(logdet, log_sup, n)
    return L, _l_stderr(X, L)


def section_volume(section: ConvexBody, radius: float, N: int, rng) -> tuple[float, float]:
    """Volume of ``section`` by rejection from the ball of ``radius``."""
    gen = as_generator(rng)
    m = section.dim
    pts = Ball(m, radius).sample_uniform(int(N), gen)
    hit = section.gauge(pts) <= 1.0
    p = float(np.mean(hit))
    if p == 0.0:
        raise VolumeUnavailable("no rejection sample landed in the section")
    ball = math.exp(log_ball_volume(m) + m * math.log(radius))
    return p * ball, ball * math.sqrt(p * (1 - p) / N)


def section_isotropic_constant(body: ConvexBody, F: Subspace, N: int, rng, radius: float | None = None) -> float:
    """``L_{K∩F}`` from a rejection volume estimate and a hit-and-run covariance."""
    m = F.dim
    if m > MAX_SECTION_DIM:
        raise DimensionTooLarge(f"section dimension {m} exceeds {MAX_SECTION_DIM}")
    gen = as_generator(rng)
    sec = section_body(body, F)
    if radius is None:
        from .radii import section_radius

        radius = section_radius(body, F, rng=gen).value
    vol, _ = section_volume(sec, radius * (1 + 1e-3), N, gen)
    X = hit_and_run(sec, int(N), gen)
    sign, logdet = np.linalg.slogdet(np.cov(X.T).reshape(m, m))
    if sign <= 0:
        raise RankDeficientCovariance("section covariance is singular")
    return math.exp(-math.log(vol) / m + logdet / (2 * m))


def normalize_affine(body: ConvexBody, result: IsotropicResult) -> ConvexBody:
    """The isotropic image as a body (translation is zero for centred bodies)."""
    return Affine(result.transform, body)
