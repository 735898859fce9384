"""Centered log-concave probability measures.

Each measure draws batches ``(size, dim)`` from a generator and optionally
exposes closed-form pieces: the supremum of its density, its covariance and
the absolute moments ``E|<X, y>|^q``.
"""
from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from scipy.special import bernoulli, gammaln

from .errors import (
    ConfigError,
    DensityUnavailable,
    DimensionMismatch,
    NoInteriorPoint,
    OracleUnavailable,
    SingularTransform,
    UnboundedChord,
)
from .geometry import Affine, ConvexBody, Cube, Subspace, body_from_dict
from .rng import as_generator

CHORD_TOL = 1e-10
UNBOUNDED_FACTOR = 1e6
DEFAULT_CHAINS = 256


# --------------------------------------------------------------------------
# Hit-and-run


def chord_endpoints(body: ConvexBody, x, theta, r_hint: float | None = None, tol: float = CHORD_TOL):
    """Endpoints ``t_minus <= 0 <= t_plus`` of the chord through ``x``.

    Vectorised over leading axes of ``x`` and ``theta``.  Exponential
    bracketing is followed by bisection on ``gauge(x + t theta) = 1``.
    """
    x = np.asarray(x, dtype=float)
    theta = np.asarray(theta, dtype=float)
    scalar = x.ndim == 1
    x2 = np.atleast_2d(x)
    th2 = np.broadcast_to(np.atleast_2d(theta), x2.shape)
    # Stack the forward and backward searches into one batch.
    xs = np.concatenate([x2, x2])
    ds = np.concatenate([th2, -th2])
    t = _boundary_distance(body, xs, ds, r_hint, tol)
    c = x2.shape[0]
    t_minus, t_plus = -t[c:], t[:c]
    if scalar:
        return float(t_minus[0]), float(t_plus[0])
    return t_minus, t_plus


def _boundary_distance(body, x, d, r_hint, tol):
    if r_hint is None:
        r_hint = body.radius()
    g0 = body.gauge(d)
    with np.errstate(divide="ignore"):
        step = np.where(g0 > 0, 1.0 / g0, np.inf)
    if not np.all(np.isfinite(step)):
        raise UnboundedChord("gauge vanishes along a direction: body is not bounded")
    limit = UNBOUNDED_FACTOR * (r_hint if r_hint else float(np.max(step)))
    lo = np.zeros(len(x))
    hi = step.copy()
    while True:
        out = body.gauge(x + hi[:, None] * d) > 1.0
        if np.all(out):
            break
        if np.any(hi[~out] > limit):
            raise UnboundedChord("chord bracketing exceeded the size hint")
        lo = np.where(out, lo, hi)
        hi = np.where(out, hi, 2.0 * hi)
    width = float(np.max(hi - lo))
    iters = max(0, int(math.ceil(math.log2(max(width, tol) / tol))))
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        inside = body.gauge(x + mid[:, None] * d) <= 1.0
        lo = np.where(inside, mid, lo)
        hi = np.where(inside, hi, mid)
    return lo


def hit_and_run_step(body: ConvexBody, x, rng, r_hint=None):
    """One hit-and-run move for each row of ``x`` (or a single point)."""
    gen = as_generator(rng)
    x = np.asarray(x, dtype=float)
    x2 = np.atleast_2d(x)
    theta = gen.standard_normal(x2.shape)
    theta /= np.linalg.norm(theta, axis=1, keepdims=True)
    tm, tp = chord_endpoints(body, x2, theta, r_hint)
    t = tm + (tp - tm) * gen.uniform(size=len(x2))
    out = x2 + t[:, None] * theta
    return out[0] if x.ndim == 1 else out


def hit_and_run(body: ConvexBody, size: int, rng, burn_in=None, thinning=None, chains=DEFAULT_CHAINS):
    """``size`` approximately uniform points of ``body``.

    Independent chains start at the origin, run ``burn_in`` steps (default
    ``100 n``) and then keep one point every ``thinning`` steps (default
    ``n``).  Rows are ordered step-major across chains.
    """
    gen = as_generator(rng)
    n = body.dim
    burn_in = 100 * n if burn_in is None else int(burn_in)
    thinning = n if thinning is None else max(1, int(thinning))
    if float(body.gauge(np.zeros(n))) >= 1.0:
        raise NoInteriorPoint("the origin is not an interior point of the body")
    r_hint = body.radius()
    if r_hint is None:
        r_hint = float(np.max(body.radial(np.eye(n))))
    chains = max(1, min(int(chains), size))
    per_chain = -(-size // chains)
    x = np.zeros((chains, n))
    for _ in range(burn_in):
        x = hit_and_run_step(body, x, gen, r_hint)
    out = np.empty((per_chain, chains, n))
    for i in range(per_chain):
        for _ in range(thinning):
            x = hit_and_run_step(body, x, gen, r_hint)
        out[i] = x
    return out.reshape(-1, n)[:size]


# --------------------------------------------------------------------------
# Moment oracles for products of symmetric one-dimensional laws


@lru_cache(maxsize=None)
def _uniform_cumulants(jmax):
    # Uniform on [-1/2, 1/2]: kappa_{2j} = B_{2j} / (2j).
    b = bernoulli(2 * jmax)
    return tuple(float(b[2 * j]) / (2 * j) for j in range(1, jmax + 1))


def _laplace_cumulants(jmax, scale):
    return tuple(2.0 * math.exp(float(gammaln(2 * j)) + 2 * j * math.log(scale)) for j in range(1, jmax + 1))


def _even_moment_from_cumulants(q, y, even_cumulants):
    """E<X,y>^q for independent symmetric coordinates and even integer q."""
    y = np.asarray(y, dtype=float)
    jmax = q // 2
    powers = np.abs(y)[..., None] ** (2 * np.arange(1, jmax + 1))
    kappa = np.zeros(y.shape[:-1] + (q + 1,))
    kappa[..., 2::2] = (powers * np.asarray(even_cumulants)).sum(axis=-2)
    m = np.zeros(y.shape[:-1] + (q + 1,))
    m[..., 0] = 1.0
    for r in range(1, q + 1):
        acc = 0.0
        for j in range(2, r + 1, 2):
            acc = acc + math.comb(r - 1, j - 1) * kappa[..., j] * m[..., r - j]
        m[..., r] = acc
    return m[..., q]


def _is_even_int(q):
    return float(q).is_integer() and int(q) % 2 == 0 and q > 0


def gaussian_abs_moment_constant(q: float) -> float:
    """c_q with E|g|^q = c_q^q for a standard normal g."""
    return math.sqrt(2.0) * math.exp((float(gammaln((q + 1) / 2.0)) - 0.5 * math.log(math.pi)) / q)


# --------------------------------------------------------------------------
# Measures


class LogConcaveMeasure:
    type_name = "measure"
    isotropic = False

    def __init__(self, dim: int):
        self.dim = int(dim)

    def sample(self, size: int, rng) -> np.ndarray:
        raise NotImplementedError

    @property
    def exact_sampler(self) -> bool:
        return True

    def log_sup_density(self) -> float:
        raise DensityUnavailable(f"no closed-form density supremum for {self.type_name}")

    def covariance(self) -> np.ndarray:
        raise OracleUnavailable(f"no closed-form covariance for {self.type_name}")

    def abs_moment(self, y, q: float):
        """Closed-form ``E|<X, y>|^q`` (vectorised over leading axes of y)."""
        raise OracleUnavailable(f"no moment oracle for {self.type_name} at q={q}")

    def has_moment_oracle(self, q: float) -> bool:
        try:
            self.abs_moment(np.ones(self.dim), q)
        except OracleUnavailable:
            return False
        return True

    def to_dict(self) -> dict:
        raise NotImplementedError

    def __repr__(self):
        return f"{type(self).__name__}(dim={self.dim})"


class StandardGaussian(LogConcaveMeasure):
    type_name = "gaussian"
    isotropic = True

    def sample(self, size, rng):
        return as_generator(rng).standard_normal((size, self.dim))

    def log_sup_density(self):
        return -0.5 * self.dim * math.log(2 * math.pi)

    def covariance(self):
        return np.eye(self.dim)

    def abs_moment(self, y, q):
        norm = np.linalg.norm(np.asarray(y, dtype=float), axis=-1)
        return (gaussian_abs_moment_constant(q) * norm) ** q

    def to_dict(self):
        return {"type": "gaussian", "n": self.dim}


class LaplaceProduct(LogConcaveMeasure):
    """Independent two-sided exponential coordinates of unit variance."""

    type_name = "laplace"
    isotropic = True

    def __init__(self, dim: int):
        super().__init__(dim)
        self.scale = 1.0 / math.sqrt(2.0)

    def sample(self, size, rng):
        return as_generator(rng).laplace(scale=self.scale, size=(size, self.dim))

    def log_sup_density(self):
        return -self.dim * math.log(2 * self.scale)

    def covariance(self):
        return np.eye(self.dim)

    def abs_moment(self, y, q):
        y = np.asarray(y, dtype=float)
        if _is_even_int(q):
            return _even_moment_from_cumulants(int(q), y, _laplace_cumulants(int(q) // 2, self.scale))
        nnz = np.count_nonzero(y, axis=-1)
        if np.all(nnz <= 1):
            size = np.abs(y).sum(axis=-1) * self.scale
            return size**q * math.exp(float(gammaln(q + 1)))
        raise OracleUnavailable("Laplace moments are closed-form only for even integer q or axis directions")

    def to_dict(self):
        return {"type": "laplace", "n": self.dim}


class UniformOnBody(LogConcaveMeasure):
    """Uniform probability on a body; exact sampler when one exists."""

    type_name = "uniform"

    def __init__(self, body: ConvexBody, sampler: str = "auto", burn_in=None, thinning=None, chains=DEFAULT_CHAINS):
        super().__init__(body.dim)
        if sampler not in ("auto", "exact", "hit_and_run"):
            raise ValueError(f"unknown sampler {sampler!r}")
        if sampler == "exact" and not body.has_exact_sampler:
            raise OracleUnavailable(f"{body.type_name} has no exact sampler")
        self.body = body
        self.sampler = "exact" if sampler == "auto" and body.has_exact_sampler else sampler
        if self.sampler == "auto":
            self.sampler = "hit_and_run"
        self.burn_in = burn_in
        self.thinning = thinning
        self.chains = chains

    @property
    def exact_sampler(self):
        return self.sampler == "exact"

    def sample(self, size, rng):
        gen = as_generator(rng)
        if self.sampler == "exact":
            return self.body.sample_uniform(size, gen)
        return hit_and_run(self.body, size, gen, self.burn_in, self.thinning, self.chains)

    def log_sup_density(self):
        try:
            return -math.log(self.body.volume())
        except Exception as exc:
            raise DensityUnavailable(str(exc)) from exc

    def covariance(self):
        try:
            return self.body.covariance()
        except Exception as exc:
            raise OracleUnavailable(str(exc)) from exc

    def abs_moment(self, y, q):
        body = self.body
        transform = None
        if isinstance(body, Affine) and isinstance(body.child, Cube):
            transform, body = body.T, body.child
        if isinstance(body, Cube) and _is_even_int(q):
            y = np.asarray(y, dtype=float)
            if transform is not None:
                y = y @ transform
            return _even_moment_from_cumulants(int(q), y, _uniform_cumulants(int(q) // 2))
        return super().abs_moment(y, q)

    def to_dict(self):
        d = {"type": "uniform", "body": self.body.to_dict()}
        if self.sampler != "exact":
            d["sampler"] = self.sampler
        return d


class Pushforward(LogConcaveMeasure):
    """Law of ``T X`` for ``X ~ child``."""

    type_name = "pushforward"

    def __init__(self, T, child: LogConcaveMeasure):
        T = np.asarray(T, dtype=float)
        if T.shape != (child.dim, child.dim):
            raise DimensionMismatch(f"T must be {child.dim} x {child.dim}")
        sv = np.linalg.svd(T, compute_uv=False)
        if sv[-1] <= 1e-12 * max(sv[0], 1e-300):
            raise SingularTransform("pushforward transform is singular")
        super().__init__(child.dim)
        self.T = T
        self.child = child
        self._logdet = float(np.sum(np.log(sv)))

    @property
    def exact_sampler(self):
        return self.child.exact_sampler

    def sample(self, size, rng):
        return self.child.sample(size, rng) @ self.T.T

    def log_sup_density(self):
        return self.child.log_sup_density() - self._logdet

    def covariance(self):
        return self.T @ self.child.covariance() @ self.T.T

    def abs_moment(self, y, q):
        return self.child.abs_moment(np.asarray(y, dtype=float) @ self.T, q)

    def to_dict(self):
        return {"type": "pushforward", "T": self.T.tolist(), "child": self.child.to_dict()}


class IsotropicUniform(Pushforward):
    """The isotropic measure of a body: uniform on ``Cov^{-1/2} K``.

    For an isotropic body (volume 1, ``Cov = L^2 I``) this is the law with
    density ``L^n 1_{K/L}``, bridging the body and measure conventions.
    """

    type_name = "isotropic"
    isotropic = True

    def __init__(self, body: ConvexBody, sampler: str = "auto"):
        cov = body.covariance()
        w, v = np.linalg.eigh(cov)
        T = (v / np.sqrt(w)) @ v.T
        super().__init__(T, UniformOnBody(body, sampler))
        self.body = body

    def covariance(self):
        return np.eye(self.dim)

    def to_dict(self):
        return {"type": "isotropic", "body": self.body.to_dict()}


def isotropic_body_measure(body: ConvexBody, sampler: str = "auto") -> IsotropicUniform:
    return IsotropicUniform(body, sampler)


class Marginal(LogConcaveMeasure):
    """Push-forward under the orthogonal projection onto ``E`` (E-coordinates)."""

    type_name = "marginal"

    def __init__(self, child: LogConcaveMeasure, E: Subspace):
        if E.ambient_dim != child.dim:
            raise DimensionMismatch("subspace and measure live in different dimensions")
        super().__init__(E.dim)
        self.child = child
        self.E = E
        self.isotropic = child.isotropic

    @property
    def exact_sampler(self):
        return self.child.exact_sampler

    def sample(self, size, rng):
        return self.child.sample(size, rng) @ self.E.frame

    def log_sup_density(self):
        if isinstance(self.child, StandardGaussian):
            return -0.5 * self.dim * math.log(2 * math.pi)
        return super().log_sup_density()

    def covariance(self):
        F = self.E.frame
        return F.T @ self.child.covariance() @ F

    def abs_moment(self, u, q):
        return self.child.abs_moment(np.asarray(u, dtype=float) @ self.E.frame.T, q)

    def to_dict(self):
        return {"type": "marginal", "child": self.child.to_dict(), "frame": self.E.frame.tolist()}


def marginal(mu: LogConcaveMeasure, E: Subspace) -> Marginal:
    return Marginal(mu, E)


def pushforward(mu: LogConcaveMeasure, T) -> Pushforward:
    return Pushforward(T, mu)


def sample(mu: LogConcaveMeasure, size: int, rng) -> np.ndarray:
    return mu.sample(size, rng)


def _mdim(d, n, where):
    if "n" in d:
        return int(d["n"])
    if n is None:
        raise ConfigError(f"{where}.n", "missing required key")
    return int(n)


def measure_from_dict(d: dict, n: int | None = None, where: str = "measure") -> LogConcaveMeasure:
    if not isinstance(d, dict):
        raise ConfigError(where, "measure descriptor must be a JSON object")
    kind = d.get("type")
    try:
        if kind == "gaussian":
            return StandardGaussian(_mdim(d, n, where))
        if kind == "laplace":
            return LaplaceProduct(_mdim(d, n, where))
        if kind in ("uniform", "isotropic"):
            if "body" not in d:
                raise ConfigError(f"{where}.body", "missing required key")
            body = body_from_dict(d["body"], n, f"{where}.body")
            sampler = d.get("sampler", "auto")
            if kind == "uniform":
                return UniformOnBody(body, sampler)
            return IsotropicUniform(body, sampler)
        if kind == "pushforward":
            if "T" not in d:
                raise ConfigError(f"{where}.T", "missing required key")
            if "child" not in d:
                raise ConfigError(f"{where}.child", "missing required key")
            return Pushforward(d["T"], measure_from_dict(d["child"], n, f"{where}.child"))
        if kind == "marginal":
            for key in ("child", "frame"):
                if key not in d:
                    raise ConfigError(f"{where}.{key}", "missing required key")
            return Marginal(measure_from_dict(d["child"], n, f"{where}.child"), Subspace(d["frame"]))
    except ConfigError:
        raise
    except (ValueError, TypeError, OracleUnavailable) as exc:
        raise ConfigError(where, str(exc)) from exc
    raise ConfigError(f"{where}.type", f"unknown measure type {kind!r}")
