"""Convex bodies as bundles of vectorised oracles.

Every oracle accepts an array whose last axis has length ``dim`` and returns
one value per leading index, so ``body.gauge(points)`` works on a single
vector or on a ``(N, dim)`` batch alike.

Conventions
-----------
* ``Cube(n)`` is ``[-1/2, 1/2]^n``: volume 1 and already isotropic.
* ``Simplex(n)`` is the regular simplex with barycenter 0 and volume 1.
* ``Ellipsoid(A)`` is ``{x : x^T A^{-1} x <= 1}``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .errors import (
    DimensionMismatch,
    OracleUnavailable,
    SingularTransform,
    VolumeUnavailable,
    ConfigError,
)

MEMBERSHIP_TOL = 1e-12
ORTHO_TOL = 1e-10


def log_ball_volume(n: int) -> float:
    """log of omega_n = pi^{n/2} / Gamma(n/2 + 1)."""
    return 0.5 * n * math.log(math.pi) - float(gammaln(0.5 * n + 1.0))


def ball_volume(n: int) -> float:
    return math.exp(log_ball_volume(n))


def volume_one_radius(n: int) -> float:
    """Radius r_n with |r_n B_2^n| = 1."""
    return math.exp(-log_ball_volume(n) / n)


def _as_batch(x, dim):
    x = np.asarray(x, dtype=float)
    if x.ndim == 0 or x.shape[-1] != dim:
        raise DimensionMismatch(f"expected last axis of length {dim}, got shape {x.shape}")
    return x


# --------------------------------------------------------------------------
# Subspaces


@dataclass(frozen=True, eq=False)
class Subspace:
    """An m-dimensional subspace of R^n held as an n x m orthonormal frame."""

    frame: np.ndarray

    def __post_init__(self):
        frame = np.array(self.frame, dtype=float)
        if frame.ndim == 1:
            frame = frame[:, None]
        n, m = frame.shape
        if not 1 <= m <= n:
            raise DimensionMismatch(f"frame shape {frame.shape} is not n x m with 1 <= m <= n")
        err = np.max(np.abs(frame.T @ frame - np.eye(m)))
        if err > ORTHO_TOL:
            raise ValueError(f"frame columns are not orthonormal (max deviation {err:.2e})")
        frame.setflags(write=False)
        object.__setattr__(self, "frame", frame)

    @property
    def ambient_dim(self) -> int:
        return self.frame.shape[0]

    @property
    def dim(self) -> int:
        return self.frame.shape[1]

    @classmethod
    def axes(cls, n: int, m: int) -> "Subspace":
        """span(e_1, ..., e_m) in R^n."""
        return cls(np.eye(n)[:, :m])

    @classmethod
    def span(cls, vectors) -> "Subspace":
        """Orthonormalise the columns of ``vectors`` (an n x m array)."""
        v = np.asarray(vectors, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        q, r = np.linalg.qr(v)
        if np.min(np.abs(np.diag(r))) < 1e-12:
            raise ValueError("spanning vectors are linearly dependent")
        return cls(q)

    def embed(self, u):
        """F-coordinates -> ambient vectors."""
        return np.asarray(u, dtype=float) @ self.frame.T

    def coords(self, x):
        """Ambient vectors -> F-coordinates of their orthogonal projection."""
        return np.asarray(x, dtype=float) @ self.frame

    def complement(self) -> "Subspace":
        n, m = self.frame.shape
        if m == n:
            raise ValueError("the full space has no nontrivial complement")
        q, _ = np.linalg.qr(self.frame, mode="complete")
        return Subspace(q[:, m:])

    def rotated(self, U) -> "Subspace":
        return Subspace(np.asarray(U, dtype=float) @ self.frame)

    def to_dict(self):
        return {"frame": self.frame.tolist()}


# --------------------------------------------------------------------------
# Bodies


class ConvexBody:
    """Base class; subclasses override the oracles they can provide.

    ``has_support``/``has_gauge`` report which routes exist without
    evaluating anything.  Missing routes raise :class:`OracleUnavailable`.
    """

    type_name = "body"
    symmetric = True

    def __init__(self, dim: int):
        self.dim = int(dim)

    # oracle routes
    def has_support(self) -> bool:
        return False

    def has_gauge(self) -> bool:
        return False

    def _support(self, y):
        raise OracleUnavailable(f"{self.type_name} has no support oracle")

    def _gauge(self, x):
        raise OracleUnavailable(f"{self.type_name} has no gauge oracle")

    def support(self, y):
        return self._support(_as_batch(y, self.dim))

    def gauge(self, x):
        return self._gauge(_as_batch(x, self.dim))

    def radial(self, theta):
        g = self.gauge(theta)
        with np.errstate(divide="ignore"):
            return 1.0 / g

    def contains(self, x):
        return self.gauge(x) <= 1.0 + MEMBERSHIP_TOL

    # closed forms
    def volume(self) -> float:
        raise VolumeUnavailable(f"no closed-form volume for {self.type_name}")

    def covariance(self) -> np.ndarray:
        """Covariance of the uniform probability measure on the body."""
        raise VolumeUnavailable(f"no closed-form covariance for {self.type_name}")

    def radius(self):
        """Exact circumradius R(K) when known in closed form, else None."""
        return None

    @property
    def has_exact_sampler(self) -> bool:
        return False

    def sample_uniform(self, size: int, rng) -> np.ndarray:
        raise OracleUnavailable(f"no exact sampler for {self.type_name}")

    def polar_equivalent(self):
        """A closed-form body equal to the polar, or None."""
        return None

    def to_dict(self) -> dict:
        raise NotImplementedError

    def __repr__(self):
        return f"{type(self).__name__}(dim={self.dim})"


class Cube(ConvexBody):
    type_name = "cube"

    def __init__(self, n: int):
        super().__init__(n)

    def has_support(self):
        return True

    def has_gauge(self):
        return True

    def _support(self, y):
        return 0.5 * np.abs(y).sum(axis=-1)

    def _gauge(self, x):
        return 2.0 * np.abs(x).max(axis=-1)

    def volume(self):
        return 1.0

    def covariance(self):
        return np.eye(self.dim) / 12.0

    def radius(self):
        return 0.5 * math.sqrt(self.dim)

    @property
    def has_exact_sampler(self):
        return True

    def sample_uniform(self, size, rng):
        return rng.uniform(-0.5, 0.5, size=(size, self.dim))

    def polar_equivalent(self):
        return CrossPolytope(self.dim, 2.0)

    def to_dict(self):
        return {"type": "cube", "n": self.dim}


class Ball(ConvexBody):
    type_name = "ball"

    def __init__(self, n: int, r: float = 1.0):
        super().__init__(n)
        if r <= 0:
            raise ValueError("ball radius must be positive")
        self.r = float(r)

    def has_support(self):
        return True

    def has_gauge(self):
        return True

    def _support(self, y):
        return self.r * np.linalg.norm(y, axis=-1)

    def _gauge(self, x):
        return np.linalg.norm(x, axis=-1) / self.r

    def volume(self):
        return math.exp(log_ball_volume(self.dim) + self.dim * math.log(self.r))

    def covariance(self):
        return np.eye(self.dim) * self.r**2 / (self.dim + 2)

    def radius(self):
        return self.r

    @property
    def has_exact_sampler(self):
        return True

    def sample_uniform(self, size, rng):
        g = rng.standard_normal((size, self.dim))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        u = rng.uniform(size=(size, 1)) ** (1.0 / self.dim)
        return self.r * u * g

    def polar_equivalent(self):
        return Ball(self.dim, 1.0 / self.r)

    def to_dict(self):
        return {"type": "ball", "n": self.dim, "r": self.r}


class VolumeOneBall(Ball):
    type_name = "volume_one_ball"

    def __init__(self, n: int):
        super().__init__(n, volume_one_radius(n))

    def volume(self):
        return 1.0

    def to_dict(self):
        return {"type": "volume_one_ball", "n": self.dim}


class CrossPolytope(ConvexBody):
    """``{x : ||x||_1 <= scale}``."""

    type_name = "cross_polytope"

    def __init__(self, n: int, scale: float = 1.0):
        super().__init__(n)
        if scale <= 0:
            raise ValueError("scale must be positive")
        self.scale = float(scale)

    def has_support(self):
        return True

    def has_gauge(self):
        return True

    def _support(self, y):
        return self.scale * np.abs(y).max(axis=-1)

    def _gauge(self, x):
        return np.abs(x).sum(axis=-1) / self.scale

    def volume(self):
        n = self.dim
        return math.exp(n * math.log(2.0 * self.scale) - float(gammaln(n + 1)))

    def covariance(self):
        n = self.dim
        return np.eye(n) * 2.0 * self.scale**2 / ((n + 1) * (n + 2))

    def radius(self):
        return self.scale

    @property
    def has_exact_sampler(self):
        return True

    def sample_uniform(self, size, rng):
        e = rng.exponential(size=(size, self.dim + 1))
        w = e[:, : self.dim] / e.sum(axis=1, keepdims=True)
        signs = rng.choice([-1.0, 1.0], size=(size, self.dim))
        return self.scale * signs * w

    def polar_equivalent(self):
        return Affine(np.eye(self.dim) * (2.0 / self.scale), Cube(self.dim))

    def to_dict(self):
        return {"type": "cross_polytope", "n": self.dim, "scale": self.scale}


class Simplex(ConvexBody):
    """Regular simplex, barycenter at the origin, volume 1 (not symmetric)."""

    type_name = "simplex"
    symmetric = False

    def __init__(self, n: int):
        super().__init__(n)
        if n < 1:
            raise ValueError("simplex dimension must be >= 1")
        basis = np.eye(n + 1) - 1.0 / (n + 1)
        # Orthonormal basis of the hyperplane sum(x) = 0 in R^{n+1}.
        q, _ = np.linalg.qr(basis[:, :n])
        verts = basis @ q  # (n+1, n), edge length sqrt(2)
        edge = math.sqrt(2.0)
        log_vol = n * math.log(edge) - float(gammaln(n + 1)) + 0.5 * math.log((n + 1) / 2.0**n)
        verts = verts * math.exp(-log_vol / n)
        self.vertices = verts
        self.circumradius = float(np.linalg.norm(verts[0]))
        self.inradius = self.circumradius / n

    def has_support(self):
        return True

    def has_gauge(self):
        return True

    def _support(self, y):
        return (y @ self.vertices.T).max(axis=-1)

    def _gauge(self, x):
        # Facet opposite v_i has outward normal -v_i/R at distance R/n.
        scale = self.circumradius * self.inradius
        return np.maximum((-(x @ self.vertices.T)).max(axis=-1) / scale, 0.0)

    def volume(self):
        return 1.0

    def covariance(self):
        n = self.dim
        return np.eye(n) * self.circumradius**2 / (n * (n + 2))

    def radius(self):
        return self.circumradius

    @property
    def has_exact_sampler(self):
        return True

    def sample_uniform(self, size, rng):
        w = rng.dirichlet(np.ones(self.dim + 1), size=size)
        return w @ self.vertices

    def to_dict(self):
        return {"type": "simplex", "n": self.dim}


class LpBall(ConvexBody):
    """``{x : ||x||_p <= scale}`` for ``p >= 1`` (``p = inf`` allowed)."""

    type_name = "lp_ball"

    def __init__(self, n: int, p: float, scale: float = 1.0):
        super().__init__(n)
        p = float(p)
        if p < 1:
            raise ValueError("p must be >= 1")
        if scale <= 0:
            raise ValueError("scale must be positive")
        self.p = p
        self.scale = float(scale)

    @property
    def dual_exponent(self):
        p = self.p
        if p == 1.0:
            return math.inf
        if math.isinf(p):
            return 1.0
        return p / (p - 1.0)

    def has_support(self):
        return True

    def has_gauge(self):
        return True

    def _support(self, y):
        return self.scale * np.linalg.norm(y, ord=self.dual_exponent, axis=-1)

    def _gauge(self, x):
        return np.linalg.norm(x, ord=self.p, axis=-1) / self.scale

    def volume(self):
        n, p = self.dim, self.p
        if math.isinf(p):
            return (2.0 * self.scale) ** n
        logv = n * math.log(2.0) + n * float(gammaln(1 + 1 / p)) - float(gammaln(1 + n / p))
        return math.exp(logv + n * math.log(self.scale))

    def covariance(self):
        n, p = self.dim, self.p
        if math.isinf(p):
            var = self.scale**2 / 3.0
        else:
            var = math.exp(
                float(gammaln(3 / p) + gammaln(1 + n / p) - gammaln(1 / p) - gammaln(1 + (n + 2) / p))
            )
            var *= self.scale**2
        return np.eye(n) * var

    def radius(self):
        if self.p >= 2:
            exponent = 0.5 if math.isinf(self.p) else 0.5 - 1.0 / self.p
            return self.scale * self.dim**exponent
        return self.scale

    @property
    def has_exact_sampler(self):
        return True

    def sample_uniform(self, size, rng):
        n, p = self.dim, self.p
        if math.isinf(p):
            return rng.uniform(-self.scale, self.scale, size=(size, n))
        # Barthe-Guedon-Mendelson-Naor: y_i ~ exp(-|t|^p), z ~ Exp(1).
        y = rng.gamma(1.0 / p, size=(size, n)) ** (1.0 / p)
        y *= rng.choice([-1.0, 1.0], size=(size, n))
        z = rng.exponential(size=(size, 1))
        denom = ((np.abs(y) ** p).sum(axis=1, keepdims=True) + z) ** (1.0 / p)
        return self.scale * y / denom

    def polar_equivalent(self):
        return LpBall(self.dim, self.dual_exponent, 1.0 / self.scale)

    def to_dict(self):
        p = "inf" if math.isinf(self.p) else self.p
        return {"type": "lp_ball", "n": self.dim, "p": p, "scale": self.scale}


class HPolytope(ConvexBody):
    """``{x : A x <= b}`` with ``b > 0``; gauge only."""

    type_name = "hpolytope"

    def __init__(self, A, b):
        A = np.asarray(A, dtype=float)
        b = np.asarray(b, dtype=float)
        if A.ndim != 2 or b.shape != (A.shape[0],):
            raise DimensionMismatch("A must be m x n and b of length m")
        if np.any(b <= 0):
            raise ValueError("HPolytope requires b > 0 entrywise (origin in the interior)")
        super().__init__(A.shape[1])
        self.A = A
        self.b = b
        self._scaled = A / b[:, None]
        self.symmetric = False

    def has_gauge(self):
        return True

    def _gauge(self, x):
        return np.maximum((x @ self._scaled.T).max(axis=-1), 0.0)

    def to_dict(self):
        return {"type": "hpolytope", "A": self.A.tolist(), "b": self.b.tolist()}


class Ellipsoid(ConvexBody):
    type_name = "ellipsoid"

    def __init__(self, shape):
        shape = np.asarray(shape, dtype=float)
        if shape.ndim != 2 or shape.shape[0] != shape.shape[1]:
            raise DimensionMismatch("shape matrix must be square")
        if not np.allclose(shape, shape.T):
            raise ValueError("shape matrix must be symmetric")
        w, v = np.linalg.eigh(shape)
        if np.min(w) <= 0:
            raise SingularTransform("shape matrix must be positive definite")
        super().__init__(shape.shape[0])
        self.shape = shape
        self._inv = (v / w) @ v.T
        self._sqrt = (v * np.sqrt(w)) @ v.T
        self._eig = w

    def has_support(self):
        return True

    def has_gauge(self):
        return True

    def _support(self, y):
        return np.sqrt(np.maximum(np.einsum("...i,ij,...j->...", y, self.shape, y), 0.0))

    def _gauge(self, x):
        return np.sqrt(np.maximum(np.einsum("...i,ij,...j->...", x, self._inv, x), 0.0))

    def volume(self):
        return math.exp(log_ball_volume(self.dim) + 0.5 * float(np.sum(np.log(self._eig))))

    def covariance(self):
        return self.shape / (self.dim + 2)

    def radius(self):
        return math.sqrt(float(np.max(self._eig)))

    @property
    def has_exact_sampler(self):
        return True

    def sample_uniform(self, size, rng):
        return Ball(self.dim).sample_uniform(size, rng) @ self._sqrt.T

    def polar_equivalent(self):
        return Ellipsoid(self._inv)

    def to_dict(self):
        return {"type": "ellipsoid", "shape": self.shape.tolist()}


class Affine(ConvexBody):
    """Linear image ``T(child)``; the inverse is computed once, here."""

    type_name = "affine"

    def __init__(self, T, child: ConvexBody):
        T = np.asarray(T, dtype=float)
        if T.shape != (child.dim, child.dim):
            raise DimensionMismatch(f"T must be {child.dim} x {child.dim}")
        sv = np.linalg.svd(T, compute_uv=False)
        if sv[-1] <= 1e-12 * max(sv[0], 1e-300):
            raise SingularTransform("affine transform is singular")
        super().__init__(child.dim)
        self.T = T
        self.T_inv = np.linalg.inv(T)
        self.child = child
        self.symmetric = child.symmetric

    def has_support(self):
        return self.child.has_support()

    def has_gauge(self):
        return self.child.has_gauge()

    def _support(self, y):
        return self.child._support(y @ self.T)

    def _gauge(self, x):
        return self.child._gauge(x @ self.T_inv.T)

    def volume(self):
        return abs(float(np.linalg.det(self.T))) * self.child.volume()

    def covariance(self):
        return self.T @ self.child.covariance() @ self.T.T

    def radius(self):
        r = self.child.radius()
        if r is None:
            return None
        sv = np.linalg.svd(self.T, compute_uv=False)
        # Exact only for conformal maps (scalar times orthogonal).
        if sv[0] - sv[-1] <= 1e-12 * sv[0]:
            return float(sv[0]) * r
        return None

    @property
    def has_exact_sampler(self):
        return self.child.has_exact_sampler

    def sample_uniform(self, size, rng):
        return self.child.sample_uniform(size, rng) @ self.T.T

    def polar_equivalent(self):
        return Affine(self.T_inv.T, Polar(self.child))

    def to_dict(self):
        return {"type": "affine", "T": self.T.tolist(), "child": self.child.to_dict()}


class Rotation(Affine):
    type_name = "rotation"

    def __init__(self, U, child: ConvexBody):
        U = np.asarray(U, dtype=float)
        if U.shape != (child.dim, child.dim) or np.max(np.abs(U.T @ U - np.eye(child.dim))) > ORTHO_TOL:
            raise ValueError("rotation matrix must be orthogonal")
        super().__init__(U, child)
        self.T_inv = U.T

    def radius(self):
        return self.child.radius()

    def to_dict(self):
        return {"type": "rotation", "U": self.T.tolist(), "child": self.child.to_dict()}


class VolumeNormalized(Affine):
    """The homothetic copy of ``child`` with volume 1."""

    type_name = "normalized"

    def __init__(self, child: ConvexBody):
        s = child.volume() ** (-1.0 / child.dim)
        super().__init__(np.eye(child.dim) * s, child)
        self.factor = s

    def volume(self):
        return 1.0

    def radius(self):
        r = self.child.radius()
        return None if r is None else self.factor * r

    def to_dict(self):
        return {"type": "normalized", "child": self.child.to_dict()}


class Polar(ConvexBody):
    """Polar body: support and gauge swap roles with the child's."""

    type_name = "polar"

    def __init__(self, child: ConvexBody):
        super().__init__(child.dim)
        self.child = child
        self.symmetric = child.symmetric

    def has_support(self):
        return self.child.has_gauge()

    def has_gauge(self):
        return self.child.has_support()

    def _support(self, y):
        return self.child._gauge(y)

    def _gauge(self, x):
        return self.child._support(x)

    def polar_equivalent(self):
        return self.child

    def _closed(self):
        eq = self.child.polar_equivalent()
        if eq is None:
            raise VolumeUnavailable(f"polar of {self.child.type_name} has no closed form")
        return eq

    def volume(self):
        return self._closed().volume()

    def covariance(self):
        return self._closed().covariance()

    def radius(self):
        eq = self.child.polar_equivalent()
        return None if eq is None else eq.radius()

    @property
    def has_exact_sampler(self):
        eq = self.child.polar_equivalent()
        return eq is not None and eq.has_exact_sampler

    def sample_uniform(self, size, rng):
        return self._closed().sample_uniform(size, rng)

    def to_dict(self):
        return {"type": "polar", "child": self.child.to_dict()}


class Section(ConvexBody):
    """``child ∩ F`` in F-coordinates (dimension ``F.dim``)."""

    type_name = "section"

    def __init__(self, child: ConvexBody, F: Subspace):
        if F.ambient_dim != child.dim:
            raise DimensionMismatch("subspace and body live in different dimensions")
        super().__init__(F.dim)
        self.child = child
        self.F = F
        self.symmetric = child.symmetric

    def has_gauge(self):
        return self.child.has_gauge()

    def _gauge(self, u):
        return self.child._gauge(u @ self.F.frame.T)

    def to_dict(self):
        return {"type": "section", "child": self.child.to_dict(), "frame": self.F.frame.tolist()}


class Projection(ConvexBody):
    """``P_F(child)`` in F-coordinates."""

    type_name = "projection"

    def __init__(self, child: ConvexBody, F: Subspace):
        if F.ambient_dim != child.dim:
            raise DimensionMismatch("subspace and body live in different dimensions")
        super().__init__(F.dim)
        self.child = child
        self.F = F
        self.symmetric = child.symmetric

    def has_support(self):
        return self.child.has_support()

    def _support(self, u):
        return self.child._support(u @ self.F.frame.T)

    def to_dict(self):
        return {"type": "projection", "child": self.child.to_dict(), "frame": self.F.frame.tolist()}


class Intersection(ConvexBody):
    """Gauge-only: ``max`` of the two gauges."""

    type_name = "intersection"

    def __init__(self, first: ConvexBody, second: ConvexBody):
        if first.dim != second.dim:
            raise DimensionMismatch("intersected bodies must share a dimension")
        super().__init__(first.dim)
        self.first = first
        self.second = second
        self.symmetric = first.symmetric and second.symmetric

    def has_gauge(self):
        return self.first.has_gauge() and self.second.has_gauge()

    def _gauge(self, x):
        return np.maximum(self.first._gauge(x), self.second._gauge(x))

    def to_dict(self):
        return {"type": "intersection", "children": [self.first.to_dict(), self.second.to_dict()]}


# --------------------------------------------------------------------------
# Module-level operations


def support(body: ConvexBody, y):
    if not body.has_support():
        raise OracleUnavailable(f"{body.type_name} exposes no support route")
    return body.support(y)


def gauge(body: ConvexBody, x):
    if not body.has_gauge():
        raise OracleUnavailable(f"{body.type_name} exposes no gauge route")
    return body.gauge(x)


def membership(body: ConvexBody, x):
    return gauge(body, x) <= 1.0 + MEMBERSHIP_TOL


def analytic_volume(body: ConvexBody) -> float:
    return body.volume()


def section_body(body: ConvexBody, F: Subspace) -> Section:
    if not body.has_gauge():
        raise OracleUnavailable("sections need a gauge route")
    return Section(body, F)


def projection_body(body: ConvexBody, F: Subspace) -> Projection:
    if not body.has_support():
        raise OracleUnavailable("projections need a support route")
    return Projection(body, F)


def analytic_isotropic_constant(body: ConvexBody) -> float:
    """L_K from closed-form covariance and volume: det(Cov)^{1/2n} / |K|^{1/n}.

    Affine invariant, so it is the isotropic constant of the body's isotropic
    image; raises VolumeUnavailable when either closed form is missing.
    """
    n = body.dim
    cov = body.covariance()
    sign, logdet = np.linalg.slogdet(cov)
    if sign <= 0:
        raise VolumeUnavailable("degenerate closed-form covariance")
    return math.exp(logdet / (2 * n) - math.log(body.volume()) / n)


# --------------------------------------------------------------------------
# JSON descriptors

_PARSERS = {}


def register_body_type(name):
    def deco(fn):
        _PARSERS[name] = fn
        return fn

    return deco


def _require(d, key, where):
    if key not in d:
        raise ConfigError(f"{where}.{key}", "missing required key")
    return d[key]


def body_from_dict(d: dict, n: int | None = None, where: str = "body") -> ConvexBody:
    """Build a body from its JSON descriptor.

    ``n`` fills in the dimension of leaves that omit it, which lets
    experiment configs describe a body family once for a whole grid.
    """
    if not isinstance(d, dict):
        raise ConfigError(where, "body descriptor must be a JSON object")
    kind = d.get("type")
    if kind not in _PARSERS:
        raise ConfigError(f"{where}.type", f"unknown body type {kind!r}")
    try:
        return _PARSERS[kind](d, n, where)
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(where, str(exc)) from exc


def _dim(d, n, where):
    if "n" in d:
        return int(d["n"])
    if n is None:
        raise ConfigError(f"{where}.n", "missing required key")
    return int(n)


def _child(d, n, where, key="child"):
    return body_from_dict(_require(d, key, where), n, f"{where}.{key}")


register_body_type("cube")(lambda d, n, w: Cube(_dim(d, n, w)))
register_body_type("ball")(lambda d, n, w: Ball(_dim(d, n, w), float(d.get("r", 1.0))))
register_body_type("volume_one_ball")(lambda d, n, w: VolumeOneBall(_dim(d, n, w)))
register_body_type("cross_polytope")(
    lambda d, n, w: CrossPolytope(_dim(d, n, w), float(d.get("scale", 1.0)))
)
register_body_type("simplex")(lambda d, n, w: Simplex(_dim(d, n, w)))
register_body_type("lp_ball")(
    lambda d, n, w: LpBall(_dim(d, n, w), float(_require(d, "p", w)), float(d.get("scale", 1.0)))
)
register_body_type("hpolytope")(lambda d, n, w: HPolytope(_require(d, "A", w), _require(d, "b", w)))
register_body_type("ellipsoid")(lambda d, n, w: Ellipsoid(_require(d, "shape", w)))
register_body_type("affine")(lambda d, n, w: Affine(_require(d, "T", w), _child(d, n, w)))
register_body_type("rotation")(lambda d, n, w: Rotation(_require(d, "U", w), _child(d, n, w)))
register_body_type("polar")(lambda d, n, w: Polar(_child(d, n, w)))
register_body_type("normalized")(lambda d, n, w: VolumeNormalized(_child(d, n, w)))
register_body_type("section")(
    lambda d, n, w: Section(_child(d, n, w), Subspace(_require(d, "frame", w)))
)
register_body_type("projection")(
    lambda d, n, w: Projection(_child(d, n, w), Subspace(_require(d, "frame", w)))
)


@register_body_type("intersection")
def _parse_intersection(d, n, where):
    children = _require(d, "children", where)
    if not isinstance(children, list) or len(children) != 2:
        raise ConfigError(f"{where}.children", "expected a list of exactly two bodies")
    a = body_from_dict(children[0], n, f"{where}.children[0]")
    b = body_from_dict(children[1], n, f"{where}.children[1]")
    return Intersection(a, b)
