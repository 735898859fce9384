"""L_q-centroid bodies as convex bodies.

``Z_q`` of a sample ``X_1..X_N`` has support ``h(y) = (mean |<X_i, y>|^q)^{1/q}``,
which is smooth for ``q > 1``.  Its gauge is computed through the dual
problem ``min_y  h(y)^2 / 2 - <θ, y>``: at the minimiser ``y*`` the gauge is
``h(y*)``.  Radii of sections ``Z_q ∩ F`` and of ``Z_q ∩ U Z_q`` use the
monotone farthest-point iteration ``x <- argmax_{z in C} <x, z>``, where
the support of the intersection ``C`` is an infimal convolution solved by
Newton's method.
"""
from __future__ import annotations

import math

import numpy as np

from .errors import ConfigError, QOutOfRange
from .geometry import Ball, ConvexBody, Subspace, register_body_type
from .measures import (
    LogConcaveMeasure,
    Marginal,
    StandardGaussian,
    gaussian_abs_moment_constant,
    measure_from_dict,
)
from .radii import MaximizerConfig, RadiusResult, sphere_maximize
from .rng import RngStream, as_generator

CHUNK = 1 << 22  # entries of the (batch x samples) inner-product matrix per chunk
NEWTON_ITERS = 60
ASCENT_ITERS = 500
ASCENT_RTOL = 1e-9

ZQ_CONFIG = MaximizerConfig(n_starts=8, n_coarse=256, refine_steps=200, step_tolerance=1e-8)


def _lse(z, axis=0):
    # Plain log-sum-exp; scipy's version carries per-call overhead that dominates here.
    m = np.max(z, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(divide="ignore"):
        out = np.log(np.sum(np.exp(z - m), axis=axis)) + np.squeeze(m, axis=axis)
    return out


def _power_parts(a, q):
    """For inner products ``a`` (N,) or (N, B): h, p/a and p/a^2 with p_i ∝ |a_i|^q."""
    N = a.shape[0]
    absa = np.abs(a)
    with np.errstate(divide="ignore"):
        la = np.log(absa)
    lse = _lse(q * la)
    h = np.exp((lse - math.log(N)) / q)
    nz = absa > 0
    with np.errstate(invalid="ignore", over="ignore"):
        r1 = np.where(nz, np.sign(a) * np.exp((q - 1) * la - lse), 0.0)
        if q == 2:
            r2 = np.broadcast_to(np.exp(-lse), a.shape)
        else:
            r2 = np.where(nz, np.exp((q - 2) * la - lse), 0.0)
    return h, r1, r2


def power_value_grad_hess(Y, z, q, hess=True):
    """h(z) = (mean |Y z|^q)^{1/q} with its gradient and Hessian in z."""
    a = Y @ z
    h, r1, r2 = _power_parts(a, q)
    if not h > 0:
        # z is orthogonal to every sample: h vanishes and is not differentiable there.
        d = Y.shape[1]
        return 0.0, np.zeros(d), (np.zeros((d, d)) if hess else None)
    g = h * (r1 @ Y)
    if not hess:
        return h, g, None
    S = (Y * r2[:, None]).T @ Y
    H = (q - 1.0) * (h * S - np.outer(g, g) / h)
    return h, g, H


def _newton(fun, x0, iters=NEWTON_ITERS, ridge=1e-13):
    """Damped Newton for a smooth convex ``fun(x) -> (f, g, H)``."""
    x = np.array(x0, dtype=float)
    f, g, H = fun(x)
    for _ in range(iters):
        d = x.size
        scale = max(1.0, float(np.max(np.abs(np.diag(H))))) if d else 1.0
        try:
            step = -np.linalg.solve(H + ridge * scale * np.eye(d), g)
        except np.linalg.LinAlgError:
            step = -g
        dec = -float(g @ step)
        if not np.isfinite(dec):
            break
        if dec <= 1e-15 * max(1.0, abs(f)):
            # Inside the quadratic region the decrease is lost to rounding, so the
            # line search would only backtrack; take the full step and stop.
            fn, gn, Hn = fun(x + step)
            if np.isfinite(fn):
                x, f = x + step, fn
            break
        t = 1.0
        while True:
            xn = x + t * step
            fn, gn, Hn = fun(xn)
            if (np.isfinite(fn) and fn <= f - 0.25 * t * dec) or t < 1e-12:
                break
            t *= 0.5
        if t < 1e-12:
            break
        x, f, g, H = xn, fn, gn, Hn
    return x, f


class EmpiricalCentroidBody(ConvexBody):
    """``Z_q`` of a fixed sample (rows of ``X``)."""

    type_name = "centroid"

    def __init__(self, X, q: float, descriptor: dict | None = None):
        X = np.asarray(X, dtype=float)
        if X.ndim != 2:
            raise ValueError("sample must be an N x n array")
        if q < 2:
            raise QOutOfRange("empirical centroid bodies need q >= 2 (smooth support)")
        super().__init__(X.shape[1])
        self.X = X
        self.q = float(q)
        self._descriptor = descriptor

    def has_support(self):
        return True

    def has_gauge(self):
        return True

    def _support(self, y):
        shape = y.shape[:-1]
        Y = y.reshape(-1, self.dim)
        out = np.empty(len(Y))
        step = max(1, CHUNK // len(self.X))
        for i in range(0, len(Y), step):
            a = self.X @ Y[i : i + step].T
            with np.errstate(divide="ignore"):
                la = np.log(np.abs(a))
            out[i : i + step] = np.exp((_lse(self.q * la) - math.log(len(self.X))) / self.q)
        return out.reshape(shape)

    def support_gradient(self, y):
        """Gradients of the support at the rows of ``y``: the touching points of Z_q."""
        Y = np.atleast_2d(np.asarray(y, dtype=float))
        out = np.empty_like(Y)
        step = max(1, CHUNK // len(self.X))
        for i in range(0, len(Y), step):
            a = self.X @ Y[i : i + step].T
            h, r1, _ = _power_parts(a, self.q)
            out[i : i + step] = (h * (self.X.T @ r1)).T
        return out.reshape(np.shape(y))

    def dual_point(self, theta):
        """Minimiser of ``h(y)^2/2 - <θ, y>`` for a single θ."""
        theta = np.asarray(theta, dtype=float)
        X, q = self.X, self.q

        def fun(y):
            h, g, H = power_value_grad_hess(X, y, q)
            return 0.5 * h * h - theta @ y, h * g - theta, np.outer(g, g) + h * H

        h0 = float(self._support(theta[None, :])[0])
        y0 = theta * float(theta @ theta) / (h0 * h0)
        y, _ = _newton(fun, y0)
        return y

    def _gauge(self, x):
        shape = x.shape[:-1]
        P = x.reshape(-1, self.dim)
        out = np.empty(len(P))
        for i, theta in enumerate(P):
            if not np.any(theta):
                out[i] = 0.0
                continue
            y = self.dual_point(theta)
            out[i] = float(self._support(y[None, :])[0])
        return out.reshape(shape)

    def to_dict(self):
        if self._descriptor is not None:
            return dict(self._descriptor)
        return {"type": "centroid_sample", "q": self.q, "X": self.X.tolist()}


def exact_centroid_body(mu: LogConcaveMeasure, q: float):
    """Closed-form ``Z_q(mu)`` when one is known (Gaussian laws: a ball), else None."""
    base = mu
    while isinstance(base, Marginal):
        base = base.child
    if isinstance(base, StandardGaussian):
        return Ball(mu.dim, gaussian_abs_moment_constant(q))
    return None


def centroid_body(mu: LogConcaveMeasure, q: float, N: int = 20_000, rng=None, method: str = "auto") -> ConvexBody:
    """``Z_q(mu)``: closed form when available (``method`` auto/exact) or from ``N`` draws."""
    if method not in ("auto", "exact", "mc"):
        raise ValueError(f"unknown method {method!r}")
    if method != "mc":
        body = exact_centroid_body(mu, q)
        if body is not None:
            return body
        if method == "exact":
            raise QOutOfRange("no closed-form centroid body for this measure")
    X = mu.sample(int(N), as_generator(rng))
    return EmpiricalCentroidBody(X, q)


@register_body_type("centroid")
def _parse_centroid(d, n, where):
    for key in ("measure", "q"):
        if key not in d:
            raise ConfigError(f"{where}.{key}", "missing required key")
    mu = measure_from_dict(d["measure"], n, f"{where}.measure")
    seed = int(d.get("seed", 0))
    body = centroid_body(mu, float(d["q"]), int(d.get("samples", 20_000)), RngStream(seed), d.get("method", "auto"))
    if isinstance(body, EmpiricalCentroidBody):
        body._descriptor = dict(d)
    return body


# --------------------------------------------------------------------------
# Radii of Z_q sections, projections, rotations and polars


def _start_directions(Y, q, dim, n_starts, n_coarse, gen):
    """Coarse random directions ranked by the support (an upper bound of the radial function)."""
    U = gen.standard_normal((n_coarse, dim))
    U /= np.linalg.norm(U, axis=1, keepdims=True)
    a = Y @ U.T
    with np.errstate(divide="ignore"):
        h = np.exp((_lse(q * np.log(np.abs(a))) - math.log(len(Y))) / q)
    order = np.argsort(-h, kind="stable")[:n_starts]
    return U[order]


def _farthest_point(touch, u0, iters=ASCENT_ITERS, rtol=ASCENT_RTOL):
    """Iterate ``u <- x/|x|`` with ``x = touch(u)`` the maximiser of ``<u, .>``."""
    u = u0 / np.linalg.norm(u0)
    state = None
    best = -math.inf
    x = None
    for _ in range(iters):
        x, state = touch(u, state)
        r = float(np.linalg.norm(x))
        if r <= best * (1 + rtol):
            best = max(best, r)
            break
        best = r
        u = x / r
    return best, x / np.linalg.norm(x)


def zq_section_radius(Z: ConvexBody, F: Subspace, config: MaximizerConfig = ZQ_CONFIG, rng=None) -> RadiusResult:
    """``R(Z_q ∩ F)`` for an empirical or closed-form centroid body."""
    gen = as_generator(rng)
    if not isinstance(Z, EmpiricalCentroidBody):
        from .radii import section_radius

        return section_radius(Z, F, config, gen)
    X, q = Z.X, Z.q
    m = F.dim
    XF = X @ F.frame
    if m == Z.dim:
        XG = np.zeros((len(X), 0))
    else:
        XG = X @ F.complement().frame

    def touch(u, w):
        w = np.zeros(XG.shape[1]) if w is None else w
        base = XF @ u
        if XG.shape[1]:

            def fun(w_):
                a = base + XG @ w_
                h, r1, r2 = _power_parts(a, q)
                g = h * (r1 @ XG)
                S = (XG * r2[:, None]).T @ XG
                return h, g, (q - 1.0) * (h * S - np.outer(g, g) / h)

            w, _ = _newton(fun, w)
        a = base + XG @ w
        h, r1, _ = _power_parts(a, q)
        return h * (r1 @ XF), w

    starts = _start_directions(XF, q, m, config.n_starts, config.n_coarse, gen)
    best = None
    for u0 in starts:
        r, u = _farthest_point(touch, u0)
        if best is None or r > best[0]:
            best = (r, u)
    u = best[1]
    value = 1.0 / float(Z.gauge(F.embed(u)[None, :])[0])
    return RadiusResult(value, u, int(config.n_coarse), extra={"ascent_value": best[0]})


def zq_rotation_radius(Z: ConvexBody, U, config: MaximizerConfig = ZQ_CONFIG, rng=None) -> RadiusResult:
    """``R(Z_q ∩ U Z_q)``."""
    gen = as_generator(rng)
    U = np.asarray(U, dtype=float)
    if not isinstance(Z, EmpiricalCentroidBody):
        from .radii import rotation_intersection_radius

        return rotation_intersection_radius(Z, U, config, gen)
    X, q, n = Z.X, Z.q, Z.dim
    XU = X @ U.T  # rows U X_i: the sample of U Z_q

    def touch(v, w):
        # h_{Z ∩ UZ}(v) = min_w h_Z(v - w) + h_{UZ}(w).  When only one body's
        # constraint is active the minimiser sits where a summand is not
        # smooth (w = 0 or w = v), so those two cases are checked first.
        x1 = power_value_grad_hess(X, v, q, hess=False)[1]
        if float(Z.gauge((U.T @ x1)[None, :])[0]) <= 1.0 + 1e-12:
            return x1, None
        x2 = U @ power_value_grad_hess(X, U.T @ v, q, hess=False)[1]
        if float(Z.gauge(x2[None, :])[0]) <= 1.0 + 1e-12:
            return x2, None
        if w is None:
            # Any multiple of v makes the Hessian singular; tilt the start towards U v.
            e = U @ v - (v @ U @ v) * v
            ne = np.linalg.norm(e)
            w = 0.5 * v + (0.25 * e / ne if ne > 1e-8 else 0.0)

        def fun(w_):
            h1, g1, H1 = power_value_grad_hess(X, v - w_, q)
            h2, g2, H2 = power_value_grad_hess(XU, w_, q)
            return h1 + h2, g2 - g1, H1 + H2

        w, _ = _newton(fun, w)
        _, g1, _ = power_value_grad_hess(X, v - w, q, hess=False)
        return g1, w

    starts = _start_directions(X, q, n, config.n_starts, config.n_coarse, gen)
    best = None
    for u0 in starts:
        r, u = _farthest_point(touch, u0)
        if best is None or r > best[0]:
            best = (r, u)
    u = best[1]
    g = max(float(Z.gauge(u[None, :])[0]), float(Z.gauge((U.T @ u)[None, :])[0]))
    return RadiusResult(1.0 / g, u, int(config.n_coarse), extra={"ascent_value": best[0]})


def _support_objective(mu, q, F, N, gen, method):
    """(objective, gradient, exact?) for ``u -> h_{Z_q(mu)}(F u)`` on a fixed sample."""
    if method != "mc" and mu.has_moment_oracle(q):
        frame = F.frame
        return (lambda U: mu.abs_moment(U @ frame.T, q) ** (1.0 / q)), None, True
    if method == "exact":
        raise QOutOfRange("no moment oracle for this measure")
    Y = mu.sample(int(N), gen) @ F.frame

    def obj(U):
        a = Y @ U.T
        with np.errstate(divide="ignore"):
            return np.exp((_lse(q * np.log(np.abs(a))) - math.log(len(Y))) / q)

    def grad(U):
        a = Y @ U.T
        h, r1, _ = _power_parts(a, q)
        return (h * (Y.T @ r1)).T

    return obj, grad, False


def polar_centroid_section_radius(mu: LogConcaveMeasure, q: float, F: Subspace, N: int = 20_000,
                                  config: MaximizerConfig = ZQ_CONFIG, rng=None, method: str = "auto") -> RadiusResult:
    """``R(Z_q° ∩ F) = 1 / min_{θ in S_F} h_{Z_q}(θ)`` with one shared sample."""
    gen = as_generator(rng)
    obj, grad, _ = _support_objective(mu, q, F, N, gen, method)
    ngrad = None if grad is None else (lambda U: -grad(U))
    r = sphere_maximize(lambda U: -obj(U), F.dim, config, gen, gradient=ngrad)
    return RadiusResult(-1.0 / r.value, r.argmax_direction, r.n_evals)


def zq_projection_radius(mu: LogConcaveMeasure, q: float, F: Subspace, N: int = 20_000,
                         config: MaximizerConfig = ZQ_CONFIG, rng=None, method: str = "auto") -> RadiusResult:
    """``R(P_F Z_q(mu)) = max_{θ in S_F} h_{Z_q}(θ)``."""
    gen = as_generator(rng)
    obj, grad, _ = _support_objective(mu, q, F, N, gen, method)
    return sphere_maximize(obj, F.dim, config, gen, gradient=grad)
