"""Maximisation over spheres of subspaces: section, projection and rotation radii."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ObjectiveNonFinite, OracleUnavailable
from .geometry import ConvexBody, Subspace
from .rng import as_generator, sample_grassmannian

# Initial tangent step (radians, roughly) and the floor of the difference stencil.
INITIAL_STEP = 0.2
MIN_STENCIL = 1e-5


@dataclass(frozen=True)
class MaximizerConfig:
    n_starts: int = 64
    n_coarse: int = 4096
    refine_steps: int = 200
    step_tolerance: float = 1e-8

    def __post_init__(self):
        if min(self.n_starts, self.n_coarse, self.refine_steps) < 1 or self.step_tolerance <= 0:
            raise ValueError("maximizer settings must be positive")


@dataclass
class RadiusResult:
    value: float
    argmax_direction: np.ndarray
    n_evals: int
    certified: str = "lower-bound-only"
    extra: dict = field(default_factory=dict)

    def to_dict(self):
        d = {
            "value": self.value,
            "argmax_direction": np.asarray(self.argmax_direction).tolist(),
            "n_evals": self.n_evals,
            "certified": self.certified,
        }
        d.update(self.extra)
        return d


def _normalize(X):
    return X / np.linalg.norm(X, axis=-1, keepdims=True)


def sphere_maximize(objective, dim: int, config: MaximizerConfig | None = None, rng=None,
                    gradient=None, starts: np.ndarray | None = None) -> RadiusResult:
    """Multi-start ascent of ``objective`` over ``S^{dim-1}``.

    ``objective`` maps a ``(B, dim)`` batch of unit vectors to ``(B,)``.
    Refinement uses a central-difference gradient whose stencil width tracks
    the current step (never below ``MIN_STENCIL``); when the gradient move
    fails, the best stencil point is taken if it improves.  Steps grow by 1.5
    on success and halve on failure until they fall below the tolerance.
    An analytic ``gradient`` (same batch convention) replaces the stencil.
    """
    config = config or MaximizerConfig()
    gen = as_generator(rng)

    def f(X):
        v = np.asarray(objective(X), dtype=float)
        if not np.all(np.isfinite(v)):
            raise ObjectiveNonFinite("objective returned a non-finite value")
        return v

    if dim == 1:
        X = np.array([[1.0], [-1.0]])
        v = f(X)
        j = int(np.argmax(v))
        return RadiusResult(float(v[j]), X[j], 2)

    X = _normalize(gen.standard_normal((config.n_coarse, dim)))
    if starts is not None:
        X = np.concatenate([_normalize(np.atleast_2d(starts)), X])
    v = f(X)
    n_evals = len(X)
    order = np.argsort(-v, kind="stable")[: config.n_starts]
    P = X[order].copy()
    fv = v[order].copy()
    step = np.full(len(P), INITIAL_STEP)
    E = np.eye(dim)
    for _ in range(config.refine_steps):
        active = np.where(step > config.step_tolerance)[0]
        if active.size == 0:
            break
        Pa, s = P[active], step[active]
        if gradient is not None:
            g = np.asarray(gradient(Pa), dtype=float)
        else:
            h = np.maximum(s, MIN_STENCIL)[:, None, None]
            plus = _normalize(Pa[:, None, :] + h * E)
            minus = _normalize(Pa[:, None, :] - h * E)
            na = len(active)
            fp = f(plus.reshape(-1, dim)).reshape(na, dim)
            fm = f(minus.reshape(-1, dim)).reshape(na, dim)
            n_evals += 2 * na * dim
            g = (fp - fm) / (2.0 * h[:, :, 0])
        g = g - (g * Pa).sum(axis=1, keepdims=True) * Pa
        gn = np.linalg.norm(g, axis=1, keepdims=True)
        gn[gn == 0] = 1.0
        cand = _normalize(Pa + s[:, None] * g / gn)
        fc = f(cand)
        n_evals += len(cand)
        better = fc > fv[active]
        P[active[better]] = cand[better]
        fv[active[better]] = fc[better]
        ok = better.copy()
        if gradient is None:
            stencil = np.concatenate([fp, fm], axis=1)
            j = stencil.argmax(axis=1)
            best_st = stencil[np.arange(len(active)), j]
            use = (~better) & (best_st > fv[active])
            if use.any():
                pts = np.concatenate([plus, minus], axis=1)[np.arange(len(active)), j]
                P[active[use]] = pts[use]
                fv[active[use]] = best_st[use]
            ok |= use
        step[active[ok]] *= 1.5
        step[active[~ok]] *= 0.5
    j = int(np.argmax(fv))  # first maximal index: ties resolved by first found
    return RadiusResult(float(fv[j]), P[j].copy(), int(n_evals))


def section_radius(body: ConvexBody, F: Subspace | None = None, config: MaximizerConfig | None = None,
                   rng=None) -> RadiusResult:
    """``R(K ∩ F)``: maximise the radial function over ``S_F``."""
    if not body.has_gauge():
        raise OracleUnavailable(f"{body.type_name} has no gauge route")
    if F is None:
        F = Subspace(np.eye(body.dim))
    frame = F.frame

    def radial(U):
        with np.errstate(divide="ignore"):
            return 1.0 / body.gauge(U @ frame.T)

    return sphere_maximize(radial, F.dim, config, rng)


def projection_radius(body: ConvexBody, F: Subspace | None = None, config: MaximizerConfig | None = None,
                      rng=None) -> RadiusResult:
    """``R(P_F K)``: maximise the support function over ``S_F``."""
    if not body.has_support():
        raise OracleUnavailable(f"{body.type_name} has no support route")
    if F is None:
        F = Subspace(np.eye(body.dim))
    frame = F.frame
    return sphere_maximize(lambda U: body.support(U @ frame.T), F.dim, config, rng)


def gelfand_upper(body: ConvexBody, t: int, n_subspaces: int = 8, config: MaximizerConfig | None = None,
                  rng=None) -> RadiusResult:
    """Smallest sampled ``R(K ∩ F)`` over Haar ``F`` of codimension ``t``."""
    n = body.dim
    if not 0 <= t <= n - 1:
        raise ValueError("need 0 <= t <= n - 1")
    gen = as_generator(rng)
    if t == 0:
        return section_radius(body, None, config, gen)
    best = None
    evals = 0
    for _ in range(int(n_subspaces)):
        F = sample_grassmannian(n, n - t, gen)
        r = section_radius(body, F, config, gen)
        evals += r.n_evals
        if best is None or r.value < best[0].value:
            best = (r, F)
    r, F = best
    return RadiusResult(r.value, r.argmax_direction, evals, extra={"frame": F.frame.tolist()})


def rotation_intersection_radius(body: ConvexBody, U, config: MaximizerConfig | None = None,
                                 rng=None) -> RadiusResult:
    """``R(K ∩ U K)`` via the radial function ``min(ρ_K(θ), ρ_K(U^T θ))``."""
    if not body.has_gauge():
        raise OracleUnavailable(f"{body.type_name} has no gauge route")
    U = np.asarray(U, dtype=float)

    def radial(T):
        g = np.maximum(body.gauge(T), body.gauge(T @ U))
        with np.errstate(divide="ignore"):
            return 1.0 / g

    return sphere_maximize(radial, body.dim, config, rng)
