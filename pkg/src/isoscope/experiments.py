"""Declarative parameter sweeps with CSV output.

Each experiment maps a cell ``(n, value, trial)`` to one row: an estimate, a
reference scale (the bound's right-hand side without its unknown constant)
and their ratio.  Randomness for a cell comes from a stream keyed by
``(seed, n, value, trial, purpose)``, so rows do not depend on scheduling and
two experiments that measure the same quantity on the same cell draw the
same subspaces.
"""
from __future__ import annotations

import csv
import io
import json
import math
import time
import traceback
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone

import numpy as np

from . import __version__
from .centroid import (
    EmpiricalCentroidBody,
    centroid_body,
    polar_centroid_section_radius,
    zq_projection_radius,
    zq_rotation_radius,
    zq_section_radius,
    ZQ_CONFIG,
)
from .errors import ConfigError
from .functionals import centroid_mean_width, mean_width, psi_alpha_norm, psi_roots, vrad_section
from .geometry import (
    Ball,
    ConvexBody,
    Section,
    Subspace,
    body_from_dict,
    log_ball_volume,
)
from .measures import LogConcaveMeasure, UniformOnBody, hit_and_run, measure_from_dict
from .radii import MaximizerConfig, gelfand_upper, section_radius, sphere_maximize
from .rng import RngStream, sample_grassmannian, sample_orthogonal

CSV_FIELDS = ["experiment", "n", "k_or_q", "trial", "seed", "estimate", "stderr",
              "reference_scale", "ratio", "wall_ms"]

# Purpose tags for derived streams.
P_SUBSPACE, P_MAXIMIZE, P_SAMPLE, P_DIRECTIONS, P_AUX = 1, 2, 3, 4, 5


@dataclass
class ExperimentSpec:
    name: str
    dims: list
    grid: list
    trials: int = 1
    samples: int = 20_000
    seed: int = 0
    body: dict | None = None
    measure: dict | None = None
    params: dict = field(default_factory=dict)
    output: str | None = None
    threads: int = 1
    timing: bool = True

    def __post_init__(self):
        if self.name not in EXPERIMENTS:
            raise ConfigError("name", f"unknown experiment {self.name!r}")
        if not self.dims:
            raise ConfigError("dims", "dimension grid must be nonempty")
        if not self.grid:
            raise ConfigError("grid", "swept grid must be nonempty")
        if int(self.trials) < 1:
            raise ConfigError("trials", "need at least one trial")
        self.dims = [int(n) for n in self.dims]
        self.grid = [float(v) for v in self.grid]
        self.trials = int(self.trials)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentSpec":
        if not isinstance(d, dict):
            raise ConfigError("config", "experiment config must be a JSON object")
        known = {f for f in cls.__dataclass_fields__}
        extra = set(d) - known
        if extra:
            raise ConfigError(sorted(extra)[0], "unknown config key")
        for key in ("name", "dims", "grid"):
            if key not in d:
                raise ConfigError(key, "missing required key")
        return cls(**d)

    def to_dict(self):
        return asdict(self)


@dataclass
class ResultRow:
    experiment: str
    n: int
    k_or_q: float
    trial: int
    seed: int
    estimate: float
    stderr: float
    reference_scale: float
    ratio: float
    wall_ms: float | None
    flags: dict = field(default_factory=dict)

    def csv_values(self):
        def fmt(x):
            if x is None:
                return ""
            if isinstance(x, float):
                return repr(x)
            return str(x)

        return [fmt(getattr(self, f)) for f in CSV_FIELDS]


# --------------------------------------------------------------------------
# Cell context


class Cell:
    def __init__(self, spec: ExperimentSpec, n: int, value: float, trial: int):
        self.spec = spec
        self.n = n
        self.value = value
        self.trial = trial
        root = RngStream(spec.seed).derive(n).derive(int(round(value * 1e6)))
        self.cell_stream = root
        self.stream = root.derive(trial)
        self.params = spec.params

    def gen(self, purpose):
        return self.stream.derive(purpose).generator()

    def shared_gen(self, purpose):
        """A stream shared by all trials of the cell (per-cell constants)."""
        return self.cell_stream.derive(1 << 20).derive(purpose).generator()

    def body(self) -> ConvexBody:
        if self.spec.body is None:
            raise ConfigError("body", "this experiment needs a body")
        return body_from_dict(self.spec.body, self.n)

    def measure(self) -> LogConcaveMeasure:
        if self.spec.measure is not None:
            return measure_from_dict(self.spec.measure, self.n)
        if self.spec.body is not None:
            return UniformOnBody(self.body())
        raise ConfigError("measure", "this experiment needs a measure or body")

    def param(self, key, default):
        return self.params.get(key, default)

    def maximizer(self, default=None):
        cfg = self.params.get("maximizer")
        if cfg:
            return MaximizerConfig(**cfg)
        return default or MaximizerConfig()

    def codim(self):
        """The swept value as a codimension: fractions are read as γ n."""
        v = self.value
        k = int(round(v * self.n)) if 0 < v < 1 else int(round(v))
        if not 1 <= k <= self.n - 1:
            raise ConfigError("grid", f"codimension {k} out of range for n={self.n}")
        return k


def length_scale(obj) -> float:
    """``det(Cov)^{1/2n}``: equals L_K for an isotropic body and 1 for an isotropic measure."""
    cov = obj.covariance()
    sign, logdet = np.linalg.slogdet(cov)
    return math.exp(logdet / (2 * cov.shape[0]))


def _body_scale(cell, body):
    try:
        return length_scale(body)
    except Exception:
        X = UniformOnBody(body).sample(cell.spec.samples, cell.shared_gen(P_AUX))
        return math.exp(np.linalg.slogdet(np.cov(X.T))[1] / (2 * body.dim))


def _measure_scale(cell, mu):
    try:
        return length_scale(mu)
    except Exception:
        X = mu.sample(cell.spec.samples, cell.shared_gen(P_AUX))
        return math.exp(np.linalg.slogdet(np.cov(X.T))[1] / (2 * mu.dim))


# --------------------------------------------------------------------------
# Experiments: each returns (estimate, stderr, reference_scale, flags)


def _random_section_radius(cell, body):
    k = cell.codim()
    F = sample_grassmannian(cell.n, cell.n - k, cell.gen(P_SUBSPACE))
    r = section_radius(body, F, cell.maximizer(), cell.gen(P_MAXIMIZE))
    return k, r.value


def exp_random_section(cell):
    body = cell.body()
    k, R = _random_section_radius(cell, body)
    n, L = cell.n, _body_scale(cell, body)
    return R, 0.0, n / max(k, math.sqrt(n)) * math.sqrt(n) * L, {"symmetric": body.symmetric}


def exp_section_sqrt_gamma(cell):
    body = cell.body()
    k, R = _random_section_radius(cell, body)
    n, L = cell.n, _body_scale(cell, body)
    return R, 0.0, math.sqrt(n / k) * math.sqrt(n) * L, {"symmetric": body.symmetric}


def exp_section_lower(cell):
    body = cell.body()
    k, R = _random_section_radius(cell, body)
    n, L = cell.n, _body_scale(cell, body)
    flags = {"k_le_sqrt_n": k <= math.sqrt(n)}
    return R, 0.0, math.sqrt(n) * L, flags


def exp_lowmstar(cell):
    body = cell.body()
    k, R = _random_section_radius(cell, body)
    w = mean_width(body, cell.param("n_dirs", 20_000), cell.shared_gen(P_DIRECTIONS))
    return R, 0.0, math.sqrt(cell.n / k) * w.value, {"mean_width": w.value}


def exp_meanwidth_scaling(cell):
    body = cell.body()
    n = cell.n
    w = mean_width(body, cell.param("n_dirs", 20_000), cell.gen(P_DIRECTIONS))
    L = _body_scale(cell, body)
    return w.value, w.stderr, math.sqrt(n) * math.log(n) ** 2 * L, {}


def _fraction(hit, N):
    count = int(np.count_nonzero(hit))
    flags = {"count": count}
    if count == 0:
        # Half-count correction keeps the ratio positive; flagged as an upper bound.
        flags["zero_count"] = True
        p = 0.5 / N
    else:
        p = count / N
    return p, math.sqrt(max(p * (1 - p), 0.25 / N) / N), flags


def exp_tail_fraction(cell):
    body = cell.body()
    n = cell.n
    k = int(cell.param("k", n // 2))
    c = cell.value
    F = sample_grassmannian(n, n - k, cell.gen(P_SUBSPACE))
    sec = Section(body, F)
    N = cell.spec.samples
    X = hit_and_run(sec, N, cell.gen(P_SAMPLE))
    L = _body_scale(cell, body)
    p, se, flags = _fraction(np.linalg.norm(X, axis=1) >= c * math.sqrt(n) * L, N)
    flags["k"] = k
    return p, se, math.exp(-(k + math.sqrt(n))), flags


def exp_volume_fraction(cell):
    body = cell.body()
    m = body.dim
    eps = cell.value
    R = body.radius()
    flags = {}
    if R is None:
        R = section_radius(body, None, cell.maximizer(), cell.gen(P_MAXIMIZE)).value
        flags["radius"] = "maximized"
    N = cell.spec.samples
    X = UniformOnBody(body).sample(N, cell.gen(P_SAMPLE))
    p, se, f2 = _fraction(np.linalg.norm(X, axis=1) >= eps * R, N)
    flags.update(f2)
    return p, se, 0.5 * (1 - eps) ** m, flags


def exp_polar_identity(cell):
    """Both sides of the polar-coordinates identity for sections of codimension k.

    Left: mean over random F of ∫_{K∩F} |x|^{k+q} dx, each integral written
    radially inside F as  m ω_m/(n+q) · E_θ ρ_K(θ)^{n+q}  with m = n-k.
    Right: (m ω_m/(n ω_n)) · |K| · E_K |x|^q.
    """
    body = cell.body()
    n, q = cell.n, cell.value
    k = int(cell.param("k", 2))
    m = n - k
    n_sub = int(cell.param("n_subspaces", 200))
    per = int(cell.param("dirs_per_subspace", 200))
    gen = cell.gen(P_SUBSPACE)
    vals = []
    for _ in range(n_sub):
        F = sample_grassmannian(n, m, gen)
        u = gen.standard_normal((per, m))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        rho = 1.0 / body.gauge(F.embed(u))
        vals.append(np.mean(rho ** (n + q)))
    vals = np.asarray(vals)
    front = math.exp(math.log(m) + log_ball_volume(m)) / (n + q)
    lhs = front * float(vals.mean())
    lhs_se = front * float(vals.std(ddof=1)) / math.sqrt(len(vals))
    vol = body.volume()
    X = UniformOnBody(body).sample(cell.spec.samples, cell.gen(P_SAMPLE))
    const = math.exp(math.log(m) + log_ball_volume(m) - math.log(n) - log_ball_volume(n))
    moment = np.linalg.norm(X, axis=1) ** q
    rhs = const * vol * float(moment.mean())
    flags = {"k": k, "rhs_stderr": const * vol * float(moment.std(ddof=1)) / math.sqrt(len(moment))}
    if isinstance(body, Ball):
        r = body.r
        flags["closed_form"] = m * math.exp(log_ball_volume(m)) * r ** (n + q) / (n + q)
    return lhs, lhs_se, rhs, flags


def _zq_body(cell, q):
    mu = cell.measure()
    method = cell.param("method", "auto")
    N = int(cell.param("zq_samples", min(cell.spec.samples, 10_000)))
    return centroid_body(mu, q, N, cell.gen(P_SAMPLE), method), mu


def _zq_config(cell):
    return cell.maximizer(ZQ_CONFIG)


def exp_zq_section(cell):
    q = cell.value
    n = cell.n
    k = int(round(cell.param("gamma", 0.5) * n))
    Z, _ = _zq_body(cell, q)
    F = sample_grassmannian(n, n - k, cell.gen(P_SUBSPACE))
    r = zq_section_radius(Z, F, _zq_config(cell), cell.gen(P_MAXIMIZE))
    flags = {"k": k, "empirical": isinstance(Z, EmpiricalCentroidBody)}
    return r.value, 0.0, math.sqrt(q), flags


def exp_zq_rotation(cell):
    q = cell.value
    Z, _ = _zq_body(cell, q)
    U = sample_orthogonal(cell.n, cell.gen(P_SUBSPACE))
    r = zq_rotation_radius(Z, U, _zq_config(cell), cell.gen(P_MAXIMIZE))
    return r.value, 0.0, math.sqrt(q), {"empirical": isinstance(Z, EmpiricalCentroidBody)}


def exp_zq_polar(cell):
    q, n = cell.value, cell.n
    k = int(cell.param("k", n // 2))
    mu = cell.measure()
    F = sample_grassmannian(n, n - k, cell.gen(P_SUBSPACE))
    N = int(cell.param("zq_samples", min(cell.spec.samples, 20_000)))
    r = polar_centroid_section_radius(mu, q, F, N, _zq_config(cell), cell.gen(P_SAMPLE), cell.param("method", "auto"))
    ref = min(1.0, (n / k) * math.log(math.e + n / k) / min(math.sqrt(q), k**0.25))
    return r.value, 0.0, ref, {"k": k}


def _width_reference(q, n, scale):
    return math.log(1 + q) * max(q * math.log(1 + q) / math.sqrt(n), math.sqrt(q)) * scale


def exp_zq_width(cell):
    q, n = cell.value, cell.n
    mu = cell.measure()
    est = centroid_mean_width(mu, q, int(cell.param("n_dirs", 64)), int(cell.param("zq_samples", 20_000)),
                              cell.stream.derive(P_DIRECTIONS), cell.param("method", "auto"))
    scale = _measure_scale(cell, mu)
    return est.value, est.stderr, _width_reference(q, n, scale), {"method": est.method}


def _support_max(Z, F, config, gen):
    if not isinstance(Z, EmpiricalCentroidBody):
        from .radii import projection_radius

        return projection_radius(Z, F, config, gen).value
    frame = F.frame
    r = sphere_maximize(lambda U: Z.support(U @ frame.T), F.dim, config, gen,
                        gradient=lambda U: Z.support_gradient(U @ frame.T) @ frame)
    return r.value


def exp_zq_projection(cell):
    q, n = cell.value, cell.n
    k = int(cell.param("k", n // 2))
    Z, _ = _zq_body(cell, q)
    F = sample_grassmannian(n, k, cell.gen(P_SUBSPACE))
    cfg = _zq_config(cell)
    R_proj = _support_max(Z, F, cfg, cell.gen(P_MAXIMIZE))
    full = Subspace(np.eye(n))
    R_full = _support_max(Z, full, cfg, cell.gen(P_AUX))
    w = mean_width(Z, int(cell.param("n_dirs", 2000)), cell.gen(P_DIRECTIONS)).value
    ref = max(w, R_full * math.sqrt(k / n))
    return R_proj, 0.0, ref, {"k": k, "width": w, "radius": R_full}


def subgaussian_dimension(n: int):
    """k = min(ceil(log n)^4, n/2) and the regime that applied."""
    full = int(math.ceil(math.log(n))) ** 4
    cap = max(1, n // 2)
    return (full, "log4") if full <= cap else (cap, "capped_n_over_2")


def exp_subgaussian(cell):
    """Sup of the ψ₂ norm over sampled directions of a random F, on one fixed sample.

    Besides ``n_dirs`` Haar directions of F the normalised projections of the
    coordinate axes are included (``include_axis_projections``): for product
    measures those are the directions where heavy tails concentrate.
    """
    n = cell.n
    k, regime = subgaussian_dimension(n)
    k = int(cell.param("k", k))
    mu = cell.measure()
    F = sample_grassmannian(n, k, cell.gen(P_SUBSPACE))
    N = cell.spec.samples
    XF = mu.sample(N, cell.gen(P_SAMPLE)) @ F.frame
    gd = cell.gen(P_DIRECTIONS)
    U = gd.standard_normal((int(cell.param("n_dirs", 512)), k))
    if cell.param("include_axis_projections", True):
        U = np.concatenate([U, F.frame])
    U /= np.linalg.norm(U, axis=1, keepdims=True)
    roots = np.concatenate([psi_roots(np.abs(XF @ U[i : i + 64].T), 2.0) for i in range(0, len(U), 64)])
    j = int(np.argmax(roots))
    top = psi_alpha_norm(None, U[j], 2.0, sample=XF, rng=gd)
    scale = _measure_scale(cell, mu)
    flags = {"k": k, "regime": regime, "diverging": bool(top.flags.get("diverging", False)),
             "tail_coefficient": top.flags["tail_coefficient"], "n_directions": len(U)}
    return top.value, top.stderr, math.log(n) ** 2 * scale, flags


def exp_marginal_vrad(cell):
    t = int(cell.value)
    n = cell.n
    q = float(cell.param("q", 2.0))
    mu = cell.measure()
    E = sample_grassmannian(n, t, cell.gen(P_SUBSPACE))
    from .measures import Marginal

    marg = Marginal(mu, E)
    N = int(cell.param("zq_samples", min(cell.spec.samples, 20_000)))
    Z = centroid_body(marg, q, N, cell.gen(P_SAMPLE), cell.param("method", "auto"))
    v = vrad_section(Z, Subspace(np.eye(t)), int(cell.param("n_dirs", 500)), cell.gen(P_DIRECTIONS))
    ref = math.sqrt(q / t) * max(math.sqrt(q), math.sqrt(t))
    return v.value, v.stderr, ref, {"q": q, **v.flags}


def exp_gelfand(cell):
    t = int(cell.value)
    n = cell.n
    if not 1 <= 2 * t <= n - 1:
        raise ConfigError("grid", f"need 1 <= 2t <= n-1, got t={t} at n={n}")
    body = cell.body()
    n_sub = int(cell.param("n_subspaces", 8))
    cfg = cell.maximizer()
    c2t = gelfand_upper(body, 2 * t, n_sub, cfg, cell.gen(P_MAXIMIZE))
    gen = cell.gen(P_SUBSPACE)
    wt = 0.0
    for _ in range(n_sub):
        E = sample_grassmannian(n, t, gen)
        wt = max(wt, vrad_section(body, E, int(cell.param("n_dirs", 5000)), gen).value)
    ref = (n / t) * math.log(math.e + n / t) * wt
    return c2t.value, 0.0, ref, {"w_t_sampled": wt}


def exp_gelfand_transfer(cell):
    n = cell.n
    k = cell.codim()
    t = int(cell.param("t", max(1, k // 4)))
    if not k > 2 * t:
        raise ConfigError("params.t", f"need k > 2t, got k={k}, t={t}")
    body = cell.body()
    cfg = cell.maximizer()
    best = gelfand_upper(body, t, int(cell.param("n_subspaces", 8)), cfg, cell.gen(P_AUX)).value
    F = sample_grassmannian(n, n - k, cell.gen(P_SUBSPACE))
    R = section_radius(body, F, cfg, cell.gen(P_MAXIMIZE)).value
    # LPT scale with E of dimension m = n - t and F of dimension s = n - k.
    ref = best * (n / t) ** (k / (2.0 * (k - t)))
    return R, 0.0, ref, {"t": t, "best_codim_t": best}


EXPERIMENTS = {
    "thm12_section": exp_random_section,
    "q11_conjecture": exp_section_sqrt_gamma,
    "prop34_lower": exp_section_lower,
    "lemma31_tail": exp_tail_fraction,
    "lemma32_klartag": exp_volume_fraction,
    "polar_identity": exp_polar_identity,
    "lowmstar": exp_lowmstar,
    "meanwidth_scaling": exp_meanwidth_scaling,
    "thm13_zq_section": exp_zq_section,
    "thm13_zq_rotation": exp_zq_rotation,
    "thm46_polar": exp_zq_polar,
    "thm51_zq_width": exp_zq_width,
    "prop52_projection": exp_zq_projection,
    "thm16_subgaussian": exp_subgaussian,
    "thm41_vt": exp_marginal_vrad,
    "gem2_gelfand": exp_gelfand,
    "lpt_transfer": exp_gelfand_transfer,
}


# --------------------------------------------------------------------------
# Running


def _run_cell(spec: ExperimentSpec, n: int, value: float, trial: int) -> ResultRow:
    t0 = time.perf_counter()
    flags = {}
    try:
        cell = Cell(spec, n, value, trial)
        est, se, ref, flags = EXPERIMENTS[spec.name](cell)
        est, se, ref = float(est), float(se), float(ref)
        ratio = est / ref if ref != 0 else math.nan
    except ConfigError:
        raise
    except Exception as exc:  # a failed cell becomes an error row
        est = se = ref = ratio = math.nan
        flags = {"error": f"{type(exc).__name__}: {exc}", "traceback": traceback.format_exc(limit=3)}
    wall = (time.perf_counter() - t0) * 1e3 if spec.timing else None
    return ResultRow(spec.name, n, value, trial, spec.seed, est, se, ref, ratio, wall, flags)


def run_experiment(spec: ExperimentSpec, threads: int | None = None) -> list[ResultRow]:
    """All rows in (n, value, trial) order, independent of the worker count."""
    tasks = [(n, v, t) for n in spec.dims for v in spec.grid for t in range(spec.trials)]
    workers = max(1, int(threads if threads is not None else spec.threads))
    # Validate configuration errors eagerly on the first cell's inputs.
    if workers == 1:
        return [_run_cell(spec, *task) for task in tasks]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda task: _run_cell(spec, *task), tasks))


def rows_to_csv(rows: list[ResultRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_FIELDS)
    for r in rows:
        w.writerow(r.csv_values())
    return buf.getvalue()


def metadata(spec: ExperimentSpec, rows: list[ResultRow]) -> dict:
    meta = {
        "spec": spec.to_dict(),
        "version": __version__,
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "row_flags": [
            {"n": r.n, "k_or_q": r.k_or_q, "trial": r.trial, "flags": _jsonable(r.flags)} for r in rows
        ],
    }
    if spec.name == "thm16_subgaussian":
        meta["dimension_rule"] = "k = min(ceil(log n)^4, n/2); the regime per row is in row_flags"
    return meta


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        return float(x) if math.isfinite(float(x)) else str(float(x))
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.bool_,)):
        return bool(x)
    return x


def write_results(spec: ExperimentSpec, rows: list[ResultRow], path: str) -> str:
    """Write the CSV at ``path`` and the metadata sidecar at ``path + '.json'``."""
    with open(path, "w", newline="") as fh:
        fh.write(rows_to_csv(rows))
    with open(path + ".json", "w") as fh:
        json.dump(metadata(spec, rows), fh, indent=2)
    return path


# --------------------------------------------------------------------------
# Summaries


@dataclass
class CellSummary:
    n: int
    k_or_q: float
    trials: int
    mean_ratio: float
    max_ratio: float
    min_ratio: float
    success_frequency: float


@dataclass
class Summary:
    cells: list
    slope: float
    slope_stderr: float
    against: str
    n_errors: int

    def to_dict(self):
        return {
            "cells": [asdict(c) for c in self.cells],
            "slope": self.slope,
            "slope_stderr": self.slope_stderr,
            "against": self.against,
            "n_errors": self.n_errors,
        }


def fit_slope(x, y):
    """Least-squares slope of y on x with its standard error."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) < 2 or np.ptp(x) == 0:
        return 0.0, math.inf
    A = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    dof = len(x) - 2
    sxx = float(np.sum((x - x.mean()) ** 2))
    s2 = float(resid @ resid) / dof if dof > 0 else 0.0
    return float(coef[0]), math.sqrt(s2 / sxx)


def summarize(rows: list[ResultRow], bracket=(0.0, math.inf), against: str = "auto") -> Summary:
    """Per-cell ratio statistics, success frequencies and a log-log trend.

    ``against`` picks the regressor of log-ratio: ``"n"``, ``"k_or_q"``,
    ``"inv_k_or_q"`` (log of 1/value); ``"auto"`` uses n when it varies.
    """
    ok = [r for r in rows if math.isfinite(r.ratio) and r.ratio > 0]
    lo, hi = bracket
    cells = {}
    for r in ok:
        cells.setdefault((r.n, r.k_or_q), []).append(r.ratio)
    summary_cells = []
    for (n, v), ratios in sorted(cells.items()):
        a = np.asarray(ratios)
        freq = float(np.mean((a >= lo) & (a <= hi)))
        summary_cells.append(CellSummary(n, v, len(a), float(a.mean()), float(a.max()), float(a.min()), freq))
    if against == "auto":
        against = "n" if len({r.n for r in ok}) > 1 else "k_or_q"
    if against == "n":
        xs = [math.log(r.n) for r in ok]
    elif against == "k_or_q":
        xs = [math.log(r.k_or_q) for r in ok]
    elif against == "inv_k_or_q":
        xs = [-math.log(r.k_or_q) for r in ok]
    else:
        raise ValueError(f"unknown regressor {against!r}")
    slope, se = fit_slope(xs, [math.log(r.ratio) for r in ok])
    return Summary(summary_cells, slope, se, against, len(rows) - len(ok))
