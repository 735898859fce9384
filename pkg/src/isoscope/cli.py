"""Command-line front end.

Every output carries the seed and the resolved configuration.  When
``--seed`` is omitted a random seed is drawn and recorded in the output.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import secrets
import sys

import numpy as np

from .centroid import EmpiricalCentroidBody, zq_rotation_radius, zq_section_radius
from .errors import ConfigError, IsoscopeError, VolumeUnavailable
from .experiments import EXPERIMENTS, ExperimentSpec, rows_to_csv, run_experiment, summarize, write_results
from .functionals import (
    centroid_mean_width,
    centroid_support,
    mean_width,
    moment_radius,
    psi2_support,
    psi_alpha_norm,
    vrad_section,
)
from .geometry import ConvexBody, Subspace, body_from_dict
from .isotropy import isotropic_constant_estimate, isotropic_transform
from .measures import LogConcaveMeasure, UniformOnBody, measure_from_dict
from .radii import MaximizerConfig, gelfand_upper, projection_radius, section_radius, sphere_maximize
from .rng import RngStream, sample_grassmannian, sample_orthogonal

FUNCTIONALS = ("centroid", "moment", "meanwidth", "centroid_meanwidth", "vrad", "psi", "psi2")
RADII = ("section", "projection", "gelfand", "rotation")


def _load_json(text: str, key: str):
    """Inline JSON or a path to a JSON file."""
    if text is None:
        raise ConfigError(key, "missing required option")
    src = text
    if not text.lstrip().startswith(("{", "[")) and os.path.exists(text):
        with open(text) as fh:
            src = fh.read()
    try:
        return json.loads(src)
    except json.JSONDecodeError as exc:
        raise ConfigError(key, f"malformed JSON ({exc.msg} at line {exc.lineno} column {exc.colno})") from exc


def _body(args) -> ConvexBody:
    return body_from_dict(_load_json(args.body, "--body"), where="body")


def _measure(args) -> LogConcaveMeasure:
    if args.measure is not None:
        return measure_from_dict(_load_json(args.measure, "--measure"), where="measure")
    if args.body is not None:
        return UniformOnBody(_body(args))
    raise ConfigError("--measure", "missing required option (or give --body for the uniform measure)")


def _vector(text, n, gen, key="--dir"):
    if text is None or text == "random":
        v = gen.standard_normal(n)
        return v / np.linalg.norm(v)
    v = np.asarray(_load_json(text, key), dtype=float)
    if v.shape != (n,):
        raise ConfigError(key, f"expected a vector of length {n}, got shape {v.shape}")
    return v


def _subspace(text, n, dim, gen, key="--subspace") -> Subspace:
    if text is None or text == "random":
        m = dim if dim is not None else max(1, n // 2)
        if not 1 <= m <= n:
            raise ConfigError("--dim", f"subspace dimension must lie in [1, {n}]")
        return sample_grassmannian(n, m, gen)
    if text.startswith("axes:"):
        try:
            m = int(text[5:])
        except ValueError as exc:
            raise ConfigError(key, f"bad axes spec {text!r}") from exc
        if not 1 <= m <= n:
            raise ConfigError(key, f"axes dimension must lie in [1, {n}]")
        return Subspace.axes(n, m)
    d = _load_json(text, key)
    frame = d.get("frame") if isinstance(d, dict) else d
    try:
        F = Subspace.span(np.asarray(frame, dtype=float))
    except (ValueError, TypeError) as exc:
        raise ConfigError(key, str(exc)) from exc
    if F.ambient_dim != n:
        raise ConfigError(key, f"frame lives in R^{F.ambient_dim}, body in R^{n}")
    return F


def _maximizer(args) -> MaximizerConfig:
    kw = {}
    for name in ("n_starts", "n_coarse", "refine_steps"):
        v = getattr(args, name, None)
        if v is not None:
            kw[name] = v
    try:
        return MaximizerConfig(**kw)
    except ValueError as exc:
        raise ConfigError("--starts", str(exc)) from exc


def _threads(args) -> int:
    if args.threads is not None:
        return args.threads
    env = os.environ.get("ISOSCOPE_THREADS")
    if env is None:
        return 1
    try:
        return max(1, int(env))
    except ValueError as exc:
        raise ConfigError("ISOSCOPE_THREADS", f"not an integer: {env!r}") from exc


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    return x


def _emit(payload: dict, args):
    text = json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n"
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _config_echo(args):
    skip = {"func", "output", "auto_seed"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


# --------------------------------------------------------------------------
# Subcommands


def cmd_isotropy(args):
    stream = RngStream(args.seed)
    body = _body(args)
    try:
        res = isotropic_transform(body, args.samples, stream.generator())
        out = res.to_dict()
    except VolumeUnavailable:
        # No closed-form volume: report L of the uniform measure when its density is known.
        L, se = isotropic_constant_estimate(UniformOnBody(body), args.samples, stream.generator())
        out = {"L": L, "stderr": se, "transform": None}
    out.update(seed=args.seed, config=_config_echo(args))
    _emit(out, args)


def cmd_estimate(args):
    stream = RngStream(args.seed)
    gen = stream.derive(1).generator()
    f = args.functional
    if f == "meanwidth":
        est = mean_width(_body(args), args.dirs, stream)
    elif f == "vrad":
        body = _body(args)
        F = _subspace(args.subspace, body.dim, args.dim, gen)
        est = vrad_section(body, F, args.dirs, stream)
    elif f == "moment":
        target = _body(args) if args.measure is None else _measure(args)
        est = moment_radius(target, args.q, args.samples, stream)
    else:
        mu = _measure(args)
        if f == "centroid":
            est = centroid_support(mu, args.q, _vector(args.dir, mu.dim, gen), args.samples, stream, args.method)
        elif f == "centroid_meanwidth":
            est = centroid_mean_width(mu, args.q, args.dirs, args.samples, stream, args.method)
        elif f == "psi":
            est = psi_alpha_norm(mu, _vector(args.dir, mu.dim, gen), args.alpha, args.samples, stream)
        else:
            est = psi2_support(mu, _vector(args.dir, mu.dim, gen), args.samples, stream, args.method)
    out = est.to_dict()
    out.update(seed=args.seed, config=_config_echo(args))
    _emit(out, args)


def cmd_radius(args):
    stream = RngStream(args.seed)
    gen_sub = stream.derive(1).generator()
    gen = stream.derive(2).generator()
    body = _body(args)
    cfg = _maximizer(args)
    kind = args.kind
    extra = {}
    if kind == "gelfand":
        if args.t is None:
            raise ConfigError("--t", "gelfand needs a codimension --t")
        res = gelfand_upper(body, args.t, args.subspaces, cfg, gen)
    elif kind == "rotation":
        if args.rotation in (None, "random"):
            U = sample_orthogonal(body.dim, gen_sub)
        else:
            U = np.asarray(_load_json(args.rotation, "--rotation"), dtype=float)
            if U.shape != (body.dim, body.dim) or not np.allclose(U.T @ U, np.eye(body.dim), atol=1e-8):
                raise ConfigError("--rotation", f"expected an orthogonal {body.dim} x {body.dim} matrix")
        extra["rotation"] = U
        if isinstance(body, EmpiricalCentroidBody):
            res = zq_rotation_radius(body, U, cfg, gen)
        else:
            from .radii import rotation_intersection_radius

            res = rotation_intersection_radius(body, U, cfg, gen)
    else:
        F = _subspace(args.subspace, body.dim, args.dim, gen_sub)
        extra["frame"] = F.frame
        if kind == "section":
            if isinstance(body, EmpiricalCentroidBody):
                res = zq_section_radius(body, F, cfg, gen)
            else:
                res = section_radius(body, F, cfg, gen)
        else:
            if isinstance(body, EmpiricalCentroidBody):
                frame = F.frame
                res = sphere_maximize(lambda U: body.support(U @ frame.T), F.dim, cfg, gen,
                                      gradient=lambda U: body.support_gradient(U @ frame.T) @ frame)
            else:
                res = projection_radius(body, F, cfg, gen)
    out = res.to_dict()
    out.update(extra)
    out.update(seed=args.seed, config=_config_echo(args))
    _emit(out, args)


def cmd_experiment(args):
    if args.action == "list":
        sys.stdout.write("\n".join(sorted(EXPERIMENTS)) + "\n")
        return
    if args.name is None:
        raise ConfigError("name", "experiment run needs an experiment name")
    cfg = {} if args.config is None else _load_json(args.config, "--config")
    if not isinstance(cfg, dict):
        raise ConfigError("--config", "config must be a JSON object")
    if "name" in cfg and cfg["name"] != args.name:
        raise ConfigError("name", f"config names {cfg['name']!r} but {args.name!r} was requested")
    cfg["name"] = args.name
    for key in ("seed", "trials", "samples", "output"):
        v = getattr(args, key)
        if v is not None:
            cfg[key] = v
    if "seed" not in cfg:
        cfg["seed"] = args.auto_seed
    if args.no_timing:
        cfg["timing"] = False
    spec = ExperimentSpec.from_dict(cfg)
    threads = _threads(args)
    rows = run_experiment(spec, threads)
    for r in rows:
        sys.stderr.write(f"{spec.name} n={r.n} value={r.k_or_q:g} trial={r.trial} ratio={r.ratio:.6g}\n")
    if spec.output:
        write_results(spec, rows, spec.output)
        summary = summarize(rows).to_dict()
        sys.stdout.write(json.dumps(_jsonable({"output": spec.output, "rows": len(rows), "seed": spec.seed,
                                               "summary": summary}), indent=2) + "\n")
    else:
        sys.stdout.write(rows_to_csv(rows))


# --------------------------------------------------------------------------
# Parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="isoscope", description="Numerical experiments on sections of isotropic convex bodies")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--seed", type=int, default=None, help="root seed (random and recorded when omitted)")
        sp.add_argument("--threads", type=int, default=None, help="worker threads (default $ISOSCOPE_THREADS or 1)")
        sp.add_argument("--output", default=None, help="write results here instead of stdout")

    s = sub.add_parser("isotropy", help="isotropic position and L_K of a body")
    s.add_argument("--body", required=True)
    s.add_argument("--samples", type=int, default=100_000)
    common(s)
    s.set_defaults(func=cmd_isotropy)

    s = sub.add_parser("estimate", help="Monte Carlo functionals")
    s.add_argument("functional", choices=FUNCTIONALS)
    s.add_argument("--measure", default=None)
    s.add_argument("--body", default=None)
    s.add_argument("--q", type=float, default=2.0)
    s.add_argument("--alpha", type=float, default=2.0)
    s.add_argument("--dir", default="random", help="JSON vector or 'random'")
    s.add_argument("--samples", type=int, default=100_000)
    s.add_argument("--dirs", type=int, default=10_000)
    s.add_argument("--subspace", default="random")
    s.add_argument("--dim", type=int, default=None)
    s.add_argument("--method", choices=("mc", "exact", "auto"), default="mc")
    common(s)
    s.set_defaults(func=cmd_estimate)

    s = sub.add_parser("radius", help="section, projection, Gelfand and rotation radii")
    s.add_argument("kind", choices=RADII)
    s.add_argument("--body", required=True)
    s.add_argument("--subspace", default="random", help="random | axes:m | JSON frame (inline or file)")
    s.add_argument("--dim", type=int, default=None, help="dimension of a random subspace")
    s.add_argument("--t", type=int, default=None, help="codimension for gelfand")
    s.add_argument("--subspaces", type=int, default=8, help="sampled subspaces for gelfand")
    s.add_argument("--rotation", default="random", help="random | JSON orthogonal matrix")
    s.add_argument("--starts", dest="n_starts", type=int, default=None)
    s.add_argument("--coarse", dest="n_coarse", type=int, default=None)
    s.add_argument("--refine-steps", dest="refine_steps", type=int, default=None)
    common(s)
    s.set_defaults(func=cmd_radius)

    s = sub.add_parser("experiment", help="run a declarative parameter sweep")
    s.add_argument("action", choices=("run", "list"))
    s.add_argument("name", nargs="?", default=None)
    s.add_argument("--config", default=None, help="JSON config (inline or file) mirroring ExperimentSpec")
    s.add_argument("--trials", type=int, default=None)
    s.add_argument("--samples", type=int, default=None)
    s.add_argument("--no-timing", action="store_true", help="leave wall_ms empty for byte-identical CSVs")
    common(s)
    s.set_defaults(func=cmd_experiment)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    args.auto_seed = None
    if getattr(args, "seed", None) is None:
        seed = secrets.randbits(63)
        if args.command == "experiment":
            args.auto_seed = seed
        else:
            args.seed = seed
    try:
        args.func(args)
    except ConfigError as exc:
        sys.stderr.write(f"isoscope: configuration error: {exc}\n")
        return 2
    except IsoscopeError as exc:
        sys.stderr.write(f"isoscope: {type(exc).__name__}: {exc}\n")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
