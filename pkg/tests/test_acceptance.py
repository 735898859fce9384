"""Acceptance suite: one PASS/FAIL line per criterion.

Run with ``pytest -s tests/test_acceptance.py`` or ``python tests/test_acceptance.py``.
Brackets for the scaling criteria are pre-registered: they are computed from
an independent run (its own seed) at the smallest grid point, or from a
closed-form oracle, before the tested sweep is looked at.
"""
from __future__ import annotations

import math
import time

import numpy as np
import pytest
from scipy.special import gammaln

from isoscope.experiments import ExperimentSpec, fit_slope, rows_to_csv, run_experiment, summarize
from isoscope.functionals import centroid_support, psi_alpha_norm
from isoscope.geometry import Cube, Subspace
from isoscope.isotropy import isotropic_constant
from isoscope.measures import IsotropicUniform, LaplaceProduct, StandardGaussian, UniformOnBody, marginal
from isoscope.radii import section_radius
from isoscope.rng import RngStream, sample_grassmannian, sample_sphere

CUBE = {"type": "cube"}
CROSS = {"type": "normalized", "child": {"type": "polar", "child": {"type": "cube"}}}
CUBE_MEASURE = {"type": "isotropic", "body": {"type": "cube"}}
GAUSSIAN = {"type": "gaussian"}
LAPLACE = {"type": "laplace"}


def report(number: int, title: str, ok: bool, detail: str):
    print(f"{'PASS' if ok else 'FAIL'} criterion {number}: {title} | {detail}", flush=True)
    return ok


def gaussian_cq(q):
    return math.sqrt(2.0) * math.exp((gammaln((q + 1) / 2) - 0.5 * math.log(math.pi)) / q)


def preregistered_bracket(rows, widen=1.5):
    """[min / widen, max * widen] of the ratios of a pre-registration run."""
    r = np.array([row.ratio for row in rows])
    return float(r.min() / widen), float(r.max() * widen)


# --------------------------------------------------------------------------


def test_c01_cube_isotropy():
    t0 = time.perf_counter()
    L = isotropic_constant(UniformOnBody(Cube(12)), 100_000, RngStream(101))
    dt = time.perf_counter() - t0
    target = 1 / math.sqrt(12)
    ok = abs(L / target - 1) <= 0.02 and dt < 5
    assert report(1, "cube isotropic constant", ok, f"L={L:.5f} target={target:.5f} rel={L / target - 1:+.4f} time={dt:.2f}s")


def test_c02_gaussian_centroid_oracle():
    t0 = time.perf_counter()
    mu = StandardGaussian(16)
    y = sample_sphere(16, RngStream(202).generator())
    errs = {}
    for i, q in enumerate([1, 2, 4, 8, 16]):
        est = centroid_support(mu, q, y, 100_000, RngStream(202).derive(i), method="mc")
        errs[q] = est.value / gaussian_cq(q) - 1
    dt = time.perf_counter() - t0
    ok = all(abs(e) <= 0.03 for e in errs.values()) and dt < 10
    detail = " ".join(f"q={q}:{e:+.4f}" for q, e in errs.items())
    assert report(2, "Gaussian centroid oracle", ok, f"{detail} time={dt:.2f}s")


def test_c03_z2_identity():
    worst = {}
    ok = True
    for j, (name, mu) in enumerate([("gaussian", StandardGaussian(10)), ("cube", IsotropicUniform(Cube(10))),
                                    ("laplace", LaplaceProduct(10))]):
        stream = RngStream(303).derive(j)
        dirs = sample_sphere(10, stream.derive(0).generator(), size=50)
        z = []
        for i, y in enumerate(dirs):
            est = centroid_support(mu, 2, y, 20_000, stream.derive(1).derive(i), method="mc")
            z.append((est.value - 1.0) / est.stderr)
        z = np.abs(z)
        worst[name] = float(z.max())
        ok &= bool(np.all(z <= 3.0))
    detail = " ".join(f"{k}:max|z|={v:.2f}" for k, v in worst.items())
    assert report(3, "Z_2 is the Euclidean ball", ok, f"{detail} over 50 directions each")


def test_c04_projection_identity():
    n, m = 12, 4
    mu = IsotropicUniform(Cube(n))
    stream = RngStream(404)
    worst = 0.0
    ok = True
    for i in range(20):
        s = stream.derive(i)
        F = sample_grassmannian(n, m, s.derive(0).generator())
        u = sample_sphere(m, s.derive(1).generator())
        nu = marginal(mu, F)
        for j, q in enumerate([1, 2, 4]):
            a = centroid_support(mu, q, F.embed(u), 20_000, s.derive(2).derive(j), method="mc")
            b = centroid_support(nu, q, u, 20_000, s.derive(3).derive(j), method="mc")
            z = abs(a.value - b.value) / math.hypot(a.stderr, b.stderr)
            worst = max(worst, z)
            ok &= z <= 3.0
    assert report(4, "projection identity Z_q(marginal) = P_F Z_q", ok, f"max combined z={worst:.2f} over 60 (F,u,q)")


def test_c05_psi2_gaussian():
    est = psi_alpha_norm(StandardGaussian(8), np.eye(8)[0], 2.0, 100_000, RngStream(505))
    target = math.sqrt(8 / 3)
    ok = abs(est.value / target - 1) <= 0.03
    assert report(5, "Gaussian psi_2 norm", ok, f"value={est.value:.5f} target={target:.5f} rel={est.value / target - 1:+.4f}")


def test_c06_polar_identity():
    ball = run_experiment(ExperimentSpec(name="polar_identity", dims=[8], grid=[2], samples=200_000, seed=606,
                                         body={"type": "volume_one_ball"}, params={"k": 2}))[0]
    cube = run_experiment(ExperimentSpec(name="polar_identity", dims=[8], grid=[2], samples=200_000, seed=607,
                                         body=CUBE, params={"k": 2}))[0]
    closed = ball.flags["closed_form"]
    ball_ok = (abs(ball.ratio - 1) <= 0.05 and abs(ball.estimate / closed - 1) <= 0.05
               and abs(ball.reference_scale / closed - 1) <= 0.05)
    cube_ok = abs(cube.ratio - 1) <= 0.08
    detail = (f"ball lhs/rhs={ball.ratio:.4f} lhs/closed={ball.estimate / closed:.4f} "
              f"rhs/closed={ball.reference_scale / closed:.4f}; cube lhs/rhs={cube.ratio:.4f}")
    assert report(6, "polar integration identity", ball_ok and cube_ok, detail)


def test_c07_volume_fraction():
    rows = run_experiment(ExperimentSpec(name="lemma32_klartag", dims=[2, 4, 6], grid=[0.1, 0.3, 0.5],
                                         samples=1_000_000, seed=707, body=CUBE))
    ok = all(r.estimate >= r.reference_scale for r in rows)
    worst = min(rows, key=lambda r: r.ratio)
    assert report(7, "volume fraction bound", ok,
                  f"9 cells, min fraction/bound={worst.ratio:.3f} at m={worst.n} eps={worst.k_or_q}")


def test_c08_section_radius_exactness():
    axis_err = 0.0
    for n in (4, 8, 16):
        for m in range(1, n + 1):
            r = section_radius(Cube(n), Subspace.axes(n, m), rng=RngStream(808).derive(n).derive(m))
            axis_err = max(axis_err, abs(r.value / (math.sqrt(m) / 2) - 1))
    hits = {}
    for n in (4, 8, 16):
        hits[n] = sum(abs(section_radius(Cube(n), rng=RngStream(809).derive(n).derive(s)).value
                          / (math.sqrt(n) / 2) - 1) <= 0.01 for s in range(100))
    ok = axis_err <= 0.01 and all(h >= 95 for h in hits.values())
    detail = f"axis max rel err={axis_err:.2e}; full sphere hits " + " ".join(f"n={n}:{h}/100" for n, h in hits.items())
    assert report(8, "section radius exactness", ok, detail)


def test_c09_section_scaling():
    t0 = time.perf_counter()
    parts = []
    ok = True
    for body, label in ((CUBE, "cube"), (CROSS, "cross-polytope")):
        pre = run_experiment(ExperimentSpec(name="thm12_section", dims=[16], grid=[0.5], trials=20, seed=900, body=body))
        lo, hi = preregistered_bracket(pre)
        rows = run_experiment(ExperimentSpec(name="thm12_section", dims=[16, 32, 64], grid=[0.5], trials=20,
                                             seed=901, body=body), threads=4)
        ratios = np.array([r.ratio for r in rows])
        inside = bool(np.all((ratios >= lo) & (ratios <= hi)))
        s = summarize(rows, (lo, hi), against="n")
        ok &= inside and abs(s.slope) <= 0.15
        parts.append(f"{label}: bracket=[{lo:.3f},{hi:.3f}] range=[{ratios.min():.3f},{ratios.max():.3f}] "
                     f"slope={s.slope:+.3f}±{s.slope_stderr:.3f}")
    dt = time.perf_counter() - t0
    ok &= dt < 600
    assert report(9, "section radius scaling in n", ok, "; ".join(parts) + f"; time={dt:.0f}s")


def test_c10_zq_section_scaling():
    qs = [1, 2, 4, 8, 16, 32]
    g = run_experiment(ExperimentSpec(name="thm13_zq_section", dims=[32], grid=qs, seed=1000, measure=GAUSSIAN,
                                      params={"gamma": 0.5}))
    g_ok = all(0.6 <= r.ratio <= 1.1 and abs(r.estimate / gaussian_cq(r.k_or_q) - 1) <= 1e-6 for r in g)
    # Pre-registration: at q = 2 the oracle says Z_2 is the unit ball, so the ratio is 1/sqrt(2).
    lo, hi = (1 / math.sqrt(2)) / 1.5, (1 / math.sqrt(2)) * 1.5
    params = {"gamma": 0.5, "zq_samples": 5000, "method": "mc"}
    c = run_experiment(ExperimentSpec(name="thm13_zq_section", dims=[32], grid=qs[1:], trials=3, seed=1001,
                                      measure=CUBE_MEASURE, params=params), threads=4)
    ratios = np.array([r.ratio for r in c])
    s = summarize(c, (lo, hi), against="k_or_q")
    c_ok = bool(np.all((ratios >= lo) & (ratios <= hi))) and s.slope <= 0.1
    detail = (f"gaussian ratios=[{min(r.ratio for r in g):.3f},{max(r.ratio for r in g):.3f}]; "
              f"cube bracket=[{lo:.3f},{hi:.3f}] range=[{ratios.min():.3f},{ratios.max():.3f}] "
              f"slope vs log q={s.slope:+.3f}±{s.slope_stderr:.3f}")
    assert report(10, "Z_q section radius scaling in q", g_ok and c_ok, detail)


def test_c11_zq_width():
    qs = [2, 4, 8, 16, 32]
    # Pre-registration at q = 2: w(Z_2) = w(B) = 1 exactly; the bound is one-sided.
    ref2 = math.log(3) * max(2 * math.log(3) / math.sqrt(32), math.sqrt(2))
    hi = 1.5 / ref2
    c = run_experiment(ExperimentSpec(name="thm51_zq_width", dims=[32], grid=qs, trials=3, seed=1100,
                                      measure=CUBE_MEASURE, params={"n_dirs": 64}))
    ratios = np.array([r.ratio for r in c])
    c_ok = bool(np.all((ratios > 0) & (ratios <= hi)))
    g = run_experiment(ExperimentSpec(name="thm51_zq_width", dims=[32], grid=qs, seed=1101, measure=GAUSSIAN,
                                      params={"n_dirs": 64, "method": "auto"}))
    g_err = max(abs(r.estimate / gaussian_cq(r.k_or_q) - 1) for r in g)
    gm = run_experiment(ExperimentSpec(name="thm51_zq_width", dims=[32], grid=[2, 4, 8], seed=1102, measure=GAUSSIAN,
                                       params={"n_dirs": 64, "zq_samples": 20_000, "method": "mc"}))
    gm_err = max(abs(r.estimate / gaussian_cq(r.k_or_q) - 1) for r in gm)
    ok = c_ok and g_err <= 0.03 and gm_err <= 0.03
    detail = (f"cube bracket=(0,{hi:.3f}] range=[{ratios.min():.3f},{ratios.max():.3f}]; "
              f"gaussian oracle max rel err={g_err:.1e}; gaussian MC (q<=8) max rel err={gm_err:.4f}")
    assert report(11, "Z_q mean width", ok, detail)


def test_c12_subgaussian():
    n = 64
    # Pre-registration from the Gaussian oracle: every direction has psi_2 norm sqrt(8/3).
    base = math.sqrt(8 / 3) / math.log(n) ** 2
    lo, hi = 0.5 * base, 1.25 * base
    rows = run_experiment(ExperimentSpec(name="thm16_subgaussian", dims=[n], grid=[0], trials=50, samples=20_000,
                                         seed=1200, measure=CUBE_MEASURE), threads=4)
    ratios = np.array([r.ratio for r in rows])
    frac = float(np.mean((ratios >= lo) & (ratios <= hi)))
    false_flags = sum(bool(r.flags.get("diverging")) for r in rows)
    lap = run_experiment(ExperimentSpec(name="thm16_subgaussian", dims=[n], grid=[0], trials=5, samples=20_000,
                                        seed=1201, measure=LAPLACE), threads=4)
    lap_flagged = sum(bool(r.flags.get("diverging")) for r in lap)
    regime = rows[0].flags["regime"]
    ok = frac >= 0.95 and lap_flagged == len(lap) and rows[0].flags["k"] == 32
    detail = (f"k={rows[0].flags['k']} ({regime}) bracket=[{lo:.4f},{hi:.4f}] in-bracket={frac:.2f} "
              f"cube flagged={false_flags}/50; laplace flagged={lap_flagged}/{len(lap)}")
    assert report(12, "sub-Gaussian directions of random subspaces", ok, detail)


def test_c13_determinism():
    specs = [
        dict(name="thm12_section", dims=[8, 12], grid=[0.5], trials=4, seed=1300, body=CUBE),
        dict(name="thm16_subgaussian", dims=[16], grid=[0], trials=4, samples=10_000, seed=1301, measure=LAPLACE),
        dict(name="thm13_zq_section", dims=[8], grid=[2, 4], trials=2, seed=1302, measure=CUBE_MEASURE,
             params={"zq_samples": 2000, "method": "mc"}),
    ]
    ok = True
    for d in specs:
        spec = ExperimentSpec(timing=False, **d)
        outs = [rows_to_csv(run_experiment(spec, threads=w)) for w in (1, 4, 16)]
        ok &= outs[0] == outs[1] == outs[2]
    assert report(13, "determinism across worker counts", ok, f"{len(specs)} experiments x workers 1/4/16")


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-s", "-q"]))
