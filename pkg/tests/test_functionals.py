import math

import numpy as np
import pytest
from scipy import integrate, optimize
from scipy.special import gammaln

from isoscope.errors import AllZeroInnerProducts, OracleUnavailable, QOutOfRange
from isoscope.functionals import (
    _psi_root,
    centroid_mean_width,
    centroid_support,
    mean_width,
    moment_radius,
    psi2_support,
    psi_alpha_norm,
    psi_roots,
    vrad_section,
    weibull_tail_coefficient,
)
from isoscope.geometry import Ball, Cube, HPolytope, Polar, Subspace, VolumeOneBall, volume_one_radius
from isoscope.measures import IsotropicUniform, LaplaceProduct, StandardGaussian, UniformOnBody
from isoscope.rng import RngStream, sample_grassmannian, sample_sphere


def cq(q):
    return math.sqrt(2.0) * math.exp((gammaln((q + 1) / 2) - 0.5 * math.log(math.pi)) / q)


def test_gaussian_centroid_mc():
    y = sample_sphere(10, RngStream(1).generator())
    for q in (1, 4):
        est = centroid_support(StandardGaussian(10), q, y, 100_000, RngStream(2), method="mc")
        assert abs(est.value - cq(q)) <= 4 * est.stderr
    assert cq(1) == pytest.approx(0.79788, abs=1e-5)
    assert cq(4) == pytest.approx(1.31607, abs=1e-5)


def test_exact_routes():
    y = np.eye(6)[0]
    assert centroid_support(StandardGaussian(6), 4, y, method="exact").value == pytest.approx(3**0.25)
    assert centroid_support(LaplaceProduct(6), 4, y, method="exact").value == pytest.approx(24**0.25 / math.sqrt(2))
    with pytest.raises(OracleUnavailable):
        centroid_support(IsotropicUniform(Cube(3)), 3, np.eye(3)[0], method="exact")


def test_z2_is_ball_for_isotropic_measures():
    y = sample_sphere(5, RngStream(3).generator())
    for mu in (StandardGaussian(5), IsotropicUniform(Cube(5)), LaplaceProduct(5)):
        est = centroid_support(mu, 2, y, 50_000, RngStream(4), method="mc")
        assert abs(est.value - 1) <= 3 * est.stderr


def test_centroid_errors():
    with pytest.raises(QOutOfRange):
        centroid_support(StandardGaussian(3), 0.5, np.eye(3)[0])
    with pytest.raises(ValueError):
        centroid_support(StandardGaussian(3), 2, np.eye(3)[0], N=10)
    sample = np.zeros((1000, 3))
    with pytest.raises(AllZeroInnerProducts):
        centroid_support(StandardGaussian(3), 2, np.eye(3)[0], sample=sample)


def test_centroid_monotone_in_q():
    mu = IsotropicUniform(Cube(6))
    X = mu.sample(50_000, RngStream(5).generator())
    y = sample_sphere(6, RngStream(6).generator())
    vals = [centroid_support(mu, q, y, sample=X).value for q in (1, 2, 3, 4, 8)]
    assert all(a <= b + 1e-12 for a, b in zip(vals, vals[1:]))


def test_moment_radius():
    n, q = 8, 2
    est = moment_radius(VolumeOneBall(n), q, 100_000, RngStream(7))
    target = volume_one_radius(n) * (n / (n + q)) ** (1 / q)
    assert abs(est.value - target) <= 4 * est.stderr
    est = moment_radius(Cube(12), 2, 100_000, RngStream(8))
    assert est.value == pytest.approx(1.0, rel=0.01)
    lo = moment_radius(Cube(6), -2, 100_000, RngStream(9))
    mid = moment_radius(Cube(6), 2, 100_000, RngStream(9))
    hi = moment_radius(Cube(6), 4, 100_000, RngStream(9))
    assert lo.value <= mid.value <= hi.value
    with pytest.raises(QOutOfRange):
        moment_radius(Cube(3), -3, 1000, RngStream(10))


def test_mean_width():
    est = mean_width(Ball(8, 1.0), 10_000, RngStream(11))
    assert est.value == pytest.approx(1.0) and est.stderr == 0.0
    n = 16
    exact = (n / 2) * math.exp(gammaln(n / 2) - 0.5 * math.log(math.pi) - gammaln((n + 1) / 2))
    est = mean_width(Cube(n), 100_000, RngStream(12))
    assert est.value == pytest.approx(exact, rel=0.02)
    # cross-polytope-type body: w = 2 E max |theta_i|
    th = sample_sphere(5, RngStream(13).generator(), size=2_000_000)
    oracle = 2 * np.mean(np.max(np.abs(th), axis=1))
    est = mean_width(Polar(Cube(5)), 200_000, RngStream(14))
    assert est.value == pytest.approx(oracle, rel=0.01)


def test_isotropic_cube_width_bracket():
    mu = IsotropicUniform(Cube(32))
    for q in (1, 2, 4, 8):
        est = centroid_mean_width(mu, q, 16, 20_000, RngStream(15).derive(q), method="mc")
        assert 0.5 <= est.value / math.sqrt(q) <= 1.5


def test_centroid_width_gaussian_exact():
    est = centroid_mean_width(StandardGaussian(12), 4, 8, 1000, RngStream(16), method="auto")
    assert est.value == pytest.approx(3**0.25)
    assert est.method == "exact"


def test_vrad():
    assert vrad_section(Ball(6, 2.0), sample_grassmannian(6, 3, RngStream(17)), 1000, RngStream(18)).value == pytest.approx(2.0)
    est = vrad_section(Cube(4), Subspace.axes(4, 2), 200_000, RngStream(19))
    assert est.value == pytest.approx(1 / math.sqrt(math.pi), rel=0.03)
    line = Subspace(np.array([[1.0], [1.0]]) / math.sqrt(2))
    assert vrad_section(Cube(2), line, 100, RngStream(20)).value == pytest.approx(1 / math.sqrt(2))
    P = HPolytope(np.vstack([np.eye(2), -np.eye(2)]), 0.5 * np.ones(4))
    assert vrad_section(P, Subspace.axes(2, 2), 100_000, RngStream(21)).value == pytest.approx(1 / math.sqrt(math.pi), rel=0.03)


def test_psi_gaussian():
    est = psi_alpha_norm(StandardGaussian(4), np.eye(4)[1], 2.0, 100_000, RngStream(22))
    assert est.value == pytest.approx(math.sqrt(8 / 3), rel=0.03)
    assert not est.flags.get("diverging")


def test_psi_cube_quadrature_oracle():
    # E exp((U/t)^2) = 2 for U uniform on [-1/2, 1/2]
    def excess(t):
        return 2 * integrate.quad(lambda s: math.exp(s * s / (t * t)), 0, 0.5)[0] - 2

    oracle = optimize.brentq(excess, 0.2, 2.0)
    est = psi_alpha_norm(UniformOnBody(Cube(3)), np.eye(3)[0], 2.0, 100_000, RngStream(23))
    assert est.value == pytest.approx(oracle, rel=0.01)
    assert oracle == pytest.approx(0.3864, abs=1e-3)


def test_psi_laplace():
    est = psi_alpha_norm(LaplaceProduct(3), np.eye(3)[0], 1.0, 100_000, RngStream(24))
    # |X| is exponential with mean b = 1/sqrt(2): E exp(|X|/t) = 1/(1 - b/t) = 2 gives t = 2b.
    assert est.value == pytest.approx(2 / math.sqrt(2), rel=0.03)
    assert not est.flags.get("diverging")
    est = psi_alpha_norm(LaplaceProduct(3), np.eye(3)[0], 2.0, 100_000, RngStream(25))
    assert est.flags.get("diverging")


def test_psi_root_counts_zeros():
    a = np.array([0.0, 0.0, 1.0, 2.0])
    t = _psi_root(a, 2.0)
    m = np.mean(np.exp((a / t) ** 2))
    assert m == pytest.approx(2.0, rel=1e-5)


def test_vectorized_roots_match_scalar():
    A = np.abs(RngStream(26).generator().standard_normal((5000, 4)))
    A[:, 3] = np.abs(RngStream(27).generator().laplace(size=5000))
    for alpha in (1.0, 1.5, 2.0):
        np.testing.assert_allclose(psi_roots(A, alpha), [_psi_root(A[:, j], alpha) for j in range(4)], rtol=1e-5)


def test_tail_coefficient():
    g = RngStream(28).generator()
    assert weibull_tail_coefficient(np.abs(g.laplace(size=100_000))) == pytest.approx(1.0, abs=0.25)
    assert weibull_tail_coefficient(np.abs(g.standard_normal(100_000))) > 1.4


def test_psi2_support():
    est = psi2_support(StandardGaussian(16), np.eye(16)[0], method="exact")
    assert 0.65 <= est.value <= 0.75
    mu = IsotropicUniform(Cube(8))
    y = sample_sphere(8, RngStream(29).generator())
    est = psi2_support(mu, y, 50_000, RngStream(30))
    assert est.value >= 1 / math.sqrt(2) - 3 * est.stderr


def test_psi_definitions_are_equivalent():
    gen = RngStream(31)
    for j, mu in enumerate((StandardGaussian(6), IsotropicUniform(Cube(6)))):
        X = mu.sample(20_000, gen.derive(j).generator())
        for i in range(20):
            y = sample_sphere(6, gen.derive(100 + i).generator())
            a = psi_alpha_norm(mu, y, 2.0, sample=X, bootstraps=0).value
            b = psi2_support(mu, y, sample=X).value
            assert 0.25 <= a / b <= 4
