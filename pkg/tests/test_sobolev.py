import math

import numpy as np
import pytest

from kaclab.core import DimensionError, DiscreteMeasure, KaclabError
from kaclab.sobolev import (hs_dist_sq, hs_dist_sq_fourier_oracle,
                            hs_w1_bridge_check, make_hs_kernel, phi_s)


@pytest.fixture(scope="module")
def kern1():
    return make_hs_kernel(1.0)


@pytest.fixture(scope="module")
def kern2():
    return make_hs_kernel(2.0)


def empirical(rng, n, spread=4.0):
    pts = rng.uniform(-spread, spread, (n, 1))
    return DiscreteMeasure(1, pts, np.full(n, 1.0 / n))


def test_kernel_requires_valid_exponent():
    with pytest.raises(DimensionError):
        make_hs_kernel(0.4)
    with pytest.raises(DimensionError):
        make_hs_kernel(1.0, d=2)


def test_phi1_closed_form(kern1):
    zs = np.linspace(0.0, 20.0, 801)
    assert np.max(np.abs(phi_s(zs, kern1) - math.pi * np.exp(-zs))) < 1e-6
    assert kern1.phi0 == pytest.approx(math.pi)


def test_phi2_zero_value(kern2):
    assert kern2.phi0 == pytest.approx(math.pi / 2.0, abs=1e-6)


def test_phi_is_even(kern1):
    zs = np.linspace(0.1, 30.0, 57)
    np.testing.assert_allclose(phi_s(zs, kern1), phi_s(-zs, kern1))


def test_phi_zero_is_quadrature_of_weight(kern2):
    from scipy import integrate
    direct, _ = integrate.quad(lambda x: (1 + x * x) ** -2.0, -np.inf, np.inf)
    assert abs(kern2.phi0 - direct) < 1e-6


def test_phi_bounded_by_phi0(kern1, kern2):
    zs = np.linspace(0.0, 64.0, 4001)
    for k in (kern1, kern2):
        assert np.all(np.abs(phi_s(zs, k)) <= k.phi0 + 1e-12)


def test_tail_extrapolation_and_validity(kern1):
    # just beyond the table the exponential fit continues the closed form
    assert phi_s(70.0, kern1) == pytest.approx(math.pi * math.exp(-70.0),
                                               rel=1e-3)
    with pytest.raises(KaclabError):
        phi_s(5000.0, kern1)


def test_lipschitz_bound(kern2):
    zs = np.linspace(0.0, 10.0, 2001)
    vals = phi_s(zs, kern2)
    slopes = np.abs(np.diff(vals)) / np.diff(zs)
    assert np.max(slopes) <= kern2.lipschitz_bound + 1e-9
    assert kern2.lipschitz_bound == pytest.approx(1.0)   # 1/(s-1)
    assert math.isinf(make_hs_kernel(1.0).lipschitz_bound)
    assert math.isinf(make_hs_kernel(0.75).lipschitz_bound)


def test_hs_dist_zero_and_symmetry(kern1, rng):
    mu = empirical(rng, 6)
    assert hs_dist_sq(mu, mu, kern1) == pytest.approx(0.0, abs=1e-12)
    nu = empirical(rng, 4)
    assert hs_dist_sq(mu, nu, kern1) == pytest.approx(
        hs_dist_sq(nu, mu, kern1), abs=1e-12)


def test_hs_dist_two_diracs(kern1):
    for z in (0.3, 2.0, 11.0):
        mu = DiscreteMeasure(1, np.array([[0.0]]), np.array([1.0]))
        nu = DiscreteMeasure(1, np.array([[z]]), np.array([1.0]))
        expected = 2.0 * (kern1.phi0 - phi_s(z, kern1))
        assert hs_dist_sq(mu, nu, kern1) == pytest.approx(expected, rel=1e-10)


def test_hs_matches_fourier_oracle(rng):
    kernels = {s: make_hs_kernel(s) for s in (1.0, 1.5, 2.0)}
    for t in range(12):
        s = (1.0, 1.5, 2.0)[t % 3]
        mu = empirical(rng, int(rng.integers(3, 12)))
        nu = empirical(rng, int(rng.integers(3, 12)))
        direct = hs_dist_sq(mu, nu, kernels[s])
        oracle = hs_dist_sq_fourier_oracle(mu, nu, s)
        assert abs(direct - oracle) <= 1e-4 * max(abs(oracle), 1e-12)


def test_gram_matrix_positive_semidefinite(kern1, rng):
    pts = rng.uniform(-6, 6, 30)
    gram = phi_s(np.abs(pts[:, None] - pts[None, :]), kern1)
    eigs = np.linalg.eigvalsh(gram)
    assert eigs.min() >= -1e-8


def test_sqrt_triangle_inequality(kern2, rng):
    for _ in range(15):
        a, b, c = (empirical(rng, 5) for _ in range(3))
        dab = math.sqrt(hs_dist_sq(a, b, kern2))
        dac = math.sqrt(hs_dist_sq(a, c, kern2))
        dcb = math.sqrt(hs_dist_sq(c, b, kern2))
        assert dab <= dac + dcb + 1e-6


def test_negative_clamp_raises_on_corrupt_table(kern1):
    import dataclasses
    bad = dataclasses.replace(kern1, phi0=-kern1.phi0)
    # force corrupt values through a flipped spline
    from scipy.interpolate import CubicSpline
    object.__setattr__(bad, "_spline", CubicSpline(kern1.radii, -kern1.table))
    mu = DiscreteMeasure(1, np.array([[0.0]]), np.array([1.0]))
    nu = DiscreteMeasure(1, np.array([[0.5]]), np.array([1.0]))
    with pytest.raises(KaclabError):
        hs_dist_sq(mu, nu, bad)


def test_bridge_check_identical_measures(kern1, rng):
    mu = empirical(rng, 5)
    w1, bound = hs_w1_bridge_check(mu, mu, 2.0, 1.0, kern1)
    assert w1 == pytest.approx(0.0, abs=1e-12)
    assert bound >= 0.0


def test_bridge_check_two_diracs(kern1):
    mu = DiscreteMeasure(1, np.array([[0.0]]), np.array([1.0]))
    nu = DiscreteMeasure(1, np.array([[0.1]]), np.array([1.0]))
    w1, bound = hs_w1_bridge_check(mu, nu, 2.0, 1.0, kern1)
    assert w1 == pytest.approx(0.1)
    assert w1 <= bound


def test_bridge_check_sweep(rng):
    kern = make_hs_kernel(1.5)
    for _ in range(100):
        mu = empirical(rng, int(rng.integers(2, 9)))
        nu = empirical(rng, int(rng.integers(2, 9)))
        w1, bound = hs_w1_bridge_check(mu, nu, 2.0, 1.5, kern)
        assert w1 <= bound + 1e-9
