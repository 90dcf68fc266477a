import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kaclab.core import (Configuration, DimensionError, DiscreteMeasure,
                         GridDensity, QuadratureError, bimodal_density,
                         gauss_quadrature, gaussian_density, loglog_fit,
                         make_empirical, uniform_density)


def test_configuration_invariants():
    Configuration(1, 3, np.array([0.0, 1.0, 2.0]))
    with pytest.raises(DimensionError):
        Configuration(1, 3, np.array([0.0, 1.0]))
    with pytest.raises(DimensionError):
        Configuration(1, 2, np.array([0.0, np.inf]))


def test_discrete_measure_invariants():
    DiscreteMeasure(1, np.array([[0.0], [1.0]]), np.array([0.5, 0.5]))
    with pytest.raises(DimensionError):
        DiscreteMeasure(1, np.array([[0.0], [1.0]]), np.array([0.5, 0.6]))
    with pytest.raises(DimensionError):
        DiscreteMeasure(1, np.array([[0.0], [1.0]]), np.array([1.5, -0.5]))


def test_make_empirical_basic():
    m = make_empirical(Configuration(1, 3, np.array([0.0, 1.0, 2.0])))
    assert m.n_atoms == 3
    np.testing.assert_allclose(m.weights, 1.0 / 3.0)
    assert m.weights.sum() == 1.0


def test_make_empirical_single_particle():
    m = make_empirical(Configuration(1, 1, np.array([5.0])))
    assert m.n_atoms == 1 and m.points[0, 0] == 5.0


def test_make_empirical_merges_atoms():
    m = make_empirical(Configuration(1, 4, np.array([0.0, 0.0, 1.0, 1.0])))
    assert m.n_atoms == 2
    np.testing.assert_allclose(sorted(m.points[:, 0]), [0.0, 1.0])
    np.testing.assert_allclose(m.weights, [0.5, 0.5])
    assert m.weights.sum() == 1.0


def test_make_empirical_blocks():
    m = make_empirical(Configuration(1, 4, np.array([0.0, 1.0, 2.0, 3.0])),
                       group=2)
    assert m.dim == 2 and m.n_atoms == 2
    with pytest.raises(DimensionError):
        make_empirical(Configuration(1, 4, np.zeros(4)), group=5)


def test_make_empirical_blocks_multidimensional():
    coords = np.arange(8.0)   # two particles per block, two components each
    m = make_empirical(Configuration(2, 4, coords), group=2)
    assert m.dim == 4 and m.particle_dim == 2 and m.n_atoms == 2
    np.testing.assert_allclose(sorted(m.points[:, 0]), [0.0, 4.0])


def test_loglog_fit_exact_inverse():
    ns = [10, 20, 40, 80, 160]
    rep = loglog_fit(ns, [1.0 / n for n in ns])
    assert abs(rep.fitted_slope + 1.0) < 1e-10
    assert rep.slope_ci[0] <= rep.fitted_slope <= rep.slope_ci[1]


def test_loglog_fit_exact_half():
    ns = [4, 8, 16, 32]
    rep = loglog_fit(ns, [3.0 / math.sqrt(n) for n in ns])
    assert abs(rep.fitted_slope + 0.5) < 1e-12
    assert abs(rep.fitted_intercept - math.log(3.0)) < 1e-12


def test_loglog_fit_noisy_slope_window():
    rng = np.random.default_rng(4)
    ns = [16, 32, 64, 128, 256, 512]
    vals = [n ** -0.5 * (1.0 + 0.1 * rng.standard_normal()) for n in ns]
    rep = loglog_fit(ns, vals)
    assert -0.6 < rep.fitted_slope < -0.4


def test_loglog_fit_rejects_bad_input():
    with pytest.raises(DimensionError):
        loglog_fit([1, 2, 3], [1.0, 0.5, 0.25])
    with pytest.raises(DimensionError):
        loglog_fit([1, 2, 3, 4], [1.0, 0.5, -0.25, 0.1])


@settings(max_examples=25, deadline=None)
@given(st.floats(min_value=-3.0, max_value=-0.1),
       st.floats(min_value=0.1, max_value=5.0))
def test_loglog_fit_recovers_pure_power_laws(slope, scale):
    ns = [8, 16, 32, 64, 128]
    rep = loglog_fit(ns, [scale * n ** slope for n in ns])
    assert abs(rep.fitted_slope - slope) < 1e-8
    assert abs(rep.fitted_intercept - math.log(scale)) < 1e-8


def test_gauss_quadrature_basics():
    assert abs(gauss_quadrature(lambda x: 1.0, 0.0, 1.0) - 1.0) < 1e-12
    g = gaussian_density()
    assert abs(gauss_quadrature(g.pdf, -12.0, 12.0, 1e-10) - 1.0) < 1e-10
    second = gauss_quadrature(lambda v: v * v * g.pdf(v), -12.0, 12.0, 1e-9)
    assert abs(second - 1.0) < 1e-8
    # monte carlo cross-check of the same moment
    mc = np.mean(g.sampler(np.random.default_rng(0), 200_000) ** 2)
    assert abs(second - mc) < 3.0 * math.sqrt(2.0 / 200_000)


@pytest.mark.filterwarnings("ignore::UserWarning")
@pytest.mark.filterwarnings("ignore:The maximum number of subdivisions")
def test_gauss_quadrature_failure_carries_estimate():
    with pytest.raises(QuadratureError) as err:
        gauss_quadrature(lambda x: math.sin(1.0 / (abs(x) + 1e-12)), 0.0, 1.0,
                         1e-13, limit=3)
    assert err.value.best_estimate is not None


@pytest.mark.parametrize("density", [
    gaussian_density(),
    gaussian_density(1.5, 4.0),
    uniform_density(0.0, 1.0),
    uniform_density(-math.sqrt(3.0), math.sqrt(3.0)),
    bimodal_density(),
    bimodal_density(weights=(0.7, 0.3)),
])
def test_shipped_densities_validate(density):
    assert density.validate()


def test_density_moments_match_quadrature():
    f = bimodal_density()
    for k in (2, 4, 6):
        quad = gauss_quadrature(lambda v: v ** k * f.pdf(v), -12, 12, 1e-10)
        assert abs(quad - f.raw_moments[k]) < 1e-8


def test_grid_density_invariants():
    g = GridDensity.from_density(gaussian_density(), 10.0, 1024)
    assert abs(g.values.sum() * g.spacing - 1.0) < 1e-12
    with pytest.raises(DimensionError):
        GridDensity(10.0, 1000, np.ones(1000))    # not a power of two
    st = g.standardized()
    assert abs(st.mean()) < 1e-9 and abs(st.variance() - 1.0) < 1e-6


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=1, max_value=8), st.integers(min_value=0, max_value=10_000))
def test_merged_preserves_mass_and_is_idempotent(n_atoms, seed):
    rng = np.random.default_rng(seed)
    pts = rng.integers(0, 3, size=(n_atoms, 1)).astype(float)
    m = DiscreteMeasure(1, pts, rng.dirichlet(np.ones(n_atoms)))
    merged = m.merged()
    assert abs(merged.weights.sum() - 1.0) < 1e-12
    assert len(np.unique(merged.points[:, 0])) == merged.n_atoms
    again = merged.merged()
    assert again.n_atoms == merged.n_atoms
    np.testing.assert_allclose(again.weights, merged.weights)
