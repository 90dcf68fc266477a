"""Shared domain types, seeded randomness contract, grids and quadrature.

Conventions used throughout the package:

* A configuration is a flat vector of N*d reals, one block of d per particle.
* Discrete measures carry finitely many weighted atoms; empirical measures
  are the uniform-weight special case.
* All stochastic operations take an explicit ``numpy.random.Generator``.
  Identical seeds give bit-identical outputs; callers split seeds with
  ``rng.spawn`` when they need independent streams.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import integrate, stats
from scipy.special import erf

__all__ = [
    "KaclabError",
    "DimensionError",
    "QuadratureError",
    "SizeError",
    "HypothesisError",
    "SupportError",
    "Configuration",
    "DiscreteMeasure",
    "Density",
    "GridDensity",
    "ProductGridDensity",
    "RateReport",
    "make_empirical",
    "loglog_fit",
    "gauss_quadrature",
    "gaussian_density",
    "uniform_density",
    "bimodal_density",
    "ATOM_MERGE_TOL",
    "QUAD_SIGMA_CUTOFF",
]

SQRT_2PI = math.sqrt(2.0 * math.pi)

# Coordinates closer than this are merged into a single atom.
ATOM_MERGE_TOL = 1e-12

# Sub-gaussian densities are integrated on mean +/- this many standard
# deviations; the discarded tail mass is below 1e-30.
QUAD_SIGMA_CUTOFF = 12.0


class KaclabError(Exception):
    """Base class for structured errors raised by this package."""


class DimensionError(KaclabError):
    """Shape or dimension mismatch between operands."""


class QuadratureError(KaclabError):
    """Adaptive quadrature failed to converge; carries the best estimate."""

    def __init__(self, message, best_estimate, error_estimate):
        super().__init__(f"{message} (best estimate {best_estimate!r}, "
                         f"error estimate {error_estimate!r})")
        self.best_estimate = best_estimate
        self.error_estimate = error_estimate


class SizeError(KaclabError):
    """An exact computation would blow past its size budget."""


class HypothesisError(KaclabError):
    """Input violates a moment/integrability hypothesis of an operation."""


class SupportError(KaclabError):
    """Input violates a support or absolute-continuity requirement."""


# ---------------------------------------------------------------------------
# domain types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Configuration:
    """One N-particle state: a flat vector of N*d reals."""

    d: int
    n_particles: int
    coords: np.ndarray

    def __post_init__(self):
        coords = np.asarray(self.coords, dtype=float)
        object.__setattr__(self, "coords", coords)
        if self.d < 1 or self.n_particles < 1:
            raise DimensionError("d and n_particles must be positive")
        if coords.shape != (self.n_particles * self.d,):
            raise DimensionError(
                f"coords has shape {coords.shape}, expected "
                f"({self.n_particles * self.d},)")
        if not np.all(np.isfinite(coords)):
            raise DimensionError("coords must be finite")

    @property
    def particles(self) -> np.ndarray:
        """Coordinates reshaped to (N, d)."""
        return self.coords.reshape(self.n_particles, self.d)


@dataclass(frozen=True)
class DiscreteMeasure:
    """Finitely many weighted atoms in R^dim, dim = j * particle_dim."""

    dim: int
    points: np.ndarray          # (n_atoms, dim)
    weights: np.ndarray         # (n_atoms,), nonnegative, sums to 1
    particle_dim: int = 1       # d; j = dim // particle_dim

    def __post_init__(self):
        points = np.atleast_2d(np.asarray(self.points, dtype=float))
        weights = np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "weights", weights)
        if points.shape != (len(weights), self.dim):
            raise DimensionError(
                f"points shape {points.shape} inconsistent with dim={self.dim} "
                f"and {len(weights)} weights")
        if self.dim % self.particle_dim != 0:
            raise DimensionError("dim must be a multiple of particle_dim")
        if not np.all(np.isfinite(points)):
            raise DimensionError("atom points must be finite")
        if np.any(weights < -1e-15):
            raise DimensionError("weights must be nonnegative")
        if abs(weights.sum() - 1.0) > 1e-12:
            raise DimensionError(f"weights sum to {weights.sum()!r}, not 1")

    @property
    def j(self) -> int:
        return self.dim // self.particle_dim

    @property
    def n_atoms(self) -> int:
        return len(self.weights)

    def merged(self, tol: float = ATOM_MERGE_TOL) -> "DiscreteMeasure":
        """Merge atoms whose coordinates agree within ``tol``."""
        order = np.lexsort(self.points.T[::-1])
        pts = self.points[order]
        wts = self.weights[order]
        keep_pts = [pts[0]]
        keep_wts = [wts[0]]
        for p, w in zip(pts[1:], wts[1:]):
            if np.max(np.abs(p - keep_pts[-1])) <= tol:
                keep_wts[-1] += w
            else:
                keep_pts.append(p)
                keep_wts.append(w)
        w = np.array(keep_wts)
        return DiscreteMeasure(self.dim, np.array(keep_pts), w / w.sum(),
                               self.particle_dim)

    def moment(self, k: float) -> float:
        """M_k = sum_a w_a <z_a>^k with <z> = sqrt(1 + |z|^2)."""
        sq = 1.0 + np.sum(self.points ** 2, axis=1)
        return float(np.sum(self.weights * sq ** (k / 2.0)))


@dataclass(frozen=True)
class Density:
    """Analytic 1-D probability density.

    ``score`` is (log pdf)'; ``sampler`` maps (rng, size) to draws.
    ``declared_moments`` maps order k to M_k = E<v>^k (absolute moments of
    the bracket weight) for the orders a caller promises to be finite.
    ``raw_moments`` maps order k to E v^k when known in closed form.
    """

    name: str
    pdf: Callable[[np.ndarray], np.ndarray]
    log_pdf: Callable[[np.ndarray], np.ndarray]
    score: Callable[[np.ndarray], np.ndarray]
    sampler: Callable[[np.random.Generator, int], np.ndarray]
    support: tuple[float, float] = (-math.inf, math.inf)
    declared_moments: dict = field(default_factory=dict)
    raw_moments: dict = field(default_factory=dict)
    cdf: Callable[[np.ndarray], np.ndarray] | None = None
    boundary_positive: bool = False   # pdf > 0 at a finite support edge

    def quad_bounds(self) -> tuple[float, float]:
        """Effective integration bounds (truncated for unbounded support)."""
        lo, hi = self.support
        mean = self.raw_moments.get(1, 0.0)
        var = self.raw_moments.get(2, 1.0) - mean ** 2
        sd = math.sqrt(max(var, 1e-12))
        if not math.isfinite(lo):
            lo = mean - QUAD_SIGMA_CUTOFF * sd
        if not math.isfinite(hi):
            hi = mean + QUAD_SIGMA_CUTOFF * sd
        return lo, hi

    def numeric_cdf(self, v: np.ndarray) -> np.ndarray:
        if self.cdf is not None:
            return self.cdf(v)
        lo, _ = self.quad_bounds()
        v = np.atleast_1d(np.asarray(v, dtype=float))
        out = np.empty_like(v)
        for i, x in enumerate(v):
            if x <= lo:
                out[i] = 0.0
            else:
                out[i], _ = integrate.quad(self.pdf, lo, x, limit=200)
        return np.clip(out, 0.0, 1.0)

    def validate(self, quad_tol: float = 1e-8, score_tol: float = 1e-5):
        """Check normalization and the score/log-pdf consistency contract."""
        lo, hi = self.quad_bounds()
        mass = gauss_quadrature(self.pdf, lo, hi, quad_tol)
        if abs(mass - 1.0) > quad_tol * 10:
            raise HypothesisError(f"{self.name}: pdf mass {mass} is not 1")
        vs = np.linspace(lo + 1e-3 * (hi - lo), hi - 1e-3 * (hi - lo), 211)
        vs = vs[self.pdf(vs) > 1e-10]
        h = 1e-6
        fd = (self.log_pdf(vs + h) - self.log_pdf(vs - h)) / (2 * h)
        sc = self.score(vs)
        rel = np.abs(fd - sc) / np.maximum(1.0, np.abs(sc))
        if np.max(rel) > score_tol:
            raise HypothesisError(
                f"{self.name}: score deviates from d/dv log pdf by "
                f"{np.max(rel):.2e}")
        return True


@dataclass(frozen=True)
class GridDensity:
    """Density values on the uniform grid x_j = -L + j h, h = 2L/M.

    M must be a power of two. Values are renormalized to unit mass on
    construction; ``h * sum(values)`` is then 1 to machine precision.
    """

    half_width: float
    n_points: int
    values: np.ndarray

    def __post_init__(self):
        if self.n_points & (self.n_points - 1) or self.n_points <= 0:
            raise DimensionError("n_points must be a power of two")
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (self.n_points,):
            raise DimensionError("values must have shape (n_points,)")
        if np.any(vals < -1e-12 * max(1.0, vals.max(initial=0.0))):
            raise DimensionError("grid values must be nonnegative")
        vals = np.maximum(vals, 0.0)
        mass = vals.sum() * self.spacing
        if mass <= 0:
            raise DimensionError("grid density has no mass")
        object.__setattr__(self, "values", vals / mass)

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_width / self.n_points

    @property
    def xs(self) -> np.ndarray:
        return -self.half_width + self.spacing * np.arange(self.n_points)

    def mean(self) -> float:
        return float(np.sum(self.xs * self.values) * self.spacing)

    def variance(self) -> float:
        m = self.mean()
        return float(np.sum((self.xs - m) ** 2 * self.values) * self.spacing)

    def standardized(self) -> "GridDensity":
        """Rescale to mean 0, variance 1 (resampled on the same grid)."""
        m, sd = self.mean(), math.sqrt(self.variance())
        new = np.interp(self.xs * sd + m, self.xs, self.values,
                        left=0.0, right=0.0) * sd
        return GridDensity(self.half_width, self.n_points, new)

    @classmethod
    def from_density(cls, f: Density, half_width: float,
                     n_points: int) -> "GridDensity":
        xs = -half_width + (2 * half_width / n_points) * np.arange(n_points)
        return cls(half_width, n_points, np.maximum(f.pdf(xs), 0.0))


@dataclass(frozen=True)
class ProductGridDensity:
    """Two-variable density on the product of a 1-D grid with itself."""

    half_width: float
    n_points: int
    values: np.ndarray          # (M, M)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (self.n_points, self.n_points):
            raise DimensionError("values must be (n_points, n_points)")
        vals = np.maximum(vals, 0.0)
        mass = vals.sum() * self.spacing ** 2
        if mass <= 0:
            raise DimensionError("grid density has no mass")
        object.__setattr__(self, "values", vals / mass)

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_width / self.n_points

    @property
    def xs(self) -> np.ndarray:
        return -self.half_width + self.spacing * np.arange(self.n_points)

    def marginal(self, axis: int = 0) -> GridDensity:
        vals = self.values.sum(axis=1 - axis) * self.spacing
        return GridDensity(self.half_width, self.n_points, vals)


@dataclass(frozen=True)
class RateReport:
    """Least-squares power-law fit of values against sample sizes."""

    ns: tuple
    values: tuple
    stderrs: tuple
    fitted_slope: float
    fitted_intercept: float
    slope_ci: tuple[float, float]

    def __post_init__(self):
        ns = tuple(int(n) for n in self.ns)
        if any(b <= a for a, b in zip(ns, ns[1:])):
            raise DimensionError("ns must be strictly increasing")
        if not all(math.isfinite(v) for v in self.values):
            raise DimensionError("fit values must be finite")
        lo, hi = self.slope_ci
        if not (lo - 1e-12 <= self.fitted_slope <= hi + 1e-12):
            raise DimensionError("slope_ci must contain fitted_slope")
        object.__setattr__(self, "ns", ns)
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        object.__setattr__(self, "stderrs", tuple(float(s) for s in self.stderrs))


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------

def make_empirical(X: Configuration, group: int = 1) -> DiscreteMeasure:
    """Empirical measure of a configuration on E^group.

    ``group=1`` gives the usual uniform measure on the N particle positions.
    For larger ``group`` the particles are split into floor(N/group)
    consecutive disjoint blocks, each block one atom on E^group.
    Coinciding atoms are merged.
    """
    if not 1 <= group <= X.n_particles:
        raise DimensionError(f"group must be in [1, {X.n_particles}]")
    n_blocks = X.n_particles // group
    pts = X.coords[: n_blocks * group * X.d].reshape(n_blocks, group * X.d)
    w = np.full(n_blocks, 1.0 / n_blocks)
    return DiscreteMeasure(group * X.d, pts, w, particle_dim=X.d).merged()


def loglog_fit(ns: Sequence[int], values: Sequence[float],
               stderrs: Sequence[float] | None = None) -> RateReport:
    """Fit log(value) = slope * log(n) + intercept by least squares.

    The 95% confidence interval uses the standard normal-theory formula
    with a Student t quantile on len(ns) - 2 degrees of freedom.
    """
    ns = np.asarray(ns, dtype=float)
    values = np.asarray(values, dtype=float)
    if len(ns) < 4:
        raise DimensionError("need at least 4 points for a rate fit")
    if np.any(values <= 0):
        raise DimensionError("values must be positive to fit in log scale")
    x = np.log(ns)
    y = np.log(values)
    A = np.vstack([x, np.ones_like(x)]).T
    (slope, intercept), res, *_ = np.linalg.lstsq(A, y, rcond=None)
    dof = len(ns) - 2
    resid = y - A @ [slope, intercept]
    s2 = float(resid @ resid) / dof
    se = math.sqrt(s2 / float(np.sum((x - x.mean()) ** 2)))
    tq = stats.t.ppf(0.975, dof)
    if stderrs is None:
        stderrs = [0.0] * len(ns)
    return RateReport(tuple(int(n) for n in ns), tuple(values), tuple(stderrs),
                      float(slope), float(intercept),
                      (float(slope - tq * se), float(slope + tq * se)))


def gauss_quadrature(f: Callable, a: float, b: float, tol: float = 1e-10,
                     limit: int = 400) -> float:
    """Adaptive integral of f over [a, b] to absolute tolerance tol."""
    val, err = integrate.quad(f, a, b, epsabs=tol, epsrel=tol, limit=limit)
    if err > max(tol, abs(val) * tol) * 10:
        raise QuadratureError("quadrature did not reach tolerance", val, err)
    return val


# ---------------------------------------------------------------------------
# shipped analytic densities
# ---------------------------------------------------------------------------

def _phi(v):
    return np.exp(-np.asarray(v, dtype=float) ** 2 / 2.0) / SQRT_2PI


def _Phi(v):
    return 0.5 * (1.0 + erf(np.asarray(v, dtype=float) / math.sqrt(2.0)))


def gaussian_density(mean: float = 0.0, var: float = 1.0) -> Density:
    """Gaussian with the given mean and variance."""
    sd = math.sqrt(var)

    def raw(k):
        # E v^k for v ~ N(mean, var)
        tot = 0.0
        for i in range(0, k + 1, 2):
            tot += (math.comb(k, i) * mean ** (k - i) * var ** (i // 2)
                    * math.prod(range(1, i, 2)))
        return tot

    return Density(
        name=f"gaussian(m={mean:g},var={var:g})",
        pdf=lambda v: _phi((np.asarray(v) - mean) / sd) / sd,
        log_pdf=lambda v: (-((np.asarray(v) - mean) ** 2) / (2 * var)
                           - math.log(sd * SQRT_2PI)),
        score=lambda v: -(np.asarray(v, dtype=float) - mean) / var,
        sampler=lambda rng, size: mean + sd * rng.standard_normal(size),
        support=(-math.inf, math.inf),
        declared_moments={k: None for k in (2, 4, 6, 8)},
        raw_moments={k: raw(k) for k in range(1, 9)},
        cdf=lambda v: _Phi((np.asarray(v) - mean) / sd),
    )


def uniform_density(a: float = 0.0, b: float = 1.0) -> Density:
    """Uniform on [a, b]."""
    w = b - a

    def pdf(v):
        v = np.asarray(v, dtype=float)
        return np.where((v >= a) & (v <= b), 1.0 / w, 0.0)

    def log_pdf(v):
        v = np.asarray(v, dtype=float)
        with np.errstate(divide="ignore"):
            return np.where((v >= a) & (v <= b), -math.log(w), -np.inf)

    mid, var = (a + b) / 2.0, w * w / 12.0
    return Density(
        name=f"uniform[{a:g},{b:g}]",
        pdf=pdf,
        log_pdf=log_pdf,
        score=lambda v: np.zeros_like(np.asarray(v, dtype=float)),
        sampler=lambda rng, size: rng.uniform(a, b, size),
        support=(a, b),
        raw_moments={1: mid, 2: var + mid ** 2},
        cdf=lambda v: np.clip((np.asarray(v, dtype=float) - a) / w, 0.0, 1.0),
        boundary_positive=True,
    )


def bimodal_density(separation: float = 1.0, width: float = 0.5,
                    weights: tuple[float, float] = (0.5, 0.5)) -> Density:
    """Two-Gaussian mixture rescaled to mean 0, variance 1.

    The pre-scaling mixture is w1 N(-a, s^2) + w2 N(+a', s^2) with a' chosen
    so the mixture is centered; the default (a=1, s=0.5, equal weights) is
    visibly non-gaussian while keeping every polynomial moment finite.
    """
    w1, w2 = weights
    if abs(w1 + w2 - 1.0) > 1e-12:
        raise HypothesisError("mixture weights must sum to 1")
    a1 = -separation
    a2 = separation * w1 / w2
    mean = w1 * a1 + w2 * a2
    var = w1 * (width ** 2 + a1 ** 2) + w2 * (width ** 2 + a2 ** 2) - mean ** 2
    sc = math.sqrt(var)
    m1, m2, s = (a1 - mean) / sc, (a2 - mean) / sc, width / sc

    def pdf(v):
        v = np.asarray(v, dtype=float)
        return (w1 * _phi((v - m1) / s) + w2 * _phi((v - m2) / s)) / s

    def dpdf(v):
        v = np.asarray(v, dtype=float)
        return -(w1 * _phi((v - m1) / s) * (v - m1)
                 + w2 * _phi((v - m2) / s) * (v - m2)) / s ** 3

    def raw(k):
        # E v^k of the mixture, from component gaussian moments
        tot = 0.0
        for w, m in ((w1, m1), (w2, m2)):
            g = 0.0
            for i in range(0, k + 1, 2):
                g += (math.comb(k, i) * m ** (k - i) * s ** i
                      * math.prod(range(1, i, 2)))
            tot += w * g
        return tot

    def sampler(rng, size):
        comp = rng.random(size) < w1
        z = rng.standard_normal(size)
        return np.where(comp, m1, m2) + s * z

    return Density(
        name=f"bimodal(sep={separation:g},w={width:g},p={w1:g})",
        pdf=pdf,
        log_pdf=lambda v: np.log(np.maximum(pdf(v), 1e-320)),
        score=lambda v: dpdf(v) / np.maximum(pdf(v), 1e-320),
        sampler=sampler,
        support=(-math.inf, math.inf),
        declared_moments={k: None for k in (2, 4, 6, 8)},
        raw_moments={k: raw(k) for k in range(1, 9)},
        cdf=lambda v: (w1 * _Phi((np.asarray(v) - m1) / s)
                       + w2 * _Phi((np.asarray(v) - m2) / s)),
    )
