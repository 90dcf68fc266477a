"""Uniform and conditioned-product laws on the sphere of squared radius N.

The sphere carries the uniform law (sampled by Gaussian projection, with
exact marginals through log-gamma area ratios) and, for a centered
unit-variance density f, the conditioned product law: the tensor power
restricted and renormalized to the sphere. All partition-function work
happens through the iterated convolution of the law of v^2, computed once
on a fine grid in the Fourier domain and queried in the log domain, since
the gamma-function prefactors overflow long before N reaches 300.

Key identities used below, with h the law of v^2 under f:

* h^{*k}(r^2) recovers the sphere partition function Z'_k(r) after
  dividing by the chi-square-type density alpha_k(r^2)/(Gamma(k/2) 2^{k/2}).
* The first marginal of the conditioned product law is
  f(v) h^{*(N-1)}(N - v^2) / h^{*N}(N), which equals f * theta_{N,1};
  the correction factor theta is also computed through its sphere-area
  form as a cross-check.
* Under the conditioned law, a coordinate given remaining squared radius
  u on k coordinates has density proportional to f(v) h^{*(k-1)}(u - v^2),
  which drives the exact sequential sampler.
"""
from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from .core import (Density, DimensionError, HypothesisError, KaclabError,
                   gauss_quadrature)

__all__ = [
    "SphereConfig",
    "PartitionTable",
    "ConditionedSample",
    "sample_sigma",
    "sigma_marginal_log_pdf",
    "sigma_marginal_pdf",
    "marginal_gauss_l1",
    "radial_projection_cost",
    "build_partition_table",
    "theta",
    "theta_h_ratio",
    "sample_conditioned",
    "entropy_chaos_gap",
    "fisher_chaos_terms",
    "save_table",
    "load_table",
    "cache_path",
    "CACHE_ENV_VAR",
]

CACHE_ENV_VAR = "KACLAB_CACHE_DIR"
_MAGIC = b"KLPT1\x00"


@dataclass(frozen=True)
class SphereConfig:
    """A single point on the sphere sum(v_i^2) = N."""

    N: int
    coords: np.ndarray

    def __post_init__(self):
        coords = np.asarray(self.coords, dtype=float)
        object.__setattr__(self, "coords", coords)
        if self.N < 5:
            raise DimensionError("sphere configurations need N >= 5")
        if coords.shape != (self.N,):
            raise DimensionError("coords must have length N")
        if abs(float(coords @ coords) - self.N) > 1e-9 * self.N:
            raise DimensionError("configuration violates the sphere constraint")


def sample_sigma(N: int, count: int, rng: np.random.Generator) -> np.ndarray:
    """Draw count i.i.d. points of the uniform sphere law, shape (count, N).

    Gaussian vectors are radially projected to radius sqrt(N); rows satisfy
    the sphere constraint to relative 1e-12.
    """
    if N < 5:
        raise DimensionError("need N >= 5")
    z = rng.standard_normal((count, N))
    norms = np.linalg.norm(z, axis=1, keepdims=True)
    return z * (math.sqrt(N) / norms)


def _log_sphere_area(k: int) -> float:
    # surface of the unit sphere S^{k-1} in R^k
    return math.log(2.0) + (k / 2.0) * math.log(math.pi) - gammaln(k / 2.0)


def sigma_marginal_log_pdf(N: int, ell: int, V: np.ndarray) -> np.ndarray:
    """log of the ell-variable marginal density of the uniform sphere law."""
    if not 1 <= ell <= N - 1:
        raise DimensionError(f"need 1 <= ell <= N-1, got ell={ell}, N={N}")
    V = np.atleast_2d(np.asarray(V, dtype=float))
    if V.shape[1] != ell:
        raise DimensionError(f"V must have {ell} columns")
    sq = np.sum(V ** 2, axis=1)
    t = 1.0 - sq / N
    const = (_log_sphere_area(N - ell) - _log_sphere_area(N)
             - 0.5 * ell * math.log(N))
    with np.errstate(divide="ignore"):
        out = np.where(t > 0.0,
                       0.5 * (N - ell - 2) * np.log(np.maximum(t, 1e-300)) + const,
                       -np.inf)
    return out


def sigma_marginal_pdf(N: int, ell: int, V: np.ndarray) -> np.ndarray:
    """Exact marginal density; zero outside the ball of squared radius N."""
    return np.exp(sigma_marginal_log_pdf(N, ell, V))


def _gauss_log_pdf(v: np.ndarray) -> np.ndarray:
    return -0.5 * v ** 2 - 0.5 * math.log(2.0 * math.pi)


def marginal_gauss_l1(N: int, ell: int = 1) -> float:
    """Quadrature L1 distance between the sphere marginal and the Gaussian.

    Supports ell = 1 (line quadrature) and ell = 2 (radial quadrature).
    """
    if ell == 1:
        vmax = math.sqrt(N) * (1 - 1e-12)

        def integrand(v):
            lg = sigma_marginal_log_pdf(N, 1, np.array([[v]]))[0]
            return abs(math.exp(lg) - math.exp(_gauss_log_pdf(np.array([v]))[0]))

        cut = min(vmax, 14.0)
        val = gauss_quadrature(integrand, -cut, cut, 1e-9)
        # sphere marginal mass outside the cut is zero only beyond sqrt(N)
        if vmax > cut:
            tails = gauss_quadrature(
                lambda v: math.exp(
                    sigma_marginal_log_pdf(N, 1, np.array([[v]]))[0]), cut, vmax,
                1e-11)
            gtail = 2.0 * gauss_quadrature(
                lambda v: math.exp(_gauss_log_pdf(np.array([v]))[0]), cut, 30.0,
                1e-12)
            val += 2.0 * tails + gtail
        return val
    if ell == 2:
        rmax = math.sqrt(N) * (1 - 1e-12)

        def integrand(r):
            lg = sigma_marginal_log_pdf(N, 2, np.array([[r, 0.0]]))[0]
            gauss2 = math.exp(-r * r / 2.0) / (2.0 * math.pi)
            return abs(math.exp(lg) - gauss2) * 2.0 * math.pi * r

        return gauss_quadrature(integrand, 0.0, min(rmax, 16.0), 1e-9)
    raise DimensionError("quadrature path implemented for ell in {1, 2}")


def radial_projection_cost(N: int, mc_reps: int,
                           rng: np.random.Generator) -> tuple[float, float]:
    """Monte Carlo mean of the normalized l1 projection displacement.

    E |P(V) - V|_1 over iid Gaussian V, an upper bound for the transport
    distance between the uniform sphere law and the Gaussian tensor power.
    """
    z = rng.standard_normal((mc_reps, N))
    norm2 = np.sqrt(np.mean(z ** 2, axis=1))
    cost = np.abs(1.0 / norm2 - 1.0) * np.mean(np.abs(z), axis=1)
    cost = np.minimum(cost, 1.0)
    return float(cost.mean()), float(cost.std(ddof=1) / math.sqrt(mc_reps))


# ---------------------------------------------------------------------------
# partition table
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PartitionTable:
    """Windows of h^{*k} on a fine u-grid plus the scalars they imply."""

    density_name: str
    max_N: int
    du: float
    u_max: float
    E: float
    Sigma: float
    ks: tuple
    windows: dict = field(repr=False)   # k -> (start_index, values)
    _padded: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        # zero sentinels absorb out-of-window queries without masking;
        # prefilling keeps queries read-only and thread-safe
        for k, (_, vals) in self.windows.items():
            self._padded[k] = np.concatenate([[0.0], vals, [0.0, 0.0]])

    def has_k(self, k: int) -> bool:
        return k in self.windows

    def conv_density(self, k: int, u) -> np.ndarray:
        """h^{*k}(u) by linear interpolation, zero outside the stored window.

        The u-grid is uniform, so the lookup is direct index arithmetic
        rather than a binary search.
        """
        if k not in self.windows:
            raise KaclabError(f"table holds no convolution for k={k}; "
                              f"rebuild with this k included")
        start, vals = self.windows[k]
        padded = self._padded[k]
        pos = np.atleast_1d(np.asarray(u, dtype=float)) * (1.0 / self.du) - start
        np.clip(pos, -1.0, len(vals), out=pos)
        base = np.floor(pos).astype(np.intp)
        frac = pos - base
        lo = padded[base + 1]
        out = lo + frac * (padded[base + 2] - lo)
        return out if np.ndim(u) else float(out[0])

    def log_zprime(self, k: int, rsq) -> np.ndarray:
        """log Z'_k(sqrt(rsq)), the Gaussian-normalized partition function."""
        rsq = np.asarray(rsq, dtype=float)
        hk = self.conv_density(k, rsq)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = (np.log(hk) + gammaln(k / 2.0) + (k / 2.0) * math.log(2.0)
                   - (k / 2.0 - 1.0) * np.log(rsq) + rsq / 2.0)
        return np.where(hk > 0.0, out, -np.inf)

    def zprime(self, k: int, rsq) -> np.ndarray:
        return np.exp(self.log_zprime(k, rsq))


def _u_cell_masses(f: Density, edges: np.ndarray) -> np.ndarray:
    """Exact cell masses of the law of v^2 under f, via the CDF."""
    r = np.sqrt(edges)
    cdf = f.numeric_cdf
    return (cdf(r[1:]) - cdf(r[:-1])) + (cdf(-r[:-1]) - cdf(-r[1:]))


def _window_bounds(k: int, E: float, Sigma: float, du: float,
                   u_max: float) -> tuple[int, int]:
    width = max(24.0 * math.sqrt(k) * Sigma, 120.0) + 60.0
    lo = max(0.0, k * E - width)
    hi = min(u_max, k * E + width)
    return int(lo / du), int(hi / du) + 1


def build_partition_table(f: Density, max_N: int, ks=None, du: float = 0.004,
                          u_max_factor: float = 8.0) -> PartitionTable:
    """Tabulate h^{*k} for the requested k values (default: all k <= max_N).

    Hypotheses enforced: centered, unit variance, finite sixth moment and a
    bounded density. Cell masses of the law of v^2 come from the CDF, so
    the inverse-square-root singularity at zero costs no accuracy; powers
    of the spectrum are exact up to floating point, and the grid is kept
    fine enough that the gaussian reference reproduces Z' = 1 to about 2e-5.
    """
    failures = []
    mean = f.raw_moments.get(1)
    var_raw = f.raw_moments.get(2)
    if mean is None or abs(mean) > 1e-8:
        failures.append(f"mean {mean!r} != 0")
    if var_raw is None or abs(var_raw - (mean or 0.0) ** 2 - 1.0) > 1e-6:
        failures.append(f"variance {var_raw!r} != 1")
    if 6 not in f.declared_moments and 6 not in f.raw_moments:
        failures.append("sixth moment not declared finite")
    probe = np.linspace(*f.quad_bounds(), 4001)
    if not np.all(np.isfinite(f.pdf(probe))) or np.max(f.pdf(probe)) > 1e6:
        failures.append("density is not essentially bounded")
    if failures:
        raise HypothesisError("; ".join(failures))

    lo, hi = f.quad_bounds()
    E = gauss_quadrature(lambda v: v * v * f.pdf(v), lo, hi, 1e-10)
    Sigma = math.sqrt(gauss_quadrature(
        lambda v: (v * v - E) ** 2 * f.pdf(v), lo, hi, 1e-10))

    if ks is None:
        ks = list(range(1, max_N + 1))
    ks = sorted(set(int(k) for k in ks))
    if ks[0] < 1 or ks[-1] > max_N:
        raise DimensionError("requested k values must lie in [1, max_N]")

    u_max = u_max_factor * max_N
    m = int(2 ** math.ceil(math.log2(u_max / du)))
    du = u_max / m
    edges = np.concatenate([[0.0], du * (np.arange(m) + 0.5)])
    p = np.zeros(2 * m)
    p[:m] = _u_cell_masses(f, edges)
    spectrum = np.fft.rfft(p)

    def power(base, n):
        result = None
        b = base
        while n:
            if n & 1:
                result = b if result is None else result * b
            b = b * b
            n >>= 1
        return result

    windows = {}
    cur = None
    cur_k = 0
    for k in ks:
        step = k - cur_k
        block = power(spectrum, step)
        cur = block if cur is None else cur * block
        cur_k = k
        dens = np.fft.irfft(cur, n=2 * m)[:m]
        i0, i1 = _window_bounds(k, E, Sigma, du, u_max)
        windows[k] = (i0, np.maximum(dens[i0:i1], 0.0) / du)
    return PartitionTable(f.name, max_N, du, u_max, E, Sigma, tuple(ks), windows)


# ---------------------------------------------------------------------------
# the correction factor theta and the conditioned sampler
# ---------------------------------------------------------------------------

def theta(N: int, ell: int, V, table: PartitionTable) -> np.ndarray:
    """Correction factor of the conditioned-product ell-marginal.

    The ell-marginal equals f tensor ell times this factor. Computed in the
    log domain from the partition-function ratio and the sphere marginal;
    zero outside the ball of squared radius N.
    """
    if ell not in (1, 2):
        raise DimensionError("theta is shipped for ell in {1, 2}")
    V = np.atleast_2d(np.asarray(V, dtype=float))
    if V.shape[1] != ell:
        raise DimensionError(f"V must have {ell} columns")
    sq = np.sum(V ** 2, axis=1)
    inside = sq < N
    out = np.zeros(len(V))
    if np.any(inside):
        vi = V[inside]
        sqi = sq[inside]
        log_th = (0.5 * ell * math.log(2.0 * math.pi) + 0.5 * sqi
                  + table.log_zprime(N - ell, N - sqi)
                  - table.log_zprime(N, float(N))
                  + sigma_marginal_log_pdf(N, ell, vi))
        out[inside] = np.exp(log_th)
    return out


def theta_h_ratio(N: int, v, table: PartitionTable) -> np.ndarray:
    """theta_{N,1} through the bare convolution ratio h*(N-1)/h*N.

    Independent of the sphere-area and gamma-prefactor bookkeeping; used to
    cross-check the log-domain route.
    """
    v = np.atleast_1d(np.asarray(v, dtype=float))
    num = table.conv_density(N - 1, N - v ** 2)
    den = table.conv_density(N, float(N))
    return np.where(v ** 2 < N, num / den, 0.0)


@dataclass(frozen=True)
class ConditionedSample:
    """Output of the sequential conditioned sampler."""

    samples: np.ndarray         # (count, N), rows on the sphere
    n_resampled: int


def sample_conditioned(f: Density, N: int, count: int, table: PartitionTable,
                       rng: np.random.Generator, n_grid: int = 384,
                       max_retries: int = 50) -> ConditionedSample:
    """Exact sequential sampler of the conditioned product law.

    Coordinate by coordinate, v is drawn by inverse CDF on a grid from the
    conditional density f(v) h^{*(k-1)}(u - v^2) given the remaining
    squared radius u over k coordinates; the last two coordinates are drawn
    on the remaining circle from the angle density f(r cos) f(r sin).
    Radius underflow triggers a resample of the affected rows rather than
    clamping, which would bias the final circle.
    """
    if N < 5:
        raise DimensionError("need N >= 5")
    missing = [k for k in range(2, N) if not table.has_k(k)]
    if missing or not table.has_k(N - 1):
        raise KaclabError(f"table is missing convolutions {missing[:5]}...; "
                          f"build it with all k < N")
    out = np.empty((count, N))
    usq = np.full(count, float(N))
    failed = np.zeros(count, dtype=bool)
    lo, hi = f.quad_bounds()
    vcap = max(abs(lo), abs(hi))
    rows = np.arange(count)

    for j in range(N - 2):
        k = N - j
        act = rows[~failed]
        if len(act) == 0:
            break
        # one grid per step, shared across rows; infeasible cells get zero
        # density through the convolution window
        vmax = min(vcap, math.sqrt(max(float(usq[act].max()), 1e-12)))
        grid = np.linspace(-vmax, vmax, n_grid)
        step = grid[1] - grid[0]
        fg = f.pdf(grid)
        dens = fg[None, :] * table.conv_density(k - 1,
                                                usq[act, None] - grid ** 2)
        cum = np.cumsum(dens, axis=1)
        tot = cum[:, -1]
        bad = tot <= 0.0
        if np.any(bad):
            failed[act[bad]] = True
            act = act[~bad]
            cum, tot, dens = cum[~bad], tot[~bad], dens[~bad]
        if len(act) == 0:
            continue
        u = rng.random(len(act)) * tot
        idx = np.minimum((cum < u[:, None]).sum(axis=1), n_grid - 1)
        sel = np.arange(len(act))
        prev = np.where(idx > 0, cum[sel, np.maximum(idx - 1, 0)], 0.0)
        cell = dens[sel, idx]
        frac = np.where(cell > 0, (u - prev) / np.maximum(cell, 1e-300), 0.5)
        v = grid[idx] + (frac - 0.5) * step
        out[act, j] = v
        usq[act] = usq[act] - v ** 2

    # final two coordinates on the circle of radius sqrt(usq)
    act = rows[~failed]
    if len(act):
        r = np.sqrt(np.maximum(usq[act], 0.0))
        phi_grid = np.linspace(0.0, 2.0 * math.pi, 1024, endpoint=False)
        dens = f.pdf(r[:, None] * np.cos(phi_grid)[None, :]) \
            * f.pdf(r[:, None] * np.sin(phi_grid)[None, :])
        cum = np.cumsum(dens, axis=1)
        tot = cum[:, -1]
        bad = tot <= 0.0
        if np.any(bad):
            failed[act[bad]] = True
            act, r, cum, tot = act[~bad], r[~bad], cum[~bad], tot[~bad]
    if len(act):
        u = rng.random(len(act)) * tot
        idx = np.minimum((cum < u[:, None]).sum(axis=1), len(phi_grid) - 1)
        phi = phi_grid[idx] + rng.random(len(act)) * (phi_grid[1] - phi_grid[0])
        out[act, N - 2] = r * np.cos(phi)
        out[act, N - 1] = r * np.sin(phi)

    n_fail = int(failed.sum())
    n_resampled = n_fail
    if n_fail:
        if max_retries <= 0:
            raise KaclabError("conditioned sampler could not complete; "
                              "table windows are too narrow")
        redo = sample_conditioned(f, N, n_fail, table, rng, n_grid,
                                  max_retries - 1)
        out[failed] = redo.samples
        n_resampled += redo.n_resampled
    # exact renormalization onto the sphere (floating drift only)
    norms = np.sqrt(np.sum(out ** 2, axis=1))
    out *= (math.sqrt(N) / norms)[:, None]
    return ConditionedSample(out, n_resampled)


# ---------------------------------------------------------------------------
# entropy and Fisher chaos quantities
# ---------------------------------------------------------------------------

def theta1_on_grid(f: Density, N: int, table: PartitionTable,
                   n_grid: int = 20001):
    vmax = min(math.sqrt(N) * 0.999, max(abs(b) for b in f.quad_bounds()))
    v = np.linspace(-vmax, vmax, n_grid)
    return v, theta(N, 1, v[:, None], table)


def theta_l1_distance(f: Density, N: int, table: PartitionTable) -> float:
    """L1 norm of (theta_{N,1} - 1) f: the marginal distance to f."""
    v, th = theta1_on_grid(f, N, table)
    return float(np.trapezoid(np.abs(th - 1.0) * f.pdf(v), v))


def relative_entropy_to_gauss(f: Density) -> float:
    lo, hi = f.quad_bounds()

    def integrand(v):
        p = f.pdf(v)
        if p <= 1e-300:
            return 0.0
        return p * (math.log(p) - float(_gauss_log_pdf(np.array([v]))[0]))

    return gauss_quadrature(integrand, lo, hi, 1e-10)


def entropy_chaos_gap(f: Density, N: int, table: PartitionTable) -> float:
    """|H(F^N | sigma^N) - H(f | gamma)| via the partition-function identity.

    The sphere relative entropy of the conditioned law equals
    int log(f/gamma) dF^N_1 - (1/N) log Z'_N, with F^N_1 = f theta_{N,1};
    everything is quadrature plus one table lookup.
    """
    v, th = theta1_on_grid(f, N, table)
    fv = f.pdf(v)
    log_ratio = np.where(fv > 1e-300,
                         np.log(np.maximum(fv, 1e-300)) - _gauss_log_pdf(v), 0.0)
    term = float(np.trapezoid(log_ratio * fv * th, v))
    log_zn = float(table.log_zprime(N, float(N)))
    return abs(term - log_zn / N - relative_entropy_to_gauss(f))


def fisher_chaos_terms(f: Density, N: int, table: PartitionTable,
                       samples: np.ndarray | None = None):
    """Main and correction terms of the sphere relative Fisher information.

    main = int |score_f(v) + v|^2 f theta_{N,1} (quadrature), the flat-space
    part; correction = (1/N^2) E |sum_i v_i (score_f(v_i) + v_i)|^2 over
    conditioned samples, the radial projection part. The sphere information
    is main - correction.
    """
    if f.boundary_positive:
        raise HypothesisError("f is not weakly differentiable on R")
    lo, hi = f.quad_bounds()
    weight = gauss_quadrature(
        lambda v: (f.score(v) + v) ** 2 * f.pdf(v) * (1 + v * v), lo, hi, 1e-8)
    if not math.isfinite(weight):
        raise HypothesisError("f fails the weighted Fisher hypothesis")
    v, th = theta1_on_grid(f, N, table)
    fv = f.pdf(v)
    main = float(np.trapezoid((f.score(v) + v) ** 2 * fv * th, v))
    correction = math.nan
    if samples is not None:
        s = (f.score(samples) + samples)
        tot = np.sum(samples * s, axis=1)
        correction = float(np.mean(tot ** 2)) / N ** 2
    return main, correction


# ---------------------------------------------------------------------------
# binary cache
# ---------------------------------------------------------------------------
# Layout: magic "KLPT1\0", uint32 little-endian header length, UTF-8 JSON
# header {density_name, max_N, du, u_max, E, Sigma, ks, starts, lengths},
# then the window arrays as float64 little-endian, concatenated in ks order.

def save_table(table: PartitionTable, path: str):
    header = {
        "density_name": table.density_name,
        "max_N": table.max_N,
        "du": table.du,
        "u_max": table.u_max,
        "E": table.E,
        "Sigma": table.Sigma,
        "ks": list(table.ks),
        "starts": [int(table.windows[k][0]) for k in table.ks],
        "lengths": [int(len(table.windows[k][1])) for k in table.ks],
    }
    blob = json.dumps(header).encode()
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(len(blob).to_bytes(4, "little"))
        fh.write(blob)
        for k in table.ks:
            fh.write(table.windows[k][1].astype("<f8").tobytes())


def load_table(path: str) -> PartitionTable:
    with open(path, "rb") as fh:
        if fh.read(len(_MAGIC)) != _MAGIC:
            raise KaclabError(f"{path} is not a partition table cache")
        n = int.from_bytes(fh.read(4), "little")
        header = json.loads(fh.read(n).decode())
        windows = {}
        for k, start, length in zip(header["ks"], header["starts"],
                                    header["lengths"]):
            arr = np.frombuffer(fh.read(8 * length), dtype="<f8").copy()
            windows[int(k)] = (int(start), arr)
    return PartitionTable(header["density_name"], int(header["max_N"]),
                          float(header["du"]), float(header["u_max"]),
                          float(header["E"]), float(header["Sigma"]),
                          tuple(int(k) for k in header["ks"]), windows)


def cache_path(density_name: str, max_N: int, du: float, ks) -> str:
    import hashlib
    root = os.environ.get(CACHE_ENV_VAR,
                          os.path.join(os.path.expanduser("~"), ".cache",
                                       "kaclab"))
    os.makedirs(root, exist_ok=True)
    key = hashlib.sha256(
        f"{density_name}|{max_N}|{du}|{sorted(set(int(k) for k in ks))}"
        .encode()).hexdigest()[:16]
    return os.path.join(root, f"ptable_{key}.bin")
