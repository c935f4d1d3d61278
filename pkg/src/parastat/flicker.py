"""Cosine spectra of time series, 1/f exponent fits and the energy verdict.

A series b_0..b_s is expanded as f(t) = sum_i a_i cos(pi i t / s) with
f(j) = b_j (the type-I discrete cosine transform, endpoints half
weighted).  Those collocation coefficients reproduce the series.  The
spectral quantities use the orthonormal type-I amplitudes, for which
sum a_i^2 = sum b_j^2 holds exactly:

    A_0 = (1/s) sum a_i^2 = (1/s) sum b_j^2
    E   = (1/A_0) sum i^2 a_i^2          global energy
    E_s = pi^2 E / s^2                   normalised energy

A series whose normalised energy falls below the critical level set by
the spectral exponent is flagged explosive.
"""

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy import fft, optimize

from . import solver, thresholds
from .condensate import ConvergenceReport
from .errors import DegenerateSeries, IllConditionedFit, NoConvergence, UnsupportedAlpha, ZeroEnergy


@dataclass(frozen=True)
class Spectrum:
    amplitudes: np.ndarray  # orthonormal, Parseval-exact
    s: int
    collocation: np.ndarray | None = None

    def __post_init__(self):
        a = np.asarray(self.amplitudes, dtype=float)
        if a.ndim != 1 or a.size != self.s + 1:
            raise DegenerateSeries("need s + 1 amplitudes")
        if not np.all(np.isfinite(a)):
            raise DegenerateSeries("non-finite amplitude")

    @property
    def mean_square(self):
        """A_0 = (1/s) sum a_i^2."""
        return float(np.sum(np.asarray(self.amplitudes) ** 2) / self.s)

    def evaluate(self, t):
        """f(t) = sum a_i cos(pi i t / s) with the collocation coefficients."""
        if self.collocation is None:
            raise ValueError("spectrum was not built from a series")
        t = np.asarray(t, dtype=float)
        i = np.arange(self.s + 1)
        return np.cos(np.pi * np.multiply.outer(t, i) / self.s) @ self.collocation

    def series(self):
        """Invert the orthonormal transform back to b_0..b_s."""
        return fft.idct(np.asarray(self.amplitudes, dtype=float), type=1, norm="ortho")


MIN_S = 8


def cosine_transform(series):
    """Type-I cosine expansion of b_0..b_s (s >= 8)."""
    b = np.asarray(series, dtype=float)
    if b.ndim != 1 or b.size < MIN_S + 1:
        raise DegenerateSeries(f"need at least {MIN_S + 1} samples")
    if not np.all(np.isfinite(b)):
        raise DegenerateSeries("series contains non-finite values")
    s = b.size - 1
    if np.sum(b * b) <= 10 * s * np.finfo(float).eps:
        raise DegenerateSeries("series carries no power")
    ortho = fft.dct(b, type=1, norm="ortho")
    coll = fft.dct(b, type=1) / s
    coll[0] *= 0.5
    coll[-1] *= 0.5
    return Spectrum(ortho, s, coll)


def read_series_csv(path):
    """Values from a CSV with a single ``value`` column or columns ``t,value``.

    A header is optional.  With two columns t must be strictly increasing
    integers; row order is then time order.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].lstrip().startswith("#")]
    if rows and rows[0][-1].strip().lower() == "value":
        rows = rows[1:]
    width = {len(r) for r in rows}
    if len(width) > 1 or width - {1, 2}:
        raise DegenerateSeries(f"{path}: expected one column (value) or two (t,value)")
    try:
        table = np.array([[float(c) for c in r] for r in rows], dtype=float)
    except ValueError as exc:
        raise DegenerateSeries(f"{path}: {exc}") from None
    if table.size == 0:
        raise DegenerateSeries(f"{path}: no values")
    if table.shape[1] == 2:
        t = table[:, 0]
        if np.any(t != np.round(t)) or np.any(np.diff(t) <= 0):
            raise DegenerateSeries(f"{path}: t must be strictly increasing integers")
        return table[:, 1]
    return table[:, 0]


def spectrum_table(spec):
    """Rows (i, a_i, A_i) for i < s, with A_i the tail mean square from i up."""
    a = np.asarray(spec.amplitudes, dtype=float)
    dens = densities(spec, range(spec.s))
    return [(i, float(a[i]), dens[i]) for i in range(spec.s)]


def spectrum_from_amplitudes(amplitudes):
    a = np.asarray(amplitudes, dtype=float)
    return Spectrum(a, a.size - 1)


def densities(spec, l_grid):
    """Tail mean square A_l = (1/(s - l)) sum_{i=l}^{s} a_i^2 for each l in the grid."""
    a2 = np.asarray(spec.amplitudes) ** 2
    tail = np.cumsum(a2[::-1])[::-1]
    out = {}
    for l in l_grid:
        l = int(l)
        if not 0 <= l < spec.s:
            raise IllConditionedFit(f"grid point {l} outside [0, s)")
        out[l] = float(tail[l] / (spec.s - l))
    return out


def default_grid(s, points=8):
    """Geometric grid of up to ``points`` integers between s/16 and s/2."""
    lo, hi = max(1.0, s / 16), s / 2
    if hi <= lo:
        return []
    return sorted({int(round(v)) for v in np.geomspace(lo, hi, points)})


@dataclass(frozen=True)
class AlphaFit:
    alpha: float
    grid: tuple
    band_means: tuple


def estimate_alpha(spec, l_grid=None):
    """Exponent of a_i^2 ~ i^-alpha from the tail means A_l.

    (s - l) A_l is the total power from l up, so differences between
    neighbouring grid points give band powers.  The negated log-log slope
    of band mean power against band position is alpha.
    """
    grid = default_grid(spec.s) if l_grid is None else sorted({int(l) for l in l_grid})
    if len(grid) < 4:
        raise IllConditionedFit("need at least four distinct grid points")
    dens = densities(spec, grid)
    tails = np.array([(spec.s - l) * dens[l] for l in grid])
    band = tails[:-1] - tails[1:]
    width = np.diff(grid).astype(float)
    mean = band / width
    if np.any(mean <= 0) or not np.all(np.isfinite(mean)):
        raise IllConditionedFit("spectrum has no power on part of the grid")
    centre = np.sqrt(np.array(grid[:-1], dtype=float) * np.array(grid[1:], dtype=float))
    slope = np.polyfit(np.log(centre), np.log(mean), 1)[0]
    return AlphaFit(float(-slope), tuple(grid), tuple(float(v) for v in mean))


def global_energy(spec):
    """E = (1/A_0) sum i^2 a_i^2."""
    a0 = spec.mean_square
    if a0 == 0:
        raise ZeroEnergy("all amplitudes vanish")
    i = np.arange(spec.s + 1, dtype=float)
    return float(np.sum(i * i * np.asarray(spec.amplitudes) ** 2) / a0)


def normalized_energy(spec):
    return math.pi ** 2 * global_energy(spec) / spec.s ** 2


@dataclass(frozen=True)
class FlickerVerdict:
    alpha: float
    gamma: float
    energy: float
    normalized_energy: float
    critical_energy: float
    explosive: bool
    s0: float
    s_tilde: float
    s_tilde_analogy: float
    beta: float


def verdict_from_energy(energy, s, alpha):
    """Explosive when pi^2 E / s^2 is below the critical normalised energy."""
    crit = thresholds.flicker_critical_energy(alpha, energy, s)
    e_s = math.pi ** 2 * energy / s ** 2
    explosive = e_s < crit.critical_energy
    s0 = max(0.0, s - crit.s_tilde) if explosive else 0.0
    return FlickerVerdict(alpha, crit.gamma, energy, e_s, crit.critical_energy, bool(explosive),
                          s0, crit.s_tilde, crit.s_tilde_analogy, crit.beta)


def flicker_verdict(spec, alpha=None):
    if alpha is None:
        alpha = estimate_alpha(spec).alpha
    if not 0 < alpha < 2:
        raise UnsupportedAlpha(f"spectral exponent {alpha:.4g} outside (0, 2)")
    return verdict_from_energy(global_energy(spec), spec.s, alpha)


# ---------------------------------------------------------------- weak convergence

GAMMA_FLOOR = 0.01


def convergence_exponent(alpha):
    """Measure exponent for the weak-convergence check.

    gamma = 1/2 - alpha/4, except that gamma below 0.01 falls back to the
    exponent-1 (ordinary partition) form, where d(x**gamma) degenerates.
    """
    gamma = thresholds.flicker_gamma(alpha)
    return (1.0, "unit") if gamma < GAMMA_FLOOR else (gamma, "gamma")


def _boltzmann_rates(w, e, energy, target_w):
    """theta so geometric occupations with rate theta_e e_i + theta_n match both targets."""
    def means(theta):
        rate = np.exp(theta[0]) * e + np.exp(theta[1])
        occ = 1.0 / np.expm1(rate)
        return np.array([np.log(np.sum(e * occ) / energy), np.log(np.sum(w * occ) / target_w)])

    sol = optimize.root(means, x0=np.array([math.log(1.0 / energy), math.log(1.0)]), method="hybr")
    if not sol.success:
        raise NoConvergence("could not tune the occupation sampler")
    return np.exp(sol.x[0]) * e + np.exp(sol.x[1])


def sample_occupations(spec, count, seed, energy_tol=0.02, weight_tol=0.01,
                       max_draws=400_000, batch=2000):
    """Occupations m_i with sum m <= s, sum w m near s and sum e m near E.

    w_i = a_i^2 / A_0 and e_i = i^2 w_i.  The constraint lattice is
    quantised into cells: |sum w m - (s + 1/2)| <= weight_tol s and
    |sum e m - E| <= energy_tol E.  Independent geometric draws tuned to
    the cell centre are kept only when they land in the cell, so accepted
    draws are uniform given the cell.
    """
    a2 = np.asarray(spec.amplitudes) ** 2
    a0 = spec.mean_square
    if a0 == 0:
        raise ZeroEnergy("all amplitudes vanish")
    w = a2 / a0
    i = np.arange(spec.s + 1, dtype=float)
    e = i * i * w
    energy = float(np.sum(e))
    rate = _boltzmann_rates(w, e, energy, spec.s + 0.5)
    p = -np.expm1(-rate)
    rng = np.random.default_rng(seed)
    kept = []
    drawn = 0
    while len(kept) < count:
        if drawn >= max_draws:
            raise NoConvergence(f"only {len(kept)} of {count} occupation draws accepted")
        m = rng.geometric(p, size=(batch, p.size)) - 1
        drawn += batch
        ok = (m.sum(axis=1) <= spec.s)
        ok &= np.abs(m @ w - (spec.s + 0.5)) <= weight_tol * spec.s
        ok &= np.abs(m @ e - energy) <= energy_tol * energy
        kept.extend(m[ok])
    return [np.asarray(v) for v in kept[:count]], w


def flicker_weak_convergence(spec, alpha, phi, samples=100, seed=0):
    """beta^g sum_i w_i m_i phi(beta i) - integral phi(x) h_s(x + beta kappa) d(x**g).

    (beta, kappa) solve the parts/energy equations with n = E and k = s.
    """
    g, _ = convergence_exponent(alpha)
    energy = global_energy(spec)
    problem = solver.ParastatProblem(energy, float(spec.s), g)
    params = solver.solve(problem)
    occ, w = sample_occupations(spec, samples, seed)
    beta = params.b
    i = np.arange(spec.s + 1, dtype=float)
    weights = w * phi(beta * i)
    weights[0] = 0.0
    integral = solver.weighted_density_integral(phi, params.shift, problem.k, g, phi.breakpoints())
    vals = np.array([beta ** g * float(m @ weights) - integral for m in occ])
    return ConvergenceReport(
        n=energy, k=float(spec.s), alpha=g, statistic=float(vals.mean()),
        spread=float(vals.std(ddof=1)) if vals.size > 1 else 0.0, samples=int(vals.size),
        median_abs=float(np.median(np.abs(vals))), values=tuple(float(v) for v in vals),
    )
