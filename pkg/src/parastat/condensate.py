"""Weak-convergence and condensate-bound checks on sampled partitions.

The weak-convergence statistic compares a lattice sum over sampled
occupation numbers with the integral predicted by the solved (b, kappa):

    b^alpha sum_i N_i phi(b xi_i)  -  integral phi(x) h_k(x + b kappa) d(x**alpha)

where xi_i = i**(1/alpha) is the energy of level i.  For alpha = 1 this
is b sum N_i phi(b i) - integral phi(x) h_k(x + b kappa) dx.  One code
path serves every alpha.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import solver
from .errors import HypothesisUnmet, OutOfRange

PHI_KINDS = ("exp_decay", "indicator_interval", "polynomial_cutoff")
_SNAP = 1e-9
MIN_SAMPLES = 30


@dataclass(frozen=True)
class TestFunction:
    """A bounded test function on [0, inf).

    exp_decay: exp(-rate x); params (rate,)
    indicator_interval: 1 on [lo, hi); params (lo, hi)
    polynomial_cutoff: (1 - x/cutoff)^power on [0, cutoff); params (cutoff, power).
        power = 0 with cutoff = inf is the constant function 1.
    """

    __test__ = False  # not a pytest class

    kind: str
    params: tuple = ()

    def __post_init__(self):
        if self.kind not in PHI_KINDS:
            raise ValueError(f"unknown test function kind {self.kind!r}")
        if self.kind == "indicator_interval":
            lo, hi = self.params
            if not 0 <= lo < hi:
                raise OutOfRange("indicator needs 0 <= lo < hi")

    @classmethod
    def constant(cls):
        return cls("polynomial_cutoff", (math.inf, 0))

    def snapped(self, b, alpha=1.0):
        """Move indicator edges off the lattice b * i**(1/alpha) by 1e-9."""
        if self.kind != "indicator_interval":
            return self
        edges = []
        for e in self.params:
            i = (e / b) ** alpha
            near = b * round(i) ** (1 / alpha)
            edges.append(e + _SNAP if abs(e - near) < _SNAP else e)
        return TestFunction(self.kind, tuple(edges))

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "exp_decay":
            rate = self.params[0] if self.params else 1.0
            return np.exp(-rate * x)
        if self.kind == "indicator_interval":
            lo, hi = self.params
            return ((x >= lo) & (x < hi)).astype(float)
        cutoff, power = self.params
        if math.isinf(cutoff):
            return np.ones_like(x)
        out = np.zeros_like(x)
        inside = x < cutoff
        out[inside] = (1 - x[inside] / cutoff) ** power
        return out

    def breakpoints(self):
        if self.kind == "indicator_interval":
            return tuple(self.params)
        if self.kind == "polynomial_cutoff" and not math.isinf(self.params[0]):
            return (self.params[0],)
        return ()

    def support_end(self):
        if self.kind == "indicator_interval":
            return self.params[1]
        if self.kind == "polynomial_cutoff":
            return self.params[0]
        return None


@dataclass(frozen=True)
class ConvergenceReport:
    n: float
    k: float
    alpha: float
    statistic: float
    spread: float
    samples: int
    median_abs: float
    values: tuple

    def __post_init__(self):
        if self.samples < MIN_SAMPLES:
            raise OutOfRange(f"need at least {MIN_SAMPLES} samples, got {self.samples}")
        if self.spread < 0:
            raise ValueError("spread must be non-negative")


def lattice_sum(occupancy, b, alpha, phi, truncate_a=None, weights=None):
    """b^alpha sum_{i>=1} w_i N_i phi(b i^(1/alpha)), optionally only b xi_i <= A."""
    items = [(i, v) for i, v in occupancy.items() if i >= 1]
    if not items:
        return 0.0
    idx = np.array([i for i, _ in items], dtype=float)
    occ = np.array([v for _, v in items], dtype=float)
    x = b * idx ** (1 / alpha)
    val = occ * phi(x)
    if weights is not None:
        val = val * np.array([weights[int(i)] for i in idx])
    if truncate_a is not None:
        val = val[x <= truncate_a]
    return b ** alpha * float(np.sum(val))


def predicted_integral(phi, problem, params, truncate_a=None):
    """integral phi(x) h_k(x + b kappa) d(x**alpha), cut at A when truncating."""
    return solver.weighted_density_integral(phi, params.shift, problem.k, problem.alpha,
                                            phi.breakpoints(), upper=truncate_a)


def weak_convergence_statistic(samples, problem, params, phi, truncate_a=None):
    """Per-sample lattice sum minus the predicted integral, summarised.

    ``truncate_a`` restricts both sides to x <= A.  For k above the
    threshold, pass the problem and parameters solved at k0 (where kappa
    vanishes) together with samples drawn at k.
    """
    if not samples:
        raise OutOfRange("no samples")
    phi = phi.snapped(params.b, problem.alpha)
    integral = predicted_integral(phi, problem, params, truncate_a)
    vals = np.array([
        lattice_sum(s.counts, params.b, problem.alpha, phi, truncate_a) - integral
        for s in samples
    ])
    spread = float(np.std(vals, ddof=1)) if vals.size > 1 else 0.0
    return ConvergenceReport(
        n=problem.n, k=problem.k, alpha=problem.alpha,
        statistic=float(np.mean(vals)), spread=spread, samples=int(vals.size),
        median_abs=float(np.median(np.abs(vals))), values=tuple(float(v) for v in vals),
    )


def tail_exponent(alpha, delta):
    """Exponent e in the tail bound exp(-(k - k0)^e) for a dimension case.

    alpha = 1 gives 1/2 - delta, alpha = 1/2 gives 1/3 - delta and a
    general alpha gives alpha/(alpha + 1) - delta.
    """
    if not 0 < delta < 0.5:
        raise OutOfRange("delta must lie in (0, 1/2)")
    if alpha == 1.0:
        e = 0.5 - delta
    elif alpha == 0.5:
        e = 1 / 3 - delta
    else:
        e = alpha / (alpha + 1) - delta
    if e <= 0:
        raise OutOfRange(f"delta = {delta} leaves a non-positive exponent")
    return e


@dataclass(frozen=True)
class BoundReport:
    k: float
    k0: float
    alpha: float
    band_width: float
    tail_exponent: float
    bound: float
    violation_fraction: float
    mc_slack: float
    violations_ok: bool
    median_abs_deviation: float
    median_ok: bool
    samples: int


def condensate_bound_check(samples, k, threshold, delta=0.1, delta1=0.15, n=None):
    """Check that N_0 concentrates around k - k0 when k exceeds the threshold.

    The band is delta1 k0 for alpha in {1, 1/2} and delta1 n^(1/(1+alpha))
    otherwise.  ``violations_ok`` compares the fraction of samples outside
    the band with exp(-(k - k0)^e) plus a three-sigma binomial allowance
    at that bound.
    """
    k0 = threshold.k0
    alpha = threshold.alpha
    if k <= k0:
        raise HypothesisUnmet(f"k = {k} does not exceed the threshold {k0:.6g}")
    if not samples:
        raise OutOfRange("no samples")
    n = threshold.n if n is None else n
    if alpha in (1.0, 0.5):
        width = delta1 * k0
    else:
        width = delta1 * n ** (1 / (1 + alpha))
    e = tail_exponent(alpha, delta)
    bound = math.exp(-((k - k0) ** e))
    n0 = np.array([s.n0 for s in samples], dtype=float)
    dev = np.abs(n0 - (k - k0))
    frac = float(np.mean(dev > width))
    slack = 3 * math.sqrt(bound * (1 - bound) / n0.size)
    med = float(np.median(dev))
    return BoundReport(
        k=k, k0=k0, alpha=alpha, band_width=width, tail_exponent=e, bound=bound,
        violation_fraction=frac, mc_slack=slack, violations_ok=frac <= bound + slack,
        median_abs_deviation=med, median_ok=med <= width, samples=int(n0.size),
    )
