"""Inverse temperature b and chemical potential kappa for a bounded-parts ensemble.

Given a total ``n``, a parts budget ``k`` and a dimension exponent
``alpha`` (``alpha = 1`` is the ordinary partition case, ``alpha = 1/2``
the one-dimensional one), we solve

    k = integral_0^inf h_k(b (x + kappa)) d(x**alpha)
    n = integral_0^inf x h_k(b (x + kappa)) d(x**alpha)

with the capped Bose density h_k(y) = 1/(e^y - 1) - k/(e^{ky} - 1).
Writing u = b x and m = b kappa gives

    k = b**(-alpha)   F(m),   F(m) = integral h_k(u + m) d(u**alpha)
    n = b**(-1-alpha) G(m),   G(m) = integral u h_k(u + m) d(u**alpha)

so all numerical work happens in the scaled shift m.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from . import quadrature
from .errors import InfeasibleProblem, NoConvergence, OutOfRange

_TAIL = 60.0  # h_k(y) < 1e-26 beyond y = 60
_INT_TOL = dict(abs_tol=1e-300, rel_tol=1e-13)


@dataclass(frozen=True)
class ParastatProblem:
    n: float
    k: float
    alpha: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.n) and self.n > 0):
            raise OutOfRange(f"n must be positive, got {self.n}")
        if not (math.isfinite(self.k) and self.k > 1):
            raise OutOfRange(f"k must exceed 1, got {self.k}")
        if not 0 < self.alpha <= 1:
            raise OutOfRange(f"alpha must lie in (0, 1], got {self.alpha}")
        if self.n / self.k < 2:
            raise InfeasibleProblem(f"n/k = {self.n / self.k:.4g} < 2 leaves no room for a solution")


@dataclass(frozen=True)
class ThermoParams:
    b: float
    kappa: float
    residuals: tuple
    method: str = "newton"
    iterations: int = 0

    def __post_init__(self):
        if not (self.b > 0 and math.isfinite(self.b)):
            raise NoConvergence(f"b must be positive and finite, got {self.b}")
        if not math.isfinite(self.kappa):
            raise NoConvergence("kappa is not finite")

    @property
    def mu(self):
        """Condensate potential; positive exactly when kappa < 0."""
        return -self.kappa

    @property
    def shift(self):
        """Scaled shift m = b * kappa."""
        return self.b * self.kappa


# ---------------------------------------------------------------- densities

def para_density(y, k):
    """Mean occupation 1/(e^y - 1) - k/(e^{ky} - 1) of a level capped at k - 1.

    Finite at y = 0 with value (k-1)/2 and valued in (0, k-1).  Negative
    arguments use h(-y) = (k - 1) - h(y).
    """
    y = np.asarray(y, dtype=float)
    a = np.abs(y)
    out = np.empty_like(a)
    small = k * a < 1e-2
    s = a[small]
    s2 = s * s
    k2 = k * k
    out[small] = (k - 1) / 2 + s * ((1 - k2) / 12 + s2 * (-(1 - k2 * k2) / 720 + s2 * (1 - k2 ** 3) / 30240))
    big = a[~small]
    with np.errstate(over="ignore"):
        out[~small] = 1.0 / np.expm1(big) - k / np.expm1(k * big)
    neg = y < 0
    out[neg] = (k - 1) - out[neg]
    return out


def log_level_sum(y, k):
    """log sum_{j=0}^{k} e^{-j y}, the log of a single capped level's weight sum."""
    y = np.asarray(y, dtype=float)
    a = np.abs(y)
    out = np.empty_like(a)
    tiny = a < 1e-300
    out[tiny] = math.log(k + 1)
    aa = a[~tiny]
    with np.errstate(over="ignore"):
        out[~tiny] = np.log(-np.expm1(-(k + 1) * aa)) - np.log(-np.expm1(-aa))
    neg = y < 0
    out[neg] += k * a[neg]
    return out


def _breakpoints(m, k):
    p0 = max(0.0, -m)
    pts = {p0, p0 + 1.0, p0 + 5.0, p0 + 15.0}
    for j in (1.0, 4.0, 16.0, 64.0):
        pts.add(p0 + j / k)
        if p0 - j / k > 0:
            pts.add(p0 - j / k)
    return sorted(p for p in pts if p > 0), p0 + _TAIL


def moments(m, k, alpha, rule="gauss"):
    """Return (F(m), G(m)) for the scaled shift m."""
    bps, upper = _breakpoints(m, k)

    def g(u):
        h = para_density(u + m, k)
        return np.vstack((h, u * h))

    val, _ = quadrature.stieltjes_many(g, alpha, upper, bps, rule, **_INT_TOL)
    return float(val[0]), float(val[1])


def level_sum_integral(m, k, alpha):
    bps, upper = _breakpoints(m, k)
    val, _ = quadrature.stieltjes_many(lambda u: log_level_sum(u + m, k), alpha, upper, bps,
                                       **_INT_TOL)
    return float(val[0])


def weighted_density_integral(phi, m, k, alpha, extra_breakpoints=(), upper=None):
    """integral phi(x) h_k(x + m) d(x**alpha) over (0, upper)."""
    bps, up = _breakpoints(m, k)
    if upper is not None:
        up = min(up, upper)
    bps = sorted(set(bps) | {p for p in extra_breakpoints if 0 < p < up})
    val, _ = quadrature.stieltjes_many(lambda u: phi(u) * para_density(u + m, k), alpha, up, bps,
                                       **_INT_TOL)
    return float(val[0])


def kappa_zero_b(n, k, alpha):
    """b at kappa = 0, where G(0) = I (1 - k**-alpha) in closed form.

    I is the Bose integral of xi against d(xi**alpha).
    """
    big_i = quadrature.bose_integral(1.0, alpha).value
    return (big_i * (1 - k ** (-alpha)) / n) ** (1 / (1 + alpha))


# ---------------------------------------------------------------- solving

def _residual(problem, logb, kappa):
    b = math.exp(logb)
    f, g = moments(b * kappa, problem.k, problem.alpha)
    if f <= 0 or g <= 0:
        return np.array([np.inf, np.inf])
    a = problem.alpha
    return np.array([
        math.log(f) - a * logb - math.log(problem.k),
        math.log(g) - (1 + a) * logb - math.log(problem.n),
    ])


def _relative_residuals(problem, b, kappa):
    f, g = moments(b * kappa, problem.k, problem.alpha)
    a = problem.alpha
    big_k = b ** (-a) * f
    big_n = b ** (-1 - a) * g
    return ((big_k - problem.k) / problem.k, (big_n - problem.n) / problem.n)


def _newton(problem, b0, kappa0, tol, max_iter):
    x = np.array([math.log(b0), kappa0])
    r = _residual(problem, *x)
    for it in range(1, max_iter + 1):
        if np.max(np.abs(r)) < tol:
            return x, it - 1
        b = math.exp(x[0])
        hb = 1e-6
        hk = 1e-6 * max(abs(x[1]), 1.0 / (b * problem.k))
        jac = np.empty((2, 2))
        jac[:, 0] = (_residual(problem, x[0] + hb, x[1]) - _residual(problem, x[0] - hb, x[1])) / (2 * hb)
        jac[:, 1] = (_residual(problem, x[0], x[1] + hk) - _residual(problem, x[0], x[1] - hk)) / (2 * hk)
        try:
            step = np.linalg.solve(jac, -r)
        except np.linalg.LinAlgError:
            return None, it
        if not np.all(np.isfinite(step)):
            return None, it
        norm = np.max(np.abs(r))
        lam = 1.0
        for _ in range(40):
            trial = x + lam * step
            rt = _residual(problem, *trial)
            if np.max(np.abs(rt)) < norm:
                x, r = trial, rt
                break
            lam *= 0.5
        else:
            return None, it
    if np.max(np.abs(r)) < tol:
        return x, max_iter
    return None, max_iter


def _bracketed(problem, tol):
    """Solve the reduced equation in m, then recover b from the k equation."""
    a = problem.alpha
    k, n = problem.k, problem.n
    c = (1 + a) / a
    target = math.log(n) - c * math.log(k)

    def red(m):
        f, g = moments(m, k, a)
        return math.log(g) - c * math.log(f) - target

    r0 = red(0.0)
    if r0 == 0:
        lo = hi = 0.0
    else:
        step = 1.0 / k
        direction = -1.0 if r0 > 0 else 1.0
        prev = 0.0
        for _ in range(200):
            m = direction * step
            rm = red(m)
            if (rm > 0) != (r0 > 0):
                lo, hi = sorted((prev, m))
                break
            prev = m
            step *= 2
            if step > 1e4:
                raise NoConvergence("could not bracket the scaled shift")
        else:
            raise NoConvergence("could not bracket the scaled shift")
    m = lo if lo == hi else optimize.brentq(red, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps,
                                            maxiter=500)
    f, _ = moments(m, k, a)
    b = (f / k) ** (1 / a)
    return b, m / b


def solve(problem, method="newton", tol=1e-12, max_iter=60, init=None):
    """Solve for (b, kappa).  Newton on (log b, kappa), bracketed fallback.

    ``init`` is an optional (b, kappa) warm start; the default starts from
    kappa = 0 and the matching closed-form b.
    """
    if method not in ("newton", "bracketed"):
        raise ValueError(f"unknown method {method!r}")
    used = method
    iters = 0
    if method == "newton":
        if init is None:
            b0, k0 = kappa_zero_b(problem.n, problem.k, problem.alpha), 0.0
        else:
            b0, k0 = init
        x, iters = _newton(problem, b0, k0, tol, max_iter)
        if x is None:
            used = "bracketed"
        else:
            b, kappa = math.exp(x[0]), float(x[1])
    if used == "bracketed":
        b, kappa = _bracketed(problem, tol)
    res = _relative_residuals(problem, b, kappa)
    if max(abs(res[0]), abs(res[1])) > 1e-8:
        raise NoConvergence(f"solver residuals {res} exceed 1e-8")
    return ThermoParams(b=b, kappa=kappa, residuals=res, method=used, iterations=iters)


# ---------------------------------------------------------------- entropy

def entropy(problem, params):
    """Grand-canonical entropy S = b n + b kappa k + integral log Z(b(x+kappa)) d(x**alpha).

    Its dependence on k near the threshold is the Gaussian-type decay that
    compares against log(p_k(n) / p_k0(n)).
    """
    m = params.shift
    a = problem.alpha
    return params.b * problem.n + m * problem.k + params.b ** (-a) * level_sum_integral(m, problem.k, a)


def log_prob_ratio(n, k, k0, alpha=1.0):
    """S(k) - S(k0) at fixed n."""
    pk = ParastatProblem(n, k, alpha)
    p0 = ParastatProblem(n, k0, alpha)
    return entropy(pk, solve(pk)) - entropy(p0, solve(p0))
