"""Closed-form and numerical estimates of the threshold k0(n).

Above k0 the extra parts budget goes unused: the parts total saturates
and the remainder sits in the zero level as a condensate.
"""

import math
import warnings
from dataclasses import dataclass

from scipy import optimize

from . import quadrature, solver
from .errors import DivergentIntegral, NoConvergence, OutOfRange

# c = pi * sqrt(2/3) governs p(n) ~ exp(c sqrt(n))
C_PARTITION = 2 * math.pi / math.sqrt(6)
# centering constant of the part-count distribution: -2 log(c/2)
ALPHA_CENTER = -2 * math.log(C_PARTITION / 2)

METHODS = ("leading_order", "erdos_two_term", "d1_closed", "general_alpha", "numeric_fixed_point")


@dataclass(frozen=True)
class ThresholdResult:
    k0: float
    method: str
    alpha: float
    n: float

    def __post_init__(self):
        if not (self.k0 > 0 and math.isfinite(self.k0)):
            raise OutOfRange(f"threshold must be positive and finite, got {self.k0}")
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")


def _check_n(n, minimum):
    if not (math.isfinite(n) and n >= minimum):
        raise OutOfRange(f"n must be at least {minimum}, got {n}")


def k0_leading(n):
    """(sqrt 6 / 2 pi) sqrt(n) log n."""
    _check_n(n, 2)
    return ThresholdResult(math.sqrt(n) * math.log(n) / C_PARTITION, "leading_order", 1.0, n)


def k0_erdos(n):
    """Centre of the number-of-parts distribution, c^-1 sqrt(n) (log n + alpha).

    alpha = -2 log(c/2); the extra term moves the leading-log estimate onto
    the actual mode of p_k(n) for moderate n.
    """
    _check_n(n, 2)
    k0 = math.sqrt(n) * (math.log(n) + ALPHA_CENTER) / C_PARTITION
    return ThresholdResult(k0, "erdos_two_term", 1.0, n)


def b_d1(n, half_factor=False):
    """Inverse temperature for the one-dimensional case at kappa = 0.

    Solves n = b^(-3/2) J with J the Bose integral of sqrt(xi).  With
    ``half_factor`` the relation carries an extra 1/2 in front.
    """
    j = quadrature.bose_integral(0.5, 1.0).value
    if half_factor:
        j *= 0.5
    return (j / n) ** (2 / 3)


def k0_d1(n, half_factor=False):
    """4 c^2 n^(2/3), c the one-dimensional constant (about -1.4268).

    ``half_factor`` is accepted for symmetry with :func:`b_d1`; the closed
    form itself does not depend on it.
    """
    _check_n(n, 2)
    c = quadrature.c_one_dim().value
    return ThresholdResult(4 * c * c * n ** (2 / 3), "d1_closed", 0.5, n)


def k0_d1_quadratic(n, half_factor=False):
    """Cross-check for the one-dimensional threshold from the quadratic in sqrt(k0).

    With F the first factor of the one-dimensional constant and g = -F/sqrt(b),
    the balance reduces to x^2 - g x + g = 0 for x = sqrt(k0); the larger
    root is returned.
    """
    _check_n(n, 2)
    first, _ = quadrature.c_one_dim_factors()
    g = -first.value / math.sqrt(b_d1(n, half_factor))
    disc = g * g - 4 * g
    if disc < 0:
        raise NoConvergence("quadratic for sqrt(k0) has no real root")
    x = 0.5 * (g + math.sqrt(disc))
    return ThresholdResult(x * x, "d1_closed", 0.5, n)


def k0_general(n, alpha):
    """c^(1/alpha) n^(1/(1+alpha)) I^(-1/(1+alpha)) for 0 < alpha < 1.

    c is the regularised constant and I the Bose integral of xi, both at
    exponent alpha.  Accuracy degrades as alpha -> 1 where c blows up.
    """
    if not 0 < alpha < 1:
        raise DivergentIntegral(f"alpha must lie in (0, 1), got {alpha}")
    _check_n(n, 2)
    if alpha > 0.95:
        warnings.warn("k0_general loses accuracy for alpha > 0.95", RuntimeWarning, stacklevel=2)
    c = quadrature.regularized_c(alpha).value
    big_i = quadrature.bose_integral(1.0, alpha).value
    k0 = c ** (1 / alpha) * n ** (1 / (1 + alpha)) * big_i ** (-1 / (1 + alpha))
    return ThresholdResult(k0, "general_alpha", alpha, n)


def k0(n, alpha=1.0):
    """Dispatch to the closed form appropriate for alpha."""
    if alpha == 1.0:
        return k0_erdos(n)
    return k0_general(n, alpha)


def k0_numeric(n, alpha=1.0):
    """The k at which the solved kappa(n, k) vanishes.

    At kappa = 0 the n equation fixes b(k) in closed form, and the k
    equation becomes k = b(k)^(-alpha) F_k(0) with F_k(0) evaluated by
    quadrature.  The fixed point is found by Brent's method in log k.
    """
    _check_n(n, 100)
    if not 0 < alpha <= 1:
        raise OutOfRange(f"alpha must lie in (0, 1], got {alpha}")

    def gap(logk):
        k = math.exp(logk)
        b = solver.kappa_zero_b(n, k, alpha)
        f, _ = solver.moments(0.0, k, alpha)
        return logk - math.log(b ** (-alpha) * f)

    lo, hi = math.log(1.5), math.log(n / 2)
    if gap(lo) >= 0 or gap(hi) <= 0:
        raise NoConvergence("kappa = 0 fixed point is not bracketed in [1.5, n/2]")
    logk = optimize.brentq(gap, lo, hi, xtol=1e-15, rtol=1e-15, maxiter=200)
    return ThresholdResult(math.exp(logk), "numeric_fixed_point", alpha, n)


# ---------------------------------------------------------------- flicker

def flicker_gamma(alpha):
    """Stieltjes exponent gamma = 1/2 - alpha/4 attached to a 1/f^alpha spectrum."""
    from .errors import UnsupportedAlpha

    if not 0 < alpha < 2:
        raise UnsupportedAlpha(f"spectral exponent must lie in (0, 2), got {alpha}")
    return 0.5 - alpha / 4


@dataclass(frozen=True)
class FlickerCritical:
    alpha: float
    gamma: float
    energy: float
    s: int
    beta: float
    critical_energy: float
    s_tilde: float
    s_tilde_analogy: float


def flicker_beta(energy, s, gamma):
    """beta from the energy equation at kappa = 0.

    energy = integral xi h_s(beta xi) d(xi**gamma) = beta^(-1-gamma) G_s(0),
    so beta = (G_s(0)/energy)^(1/(1+gamma)).
    """
    _, g = solver.moments(0.0, float(s), gamma)
    return (g / energy) ** (1 / (1 + gamma))


def flicker_critical_energy(alpha, energy, s):
    """Critical normalised energy pi^2 c0 c^(-1/gamma) beta^(-gamma) and s~.

    c is the regularised constant and c0 the Bose integral of xi, both at
    exponent gamma.  ``s_tilde`` follows c^(1/g) c0^(1/(1+g)) E^(1/(1+g));
    ``s_tilde_analogy`` carries c0^(-1/(1+g)) instead, which is what the
    ordinary-partition threshold gives when alpha is replaced by gamma.
    """
    gamma = flicker_gamma(alpha)
    if energy <= 0:
        raise OutOfRange("energy must be positive")
    if s < 2:
        raise OutOfRange("need s >= 2")
    c = quadrature.regularized_c(gamma).value
    c0 = quadrature.bose_integral(1.0, gamma).value
    beta = flicker_beta(energy, s, gamma)
    e_cr = math.pi ** 2 * c0 * c ** (-1 / gamma) * beta ** (-gamma)
    s_tilde = c ** (1 / gamma) * c0 ** (1 / (1 + gamma)) * energy ** (1 / (1 + gamma))
    s_alt = c ** (1 / gamma) * c0 ** (-1 / (1 + gamma)) * energy ** (1 / (1 + gamma))
    return FlickerCritical(alpha, gamma, energy, int(s), beta, e_cr, s_tilde, s_alt)
