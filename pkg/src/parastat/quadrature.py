"""Improper integrals with Bose-type kernels against the measure d(xi**alpha).

Everything here integrates against ``d(xi**alpha) = alpha * xi**(alpha-1) dxi``.
The small-xi singularity is removed by subtracting its leading term and
adding that piece back in closed form.  Power-law tails are mapped onto
[0, 1] with ``u = 1/eta``.  Exponential tails are cut where the integrand
drops below 1e-18 of its size at xi = 1, and the remainder is added from
an incomplete-gamma bound.

Two independent adaptive rules are provided so that every constant can be
cross-checked:

* ``"gauss"``: global adaptive 10-point Gauss-Legendre.  Each panel is
  compared against the sum over its two halves.
* ``"simpson"``: recursive interval halving with Richardson-corrected
  Simpson sums.
"""

import heapq
import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import DivergentIntegral, NoConvergence, OutOfRange, PoleAtZero

ABS_TOL = 1e-10
REL_TOL = 1e-9
MAX_LEVELS = 60
MAX_PANELS = 200_000

_NODES, _WEIGHTS = np.polynomial.legendre.leggauss(10)


@dataclass(frozen=True)
class IntegralValue:
    value: float
    abs_error_estimate: float
    method: str

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise NoConvergence(f"non-finite integral value {self.value!r}")
        if self.abs_error_estimate < 0:
            raise ValueError("error estimate must be non-negative")
        if self.method not in ("closed_form", "adaptive_quadrature"):
            raise ValueError(f"unknown method {self.method!r}")

    def __float__(self):
        return self.value


# ---------------------------------------------------------------- kernels

def inv_expm1_minus_inv(x):
    """1/(e^x - 1) - 1/x, accurate near 0 where it tends to -1/2."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    small = np.abs(x) < 0.05
    xs = x[small]
    x2 = xs * xs
    out[small] = -0.5 + xs * (1 / 12 + x2 * (-1 / 720 + x2 / 30240))
    xb = x[~small]
    with np.errstate(over="ignore"):
        out[~small] = 1.0 / np.expm1(xb) - 1.0 / xb
    return out


def _w_plus_half_over_x(x):
    """(1/(e^x - 1) - 1/x + 1/2) / x, smooth with value 1/12 at 0."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    small = np.abs(x) < 0.05
    x2 = x[small] ** 2
    out[small] = 1 / 12 + x2 * (-1 / 720 + x2 * (1 / 30240 - x2 / 1209600))
    xb = x[~small]
    with np.errstate(over="ignore"):
        out[~small] = (1.0 / np.expm1(xb) - 1.0 / xb + 0.5) / xb
    return out


def _inv_expm1(x):
    with np.errstate(over="ignore", divide="ignore"):
        return 1.0 / np.expm1(x)


# ---------------------------------------------------------------- engines

def _as_rows(y, npts):
    y = np.asarray(y, dtype=float)
    if y.ndim == 0:
        y = np.full(npts, float(y))
    if y.ndim == 1:
        y = y[None, :]
    return y


def _gl(f, a, b):
    h = 0.5 * (b - a)
    x = 0.5 * (a + b) + h * _NODES
    return h * (_as_rows(f(x), x.size) @ _WEIGHTS)


def _gl_halves(f, a, b):
    m = 0.5 * (a + b)
    q = 0.25 * (b - a)
    x = np.concatenate((0.5 * (a + m) + q * _NODES, 0.5 * (m + b) + q * _NODES))
    y = _as_rows(f(x), x.size)
    n = _NODES.size
    return q * (y[:, :n] @ _WEIGHTS), q * (y[:, n:] @ _WEIGHTS)


def _gauss_adaptive(f, edges, abs_tol, rel_tol, max_levels):
    heap = []
    seq = 0
    parts = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        coarse = _gl(f, lo, hi)
        left, right = _gl_halves(f, lo, hi)
        parts.append((lo, hi, coarse, left, right))
    total = sum(l + r for _, _, _, l, r in parts)
    scale = np.maximum(abs_tol, rel_tol * np.abs(total))
    err_total = np.zeros_like(total)
    frozen_err = np.zeros_like(total)
    for lo, hi, coarse, left, right in parts:
        err = np.abs(coarse - (left + right))
        err_total = err_total + err
        heapq.heappush(heap, (-float(np.max(err / scale)), seq, lo, hi, 0, left, right, err))
        seq += 1

    npanels = len(heap)
    while heap:
        tol = np.maximum(abs_tol, rel_tol * np.abs(total))
        if np.all(err_total <= tol):
            break
        _, _, lo, hi, level, left, right, err = heapq.heappop(heap)
        if level >= max_levels:
            # cannot refine further; its error stays in the budget
            frozen_err = frozen_err + err
            if np.all(frozen_err > tol):
                break
            continue
        mid = 0.5 * (lo + hi)
        total = total - (left + right)
        err_total = err_total - err
        for clo, chi, coarse in ((lo, mid, left), (mid, hi, right)):
            cl, cr = _gl_halves(f, clo, chi)
            cerr = np.abs(coarse - (cl + cr))
            total = total + cl + cr
            err_total = err_total + cerr
            heapq.heappush(heap, (-float(np.max(cerr / scale)), seq, clo, chi, level + 1, cl, cr, cerr))
            seq += 1
        npanels += 1
        if npanels > MAX_PANELS:
            raise NoConvergence("adaptive quadrature exceeded the panel budget")
    return total, err_total


def _simpson_adaptive(f, edges, tol, max_levels):
    def fv(xs):
        return _as_rows(f(np.asarray(xs, dtype=float)), len(xs))

    width = edges[-1] - edges[0]
    total = None
    err_total = None
    for a, b in zip(edges[:-1], edges[1:]):
        ya = fv([a, 0.5 * (a + b), b])
        fa, fm, fb = ya[:, 0], ya[:, 1], ya[:, 2]
        whole = (b - a) / 6 * (fa + 4 * fm + fb)
        stack = [(a, b, fa, fm, fb, whole, 0)]
        while stack:
            a0, b0, fa, fm, fb, whole, lev = stack.pop()
            m = 0.5 * (a0 + b0)
            y = fv([0.5 * (a0 + m), 0.5 * (m + b0)])
            flm, frm = y[:, 0], y[:, 1]
            left = (m - a0) / 6 * (fa + 4 * flm + fm)
            right = (b0 - m) / 6 * (fm + 4 * frm + fb)
            delta = left + right - whole
            local_tol = tol * (b0 - a0) / width
            if np.all(np.abs(delta) <= 15 * local_tol) or lev >= max_levels:
                piece = left + right + delta / 15
                total = piece if total is None else total + piece
                e = np.abs(delta) / 15
                err_total = e if err_total is None else err_total + e
            else:
                stack.append((m, b0, fm, frm, fb, right, lev + 1))
                stack.append((a0, m, fa, flm, fm, left, lev + 1))
    return total, err_total


def integrate_many(f, a, b, breakpoints=(), rule="gauss", abs_tol=ABS_TOL,
                   rel_tol=REL_TOL, max_levels=MAX_LEVELS):
    """Integrate a vectorised (possibly vector-valued) integrand on [a, b].

    ``f`` maps a 1-D array of abscissae to an array of shape (npts,) or
    (m, npts).  Returns ``(values, abs_errors)`` as arrays of length m.
    """
    if not (math.isfinite(a) and math.isfinite(b)) or b < a:
        raise OutOfRange(f"bad integration interval [{a}, {b}]")
    if b == a:
        v = _as_rows(f(np.array([a])), 1)
        return np.zeros(v.shape[0]), np.zeros(v.shape[0])
    edges = sorted({float(a), float(b), *(float(p) for p in breakpoints if a < p < b)})
    if rule == "gauss":
        val, err = _gauss_adaptive(f, edges, abs_tol, rel_tol, max_levels)
    elif rule == "simpson":
        val, err = _simpson_adaptive(f, edges, abs_tol, max_levels)
    else:
        raise ValueError(f"unknown rule {rule!r}")
    return np.asarray(val, dtype=float), np.asarray(err, dtype=float)


def integrate(f, a, b, breakpoints=(), rule="gauss", **tol):
    val, err = integrate_many(f, a, b, breakpoints, rule, **tol)
    return IntegralValue(float(val[0]), float(err[0]), "adaptive_quadrature")


def stieltjes_many(g, alpha, upper, breakpoints=(), rule="gauss", **tol):
    """Integrate g(u) d(u**alpha) over [0, upper].

    Substituting t = u**alpha turns the weight into dt, which removes the
    u**(alpha-1) singularity from the integrand.
    """
    if alpha == 1.0:
        return integrate_many(g, 0.0, upper, breakpoints, rule, **tol)
    inv = 1.0 / alpha

    def h(t):
        return g(np.power(t, inv))

    bps = [p ** alpha for p in breakpoints if 0 < p < upper]
    return integrate_many(h, 0.0, upper ** alpha, bps, rule, **tol)


def _exp_cutoff(f, start=1.0):
    """Point beyond which f (roughly exponentially decaying) is < 1e-18 f(start)."""
    ref = abs(float(_as_rows(f(np.array([start])), 1)[0, 0]))
    u = max(start * 2, 8.0)
    while abs(float(_as_rows(f(np.array([u])), 1)[0, 0])) > 1e-18 * ref:
        u *= 1.25
        if u > 1e6:
            raise NoConvergence("integrand does not decay")
    return u


# ---------------------------------------------------------------- constants

def _exp_part(s, alpha, rule):
    """alpha * integral_1^inf xi**(s-1) / (e^xi - 1) dxi, tail included."""
    def f(x):
        return alpha * np.power(x, s - 1) * _inv_expm1(x)

    upper = _exp_cutoff(f)
    body = integrate(f, 1.0, upper, rule=rule, abs_tol=1e-13, rel_tol=1e-13)
    tail = alpha * special.gamma(s) * special.gammaincc(s, upper)
    return body.value + tail, body.abs_error_estimate + tail


def bose_integral(p, alpha, method="closed_form", rule="gauss"):
    """Integral of xi**p / (e^xi - 1) against d(xi**alpha) over (0, inf).

    Closed form: alpha * Gamma(p + alpha) * zeta(p + alpha).
    """
    if alpha <= 0:
        raise PoleAtZero(f"alpha must be positive, got {alpha}")
    s = p + alpha
    if s <= 1:
        raise DivergentIntegral(f"p + alpha = {s} <= 1 diverges at the origin")
    if method == "closed_form":
        v = alpha * special.gamma(s) * special.zeta(s, 1)
        return IntegralValue(float(v), 0.0, "closed_form")
    if method != "quadrature":
        raise ValueError(f"unknown method {method!r}")

    # on (0, 1): xi**(s-1)/(e^xi-1) = xi**(s-2) + xi**(s-1) * w(xi)
    def head(x):
        return alpha * np.power(x, s - 1) * inv_expm1_minus_inv(x)

    h = integrate(head, 0.0, 1.0, rule=rule, abs_tol=1e-13, rel_tol=1e-13)
    t, terr = _exp_part(s, alpha, rule)
    value = alpha / (s - 1) + h.value + t
    return IntegralValue(float(value), h.abs_error_estimate + terr, "adaptive_quadrature")


def regularized_c(alpha, rule="gauss"):
    """Integral of (1/xi - 1/(e^xi - 1)) against d(xi**alpha), 0 < alpha < 1.

    Tends to 1/2 as alpha -> 0 and diverges as alpha -> 1.
    """
    if not 0 < alpha < 1:
        raise DivergentIntegral(f"alpha must lie in (0, 1), got {alpha}")

    # (0, 1): the integrand is 1/2 + O(xi); the constant part gives 1/2
    def head(x):
        return -alpha * np.power(x, alpha) * _w_plus_half_over_x(x)

    h = integrate(head, 0.0, 1.0, rule=rule, abs_tol=1e-13, rel_tol=1e-13)
    # (1, inf): alpha xi**(alpha-2) integrates to alpha/(1-alpha)
    t, terr = _exp_part(alpha, alpha, rule)
    value = 0.5 + h.value + alpha / (1 - alpha) - t
    return IntegralValue(float(value), h.abs_error_estimate + terr, "adaptive_quadrature")


def c1_const(alpha, rule="gauss"):
    """Integral of 1 / (2 (1 + eta/2)) against d(eta**alpha), 0 < alpha < 1."""
    if not 0 < alpha < 1:
        raise DivergentIntegral(f"alpha must lie in (0, 1), got {alpha}")

    def head(x):
        return -alpha * np.power(x, alpha) / (2 * (2 + x))

    # eta > 1 mapped to u = 1/eta in (0, 1)
    def tail(u):
        return -2 * alpha * np.power(u, 1 - alpha) / (2 * u + 1)

    h = integrate(head, 0.0, 1.0, rule=rule, abs_tol=1e-13, rel_tol=1e-13)
    t = integrate(tail, 0.0, 1.0, rule=rule, abs_tol=1e-13, rel_tol=1e-13)
    value = 0.5 + h.value + alpha / (1 - alpha) + t.value
    return IntegralValue(float(value), h.abs_error_estimate + t.abs_error_estimate,
                         "adaptive_quadrature")


def c_one_dim_factors(rule="gauss"):
    """The two factors of the one-dimensional threshold constant.

    first  = integral_0^inf (1/(e^{xi^2} - 1) - 1/xi^2) dxi      (negative)
    second = (1/2 integral_0^inf sqrt(xi)/(e^xi - 1) dxi)^(2/3)
    """
    def head(x):
        return inv_expm1_minus_inv(x * x)

    def body(x):
        return _inv_expm1(x * x)

    h = integrate(head, 0.0, 1.0, rule=rule, abs_tol=1e-13, rel_tol=1e-13)
    upper = _exp_cutoff(body)
    b = integrate(body, 1.0, upper, rule=rule, abs_tol=1e-13, rel_tol=1e-13)
    tail = 0.5 * math.sqrt(math.pi) * special.erfc(upper)
    first = IntegralValue(h.value - 1.0 + b.value + tail,
                          h.abs_error_estimate + b.abs_error_estimate + tail,
                          "adaptive_quadrature")
    inner = bose_integral(0.5, 1.0, method="quadrature", rule=rule)
    second_val = (0.5 * inner.value) ** (2 / 3)
    second_err = (2 / 3) * second_val / (0.5 * inner.value) * 0.5 * inner.abs_error_estimate
    second = IntegralValue(second_val, second_err, "adaptive_quadrature")
    return first, second


def c_one_dim(rule="gauss"):
    """Constant c in the one-dimensional threshold 4 c^2 n^(2/3)."""
    first, second = c_one_dim_factors(rule)
    value = first.value * second.value
    err = abs(first.value) * second.abs_error_estimate + abs(second.value) * first.abs_error_estimate
    return IntegralValue(value, err, "adaptive_quadrature")
