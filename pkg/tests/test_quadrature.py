import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st

from parastat import quadrature
from parastat.errors import DivergentIntegral, PoleAtZero


def test_gauss_polynomial_exact():
    v = quadrature.integrate(lambda x: x ** 7 - 3 * x ** 2, -1.0, 2.0)
    assert v.value == pytest.approx(2 ** 8 / 8 - 1 / 8 - (8 + 1), abs=1e-13)


def test_vector_integrand_rows():
    vals, errs = quadrature.integrate_many(lambda x: np.vstack((np.sin(x), np.cos(x))), 0.0, math.pi)
    assert vals == pytest.approx([2.0, 0.0], abs=1e-12)
    assert np.all(errs >= 0)


@pytest.mark.parametrize("rule", ["gauss", "simpson"])
def test_breakpoint_kink(rule):
    v = quadrature.integrate(lambda x: np.abs(x - 0.3), 0.0, 1.0, breakpoints=(0.3,), rule=rule,
                             abs_tol=1e-12, rel_tol=1e-12)
    assert v.value == pytest.approx(0.045 + 0.245, abs=1e-10)


def test_stieltjes_substitution():
    # integral of 1 d(u**alpha) over [0, 2] is 2**alpha
    vals, _ = quadrature.stieltjes_many(lambda u: np.ones_like(u), 0.3, 2.0)
    assert vals[0] == pytest.approx(2 ** 0.3, rel=1e-13)


def test_kernel_near_zero_matches_direct():
    x = np.array([1e-8, 1e-3, 0.04, 0.06, 1.0])
    with mpmath.workdps(40):
        direct = np.array([float(1 / mpmath.expm1(v) - 1 / mpmath.mpf(v)) for v in x])
    assert quadrature.inv_expm1_minus_inv(x) == pytest.approx(direct, rel=1e-12)


@pytest.mark.parametrize("p,alpha", [(1.0, 1.0), (0.5, 1.0), (1.0, 0.5), (1.0, 0.25), (0.7, 0.6)])
@pytest.mark.parametrize("rule", ["gauss", "simpson"])
def test_bose_integral_routes_match_gamma_zeta(p, alpha, rule):
    ref = float(alpha * mpmath.gamma(p + alpha) * mpmath.zeta(p + alpha))
    closed = quadrature.bose_integral(p, alpha).value
    quad = quadrature.bose_integral(p, alpha, method="quadrature", rule=rule)
    assert closed == pytest.approx(ref, rel=1e-12)
    assert quad.value == pytest.approx(ref, rel=1e-10)
    assert quad.method == "adaptive_quadrature"


def test_bose_integral_domain():
    with pytest.raises(PoleAtZero):
        quadrature.bose_integral(1.0, 0.0)
    with pytest.raises(DivergentIntegral):
        quadrature.bose_integral(0.2, 0.5)


@pytest.mark.parametrize("alpha", [0.1, 0.25, 0.5, 0.75, 0.9])
def test_regularized_c_closed_form(alpha):
    want = -math.gamma(1 + alpha) * float(mpmath.zeta(alpha))
    for rule in ("gauss", "simpson"):
        assert quadrature.regularized_c(alpha, rule=rule).value == pytest.approx(want, rel=1e-10)


def test_regularized_c_domain():
    for a in (0.0, 1.0, 1.3):
        with pytest.raises(DivergentIntegral):
            quadrature.regularized_c(a)


@pytest.mark.parametrize("alpha", [0.2, 0.5, 0.8])
def test_c1_closed_form(alpha):
    want = alpha * 2 ** (alpha - 1) * math.pi / math.sin(math.pi * alpha)
    assert quadrature.c1_const(alpha).value == pytest.approx(want, rel=1e-10)


def test_c_one_dim():
    f1, f2 = quadrature.c_one_dim_factors()
    assert f1.value == pytest.approx(math.sqrt(math.pi) * float(mpmath.zeta(0.5)) / 2, rel=1e-10)
    assert f2.value == pytest.approx((0.5 * math.gamma(1.5) * float(mpmath.zeta(1.5))) ** (2 / 3), rel=1e-10)
    assert quadrature.c_one_dim().value == pytest.approx(f1.value * f2.value, rel=1e-12)
    assert quadrature.c_one_dim().value == pytest.approx(-1.42682, abs=1e-5)


@given(st.floats(0.05, 0.95))
def test_regularized_c_rules_agree(alpha):
    g = quadrature.regularized_c(alpha, rule="gauss").value
    s = quadrature.regularized_c(alpha, rule="simpson").value
    assert g == pytest.approx(s, rel=1e-9)


@given(st.floats(0.1, 3.0), st.floats(0.2, 1.0))
def test_bose_integral_positive_and_routes_agree(p, alpha):
    if p + alpha <= 1.05:
        return
    c = quadrature.bose_integral(p, alpha).value
    q = quadrature.bose_integral(p, alpha, method="quadrature").value
    assert c > 0
    assert q == pytest.approx(c, rel=1e-9)
