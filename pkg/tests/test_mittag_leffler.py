import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fracsrc.errors import DomainError
from fracsrc.mittag_leffler import (
    MLParams,
    ml_asymptotic,
    ml_asymptotic_leading,
    ml_eval,
    ml_integral,
    ml_kernel,
    ml_scaled,
    ml_series,
    mittag_leffler,
    series_switch,
)

# E_{a,b}(z) summed in mpmath with enough guard digits to absorb the
# cancellation; produced by scripts/freeze_ml_oracle.py
FROZEN = [
    (0.5, 1.0, -1.0, 0.42758357615580700441),
    (0.5, 0.5, -1.0, 0.13660600739194928254),
    (0.5, 1.0, -3.0, 0.17900115118138995042),
    (0.3, 1.0, -2.0, 0.29023222616787535504),
    (0.3, 0.3, -4.0, 0.010705694130905865792),
    (0.7, 0.7, -10.0, 0.0027247024931022997249),
    (0.8, 1.0, -25.0, 0.009170997096470529733),
    (0.25, 1.0, -8.0, 0.093724110665607016969),
    (0.9, 1.75, -40.0, 0.022501663700942678616),
    (0.5, 1.25, -30.0, 0.026887878805107971151),
    (0.6, 0.6, -12.0, 0.0019791003199513286041),
    (0.1, 1.0, -1.5, 0.38582613336378369304),
]

# exp(x^2) erfc(x) = E_{1/2,1}(-x), from mpmath.erfc at 30 digits
ERFCX = [
    (1.0, 0.42758357615580700441),
    (10.0, 0.056140992743822585858),
    (100.0, 0.0056416137829894329036),
    (1e4, 0.000056418958072680841152),
]


@pytest.mark.parametrize("alpha,beta,z,ref", FROZEN)
def test_frozen_values(alpha, beta, z, ref):
    assert mittag_leffler(alpha, beta, z) == pytest.approx(ref, rel=1e-13)


@pytest.mark.parametrize("alpha,beta,z,ref", [c for c in FROZEN if abs(c[2]) ** (1 / c[0]) <= 200])
def test_series_tiers_match_frozen(alpha, beta, z, ref):
    # the series alone, far past the switch for small alpha, exercises the extended-precision tiers
    assert ml_series(alpha, beta, z) == pytest.approx(ref, rel=1e-13)


@pytest.mark.parametrize("x,ref", ERFCX)
def test_erfcx_identity(x, ref):
    assert mittag_leffler(0.5, 1.0, -x) == pytest.approx(ref, rel=1e-13)


def test_documented_values():
    assert ml_eval(MLParams(0.5, 1.0), 0.0) == 1.0
    assert ml_eval(MLParams(1.0, 1.0), -1.0) == pytest.approx(0.36787944117144233, rel=1e-15)
    assert ml_eval(MLParams(0.5, 1.0), -1.0) == pytest.approx(math.e * math.erfc(1.0), rel=1e-14)


def test_exponential_case():
    x = np.linspace(0.0, 50.0, 1001)
    assert np.max(np.abs(mittag_leffler(1.0, 1.0, -x) - np.exp(-x))) <= 1e-12


def test_alpha_one_closed_forms():
    x = np.array([0.5, 6.0, 30.0])
    np.testing.assert_allclose(ml_integral(1.0, 2.0, -x), (1.0 - np.exp(-x)) / x, rtol=1e-13)


@pytest.mark.parametrize("alpha", [0.3, 0.5, 0.8, 1.0])
@pytest.mark.parametrize("beta", [0.5, 1.0, 1.75])
def test_regime_overlap(alpha, beta):
    z = -np.linspace(4.0, 6.0, 11)
    assert np.max(np.abs(ml_series(alpha, beta, z) - ml_integral(alpha, beta, z))) <= 1e-10


@pytest.mark.parametrize("alpha,beta", [(0.3, 1.0), (0.5, 0.5), (0.75, 1.5), (0.9, 0.9)])
def test_asymptotic_matches_integral(alpha, beta):
    with pytest.raises(DomainError):
        ml_asymptotic(alpha, beta, -1e-3)
    x = np.geomspace(1e3, 1e6, 7)
    np.testing.assert_allclose(ml_asymptotic(alpha, beta, -x), ml_integral(alpha, beta, -x), rtol=1e-12, atol=1e-300)


def test_switch_moves_in_for_small_alpha():
    assert series_switch(0.9) == 5.0
    assert series_switch(0.2) == pytest.approx(25.0**0.2)


def test_array_shape_and_scalar():
    z = -np.arange(12.0).reshape(3, 4)
    out = mittag_leffler(0.6, 1.2, z)
    assert out.shape == (3, 4)
    assert isinstance(mittag_leffler(0.6, 1.2, -2.0), float)


def test_bit_identical_repeat():
    z = -np.geomspace(1e-3, 1e4, 300)
    a = mittag_leffler(0.45, 0.8, z)
    b = mittag_leffler(0.45, 0.8, z)
    assert a.tobytes() == b.tobytes()
    assert mittag_leffler(0.45, 0.8, z[17]) == a[17]


@pytest.mark.parametrize("bad", [(0.0, 1.0), (1.2, 1.0), (0.5, 0.0), (0.5, -1.0), (math.nan, 1.0)])
def test_parameter_domain(bad):
    with pytest.raises(DomainError):
        MLParams(*bad)
    with pytest.raises(DomainError):
        mittag_leffler(bad[0], bad[1], -1.0)


def test_positive_argument_rejected():
    with pytest.raises(DomainError):
        mittag_leffler(0.5, 1.0, 0.1)
    with pytest.raises(DomainError):
        mittag_leffler(0.5, 1.0, np.array([-1.0, np.inf]))


# kernels


def test_kernel_examples():
    assert ml_kernel(0.5, 0.0, 4.0) == pytest.approx(0.28209479177387814, rel=1e-15)
    assert ml_kernel(1.0, 2.0, 1.0) == pytest.approx(0.1353352832366127, rel=1e-14)
    assert ml_kernel(0.5, 1.0, 1.0) == pytest.approx(0.13660600739194928254, rel=1e-13)


def test_kernel_refuses_origin():
    with pytest.raises(DomainError):
        ml_kernel(0.5, 1.0, 0.0)
    with pytest.raises(DomainError):
        ml_kernel(0.5, -1.0, 1.0)


def test_leading_term_examples():
    assert ml_asymptotic_leading(0.5, 1.0, 1.0) == pytest.approx(0.5641895835477563, rel=1e-15)
    assert ml_asymptotic_leading(0.5, 4.0, 1.0) == pytest.approx(0.14104739588693908, rel=1e-15)
    with pytest.raises(DomainError):
        ml_asymptotic_leading(0.5, 0.0, 1.0)
    with pytest.raises(DomainError):
        ml_asymptotic_leading(0.5, 1.0, -1.0)


def test_leading_term_remainder_calibrated():
    alpha, rho = 0.3, 10.0
    coarse = np.array([10.0, 100.0, 1e3, 1e4])
    fine = np.geomspace(10.0, 1e4, 41)

    def scaled_remainder(t):
        r = mittag_leffler(alpha, 1.0, -rho * t**alpha) - ml_asymptotic_leading(alpha, rho, t)
        return np.abs(r) * rho**2 * t ** (2 * alpha)

    C = scaled_remainder(coarse).max()
    assert C > 0
    assert scaled_remainder(fine).max() <= 1.2 * C
    t = 100.0
    resid = abs(mittag_leffler(alpha, 1.0, -rho * t**alpha) - ml_asymptotic_leading(alpha, rho, t))
    assert resid <= 2.0 * C / (rho**2 * t ** (2 * alpha))


@pytest.mark.parametrize("alpha", [0.2, 0.5, 0.9])
def test_uniform_decay_bound(alpha):
    def ratio(lam, t):
        x = lam * t**alpha
        return mittag_leffler(alpha, 1.0, -x) * (1.0 + x)

    lam_c, t_c = np.meshgrid([0.1, 1.0, 10.0, 100.0], [0.01, 1.0, 100.0])
    C = ratio(lam_c, t_c).max()
    lam_f, t_f = np.meshgrid(np.geomspace(0.1, 100.0, 25), np.geomspace(0.01, 100.0, 25))
    assert ratio(lam_f, t_f).max() <= 1.2 * C


# identities


@pytest.mark.parametrize("alpha,lam", [(0.3, 1.0), (0.5, 10.0), (0.8, 100.0)])
def test_derivative_identity_second_order(alpha, lam):
    t = 0.7

    def gap(h):
        fd = -(mittag_leffler(alpha, 1.0, -lam * (t + h) ** alpha)
               - mittag_leffler(alpha, 1.0, -lam * (t - h) ** alpha)) / (2 * h)
        return abs(lam * ml_kernel(alpha, lam, t) - fd)

    e1, e2 = gap(t / 50), gap(t / 100)
    assert math.log2(e1 / e2) >= 1.9


@pytest.mark.parametrize("lam", [1.0, 10.0, 100.0])
def test_integral_identity(lam):
    from fracsrc.acceptance import graded_kernel_integral

    alpha, T = 0.5, 1.0
    integral = graded_kernel_integral(alpha, lam, T)
    assert abs(integral - (1.0 - mittag_leffler(alpha, 1.0, -lam * T**alpha))) <= 1e-8


def test_antiderivative_chain():
    # d/dt [t^b E_{a,b+1}(-lam t^a)] = t^(b-1) E_{a,b}(-lam t^a)
    a, b, lam, t, h = 0.6, 0.6, 3.0, 0.8, 1e-4
    fd = (ml_scaled(a, b + 1, lam, t + h) - ml_scaled(a, b + 1, lam, t - h)) / (2 * h)
    assert fd == pytest.approx(ml_scaled(a, b, lam, t), rel=1e-7)


# properties


@given(st.floats(min_value=0.05, max_value=1.0), st.floats(min_value=0.1, max_value=3.0))
def test_value_at_zero(alpha, beta):
    assert mittag_leffler(alpha, beta, 0.0) == pytest.approx(1.0 / math.gamma(beta), rel=1e-14)


@given(st.floats(min_value=0.1, max_value=0.99))
def test_completely_monotone_sampled(alpha):
    x = np.geomspace(1e-6, 1e6, 121)
    y = mittag_leffler(alpha, 1.0, -x)
    assert np.all(y >= 0.0)
    assert np.all(np.diff(y) <= 1e-15)


@given(
    st.floats(min_value=0.1, max_value=1.0),
    st.floats(min_value=0.0, max_value=1e3),
    st.floats(min_value=1e-4, max_value=1e3),
)
def test_kernel_nonnegative(alpha, lam, t):
    assert ml_kernel(alpha, lam, t) >= 0.0


@given(st.floats(min_value=0.15, max_value=0.95), st.floats(min_value=0.2, max_value=2.0),
       st.floats(min_value=0.01, max_value=4.0))
def test_recurrence_in_beta(alpha, beta, x):
    # E_{a,b}(z) = 1/Gamma(b) + z E_{a,a+b}(z)
    lhs = mittag_leffler(alpha, beta, -x)
    rhs = 1.0 / math.gamma(beta) - x * mittag_leffler(alpha, alpha + beta, -x)
    assert lhs == pytest.approx(rhs, abs=1e-13)
