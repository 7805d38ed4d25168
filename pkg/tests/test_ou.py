import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from heatweak.ou import (
    OUParams,
    exact_field_second_moment,
    kolmogorov_residual,
    ou_mean_var,
    u_derivs,
    u_value,
)
from heatweak.series import SeriesControl
from heatweak.spectral import eigenvalue


def test_mean_var_at_terminal_time():
    assert ou_mean_var(OUParams(1.0, 1.0), 1.0, 3.0) == (3.0, 0.0)


def test_mean_var_half_time():
    mean, var = ou_mean_var(OUParams(1.0, 1.0), 0.5, 0.0)
    assert mean == 0.0
    assert var == pytest.approx(0.3160602794, abs=1e-10)


def test_stationary_variance():
    assert ou_mean_var(OUParams(1.0, 1e3), 0.0, 0.0)[1] == pytest.approx(0.5, abs=1e-15)


@pytest.mark.parametrize("t", [-0.01, 1.01, float("nan")])
def test_time_domain(t):
    with pytest.raises(ValueError):
        ou_mean_var(OUParams(1.0, 1.0), t, 0.0)
    with pytest.raises(ValueError):
        kolmogorov_residual(OUParams(1.0, 1.0), t, 0.0)


@pytest.mark.parametrize("lam, T", [(0.0, 1.0), (-1.0, 1.0), (1.0, 0.0)])
def test_params_validation(lam, T):
    with pytest.raises(ValueError):
        OUParams(lam, T)


@pytest.mark.parametrize("x, expected", [(0.0, 0.3160602794), (2.0, 1.7875780441)])
def test_u_value_examples(x, expected):
    assert u_value(OUParams(1.0, 1.0), 0.5, x) == pytest.approx(expected, abs=1e-10)


@given(st.floats(0.1, 100.0), st.floats(-10, 10))
def test_u_terminal_condition(lam, x):
    assert u_value(OUParams(lam, 2.0), 2.0, x) == x * x


def test_derivs_at_terminal_time():
    lam = 3.0
    d = u_derivs(OUParams(lam, 1.0), 1.0, 1.0)
    assert (d.u_x, d.u_xx, d.u_t, d.u_tx) == (2.0, 2.0, 2 * lam - 1, 4 * lam)


def test_derivs_odd_in_x():
    d = u_derivs(OUParams(2.0, 1.0), 0.3, 0.0)
    assert d.u_x == 0.0 and d.u_tx == 0.0


def test_u_x_example():
    assert u_derivs(OUParams(1.0, 1.0), 0.5, 1.0).u_x == pytest.approx(0.7357588823, abs=1e-10)


def test_derivs_match_finite_differences():
    P = OUParams(2.5, 1.0)
    t, x, e = 0.37, 0.8, 1e-5
    d = u_derivs(P, t, x)
    assert d.u_x == pytest.approx((u_value(P, t, x + e) - u_value(P, t, x - e)) / (2 * e), abs=1e-8)
    assert d.u_xx == pytest.approx((u_value(P, t, x + e) - 2 * u_value(P, t, x) + u_value(P, t, x - e)) / e**2,
                                   abs=1e-4)
    assert d.u_t == pytest.approx((u_value(P, t + e, x) - u_value(P, t - e, x)) / (2 * e), abs=1e-8)
    ux = lambda tt: u_derivs(P, tt, x).u_x
    assert d.u_tx == pytest.approx((ux(t + e) - ux(t - e)) / (2 * e), abs=1e-7)


@pytest.mark.parametrize("lam, t, x, tol", [(1.0, 0.3, 0.7, 1e-12), (50.0, 0.99, 0.1, 1e-9)])
def test_kolmogorov_examples(lam, t, x, tol):
    assert abs(kolmogorov_residual(OUParams(lam, 1.0), t, x)) <= tol


def test_kolmogorov_by_finite_differences():
    P, t, x, e = OUParams(1.0, 1.0), 0.3, 0.7, 1e-5
    ut = (u_value(P, t + e, x) - u_value(P, t - e, x)) / (2 * e)
    ux = (u_value(P, t, x + e) - u_value(P, t, x - e)) / (2 * e)
    uxx = (u_value(P, t, x + e) - 2 * u_value(P, t, x) + u_value(P, t, x - e)) / e**2
    assert abs(ut + 0.5 * uxx - P.lam * x * ux) <= 1e-6


def test_kolmogorov_grid():
    ts = np.linspace(0.0, 0.999, 20)
    xs = np.linspace(-2.0, 2.0, 20)
    worst = 0.0
    for lam in (eigenvalue(1), eigenvalue(2), 1.0, 10.0, 50.0):
        T, X = np.meshgrid(ts, xs)
        worst = max(worst, float(np.max(np.abs(kolmogorov_residual(OUParams(lam, 1.0), T, X)))))
    assert worst <= 1e-10


def test_flush_of_tiny_exponentials():
    d = u_derivs(OUParams(1e4, 1.0), 0.0, 1.0)
    assert d.u_x == 0.0 and d.u == pytest.approx(0.5e-4)


@settings(deadline=None)
@given(st.floats(0.01, 100), st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_variance_grows_with_elapsed_time(lam, t1, t2):
    P = OUParams(lam, 1.0)
    lo, hi = sorted((t1, t2))
    assert ou_mean_var(P, lo, 0.0)[1] >= ou_mean_var(P, hi, 0.0)[1]


def test_field_moment_stationary_limit():
    assert exact_field_second_moment(0.0, 1e6).value == pytest.approx(1.0 / 6.0, rel=1e-10)


def test_field_moment_zero_time():
    assert exact_field_second_moment(0.0, 0.0).value == 0.0


def test_field_moment_matches_high_mode_sum():
    m = np.arange(1, 1_000_001, dtype=float)
    lam = 0.5 * (np.pi * m) ** 2
    brute = math.fsum(lam**-0.4 * -np.expm1(-2 * lam) / (2 * lam))
    # the brute-force sum stops at 1e6; add its own missing tail
    from scipy.special import zeta
    brute += 0.5 * (0.5 * np.pi**2) ** -1.4 * zeta(2.8, 1_000_001)
    res = exact_field_second_moment(0.4, 1.0)
    assert abs(res.value - brute) <= max(res.tail_bound, 1e-14)
    assert res.tail_bound <= 1e-10 * res.value


def test_field_moment_monotone():
    vals_T = [exact_field_second_moment(0.2, T).value for T in (0.1, 0.5, 1.0, 2.0)]
    assert vals_T == sorted(vals_T)
    vals_p = [exact_field_second_moment(p, 1.0).value for p in (0.0, 0.1, 0.25, 0.4)]
    assert vals_p == sorted(vals_p, reverse=True)


def test_field_moment_without_tail_correction_runs_out_of_modes():
    from heatweak.series import TruncationError
    with pytest.raises(TruncationError):
        exact_field_second_moment(0.0, 1.0, SeriesControl(tail_correction=False, m_max=10_000))
