"""Scalar Ornstein-Uhlenbeck mode dX = -lambda X dt + dW.

Closed-form transition law, the second-moment value function
u(t, x) = E|X^{t,x}(T)|^2 together with its derivatives, and the exact
H^{-p} second moment of the full field X(T) started from zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .series import SeriesControl, SeriesResult, gauss_tail, power_envelope, power_tail, sum_modes
from .spectral import as_order

# exp(-2*350) ~ 1e-304: flush instead of producing denormals.
_FLUSH = 350.0


@dataclass(frozen=True)
class OUParams:
    lam: float
    T: float

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError(f"lambda must be positive, got {self.lam!r}")
        if not self.T > 0:
            raise ValueError(f"T must be positive, got {self.T!r}")


@dataclass(frozen=True)
class DerivBundle:
    u: float
    u_x: float
    u_xx: float
    u_t: float
    u_tx: float


def _remaining(params: OUParams, t):
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0.0) or np.any(t_arr > params.T) or np.any(np.isnan(t_arr)):
        raise ValueError(f"t must lie in [0, T={params.T}], got {t!r}")
    return params.T - t_arr


def _decay(lam, tau, factor):
    """exp(-factor*lam*tau), flushed to 0 once lam*tau > 350."""
    z = lam * tau
    return np.where(z > _FLUSH, 0.0, np.exp(-factor * np.minimum(z, _FLUSH)))


def _scalar(v):
    return float(v) if np.ndim(v) == 0 else v


def ou_mean_var(params: OUParams, t, x):
    """Mean and variance of X^{t,x}(T)."""
    tau = _remaining(params, t)
    lam = params.lam
    mean = _decay(lam, tau, 1.0) * np.asarray(x, dtype=float)
    var = -np.expm1(-2.0 * lam * tau) / (2.0 * lam)
    return _scalar(mean), _scalar(var)


def u_value(params: OUParams, t, x):
    tau = _remaining(params, t)
    lam = params.lam
    x = np.asarray(x, dtype=float)
    e2 = _decay(lam, tau, 2.0)
    return _scalar(-np.expm1(-2.0 * lam * tau) / (2.0 * lam) + e2 * x * x)


def u_derivs(params: OUParams, t, x) -> DerivBundle:
    tau = _remaining(params, t)
    lam = params.lam
    x = np.asarray(x, dtype=float)
    e2 = _decay(lam, tau, 2.0)
    return DerivBundle(
        u=_scalar(-np.expm1(-2.0 * lam * tau) / (2.0 * lam) + e2 * x * x),
        u_x=_scalar(2.0 * e2 * x),
        u_xx=_scalar(2.0 * e2 + 0.0 * x),
        u_t=_scalar(-e2 + 2.0 * lam * e2 * x * x),
        u_tx=_scalar(4.0 * lam * e2 * x),
    )


def kolmogorov_residual(params: OUParams, t, x):
    """u_t + u_xx/2 - lambda x u_x, identically zero for the closed form."""
    d = u_derivs(params, t, x)
    return _scalar(np.asarray(d.u_t) + 0.5 * np.asarray(d.u_xx)
                   - params.lam * np.asarray(x, dtype=float) * np.asarray(d.u_x))


def exact_field_second_moment(p, T: float, ctrl: SeriesControl | None = None) -> SeriesResult:
    """E|X(T)|^2_{H^{-p}} = sum_m lambda_m^{-p} (1 - exp(-2 lambda_m T)) / (2 lambda_m)."""
    p = as_order(p).p
    ctrl = ctrl or SeriesControl()
    if T < 0:
        raise ValueError(f"T must be nonnegative, got {T!r}")
    if T == 0:
        return SeriesResult(0.0, 0.0, 0)

    def term(lam):
        return lam**-p * -np.expm1(-2.0 * lam * T) / (2.0 * lam)

    def tail(M):
        # 1/(2 lam) part summed exactly; the exp(-2 lam T) part only bounded
        return 0.5 * power_tail(p + 1.0, M), 0.5 * gauss_tail(2.0 * T, p + 1.0, M)

    return sum_modes(term, tail, lambda M: 0.5 * power_envelope(p + 1.0, M), ctrl)
