"""Implicit Euler recursion for a single OU mode and its closed-form moments.

X_{k+1} = (X_k + dW_{k+1}) / (1 + lambda h),  X_0 = 0.

Within a step [t_k, t_k + h] the scheme is interpolated by a continuous
process with drift beta(s) and diffusion gamma(s); only the reduced pathwise
forms are needed here:

    beta(s)  = -g (X_k + W(s) - W(t_k))
    X(s)     = (1 - tau g) (X_k + W(s) - W(t_k)),   g = lambda / (1 + lambda h)

with tau = s - t_k.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class GridSpec:
    """Uniform time grid t_k = k h on [0, T] with h = T / N."""

    T: float
    N: int

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError(f"T must be positive, got {self.T!r}")
        if int(self.N) != self.N or self.N < 1:
            raise ValueError(f"N must be a positive integer, got {self.N!r}")
        object.__setattr__(self, "N", int(self.N))
        object.__setattr__(self, "T", float(self.T))

    @property
    def h(self) -> float:
        return self.T / self.N

    def t(self, k):
        return np.asarray(k) * self.h

    def require_rate_regime(self):
        if not self.h < 1.0:
            raise ValueError(f"step h = T/N = {self.h} must be < 1 for the weak-error rate")


@dataclass(frozen=True)
class InterpMoments:
    ex2: float   # E|X(s)|^2
    ebx: float   # E beta(s) X(s)
    eb2: float   # E|beta(s)|^2


def euler_step(x, lam, h, dW):
    return (x + dW) / (1.0 + lam * h)


def scheme_weights(lam: float, h: float, k: int) -> np.ndarray:
    """w_j = (1 + lambda h)^{-(j+1)}, j = 0..k-1, so X_k = sum_j w_j dW_{k-j}."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k!r}")
    return np.exp(-np.arange(1, k + 1) * math.log1p(lam * h))


def _one_minus_inv_pow(a, n: int):
    """1 - (1 + a)^{-n} for a >= 0; repeated squaring for small n, log form above."""
    a = np.asarray(a, dtype=float)
    if n <= 128:
        return 1.0 - (1.0 / (1.0 + a)) ** n
    return -np.expm1(-n * np.log1p(a))


def inv_pow(a, n: int):
    """(1 + a)^{-n} for a >= 0."""
    a = np.asarray(a, dtype=float)
    if n <= 128:
        return (1.0 / (1.0 + a)) ** n
    return np.exp(-n * np.log1p(a))


def scheme_second_moment(lam, h: float, k: int):
    """E|X_k|^2 = (1 - (1 + lambda h)^{-2k}) / (2 lambda + lambda^2 h)."""
    if k < 0:
        raise ValueError(f"k must be >= 0, got {k!r}")
    lam = np.asarray(lam, dtype=float)
    if k == 0:
        out = np.zeros_like(lam)
    else:
        out = _one_minus_inv_pow(lam * h, 2 * k) / (lam * (2.0 + lam * h))
    return float(out) if out.ndim == 0 else out


def _check_tau(tau, h):
    tau_arr = np.asarray(tau, dtype=float)
    if np.any(tau_arr < 0.0) or np.any(tau_arr > h * (1.0 + 1e-12)) or np.any(np.isnan(tau_arr)):
        raise ValueError(f"offset tau must lie in [0, h={h}], got {tau!r}")
    return np.minimum(tau_arr, h)


def interp_coeffs(lam, h: float, tau):
    """(z, gamma) with z = -lambda/(1+lambda h), gamma = 1 + tau z."""
    tau = _check_tau(tau, h)
    lam = np.asarray(lam, dtype=float)
    z = -lam / (1.0 + lam * h)
    gamma = 1.0 + tau * z
    if z.ndim == 0 and gamma.ndim == 0:
        return float(z), float(gamma)
    return z, gamma


def interp_moments(lam, h: float, ex2_left, tau) -> InterpMoments:
    """Moments of the interpolated scheme at t_k + tau given E|X_k|^2."""
    tau = _check_tau(tau, h)
    lam = np.asarray(lam, dtype=float)
    ex2_left = np.asarray(ex2_left, dtype=float)
    if np.any(ex2_left < 0):
        raise ValueError("ex2_left must be nonnegative")
    g = lam / (1.0 + lam * h)
    gamma = 1.0 - tau * g
    v = ex2_left + tau
    out = (gamma * gamma * v, -g * gamma * v, g * g * v)
    if all(np.ndim(o) == 0 for o in out):
        out = tuple(float(o) for o in out)
    return InterpMoments(*out)


def strong_error_closed_form(lam, grid: GridSpec):
    """E|X^N_lambda(T) - X_lambda(T)|^2 for the scheme driven by the same Brownian path.

    The cross moment sum_k (1+lambda h)^{-(N-k)} exp(-lambda(T - t_{k+1})) (1-e^{-lambda h})/lambda
    is summed as a geometric series with ratio r = e^{-lambda h} / (1 + lambda h).
    """
    lam = np.asarray(lam, dtype=float)
    h, N, T = grid.h, grid.N, grid.T
    x = lam * h
    a = scheme_second_moment(lam, h, N)
    b = -np.expm1(-2.0 * lam * T) / (2.0 * lam)
    log_r = -x - np.log1p(x)
    one_minus_r = -np.expm1(log_r)
    one_minus_rN = -np.expm1(N * log_r)
    cross = -np.expm1(-x) / (lam * (1.0 + x)) * one_minus_rN / one_minus_r
    out = a + b - 2.0 * cross
    return float(out) if out.ndim == 0 else out
