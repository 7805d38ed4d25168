"""Weak error of the squared H^{-p} norm for the implicit Euler scheme.

Per mode the error is the difference of two closed-form second moments,

    E|X^N_lam(T)|^2 - E|X_lam(T)|^2
        = (1 - (1+lam h)^{-2N}) / (lam (2 + lam h)) - (1 - e^{-2 lam T}) / (2 lam)
        = -h / (2 (2 + lam h)) + e^{-2 lam T}/(2 lam) - (1+lam h)^{-2N} / (lam (2 + lam h)),

and the field-level error is the lam^{-p}-weighted sum over modes.  The same
quantity is rebuilt from the time-step decomposition (last-step term plus the
integrated I and J expectations) as an exact identity check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import stats

from .scheme import GridSpec, inv_pow, scheme_second_moment, strong_error_closed_form
from .series import (
    SeriesControl,
    SeriesResult,
    gauss_tail,
    lam_next,
    power_envelope,
    power_tail,
    rational_tail,
    sum_modes,
)
from .spectral import C_EIG, as_order, eigenvalue, eigenvalues

# exp(-2 * 700) underflows; modes beyond lam h > 700 have no inner-step mass.
LAM_H_CUT = 700.0


class QuadratureError(ArithmeticError):
    pass


@dataclass(frozen=True)
class WeakErrorReport:
    p: float
    T: float
    N: int
    h: float
    value: float
    tail_bound: float
    modes_used: int


@dataclass(frozen=True)
class LastStepDelta:
    delta: float
    d1: float
    d2: float
    d3: float


@dataclass(frozen=True)
class DecompositionReport:
    """Aggregates of the step decomposition.

    ``j_total`` is the raw sum of the integrated J expectations; the identity is
    ``direct = last_step_total + i_total + 0.5 * j_total`` and ``residual`` is
    its defect.
    """

    p: float
    N: int
    direct: float
    last_step_total: float
    last_step_abs_total: float
    i_total: float
    j_total: float
    residual: float
    modes_used: int
    quad_change: float


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    r_squared: float
    points: int


def per_mode_weak_error(lam, grid: GridSpec):
    lam = np.asarray(lam, dtype=float)
    h, N, T = grid.h, grid.N, grid.T
    x = lam * h
    main = -h / (2.0 * (2.0 + x))
    rest = np.exp(-2.0 * lam * T) / (2.0 * lam) - inv_pow(x, 2 * N) / (lam * (2.0 + x))
    out = main + rest
    return float(out) if out.ndim == 0 else out


def weak_error_series(p, grid: GridSpec, ctrl: SeriesControl | None = None) -> SeriesResult:
    """sum_m lam_m^{-p} * per_mode_weak_error(lam_m) without the h < 1 check."""
    p = as_order(p).p
    ctrl = ctrl or SeriesControl()
    h, N, T = grid.h, grid.N, grid.T

    def term(lam):
        return lam**-p * per_mode_weak_error(lam, grid)

    def tail(M):
        # -1/2 sum lam^{-p-1} / (1 + 2/(lam h)) exactly; exponential pieces bounded
        est, b_main = rational_tail(p + 1.0, 2.0 / h, M)
        bound = (0.5 * b_main
                 + 0.5 * gauss_tail(2.0 * T, p + 1.0, M)
                 + float(inv_pow(lam_next(M) * h, 2 * N)) / h * power_tail(p + 2.0, M))
        return -0.5 * est, bound

    return sum_modes(term, tail, lambda M: 0.5 * power_envelope(p + 1.0, M), ctrl)


def weak_error(p, grid: GridSpec, ctrl: SeriesControl | None = None) -> WeakErrorReport:
    """E|X^N(T)|^2_{H^{-p}} - E|X(T)|^2_{H^{-p}} with a certified tail bound."""
    p = as_order(p).p
    grid.require_rate_regime()
    res = weak_error_series(p, grid, ctrl)
    return WeakErrorReport(p, grid.T, grid.N, grid.h, res.value, res.tail_bound, res.modes_used)


def strong_error(grid: GridSpec, ctrl: SeriesControl | None = None, p=0.0) -> SeriesResult:
    """E|X^N(T) - X(T)|^2_{H^{-p}} (p = 0: the L^2 strong error) summed over modes."""
    p = as_order(p).p
    ctrl = ctrl or SeriesControl()
    h, N, T = grid.h, grid.N, grid.T

    def term(lam):
        return lam**-p * strong_error_closed_form(lam, grid)

    def tail(M):
        # algebraic part 1/(2lam) + 1/(lam(2+lam h)) - 2/(lam(1+lam h))
        e1, b1 = rational_tail(p + 2.0, 2.0 / h, M)
        e2, b2 = rational_tail(p + 2.0, 1.0 / h, M)
        est = 0.5 * power_tail(p + 1.0, M) + e1 / h - 2.0 * e2 / h
        x_next = lam_next(M) * h
        bound = (b1 / h + 2.0 * b2 / h
                 + float(inv_pow(x_next, 2 * N)) / h * power_tail(p + 2.0, M)
                 + 0.5 * gauss_tail(2.0 * T, p + 1.0, M)
                 + 4.0 / (-math.expm1(-x_next)) / h * gauss_tail(h, p + 2.0, M))
        return est, bound

    return sum_modes(term, tail, lambda M: 2.0 * power_envelope(p + 1.0, M), ctrl)


def last_step_delta(m, p, grid: GridSpec):
    """Contribution of the final step [t_{N-1}, T] for mode(s) m, with its bounding terms.

    d1 is the H^{-p} weight of the exact one-step variance, (1 - e^{-2 lam h}) / (2 lam^{1+p});
    d2 the increment variance term and d3 the damping mismatch times E|X_{N-1}|^2.
    |delta| <= d1 + d2 + d3.
    """
    p = as_order(p).p
    lam = np.asarray(eigenvalue(m), dtype=float)
    h = grid.h
    x = lam * h
    w = lam**-p
    v = scheme_second_moment(lam, h, grid.N - 1)
    damp = 1.0 / (1.0 + x) ** 2
    d1 = w * -np.expm1(-2.0 * x) / (2.0 * lam)
    d2 = w * h * damp
    d3 = w * (damp - np.exp(-2.0 * x)) * v
    delta = d3 + d2 - d1
    out = (delta, d1, d2, d3)
    if lam.ndim == 0:
        out = tuple(float(o) for o in out)
    return LastStepDelta(*out)


def _step_integrands(lam, k, tau, grid: GridSpec):
    """E I(t) and E J(t) at t = t_k + tau (broadcasting over lam, k, tau)."""
    h, N = grid.h, grid.N
    v = _second_moment_by_step(lam, h, k)
    g = lam / (1.0 + lam * h)
    gamma = 1.0 - tau * g
    e2 = np.exp(-2.0 * lam * ((N - k) * h - tau))
    vt = v + tau
    ei = 2.0 * e2 * gamma * vt * (lam * gamma - g)
    ej = 2.0 * e2 * (gamma * gamma - 1.0)
    return ei, ej


def _second_moment_by_step(lam, h, k):
    lam = np.asarray(lam, dtype=float)
    k = np.asarray(k)
    x = lam * h
    return -np.expm1(-2.0 * k * np.log1p(x)) / (lam * (2.0 + x))


def ij_integrands(m, k: int, t: float, grid: GridSpec):
    """(E I^{k,N}(t), E J^{k,N}(t)) for mode m, unweighted by lam^{-p}."""
    N, h = grid.N, grid.h
    if int(k) != k or not (0 <= k <= N - 2):
        raise ValueError(f"step index k must lie in 0..N-2 = 0..{N - 2}, got {k!r}")
    tau = t - k * h
    if tau < -1e-12 * h or tau > h * (1.0 + 1e-12):
        raise ValueError(f"t={t!r} outside step [{k * h}, {(k + 1) * h}]")
    tau = min(max(tau, 0.0), h)
    ei, ej = _step_integrands(eigenvalue(m), k, tau, grid)
    return float(ei), float(ej)


def _ij_totals(lam, grid: GridSpec, order: int):
    """Per-mode Gauss-Legendre integrals of E I and E J over steps k = 0..N-2."""
    h, N = grid.h, grid.N
    if N < 2:
        return np.zeros_like(lam), np.zeros_like(lam)
    x, w = np.polynomial.legendre.leggauss(order)
    tau = 0.5 * h * (1.0 + x)
    wt = 0.5 * h * w
    k = np.arange(N - 1)
    i_out = np.empty_like(lam)
    j_out = np.empty_like(lam)
    block = max(1, 2_000_000 // ((N - 1) * order))
    for lo in range(0, lam.size, block):
        lb = lam[lo:lo + block, None, None]
        ei, ej = _step_integrands(lb, k[None, :, None], tau[None, None, :], grid)
        i_out[lo:lo + block] = (ei @ wt).sum(axis=1)
        j_out[lo:lo + block] = (ej @ wt).sum(axis=1)
    return i_out, j_out


def inner_mode_count(grid: GridSpec, ctrl: SeriesControl) -> int:
    """Modes with lam h <= 700; beyond them every inner-step integrand underflows."""
    return max(1, min(ctrl.m_max, int(math.sqrt(LAM_H_CUT / (C_EIG * grid.h)))))


def decompose(p, grid: GridSpec, ctrl: SeriesControl | None = None) -> DecompositionReport:
    """Rebuild the weak error from last-step, I and J aggregates.

    Modes m <= M (lam_M h <= 700) are treated explicitly.  For m > M the inner
    integrands are below exp(-1400), so their last-step term coincides with the
    per-mode weak error and the tail of the direct series is assigned to it.
    """
    p = as_order(p).p
    ctrl = ctrl or SeriesControl()
    grid.require_rate_regime()
    direct = weak_error(p, grid, ctrl).value

    M = inner_mode_count(grid, ctrl)
    lam = eigenvalues(M)
    w = lam**-p
    pm_head = math.fsum(w * per_mode_weak_error(lam, grid))
    tail = direct - pm_head

    ls = last_step_delta(np.arange(1, M + 1), p, grid)
    last_total = math.fsum(ls.delta) + tail
    last_abs = math.fsum(np.abs(ls.delta)) + abs(tail)

    i_m, j_m = _ij_totals(lam, grid, ctrl.quad_order)
    i_total = math.fsum(w * i_m)
    j_total = math.fsum(w * j_m)
    i2, j2 = _ij_totals(lam, grid, 2 * ctrl.quad_order)
    change = abs(math.fsum(w * i2) - i_total) + 0.5 * abs(math.fsum(w * j2) - j_total)
    quad_tol = 1e-2 * max(1e-10, 1e-8 * abs(direct))
    if change > quad_tol:
        raise QuadratureError(
            f"Gauss-Legendre order {ctrl.quad_order} -> {2 * ctrl.quad_order} changed the "
            f"I/J totals by {change:.3e} > {quad_tol:.3e}")

    residual = direct - (last_total + i_total + 0.5 * j_total)
    return DecompositionReport(p, grid.N, direct, last_total, last_abs, i_total, j_total,
                               residual, M, change)


def decomposition_tolerance(direct: float) -> float:
    return max(1e-10, 1e-8 * abs(direct))


def rate_fit(points: Sequence[tuple[float, float]]) -> RateFit:
    """Least-squares fit of ln(err) = slope * ln(h) + intercept."""
    pts = list(points)
    if len(pts) < 3:
        raise ValueError(f"rate fit needs at least 3 points, got {len(pts)}")
    h = np.array([pt[0] for pt in pts], dtype=float)
    err = np.array([pt[1] for pt in pts], dtype=float)
    if np.any(h <= 0):
        raise ValueError("step sizes must be positive")
    if np.any(err <= 0) or np.any(~np.isfinite(err)):
        raise ValueError("errors must be positive; pass |weak error|")
    if np.unique(h).size != h.size:
        raise ValueError("step sizes must be distinct")
    res = stats.linregress(np.log(h), np.log(err))
    return RateFit(float(res.slope), float(res.intercept), float(min(1.0, res.rvalue**2)), len(pts))


def weak_error_rate(p, T: float, Ns: Sequence[int], ctrl: SeriesControl | None = None):
    """Weak errors over an N-sweep and the fitted log-log slope."""
    reports = [weak_error(p, GridSpec(T, N), ctrl) for N in Ns]
    fit = rate_fit([(r.h, abs(r.value)) for r in reports])
    return reports, fit
