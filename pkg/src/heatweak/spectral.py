"""Dirichlet eigenstructure of -1/2 d^2/dx^2 on (0, 1) and H^{-p} norms."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# lambda_m = C_EIG * m**2
C_EIG = 0.5 * math.pi**2


@dataclass(frozen=True)
class SobolevOrder:
    """Exponent p of the negative Sobolev norm, restricted to [0, 1/2)."""

    p: float

    def __post_init__(self):
        p = float(self.p)
        if not (0.0 <= p < 0.5) or math.isnan(p):
            raise ValueError(
                f"Sobolev order p={self.p!r} outside [0, 1/2): the weak-error "
                "rate h^(p+1/2) is only established for 0 <= p < 1/2"
            )
        object.__setattr__(self, "p", p)

    def __float__(self):
        return self.p


def as_order(p) -> SobolevOrder:
    return p if isinstance(p, SobolevOrder) else SobolevOrder(p)


def _check_mode(m):
    m_arr = np.asarray(m)
    if m_arr.dtype.kind not in "iu" and not np.all(np.mod(m_arr, 1) == 0):
        raise ValueError(f"mode index must be an integer, got {m!r}")
    if np.any(m_arr < 1):
        raise ValueError(f"mode index must be >= 1, got {m!r}")


def eigenvalue(m):
    """lambda_m = (pi m)^2 / 2.  Accepts a scalar or an integer array."""
    _check_mode(m)
    if np.ndim(m) == 0:
        return C_EIG * float(m) ** 2
    m = np.asarray(m, dtype=float)
    return C_EIG * m * m


def eigenvalues(M: int) -> np.ndarray:
    """Array of lambda_1..lambda_M."""
    if M < 1:
        raise ValueError("need at least one mode")
    m = np.arange(1, M + 1, dtype=float)
    return C_EIG * m * m


def eigenfunction_eval(m, x):
    """e_m(x) = sqrt(2) sin(m pi x) on [0, 1]."""
    _check_mode(m)
    x_arr = np.asarray(x, dtype=float)
    if np.any((x_arr < 0.0) | (x_arr > 1.0)) or np.any(np.isnan(x_arr)):
        raise ValueError(f"x must lie in [0, 1], got {x!r}")
    # sin(m pi) is not exactly zero in floating point; pin the boundary.
    val = math.sqrt(2.0) * np.sin(np.asarray(m) * math.pi * x_arr)
    val = np.where((x_arr == 0.0) | (x_arr == 1.0), 0.0, val)
    return float(val) if np.ndim(val) == 0 else val


def hneg_norm_sq(coeffs, p) -> float:
    """Squared H^{-p} norm sum_m lambda_m^{-p} c_m^2 of a mode-coefficient vector."""
    p = as_order(p).p
    c = np.asarray(coeffs, dtype=float).ravel()
    if c.size < 1:
        raise ValueError("coefficient vector must have at least one mode")
    lam = eigenvalues(c.size)
    return math.fsum(lam**-p * c * c)
