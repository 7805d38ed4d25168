"""Reproducible Monte Carlo checks of the closed-form moments.

Random numbers come from counter-based Philox streams keyed on
``(root_seed, purpose, mode, block)``.  Samples are split into fixed-size
blocks; within a block row ``i`` and column ``k`` hold the Gaussian for sample
``block*block_size + i`` and step ``k``.  Each block is reduced to
``(count, mean, M2)`` and blocks are merged in index order, so estimates are
bit-identical for any number of workers.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .scheme import GridSpec, euler_step
from .spectral import as_order, eigenvalue, eigenvalues

# stream purposes
SCHEME_INCREMENTS = 0
OU_COUPLING = 1
INTRA_STEP = 2
INDEPENDENT_COARSE = 3


@dataclass(frozen=True)
class SeedSpec:
    root_seed: int
    block_size: int = 8192

    def __post_init__(self):
        if not (0 <= int(self.root_seed) < 2**64):
            raise ValueError("root_seed must be a 64-bit unsigned integer")
        if self.block_size < 1:
            raise ValueError("block_size must be positive")

    def generator(self, purpose: int, mode: int, block: int) -> np.random.Generator:
        ss = np.random.SeedSequence(int(self.root_seed), spawn_key=(purpose, mode, block))
        return np.random.Generator(np.random.Philox(ss))

    def normals(self, purpose: int, mode: int, block: int, rows: int, cols: int) -> np.ndarray:
        return self.generator(purpose, mode, block).standard_normal((rows, cols))


@dataclass(frozen=True)
class MCEstimate:
    mean: float
    std_error: float
    n_samples: int
    seed: int
    degenerate_covariance: bool = False

    def z_score(self, reference: float) -> float:
        if self.std_error == 0.0:
            return 0.0 if self.mean == reference else math.inf
        return (self.mean - reference) / self.std_error


def as_seed(seed) -> SeedSpec:
    return seed if isinstance(seed, SeedSpec) else SeedSpec(int(seed))


def _blocks(n: int, seed: SeedSpec):
    bs = seed.block_size
    return [(b, min(bs, n - b * bs)) for b in range((n + bs - 1) // bs)]


def _moments(values: np.ndarray):
    """(count, mean, M2) of each column."""
    mean = values.mean(axis=0)
    d = values - mean
    return values.shape[0], mean, np.einsum("ij,ij->j", d, d)


def _merge(parts):
    """Chan et al. pairwise-update merge, applied in block order."""
    n, mean, m2 = parts[0]
    for nb, mb, m2b in parts[1:]:
        tot = n + nb
        delta = mb - mean
        mean = mean + delta * (nb / tot)
        m2 = m2 + m2b + delta * delta * (n * nb / tot)
        n = tot
    return n, mean, m2


def _run_blocks(fn, n: int, seed: SeedSpec, workers: int):
    """Evaluate ``fn(block, rows) -> (rows, q)`` sample values and reduce."""
    if n < 2:
        raise ValueError("need at least two samples")
    blocks = _blocks(n, seed)

    def task(br):
        v = np.asarray(fn(*br), dtype=float)
        return _moments(v[:, None] if v.ndim == 1 else v.T)

    if workers <= 1:
        parts = [task(br) for br in blocks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(task, blocks))
    count, mean, m2 = _merge(parts)
    se = np.sqrt(m2 / (count - 1) / count)
    return [(float(mu), float(s)) for mu, s in zip(mean, se)]


def _estimates(fn, n, seed, workers, degenerate=False):
    return [MCEstimate(mu, s, n, seed.root_seed, degenerate)
            for mu, s in _run_blocks(fn, n, seed, workers)]


def simulate_mode_terminal(lam: float, grid: GridSpec, dW) -> np.ndarray:
    """X^N_lam(T) for increment rows ``dW`` of shape (..., N)."""
    dW = np.asarray(dW, dtype=float)
    if dW.shape[-1] != grid.N:
        raise ValueError(f"need {grid.N} increments per path, got {dW.shape[-1]}")
    x = np.zeros(dW.shape[:-1])
    for k in range(grid.N):
        x = euler_step(x, lam, grid.h, dW[..., k])
    return x


def _scheme_path(lam, grid, seed, m, block, rows, steps=None):
    steps = grid.N if steps is None else steps
    dW = math.sqrt(grid.h) * seed.normals(SCHEME_INCREMENTS, m, block, rows, grid.N)
    x = np.zeros(rows)
    for k in range(steps):
        x = euler_step(x, lam, grid.h, dW[:, k])
    return x


def mc_mode_terminal(m: int, grid: GridSpec, n_samples: int, seed, workers: int = 1):
    """Estimates of (E X^N(T), E|X^N(T)|^2) for mode m."""
    seed = as_seed(seed)
    lam = eigenvalue(m)

    def fn(block, rows):
        x = _scheme_path(lam, grid, seed, m, block, rows)
        return np.stack([x, x * x])

    return tuple(_estimates(fn, n_samples, seed, workers))


def mc_field_norm_sq(p, grid: GridSpec, M: int, n_samples: int, seed, workers: int = 1) -> MCEstimate:
    """E|X^N(T)|^2_{H^{-p}} truncated to the first M modes."""
    p = as_order(p).p
    seed = as_seed(seed)
    if M < 1:
        raise ValueError("need at least one mode")
    lam = eigenvalues(M)

    def fn(block, rows):
        acc = np.zeros(rows)
        for m in range(1, M + 1):
            x = _scheme_path(lam[m - 1], grid, seed, m, block, rows)
            acc += lam[m - 1] ** -p * x * x
        return acc

    return _estimates(fn, n_samples, seed, workers)[0]


def ou_step_cholesky(lam: float, h: float):
    """Cholesky factor of Cov(dW, int_0^h e^{-lam(h-s)} dW(s)).

    Returns (l11, l21, l22, degenerate); ``degenerate`` flags a numerically
    non-positive Schur complement, which is then clamped to zero.
    """
    x = lam * h
    var2 = -math.expm1(-2.0 * x) / (2.0 * lam)
    cov = -math.expm1(-x) / lam
    if x < 1e-3:
        # var2 - cov^2/h = h x^2 (1/12 - x/12 + 17 x^2/360 - ...)
        schur = h * x * x * (1.0 / 12.0 - x / 12.0 + 17.0 * x * x / 360.0)
    else:
        schur = var2 - cov * cov / h
    degenerate = not schur > 0.0
    return math.sqrt(h), cov / math.sqrt(h), math.sqrt(max(schur, 0.0)), degenerate


def _coupled_paths(lam, grid, seed, m, block, rows):
    l11, l21, l22, _ = ou_step_cholesky(lam, grid.h)
    z1 = seed.normals(SCHEME_INCREMENTS, m, block, rows, grid.N)
    z2 = seed.normals(OU_COUPLING, m, block, rows, grid.N)
    decay = math.exp(-lam * grid.h)
    xn = np.zeros(rows)
    xe = np.zeros(rows)
    for k in range(grid.N):
        xn = euler_step(xn, lam, grid.h, l11 * z1[:, k])
        xe = decay * xe + l21 * z1[:, k] + l22 * z2[:, k]
    return xn, xe


def coupled_strong_error(lam: float, grid: GridSpec, n_samples: int, seed, workers: int = 1,
                         m: int = 1) -> MCEstimate:
    """E|X^N_lam(T) - X_lam(T)|^2 with the exact OU path driven by the same noise."""
    seed = as_seed(seed)
    degenerate = ou_step_cholesky(lam, grid.h)[3]

    def fn(block, rows):
        xn, xe = _coupled_paths(lam, grid, seed, m, block, rows)
        return (xn - xe) ** 2

    return _estimates(fn, n_samples, seed, workers, degenerate)[0]


def mc_per_mode_weak_error(lam: float, grid: GridSpec, n_samples: int, seed, workers: int = 1,
                           m: int = 1):
    """Estimates of E|X^N(T)|^2 - E|X(T)|^2, E|X^N(T)|^2 and E|X(T)|^2 from coupled paths."""
    seed = as_seed(seed)
    degenerate = ou_step_cholesky(lam, grid.h)[3]

    def fn(block, rows):
        xn, xe = _coupled_paths(lam, grid, seed, m, block, rows)
        return np.stack([xn * xn - xe * xe, xn * xn, xe * xe])

    return tuple(_estimates(fn, n_samples, seed, workers, degenerate))


def _interp_state(lam, grid, k, tau, seed, m, block, rows):
    if not (0 <= k <= grid.N - 1):
        raise ValueError(f"k must lie in 0..N-1, got {k!r}")
    if not (0.0 <= tau <= grid.h):
        raise ValueError(f"tau must lie in [0, h], got {tau!r}")
    xk = _scheme_path(lam, grid, seed, m, block, rows, steps=k)
    dw_tau = math.sqrt(tau) * seed.normals(INTRA_STEP, m, block, rows, 1)[:, 0]
    g = lam / (1.0 + lam * grid.h)
    y = xk + dw_tau
    return -g * y, (1.0 - tau * g) * y


def mc_interp_moments(lam: float, grid: GridSpec, k: int, tau: float, n_samples: int, seed,
                      workers: int = 1, m: int = 1):
    """Estimates of (E|X(s)|^2, E beta(s) X(s), E|beta(s)|^2) at s = t_k + tau."""
    seed = as_seed(seed)

    def fn(block, rows):
        beta, x = _interp_state(lam, grid, k, tau, seed, m, block, rows)
        return np.stack([x * x, beta * x, beta * beta])

    return tuple(_estimates(fn, n_samples, seed, workers))


def mc_ij_integrands(lam: float, grid: GridSpec, k: int, tau: float, n_samples: int, seed,
                     workers: int = 1, m: int = 1):
    """Estimates of E[(beta + lam X) u_x(t, X)] and E[(gamma^2 - 1) u_xx(t, X)] at t = t_k + tau."""
    seed = as_seed(seed)
    e2 = math.exp(-2.0 * lam * (grid.T - k * grid.h - tau))
    gamma = 1.0 - tau * lam / (1.0 + lam * grid.h)

    def fn(block, rows):
        beta, x = _interp_state(lam, grid, k, tau, seed, m, block, rows)
        ei = (beta + lam * x) * 2.0 * e2 * x
        ej = np.full(rows, (gamma * gamma - 1.0) * 2.0 * e2)
        return np.stack([ei, ej])

    return tuple(_estimates(fn, n_samples, seed, workers))


def mc_weak_difference(p, coarse: GridSpec, M: int, n_samples: int, seed, coupled: bool = True,
                       workers: int = 1) -> MCEstimate:
    """E|X^{2N}(T)|^2_{H^{-p}} - E|X^N(T)|^2_{H^{-p}} over the first M modes.

    With ``coupled`` the coarse increments are pairwise sums of the fine ones;
    otherwise the coarse grid draws its own independent stream.
    """
    p = as_order(p).p
    seed = as_seed(seed)
    fine = GridSpec(coarse.T, 2 * coarse.N)
    lam = eigenvalues(M)

    def fn(block, rows):
        acc = np.zeros(rows)
        for m in range(1, M + 1):
            lm = lam[m - 1]
            dw_f = math.sqrt(fine.h) * seed.normals(SCHEME_INCREMENTS, m, block, rows, fine.N)
            if coupled:
                dw_c = dw_f[:, 0::2] + dw_f[:, 1::2]
            else:
                dw_c = math.sqrt(coarse.h) * seed.normals(INDEPENDENT_COARSE, m, block, rows, coarse.N)
            xf = simulate_mode_terminal(lm, fine, dw_f)
            xc = simulate_mode_terminal(lm, coarse, dw_c)
            acc += lm**-p * (xf * xf - xc * xc)
        return acc

    return _estimates(fn, n_samples, seed, workers)[0]
