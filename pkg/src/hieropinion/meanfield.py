"""Linear ODE ``X' = A X + B`` for the per-level mean opinions of non-stubborn agents.

Entries, with ``rate_i = p + (1 - p) f0([h_i, 1])``::

    A_ij = (1 - alpha) (p + (1 - p) [j >= i]) f0NS_j          (i != j)
    A_ii = (1 - alpha) f0NS_i - rate_i
    B_i  = alpha * sum_j mS_j (p + (1 - p) [j >= i]) f0S_j

Every row satisfies ``sum_j A_ij = -p alpha - (1 - p) alpha f0S([h_i, 1])``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .model import ModelConfig, SplitWeights, derive_splitting

PIVOT_TOL = 1e-12


class SingularSystem(ArithmeticError):
    """Raised when elimination meets a pivot below :data:`PIVOT_TOL` in magnitude."""


@dataclass(frozen=True)
class MeanFieldSystem:
    A: np.ndarray
    B: np.ndarray
    split: SplitWeights
    p: float

    @property
    def rates(self) -> np.ndarray:
        return self.p + (1.0 - self.p) * self.split.f0_tail


def influence_weights(p: float, n: int) -> np.ndarray:
    """``W[i, j] = p + (1 - p) [j >= i]``: chance that a level-j partner convinces level i."""
    upper = np.triu(np.ones((n, n)))
    return p + (1.0 - p) * upper


def build_system(config: ModelConfig) -> MeanFieldSystem:
    split = derive_splitting(config)
    p = config.p
    n = split.n_levels
    W = influence_weights(p, n)
    alpha = split.alpha
    A = (1.0 - alpha) * W * split.f0NS[None, :]
    rates = p + (1.0 - p) * split.f0_tail
    A[np.diag_indices(n)] = (1.0 - alpha) * split.f0NS - rates
    B = alpha * (W * (split.mS0 * split.f0S)[None, :]).sum(axis=1)
    return MeanFieldSystem(A=A, B=B, split=split, p=p)


def spectrum_bound_check(sys: MeanFieldSystem) -> np.ndarray:
    """Residual of the row-sum identity for each row (should vanish to rounding)."""
    s = sys.split
    expected = -sys.p * s.alpha - (1.0 - sys.p) * s.alpha * s.f0S_tail
    return sys.A.sum(axis=1) - expected


def spectral_bound(sys: MeanFieldSystem) -> float:
    """Upper bound on the real parts of the eigenvalues of ``A`` (Gershgorin discs)."""
    s = sys.split
    return -sys.p * s.alpha - (1.0 - sys.p) * s.alpha * s.f0S[-1]


def gauss_solve(A: np.ndarray, b: np.ndarray, tol: float = PIVOT_TOL) -> np.ndarray:
    """Solve ``A x = b`` by Gaussian elimination with partial pivoting."""
    a = np.array(A, dtype=float)
    x = np.array(b, dtype=float)
    n = x.size
    for k in range(n):
        piv = k + int(np.argmax(np.abs(a[k:, k])))
        if abs(a[piv, k]) < tol:
            raise SingularSystem(f"pivot {a[piv, k]:.3e} in column {k} is below {tol:g}")
        if piv != k:
            a[[k, piv]] = a[[piv, k]]
            x[[k, piv]] = x[[piv, k]]
        factors = a[k + 1:, k] / a[k, k]
        a[k + 1:, k:] -= np.outer(factors, a[k, k:])
        x[k + 1:] -= factors * x[k]
    for k in range(n - 1, -1, -1):
        x[k] = (x[k] - a[k, k + 1:] @ x[k + 1:]) / a[k, k]
    return x


def equilibrium(sys: MeanFieldSystem) -> np.ndarray:
    """Stationary point ``-A^{-1} B``."""
    return gauss_solve(sys.A, -sys.B)


@njit(cache=True)
def _affine(A, B, x, shift, scale, out):
    """out = A (x + scale * shift) + B"""
    n = x.size
    for i in range(n):
        acc = B[i]
        for j in range(n):
            acc += A[i, j] * (x[j] + scale * shift[j])
        out[i] = acc


@njit(cache=True)
def _rk4_linear(A, B, x0, dt, n_steps, stride):
    n = x0.size
    out = np.empty((n_steps // stride + 1, n))
    x = x0.copy()
    out[0] = x
    k1 = np.zeros(n)
    k2 = np.empty(n)
    k3 = np.empty(n)
    k4 = np.empty(n)
    for step in range(1, n_steps + 1):
        _affine(A, B, x, k1, 0.0, k1)
        _affine(A, B, x, k1, 0.5 * dt, k2)
        _affine(A, B, x, k2, 0.5 * dt, k3)
        _affine(A, B, x, k3, dt, k4)
        for i in range(n):
            x[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
        if step % stride == 0:
            out[step // stride] = x
    return out


def n_steps_for(t_end: float, dt: float) -> int:
    return int(np.ceil(t_end / dt - 1e-9))


def integrate(
    sys: MeanFieldSystem, m0, t_end: float, dt: float = 1e-3, stride: int = 1
) -> tuple[np.ndarray, np.ndarray]:
    """Classical RK4 from ``m0`` to ``t_end``.

    Returns ``(times, states)`` with the state kept every ``stride`` steps (every step by
    default); the step count is ``t_end / dt`` rounded up.
    """
    if dt <= 0 or t_end < 0:
        raise ValueError("dt must be positive and t_end non-negative")
    n_steps = n_steps_for(t_end, dt)
    stride = max(1, int(stride))
    states = _rk4_linear(
        np.ascontiguousarray(sys.A), np.ascontiguousarray(sys.B), np.asarray(m0, dtype=float), dt, n_steps, stride
    )
    times = np.arange(states.shape[0]) * (dt * stride)
    return times, states


def trajectory_series(sys: MeanFieldSystem, times: np.ndarray, states: np.ndarray, h: np.ndarray):
    """Wrap a trajectory as a :class:`TimeSeries` (variance and support reported as 0)."""
    from .timeseries import TimeSeries

    s = sys.split
    mixed = s.level_alpha * s.mS0 + (1.0 - s.level_alpha) * states
    zeros = np.zeros_like(states)
    return TimeSeries(
        times=np.asarray(times, dtype=float),
        h=np.asarray(h, dtype=float),
        mean_ns=states.copy(),
        var_ns=zeros,
        support_ns=zeros.copy(),
        mean_all=mixed,
        weights=s.f0.copy(),
    )
