"""Grazing-limit transport solved through quantile functions.

The non-stubborn opinion distribution of level i is represented by its quantile
function on the midpoint grid ``r_k = (k - 1/2) / M``. Every quantile follows the
velocity field of its level::

    dX_ik/dtau = p (m - X_ik) + (1 - p) (btail_i - f0([h_i, 1]) X_ik)

where ``m`` is the mean opinion of the whole population and ``btail_i`` the total
opinion mass of agents ranked at least ``h_i``. Stubborn agents enter only through
their level means.

The state is stored as a per-level center (the level mean) plus offsets from it.
The flow is affine with a common slope inside a level, so offsets obey
``dD/dtau = -rate_i D`` and the center carries all coupling. RK4 is linear, hence
stepping the two parts is the same scheme as stepping ``X = center + D`` directly,
but support widths keep full relative precision as they shrink.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterator

import numpy as np
from numba import njit

from .model import ModelConfig, OpinionDist, SplitWeights, check, derive_splitting
from .timeseries import TimeSeries

MONOTONE_SLACK = 1e-12


class MonotonicityViolation(ArithmeticError):
    pass


def init_quantiles(dist: OpinionDist, M: int) -> np.ndarray:
    if M < 2:
        raise ValueError("at least two quantiles are needed")
    return dist.midpoint_quantiles(M)


@dataclass(frozen=True)
class QuantileState:
    center: np.ndarray  # (N,) level means
    offsets: np.ndarray  # (N, M) non-decreasing, zero row means
    split: SplitWeights
    p: float
    tau: float = 0.0
    h: np.ndarray | None = None

    @classmethod
    def from_quantiles(
        cls, X: np.ndarray, split: SplitWeights, p: float, tau: float = 0.0, h=None
    ) -> QuantileState:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        center = X.mean(axis=1)
        h = np.arange(X.shape[0], dtype=float) if h is None else np.asarray(h, dtype=float)
        return cls(center=center, offsets=X - center[:, None], split=split, p=p, tau=tau, h=h)

    @property
    def X(self) -> np.ndarray:
        return self.center[:, None] + self.offsets

    @property
    def M(self) -> int:
        return self.offsets.shape[1]

    @property
    def rates(self) -> np.ndarray:
        return self.p + (1.0 - self.p) * self.split.f0_tail

    def means(self) -> np.ndarray:
        return self.center.copy()

    def variances(self) -> np.ndarray:
        return self.offsets.var(axis=1)

    def widths(self) -> np.ndarray:
        return self.offsets[:, -1] - self.offsets[:, 0]


def initial_state(config: ModelConfig, M: int = 256) -> QuantileState:
    check(config)
    X = np.stack([init_quantiles(lv.ns_initial, M) for lv in config.levels])
    return QuantileState.from_quantiles(X, derive_splitting(config), config.p, h=config.h)


def _stubborn_terms(split: SplitWeights) -> tuple[float, np.ndarray]:
    pull = split.alpha * split.f0S * split.mS0
    return float(pull.sum()), np.cumsum(pull[::-1])[::-1]


def drift_coefficients(state: QuantileState) -> tuple[float, np.ndarray, np.ndarray]:
    """Return ``(m, btail, rate)``: population mean, per-level tail opinion mass
    ``f0([h_i, 1]) * b_i`` and per-level contraction rate."""
    s = state.split
    s_total, s_tail = _stubborn_terms(s)
    ns_mass = (1.0 - s.alpha) * s.f0NS * state.center
    m = s_total + ns_mass.sum()
    btail = s_tail + np.cumsum(ns_mass[::-1])[::-1]
    return m, btail, state.rates


@njit(cache=True)
def _center_drift(c, p, s_total, s_tail, ns_weight, rates, out):
    n = c.size
    m = s_total
    for j in range(n):
        m += ns_weight[j] * c[j]
    tail = 0.0
    for i in range(n - 1, -1, -1):
        tail += ns_weight[i] * c[i]
        out[i] = p * m + (1.0 - p) * (s_tail[i] + tail) - rates[i] * c[i]


@njit(cache=True)
def _rk4_steps(c, D, p, s_total, s_tail, ns_weight, rates, dt, n_steps):
    n = c.size
    k1 = np.empty(n)
    k2 = np.empty(n)
    k3 = np.empty(n)
    k4 = np.empty(n)
    tmp = np.empty(n)
    # RK4 applied to dD/dt = -rate D is multiplication by the degree-4 Taylor factor,
    # which is positive for every step size, so offsets keep their order
    shrink = np.empty(n)
    for i in range(n):
        z = rates[i] * dt
        shrink[i] = 1.0 - z + z * z / 2.0 - z * z * z / 6.0 + z * z * z * z / 24.0
    for _ in range(n_steps):
        _center_drift(c, p, s_total, s_tail, ns_weight, rates, k1)
        for i in range(n):
            tmp[i] = c[i] + 0.5 * dt * k1[i]
        _center_drift(tmp, p, s_total, s_tail, ns_weight, rates, k2)
        for i in range(n):
            tmp[i] = c[i] + 0.5 * dt * k2[i]
        _center_drift(tmp, p, s_total, s_tail, ns_weight, rates, k3)
        for i in range(n):
            tmp[i] = c[i] + dt * k3[i]
        _center_drift(tmp, p, s_total, s_tail, ns_weight, rates, k4)
        for i in range(n):
            c[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
            for k in range(D.shape[1]):
                D[i, k] *= shrink[i]


def _advance(state: QuantileState, dt: float, n_steps: int) -> QuantileState:
    s = state.split
    s_total, s_tail = _stubborn_terms(s)
    c = state.center.copy()
    D = state.offsets.copy()
    _rk4_steps(c, D, state.p, s_total, s_tail, (1.0 - s.alpha) * s.f0NS, state.rates, dt, n_steps)
    if np.any(np.diff(D, axis=1) < -MONOTONE_SLACK):
        raise MonotonicityViolation(f"quantiles out of order after a step of {dt}")
    return replace(state, center=c, offsets=D, tau=state.tau + n_steps * dt)


def step(state: QuantileState, dt: float) -> QuantileState:
    """One RK4 step of size ``dt``."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    return _advance(state, dt, 1)


def _record_steps(tau_end: float, dt: float, record_every: float) -> list[int]:
    n_total = int(np.ceil(tau_end / dt - 1e-9))
    stride = max(1, int(round(record_every / dt)))
    marks = list(range(0, n_total + 1, stride))
    if marks[-1] != n_total:
        marks.append(n_total)
    return marks


def trajectory(
    state0: QuantileState, tau_end: float, dt: float = 1e-3, record_every: float | None = None
) -> Iterator[QuantileState]:
    """Yield the state at time 0, every ``record_every`` and at ``tau_end``."""
    record_every = dt if record_every is None else record_every
    if not dt <= record_every or (tau_end > 0 and record_every > tau_end + 1e-12):
        raise ValueError("need dt <= record_every <= tau_end")
    state = state0
    yield state
    done = 0
    for mark in _record_steps(tau_end, dt, record_every)[1:]:
        state = _advance(state, dt, mark - done)
        # re-anchor the clock on the grid to avoid drift from repeated addition
        state = replace(state, tau=state0.tau + mark * dt)
        done = mark
        yield state


def integrate(
    state0: QuantileState, tau_end: float, dt: float = 1e-3, record_every: float | None = None
) -> TimeSeries:
    states = list(trajectory(state0, tau_end, dt, record_every))
    s = state0.split
    means = np.stack([st.means() for st in states])
    mixed = s.level_alpha * s.mS0 + (1.0 - s.level_alpha) * means
    return TimeSeries(
        times=np.array([st.tau for st in states]),
        h=state0.h.copy(),
        mean_ns=means,
        var_ns=np.stack([st.variances() for st in states]),
        support_ns=np.stack([st.widths() for st in states]),
        mean_all=mixed,
        weights=s.f0.copy(),
    )


def quantile_rows(states) -> Iterator[tuple[float, int, float, float]]:
    """Rows ``(tau, level, r, x)`` of a full quantile dump."""
    for st in states:
        r = (np.arange(st.M) + 0.5) / st.M
        X = st.X
        for i in range(X.shape[0]):
            for rk, x in zip(r, X[i]):
                yield st.tau, i, rk, x
