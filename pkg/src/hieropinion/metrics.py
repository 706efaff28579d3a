"""Distances and diagnostics for one-dimensional opinion distributions."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import wasserstein_distance

LOG_FLOOR = 1e-14


class InsufficientData(ValueError):
    pass


@dataclass(frozen=True)
class EmpiricalDist:
    """Weighted atoms, sorted by location; weights default to uniform."""

    x: np.ndarray
    weights: np.ndarray

    def __init__(self, x, weights=None):
        x = np.asarray(x, dtype=float).ravel()
        if x.size == 0:
            raise ValueError("empty distribution")
        w = np.full(x.size, 1.0 / x.size) if weights is None else np.asarray(weights, dtype=float).ravel()
        if w.shape != x.shape or np.any(w <= 0):
            raise ValueError("weights must be positive and match the atoms")
        order = np.argsort(x, kind="stable")
        object.__setattr__(self, "x", x[order])
        object.__setattr__(self, "weights", w[order] / w.sum())

    def mean(self) -> float:
        return float(self.weights @ self.x)


def w1(a: EmpiricalDist, b: EmpiricalDist) -> float:
    """Wasserstein-1 distance, computed as the L1 distance between the two CDFs."""
    return float(wasserstein_distance(a.x, b.x, a.weights, b.weights))


def w1_to_delta(a: EmpiricalDist, c: float) -> float:
    return float(a.weights @ np.abs(a.x - c))


def support_width(a: EmpiricalDist) -> float:
    return float(a.x[-1] - a.x[0])


def fit_decay_rate(times, widths) -> tuple[float, float]:
    """Fit ``width ~ C exp(-rate t)`` by least squares on ``log(width)``.

    Widths at or below 1e-14 are dropped. Returns ``(rate, r_squared)``; a perfectly
    flat series has rate 0 and r_squared 1.
    """
    t = np.asarray(times, dtype=float)
    w = np.asarray(widths, dtype=float)
    keep = np.isfinite(w) & (w > LOG_FLOOR)
    t, y = t[keep], np.log(w[keep])
    if t.size < 3:
        raise InsufficientData(f"need at least 3 usable widths, got {t.size}")
    if np.all(y == y[0]):
        return 0.0, 1.0
    tc = t - t.mean()
    slope = float(tc @ (y - y.mean()) / (tc @ tc))
    resid = y - (y.mean() + slope * tc)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - float(resid @ resid) / ss_tot if ss_tot > 0.0 else 1.0
    return -slope, r2


def fit_level_rates(times, widths, drop: float = 2.0) -> tuple[np.ndarray, np.ndarray]:
    """Fit a decay rate per column of ``widths`` (shape ``(records, levels)``).

    Each level is fitted from time 0 up to the first record where its width falls
    below ``width(0) * exp(-drop)``, so every level contributes the same dynamic range
    and late records dominated by sampling noise are ignored. Returns ``(rates, r2)``.
    """
    t = np.asarray(times, dtype=float)
    W = np.atleast_2d(np.asarray(widths, dtype=float))
    rates = np.empty(W.shape[1])
    r2 = np.empty(W.shape[1])
    for i in range(W.shape[1]):
        w = W[:, i]
        below = np.nonzero(w < w[0] * np.exp(-drop))[0]
        stop = below[0] + 1 if below.size else w.size
        rates[i], r2[i] = fit_decay_rate(t[:stop], w[:stop])
    return rates, r2
