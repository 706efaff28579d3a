"""Per-level statistics recorded over time, with CSV and JSON serialization.

All three solvers (agent engine, mean-field ODE, quantile solver) emit this type.
CSV layout is one row per (time, level)::

    t,level,h,mean_ns,var_ns,support_ns,mean_all

Floats are written with 17 significant digits so that parsing recovers them bit-exactly.
Undefined statistics (a level without non-stubborn agents) are NaN in memory,
``nan`` in CSV and ``null`` in JSON.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

CSV_HEADER = ["t", "level", "h", "mean_ns", "var_ns", "support_ns", "mean_all"]
STATS = ("mean_ns", "var_ns", "support_ns", "mean_all")


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


@dataclass
class TimeSeries:
    """Arrays are indexed ``[record, level]``."""

    times: np.ndarray
    h: np.ndarray
    mean_ns: np.ndarray
    var_ns: np.ndarray
    support_ns: np.ndarray
    mean_all: np.ndarray
    # per-level weights of each level in the population; used for population-wide means
    weights: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    @property
    def n_levels(self) -> int:
        return self.h.size

    def __len__(self) -> int:
        return self.times.size

    def final(self, stat: str = "mean_ns") -> np.ndarray:
        return getattr(self, stat)[-1]

    def population_mean(self) -> np.ndarray:
        """Mean opinion over the whole population at each recorded time."""
        if self.weights is None:
            raise ValueError("population weights are not available for this series")
        w = np.asarray(self.weights, dtype=float)
        return self.mean_all @ (w / w.sum())

    @classmethod
    def empty_like(cls, times: Sequence[float], h: Sequence[float]) -> TimeSeries:
        n_t, n_l = len(times), len(h)
        z = lambda: np.zeros((n_t, n_l))  # noqa: E731
        return cls(np.asarray(times, dtype=float), np.asarray(h, dtype=float), z(), z(), z(), z())

    def to_rows(self) -> Iterable[list[str]]:
        for k, t in enumerate(self.times):
            for i in range(self.n_levels):
                yield [
                    _fmt(t),
                    str(i),
                    _fmt(self.h[i]),
                    _fmt(self.mean_ns[k, i]),
                    _fmt(self.var_ns[k, i]),
                    _fmt(self.support_ns[k, i]),
                    _fmt(self.mean_all[k, i]),
                ]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        writer.writerows(self.to_rows())
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> TimeSeries:
        reader = csv.reader(io.StringIO(text))
        header = next(reader)
        if header != CSV_HEADER:
            raise ValueError(f"unexpected CSV header {header}")
        rows = [r for r in reader if r]
        n_levels = max(int(r[1]) for r in rows) + 1
        n_t = len(rows) // n_levels
        arr = np.array([[float(x) for x in r] for r in rows]).reshape(n_t, n_levels, len(CSV_HEADER))
        return cls(
            times=arr[:, 0, 0].copy(),
            h=arr[0, :, 2].copy(),
            mean_ns=arr[:, :, 3].copy(),
            var_ns=arr[:, :, 4].copy(),
            support_ns=arr[:, :, 5].copy(),
            mean_all=arr[:, :, 6].copy(),
        )

    def to_dict(self) -> dict:
        def clean(a):
            return [None if math.isnan(x) else float(x) for x in a]

        levels = []
        for i in range(self.n_levels):
            d = {"level": i, "h": float(self.h[i])}
            if self.weights is not None:
                d["weight"] = float(self.weights[i])
            for name in STATS:
                d[name] = clean(getattr(self, name)[:, i])
            levels.append(d)
        out = {"times": [float(t) for t in self.times], "levels": levels}
        if self.meta:
            out["meta"] = self.meta
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def from_dict(cls, d: dict) -> TimeSeries:
        levels = d["levels"]

        def col(name):
            return np.array(
                [[np.nan if v is None else v for v in lv[name]] for lv in levels], dtype=float
            ).T.reshape(len(d["times"]), len(levels))

        weights = None
        if levels and all("weight" in lv for lv in levels):
            weights = np.array([lv["weight"] for lv in levels])
        return cls(
            times=np.array(d["times"], dtype=float),
            h=np.array([lv["h"] for lv in levels], dtype=float),
            mean_ns=col("mean_ns"),
            var_ns=col("var_ns"),
            support_ns=col("support_ns"),
            mean_all=col("mean_all"),
            weights=weights,
            meta=d.get("meta", {}),
        )

    @classmethod
    def from_json(cls, text: str) -> TimeSeries:
        return cls.from_dict(json.loads(text))

    def dumps(self, fmt: str) -> str:
        if fmt == "csv":
            return self.to_csv()
        if fmt == "json":
            return self.to_json()
        raise ValueError(f"unknown format {fmt!r}")


def ensemble_mean(runs: Sequence[TimeSeries], keys: Sequence[int] | None = None) -> TimeSeries:
    """Average aligned series; the result is independent of the order of ``runs``.

    Runs are reduced in the order of ``keys`` (typically their seeds), so the result
    does not depend on which worker finished first.
    """
    if not runs:
        raise ValueError("no runs to aggregate")
    order = np.argsort(keys, kind="stable") if keys is not None else range(len(runs))
    runs = [runs[k] for k in order]
    first = runs[0]
    for r in runs[1:]:
        if r.times.shape != first.times.shape or not np.allclose(r.times, first.times):
            raise ValueError("runs are not recorded on the same time grid")
    stack = {name: np.stack([getattr(r, name) for r in runs]) for name in STATS}
    return TimeSeries(
        times=first.times.copy(),
        h=first.h.copy(),
        weights=None if first.weights is None else first.weights.copy(),
        meta={"runs": len(runs)},
        **{name: np.mean(v, axis=0) for name, v in stack.items()},
    )
