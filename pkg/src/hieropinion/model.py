"""Domain types for hierarchical opinion formation.

A population is split into a finite number of hierarchy levels ``h_1 < ... < h_N``.
Each agent carries an opinion ``w`` in [-1, 1], a level index and a stubborn flag.
Stubborn agents never move; non-stubborn agents move toward their partner's
opinion when the partner ranks at least as high, or with probability ``p`` otherwise.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Sequence

import numpy as np
from numba import njit

FRACTION_TOL = 1e-12


@dataclass(frozen=True)
class OpinionDist:
    """Initial opinion distribution of a sub-population.

    ``kind`` is one of ``"uniform"`` (support ``[a, b]``), ``"point"`` (atom at ``x``)
    or ``"quantiles"``. A quantile list of length L holds the values of the quantile
    function at the midpoints ``(j - 1/2) / L``; between them the quantile function is
    linear and beyond the outer midpoints it is constant.
    """

    kind: str
    a: float = 0.0
    b: float = 0.0
    x: float = 0.0
    values: tuple[float, ...] = ()

    @classmethod
    def uniform(cls, a: float, b: float) -> OpinionDist:
        return cls("uniform", a=float(a), b=float(b))

    @classmethod
    def point(cls, x: float) -> OpinionDist:
        return cls("point", x=float(x))

    @classmethod
    def quantiles(cls, values: Sequence[float]) -> OpinionDist:
        return cls("quantiles", values=tuple(float(v) for v in values))

    def problems(self) -> list[str]:
        if self.kind == "uniform":
            if not -1.0 <= self.a <= self.b <= 1.0:
                return [f"uniform({self.a}, {self.b}) must satisfy -1 <= a <= b <= 1"]
        elif self.kind == "point":
            if not -1.0 <= self.x <= 1.0:
                return [f"point({self.x}) must lie in [-1, 1]"]
        elif self.kind == "quantiles":
            v = np.asarray(self.values, dtype=float)
            if v.size == 0:
                return ["quantile list is empty"]
            out = []
            if np.any(np.diff(v) < 0):
                out.append("quantile list is not non-decreasing")
            if np.any(v < -1.0) or np.any(v > 1.0):
                out.append("quantile list has entries outside [-1, 1]")
            return out
        else:
            return [f"unknown distribution type {self.kind!r}"]
        return []

    def mean(self) -> float:
        if self.kind == "uniform":
            return 0.5 * (self.a + self.b)
        if self.kind == "point":
            return self.x
        return float(np.mean(self.values))

    def quantile(self, r) -> np.ndarray:
        """Evaluate the quantile function at levels ``r`` in [0, 1]."""
        r = np.asarray(r, dtype=float)
        if self.kind == "uniform":
            return self.a + (self.b - self.a) * r
        if self.kind == "point":
            return np.full_like(r, self.x)
        v = np.asarray(self.values, dtype=float)
        grid = (np.arange(v.size) + 0.5) / v.size
        return np.interp(r, grid, v)

    def midpoint_quantiles(self, count: int) -> np.ndarray:
        return self.quantile((np.arange(count) + 0.5) / count)

    def sample(self, count: int, rng: np.random.Generator) -> np.ndarray:
        if self.kind == "uniform":
            return rng.uniform(self.a, self.b, size=count)
        return self.quantile(rng.random(count))

    def to_dict(self) -> dict[str, Any]:
        if self.kind == "uniform":
            return {"type": "uniform", "a": self.a, "b": self.b}
        if self.kind == "point":
            return {"type": "point", "x": self.x}
        return {"type": "quantiles", "values": list(self.values)}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> OpinionDist:
        kind = d.get("type")
        if kind == "uniform":
            return cls.uniform(d["a"], d["b"])
        if kind == "point":
            return cls.point(d["x"])
        if kind == "quantiles":
            return cls.quantiles(d["values"])
        raise ValueError(f"unknown distribution type {kind!r}")


@dataclass(frozen=True)
class LevelSpec:
    h: float
    fraction: float
    stubborn_fraction: float = 0.0
    ns_initial: OpinionDist = field(default_factory=lambda: OpinionDist.uniform(-1.0, 1.0))
    # None means "same distribution as the level's non-stubborn agents"
    s_initial: OpinionDist | None = None

    @property
    def stubborn_initial(self) -> OpinionDist:
        return self.ns_initial if self.s_initial is None else self.s_initial


@dataclass(frozen=True)
class ModelConfig:
    p: float
    gamma: float
    levels: tuple[LevelSpec, ...]
    agents: int = 10000
    exact_init: bool = False

    def __post_init__(self):
        object.__setattr__(self, "levels", tuple(self.levels))

    @property
    def n_levels(self) -> int:
        return len(self.levels)

    @property
    def h(self) -> np.ndarray:
        return np.array([lv.h for lv in self.levels])

    @property
    def fractions(self) -> np.ndarray:
        return np.array([lv.fraction for lv in self.levels])

    @property
    def stubborn_fractions(self) -> np.ndarray:
        return np.array([lv.stubborn_fraction for lv in self.levels])

    def ns_means(self) -> np.ndarray:
        return np.array([lv.ns_initial.mean() for lv in self.levels])

    def s_means(self) -> np.ndarray:
        return np.array([lv.stubborn_initial.mean() for lv in self.levels])

    def with_(self, **changes) -> ModelConfig:
        return replace(self, **changes)

    def to_dict(self) -> dict[str, Any]:
        levels = []
        for lv in self.levels:
            d = {
                "h": lv.h,
                "fraction": lv.fraction,
                "stubborn_fraction": lv.stubborn_fraction,
                "ns_initial": lv.ns_initial.to_dict(),
            }
            if lv.s_initial is not None:
                d["s_initial"] = lv.s_initial.to_dict()
            levels.append(d)
        out = {"p": self.p, "gamma": self.gamma, "agents": self.agents, "levels": levels}
        if self.exact_init:
            out["exact_init"] = True
        return out

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> ModelConfig:
        levels = []
        for lv in d["levels"]:
            s_init = lv.get("s_initial")
            levels.append(
                LevelSpec(
                    h=float(lv["h"]),
                    fraction=float(lv["fraction"]),
                    stubborn_fraction=float(lv.get("stubborn_fraction", 0.0)),
                    ns_initial=OpinionDist.from_dict(lv["ns_initial"]),
                    s_initial=None if s_init is None else OpinionDist.from_dict(s_init),
                )
            )
        return cls(
            p=float(d["p"]),
            gamma=float(d["gamma"]),
            levels=tuple(levels),
            agents=int(d.get("agents", 10000)),
            exact_init=bool(d.get("exact_init", False)),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def load(cls, path: str | Path) -> ModelConfig:
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def validate(config: ModelConfig) -> list[str]:
    """Return the list of violated invariants; an empty list means the config is usable."""
    errors = []
    if not 0.0 <= config.p <= 1.0:
        errors.append(f"p = {config.p} outside [0, 1]")
    if not 0.0 < config.gamma <= 1.0:
        errors.append(f"gamma = {config.gamma} outside (0, 1]")
    if config.agents < 1:
        errors.append(f"agents = {config.agents} must be a positive integer")
    if not config.levels:
        errors.append("at least one level is required")
        return errors
    h = config.h
    if np.any(np.diff(h) <= 0):
        errors.append("levels not strictly increasing in h")
    for i, lv in enumerate(config.levels):
        if not 0.0 <= lv.h <= 1.0:
            errors.append(f"level {i}: h = {lv.h} outside [0, 1]")
        if not 0.0 <= lv.fraction <= 1.0:
            errors.append(f"level {i}: fraction = {lv.fraction} outside [0, 1]")
        if not 0.0 <= lv.stubborn_fraction <= 1.0:
            errors.append(f"level {i}: stubborn_fraction = {lv.stubborn_fraction} outside [0, 1]")
        errors += [f"level {i} ns_initial: {m}" for m in lv.ns_initial.problems()]
        if lv.s_initial is not None:
            errors += [f"level {i} s_initial: {m}" for m in lv.s_initial.problems()]
    total = math.fsum(lv.fraction for lv in config.levels)
    if abs(total - 1.0) > FRACTION_TOL:
        errors.append(f"fractions sum to {total:.12g} != 1")
    if config.levels[-1].fraction <= 0.0:
        errors.append("top level must have a positive fraction")
    return errors


class ConfigError(ValueError):
    pass


def check(config: ModelConfig) -> ModelConfig:
    errors = validate(config)
    if errors:
        raise ConfigError("; ".join(errors))
    return config


@dataclass(frozen=True)
class SplitWeights:
    """Level weights split into the stubborn and non-stubborn sub-populations.

    ``f0S[i]`` is the share of level i inside the stubborn population and ``f0NS[i]``
    its share inside the non-stubborn one. A sub-population that is empty
    (``alpha == 0`` or ``alpha == 1``) carries zero weights and is flagged unused.
    """

    alpha: float
    f0: np.ndarray
    f0S: np.ndarray
    f0NS: np.ndarray
    f0_tail: np.ndarray
    f0S_tail: np.ndarray
    f0NS_tail: np.ndarray
    mS0: np.ndarray
    mNS0: np.ndarray
    level_alpha: np.ndarray
    stubborn_used: bool = True
    nonstubborn_used: bool = True

    @property
    def n_levels(self) -> int:
        return self.f0.size


def _tail(x: np.ndarray) -> np.ndarray:
    return np.cumsum(x[::-1])[::-1]


def derive_splitting(config: ModelConfig) -> SplitWeights:
    f0 = config.fractions
    a_i = config.stubborn_fractions
    stubborn_mass = a_i * f0
    alpha = math.fsum(stubborn_mass)
    if alpha > 0.0:
        f0S = stubborn_mass / alpha
    else:
        f0S = np.zeros_like(f0)
    if alpha < 1.0:
        f0NS = (1.0 - a_i) * f0 / (1.0 - alpha)
    else:
        f0NS = np.zeros_like(f0)
    return SplitWeights(
        alpha=alpha,
        f0=f0,
        f0S=f0S,
        f0NS=f0NS,
        f0_tail=_tail(f0),
        f0S_tail=_tail(f0S),
        f0NS_tail=_tail(f0NS),
        mS0=config.s_means(),
        mNS0=config.ns_means(),
        level_alpha=a_i,
        stubborn_used=alpha > 0.0,
        nonstubborn_used=alpha < 1.0,
    )


@njit(cache=True)
def interact(w, w_star, h, h_star, stubborn, p, gamma, u):
    """Opinion of an agent after being influenced by a partner.

    ``u`` is a uniform draw in [0, 1) deciding whether a lower-ranked partner
    convinces the agent (it does when ``u < p``).
    """
    if stubborn:
        return w
    if h_star >= h or u < p:
        return w + gamma * (w_star - w)
    return w


@dataclass
class Population:
    """Particle realization of the model.

    ``level`` indexes ``config.levels``; ``clock`` is model time, advanced by
    ``1 / agents`` per encounter.
    """

    w: np.ndarray
    level: np.ndarray
    stubborn: np.ndarray
    config: ModelConfig
    clock: float = 0.0
    encounters: int = 0

    @property
    def size(self) -> int:
        return self.w.size

    def level_counts(self) -> tuple[np.ndarray, np.ndarray]:
        n = self.config.n_levels
        count_s = np.bincount(self.level[self.stubborn], minlength=n)
        count_all = np.bincount(self.level, minlength=n)
        return count_all - count_s, count_s

    def copy(self) -> Population:
        return Population(
            self.w.copy(), self.level.copy(), self.stubborn.copy(), self.config, self.clock, self.encounters
        )


def apportion(fractions: Sequence[float], total: int) -> np.ndarray:
    """Largest-remainder apportionment of ``total`` items; ties go to lower indices."""
    quotas = np.asarray(fractions, dtype=float) * total
    counts = np.floor(quotas).astype(np.int64)
    remainders = quotas - counts
    short = total - int(counts.sum())
    if short > 0:
        order = np.argsort(-remainders, kind="stable")
        counts[order[:short]] += 1
    return counts


def build_population(config: ModelConfig, seed: int, exact: bool | None = None) -> Population:
    """Construct the agent population for ``config``.

    With ``exact`` (default: ``config.exact_init``) opinions sit at the midpoint
    quantiles of each initial distribution instead of being sampled i.i.d., so each
    sub-population's empirical mean matches the distribution mean.
    """
    check(config)
    if exact is None:
        exact = config.exact_init
    sizes = apportion(config.fractions, config.agents)
    for i, (lv, n) in enumerate(zip(config.levels, sizes)):
        if lv.fraction > 0 and n == 0:
            raise ConfigError(
                f"level {i} has fraction {lv.fraction} but receives no agents out of {config.agents}"
            )
    rng = np.random.default_rng(seed)
    w, level, stubborn = [], [], []
    for i, (lv, n) in enumerate(zip(config.levels, sizes)):
        n = int(n)
        n_s = int(math.floor(lv.stubborn_fraction * n + 0.5))
        n_ns = n - n_s
        for count, dist, flag in ((n_ns, lv.ns_initial, False), (n_s, lv.stubborn_initial, True)):
            if exact:
                ops = dist.midpoint_quantiles(count)
            else:
                ops = dist.sample(count, rng)
            w.append(np.clip(ops, -1.0, 1.0))
            level.append(np.full(count, i, dtype=np.int64))
            stubborn.append(np.full(count, flag, dtype=np.bool_))
    return Population(
        w=np.concatenate(w).astype(np.float64),
        level=np.concatenate(level),
        stubborn=np.concatenate(stubborn),
        config=config,
    )
