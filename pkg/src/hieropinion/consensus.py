"""Closed-form asymptotic consensus opinions, per hierarchy regime.

* ``p = 0``: top-down recursion starting from the highest level.
* ``0 < p < 1`` with stubborn agents: stationary point of the mean-field system.
* ``p = 1``: hierarchy is irrelevant; every level ends at the initial mean of the
  whole population (no stubborn agents) or of the stubborn population.
* ``0 < p < 1`` without stubborn agents has no closed form and is reported as unsolved.
"""
from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass

import numpy as np

from . import meanfield
from .model import ModelConfig, SplitWeights, check, derive_splitting


class Regime(str, enum.Enum):
    P0 = "P0"
    P_POSITIVE_ALPHA_POSITIVE = "P_POSITIVE_ALPHA_POSITIVE"
    P1_ALPHA0 = "P1_ALPHA0"
    P1_ALPHA_POSITIVE = "P1_ALPHA_POSITIVE"
    UNSOLVED = "UNSOLVED"


@dataclass(frozen=True)
class ConsensusResult:
    regime: Regime
    m_inf_ns: np.ndarray | None = None
    m_inf_mixed: np.ndarray | None = None

    def to_dict(self) -> dict:
        def listed(v):
            return None if v is None else [float(x) for x in v]

        return {
            "regime": self.regime.value,
            "m_inf_ns": listed(self.m_inf_ns),
            "m_inf_mixed": listed(self.m_inf_mixed),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def top_level_mean(split: SplitWeights, m0_ns) -> float:
    """Initial mean opinion of the whole top level (stubborn and non-stubborn)."""
    N = split.n_levels - 1
    num = split.alpha * split.f0S[N] * split.mS0[N] + (1.0 - split.alpha) * split.f0NS[N] * m0_ns[N]
    return num / split.f0[N]


def limit_p0(split: SplitWeights, m0_ns) -> np.ndarray:
    m0_ns = np.asarray(m0_ns, dtype=float)
    a = split.alpha
    n = split.n_levels
    m = np.empty(n)
    if split.f0S[-1] > 0:
        m[-1] = split.mS0[-1]
    else:
        m[-1] = top_level_mean(split, m0_ns)
    stubborn_pull = a * split.f0S * split.mS0
    for i in range(n - 2, -1, -1):
        num = (1.0 - a) * math.fsum(split.f0NS[i + 1:] * m[i + 1:]) + math.fsum(stubborn_pull[i:])
        den = a * split.f0S_tail[i] + (1.0 - a) * split.f0NS_tail[i + 1]
        m[i] = num / den
    return m


def limit_p_positive(config: ModelConfig) -> np.ndarray:
    return meanfield.equilibrium(meanfield.build_system(config))


def limit_p1(split: SplitWeights, m0_ns) -> float:
    if split.alpha > 0:
        return math.fsum(split.f0S * split.mS0)
    return math.fsum(split.f0 * np.asarray(m0_ns, dtype=float))


def mixed_limits(split: SplitWeights, m_inf_ns: np.ndarray) -> np.ndarray:
    """Whole-level limits ``alpha_i mS_i + (1 - alpha_i) m_inf_ns_i``."""
    a_i = split.level_alpha
    return a_i * split.mS0 + (1.0 - a_i) * m_inf_ns


def consensus_limits(config: ModelConfig) -> ConsensusResult:
    check(config)
    split = derive_splitting(config)
    m0_ns = config.ns_means()
    p = config.p
    if p == 0.0:
        regime, m = Regime.P0, limit_p0(split, m0_ns)
    elif p == 1.0:
        regime = Regime.P1_ALPHA_POSITIVE if split.alpha > 0 else Regime.P1_ALPHA0
        m = np.full(split.n_levels, limit_p1(split, m0_ns))
    elif split.alpha > 0:
        regime, m = Regime.P_POSITIVE_ALPHA_POSITIVE, limit_p_positive(config)
    else:
        return ConsensusResult(Regime.UNSOLVED)
    return ConsensusResult(regime, m, mixed_limits(split, m))
