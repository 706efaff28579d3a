"""Reference three-level population used by ``reproduce-paper`` and the examples."""
from __future__ import annotations

from .model import LevelSpec, ModelConfig, OpinionDist

REFERENCE_H = (0.0, 0.4, 1.0)
REFERENCE_FRACTIONS = (0.2, 0.7, 0.1)
REFERENCE_STUBBORN = (0.5, 0.3, 0.8)
REFERENCE_INITIAL = ((-0.9, -0.7), (-0.5, 0.5), (0.8, 1.0))
REFERENCE_P = (0.0, 0.25, 0.5, 1.0)


def reference_config(
    p: float,
    stubborn: bool,
    gamma: float = 0.01,
    agents: int = 10000,
    initial=REFERENCE_INITIAL,
) -> ModelConfig:
    """Three levels at h = 0, 0.4, 1 holding 20%, 70% and 10% of the agents.

    Stubborn agents, when present, make up 50%, 30% and 80% of the levels and start
    from the same distribution as the non-stubborn agents of their level.
    """
    sf = REFERENCE_STUBBORN if stubborn else (0.0, 0.0, 0.0)
    levels = tuple(
        LevelSpec(h=h, fraction=f, stubborn_fraction=s, ns_initial=OpinionDist.uniform(a, b))
        for h, f, s, (a, b) in zip(REFERENCE_H, REFERENCE_FRACTIONS, sf, initial)
    )
    return ModelConfig(p=p, gamma=gamma, levels=levels, agents=agents)


def scenario_name(p: float, stubborn: bool) -> str:
    return f"p{p:g}_{'stubborn' if stubborn else 'nostubborn'}"


def reference_scenarios(gamma: float = 0.01, agents: int = 10000):
    """Yield ``(name, config)`` for every (p, stubborn) combination."""
    for stubborn in (False, True):
        for p in REFERENCE_P:
            yield scenario_name(p, stubborn), reference_config(p, stubborn, gamma, agents)
