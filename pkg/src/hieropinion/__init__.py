"""Hierarchical opinion formation: agent simulation, mean-field solvers and consensus limits."""
from .consensus import ConsensusResult, Regime, consensus_limits
from .model import ConfigError, LevelSpec, ModelConfig, OpinionDist, build_population, derive_splitting, validate
from .timeseries import TimeSeries

__all__ = [
    "ConfigError",
    "ConsensusResult",
    "LevelSpec",
    "ModelConfig",
    "OpinionDist",
    "Regime",
    "TimeSeries",
    "build_population",
    "consensus_limits",
    "derive_splitting",
    "validate",
]

__version__ = "0.1.0"
