"""Redundancy-aware discovery of Simpson's paradoxes in categorical tables."""

from .errors import ParadoxCubeError
from .lattice import FreqStat, Relation, compare_stats, coverage, freq_stat, relation
from .materialize import MaterializationResult, materialize_bruteforce, materialize_dfs
from .paradox import (
    AssocConfig,
    ParadoxGroup,
    compute_signature,
    discover,
    discover_bruteforce,
    evaluate_ac,
    reconstruct_members,
)
from .robustness import PerturbConfig, SurvivalReport
from .synth import SynthSpec, generate
from .table import WILDCARD, BaseTable, load_csv

__version__ = "0.1.0"

__all__ = [
    "WILDCARD",
    "AssocConfig",
    "BaseTable",
    "FreqStat",
    "MaterializationResult",
    "ParadoxCubeError",
    "ParadoxGroup",
    "PerturbConfig",
    "Relation",
    "SurvivalReport",
    "SynthSpec",
    "compare_stats",
    "compute_signature",
    "coverage",
    "discover",
    "discover_bruteforce",
    "evaluate_ac",
    "freq_stat",
    "generate",
    "load_csv",
    "materialize_bruteforce",
    "materialize_dfs",
    "reconstruct_members",
    "relation",
]
