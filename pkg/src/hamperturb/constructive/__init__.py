"""Constructive Hamiltonicity pipelines for ``G ∪ F``."""

from .common import Certificate, ConstructionFailed, Params, PathState
from .cycle_factor import concatenate_cycle_factor, sample_cycle_factor
from .mindegree import (
    GoodPair,
    GoodPairTable,
    TwinAssignment,
    absorb_long_cycles,
    absorb_short_cycles,
    construct_hamilton_min_degree,
    expose_anchors,
    find_good_pairs,
    select_twins,
    start_path,
)
from .posa import posa_fallback
from .regular import (
    SpecialSequence,
    check_special_sequence,
    construct_hamilton_regular,
    find_special_sequence,
)

__all__ = [
    "Certificate", "ConstructionFailed", "Params", "PathState",
    "concatenate_cycle_factor", "sample_cycle_factor",
    "GoodPair", "GoodPairTable", "TwinAssignment", "absorb_long_cycles",
    "absorb_short_cycles", "construct_hamilton_min_degree", "expose_anchors",
    "find_good_pairs", "select_twins", "start_path", "posa_fallback",
    "SpecialSequence", "check_special_sequence", "construct_hamilton_regular",
    "find_special_sequence",
]
