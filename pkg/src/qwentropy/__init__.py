"""Entropy rates of message sources built from periodically measured walks on a line or cycle."""

__version__ = "0.1.0"

from .coin_graph import (
    CoinTransitionSystem,
    EntropyRateResult,
    explore,
    entropy_rate,
    extremal_entropies,
    lr_guarantee,
    solve,
    stationary,
    truncation_diagnostics,
)
from .entropy import (
    FiniteDistribution,
    cw_cycle_rate_mc,
    cw_entropy_rate,
    cw_entropy_rate_gaussian,
    cw_limit,
    shannon_entropy,
)
from .errors import ComputationError
from .oracle import OutcomeTree, joint_distribution, joint_distribution_trace, partial_rate
from .protocols import independent_entropy, qw_bound_exact, qw_bound_mc, scan_w
from .walk_core import CoinOperator, CoinState, Cycle, Line, WalkState, evolve, shift_profile
from .weak_limit import closed_form, entropy_integral, weak_limit_constant

__all__ = [
    "CoinOperator", "CoinState", "CoinTransitionSystem", "ComputationError", "Cycle", "EntropyRateResult",
    "FiniteDistribution", "Line", "OutcomeTree", "WalkState", "closed_form", "cw_cycle_rate_mc",
    "cw_entropy_rate", "cw_entropy_rate_gaussian", "cw_limit", "entropy_integral", "entropy_rate", "evolve",
    "explore", "extremal_entropies", "independent_entropy", "joint_distribution", "joint_distribution_trace",
    "lr_guarantee", "partial_rate", "qw_bound_exact", "qw_bound_mc", "scan_w", "shannon_entropy",
    "shift_profile", "solve", "stationary", "truncation_diagnostics", "weak_limit_constant",
]
