"""Markov-chain toolkit for the subradiant regime of a bad-cavity laser.

The permutation-invariant, U(1)-diagonal dynamics of N repumped two-level
atoms emitting collectively into a damped cavity reduces to a continuous-time
Markov chain on the collective states (J, M). This package builds that chain
and computes its steady states, probability currents, entropy production,
intensity correlations and stochastic trajectories.
"""
from .errors import (
    DarkState,
    DivergentEntropy,
    InsufficientData,
    InvalidParams,
    NotConverged,
    SingularOrNonUnique,
    SubradiantError,
)
from .model import Level, ModelParams, index_of, level_of, levels, multiplicity, state_count
from .rates import Channel, Generator, build_generator, channel_rate, local_rates
from .steady import Distribution, residual, steady_state
from .noneq import currents, detailed_balance_check, entropy_rates
from .evolve import PropagationSettings, evolve, g2, jump_map, observables
from .kmc import burst_stats, occupancy, simulate
from .closedform import boundary_recursion, gaussian_limit, ratio_table, small_w_populations

__version__ = "0.1.0"
