"""Annihilation-coalescence infection processes on rooted trees."""
from ._backend import BACKEND
from .dynamics import (
    ConvergenceReport,
    LimitClassification,
    RenormalizationError,
    StopReason,
    TrajectoryRecord,
    apply_dary,
    apply_F,
    apply_G,
    apply_map,
    apply_table,
    attractor_f,
    attractor_g,
    classify_limit,
    convergence_rate_experiment,
    evolve,
    iterate,
    iterate_limit,
    scalar_f,
    scalar_g,
)
from .oracle import EnumerationResult, enumerate_root
from .rules import CombineTable, DAry, Mutation, RuleError, Standard, Table
from .sim import RootHistogram, SimConfig, combine, run_sim, sample_root, sample_stream
from .simplex import EPS_SUM, Distribution, SimplexError, make_distribution, max_infected_block

__version__ = "0.1.0"
