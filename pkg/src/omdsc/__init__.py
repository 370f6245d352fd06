"""Simulation toolkit for online matching with delays and size-based costs."""

from .numerics import EXACT, FLOAT, AlphaParam, CyclicInterval, Residue, competitive_ratio, residue, solve_alpha
from .penalty import PenaltyFunction, classify, effective_penalty, zero_penalty_set
from .engine import Instance, Transcript, run
from .offline import OfflineSolution, brute_force_opt, optimal_cost_dp

__version__ = "0.1.0"
