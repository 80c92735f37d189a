"""Sparse transition-matrix estimation in linear-Gaussian state-space models
(GraphEM), with MLEM and Granger-causality baselines."""

from graphem._linalg import NumericalError
from graphem.baselines import VarFit, conditional_gc, fit_var, gc_pvalues, pairwise_gc
from graphem.estimation import (FitTrace, GraphEMConfig, default_initial_A, dr_solve, graphem_fit,
                                mlem_fit, prox_quadratic, q_surrogate, select_gamma, soft_threshold)
from graphem.inference import (EMStats, FilterRun, GaussianBelief, SmootherRun, em_stats,
                               kalman_filter, neg_log_posterior, rts_smoother)
from graphem.metrics import BinaryGraph, EdgeReport, binarize, score
from graphem.ssm import (BlockSpec, StateSpaceModel, Trajectory, generate_block_transition,
                         simulate)

__version__ = "0.1.0"

__all__ = [
    "BinaryGraph", "BlockSpec", "EMStats", "EdgeReport", "FilterRun", "FitTrace",
    "GaussianBelief", "GraphEMConfig", "NumericalError", "SmootherRun", "StateSpaceModel",
    "Trajectory", "VarFit", "binarize", "conditional_gc", "default_initial_A", "dr_solve",
    "em_stats", "fit_var", "gc_pvalues", "generate_block_transition", "graphem_fit", "kalman_filter", "mlem_fit",
    "neg_log_posterior", "pairwise_gc", "prox_quadratic", "q_surrogate", "rts_smoother",
    "score", "select_gamma", "simulate", "soft_threshold",
]
