"""Shrinkage-thresholding Langevin samplers for row-sparse Bayesian regression."""
__version__ = "0.1.0"

from .estimators import RJMCMCRegressor, STMALARegressor
from .operators import OperatorKind, apply_operator, stvs_penalty
from .oracle import ModelPosterior, activation_error, activation_probs, enumerate_posterior
from .proposal import ProposalParams, atom_prob, log_q, log_row_density, sample_candidate
from .rjmcmc import RjParams, log_j, rjmcmc_step, run_rjmcmc, sample_move
from .rng import make_rng
from .samplers import ChainConfig, NumericalError, block_stmala_step, log_accept_ratio, run_chain, stmala_step
from .sparse_state import SparseState, embed, from_dense, to_dense, zero_state
from .targets import L21RegressionTarget, RidgedExampleTarget, SpikeSlabTarget
from .trace import ChainTrace

__all__ = [
    "__version__",
    "STMALARegressor", "RJMCMCRegressor",
    "OperatorKind", "apply_operator", "stvs_penalty",
    "ModelPosterior", "activation_error", "activation_probs", "enumerate_posterior",
    "ProposalParams", "atom_prob", "log_q", "log_row_density", "sample_candidate",
    "RjParams", "log_j", "rjmcmc_step", "run_rjmcmc", "sample_move",
    "make_rng",
    "ChainConfig", "NumericalError", "block_stmala_step", "log_accept_ratio", "run_chain", "stmala_step",
    "SparseState", "embed", "from_dense", "to_dense", "zero_state",
    "L21RegressionTarget", "RidgedExampleTarget", "SpikeSlabTarget",
    "ChainTrace",
]
