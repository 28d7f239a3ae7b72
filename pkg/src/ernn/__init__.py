"""Equilibrated recurrent networks: recurrent cells whose hidden state is
pushed towards a per-timestep fixed point by a few residual inexact-Newton
steps, trained end to end with exact reverse-mode gradients."""

from .cells import ErnnParams, ForwardTape, forward_sequence, init_params
from .data import SequenceDataset, gen_random_walks, split
from .fixed_point import ResidualSystem, SolveTrace, inexact_newton_solve, phi_derivative, phi_scalar
from .train import TrainConfig, evaluate, train

__all__ = [
    "ErnnParams",
    "ForwardTape",
    "ResidualSystem",
    "SequenceDataset",
    "SolveTrace",
    "TrainConfig",
    "evaluate",
    "forward_sequence",
    "gen_random_walks",
    "inexact_newton_solve",
    "init_params",
    "phi_derivative",
    "phi_scalar",
    "split",
    "train",
]

__version__ = "0.1.0"
