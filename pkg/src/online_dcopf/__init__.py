"""Distributed online primal-dual DC optimal power flow with regret tracking."""

from .algorithm import AgentState, StepSchedule, run_round
from .casefile import load_case
from .costs import CostStream, CostStreamConfig, RoundCosts
from .estimators import HindsightDispatch, OnlineDCOPF
from .experiment import ExperimentConfig, run_experiment, simulate
from .network import Network, build_susceptance_matrix, metropolis_weights, validate_network
from .trace import RunTrace

__all__ = [
    "AgentState",
    "CostStream",
    "CostStreamConfig",
    "ExperimentConfig",
    "HindsightDispatch",
    "Network",
    "OnlineDCOPF",
    "RoundCosts",
    "RunTrace",
    "StepSchedule",
    "build_susceptance_matrix",
    "load_case",
    "metropolis_weights",
    "run_experiment",
    "run_round",
    "simulate",
    "validate_network",
]

__version__ = "0.1.0"
