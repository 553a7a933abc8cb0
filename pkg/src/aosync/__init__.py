"""Age-of-synchronization optimal scheduling: MDP model, solvers, policies and simulator."""
from .model import Action, AosState, ModelParams, enumerate_states, is_valid, state_space, transition
from .persist import PolicyFile, PolicyFileError, read_policy, write_policy
from .policies import (SKIP_POLICY, SWITCH_POLICY, Policy, always_skip, always_switch,
                       solve_aoi_baseline, threshold_policy)
from .simulator import SimConfig, SimResult, decompose_epochs, simulate, simulate_trace
from .solver import (ConvergenceWarning, QTable, ThresholdTable, ValueTable, extract_policy,
                     relative_value_iteration, structured_value_iteration, value_iteration)
from .structure import StructureReport, verify_structure

__version__ = "0.1.0"

__all__ = [
    "Action", "AosState", "ModelParams", "enumerate_states", "is_valid", "state_space",
    "transition", "PolicyFile", "PolicyFileError", "read_policy", "write_policy",
    "SKIP_POLICY", "SWITCH_POLICY", "Policy", "always_skip", "always_switch",
    "solve_aoi_baseline", "threshold_policy", "SimConfig", "SimResult", "decompose_epochs",
    "simulate", "simulate_trace", "ConvergenceWarning", "QTable", "ThresholdTable",
    "ValueTable", "extract_policy", "relative_value_iteration", "structured_value_iteration",
    "value_iteration", "StructureReport", "verify_structure",
]
