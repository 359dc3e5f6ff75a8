"""Basis-branch circuit simulation: layouts, states, macro-op networks."""

from .kernels import BACKEND
from .layout import RegisterLayout, make_layout
from .network import DepthReport, GateNetwork, MacroOp, run, run_gates
from .prepare import ResourceError, prepare_batch, prepare_block
from .reduce import ReducedState, fidelity_against, reduce_to_kept
from .state import SparseState

__all__ = [
    "BACKEND", "DepthReport", "GateNetwork", "MacroOp", "ReducedState", "RegisterLayout",
    "ResourceError", "SparseState", "fidelity_against", "make_layout", "prepare_batch",
    "prepare_block", "reduce_to_kept", "run", "run_gates",
]
