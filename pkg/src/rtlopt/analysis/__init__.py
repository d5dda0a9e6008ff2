"""Structural analyses: instance tree, def-use chains, pattern detection,
and FSM extraction."""

from .defuse import DefSite, DefUseGraph, UseSite, build_def_use
from .fsm import (FsmSpec, emit_fsm_module, extract_fsm,
                  transition_table)
from .instance_tree import (DEFAULT_EDGE_WEIGHTS, InstanceTree,
                            build_instance_tree, classify_edge)
from .patterns import AnalysisResult, analyze

__all__ = [
    "AnalysisResult", "DefSite", "DefUseGraph", "DEFAULT_EDGE_WEIGHTS",
    "FsmSpec", "InstanceTree", "UseSite", "analyze", "build_def_use",
    "build_instance_tree", "classify_edge", "emit_fsm_module", "extract_fsm",
    "transition_table",
]
