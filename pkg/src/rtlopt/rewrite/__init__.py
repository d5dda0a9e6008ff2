"""Semantics-preserving rewrite rules over module ASTs.

Every rule takes a module and yields a :class:`RewritePatch` (or None
when nothing changed); patches carry the rewritten module, AST digests,
and a predicted cost delta.  ``apply_rule`` dispatches by rule id and
``run_fixpoint`` chains the whole library until quiescence.
"""

from .base import RULE_IDS, RewritePatch
from .engine import (FIXPOINT_ORDER, HINT_TO_RULE, apply_rule,
                     constant_propagate, eliminate_dead_code,
                     eliminate_subexpressions, optimize_mcm, reduce_mux,
                     reduce_strength, restructure_mux, run_fixpoint,
                     share_resources)
from .fsm_rules import ENCODING_STYLES, assign_states, code_width, minimize_fsm
from .strength import AOperation

__all__ = [
    "RULE_IDS", "RewritePatch", "FIXPOINT_ORDER", "HINT_TO_RULE",
    "apply_rule", "run_fixpoint",
    "constant_propagate", "eliminate_dead_code", "eliminate_subexpressions",
    "reduce_strength", "optimize_mcm", "reduce_mux", "restructure_mux",
    "share_resources", "minimize_fsm", "assign_states", "code_width",
    "ENCODING_STYLES", "AOperation",
]
