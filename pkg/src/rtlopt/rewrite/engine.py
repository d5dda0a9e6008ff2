"""Rule dispatch, spec-level operations, and the fixpoint driver."""

from __future__ import annotations

from ..errors import NotApplicable, UnknownRule
from ..frontend import ast as A
from . import cse, dce, fold, fsm_rules, mux, strength
from .base import RULE_IDS, RewritePatch, make_patch

_TRANSFORMS = {
    "const-fold": fold.const_fold,
    "const-prop": fold.constant_propagate,
    "copy-prop": fold.copy_propagate,
    "cse": cse.hoist_common,
    "dce": dce.eliminate_dead,
    "strength-reduce": strength.reduce_strength,
    "mcm": strength.optimize_mcm,
    "mux-reduce": mux.reduce_mux,
    "mux-restructure": mux.restructure_mux,
    "resource-share": mux.share_resources,
    "fsm-minimize": fsm_rules.apply_minimize,
    "fsm-assign": fsm_rules.apply_assign,
}

assert set(_TRANSFORMS) == set(RULE_IDS)

# analysis hint identifiers -> the rule that exploits them
HINT_TO_RULE = {
    "dead-code-elimination": "dce",
    "constant-propagation": "const-prop",
    "subexpression-elimination": "cse",
    "strength-reduction": "strength-reduce",
    "multiple-constant-multiplication": "mcm",
    "mux-reduction": "mux-reduce",
    "mux-restructuring": "mux-restructure",
    "resource-sharing": "resource-share",
    "state-minimization": "fsm-minimize",
    "state-assignment": "fsm-assign",
}

# enabling transforms run before the rules they feed
FIXPOINT_ORDER = (
    "const-prop", "dce", "strength-reduce", "cse", "mcm",
    "mux-reduce", "mux-restructure", "resource-share",
    "fsm-minimize", "fsm-assign",
)


def apply_rule(module: A.ModuleAst, rule_id: str,
               **opts) -> RewritePatch | None:
    """Run one rule against a module; None when nothing changed."""
    try:
        transform = _TRANSFORMS[rule_id]
    except KeyError:
        raise UnknownRule(rule_id) from None
    try:
        new = transform(module, **opts)
    except NotApplicable:
        return None
    if new is None:
        return None
    return make_patch(module, new, rule_id)


def run_fixpoint(module: A.ModuleAst, rules=None, max_passes: int = 8,
                 ) -> tuple[A.ModuleAst, list[RewritePatch]]:
    """Apply rules in order until a full pass changes nothing."""
    order = tuple(rules) if rules is not None else FIXPOINT_ORDER
    for rid in order:
        if rid not in _TRANSFORMS:
            raise UnknownRule(rid)
    patches: list[RewritePatch] = []
    cur = module
    for _ in range(max_passes):
        changed = False
        for rid in order:
            patch = apply_rule(cur, rid)
            if patch is not None:
                patches.append(patch)
                cur = patch.new_module
                changed = True
        if not changed:
            break
    return cur, patches


# spec-facing operation names; each yields a patch or None for no change

def constant_propagate(module: A.ModuleAst) -> RewritePatch | None:
    return apply_rule(module, "const-prop")


def eliminate_dead_code(module: A.ModuleAst) -> RewritePatch | None:
    return apply_rule(module, "dce")


def eliminate_subexpressions(module: A.ModuleAst) -> RewritePatch | None:
    return apply_rule(module, "cse")


def reduce_strength(module: A.ModuleAst) -> RewritePatch | None:
    return apply_rule(module, "strength-reduce")


def optimize_mcm(module: A.ModuleAst) -> RewritePatch:
    """Raises NotApplicable when no variable has two constant multiplies."""
    new = strength.optimize_mcm(module)
    return make_patch(module, new, "mcm")


def reduce_mux(module: A.ModuleAst) -> RewritePatch | None:
    return apply_rule(module, "mux-reduce")


def restructure_mux(module: A.ModuleAst, **opts) -> RewritePatch | None:
    return apply_rule(module, "mux-restructure", **opts)


def share_resources(module: A.ModuleAst) -> RewritePatch | None:
    return apply_rule(module, "resource-share")
