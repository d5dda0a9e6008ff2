"""Common subexpression hoisting.

Repeated operator subtrees move to a fresh wire sized at the width the
simulator evaluates them at; every occurrence then reads the wire.  A
candidate is skipped unless all of its occurrences share one evaluation
width, since a single wire can only reproduce one masking context.
Expressions reading a name that any block assigns with ``=`` are never
hoisted: their value depends on where in the block they appear, which a
settled wire cannot reproduce.
"""

from __future__ import annotations

import copy

from ..frontend import ast as A
from .base import (FreshNames, add_wire, blocking_assigned_names,
                   clone_module, eval_width_map, map_read_exprs, reannotate)

_OP_NODES = (A.Unary, A.Binary, A.Ternary, A.Concat, A.Repl,
             A.Index, A.PartSelect)
_ROOTS = (A.Unary, A.Binary, A.Ternary)

_MAX_HOISTS = 100


def _size(e: A.Expr) -> int:
    return sum(1 for n in A.walk(e) if isinstance(n, _OP_NODES))


def _reads(e: A.Expr) -> set[str]:
    return {n.name for n in A.walk_exprs(e) if isinstance(n, A.Ident)}


def _pick(module: A.ModuleAst) -> tuple[tuple, A.Expr, int] | None:
    """Best repeated subtree: (canonical key, a sample node, eval width)."""
    widths = eval_width_map(module)
    blocked = blocking_assigned_names(module)
    seen: dict[tuple, list[tuple[A.Expr, int]]] = {}

    def note(e: A.Expr) -> A.Expr:
        if isinstance(e, _ROOTS) and id(e) in widths:
            seen.setdefault(A.canonical(e), []).append((e, widths[id(e)]))
        return e

    map_read_exprs(module, note)
    best = None
    best_key = None
    for key, occs in seen.items():
        if len(occs) < 2:
            continue
        node, w = occs[0]
        if any(ow != w for _, ow in occs):
            continue
        if _reads(node) & blocked:
            continue
        rank = (-_size(node), -len(occs), repr(key))
        if best is None or rank < best:
            best = rank
            best_key = (key, node, w)
    return best_key


def hoist_common(module: A.ModuleAst) -> A.ModuleAst | None:
    """Hoist repeated subexpressions into shared wires."""
    out = clone_module(module)
    fresh = FreshNames(out, "cse")
    changed = False
    for _ in range(_MAX_HOISTS):
        found = _pick(out)
        if found is None:
            break
        key, node, width = found
        name = fresh.take()
        rhs = copy.deepcopy(node)

        def swap(e: A.Expr) -> A.Expr:
            if isinstance(e, _ROOTS) and A.canonical(e) == key:
                ident = A.Ident(name)
                ident.width = width
                return ident
            return e

        map_read_exprs(out, swap)
        add_wire(out, name, width)
        out.items.append(A.ContAssign(A.Ident(name), rhs))
        changed = True
    if not changed:
        return None
    reannotate(out)
    if A.canonical(out) == A.canonical(module):
        return None
    return out
