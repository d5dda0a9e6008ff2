"""Verilog-subset frontend: parse, print, structural comparison."""

from .ast import (
    Always, Assign, Begin, Binary, Case, CaseArm, Concat, ContAssign,
    DesignAst, Expr, Ident, If, Index, Instance, Item, Literal, ModuleAst,
    Net, Node, Param, PartSelect, Port, Repl, SensList, Stmt, Ternary,
    Unary, canonical, children, clone, module_exprs, renumber,
    structural_eq, structural_hash, walk, walk_exprs,
)
from .parser import parse
from .printer import expr_to_str, print_design, print_module
from .width import Sym, annotate_expr, annotate_module, eval_const, symbol_table

__all__ = [
    "Always", "Assign", "Begin", "Binary", "Case", "CaseArm", "Concat",
    "ContAssign", "DesignAst", "Expr", "Ident", "If", "Index", "Instance",
    "Item", "Literal", "ModuleAst", "Net", "Node", "Param", "PartSelect",
    "Port", "Repl", "SensList", "Stmt", "Sym", "Ternary", "Unary",
    "annotate_expr", "annotate_module", "canonical", "children", "clone",
    "eval_const", "expr_to_str", "module_exprs", "parse", "print_design",
    "print_module", "renumber", "structural_eq", "structural_hash",
    "symbol_table", "walk", "walk_exprs",
]
