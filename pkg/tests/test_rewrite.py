"""Rewrite rules: pinned examples, patch invariants, FSM encoding oracles."""

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rtlopt import cost
from rtlopt.analysis import transition_table
from rtlopt.analysis.fsm import FsmSpec, extract_fsm
from rtlopt.errors import NotApplicable, UnknownRule
from rtlopt.frontend import ast as A
from rtlopt.frontend import parse
from rtlopt.rewrite import (AOperation, ENCODING_STYLES, FIXPOINT_ORDER,
                            HINT_TO_RULE, RULE_IDS, apply_rule, assign_states,
                            code_width, constant_propagate,
                            eliminate_subexpressions, minimize_fsm,
                            optimize_mcm, reduce_strength, restructure_mux,
                            run_fixpoint)
from rtlopt.verify import fast_verify


def mod(src):
    return parse(src).module("m")


def binops(module, op):
    return [e for e in A.module_exprs(module)
            if isinstance(e, A.Binary) and e.op == op]


def ternaries(module):
    return [e for e in A.module_exprs(module) if isinstance(e, A.Ternary)]


def cases_in(module):
    return [n for item in module.items for n in A.walk(item)
            if isinstance(n, A.Case)]


def rhs_of(module, name):
    for item in module.items:
        if (isinstance(item, A.ContAssign) and isinstance(item.lhs, A.Ident)
                and item.lhs.name == name):
            return item.rhs
    raise AssertionError(f"no continuous assign to {name}")


def cells(module):
    return cost.estimate(module).metrics()["cells"]


# --------------------------------------------------------------------------
# state equivalence oracle: classic table filling (mark distinguishable
# pairs, union the rest), deliberately unlike the partition refinement
# inside minimize_fsm

def nerode_state_count(spec):
    letters, delta = transition_table(spec)
    start = {s for s in (spec.reset_state, 0) if s in spec.states}
    if start:
        reach = set(start)
        frontier = sorted(start)
        while frontier:
            s = frontier.pop()
            for li in range(len(letters)):
                t = delta[(s, li)]
                if t not in reach:
                    reach.add(t)
                    frontier.append(t)
    else:
        reach = set(spec.states)

    def sig(s):
        return tuple(sorted(spec.outputs.get(s, {}).items()))

    order = sorted(reach)
    pairs = [(a, b) for i, a in enumerate(order) for b in order[i + 1:]]
    marked = {(a, b) for a, b in pairs if sig(a) != sig(b)}
    changed = True
    while changed:
        changed = False
        for a, b in pairs:
            if (a, b) in marked:
                continue
            for li in range(len(letters)):
                ta, tb = delta[(a, li)], delta[(b, li)]
                if ta != tb and (min(ta, tb), max(ta, tb)) in marked:
                    marked.add((a, b))
                    changed = True
                    break

    parent = {s: s for s in reach}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, b in pairs:
        if (a, b) not in marked:
            parent[find(b)] = find(a)
    return len({find(s) for s in reach})


def pure_spec(states, transitions, outputs, reset_state, width=4):
    return FsmSpec(state_reg="state", width=width, states=sorted(states),
                   transitions=transitions, outputs=outputs,
                   reset_state=reset_state, inputs={"x": 1, "v": 2},
                   output_widths={"y": 2})


GX = A.Ident("x")
GNX = A.Unary("!", A.Ident("x"))
GV1 = A.Binary("==", A.Ident("v"), A.Literal(1, 2))
GUARDS = [None, GX, GNX, GV1,
          A.Binary("&&", A.Ident("x"),
                   A.Binary("==", A.Ident("v"), A.Literal(2, 2)))]


def machine_zoo():
    # hand-worked class counts; states 1 and 2 of `merge` are bisimilar
    merge = pure_spec([0, 1, 2],
                      [(0, GX, 1), (0, None, 2), (1, None, 0), (2, None, 0)],
                      {0: {"y": 0}, 1: {"y": 1}, 2: {"y": 1}}, 0)
    ring = pure_spec([0, 1, 2, 3],
                     [(s, None, (s + 1) % 4) for s in range(4)],
                     {s: {"y": s} for s in range(4)}, 0)
    parity = pure_spec([0, 1, 2, 3],
                       [(s, None, (s + 1) % 4) for s in range(4)],
                       {s: {"y": s & 1} for s in range(4)}, 0)
    island = pure_spec([0, 1, 3],
                       [(0, None, 1), (1, None, 0), (3, None, 0)],
                       {0: {"y": 0}, 1: {"y": 1}, 3: {"y": 0}}, 0)
    # guarded twins: both leave on x, self-loop otherwise
    twins = pure_spec([0, 1, 2],
                      [(0, GX, 1), (0, None, 2), (1, GX, 0), (2, GX, 0)],
                      {0: {"y": 0}, 1: {"y": 1}, 2: {"y": 1}}, 0)
    # same shape but state 2 self-loops on x instead: distinguishable
    split = pure_spec([0, 1, 2],
                      [(0, GX, 1), (0, None, 2), (1, GX, 0), (2, GX, 2)],
                      {0: {"y": 0}, 1: {"y": 1}, 2: {"y": 1}}, 0)
    return [(merge, 2), (ring, 4), (parity, 2), (island, 2),
            (twins, 2), (split, 3)]


def test_oracle_pinned_class_counts():
    for spec, want in machine_zoo():
        assert nerode_state_count(spec) == want


def test_minimize_matches_oracle_on_pinned_machines():
    for spec, want in machine_zoo():
        small = minimize_fsm(spec)
        assert len(small.states) == want
        assert small.reset_state in small.states


def test_minimize_drops_unreachable_state():
    island = machine_zoo()[3][0]
    small = minimize_fsm(island)
    assert small.states == [0, 1]
    assert 3 not in small.states


def test_minimize_keeps_minimal_machine_intact():
    ring = machine_zoo()[1][0]
    assert minimize_fsm(ring) is ring


def test_minimize_keeps_all_states_without_entry_point():
    spec = pure_spec([2, 4], [(2, None, 2), (4, None, 4)],
                     {2: {"y": 0}, 4: {"y": 1}}, None)
    assert len(minimize_fsm(spec).states) == 2 == nerode_state_count(spec)


@st.composite
def machines(draw):
    n = draw(st.integers(2, 8))
    codes = draw(st.lists(st.integers(0, 15), min_size=n, max_size=n,
                          unique=True))
    states = sorted(codes)
    transitions = []
    outputs = {}
    for frm in states:
        for _ in range(draw(st.integers(0, 3))):
            g = GUARDS[draw(st.integers(0, len(GUARDS) - 1))]
            transitions.append((frm, g, draw(st.sampled_from(states))))
            if g is None:
                break
        outputs[frm] = {"y": draw(st.integers(0, 1))}
    return pure_spec(states, transitions, outputs,
                     draw(st.sampled_from(states)))


@given(machines())
@settings(max_examples=60, deadline=None)
def test_minimize_agrees_with_marking_oracle(spec):
    want = nerode_state_count(spec)
    small = minimize_fsm(spec)
    assert len(small.states) == want
    # and the result is a fixpoint
    assert len(minimize_fsm(small).states) == want


# --------------------------------------------------------------------------
# state assignment

def test_assign_states_pinned_styles():
    ring = machine_zoo()[1][0]
    assert assign_states(ring, "binary") == {0: 0, 1: 1, 2: 2, 3: 3}
    gray = assign_states(ring, "gray")
    seq = [gray[s] for s in ring.states]
    assert seq == [0, 1, 3, 2]
    assert all(bin(a ^ b).count("1") == 1 for a, b in zip(seq, seq[1:]))
    assert assign_states(ring, "onehot") == {0: 1, 1: 2, 2: 4, 3: 8}
    with pytest.raises(ValueError):
        assign_states(ring, "johnson")


def test_assign_states_frequency_trace():
    # hot pair first: (0,1) seen three times claims codes 0 and 1
    spec = pure_spec([0, 1, 2],
                     [(0, None, 1), (0, None, 1), (0, None, 1), (1, None, 2)],
                     {}, None)
    assert assign_states(spec, "frequency") == {0: 0, 1: 1, 2: 2}
    # relabeled machine: same shape, codes follow the pair ranking
    spec2 = pure_spec([5, 7, 9],
                      [(7, None, 9)] * 3 + [(9, None, 5)], {}, None)
    assert assign_states(spec2, "frequency") == {7: 0, 9: 1, 5: 2}


def test_code_width_table():
    assert code_width(1, "binary") == 1
    assert code_width(2, "gray") == 1
    assert code_width(4, "binary") == 2
    assert code_width(8, "frequency") == 3
    assert code_width(9, "binary") == 4
    assert code_width(1, "onehot") == 1
    assert code_width(5, "onehot") == 5


@given(st.integers(1, 9), st.sampled_from(ENCODING_STYLES))
def test_codes_unique_and_within_width(n, style):
    states = list(range(0, 2 * n, 2))
    spec = pure_spec(states, [(s, None, s) for s in states], {}, None,
                     width=5)
    codes = assign_states(spec, style)
    assert sorted(codes) == states
    assert len(set(codes.values())) == n
    assert all(c < (1 << code_width(n, style)) for c in codes.values())


def test_aoperation_values():
    assert AOperation(l1=1).value() == 3
    assert AOperation(l1=2).value() == 5
    assert AOperation(l1=3).value() == 9
    assert AOperation(l1=0, l2=2, s=1).value() == 3     # |1 - 4|
    assert AOperation(l1=4, l2=1, s=1, r=1).value() == 7  # |16 - 2| >> 1


def test_aoperation_odd_at_maximal_shift():
    for u in (1, 3, 5, 7):
        for v in (1, 3, 5):
            for l1 in range(4):
                for l2 in range(4):
                    for s in (0, 1):
                        t = (u << l1) + (-1) ** s * (v << l2)
                        if t == 0:
                            continue
                        r = (abs(t) & -abs(t)).bit_length() - 1
                        assert AOperation(l1, l2, r, s, u, v).value() % 2 == 1


# --------------------------------------------------------------------------
# constant propagation

SRC_CONST = """
module m(output [7:0] y);
  wire [7:0] x;
  assign x = 8'd5;
  assign y = x + 8'd10;
endmodule
"""

SRC_INPUT_FED = """
module m(input [3:0] a, output [4:0] y);
  wire [3:0] x;
  assign x = a;
  assign y = x + 4'd10;
endmodule
"""

SRC_DEAD_IF = """
module m(input [3:0] b, output reg [3:0] a);
  always @* begin
    if (1'b0) a = 4'd1;
    else a = b;
  end
endmodule
"""


def test_const_prop_folds_through_wire():
    patch = apply_rule(mod(SRC_CONST), "const-prop")
    folded = rhs_of(patch.new_module, "y")
    assert isinstance(folded, A.Literal) and folded.value == 15


def test_const_prop_stops_at_input_ports():
    assert constant_propagate(mod(SRC_INPUT_FED)) is None


def test_const_prop_prunes_false_branch():
    m = mod(SRC_DEAD_IF)
    patch = apply_rule(m, "const-prop")
    assert not [n for it in patch.new_module.items for n in A.walk(it)
                if isinstance(n, A.If)]
    assert fast_verify(m, patch.new_module).proven


# --------------------------------------------------------------------------
# dead code elimination

SRC_DEAD_NET = """
module m(input [3:0] a, output [3:0] y);
  wire [3:0] t;
  assign t = a & 4'h3;
  assign y = a;
endmodule
"""

SRC_ALL_LIVE = """
module m(input [3:0] a, output [3:0] y);
  wire [3:0] t;
  assign t = a & 4'h3;
  assign y = t | 4'h4;
endmodule
"""

SRC_CONST_CASE = """
module m(input [3:0] b, output reg [3:0] y);
  wire [1:0] sel;
  assign sel = 2'd1;
  always @* begin
    case (sel)
      2'd0: y = 4'd0;
      2'd1: y = b;
      2'd2: y = 4'd2;
      default: y = 4'd3;
    endcase
  end
endmodule
"""


def test_dce_removes_unread_net():
    m = mod(SRC_DEAD_NET)
    patch = apply_rule(m, "dce")
    assert "t" not in {n.name for n in patch.new_module.nets}
    assert fast_verify(m, patch.new_module).proven


def test_dce_keeps_output_cone():
    assert apply_rule(mod(SRC_ALL_LIVE), "dce") is None


def test_const_case_prunes_then_sweeps():
    m = mod(SRC_CONST_CASE)
    p1 = apply_rule(m, "const-prop")
    assert not cases_in(p1.new_module)
    p2 = apply_rule(p1.new_module, "dce")
    assert "sel" not in {n.name for n in p2.new_module.nets}
    assert cells(p2.new_module) < cells(m)
    assert fast_verify(m, p2.new_module).proven


# --------------------------------------------------------------------------
# common subexpression elimination

SRC_CSE = """
module m(input [2:0] a, input [2:0] b, input [2:0] c, input [2:0] d,
         output [2:0] y1, output [2:0] y2);
  assign y1 = (a + b) + c;
  assign y2 = (a + b) + d;
endmodule
"""

SRC_CSE_NONE = """
module m(input [2:0] a, input [2:0] b, output [3:0] y, output [3:0] z);
  assign y = a + b;
  assign z = a - b;
endmodule
"""

SRC_CSE_BLOCKS = """
module m(input [3:0] a, input [3:0] b, output reg [4:0] p,
         output reg [4:0] q);
  always @* p = (a + b) + 4'd1;
  always @* q = (a + b) + 4'd2;
endmodule
"""


def test_cse_shares_repeated_sum():
    m = mod(SRC_CSE)
    assert len(binops(m, "+")) == 4
    patch = apply_rule(m, "cse")
    new = patch.new_module
    assert len(binops(new, "+")) == 3
    fresh = [n.name for n in new.nets if n.name.startswith("_rwcse")]
    assert len(fresh) == 1
    assert fast_verify(m, new).proven


def test_cse_ignores_unique_subtrees():
    assert eliminate_subexpressions(mod(SRC_CSE_NONE)) is None


def test_cse_hoists_across_blocks_once():
    m = mod(SRC_CSE_BLOCKS)
    patch = apply_rule(m, "cse")
    new = patch.new_module
    assert len(binops(new, "+")) == 3
    assert len([n for n in new.nets if n.name.startswith("_rwcse")]) == 1
    assert fast_verify(m, new).proven


# --------------------------------------------------------------------------
# strength reduction

SRC_MUL_POW2 = """
module m(input [7:0] x, output [7:0] y);
  assign y = x * 4;
endmodule
"""

SRC_DIV_POW2 = """
module m(input [7:0] x, output [7:0] y);
  assign y = x / 8;
endmodule
"""

SRC_MUL10 = """
module m(input [7:0] x, output [7:0] y);
  assign y = x * 10;
endmodule
"""

SRC_BOOL_IDS = """
module m(input [3:0] a, output [3:0] y, output [3:0] z, output [3:0] w,
         output [3:0] u, output [3:0] v);
  assign y = a & a;
  assign z = a ^ a;
  assign w = ~(~a);
  assign u = a | ~a;
  assign v = a & ~a;
endmodule
"""


def test_strength_mul_pow2_becomes_shift():
    m = mod(SRC_MUL_POW2)
    patch = apply_rule(m, "strength-reduce")
    new = patch.new_module
    assert not binops(new, "*")
    shifts = binops(new, "<<")
    assert len(shifts) == 1 and shifts[0].right.value == 2
    assert fast_verify(m, new).proven


def test_strength_div_pow2_becomes_shift():
    m = mod(SRC_DIV_POW2)
    patch = reduce_strength(m)
    new = patch.new_module
    assert not binops(new, "/")
    shifts = binops(new, ">>")
    assert len(shifts) == 1 and shifts[0].right.value == 3
    assert fast_verify(m, new).proven


def test_strength_mul10_becomes_shift_add():
    m = mod(SRC_MUL10)
    patch = apply_rule(m, "strength-reduce")
    new = patch.new_module
    assert not binops(new, "*")
    amounts = sorted(s.right.value for s in binops(new, "<<"))
    assert amounts == [1, 3]
    assert len(binops(new, "+")) == 1
    assert fast_verify(m, new).proven


def test_strength_boolean_identities():
    m = mod(SRC_BOOL_IDS)
    patch = apply_rule(m, "strength-reduce")
    new = patch.new_module
    for op in ("&", "|", "^"):
        assert not binops(new, op)
    # all-ones is spelled ~0 so it stays all-ones under context widening
    assert not [e for e in A.module_exprs(new)
                if isinstance(e, A.Unary) and e.op == "~"
                and not isinstance(e.operand, A.Literal)]
    assert fast_verify(m, new).proven


# --------------------------------------------------------------------------
# multiple constant multiplication

SRC_MCM359 = """
module m(input [7:0] x, output [11:0] a, output [11:0] b, output [11:0] c);
  assign a = x * 3;
  assign b = x * 5;
  assign c = x * 9;
endmodule
"""

SRC_MCM36 = """
module m(input [7:0] x, output [11:0] a, output [11:0] b);
  assign a = x * 3;
  assign b = x * 6;
endmodule
"""

SRC_MCM_SINGLE = """
module m(input [7:0] x, output [11:0] a);
  assign a = x * 3;
endmodule
"""


def test_mcm_shares_shifts_across_three_constants():
    m = mod(SRC_MCM359)
    patch = apply_rule(m, "mcm")
    new = patch.new_module
    shared = [n.name for n in new.nets if n.name.startswith("_rwmcm")]
    assert len(shared) == 4        # shift amounts 0, 1, 2, 3
    for out in ("a", "b", "c"):
        e = rhs_of(new, out)
        assert isinstance(e, A.Binary) and e.op == "+"
        assert isinstance(e.left, A.Ident) and e.left.name in shared
        assert isinstance(e.right, A.Ident) and e.right.name in shared
    assert not binops(new, "*")
    assert fast_verify(m, new).proven


def test_mcm_shares_common_shift_amount():
    m = mod(SRC_MCM36)
    patch = apply_rule(m, "mcm")
    new = patch.new_module
    shared = [n for n in new.nets if n.name.startswith("_rwmcm")]
    assert len(shared) == 3        # 3 = 1+2, 6 = 2+4: amounts 0, 1, 2
    assert fast_verify(m, new).proven


def test_mcm_needs_two_constant_multiplies():
    with pytest.raises(NotApplicable):
        optimize_mcm(mod(SRC_MCM_SINGLE))
    assert apply_rule(mod(SRC_MCM_SINGLE), "mcm") is None


# --------------------------------------------------------------------------
# mux reduction

SRC_MUX_FACTOR = """
module m(input s, input [3:0] a, input [3:0] b, input [3:0] c,
         output [4:0] y);
  assign y = s ? (a + c) : (b + c);
endmodule
"""

SRC_MUX_SAME = """
module m(input s, input [3:0] a, output [3:0] y);
  assign y = s ? a : a;
endmodule
"""

SRC_MUX_NESTED = """
module m(input s, input [3:0] a, input [3:0] b, input [3:0] c,
         output [3:0] y);
  assign y = s ? (s ? a : b) : c;
endmodule
"""


def test_mux_factors_shared_operand():
    m = mod(SRC_MUX_FACTOR)
    assert len(binops(m, "+")) == 2
    patch = apply_rule(m, "mux-reduce")
    new = patch.new_module
    assert len(binops(new, "+")) == 1
    assert len(ternaries(new)) == 1
    assert fast_verify(m, new).proven


def test_mux_merges_identical_arms():
    m = mod(SRC_MUX_SAME)
    patch = apply_rule(m, "mux-reduce")
    new = patch.new_module
    assert not ternaries(new)
    got = rhs_of(new, "y")
    assert isinstance(got, A.Ident) and got.name == "a"
    assert fast_verify(m, new).proven


def test_mux_collapses_nested_same_selector():
    m = mod(SRC_MUX_NESTED)
    patch = apply_rule(m, "mux-reduce")
    new = patch.new_module
    only = ternaries(new)
    assert len(only) == 1
    assert only[0].then.name == "a" and only[0].other.name == "c"
    assert fast_verify(m, new).proven


# --------------------------------------------------------------------------
# mux restructuring

SRC_CHAIN = """
module m(input [1:0] sel, input [1:0] a, input [1:0] b, input [1:0] c,
         input [1:0] d, output reg [1:0] y);
  always @* begin
    if (sel == 0) y = a;
    else if (sel == 1) y = b;
    else if (sel == 2) y = c;
    else y = d;
  end
endmodule
"""

SRC_CASE16 = "\n".join(
    ["module m(input [3:0] sel, output reg [7:0] y);",
     "  always @* begin",
     "    case (sel)"]
    + [f"      4'd{i}: y = 8'd{(i * 7) % 256};" for i in range(16)]
    + ["    endcase", "  end", "endmodule"])

SRC_CASE8 = "\n".join(
    ["module m(input [2:0] sel, output reg [7:0] y);",
     "  always @* begin",
     "    case (sel)"]
    + [f"      3'd{i}: y = 8'd{(i * 11) % 256};" for i in range(8)]
    + ["    endcase", "  end", "endmodule"])

SRC_CASE2 = """
module m(input sel, input [1:0] a, input [1:0] b, output reg [1:0] y);
  always @* begin
    case (sel)
      1'd0: y = a;
      default: y = b;
    endcase
  end
endmodule
"""


def test_chain_becomes_single_case():
    m = mod(SRC_CHAIN)
    patch = apply_rule(m, "mux-restructure")
    new = patch.new_module
    assert not [n for it in new.items for n in A.walk(it)
                if isinstance(n, A.If)]
    got = cases_in(new)
    assert len(got) == 1
    labeled = [a for a in got[0].arms if a.labels is not None]
    assert len(labeled) == 3
    assert any(a.labels is None for a in got[0].arms)
    assert fast_verify(m, new).proven


def test_wide_case_splits_two_level():
    m = mod(SRC_CASE16)
    patch = apply_rule(m, "mux-restructure")
    new = patch.new_module
    got = cases_in(new)
    assert len(got) == 5           # one outer over four inner
    outer = max(got, key=lambda c: len(list(A.walk(c))))
    assert len(outer.arms) == 4
    for arm in outer.arms:
        inner = [n for n in A.walk(arm.body) if isinstance(n, A.Case)]
        assert len(inner) == 1 and len(inner[0].arms) == 4
    assert fast_verify(m, new).proven


def test_small_case_left_alone():
    assert apply_rule(mod(SRC_CASE2), "mux-restructure") is None
    assert apply_rule(mod(SRC_CASE8), "mux-restructure") is None


def test_split_threshold_is_configurable():
    m = mod(SRC_CASE8)
    patch = restructure_mux(m, case_threshold=4)
    assert patch is not None
    assert len(cases_in(patch.new_module)) == 5
    assert fast_verify(m, patch.new_module).proven


# --------------------------------------------------------------------------
# resource sharing

SRC_SHARE_IF = """
module m(input s, input [2:0] a, input [2:0] b, input [2:0] c,
         input [2:0] d, output reg [3:0] y);
  always @* begin
    if (s) y = a + b;
    else y = c + d;
  end
endmodule
"""

SRC_SHARE_NONE = """
module m(input [2:0] a, input [2:0] b, input [2:0] c, input [2:0] d,
         output reg [3:0] y, output reg [3:0] z);
  always @* begin
    y = a + b;
    z = c + d;
  end
endmodule
"""

SRC_SHARE_CASE = """
module m(input [1:0] sel, input [1:0] a, input [1:0] b, input [1:0] c,
         input [1:0] d, input [1:0] e, input [1:0] f, output reg [2:0] y);
  always @* begin
    case (sel)
      2'd0: y = a - b;
      2'd1: y = c - d;
      default: y = e - f;
    endcase
  end
endmodule
"""


def test_share_merges_exclusive_adders():
    m = mod(SRC_SHARE_IF)
    assert len(binops(m, "+")) == 2
    patch = apply_rule(m, "resource-share")
    new = patch.new_module
    assert len(binops(new, "+")) == 1
    assert len(ternaries(new)) == 2    # one mux per operand
    assert fast_verify(m, new).proven


def test_share_requires_exclusive_branches():
    assert apply_rule(mod(SRC_SHARE_NONE), "resource-share") is None


def test_share_folds_three_arm_case():
    m = mod(SRC_SHARE_CASE)
    assert len(binops(m, "-")) == 3
    patch = apply_rule(m, "resource-share")
    new = patch.new_module
    assert len(binops(new, "-")) == 1
    assert fast_verify(m, new).proven


# --------------------------------------------------------------------------
# FSM rules applied at module level

SRC_FSM_MERGE = """
module m(input clk, input rst, input go, output reg [1:0] out);
  reg [1:0] state;
  always @(posedge clk) begin
    if (rst) state <= 2'd0;
    else case (state)
      2'd0: begin out <= 2'd1; if (go) state <= 2'd1; end
      2'd1: begin out <= 2'd2; state <= 2'd2; end
      2'd2: begin out <= 2'd2; state <= 2'd1; end
    endcase
  end
endmodule
"""

SRC_FSM4 = """
module m(input clk, input rst, input go, output reg [1:0] out);
  reg [1:0] state;
  always @(posedge clk) begin
    if (rst) state <= 2'd0;
    else case (state)
      2'd0: begin out <= 2'd0; if (go) state <= 2'd1; end
      2'd1: begin out <= 2'd1; state <= 2'd2; end
      2'd2: begin out <= 2'd2; state <= 2'd3; end
      2'd3: begin out <= 2'd3; if (go) state <= 2'd0; end
    endcase
  end
endmodule
"""

SRC_FSM_SPARSE = """
module m(input clk, input rst, input go, output reg [1:0] out);
  reg [2:0] state;
  always @(posedge clk) begin
    if (rst) state <= 3'd0;
    else case (state)
      3'd0: begin out <= 2'd0; if (go) state <= 3'd1; end
      3'd1: begin out <= 2'd1; state <= 3'd2; end
      3'd2: begin out <= 2'd2; state <= 3'd4; end
      3'd4: begin out <= 2'd3; if (go) state <= 3'd0; end
    endcase
  end
endmodule
"""

SRC_FSM_TWOPROC = """
module m(input clk, input rst, input go, output [1:0] yy);
  reg [1:0] state;
  reg [1:0] nxt;
  reg [1:0] outv;
  always @(posedge clk) begin
    if (!rst) state <= 2'd0;
    else state <= nxt;
  end
  always @* begin
    nxt = state;
    case (state)
      2'd0: if (go) nxt = 2'd1;
      2'd1: nxt = 2'd2;
      2'd2: nxt = 2'd0;
    endcase
  end
  always @* begin
    outv = 2'd0;
    case (state)
      2'd0: outv = 2'd1;
      2'd1: outv = 2'd2;
      2'd2: outv = 2'd3;
    endcase
  end
  assign yy = outv;
endmodule
"""

SRC_FSM_PORT_STATE = """
module m(input clk, input rst, input go, output reg [1:0] state);
  always @(posedge clk) begin
    if (rst) state <= 2'd0;
    else case (state)
      2'd0: if (go) state <= 2'd1;
      2'd1: state <= 2'd2;
      2'd2: state <= 2'd2;
    endcase
  end
endmodule
"""


def test_minimize_merges_bisimilar_states_in_module():
    m = mod(SRC_FSM_MERGE)
    patch = apply_rule(m, "fsm-minimize")
    spec = extract_fsm(patch.new_module)[0]
    assert spec.states == [0, 1]
    assert fast_verify(m, patch.new_module).ok


def test_minimize_leaves_minimal_module_alone():
    assert apply_rule(mod(SRC_FSM4), "fsm-minimize") is None


def test_assign_gray_repacks_sparse_codes():
    m = mod(SRC_FSM_SPARSE)
    patch = apply_rule(m, "fsm-assign", style="gray")
    new = patch.new_module
    assert sorted(extract_fsm(new)[0].states) == [0, 1, 2, 3]
    reg = next(n for n in new.nets if n.name == "state")
    assert reg.width == 2
    assert fast_verify(m, new).ok


def test_assign_skips_cost_neutral_permutation():
    # dense codes: gray only relabels the same set, so nothing to gain
    assert apply_rule(mod(SRC_FSM4), "fsm-assign", style="gray") is None
    assert apply_rule(mod(SRC_FSM4), "fsm-assign", style="binary") is None


def test_assign_onehot_mirrors_powerup_in_default_arm():
    m = mod(SRC_FSM_MERGE)
    patch = apply_rule(m, "fsm-assign", style="onehot")
    new = patch.new_module
    assert sorted(extract_fsm(new)[0].states) == [1, 2, 4]
    # power-up value 0 lands in the default arm, which mirrors old state 0
    seq = next(it for it in new.items
               if isinstance(it, A.Always) and not it.sens.star)
    case = next(n for n in A.walk(seq) if isinstance(n, A.Case))
    assert any(a.labels is None for a in case.arms)
    assert fast_verify(m, new).ok


def test_assign_drops_two_process_carrier():
    m = mod(SRC_FSM_TWOPROC)
    patch = apply_rule(m, "fsm-assign", style="onehot")
    assert "nxt" not in {n.name for n in patch.new_module.nets}
    assert fast_verify(m, patch.new_module).ok


def test_fsm_rules_refuse_port_state_reg():
    assert apply_rule(mod(SRC_FSM_PORT_STATE), "fsm-minimize") is None
    assert apply_rule(mod(SRC_FSM_PORT_STATE), "fsm-assign",
                      style="onehot") is None


# --------------------------------------------------------------------------
# dispatch, patches, fixpoint

def test_apply_rule_dispatch():
    m = mod(SRC_MUL_POW2)
    with pytest.raises(UnknownRule):
        apply_rule(m, "bogus")
    assert apply_rule(m, "fsm-minimize") is None
    assert apply_rule(m, "fsm-assign") is None
    with pytest.raises(ValueError):
        apply_rule(m, "fsm-assign", style="wat")
    assert len(RULE_IDS) == 12
    assert set(HINT_TO_RULE.values()) <= set(RULE_IDS)
    assert set(FIXPOINT_ORDER) <= set(RULE_IDS)


def test_patch_invariants_and_log_shape():
    m = mod(SRC_MUL10)
    patch = apply_rule(m, "strength-reduce")
    assert patch.rule_id == "strength-reduce"
    assert ([(p.name, p.direction, p.width) for p in patch.new_module.ports]
            == [(p.name, p.direction, p.width) for p in m.ports])
    assert patch.before_hash != patch.after_hash
    log = patch.to_json()
    assert set(log) == {"rule_id", "module", "before_hash", "after_hash",
                        "delta"}
    assert log["module"] == "m"
    assert set(log["delta"]) == {"wires", "cells", "area", "delay"}


FIXTURES = [
    ("const-prop", SRC_CONST, {}, True),
    ("dce", SRC_DEAD_NET, {}, True),
    ("cse", SRC_CSE, {}, True),
    ("strength-reduce", SRC_MUL10, {}, True),
    ("mcm", SRC_MCM359, {}, True),
    ("mux-reduce", SRC_MUX_FACTOR, {}, True),
    ("mux-restructure", SRC_CHAIN, {}, True),
    ("resource-share", SRC_SHARE_IF, {}, True),
    ("fsm-minimize", SRC_FSM_MERGE, {}, False),
    ("fsm-assign", SRC_FSM_SPARSE, {"style": "gray"}, False),
]


@pytest.mark.parametrize("rule,src,opts,comb", FIXTURES,
                         ids=[f[0] for f in FIXTURES])
def test_every_rule_preserves_semantics(rule, src, opts, comb):
    m = mod(src)
    patch = apply_rule(m, rule, **opts)
    assert patch is not None
    r = fast_verify(m, patch.new_module)
    assert r.ok
    if comb:
        assert r.proven


@pytest.mark.parametrize("rule,src,opts,comb", FIXTURES,
                         ids=[f[0] for f in FIXTURES])
def test_rules_settle_within_five_rounds(rule, src, opts, comb):
    cur = apply_rule(mod(src), rule, **opts).new_module
    for _ in range(5):
        again = apply_rule(cur, rule, **opts)
        if again is None:
            break
        # re-application may only keep improving, never oscillate
        assert (again.predicted_delta["cells"] < 0
                or again.predicted_delta["area"] < 0)
        cur = again.new_module
    else:
        pytest.fail(f"{rule} still rewriting after five rounds")


STRICT_DROPS = [
    ("strength-reduce", SRC_MUL_POW2),
    ("strength-reduce", SRC_MUL10),
    ("mcm", SRC_MCM359),
    ("mux-reduce", SRC_MUX_FACTOR),
    ("resource-share", SRC_SHARE_IF),
]

LAX_DROPS = [
    ("const-prop", SRC_CONST),
    ("dce", SRC_DEAD_NET),
    ("cse", SRC_CSE),
    ("mux-restructure", SRC_CHAIN),
    ("mux-restructure", SRC_CASE16),
]


@pytest.mark.parametrize("rule,src", STRICT_DROPS)
def test_cell_count_strictly_drops(rule, src):
    patch = apply_rule(mod(src), rule)
    assert patch.predicted_delta["cells"] < 0


@pytest.mark.parametrize("rule,src", LAX_DROPS)
def test_cell_count_never_rises(rule, src):
    patch = apply_rule(mod(src), rule)
    assert patch.predicted_delta["cells"] <= 0


SRC_PIPE = """
module m(input [3:0] a, input [3:0] b, input s, output [7:0] y,
         output [7:0] z);
  wire [3:0] k;
  wire [3:0] dead;
  assign k = 4'd3;
  assign dead = a ^ b;
  assign y = (a * 4'd4) + (s ? (a + b) : (a + b));
  assign z = (k + 4'd1) * 4'd2;
endmodule
"""


def test_fixpoint_runs_rules_to_quiescence():
    m = mod(SRC_PIPE)
    final, patches = run_fixpoint(m)
    assert [p.rule_id for p in patches] == [
        "const-prop", "dce", "strength-reduce", "cse", "mux-reduce"]
    assert fast_verify(m, final).proven
    assert cells(final) < cells(m)
    again, more = run_fixpoint(final)
    assert more == [] and again is final


def test_fixpoint_rejects_unknown_rule():
    with pytest.raises(UnknownRule):
        run_fixpoint(mod(SRC_PIPE), rules=["const-prop", "bogus"])
