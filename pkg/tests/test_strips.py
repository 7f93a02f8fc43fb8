import dataclasses

import pytest
from hypothesis import given, strategies as st

from sketchrun.pddl import Atom
from sketchrun.search import bfs
from sketchrun.strips import InapplicableAction, apply, applicable, format_plan, parse_plan
from sketchrun.sexpr import ParseError

from conftest import blocks_problem, bundled, hanoi
from sketchrun.generators import gen_blocks


def test_grounding_counts_three_blocks():
    gp = bundled("on-3")
    by = {}
    for a in gp.actions:
        by[a.name] = by.get(a.name, 0) + 1
    # injective grounding: no stack(x, x)
    assert by == {"pickup": 3, "putdown": 3, "stack": 6, "unstack": 6}
    assert gp.objects == ("b1", "x", "y")


def test_static_pruning_hanoi():
    gp = hanoi(3)
    # move(d, from, to) needs disk(d) and smaller(d, to): statics prune most groundings
    assert all(a.args[0].startswith("d") for a in gp.actions)
    assert len(gp.successors(gp.init)) == 2
    with pytest.raises(KeyError):
        gp.ground_action("fly", ["d1"])
    pruned = gp.ground_action("move", ["peg1", "d1", "d2"])
    assert pruned.index == -1 and not applicable(gp.init, pruned)


def test_goal_copies_are_static_and_true():
    gp = bundled("on-3")
    g = gp.atom_index[Atom("on_G", ("x", "y"))]
    assert gp.init >> g & 1
    assert gp.static_mask >> g & 1
    assert not gp.dynamic_mask >> g & 1


def test_apply_and_inapplicable():
    gp = bundled("on-3")
    a = gp.ground_action("unstack", ["b1", "x"])
    s = apply(gp.init, a)
    assert gp.holds(s, Atom("holding", ("b1",)))
    assert not gp.holds(s, Atom("handempty", ()))
    with pytest.raises(InapplicableAction):
        apply(s, a)


def test_plan_roundtrip_and_validation():
    gp = bundled("on-3")
    plan = bfs(gp, gp.init, gp.is_goal)
    assert len(plan) == 4
    again = parse_plan(format_plan(plan), gp)
    assert again == plan
    assert gp.validate_plan(plan).valid
    check = gp.validate_plan(plan[:-1])
    assert not check.valid and check.failure_index == 3
    check = gp.validate_plan(plan[1:])
    assert not check.valid and check.failure_index == 0
    with pytest.raises(ParseError):
        parse_plan("(stack x)", gp)


def test_empty_plan_at_goal():
    gp = bundled("on-3")
    plan = bfs(gp, gp.init, gp.is_goal)
    at_goal = dataclasses.replace(gp, init=gp.run_plan(plan))
    assert at_goal.validate_plan([]).valid


@given(st.integers(3, 5), st.integers(0, 10_000), st.lists(st.integers(0, 1000), max_size=25))
def test_random_walk_semantics(n, seed, picks):
    """Successors agree with applicable/apply; statics never change."""
    gp = blocks_problem(gen_blocks(n, "arbitrary", seed).to_pddl())
    s = gp.init
    for p in picks:
        succ = gp.successors(s)
        assert [a for a, _ in succ] == [a for a in gp.actions if applicable(s, a)]
        if not succ:
            break
        a, s2 = succ[p % len(succ)]
        assert s2 == apply(s, a)
        assert s2 & gp.static_mask == gp.init & gp.static_mask
        # blocks world invariant: hand empty xor holding exactly one block
        held = sum(gp.holds(s2, Atom("holding", (b,))) for b in gp.objects)
        assert held + gp.holds(s2, Atom("handempty", ())) == 1
        s = s2
