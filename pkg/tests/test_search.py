import math

import pytest
from hypothesis import given, strategies as st

from sketchrun.search import GOAL, NoveltyTable, SubgoalTest, bfs, iw, iw_k, measure_width
from sketchrun.features import Evaluator

from conftest import blocks_problem, bundled, hanoi
from sketchrun.generators import gen_blocks

# measured once with the BFS oracle, then frozen
PINNED_WIDTHS = {"on-3": 1, "on-5-holding": 2, "tower-4": 3, "blocks-6": 4, "hanoi-3": 2}


def test_novelty_table():
    t = NoveltyTable(1)
    assert t.check(0b011)
    assert not t.check(0b001)
    assert t.check(0b100)
    t2 = NoveltyTable(2)
    assert t2.check(0b011)
    assert t2.check(0b101)  # pair (0, 2) is new
    assert not t2.check(0b001)
    masked = NoveltyTable(1, mask=0b01)
    assert masked.check(0b01) and not masked.check(0b11)


def test_iw0_is_one_step_lookahead():
    gp = bundled("on-3")
    target = gp.successors(gp.init)[0][1]
    res = iw_k(gp, gp.init, lambda s: s == target, 0)
    assert res is not None and len(res.plan) == 1 and res.expanded == 1
    far = bfs(gp, gp.init, gp.is_goal)
    assert iw_k(gp, gp.init, gp.is_goal, 0) is None
    assert len(far) == 4


def test_iw_start_test():
    gp = bundled("on-3")
    res = iw_k(gp, gp.init, lambda s: True, 1)
    assert res.plan == [] and res.expanded == 0
    res = iw_k(gp, gp.init, lambda s: True, 1, test_start=False)
    assert len(res.plan) == 1


def test_iterated_iw_accumulates_cost():
    gp = bundled("tower-4")
    res = iw(gp, gp.init, gp.is_goal, 3)
    assert res.k == 3
    single = iw_k(gp, gp.init, gp.is_goal, 3)
    assert res.expanded > single.expanded
    assert iw(gp, gp.init, gp.is_goal, 1) is None


@pytest.mark.parametrize("name, width", sorted(PINNED_WIDTHS.items()))
def test_pinned_widths(name, width):
    gp = bundled(name)
    assert measure_width(gp) == width
    opt = bfs(gp, gp.init, gp.is_goal)
    assert len(iw_k(gp, gp.init, gp.is_goal, width).plan) == len(opt)


def test_width_of_trivial_and_unsolvable():
    gp = hanoi(1)
    assert measure_width(gp) == 0
    assert measure_width(gp, goal_test=lambda s: False) == math.inf


@given(st.integers(2, 4), st.integers(0, 1000))
def test_iw_plans_are_valid_and_never_shorter_than_bfs(n, seed):
    gp = blocks_problem(gen_blocks(n, "arbitrary", seed).to_pddl())
    opt = bfs(gp, gp.init, gp.is_goal)
    assert opt is not None
    for k in (1, 2):
        res = iw_k(gp, gp.init, gp.is_goal, k)
        if res is not None:
            assert gp.validate_plan(res.plan).valid
            assert len(res.plan) >= len(opt)
    # with k = number of dynamic atoms IW is plain breadth-first search
    full = iw_k(gp, gp.init, gp.is_goal, bin(gp.dynamic_mask).count("1"))
    assert len(full.plan) == len(opt)


def test_subgoal_test_prefers_goal_then_rule_order(sketches):
    sk = sketches["on-width2"]
    gp = bundled("on-3")
    ev = Evaluator(gp)
    test = SubgoalTest(gp, sk, sk.rules, ev, gp.init)
    assert [r.id for r, _ in test.rules] == ["r0"]  # only r0's condition holds (n > 0)
    res = iw(gp, gp.init, test, 2, test_start=False)
    assert res.tag is sk.rules[0] and len(res.plan) == 2
    goal_state = gp.run_plan(bfs(gp, gp.init, gp.is_goal))
    assert test(goal_state) == GOAL
