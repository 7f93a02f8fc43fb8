"""Width-based search: novelty tables, IW(k), iterated IW, and a BFS oracle."""
from __future__ import annotations

import itertools
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Optional

from .features import Evaluator
from .sketch import Rule, Sketch, effect_holds, satisfies
from .strips import GroundAction, GroundProblem, State, iter_bits

GOAL = "goal"

# A goal test maps a state to a truthy tag (GOAL, a Rule, ...) or None.
GoalTest = Callable[[State], object]


class NoveltyTable:
    """Records every tuple of at most ``k`` atoms seen so far.

    Only bits inside ``mask`` count; static atoms are true everywhere and
    would never be novel anyway.
    """

    def __init__(self, k: int, mask: int = -1):
        self.k = k
        self.mask = mask
        self.seen: set = set()

    def check(self, s: State) -> bool:
        """True iff ``s`` makes some tuple true for the first time. Records all of them."""
        atoms = list(iter_bits(s & self.mask)) if self.mask != -1 else list(iter_bits(s))
        seen = self.seen
        novel = False
        for size in range(1, self.k + 1):
            for t in itertools.combinations(atoms, size):
                if t not in seen:
                    seen.add(t)
                    novel = True
        return novel

    def __len__(self) -> int:
        return len(self.seen)


def novelty_check(s: State, table: NoveltyTable) -> bool:
    return table.check(s)


@dataclass
class IWResult:
    plan: list[GroundAction]
    state: State
    k: int
    expanded: int
    generated: int
    tag: object = None  # what the goal test returned for ``state``


@dataclass
class SearchStats:
    expanded: int = 0
    generated: int = 0


def _extract(parents: dict, s: State) -> list[GroundAction]:
    plan = []
    while True:
        parent = parents[s]
        if parent is None:
            break
        s, a = parent
        plan.append(a)
    plan.reverse()
    return plan


def iw_k(
    gp: GroundProblem,
    start: State,
    goal_test: GoalTest,
    k: int,
    test_start: bool = True,
    stats: SearchStats | None = None,
) -> Optional[IWResult]:
    """IW(k) from ``start``; None when the search space is exhausted.

    ``k == 0`` only looks at the immediate successors of ``start``. Goal tests
    run when a state is generated; the queue is FIFO and successors come in
    ground-action order, so the result is deterministic.
    """
    stats = stats if stats is not None else SearchStats()
    if test_start:
        tag = goal_test(start)
        if tag:
            return IWResult([], start, k, 0, 0, tag)
    expanded = generated = 0
    if k == 0:
        expanded = 1
        for a, s2 in gp.successors(start):
            generated += 1
            tag = goal_test(s2)
            if tag:
                stats.expanded += expanded
                stats.generated += generated
                return IWResult([a], s2, 0, expanded, generated, tag)
        stats.expanded += expanded
        stats.generated += generated
        return None

    table = NoveltyTable(k, gp.dynamic_mask)
    table.check(start)
    parents: dict[State, tuple | None] = {start: None}
    queue = deque([start])
    while queue:
        s = queue.popleft()
        expanded += 1
        for a, s2 in gp.successors(s):
            if s2 in parents:
                continue
            generated += 1
            parents[s2] = (s, a)
            tag = goal_test(s2)
            if tag:
                stats.expanded += expanded
                stats.generated += generated
                return IWResult(_extract(parents, s2), s2, k, expanded, generated, tag)
            if table.check(s2):
                queue.append(s2)
    stats.expanded += expanded
    stats.generated += generated
    return None


def iw(
    gp: GroundProblem,
    start: State,
    goal_test: GoalTest,
    k_max: int,
    test_start: bool = True,
    stats: SearchStats | None = None,
) -> Optional[IWResult]:
    """Run IW(0), IW(1), ... IW(k_max); return the first success.

    The returned counts include the work of failed lower-k rounds.
    """
    stats = stats if stats is not None else SearchStats()
    spent = SearchStats()
    for k in range(k_max + 1):
        round_stats = SearchStats()
        res = iw_k(gp, start, goal_test, k, test_start, round_stats)
        stats.expanded += round_stats.expanded
        stats.generated += round_stats.generated
        if res is not None:
            res.expanded += spent.expanded
            res.generated += spent.generated
            return res
        spent.expanded += round_stats.expanded
        spent.generated += round_stats.generated
    return None


def bfs(
    gp: GroundProblem, start: State, goal_test: GoalTest, test_start: bool = True, limit: int | None = None
) -> Optional[list[GroundAction]]:
    """Plain breadth-first search; the reference oracle for plan optimality."""
    if test_start and goal_test(start):
        return []
    parents: dict[State, tuple | None] = {start: None}
    queue = deque([start])
    while queue:
        s = queue.popleft()
        for a, s2 in gp.successors(s):
            if s2 in parents:
                continue
            parents[s2] = (s, a)
            if goal_test(s2):
                return _extract(parents, s2)
            if limit is not None and len(parents) > limit:
                raise RuntimeError("bfs state limit exceeded")
            queue.append(s2)
    return None


def measure_width(
    gp: GroundProblem,
    goal_test: GoalTest | None = None,
    start: State | None = None,
    k_max: int | None = None,
    test_start: bool = True,
) -> float:
    """Smallest k for which IW(k) finds an optimal plan; ``math.inf`` if unsolvable.

    Optimality is judged against BFS. A plan of length at most one has width 0.
    Returns ``math.inf`` too when no k up to ``k_max`` works.
    """
    goal_test = goal_test or gp.is_goal
    start = gp.init if start is None else start
    opt = bfs(gp, start, goal_test, test_start)
    if opt is None:
        return math.inf
    if len(opt) <= 1:
        return 0
    top = k_max if k_max is not None else bin(gp.dynamic_mask).count("1")
    for k in range(1, top + 1):
        res = iw_k(gp, start, goal_test, k, test_start)
        if res is not None and len(res.plan) == len(opt):
            return k
    return math.inf


# --------------------------------------------------------------------------
# sketch subgoals


class SubgoalTest:
    """Goal test of the subproblem rooted at ``s`` under rules ``R(m)``.

    Returns ``GOAL`` for goal states of the problem (checked first), else the
    first external value rule (declaration order) the pair ``(s, s2)`` is
    compatible with, else None.
    """

    def __init__(self, gp: GroundProblem, sk: Sketch, rules, ev: Evaluator, s: State, v=None, env=None):
        self.gp = gp
        self.ev = ev
        self.v = v or {}
        self.env = env or {}
        self.features = sk.features
        self.source = [ev.measure(f, s, self.v, self.env) for f in sk.features]
        self.rules: list[tuple[Rule, list]] = []
        for r in rules:
            if r.kind != "value" or not satisfies(sk, r.cond, ev, s, self.v, self.env):
                continue
            checks = []
            for i, f in enumerate(sk.features):
                op = r.effect_on(f.name)
                if op != "unk":
                    checks.append((i, op))
            self.rules.append((r, checks))

    def __call__(self, s2: State):
        if self.gp.is_goal(s2):
            return GOAL
        if not self.rules:
            return None
        cache: dict[int, object] = {}
        for r, checks in self.rules:
            for i, op in checks:
                if i not in cache:
                    cache[i] = self.ev.measure(self.features[i], s2, self.v, self.env)
                if not effect_holds(op, self.source[i], cache[i]):
                    break
            else:
                return r
        return None
