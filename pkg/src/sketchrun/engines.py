"""Sketch-driven execution: SIW_R, SIW*_R (memory + registers) and SIW_M (modules).

All engines return an ``EngineResult`` on success and raise ``EngineFailure``
otherwise. Both carry a trace: a list of JSON-ready event dicts.
"""
from __future__ import annotations

import itertools
import json
import logging
import math
import random
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .features import CONCEPT, Evaluator, Node
from .search import GOAL, SearchStats, SubgoalTest, iw, measure_width
from .sketch import ModuleSet, Rule, Sketch, satisfies
from .strips import GroundAction, GroundProblem, State, applicable

log = logging.getLogger(__name__)

DEFAULT_KMAX = 2


class EngineFailure(Exception):
    """The engine could not reach a goal. ``kind`` names the failure mode."""

    def __init__(self, kind: str, message: str, result: "EngineResult | None" = None):
        super().__init__(f"{kind}: {message}")
        self.kind = kind
        self.message = message
        self.result = result


class Irreducible(EngineFailure):
    def __init__(self, message: str, result=None):
        super().__init__("irreducible", message, result)


@dataclass(frozen=True)
class AugmentedState:
    s: State
    m: str
    v: tuple[int, ...]  # register contents, in the sketch's register order
    module: str | None = None


@dataclass
class EngineResult:
    plan: list[GroundAction] = field(default_factory=list)
    trace: list[dict] = field(default_factory=list)
    episodes: list[dict] = field(default_factory=list)
    expanded: int = 0
    generated: int = 0
    visited: list[AugmentedState] = field(default_factory=list)
    state: State | None = None

    def trace_lines(self) -> str:
        return "".join(json.dumps(e) + "\n" for e in self.trace)


class LoadChooser:
    """Resolves the nondeterministic pick of a load effect.

    Deterministic mode takes the least object (objects are indexed in sorted
    name order); seeded mode picks uniformly with its own RNG.
    """

    def __init__(self, seed: int | None = None):
        self.seed = seed
        self.rng = random.Random(seed) if seed is not None else None

    def __call__(self, mask: int) -> int:
        if not mask:
            raise EngineFailure("empty-load", "load from an empty concept")
        if self.rng is None:
            return (mask & -mask).bit_length() - 1
        options = [i for i in range(mask.bit_length()) if mask >> i & 1]
        return self.rng.choice(options)


def choose_load(ev: Evaluator, c: Node, s: State, v=None, env=None, chooser: LoadChooser | None = None) -> int:
    """Object index picked by a load from concept ``c``."""
    if c.kind != CONCEPT:
        raise TypeError("load source must be a concept")
    return (chooser or LoadChooser())(ev.raw(c, s, v, env))


def _first_applicable(sk: Sketch, rules: Iterable[Rule], ev, s, v, env) -> Rule | None:
    for r in rules:
        if satisfies(sk, r.cond, ev, s, v, env):
            return r
    return None


def _vtuple(sk: Sketch, v: dict) -> tuple[int, ...]:
    return tuple(v[r] for r in sk.registers)


def _reduction_guard(sk: Sketch, gp: GroundProblem) -> int:
    return len(sk.memory) * max(1, len(gp.objects)) ** len(sk.registers)


def _step_internal(sk, r: Rule, ev, s, v, env, chooser, gp, trace, module=None):
    """Apply internal rule ``r``: returns the new register valuation."""
    ev_dict = {"ev": "rule", "id": r.id, "kind": r.kind, "from": r.m, "to": r.m2}
    if module is not None:
        ev_dict["module"] = module
    if r.kind == "load":
        obj = chooser(ev.raw(sk.node(r.load.concept), s, v, env))
        v = dict(v)
        v[r.load.reg] = obj
        ev_dict["reg"] = r.load.reg
        ev_dict["obj"] = gp.objects[obj]
    trace.append(ev_dict)
    return v


def reduce(
    gp: GroundProblem,
    sk: Sketch,
    ev: Evaluator,
    aug: AugmentedState,
    chooser: LoadChooser | None = None,
    trace: list | None = None,
    env=None,
) -> AugmentedState:
    """Fire internal rules (first applicable, declaration order) until external memory."""
    chooser = chooser or LoadChooser()
    trace = trace if trace is not None else []
    s, m = aug.s, aug.m
    v = dict(zip(sk.registers, aug.v))
    guard = _reduction_guard(sk, gp)
    steps = 0
    while sk.is_internal(m):
        r = _first_applicable(sk, sk.rules_at(m), ev, s, v, env)
        if r is None:
            raise Irreducible(f"no internal rule applies at {m}")
        steps += 1
        if steps > guard:
            raise EngineFailure("cycle-guard", f"reduction exceeded {guard} steps")
        v = _step_internal(sk, r, ev, s, v, env, chooser, gp, trace)
        m = r.m2
    return AugmentedState(s, m, _vtuple(sk, v), aug.module)


def _episode(gp, sk, rules, ev, s, v, env, k_max, result: EngineResult, module=None):
    test = SubgoalTest(gp, sk, rules, ev, s, v, env)
    stats = SearchStats()
    res = iw(gp, s, test, k_max, test_start=False, stats=stats)
    result.expanded += stats.expanded
    result.generated += stats.generated
    if res is None:
        return None
    tag = res.tag
    rule_id = GOAL if tag == GOAL else tag.id
    log.debug("iw k=%d expanded=%d plan_len=%d rule=%s", res.k, res.expanded, len(res.plan), rule_id)
    event = {"ev": "iw", "k": res.k, "len": len(res.plan), "rule": rule_id,
             "expanded": res.expanded, "plan": [str(a) for a in res.plan]}
    if module is not None:
        event["module"] = module
    result.trace.append(event)
    result.episodes.append(event)
    result.plan.extend(res.plan)
    return res


def siw_r(gp: GroundProblem, sk: Sketch, k_max: int = DEFAULT_KMAX, ev: Evaluator | None = None,
          max_episodes: int = 100_000) -> EngineResult:
    """Serialized IW over a plain sketch: subgoals are ``s' ≺_R s`` or problem goals."""
    if sk.registers or sk.internal:
        raise ValueError("siw_r needs a plain sketch (no registers, no internal memory)")
    ev = ev or Evaluator(gp)
    result = EngineResult()
    s = gp.init
    result.visited.append(AugmentedState(s, sk.initial, ()))
    seen = {s}
    while not gp.is_goal(s):
        if len(result.episodes) >= max_episodes:
            raise EngineFailure("step-limit", f"more than {max_episodes} episodes", result)
        res = _episode(gp, sk, sk.rules, ev, s, {}, {}, k_max, result)
        if res is None:
            result.state = s
            raise EngineFailure("iw-exhausted", "no goal or subgoal state reachable within k_max", result)
        s = res.state
        result.visited.append(AugmentedState(s, sk.initial, ()))
        if s in seen:
            result.state = s
            raise EngineFailure("cycle", "a state was reached twice; the sketch loops on this instance", result)
        seen.add(s)
    result.state = s
    return result


def siw_star_r(
    gp: GroundProblem,
    sk: Sketch,
    k_max: int = DEFAULT_KMAX,
    chooser: LoadChooser | None = None,
    ev: Evaluator | None = None,
    max_episodes: int = 100_000,
) -> EngineResult:
    """SIW_R with memory states, registers and internal (load/jump) rules."""
    ev = ev or Evaluator(gp)
    chooser = chooser or LoadChooser()
    result = EngineResult()
    s, m = gp.init, sk.initial
    v = {r: 0 for r in sk.registers}
    guard = _reduction_guard(sk, gp)
    internal_steps = 0
    result.visited.append(AugmentedState(s, m, _vtuple(sk, v)))
    seen: set[AugmentedState] = set()
    while not gp.is_goal(s):
        if sk.is_internal(m):
            r = _first_applicable(sk, sk.rules_at(m), ev, s, v, {})
            if r is None:
                result.state = s
                raise Irreducible(f"no internal rule applies at {m}", result)
            internal_steps += 1
            if internal_steps > guard:
                raise EngineFailure("cycle-guard", f"reduction exceeded {guard} steps", result)
            try:
                v = _step_internal(sk, r, ev, s, v, {}, chooser, gp, result.trace)
            except EngineFailure as e:
                e.result = result
                raise
            m = r.m2
        else:
            internal_steps = 0
            here = AugmentedState(s, m, _vtuple(sk, v))
            if here in seen:
                result.state = s
                raise EngineFailure("cycle", f"augmented state repeated at memory {m}", result)
            seen.add(here)
            if len(result.episodes) >= max_episodes:
                raise EngineFailure("step-limit", f"more than {max_episodes} episodes", result)
            res = _episode(gp, sk, sk.rules_at(m), ev, s, v, {}, k_max, result)
            if res is None:
                result.state = s
                raise EngineFailure("iw-exhausted", f"no goal or subgoal state reachable from memory {m}", result)
            s = res.state
            if res.tag != GOAL:
                m = res.tag.m2
        result.visited.append(AugmentedState(s, m, _vtuple(sk, v)))
    result.state = s
    return result


# --------------------------------------------------------------------------
# modules


@dataclass
class Frame:
    module: int
    v: dict
    m: str  # memory to resume at in the caller
    env: dict


def _freeze(env: dict) -> tuple:
    return tuple(sorted(env.items()))


def _frame_key(mods: ModuleSet, f: Frame) -> tuple:
    return (f.module, f.m, _vtuple(mods.modules[f.module], f.v), _freeze(f.env))


def execute_do(
    gp: GroundProblem, sk: Sketch, rule: Rule, ev: Evaluator, s: State, v=None, env=None,
    denotations: Sequence[int] | None = None,
) -> tuple[GroundAction, State]:
    """Apply the first applicable grounding of ``rule.target`` whose i-th object is in arg i."""
    if denotations is None:
        denotations = [ev.raw(sk.node(a), s, v, env) for a in rule.call_args]
    idx = gp.object_index
    for a in gp.actions_of(rule.target):
        if len(a.args) != len(denotations):
            continue
        if all(d >> idx[o] & 1 for o, d in zip(a.args, denotations)) and applicable(s, a):
            return a, (s & ~a.delete) | a.add
    raise EngineFailure("no-applicable-action", f"{rule.id}: no applicable grounding of '{rule.target}'")


def siw_m(
    gp: GroundProblem,
    mods: ModuleSet,
    k_max: int = DEFAULT_KMAX,
    chooser: LoadChooser | None = None,
    ev: Evaluator | None = None,
    max_steps: int = 1_000_000,
) -> EngineResult:
    """Execute a module collection with a call stack.

    At internal memory the first applicable internal rule fires. At external
    memory the first applicable call or do rule fires; otherwise an IW episode
    runs if some value rule's condition holds. A module with no applicable rule
    returns to its caller; with an empty stack that is a stall.
    """
    ev = ev or Evaluator(gp)
    chooser = chooser or LoadChooser()
    result = EngineResult()
    stack: list[Frame] = []
    cur = 0
    mod = mods.modules[0]
    env: dict = {}
    v = {r: 0 for r in mod.registers}
    s, m = gp.init, mod.initial
    internal_steps = 0
    steps = 0

    def mark():
        result.visited.append(AugmentedState(s, m, _vtuple(mod, v), mod.name))

    def fail(kind, msg):
        result.state = s
        return EngineFailure(kind, msg, result)

    seen: set = set()
    mark()
    while not gp.is_goal(s):
        steps += 1
        if steps > max_steps:
            raise fail("step-limit", f"more than {max_steps} steps")
        rules = mod.rules_at(m)
        if mod.is_internal(m):
            r = _first_applicable(mod, rules, ev, s, v, env)
            if r is not None:
                internal_steps += 1
                if internal_steps > _reduction_guard(mod, gp):
                    raise fail("cycle-guard", f"{mod.name}: reduction exceeded its step bound")
                try:
                    v = _step_internal(mod, r, ev, s, v, env, chooser, gp, result.trace, mod.name)
                except EngineFailure as e:
                    raise fail(e.kind, e.message) from None
                m = r.m2
                mark()
                continue
        else:
            internal_steps = 0
            key = (s, cur, m, _vtuple(mod, v), _freeze(env), tuple(_frame_key(mods, f) for f in stack))
            if key in seen:
                raise fail("cycle", f"{mod.name}: execution state repeated at {m}")
            seen.add(key)
            r = _first_applicable(mod, (x for x in rules if x.kind in ("call", "do")), ev, s, v, env)
            if r is not None and r.kind == "call":
                callee_idx = mods.index(r.target)
                callee = mods.modules[callee_idx]
                bound = {p: ev.raw(mod.node(a), s, v, env) for a, (p, _) in zip(r.call_args, callee.args)}
                stack.append(Frame(cur, v, r.m2, env))
                result.trace.append({"ev": "call", "module": callee.name, "from": mod.name, "rule": r.id,
                                     "depth": len(stack)})
                cur, mod, env = callee_idx, callee, bound
                v = {reg: 0 for reg in mod.registers}
                m = mod.initial
                mark()
                continue
            if r is not None:
                try:
                    a, s = execute_do(gp, mod, r, ev, s, v, env)
                except EngineFailure as e:
                    raise fail(e.kind, e.message) from None
                result.plan.append(a)
                result.trace.append({"ev": "do", "action": str(a), "module": mod.name, "rule": r.id})
                m = r.m2
                mark()
                continue
            if _first_applicable(mod, (x for x in rules if x.kind == "value"), ev, s, v, env) is not None:
                res = _episode(gp, mod, rules, ev, s, v, env, k_max, result, mod.name)
                if res is None:
                    raise fail("iw-exhausted", f"{mod.name}: no goal or subgoal state reachable from {m}")
                s = res.state
                if res.tag != GOAL:
                    m = res.tag.m2
                mark()
                continue
        # no rule applies: return to the caller
        if not stack:
            raise fail("stalled", f"{mod.name}: no rule applies at {m} and the stack is empty")
        frame = stack.pop()
        result.trace.append({"ev": "return", "module": mod.name, "to": mods.modules[frame.module].name})
        cur, mod, v, m, env = frame.module, mods.modules[frame.module], frame.v, frame.m, frame.env
        internal_steps = 0
        mark()
    # unwind so every call has a matching return
    while stack:
        frame = stack.pop()
        result.trace.append({"ev": "return", "module": mod.name, "to": mods.modules[frame.module].name})
        mod = mods.modules[frame.module]
    result.state = s
    return result


# --------------------------------------------------------------------------
# induced subproblems


class BoundExceeded(Exception):
    pass


@dataclass(frozen=True)
class Subproblem:
    s: State
    m: str
    v: tuple[int, ...]


def reductions(gp, sk: Sketch, ev, s: State, m: str, v: tuple[int, ...]) -> set[tuple[str, tuple[int, ...]]]:
    """All external (m', v') reachable from (s, m, v) by internal steps.

    Every applicable internal rule and every load choice is followed. A branch
    that gets stuck at internal memory makes the sketch irreducible.
    """
    if not sk.is_internal(m):
        return {(m, v)}
    out = set()
    seen = {(m, v)}
    todo = [(m, v)]
    while todo:
        m1, v1 = todo.pop()
        vd = dict(zip(sk.registers, v1))
        fired = False
        for r in sk.rules_at(m1):
            if not satisfies(sk, r.cond, ev, s, vd):
                continue
            fired = True
            if r.kind == "load":
                mask = ev.raw(sk.node(r.load.concept), s, vd)
                choices = [i for i in range(mask.bit_length()) if mask >> i & 1]
                if not choices:
                    raise Irreducible(f"{r.id}: load from an empty concept")
                nexts = []
                for o in choices:
                    vd2 = dict(vd)
                    vd2[r.load.reg] = o
                    nexts.append((r.m2, _vtuple(sk, vd2)))
            else:
                nexts = [(r.m2, v1)]
            for nxt in nexts:
                if nxt in seen:
                    continue
                seen.add(nxt)
                if sk.is_internal(nxt[0]):
                    todo.append(nxt)
                else:
                    out.add(nxt)
        if not fired:
            raise Irreducible(f"no internal rule applies at {m1}")
    return out


def _subgoal_states(gp, sk, ev, sub: Subproblem, closest: bool, limit: int):
    """Pairs (s', rule) with s' ≺_{r/v} s, reachable from s, excluding s itself."""
    vd = dict(zip(sk.registers, sub.v))
    rules = [r for r in sk.rules_at(sub.m) if r.kind == "value" and satisfies(sk, r.cond, ev, sub.s, vd)]
    tests = [(r, SubgoalTest(gp, sk, [r], ev, sub.s, vd)) for r in rules]
    found = []
    depth = {sub.s: 0}
    queue = deque([sub.s])
    best = math.inf
    while queue:
        s = queue.popleft()
        if depth[s] >= best:
            break
        for _, s2 in gp.successors(s):
            if s2 in depth:
                continue
            depth[s2] = depth[s] + 1
            if len(depth) > limit:
                raise BoundExceeded(f"more than {limit} states explored from one subproblem")
            if gp.is_goal(s2):
                if closest:
                    best = min(best, depth[s2])
                continue  # the run ends at problem goals
            hits = [r for r, test in tests if test(s2) is r]
            if hits:
                found.extend((s2, r) for r in hits)
                if closest:
                    best = min(best, depth[s2])
            queue.append(s2)
    if closest:
        found = [(s2, r) for s2, r in found if depth[s2] == best]
    return found


def enumerate_subproblems(
    gp: GroundProblem, sk: Sketch, bound: int = 20_000, closest: bool = True, search_limit: int = 200_000,
    ev: Evaluator | None = None,
) -> set[Subproblem]:
    """Closure of the subproblems induced by ``sk`` on ``gp``.

    Initial register values range over every object tuple. With ``closest``
    (the default) only subgoal states at minimum distance from the subproblem
    root induce new subproblems; otherwise every reachable subgoal state does.
    """
    ev = ev or Evaluator(gp)
    n = len(gp.objects)
    inits: set[Subproblem] = set()
    for v0 in itertools.product(range(n), repeat=len(sk.registers)):
        for m, v in reductions(gp, sk, ev, gp.init, sk.initial, tuple(v0)):
            inits.add(Subproblem(gp.init, m, v))
    closure = set(inits)
    todo = deque(sorted(inits, key=lambda p: (p.m, p.v)))
    while todo:
        sub = todo.popleft()
        if gp.is_goal(sub.s):
            continue
        for s2, r in _subgoal_states(gp, sk, ev, sub, closest, search_limit):
            for m2, v2 in reductions(gp, sk, ev, s2, r.m2, sub.v):
                nxt = Subproblem(s2, m2, v2)
                if nxt not in closure:
                    closure.add(nxt)
                    if len(closure) > bound:
                        raise BoundExceeded(f"closure larger than {bound}")
                    todo.append(nxt)
    return closure


@dataclass
class WidthReport:
    width: float
    table: list[tuple[Subproblem, float]]
    k_max: int

    @property
    def exceeds(self) -> bool:
        return self.width > self.k_max


def subproblem_width(gp, sk: Sketch, ev, sub: Subproblem, k_max: int | None = None) -> float:
    vd = dict(zip(sk.registers, sub.v))
    test = SubgoalTest(gp, sk, sk.rules_at(sub.m), ev, sub.s, vd)
    if gp.is_goal(sub.s):
        return 0
    return measure_width(gp, test, sub.s, k_max=k_max, test_start=False)


def sketch_width(gp: GroundProblem, sk: Sketch, k_max: int = DEFAULT_KMAX, bound: int = 20_000,
                 closest: bool = True) -> WidthReport:
    """Maximum width over the induced closure; widths above ``k_max`` show as inf."""
    ev = Evaluator(gp)
    closure = enumerate_subproblems(gp, sk, bound, closest, ev=ev)
    table = []
    for sub in sorted(closure, key=lambda p: (p.m, p.v, p.s)):
        table.append((sub, subproblem_width(gp, sk, ev, sub, k_max)))
    width = max((w for _, w in table), default=0)
    return WidthReport(width, table, k_max)
