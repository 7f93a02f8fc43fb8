"""Grounded STRIPS model: dense atom table, bitset states, successor generation.

A state is a plain ``int`` whose bit ``i`` is set iff atom ``i`` holds. Ground
actions keep their precondition and effects as bit masks, so applicability is
two ANDs and application is one AND-NOT plus one OR.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

from .pddl import Atom, Problem
from .sexpr import ParseError, SList, parse_all

State = int

GOAL_SUFFIX = "_G"


class InapplicableAction(Exception):
    pass


@dataclass(frozen=True)
class GroundAction:
    index: int
    name: str
    args: tuple[str, ...]
    pre_pos: int
    pre_neg: int
    add: int
    delete: int

    def __str__(self) -> str:
        return "(" + " ".join((self.name,) + self.args) + ")"


Plan = list  # list[GroundAction]


def goal_predicate(name: str) -> str:
    """Name of the static goal copy of predicate ``name``."""
    return name + GOAL_SUFFIX


def iter_bits(x: int):
    while x:
        low = x & -x
        yield low.bit_length() - 1
        x ^= low


def applicable(s: State, a: GroundAction) -> bool:
    return (s & a.pre_pos) == a.pre_pos and not (s & a.pre_neg)


def apply(s: State, a: GroundAction) -> State:
    if not applicable(s, a):
        raise InapplicableAction(f"{a} is not applicable")
    return (s & ~a.delete) | a.add


class PlanCheck(NamedTuple):
    valid: bool
    failure_index: int | None
    reason: str = ""


@dataclass
class GroundProblem:
    problem: Problem
    objects: tuple[str, ...]
    atoms: list[Atom]
    actions: list[GroundAction]
    init: State
    goal_pos: int
    goal_neg: int
    static_mask: int
    atom_index: dict[Atom, int] = field(repr=False)
    object_index: dict[str, int] = field(repr=False)
    # predicate -> [(atom index, argument object indices)]
    atoms_by_predicate: dict[str, list[tuple[int, tuple[int, ...]]]] = field(repr=False)
    _by_signature: dict[tuple[str, tuple[str, ...]], GroundAction] = field(repr=False)
    _by_schema: dict[str, list[GroundAction]] = field(repr=False)

    @property
    def num_atoms(self) -> int:
        return len(self.atoms)

    @property
    def dynamic_mask(self) -> int:
        return ((1 << len(self.atoms)) - 1) & ~self.static_mask

    def is_goal(self, s: State) -> bool:
        return (s & self.goal_pos) == self.goal_pos and not (s & self.goal_neg)

    def successors(self, s: State) -> list[tuple[GroundAction, State]]:
        out = []
        for a in self.actions:
            if (s & a.pre_pos) == a.pre_pos and not (s & a.pre_neg):
                out.append((a, (s & ~a.delete) | a.add))
        return out

    def actions_of(self, schema: str) -> list[GroundAction]:
        return self._by_schema.get(schema, [])

    def state_atoms(self, s: State) -> list[Atom]:
        return [self.atoms[i] for i in iter_bits(s)]

    def holds(self, s: State, atom: Atom) -> bool:
        i = self.atom_index.get(atom)
        return i is not None and bool(s >> i & 1)

    def state_from_atoms(self, atoms: Iterable[Atom]) -> State:
        """Build a state from dynamic atoms; static atoms are always added."""
        s = self.init & self.static_mask
        for a in atoms:
            s |= 1 << self.atom_index[a]
        return s

    def ground_action(self, name: str, args: Sequence[str]) -> GroundAction:
        """Look up a ground action by signature.

        Groundings removed at grounding time because a static precondition is
        false come back with an unsatisfiable precondition and index -1.
        """
        key = (name, tuple(args))
        if key in self._by_signature:
            return self._by_signature[key]
        domain = self.problem.domain
        try:
            schema = domain.schema(name)
        except KeyError:
            raise KeyError(f"unknown action schema '{name}'") from None
        if len(args) != schema.arity:
            raise KeyError(f"action '{name}' expects {schema.arity} arguments")
        for o in args:
            if o not in self.object_index:
                raise KeyError(f"unknown object '{o}'")
        never = 1 << len(self.atoms)
        return GroundAction(-1, name, tuple(args), never, 0, 0, 0)

    def validate_plan(self, plan: Sequence[GroundAction]) -> PlanCheck:
        s = self.init
        for i, a in enumerate(plan):
            if not applicable(s, a):
                return PlanCheck(False, i, f"{a} is not applicable")
            s = (s & ~a.delete) | a.add
        if not self.is_goal(s):
            return PlanCheck(False, len(plan), "goal not satisfied")
        return PlanCheck(True, None)

    def run_plan(self, plan: Sequence[GroundAction], s: State | None = None) -> State:
        s = self.init if s is None else s
        for a in plan:
            s = apply(s, a)
        return s


def ground(problem: Problem, distinct_arguments: bool = True) -> GroundProblem:
    """Enumerate all type-consistent ground actions of ``problem``.

    With ``distinct_arguments`` (the default) a grounding never binds two
    parameters to the same object. Groundings whose static preconditions fail
    in the initial state are dropped. For every positive goal atom ``p(c)`` a
    static atom ``p_G(c)`` is added and made true in the initial state.
    """
    domain = problem.domain
    objects = tuple(sorted(problem.objects))
    object_index = {o: i for i, o in enumerate(objects)}
    by_type: dict[str, list[str]] = {}
    for t in domain.types:
        by_type[t] = [o for o in objects if domain.is_subtype(problem.objects[o], t)]

    static_preds = domain.static_predicates()
    init_atoms = set(problem.init)

    atoms: list[Atom] = []
    atom_index: dict[Atom, int] = {}

    def index(atom: Atom) -> int:
        i = atom_index.get(atom)
        if i is None:
            i = atom_index[atom] = len(atoms)
            atoms.append(atom)
        return i

    for a in sorted(init_atoms, key=str):
        index(a)
    for lit in problem.goal:
        index(lit.atom)
    goal_copies = sorted({Atom(goal_predicate(l.atom.predicate), l.atom.args) for l in problem.goal if l.positive}, key=str)
    for a in goal_copies:
        index(a)

    actions: list[GroundAction] = []
    for schema in domain.actions:
        variables = [v for v, _ in schema.parameters]
        domains = [by_type.get(t, []) for _, t in schema.parameters]
        for combo in itertools.product(*domains):
            if distinct_arguments and len(set(combo)) != len(combo):
                continue
            binding = dict(zip(variables, combo))

            def sub(atom: Atom) -> Atom:
                return Atom(atom.predicate, tuple(binding.get(x, x) for x in atom.args))

            ok = True
            pre_pos = pre_neg = 0
            for lit in schema.precondition:
                g = sub(lit.atom)
                if g.predicate in static_preds:
                    if (g in init_atoms) != lit.positive:
                        ok = False
                        break
                    if not lit.positive:
                        continue
                if lit.positive:
                    pre_pos |= 1 << index(g)
                else:
                    pre_neg |= 1 << index(g)
            if not ok:
                continue
            add = delete = 0
            for atom in schema.add:
                add |= 1 << index(sub(atom))
            for atom in schema.delete:
                delete |= 1 << index(sub(atom))
            delete &= ~add  # add-after-delete semantics
            actions.append(GroundAction(len(actions), schema.name, tuple(combo), pre_pos, pre_neg, add, delete))

    init = 0
    for a in init_atoms:
        init |= 1 << atom_index[a]
    for a in goal_copies:
        init |= 1 << atom_index[a]
    goal_pos = goal_neg = 0
    for lit in problem.goal:
        if lit.positive:
            goal_pos |= 1 << atom_index[lit.atom]
        else:
            goal_neg |= 1 << atom_index[lit.atom]

    static_mask = 0
    for i, a in enumerate(atoms):
        if a.predicate in static_preds or a.predicate.endswith(GOAL_SUFFIX):
            static_mask |= 1 << i

    by_pred: dict[str, list[tuple[int, tuple[int, ...]]]] = {}
    for i, a in enumerate(atoms):
        by_pred.setdefault(a.predicate, []).append((i, tuple(object_index[o] for o in a.args)))

    by_sig = {(a.name, a.args): a for a in actions}
    by_schema: dict[str, list[GroundAction]] = {}
    for a in actions:
        by_schema.setdefault(a.name, []).append(a)
    return GroundProblem(
        problem, objects, atoms, actions, init, goal_pos, goal_neg, static_mask,
        atom_index, object_index, by_pred, by_sig, by_schema,
    )


def parse_plan(text: str, gp: GroundProblem) -> list[GroundAction]:
    """Read a plan with one ``(name arg ...)`` per line."""
    plan = []
    for expr in parse_all(text):
        if not isinstance(expr, SList) or not expr or any(isinstance(x, SList) for x in expr):
            raise ParseError("expected (action arg ...)", getattr(expr, "line", None), getattr(expr, "col", None))
        try:
            plan.append(gp.ground_action(str(expr[0]), [str(x) for x in expr[1:]]))
        except KeyError as e:
            raise ParseError(str(e.args[0]), expr.line, expr.col) from None
    return plan


def format_plan(plan: Sequence[GroundAction]) -> str:
    return "".join(f"{a}\n" for a in plan)
