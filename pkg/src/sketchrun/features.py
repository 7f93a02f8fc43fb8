"""Description-logic features over grounded states.

Denotations are bitmasks over the problem's objects (indexed in sorted name
order). A concept is one ``int``; a role is a tuple of row masks where bit ``y``
of ``rows[x]`` is set iff ``(x, y)`` is in the role.

Expressions may depend on registers (indexical features) and on module
arguments, which are supplied as already-evaluated denotations.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

from .sexpr import ParseError, SList, Symbol, fail, parse_one
from .strips import GOAL_SUFFIX, GroundProblem, State

CONCEPT, ROLE, BOOL, NUM = "concept", "role", "bool", "num"
KINDS = (BOOL, NUM, CONCEPT, ROLE)


class FeatureTypeError(ParseError):
    pass


class UnknownName(ParseError):
    pass


# --------------------------------------------------------------------------
# AST
#
# Every node is a frozen dataclass; ``regs`` and ``args`` (the registers and
# module arguments reachable below the node) are filled in after init.


class Node:
    kind: str = ""
    regs: tuple[str, ...]
    args: tuple[str, ...]

    def children(self) -> tuple["Node", ...]:
        return ()

    def __post_init__(self):
        regs, args = set(), set()
        for c in self.children():
            regs.update(c.regs)
            args.update(c.args)
        self._own(regs, args)
        object.__setattr__(self, "regs", tuple(sorted(regs)))
        object.__setattr__(self, "args", tuple(sorted(args)))

    def _own(self, regs: set, args: set) -> None:
        pass

    def ev(self, E: "Evaluator", s: State, v: Mapping[str, int], env: Mapping):
        raise NotImplementedError

    def sexpr(self) -> str:
        raise NotImplementedError

    def __str__(self) -> str:
        return self.sexpr()


# concepts

@dataclass(frozen=True)
class CPrim(Node):
    pred: str
    pos: int
    kind = CONCEPT

    def ev(self, E, s, v, env):
        m = 0
        for args in E.true_args(s, self.pred):
            m |= 1 << args[self.pos]
        return m

    def sexpr(self):
        if self.pred.endswith(GOAL_SUFFIX):
            return f"(goal {self.pred[:-len(GOAL_SUFFIX)]} {self.pos})"
        return f"(primitive {self.pred} {self.pos})"


@dataclass(frozen=True)
class CTop(Node):
    kind = CONCEPT

    def ev(self, E, s, v, env):
        return E.universe

    def sexpr(self):
        return "top"


@dataclass(frozen=True)
class CBot(Node):
    kind = CONCEPT

    def ev(self, E, s, v, env):
        return 0

    def sexpr(self):
        return "bot"


@dataclass(frozen=True)
class CNominal(Node):
    obj: str
    kind = CONCEPT

    def ev(self, E, s, v, env):
        i = E.gp.object_index.get(self.obj)
        return 0 if i is None else 1 << i

    def sexpr(self):
        return f"(nominal {self.obj})"


@dataclass(frozen=True)
class CRegister(Node):
    reg: str
    kind = CONCEPT

    def _own(self, regs, args):
        regs.add(self.reg)

    def ev(self, E, s, v, env):
        return 1 << v[self.reg]

    def sexpr(self):
        return f"(register {self.reg})"


@dataclass(frozen=True)
class CNot(Node):
    c: Node
    kind = CONCEPT

    def children(self):
        return (self.c,)

    def ev(self, E, s, v, env):
        return E.universe & ~self.c.ev(E, s, v, env)

    def sexpr(self):
        return f"(not {self.c.sexpr()})"


@dataclass(frozen=True)
class CAnd(Node):
    a: Node
    b: Node
    kind = CONCEPT

    def children(self):
        return (self.a, self.b)

    def ev(self, E, s, v, env):
        return self.a.ev(E, s, v, env) & self.b.ev(E, s, v, env)

    def sexpr(self):
        return f"(and {self.a.sexpr()} {self.b.sexpr()})"


@dataclass(frozen=True)
class COr(Node):
    a: Node
    b: Node
    kind = CONCEPT

    def children(self):
        return (self.a, self.b)

    def ev(self, E, s, v, env):
        return self.a.ev(E, s, v, env) | self.b.ev(E, s, v, env)

    def sexpr(self):
        return f"(or {self.a.sexpr()} {self.b.sexpr()})"


@dataclass(frozen=True)
class CSome(Node):
    r: Node
    c: Node
    kind = CONCEPT

    def children(self):
        return (self.r, self.c)

    def ev(self, E, s, v, env):
        c = self.c.ev(E, s, v, env)
        if not c:
            return 0
        m = 0
        for x, row in enumerate(self.r.ev(E, s, v, env)):
            if row & c:
                m |= 1 << x
        return m

    def sexpr(self):
        return f"(some {self.r.sexpr()} {self.c.sexpr()})"


@dataclass(frozen=True)
class CAll(Node):
    r: Node
    c: Node
    kind = CONCEPT

    def children(self):
        return (self.r, self.c)

    def ev(self, E, s, v, env):
        outside = E.universe & ~self.c.ev(E, s, v, env)
        m = 0
        for x, row in enumerate(self.r.ev(E, s, v, env)):
            if not row & outside:
                m |= 1 << x
        return m

    def sexpr(self):
        return f"(all {self.r.sexpr()} {self.c.sexpr()})"


@dataclass(frozen=True)
class Arg(Node):
    """Reference to a module argument; its denotation comes from ``env``."""
    name: str
    arg_kind: str

    def __post_init__(self):
        object.__setattr__(self, "kind", self.arg_kind)
        super().__post_init__()

    def _own(self, regs, args):
        args.add(self.name)

    def ev(self, E, s, v, env):
        return env[self.name]

    def sexpr(self):
        return self.name


# roles

@dataclass(frozen=True)
class RPrim(Node):
    pred: str
    i: int
    j: int
    kind = ROLE

    def ev(self, E, s, v, env):
        rows = [0] * E.n
        for args in E.true_args(s, self.pred):
            rows[args[self.i]] |= 1 << args[self.j]
        return tuple(rows)

    def sexpr(self):
        if self.pred.endswith(GOAL_SUFFIX):
            return f"(goal {self.pred[:-len(GOAL_SUFFIX)]} {self.i} {self.j})"
        return f"(primitive {self.pred} {self.i} {self.j})"


@dataclass(frozen=True)
class RInverse(Node):
    r: Node
    kind = ROLE

    def children(self):
        return (self.r,)

    def ev(self, E, s, v, env):
        return transpose(self.r.ev(E, s, v, env), E.n)

    def sexpr(self):
        return f"(inverse {self.r.sexpr()})"


@dataclass(frozen=True)
class RAnd(Node):
    a: Node
    b: Node
    kind = ROLE

    def children(self):
        return (self.a, self.b)

    def ev(self, E, s, v, env):
        return tuple(x & y for x, y in zip(self.a.ev(E, s, v, env), self.b.ev(E, s, v, env)))

    def sexpr(self):
        return f"(and {self.a.sexpr()} {self.b.sexpr()})"


@dataclass(frozen=True)
class RCompose(Node):
    a: Node
    b: Node
    kind = ROLE

    def children(self):
        return (self.a, self.b)

    def ev(self, E, s, v, env):
        a = self.a.ev(E, s, v, env)
        b = self.b.ev(E, s, v, env)
        out = []
        for row in a:
            acc = 0
            while row:
                low = row & -row
                acc |= b[low.bit_length() - 1]
                row ^= low
            out.append(acc)
        return tuple(out)

    def sexpr(self):
        return f"(compose {self.a.sexpr()} {self.b.sexpr()})"


@dataclass(frozen=True)
class RTransitive(Node):
    r: Node
    reflexive: bool = False
    kind = ROLE

    def children(self):
        return (self.r,)

    def ev(self, E, s, v, env):
        rows = closure(self.r.ev(E, s, v, env))
        if self.reflexive:
            rows = tuple(row | (1 << x) for x, row in enumerate(rows))
        return rows

    def sexpr(self):
        return f"({'rtc' if self.reflexive else 'tc'} {self.r.sexpr()})"


# booleans and numbers

@dataclass(frozen=True)
class BNonempty(Node):
    x: Node
    kind = BOOL

    def children(self):
        return (self.x,)

    def ev(self, E, s, v, env):
        val = self.x.ev(E, s, v, env)
        return any(val) if self.x.kind == ROLE else val != 0

    def sexpr(self):
        return f"(nonempty {self.x.sexpr()})"


@dataclass(frozen=True)
class BNot(Node):
    b: Node
    kind = BOOL

    def children(self):
        return (self.b,)

    def ev(self, E, s, v, env):
        return not self.b.ev(E, s, v, env)

    def sexpr(self):
        return f"(bnot {self.b.sexpr()})"


@dataclass(frozen=True)
class BAnd(Node):
    a: Node
    b: Node
    kind = BOOL

    def children(self):
        return (self.a, self.b)

    def ev(self, E, s, v, env):
        return self.a.ev(E, s, v, env) and self.b.ev(E, s, v, env)

    def sexpr(self):
        return f"(band {self.a.sexpr()} {self.b.sexpr()})"


@dataclass(frozen=True)
class BOr(Node):
    a: Node
    b: Node
    kind = BOOL

    def children(self):
        return (self.a, self.b)

    def ev(self, E, s, v, env):
        return self.a.ev(E, s, v, env) or self.b.ev(E, s, v, env)

    def sexpr(self):
        return f"(bor {self.a.sexpr()} {self.b.sexpr()})"


@dataclass(frozen=True)
class NCount(Node):
    x: Node
    kind = NUM

    def children(self):
        return (self.x,)

    def ev(self, E, s, v, env):
        val = self.x.ev(E, s, v, env)
        if self.x.kind == ROLE:
            return sum(r.bit_count() for r in val)
        return val.bit_count()

    def sexpr(self):
        return f"(count {self.x.sexpr()})"


def transpose(rows: Sequence[int], n: int) -> tuple[int, ...]:
    out = [0] * n
    for x, row in enumerate(rows):
        while row:
            low = row & -row
            out[low.bit_length() - 1] |= 1 << x
            row ^= low
    return tuple(out)


def closure(rows: Sequence[int]) -> tuple[int, ...]:
    """Transitive closure of a role given as row masks (Warshall)."""
    rows = list(rows)
    for k in range(len(rows)):
        bit = 1 << k
        rk = rows[k]
        if not rk:
            continue
        for i in range(len(rows)):
            if rows[i] & bit:
                rows[i] |= rk
    return tuple(rows)


# --------------------------------------------------------------------------
# features


@dataclass(frozen=True)
class Feature:
    name: str
    kind: str
    body: Node

    @property
    def deps(self) -> frozenset[str]:
        return frozenset(self.body.regs)

    def sexpr(self) -> str:
        return f"({self.kind} {self.name} {self.body.sexpr()})"

    def __str__(self) -> str:
        return self.sexpr()


def dependencies(f: Feature | Node) -> frozenset[str]:
    """Registers the feature's value depends on."""
    node = f.body if isinstance(f, Feature) else f
    return frozenset(node.regs)


# --------------------------------------------------------------------------
# parsing


@dataclass
class Scope:
    """Names visible while parsing a feature body."""
    features: dict[str, Feature]
    registers: frozenset[str] = frozenset()
    args: Mapping[str, str] | None = None  # arg name -> concept|role
    domain: object | None = None  # pddl.Domain, used to check predicates

    def __init__(self, features=None, registers=(), args=None, domain=None):
        self.features = dict(features or {})
        self.registers = frozenset(registers)
        self.args = dict(args or {})
        self.domain = domain


def _int(tok) -> int:
    if isinstance(tok, SList) or not str(tok).isdigit():
        raise fail("expected a non-negative integer position", tok)
    return int(tok)


def _check_pred(scope: Scope, pred: str, positions: Sequence[int], expr) -> None:
    if scope.domain is None:
        return
    preds = scope.domain.predicates
    if pred not in preds:
        raise UnknownName(f"unknown predicate '{pred}'", expr.line, expr.col)
    arity = preds[pred].arity
    for p in positions:
        if p >= arity:
            raise FeatureTypeError(f"position {p} out of range for '{pred}'/{arity}", expr.line, expr.col)


def _expect(node: Node, kinds, expr) -> Node:
    if node.kind not in kinds:
        want = " or ".join(kinds)
        raise FeatureTypeError(f"expected {want}, got {node.kind}", getattr(expr, "line", None), getattr(expr, "col", None))
    return node


def parse_expr(expr, scope: Scope) -> Node:
    if not isinstance(expr, SList):
        name = str(expr)
        if name == "top":
            return CTop()
        if name == "bot":
            return CBot()
        if name in scope.features:
            return scope.features[name].body
        if scope.args and name in scope.args:
            return Arg(name, scope.args[name])
        if name in scope.registers:
            return CRegister(name)
        raise UnknownName(f"unknown name '{name}'", getattr(expr, "line", None), getattr(expr, "col", None))
    if not expr:
        raise fail("empty expression", expr)
    head = str(expr[0])
    rest = expr[1:]

    def sub(i, kinds):
        if i >= len(rest):
            raise fail(f"'{head}' is missing an operand", expr)
        return _expect(parse_expr(rest[i], scope), kinds, rest[i])

    def arity(n):
        if len(rest) != n:
            raise fail(f"'{head}' takes {n} operand(s), got {len(rest)}", expr)

    if head in ("primitive", "goal"):
        if len(rest) not in (2, 3):
            raise fail(f"'{head}' takes a predicate and 1 or 2 positions", expr)
        pred = str(rest[0])
        positions = [_int(t) for t in rest[1:]]
        _check_pred(scope, pred, positions, expr)
        if head == "goal":
            pred += GOAL_SUFFIX
        if len(positions) == 1:
            return CPrim(pred, positions[0])
        if positions[0] == positions[1]:
            raise FeatureTypeError("role positions must differ", expr.line, expr.col)
        return RPrim(pred, positions[0], positions[1])
    if head == "nominal":
        arity(1)
        return CNominal(str(rest[0]))
    if head == "register":
        arity(1)
        r = str(rest[0])
        if r not in scope.registers:
            raise UnknownName(f"undeclared register '{r}'", expr.line, expr.col)
        return CRegister(r)
    if head == "not":
        arity(1)
        return CNot(sub(0, (CONCEPT,)))
    if head in ("and", "or"):
        if len(rest) < 2:
            raise fail(f"'{head}' needs at least two operands", expr)
        first = parse_expr(rest[0], scope)
        kinds = (CONCEPT, ROLE) if head == "and" else (CONCEPT,)
        _expect(first, kinds, rest[0])
        node = first
        for e in rest[1:]:
            other = _expect(parse_expr(e, scope), (first.kind,), e)
            if first.kind == ROLE:
                node = RAnd(node, other)
            else:
                node = CAnd(node, other) if head == "and" else COr(node, other)
        return node
    if head in ("some", "all"):
        arity(2)
        r, c = sub(0, (ROLE,)), sub(1, (CONCEPT,))
        return CSome(r, c) if head == "some" else CAll(r, c)
    if head == "inverse":
        arity(1)
        return RInverse(sub(0, (ROLE,)))
    if head == "compose":
        arity(2)
        return RCompose(sub(0, (ROLE,)), sub(1, (ROLE,)))
    if head in ("tc", "rtc"):
        arity(1)
        return RTransitive(sub(0, (ROLE,)), head == "rtc")
    if head == "nonempty":
        arity(1)
        return BNonempty(sub(0, (CONCEPT, ROLE)))
    if head == "bnot":
        arity(1)
        return BNot(sub(0, (BOOL,)))
    if head in ("band", "bor"):
        if len(rest) < 2:
            raise fail(f"'{head}' needs at least two operands", expr)
        node = sub(0, (BOOL,))
        for i in range(1, len(rest)):
            node = (BAnd if head == "band" else BOr)(node, sub(i, (BOOL,)))
        return node
    if head == "count":
        arity(1)
        return NCount(sub(0, (CONCEPT, ROLE)))
    raise fail(f"unknown constructor '{head}'", expr)


def parse_feature(expr, scope: Scope | None = None) -> Feature:
    """Parse ``(bool|num|concept|role <name> <body>)`` from text or an s-expression."""
    if isinstance(expr, str) and not isinstance(expr, Symbol):
        expr = parse_one(expr)
    scope = scope or Scope()
    if not isinstance(expr, SList) or len(expr) != 3 or str(expr[0]) not in KINDS:
        raise fail("expected (bool|num|concept|role <name> <expr>)", expr)
    kind, name = str(expr[0]), str(expr[1])
    body = parse_expr(expr[2], scope)
    if body.kind != kind:
        raise FeatureTypeError(
            f"feature '{name}' declared {kind} but its body is {body.kind}", expr.line, expr.col
        )
    return Feature(name, kind, body)


def parse_features(exprs, scope: Scope) -> list[Feature]:
    """Parse a feature list; later definitions may refer to earlier ones."""
    out: list[Feature] = []
    for e in exprs:
        f = parse_feature(e, scope)
        if f.name in scope.features:
            raise fail(f"duplicate feature '{f.name}'", e)
        scope.features[f.name] = f
        out.append(f)
    return out


# --------------------------------------------------------------------------
# evaluation


class Evaluator:
    """Evaluates feature expressions over one grounded problem.

    Results of ``value`` are memoized per (node, state, relevant registers,
    relevant arguments). Caches are dropped wholesale once they grow past
    ``cache_limit`` entries.
    """

    def __init__(self, gp: GroundProblem, cache_limit: int = 400_000):
        self.gp = gp
        self.n = len(gp.objects)
        self.universe = (1 << self.n) - 1
        self.cache_limit = cache_limit
        self._true_args: dict = {}
        self._memo: dict = {}
        self.hits = 0
        self.misses = 0

    def true_args(self, s: State, pred: str) -> list[tuple[int, ...]]:
        key = (s, pred)
        got = self._true_args.get(key)
        if got is None:
            got = [args for i, args in self.gp.atoms_by_predicate.get(pred, ()) if s >> i & 1]
            if len(self._true_args) > self.cache_limit:
                self._true_args.clear()
            self._true_args[key] = got
        return got

    def raw(self, node: Node, s: State, v: Mapping[str, int] | None = None, env: Mapping | None = None):
        """Denotation of ``node``: mask, row tuple, bool or int by kind."""
        v = v or {}
        env = env or {}
        key = (id(node), s, tuple(v[r] for r in node.regs), tuple(env[a] for a in node.args))
        hit = self._memo.get(key)
        if hit is not None and hit[0] is node:
            self.hits += 1
            return hit[1]
        self.misses += 1
        val = node.ev(self, s, v, env)
        if len(self._memo) > self.cache_limit:
            self._memo.clear()
        self._memo[key] = (node, val)
        return val

    def measure(self, f: Feature | Node, s: State, v=None, env=None):
        """Value used by rule conditions and effects.

        Booleans give ``bool``; numerical features give their value; concepts
        and roles give the cardinality of their denotation.
        """
        node = f.body if isinstance(f, Feature) else f
        val = self.raw(node, s, v, env)
        if node.kind == CONCEPT:
            return val.bit_count()
        if node.kind == ROLE:
            return sum(r.bit_count() for r in val)
        return val

    # name-level helpers for callers outside the engines

    def objects_of(self, mask: int) -> frozenset[str]:
        objs = self.gp.objects
        out = []
        while mask:
            low = mask & -mask
            out.append(objs[low.bit_length() - 1])
            mask ^= low
        return frozenset(out)

    def pairs_of(self, rows: Sequence[int]) -> frozenset[tuple[str, str]]:
        objs = self.gp.objects
        return frozenset((objs[x], y) for x, row in enumerate(rows) for y in self.objects_of(row))

    def register_indices(self, v: Mapping[str, str] | None) -> dict[str, int]:
        return {r: self.gp.object_index[o] for r, o in (v or {}).items()}


def _node(x) -> Node:
    return x.body if isinstance(x, Feature) else x


def eval_concept(ev: Evaluator, c, s: State, v: Mapping[str, str] | None = None, env=None) -> frozenset[str]:
    c = _node(c)
    _expect(c, (CONCEPT,), None)
    return ev.objects_of(ev.raw(c, s, ev.register_indices(v), env))


def eval_role(ev: Evaluator, r, s: State, v: Mapping[str, str] | None = None, env=None) -> frozenset[tuple[str, str]]:
    r = _node(r)
    _expect(r, (ROLE,), None)
    return ev.pairs_of(ev.raw(r, s, ev.register_indices(v), env))


def eval_boolean(ev: Evaluator, b, s: State, v: Mapping[str, str] | None = None, env=None) -> bool:
    b = _node(b)
    _expect(b, (BOOL,), None)
    return bool(ev.raw(b, s, ev.register_indices(v), env))


def eval_numerical(ev: Evaluator, n, s: State, v: Mapping[str, str] | None = None, env=None) -> int:
    n = _node(n)
    _expect(n, (NUM,), None)
    return int(ev.raw(n, s, ev.register_indices(v), env))


def feature_valuation(ev: Evaluator, features: Sequence[Feature], s: State, v: Mapping[str, str] | None = None, env=None) -> dict[str, object]:
    """Condition-level values (bool or non-negative int) of each feature."""
    vi = ev.register_indices(v)
    return {f.name: ev.measure(f, s, vi, env) for f in features}
