"""Sketch language: rules with memory, registers, load effects, and modules.

Text format (s-expressions)::

    (sketch :memory (m0 m1) :internal (m0) :initial m0 :registers (r0)
            :features ((concept n (primitive clear 0)) ...)
            :rules ((rule m1 ((gt n)) ((dec n)) m0)
                    (load-rule m0 ((gt n)) ((load n r0) (unk t)) m1)
                    (call m1 () other (x) m0)
                    (do m1 () putdown (b) m0)))

    (module name :args ((concept x) (role o)) :z (<features>) :memory ... )

``:z`` lists auxiliary features: usable in conditions and in other feature
definitions, but not tracked, so rules never constrain them.

Without ``:memory`` a sketch is plain: a single external memory ``m0`` and
rules written ``(rule (<cond>...) (<effect>...))``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .features import (
    BOOL, CONCEPT, NUM, ROLE, Arg, CRegister, Evaluator, Feature, Node, Scope,
    parse_expr, parse_features,
)
from .sexpr import ParseError, SList, Symbol, fail, keyword_sections, parse_all, parse_one
from .strips import State

COND_OPS = ("true", "false", "eq", "gt")
EFFECT_OPS = ("true", "false", "unk", "dec", "inc")
RULE_KINDS = ("value", "true", "load", "call", "do")
INTERNAL_KINDS = ("true", "load")
EXTERNAL_KINDS = ("value", "call", "do")


class SketchError(ParseError):
    pass


@dataclass(frozen=True)
class Cond:
    feature: str
    op: str  # true | false | eq | gt

    def sexpr(self) -> str:
        if self.op == "true":
            return self.feature
        if self.op == "false":
            return f"(not {self.feature})"
        return f"({self.op} {self.feature})"


@dataclass(frozen=True)
class Effect:
    feature: str
    op: str  # true | false | unk | dec | inc

    def sexpr(self) -> str:
        if self.op == "true":
            return self.feature
        if self.op == "false":
            return f"(not {self.feature})"
        return f"({self.op} {self.feature})"


@dataclass(frozen=True)
class Load:
    concept: str  # source name: feature, argument, or register
    reg: str

    def sexpr(self) -> str:
        return f"(load {self.concept} {self.reg})"


@dataclass(frozen=True)
class Rule:
    id: str
    kind: str
    m: str
    cond: tuple[Cond, ...]
    m2: str
    effects: tuple[Effect, ...] = ()
    load: Load | None = None
    target: str | None = None  # module name (call) or action schema (do)
    call_args: tuple[str, ...] = ()

    @property
    def internal(self) -> bool:
        return self.kind in INTERNAL_KINDS

    def effect_on(self, feature: str) -> str | None:
        for e in self.effects:
            if e.feature == feature:
                return e.op
        return None

    def sexpr(self, plain: bool = False) -> str:
        conds = "(" + " ".join(c.sexpr() for c in self.cond) + ")"
        if self.kind == "load":
            eff = "(" + " ".join([self.load.sexpr()] + [e.sexpr() for e in self.effects]) + ")"
            return f"(load-rule {self.m} {conds} {eff} {self.m2})"
        if self.kind in ("call", "do"):
            args = "(" + " ".join(self.call_args) + ")"
            return f"({self.kind} {self.m} {conds} {self.target} {args} {self.m2})"
        effs = "(" + " ".join(e.sexpr() for e in self.effects) + ")"
        if plain:
            return f"(rule {conds} {effs})"
        return f"(rule {self.m} {conds} {effs} {self.m2})"

    def __str__(self) -> str:
        return f"{self.id}: {self.sexpr()}"


@dataclass(frozen=True)
class Sketch:
    memory: tuple[str, ...]
    internal: frozenset[str]
    initial: str
    registers: tuple[str, ...]
    features: tuple[Feature, ...]
    rules: tuple[Rule, ...]
    plain: bool = False
    # module context; empty for stand-alone sketches
    name: str | None = None
    args: tuple[tuple[str, str], ...] = ()  # (name, concept|role)
    z: tuple[Feature, ...] = ()
    _by_memory: dict = field(default=None, compare=False, repr=False, hash=False)
    _nodes: dict = field(default=None, compare=False, repr=False, hash=False)

    def __post_init__(self):
        by_mem: dict[str, list[Rule]] = {m: [] for m in self.memory}
        for r in self.rules:
            by_mem.setdefault(r.m, []).append(r)
        object.__setattr__(self, "_by_memory", {m: tuple(rs) for m, rs in by_mem.items()})
        nodes: dict[str, Node] = {}
        for r in self.registers:
            nodes[r] = CRegister(r)
        for a, kind in self.args:
            nodes[a] = Arg(a, kind)
        for f in self.z + self.features:
            nodes[f.name] = f.body
        object.__setattr__(self, "_nodes", nodes)

    def rules_at(self, m: str) -> tuple[Rule, ...]:
        return self._by_memory.get(m, ())

    def is_internal(self, m: str) -> bool:
        return m in self.internal

    def node(self, name: str) -> Node:
        return self._nodes[name]

    def feature(self, name: str) -> Feature:
        for f in self.features:
            if f.name == name:
                return f
        raise KeyError(name)

    def register_features(self, reg: str) -> tuple[Feature, ...]:
        """Features of the tracked set that depend on ``reg``."""
        return tuple(f for f in self.features if reg in f.deps)

    @property
    def is_module(self) -> bool:
        return self.name is not None

    def sexpr(self) -> str:
        return print_sketch(self)


ModuleDef = Sketch  # a module is a sketch with a name, arguments and Z features


@dataclass(frozen=True)
class Diagnostic:
    rule: str | None
    message: str
    severity: str = "error"

    def __str__(self) -> str:
        where = self.rule or "sketch"
        return f"{self.severity}: {where}: {self.message}"


# --------------------------------------------------------------------------
# parsing


def _names(expr, what: str) -> tuple[str, ...]:
    if not isinstance(expr, SList) or any(isinstance(x, SList) for x in expr):
        raise fail(f"{what} must be a list of names", expr)
    return tuple(str(x) for x in expr)


def _kind_of(name: str, nodes: Mapping[str, Node], expr) -> str:
    if name not in nodes:
        raise SketchError(f"undeclared feature '{name}'", *(getattr(expr, "line", None), getattr(expr, "col", None)))
    return nodes[name].kind


def _parse_cond(expr, nodes) -> Cond:
    if isinstance(expr, SList):
        if len(expr) != 2 or isinstance(expr[1], SList) or str(expr[0]) not in ("eq", "gt", "not"):
            raise fail("condition must be f, (not f), (eq f) or (gt f)", expr)
        op, name = str(expr[0]), str(expr[1])
        kind = _kind_of(name, nodes, expr)
        if op == "not":
            if kind != BOOL:
                raise SketchError(f"(not {name}) needs a Boolean feature, '{name}' is {kind}", expr.line, expr.col)
            return Cond(name, "false")
        if kind == BOOL:
            raise SketchError(f"({op} {name}) needs a numerical, concept or role feature", expr.line, expr.col)
        return Cond(name, op)
    name = str(expr)
    kind = _kind_of(name, nodes, expr)
    if kind != BOOL:
        raise SketchError(f"bare condition '{name}' needs a Boolean feature, got {kind}", expr.line, expr.col)
    return Cond(name, "true")


def _parse_effect(expr, nodes) -> Effect:
    if isinstance(expr, SList):
        if len(expr) != 2 or isinstance(expr[1], SList) or str(expr[0]) not in ("not", "unk", "dec", "inc"):
            raise fail("effect must be f, (not f), (unk f), (dec f) or (inc f)", expr)
        op, name = str(expr[0]), str(expr[1])
        kind = _kind_of(name, nodes, expr)
        if op == "not":
            if kind != BOOL:
                raise SketchError(f"(not {name}) needs a Boolean feature", expr.line, expr.col)
            return Effect(name, "false")
        if op in ("dec", "inc") and kind == BOOL:
            raise SketchError(f"({op} {name}) needs a numerical, concept or role feature", expr.line, expr.col)
        return Effect(name, op)
    name = str(expr)
    if _kind_of(name, nodes, expr) != BOOL:
        raise SketchError(f"bare effect '{name}' needs a Boolean feature", expr.line, expr.col)
    return Effect(name, "true")


def _check_memory(m, memory, expr):
    if m not in memory:
        raise SketchError(f"undeclared memory state '{m}'", getattr(expr, "line", None), getattr(expr, "col", None))


def _parse_rule(expr, rid: str, memory, internal, plain: bool, nodes, registers) -> Rule:
    if not isinstance(expr, SList) or not expr:
        raise fail("malformed rule", expr)
    head = str(expr[0])
    body = list(expr[1:])
    if plain:
        if head != "rule" or len(body) != 2:
            raise fail("plain sketch rules are (rule (<cond>...) (<effect>...))", expr)
        body = [Symbol(memory[0])] + body + [Symbol(memory[0])]
    if head in ("rule", "load-rule"):
        if len(body) != 4 or not isinstance(body[1], SList) or not isinstance(body[2], SList):
            raise fail(f"expected ({head} <m> (<cond>...) (<effect>...) <m'>)", expr)
        m, m2 = str(body[0]), str(body[3])
        _check_memory(m, memory, body[0])
        _check_memory(m2, memory, body[3])
        cond = tuple(_parse_cond(c, nodes) for c in body[1])
        eff_exprs = list(body[2])
        if eff_exprs and str(eff_exprs[0]) == "load" and not isinstance(eff_exprs[0], SList):
            eff_exprs = [body[2]]  # bare (load C r)
        loads = [e for e in eff_exprs if isinstance(e, SList) and e and str(e[0]) == "load"]
        others = [e for e in eff_exprs if e not in loads]
        if head == "load-rule" and len(loads) != 1:
            raise fail("a load rule has exactly one (load <concept> <register>) effect", expr)
        if len(loads) > 1:
            raise fail("at most one load effect per rule", expr)
        effects = tuple(_parse_effect(e, nodes) for e in others)
        seen = set()
        for e in effects:
            if e.feature in seen:
                raise fail(f"feature '{e.feature}' has more than one effect", expr)
            seen.add(e.feature)
        if loads:
            le = loads[0]
            if len(le) != 3 or any(isinstance(x, SList) for x in le[1:]):
                raise fail("expected (load <concept> <register>)", le)
            cname, reg = str(le[1]), str(le[2])
            if reg not in registers:
                raise SketchError(f"undeclared register '{reg}'", le.line, le.col)
            if _kind_of(cname, nodes, le) != CONCEPT:
                raise SketchError(f"load source '{cname}' is not a concept", le.line, le.col)
            return Rule(rid, "load", m, cond, m2, effects, Load(cname, reg))
        kind = "true" if not effects and m in internal else "value"
        return Rule(rid, kind, m, cond, m2, effects)
    if head in ("call", "do"):
        if len(body) != 5 or not isinstance(body[1], SList) or not isinstance(body[3], SList):
            raise fail(f"expected ({head} <m> (<cond>...) <name> (<arg>...) <m'>)", expr)
        m, m2 = str(body[0]), str(body[4])
        _check_memory(m, memory, body[0])
        _check_memory(m2, memory, body[4])
        cond = tuple(_parse_cond(c, nodes) for c in body[1])
        args = _names(body[3], "arguments")
        for a, a_expr in zip(args, body[3]):
            kind = _kind_of(a, nodes, a_expr)
            allowed = (CONCEPT,) if head == "do" else (CONCEPT, ROLE)
            if kind not in allowed:
                raise SketchError(
                    f"argument '{a}' of a {head} rule must be {' or '.join(allowed)}, got {kind}",
                    a_expr.line, a_expr.col,
                )
        return Rule(rid, head, m, cond, m2, target=str(body[2]), call_args=args)
    raise fail(f"unknown rule form '{head}'", expr)


def _sketch_from_sections(sec: Mapping, name=None, args=(), z_exprs=None, domain=None) -> Sketch:
    plain = ":memory" not in sec
    allowed = {":memory", ":internal", ":initial", ":registers", ":features", ":rules"}
    if name is not None:
        allowed.add(":args")
    for k in sec:
        if k not in allowed:
            raise fail(f"unknown section {k}", sec[k])
    if plain:
        for k in (":internal", ":initial", ":registers"):
            if k in sec:
                raise fail(f"{k} needs :memory", sec[k])
        memory: tuple[str, ...] = ("m0",)
        internal: frozenset[str] = frozenset()
        initial = "m0"
        registers: tuple[str, ...] = ()
    else:
        memory = _names(sec[":memory"], ":memory")
        if not memory:
            raise fail("at least one memory state is required", sec[":memory"])
        if len(set(memory)) != len(memory):
            raise fail("duplicate memory state", sec[":memory"])
        internal = frozenset(_names(sec.get(":internal", SList()), ":internal"))
        for m in internal:
            _check_memory(m, memory, sec.get(":internal"))
        init_expr = sec.get(":initial", Symbol(memory[0]))
        initial = str(init_expr)
        _check_memory(initial, memory, init_expr)
        registers = _names(sec.get(":registers", SList()), ":registers")
    scope = Scope(registers=registers, args=dict(args), domain=domain)
    z = tuple(parse_features(z_exprs or (), scope))
    feats_expr = sec.get(":features", SList())
    if not isinstance(feats_expr, SList):
        raise fail(":features must be a list", feats_expr)
    features = tuple(parse_features(feats_expr, scope))
    nodes: dict[str, Node] = {r: CRegister(r) for r in registers}
    nodes.update({a: Arg(a, k) for a, k in args})
    nodes.update({f.name: f.body for f in z + features})
    rules_expr = sec.get(":rules", SList())
    if not isinstance(rules_expr, SList):
        raise fail(":rules must be a list", rules_expr)
    rules = tuple(
        _parse_rule(e, f"r{i}", memory, internal, plain, nodes, registers) for i, e in enumerate(rules_expr)
    )
    tracked = {f.name for f in features}
    for r in rules:
        for e in r.effects:
            if e.feature not in tracked:
                raise SketchError(f"{r.id}: effect on '{e.feature}', which is not a tracked feature")
    return Sketch(memory, internal, initial, registers, features, rules, plain, name, tuple(args), z)


def parse_sketch(text: str | SList, domain=None) -> Sketch:
    """Parse a ``(sketch ...)`` form. ``domain`` (optional) checks predicates."""
    expr = parse_one(text) if isinstance(text, str) else text
    if not isinstance(expr, SList) or not expr or str(expr[0]) != "sketch":
        raise fail("expected (sketch ...)", expr)
    sec = dict(keyword_sections(expr, 1))
    z_exprs = sec.pop(":z", SList())
    return _sketch_from_sections(sec, z_exprs=z_exprs, domain=domain)


def parse_module(expr, domain=None) -> Sketch:
    if isinstance(expr, str):
        expr = parse_one(expr)
    if not isinstance(expr, SList) or len(expr) < 2 or str(expr[0]) != "module":
        raise fail("expected (module <name> ...)", expr)
    name = str(expr[1])
    items = list(expr[2:])
    nested = [e for e in items if isinstance(e, SList) and e and str(e[0]) == "sketch"]
    flat = [e for e in items if e not in nested]
    sec = dict(keyword_sections(flat))
    if len(nested) > 1:
        raise fail("a module has one sketch body", expr)
    if nested:
        for k, v in keyword_sections(nested[0], 1).items():
            if k in sec:
                raise fail(f"duplicate section {k}", v)
            sec[k] = v
    args: list[tuple[str, str]] = []
    for a in sec.pop(":args", SList()):
        if not isinstance(a, SList) or len(a) != 2 or str(a[0]) not in (CONCEPT, ROLE):
            raise fail("module arguments are (concept <name>) or (role <name>)", a)
        args.append((str(a[1]), str(a[0])))
    if len({a for a, _ in args}) != len(args):
        raise fail("duplicate module argument", expr)
    z_exprs = sec.pop(":z", SList())
    if ":memory" not in sec:
        raise fail("a module needs :memory", expr)
    return _sketch_from_sections(sec, name, tuple(args), z_exprs, domain)


@dataclass(frozen=True)
class ModuleSet:
    modules: tuple[Sketch, ...]

    @property
    def entry(self) -> Sketch:
        return self.modules[0]

    def __getitem__(self, name: str) -> Sketch:
        for m in self.modules:
            if m.name == name:
                return m
        raise KeyError(name)

    def __contains__(self, name: str) -> bool:
        return any(m.name == name for m in self.modules)

    def index(self, name: str) -> int:
        for i, m in enumerate(self.modules):
            if m.name == name:
                return i
        raise KeyError(name)

    def sexpr(self) -> str:
        return "\n\n".join(print_sketch(m) for m in self.modules) + "\n"


def parse_module_set(text: str, domain=None) -> ModuleSet:
    """Parse a file of ``(module ...)`` forms; the first is the entry module.

    Call targets must name a module with a matching argument signature. With
    ``domain``, do targets must name an action schema of matching arity.
    """
    exprs = parse_all(text)
    if not exprs:
        raise ParseError("no modules found")
    mods = [parse_module(e, domain) for e in exprs]
    names = [m.name for m in mods]
    dup = {n for n in names if names.count(n) > 1}
    if dup:
        raise SketchError(f"duplicate module '{sorted(dup)[0]}'")
    if mods[0].args:
        raise SketchError(f"entry module '{mods[0].name}' must take no arguments")
    by_name = {m.name: m for m in mods}
    for mod in mods:
        for r in mod.rules:
            if r.kind == "call":
                callee = by_name.get(r.target)
                if callee is None:
                    raise SketchError(f"{mod.name}.{r.id}: unknown module '{r.target}'")
                if len(callee.args) != len(r.call_args):
                    raise SketchError(
                        f"{mod.name}.{r.id}: '{r.target}' takes {len(callee.args)} arguments, got {len(r.call_args)}"
                    )
                for a, (pname, pkind) in zip(r.call_args, callee.args):
                    kind = mod.node(a).kind
                    if kind != pkind:
                        raise SketchError(
                            f"{mod.name}.{r.id}: argument '{a}' is a {kind}, '{r.target}' expects a {pkind} for '{pname}'"
                        )
            elif r.kind == "do" and domain is not None:
                try:
                    schema = domain.schema(r.target)
                except KeyError:
                    raise SketchError(f"{mod.name}.{r.id}: unknown action schema '{r.target}'") from None
                if schema.arity != len(r.call_args):
                    raise SketchError(
                        f"{mod.name}.{r.id}: '{r.target}' takes {schema.arity} arguments, got {len(r.call_args)}"
                    )
    return ModuleSet(tuple(mods))


# --------------------------------------------------------------------------
# printing


def print_sketch(sk: Sketch) -> str:
    def feats(fs):
        return "(" + "\n    ".join(f.sexpr() for f in fs) + ")"

    lines = []
    if sk.is_module:
        args = " ".join(f"({k} {a})" for a, k in sk.args)
        lines.append(f"(module {sk.name}")
        lines.append(f"  :args ({args})")
        lines.append(f"  :z {feats(sk.z)}")
    else:
        lines.append("(sketch")
        if sk.z:
            lines.append(f"  :z {feats(sk.z)}")
    if not sk.plain:
        lines.append(f"  :memory ({' '.join(sk.memory)})")
        lines.append(f"  :internal ({' '.join(m for m in sk.memory if m in sk.internal)})")
        lines.append(f"  :initial {sk.initial}")
        lines.append(f"  :registers ({' '.join(sk.registers)})")
    lines.append(f"  :features {feats(sk.features)}")
    rules = "\n    ".join(r.sexpr(plain=sk.plain) for r in sk.rules)
    lines.append(f"  :rules ({rules}))")
    return "\n".join(lines)


# --------------------------------------------------------------------------
# validation


def validate_sketch(sk: Sketch) -> list[Diagnostic]:
    """Structural checks; an empty list means the sketch is well formed."""
    out: list[Diagnostic] = []
    if sk.initial not in sk.memory:
        out.append(Diagnostic(None, f"initial memory '{sk.initial}' is not declared"))
    for r in sk.rules:
        if r.internal and not sk.is_internal(r.m):
            out.append(Diagnostic(r.id, f"internal ({r.kind}) rule at external memory '{r.m}'"))
        if not r.internal and sk.is_internal(r.m):
            out.append(Diagnostic(r.id, f"{r.kind} rule at internal memory '{r.m}'"))
        if r.kind == "load":
            need = {f.name for f in sk.register_features(r.load.reg)}
            have = {e.feature for e in r.effects if e.op == "unk"}
            for f in sorted(need - have):
                out.append(Diagnostic(r.id, f"load into {r.load.reg} must declare (unk {f})"))
            for e in r.effects:
                if e.op != "unk" or e.feature not in need:
                    out.append(Diagnostic(r.id, f"load rule may not carry effect {e.sexpr()}"))
            if not any(c.feature == r.load.concept and c.op == "gt" for c in r.cond):
                out.append(Diagnostic(
                    r.id, f"load from '{r.load.concept}' without condition (gt {r.load.concept})", "warning"
                ))
    return out


def errors(diags: Iterable[Diagnostic]) -> list[Diagnostic]:
    return [d for d in diags if d.severity == "error"]


# --------------------------------------------------------------------------
# semantics


def satisfies(sk: Sketch, cond: Sequence[Cond], ev: Evaluator, s: State, v=None, env=None) -> bool:
    """Does ``s`` (given registers ``v``) satisfy every condition atom?"""
    for c in cond:
        val = ev.measure(sk.node(c.feature), s, v, env)
        op = c.op
        if op == "true":
            if not val:
                return False
        elif op == "false":
            if val:
                return False
        elif op == "gt":
            if not val > 0:
                return False
        elif val != 0:
            return False
    return True


def effect_holds(op: str | None, before, after) -> bool:
    if op is None:
        return before == after
    if op == "unk":
        return True
    if op == "true":
        return bool(after)
    if op == "false":
        return not after
    if op == "dec":
        return after < before
    return after > before


def pair_compatible(sk: Sketch, r: Rule, ev: Evaluator, s: State, s2: State, v=None, env=None) -> bool:
    """Is the transition ``s -> s2`` compatible with external value rule ``r``?"""
    if r.kind != "value" or sk.is_internal(r.m):
        raise ValueError(f"{r.id} is not an external value rule")
    if not satisfies(sk, r.cond, ev, s, v, env):
        return False
    for f in sk.features:
        op = r.effect_on(f.name)
        if op == "unk":
            continue
        if not effect_holds(op, ev.measure(f, s, v, env), ev.measure(f, s2, v, env)):
            return False
    return True
