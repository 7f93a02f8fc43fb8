"""Parser for the STRIPS subset of PDDL: ``:strips``, ``:typing``, ``:negative-preconditions``."""
from __future__ import annotations

from dataclasses import dataclass, field

from .sexpr import ParseError, SList, Symbol, fail, parse_all

SUPPORTED_REQUIREMENTS = frozenset({":strips", ":typing", ":negative-preconditions"})
_UNSUPPORTED_CONNECTIVES = frozenset({"or", "imply", "forall", "exists", "when", "=", "increase", "decrease"})


class UnsupportedRequirement(ParseError):
    pass


class ArityMismatch(ParseError):
    pass


class UnknownSymbol(ParseError):
    pass


class TypeMismatch(ParseError):
    pass


@dataclass(frozen=True)
class Atom:
    predicate: str
    args: tuple[str, ...]

    def __str__(self) -> str:
        return "(" + " ".join((self.predicate,) + self.args) + ")"


@dataclass(frozen=True)
class Literal:
    atom: Atom
    positive: bool = True

    def __str__(self) -> str:
        return str(self.atom) if self.positive else f"(not {self.atom})"


@dataclass(frozen=True)
class Predicate:
    name: str
    types: tuple[str, ...]

    @property
    def arity(self) -> int:
        return len(self.types)


@dataclass(frozen=True)
class ActionSchema:
    name: str
    parameters: tuple[tuple[str, str], ...]  # (variable, type)
    precondition: tuple[Literal, ...]
    add: tuple[Atom, ...]
    delete: tuple[Atom, ...]

    @property
    def arity(self) -> int:
        return len(self.parameters)


@dataclass
class Domain:
    name: str
    requirements: frozenset[str] = frozenset()
    types: dict[str, str | None] = field(default_factory=lambda: {"object": None})
    constants: dict[str, str] = field(default_factory=dict)
    predicates: dict[str, Predicate] = field(default_factory=dict)
    actions: list[ActionSchema] = field(default_factory=list)

    def is_subtype(self, child: str, parent: str) -> bool:
        t: str | None = child
        while t is not None:
            if t == parent:
                return True
            t = self.types.get(t)
        return False

    def schema(self, name: str) -> ActionSchema:
        for a in self.actions:
            if a.name == name:
                return a
        raise KeyError(name)

    def static_predicates(self) -> set[str]:
        touched = {a.predicate for s in self.actions for a in s.add + s.delete}
        return set(self.predicates) - touched


@dataclass
class Problem:
    name: str
    domain: Domain
    objects: dict[str, str]  # name -> type, domain constants included
    init: frozenset[Atom]
    goal: tuple[Literal, ...]


def _typed_list(items, where) -> list[tuple[Symbol, str]]:
    """Parse ``a b - t c`` into [(a, t), (b, t), (c, object)]."""
    out: list[tuple[Symbol, str]] = []
    pending: list[Symbol] = []
    i = 0
    while i < len(items):
        tok = items[i]
        if isinstance(tok, SList):
            raise fail("unexpected list in typed list", tok)
        if tok == "-":
            if i + 1 >= len(items) or isinstance(items[i + 1], SList):
                raise fail("missing type after '-'", tok)
            if isinstance(items[i + 1], Symbol) and items[i + 1] == "either":
                raise fail("'either' types are not supported", tok)
            out.extend((p, str(items[i + 1])) for p in pending)
            pending = []
            i += 2
        else:
            pending.append(tok)
            i += 1
    out.extend((p, "object") for p in pending)
    return out


def _expect_define(exprs, kind: str) -> SList:
    if len(exprs) != 1 or not isinstance(exprs[0], SList) or not exprs[0] or exprs[0][0] != "define":
        raise ParseError(f"expected a single (define ({kind} ...)) form")
    form = exprs[0]
    head = form[1] if len(form) > 1 else None
    if not isinstance(head, SList) or len(head) != 2 or head[0] != kind:
        raise fail(f"expected ({kind} <name>)", head if head is not None else form)
    return form


def _atom(expr, domain: Domain, variables: dict[str, str] | None) -> Atom:
    if not isinstance(expr, SList) or not expr or isinstance(expr[0], SList):
        raise fail("expected an atom", expr)
    pred = str(expr[0])
    if pred in _UNSUPPORTED_CONNECTIVES:
        raise fail(f"'{pred}' is outside the STRIPS subset", expr)
    if pred not in domain.predicates:
        raise UnknownSymbol(f"unknown predicate '{pred}'", expr.line, expr.col)
    args = tuple(str(a) for a in expr[1:])
    if any(isinstance(a, SList) for a in expr[1:]):
        raise fail("nested terms are not allowed", expr)
    if len(args) != domain.predicates[pred].arity:
        raise ArityMismatch(
            f"predicate '{pred}' expects {domain.predicates[pred].arity} arguments, got {len(args)}",
            expr.line, expr.col,
        )
    if variables is not None:
        for a in args:
            if a.startswith("?") and a not in variables:
                raise UnknownSymbol(f"undeclared variable '{a}'", expr.line, expr.col)
            if not a.startswith("?") and a not in domain.constants:
                raise UnknownSymbol(f"unknown constant '{a}'", expr.line, expr.col)
    return Atom(pred, args)


def _conjunction(expr) -> list:
    if isinstance(expr, SList) and expr and expr[0] == "and":
        return list(expr[1:])
    if isinstance(expr, SList) and not expr:
        return []
    return [expr]


def _literal(expr, domain: Domain, variables, allow_negative: bool) -> Literal:
    if isinstance(expr, SList) and expr and expr[0] == "not":
        if not allow_negative:
            raise fail("negative literal requires :negative-preconditions", expr)
        if len(expr) != 2:
            raise fail("malformed (not ...)", expr)
        return Literal(_atom(expr[1], domain, variables), False)
    return Literal(_atom(expr, domain, variables), True)


def parse_domain(text: str) -> Domain:
    form = _expect_define(parse_all(text), "domain")
    domain = Domain(name=str(form[1][1]))
    for section in form[2:]:
        if not isinstance(section, SList) or not section or not isinstance(section[0], Symbol):
            raise fail("malformed domain section", section)
        key = section[0]
        if key == ":requirements":
            reqs = frozenset(str(r) for r in section[1:])
            bad = sorted(reqs - SUPPORTED_REQUIREMENTS)
            if bad:
                raise UnsupportedRequirement(f"unsupported requirement {bad[0]}", section.line, section.col)
            domain.requirements = reqs
        elif key == ":types":
            for name, parent in _typed_list(section[1:], section):
                domain.types[str(name)] = parent
                domain.types.setdefault(parent, "object" if parent != "object" else None)
        elif key == ":constants":
            for name, typ in _typed_list(section[1:], section):
                domain.constants[str(name)] = typ
        elif key == ":predicates":
            for p in section[1:]:
                if not isinstance(p, SList) or not p:
                    raise fail("malformed predicate declaration", p)
                params = _typed_list(p[1:], p)
                domain.predicates[str(p[0])] = Predicate(str(p[0]), tuple(t for _, t in params))
        elif key == ":action":
            domain.actions.append(_parse_action(section, domain))
        else:
            raise fail(f"unsupported domain section {key}", section)
    for t, parent in domain.types.items():
        if parent is not None and parent not in domain.types:
            raise UnknownSymbol(f"unknown parent type '{parent}' of '{t}'")
    for p in domain.predicates.values():
        for t in p.types:
            if t not in domain.types:
                raise UnknownSymbol(f"unknown type '{t}' in predicate '{p.name}'")
    return domain


def _parse_action(section: SList, domain: Domain) -> ActionSchema:
    if len(section) < 2:
        raise fail("action without a name", section)
    name = str(section[1])
    kw = {}
    i = 2
    while i < len(section):
        key = section[i]
        if not isinstance(key, Symbol) or i + 1 >= len(section):
            raise fail("malformed action body", key)
        kw[str(key)] = section[i + 1]
        i += 2
    unknown = set(kw) - {":parameters", ":precondition", ":effect"}
    if unknown:
        raise fail(f"unsupported action field {sorted(unknown)[0]}", section)
    params = _typed_list(kw.get(":parameters", SList()), section)
    for var, typ in params:
        if not var.startswith("?"):
            raise fail(f"parameter '{var}' must start with '?'", var)
        if typ not in domain.types:
            raise UnknownSymbol(f"unknown type '{typ}' for parameter {var}", var.line, var.col)
    variables = {str(v): t for v, t in params}
    neg_ok = ":negative-preconditions" in domain.requirements
    pre = tuple(_literal(e, domain, variables, neg_ok) for e in _conjunction(kw.get(":precondition", SList())))
    add, delete = [], []
    for e in _conjunction(kw.get(":effect", SList())):
        lit = _literal(e, domain, variables, allow_negative=True)
        (add if lit.positive else delete).append(lit.atom)
    return ActionSchema(name, tuple((str(v), t) for v, t in params), pre, tuple(add), tuple(delete))


def parse_problem(text: str, domain: Domain) -> Problem:
    form = _expect_define(parse_all(text), "problem")
    name = str(form[1][1])
    objects = dict(domain.constants)
    init: set[Atom] = set()
    goal: list[Literal] = []
    goal_expr = None
    init_exprs: list = []
    for section in form[2:]:
        if not isinstance(section, SList) or not section:
            raise fail("malformed problem section", section)
        key = section[0]
        if key == ":domain":
            if len(section) != 2 or section[1] != domain.name:
                raise fail(f"problem is for domain {section[1:]!r}, not '{domain.name}'", section)
        elif key == ":requirements":
            bad = sorted(set(map(str, section[1:])) - SUPPORTED_REQUIREMENTS)
            if bad:
                raise UnsupportedRequirement(f"unsupported requirement {bad[0]}", section.line, section.col)
        elif key == ":objects":
            for obj, typ in _typed_list(section[1:], section):
                if typ not in domain.types:
                    raise UnknownSymbol(f"unknown type '{typ}' for object '{obj}'", obj.line, obj.col)
                objects[str(obj)] = typ
        elif key == ":init":
            init_exprs = list(section[1:])
        elif key == ":goal":
            goal_expr = section[1] if len(section) == 2 else SList()
        else:
            raise fail(f"unsupported problem section {key}", section)

    def check(expr, atom: Atom):
        for arg, typ in zip(atom.args, domain.predicates[atom.predicate].types):
            if arg not in objects:
                raise UnknownSymbol(f"unknown object '{arg}'", *(expr.line, expr.col))
            if not domain.is_subtype(objects[arg], typ):
                raise TypeMismatch(
                    f"object '{arg}' of type '{objects[arg]}' used where '{typ}' is expected",
                    expr.line, expr.col,
                )

    for e in init_exprs:
        atom = _atom(e, domain, None)
        check(e, atom)
        init.add(atom)
    if goal_expr is not None:
        for e in _conjunction(goal_expr):
            lit = _literal(e, domain, None, allow_negative=True)
            check(e[1] if not lit.positive else e, lit.atom)
            goal.append(lit)
    return Problem(name, domain, objects, frozenset(init), tuple(goal))
