"""Termination check for sketches: abstract policy graph plus a Sieve-style elimination.

Vertices are pairs ``(m, nu)`` where ``nu`` gives, for each tracked feature,
its truth value (Booleans) or whether it is positive (numerical, concept and
role features). There is one edge per rule and consistent vertex pair.

Elimination: inside a strongly connected component, a feature ``n`` that is
decreased on some edge and neither increased nor made unknown on any edge of
the component cannot drive an infinite loop, so its decreasing edges are
dropped. Components are recomputed until nothing changes; the sketch is
accepted iff the remaining graph is acyclic.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import networkx as nx

from .features import BOOL
from .sketch import Rule, Sketch

Valuation = tuple[bool, ...]


@dataclass
class PolicyGraph:
    sketch: Sketch
    graph: nx.MultiDiGraph
    features: tuple[str, ...]
    numeric: frozenset[str]

    @property
    def vertex_count(self) -> int:
        return self.graph.number_of_nodes()

    @property
    def edge_count(self) -> int:
        return self.graph.number_of_edges()


@dataclass
class SieveResult:
    accepted: bool
    witness: list[str] = field(default_factory=list)  # rule ids along a surviving cycle
    witness_edges: list[tuple] = field(default_factory=list)
    removed: list[tuple] = field(default_factory=list)
    graph: nx.MultiDiGraph | None = None

    def __bool__(self) -> bool:
        return self.accepted


def _labels(sk: Sketch, r: Rule, features) -> dict[str, str]:
    """Effect label per feature; call/do rules change the state in unknown ways."""
    if r.kind in ("call", "do"):
        return {f: "unk" for f in features}
    return {e.feature: e.op for e in r.effects}


def _condition_ok(r: Rule, nu: dict[str, bool], known: set[str]) -> bool:
    for c in r.cond:
        if c.feature not in known:
            continue  # Z features, arguments and registers are not abstracted
        val = nu[c.feature]
        if c.op in ("true", "gt") and not val:
            return False
        if c.op in ("false", "eq") and val:
            return False
    return True


def _targets(nu: dict[str, bool], labels: dict[str, str], numeric) -> list[dict[str, bool]] | None:
    options = []
    for f, val in nu.items():
        op = labels.get(f)
        if op is None:
            options.append((val,))
        elif op == "true":
            options.append((True,))
        elif op == "false":
            options.append((False,))
        elif op == "inc":
            options.append((True,))
        elif op == "dec":
            if not val:
                return None  # cannot decrease a zero value
            options.append((False, True))
        else:
            options.append((False, True))
    names = list(nu)
    return [dict(zip(names, combo)) for combo in itertools.product(*options)]


def build_policy_graph(sk: Sketch) -> PolicyGraph:
    features = tuple(f.name for f in sk.features)
    numeric = frozenset(f.name for f in sk.features if f.kind != BOOL)
    known = set(features)
    g = nx.MultiDiGraph()
    vals = list(itertools.product((False, True), repeat=len(features)))
    for m in sk.memory:
        for combo in vals:
            g.add_node((m, combo))
    for r in sk.rules:
        labels = _labels(sk, r, features)
        for combo in vals:
            nu = dict(zip(features, combo))
            if not _condition_ok(r, nu, known):
                continue
            for nu2 in _targets(nu, labels, numeric) or ():
                g.add_edge((r.m, combo), (r.m2, tuple(nu2[f] for f in features)), key=r.id, rule=r.id, labels=labels)
    return PolicyGraph(sk, g, features, numeric)


def sieve(pg: PolicyGraph) -> SieveResult:
    g = pg.graph.copy()
    removed: list[tuple] = []
    changed = True
    while changed:
        changed = False
        for comp in nx.strongly_connected_components(g):
            inside = [
                (u, v, k, d) for u, v, k, d in g.edges(comp, keys=True, data=True) if v in comp
            ]
            if not inside:
                continue
            for n in sorted(pg.numeric):
                ops = {d["labels"].get(n) for *_, d in inside}
                if "dec" in ops and "inc" not in ops and "unk" not in ops:
                    for u, v, k, d in inside:
                        if d["labels"].get(n) == "dec":
                            g.remove_edge(u, v, key=k)
                            removed.append((u, v, k))
                    changed = True
                    break
            if changed:
                break
    try:
        cycle = nx.find_cycle(g)
    except nx.NetworkXNoCycle:
        return SieveResult(True, removed=removed, graph=g)
    return SieveResult(False, [k for _, _, k in cycle], list(cycle), removed, g)


def is_terminating(sk: Sketch) -> bool:
    return sieve(build_policy_graph(sk)).accepted
