"""Feature evaluation checked against a naive set-based interpreter."""
import pytest
from hypothesis import given, strategies as st

from sketchrun.features import (
    Evaluator, FeatureTypeError, Scope, UnknownName, eval_boolean, eval_concept, eval_numerical, eval_role,
    feature_valuation, parse_expr, parse_feature, parse_features,
)
from sketchrun.sexpr import parse_one, to_text
from sketchrun.strips import apply

from conftest import blocks_problem, bundled
from sketchrun.generators import gen_blocks


def oracle(expr, atoms, objects, v, env):
    """Reference semantics over plain Python sets; atoms are (pred, args) tuples."""
    if not isinstance(expr, list):
        name = str(expr)
        if name == "top":
            return set(objects)
        if name == "bot":
            return set()
        if name in env:
            return env[name]
        return {v[name]}
    head, rest = str(expr[0]), expr[1:]
    ev = lambda e: oracle(e, atoms, objects, v, env)
    if head in ("primitive", "goal"):
        pred = str(rest[0]) + ("_G" if head == "goal" else "")
        pos = [int(str(x)) for x in rest[1:]]
        tuples = {args for p, args in atoms if p == pred}
        if len(pos) == 1:
            return {t[pos[0]] for t in tuples}
        return {(t[pos[0]], t[pos[1]]) for t in tuples}
    if head == "nominal":
        return {str(rest[0])}
    if head == "register":
        return {v[str(rest[0])]}
    if head == "not":
        return set(objects) - ev(rest[0])
    if head == "and":
        out = ev(rest[0])
        for e in rest[1:]:
            out &= ev(e)
        return out
    if head == "or":
        out = ev(rest[0])
        for e in rest[1:]:
            out |= ev(e)
        return out
    if head == "some":
        r, c = ev(rest[0]), ev(rest[1])
        return {x for x, y in r if y in c}
    if head == "all":
        r, c = ev(rest[0]), ev(rest[1])
        return {x for x in objects if all(y in c for (a, y) in r if a == x)}
    if head == "inverse":
        return {(y, x) for x, y in ev(rest[0])}
    if head == "compose":
        r1, r2 = ev(rest[0]), ev(rest[1])
        return {(x, z) for x, y in r1 for y2, z in r2 if y == y2}
    if head in ("tc", "rtc"):
        r = set(ev(rest[0]))
        while True:
            more = {(x, z) for x, y in r for y2, z in r if y == y2} - r
            if not more:
                break
            r |= more
        if head == "rtc":
            r |= {(o, o) for o in objects}
        return r
    if head == "nonempty":
        return bool(ev(rest[0]))
    if head == "bnot":
        return not ev(rest[0])
    if head == "band":
        return all(ev(e) for e in rest)
    if head == "bor":
        return any(ev(e) for e in rest)
    if head == "count":
        return len(ev(rest[0]))
    raise AssertionError(head)


# random well-typed expressions ----------------------------------------------

CONCEPT_LEAVES = ["(primitive clear 0)", "(primitive ontable 0)", "(primitive holding 0)", "top", "bot",
                  "(goal on 0)", "(goal on 1)", "(register r0)", "(nominal b1)"]
ROLE_LEAVES = ["(primitive on 0 1)", "(primitive on 1 0)", "(goal on 0 1)"]


def concepts(depth):
    if depth == 0:
        return st.sampled_from(CONCEPT_LEAVES)
    sub = concepts(depth - 1)
    rsub = roles(depth - 1)
    return st.one_of(
        st.sampled_from(CONCEPT_LEAVES),
        sub.map(lambda c: f"(not {c})"),
        st.tuples(sub, sub).map(lambda t: f"(and {t[0]} {t[1]})"),
        st.tuples(sub, sub).map(lambda t: f"(or {t[0]} {t[1]})"),
        st.tuples(rsub, sub).map(lambda t: f"(some {t[0]} {t[1]})"),
        st.tuples(rsub, sub).map(lambda t: f"(all {t[0]} {t[1]})"),
    )


def roles(depth):
    if depth == 0:
        return st.sampled_from(ROLE_LEAVES)
    sub = roles(depth - 1)
    return st.one_of(
        st.sampled_from(ROLE_LEAVES),
        sub.map(lambda r: f"(inverse {r})"),
        sub.map(lambda r: f"(tc {r})"),
        sub.map(lambda r: f"(rtc {r})"),
        st.tuples(sub, sub).map(lambda t: f"(compose {t[0]} {t[1]})"),
        st.tuples(sub, sub).map(lambda t: f"(and {t[0]} {t[1]})"),
    )


def random_state(gp, steps, seed):
    import random
    rng = random.Random(seed)
    s = gp.init
    for _ in range(steps):
        succ = gp.successors(s)
        s = rng.choice(succ)[1]
    return s


def atoms_of(gp, s):
    return {(a.predicate, a.args) for a in gp.state_atoms(s)}


@given(concepts(3), st.integers(3, 6), st.integers(0, 500), st.integers(0, 30), st.integers(0, 5))
def test_concepts_match_oracle(text, n, seed, steps, reg):
    gp = blocks_problem(gen_blocks(n, "arbitrary", seed).to_pddl())
    s = random_state(gp, steps, seed)
    scope = Scope(registers=("r0",))
    node = parse_expr(parse_one(text), scope)
    ev = Evaluator(gp)
    r0 = gp.objects[reg % len(gp.objects)]
    got = eval_concept(ev, node, s, {"r0": r0})
    want = oracle(parse_one(text), atoms_of(gp, s), gp.objects, {"r0": r0}, {})
    assert got == want
    # memoized second evaluation agrees
    assert eval_concept(ev, node, s, {"r0": r0}) == want


@given(roles(3), st.integers(3, 5), st.integers(0, 500), st.integers(0, 30))
def test_roles_match_oracle(text, n, seed, steps):
    gp = blocks_problem(gen_blocks(n, "arbitrary", seed).to_pddl())
    s = random_state(gp, steps, seed)
    node = parse_expr(parse_one(text), Scope())
    got = eval_role(Evaluator(gp), node, s)
    assert got == oracle(parse_one(text), atoms_of(gp, s), gp.objects, {}, {})


@given(concepts(2), st.integers(3, 6), st.integers(0, 500))
def test_boolean_and_count(text, n, seed):
    gp = blocks_problem(gen_blocks(n, "arbitrary", seed).to_pddl())
    scope = Scope(registers=("r0",))
    ev = Evaluator(gp)
    v = {"r0": gp.objects[0]}
    want = oracle(parse_one(text), atoms_of(gp, gp.init), gp.objects, v, {})
    assert eval_numerical(ev, parse_expr(parse_one(f"(count {text})"), scope), gp.init, v) == len(want)
    assert eval_boolean(ev, parse_expr(parse_one(f"(nonempty {text})"), scope), gp.init, v) == bool(want)
    assert eval_boolean(ev, parse_expr(parse_one(f"(bnot (nonempty {text}))"), scope), gp.init, v) == (not want)


def test_named_features_on_fixed_state():
    gp = bundled("on-5-holding")  # holding x; y under b1 < b2 < b3
    scope = Scope()
    feats = parse_features(parse_one("""(
        (concept gx (some (goal on 0 1) top))
        (concept gy (some (inverse (goal on 0 1)) top))
        (bool on (nonempty (and (primitive on 0 1) (goal on 0 1))))
        (bool h (nonempty (primitive holding 0)))
        (bool hx (nonempty (and (primitive holding 0) gx)))
        (num n (count (some (tc (primitive on 0 1)) (or gx gy)))))"""), scope)
    ev = Evaluator(gp)
    vals = feature_valuation(ev, feats, gp.init)
    assert vals == {"gx": 1, "gy": 1, "on": False, "h": True, "hx": True, "n": 3}
    assert eval_concept(ev, feats[0], gp.init) == {"x"}
    s = apply(gp.init, gp.ground_action("putdown", ["x"]))
    assert feature_valuation(ev, feats, s)["hx"] is False


def test_feature_print_roundtrip():
    scope = Scope(registers=("r0",))
    for text in ["(concept t (some (primitive on 0 1) (register r0)))",
                 "(bool p (bor (nonempty (and (primitive clear 0) top)) (bnot (nonempty bot))))",
                 "(num k (count (compose (primitive on 0 1) (inverse (goal on 0 1)))))",
                 "(role r (rtc (and (primitive on 0 1) (goal on 0 1))))"]:
        f = parse_feature(text, scope)
        assert parse_feature(f.sexpr(), scope).sexpr() == f.sexpr()
        assert to_text(parse_one(f.sexpr())) == f.sexpr()


def test_feature_errors(blocks_domain):
    scope = Scope(domain=blocks_domain)
    with pytest.raises(FeatureTypeError):
        parse_feature("(concept c (primitive on 0 1))", scope)  # a role, declared concept
    with pytest.raises(FeatureTypeError):
        parse_expr(parse_one("(some (primitive clear 0) top)"), scope)
    with pytest.raises(UnknownName):
        parse_expr(parse_one("(register r9)"), scope)
    with pytest.raises(UnknownName):
        parse_expr(parse_one("mystery"), scope)
    with pytest.raises(UnknownName):
        parse_expr(parse_one("(primitive foo 0)"), scope)
    with pytest.raises(FeatureTypeError):
        parse_expr(parse_one("(primitive on 0 2)"), scope)


def test_register_dependency_tracking():
    scope = Scope(registers=("r0", "r1"))
    f = parse_feature("(bool a (nonempty (and (register r1) (some (primitive on 0 1) (register r0)))))", scope)
    assert f.deps == {"r0", "r1"}
    assert parse_feature("(concept c (primitive clear 0))", scope).deps == frozenset()
