import pytest

from sketchrun import data_path
from sketchrun.features import Evaluator
from sketchrun.sexpr import ParseError
from sketchrun.sketch import (
    SketchError, effect_holds, errors, pair_compatible, parse_module_set, parse_sketch, print_sketch,
    satisfies, validate_sketch,
)
from sketchrun.strips import apply

from conftest import bundled

SKETCHES = ["on-width0", "on-width2", "on-indexical", "hanoi", "cycle"]


@pytest.mark.parametrize("name", SKETCHES)
def test_bundled_sketches_roundtrip(name, blocks_domain):
    sk = parse_sketch(data_path(name + ".sketch").read_text())
    again = parse_sketch(print_sketch(sk))
    assert print_sketch(again) == print_sketch(sk)
    assert again.rules == sk.rules
    assert not errors(validate_sketch(sk))


@pytest.mark.parametrize("name", ["on.modules", "blocks.modules"])
def test_bundled_modules_roundtrip(name, blocks_domain):
    mods = parse_module_set(data_path(name).read_text(), blocks_domain)
    again = parse_module_set(mods.sexpr(), blocks_domain)
    assert again.sexpr() == mods.sexpr()
    for m in mods.modules:
        assert not errors(validate_sketch(m)), m.name


def test_rule_kinds(sketches):
    indexical = sketches["on-indexical"]
    kinds = [r.kind for r in indexical.rules]
    assert kinds[:8] == ["true", "true", "load", "load", "load", "true", "true", "true"]
    assert set(kinds[8:]) == {"value"}
    assert indexical.rules[2].load.concept == "n" and indexical.rules[2].load.reg == "r0"
    assert {f.name for f in indexical.register_features("r1")} == {"a", "t1"}
    assert sketches["on-width0"].plain and sketches["on-width0"].memory == ("m0",)


def test_load_effect_forms_agree():
    head = "(sketch :memory (m0 m1) :internal (m0) :registers (r0) :features ((concept c (primitive clear 0)) (concept t (some (primitive on 0 1) (register r0)))) :rules ({}))"
    bare = parse_sketch(head.format("(load-rule m0 ((gt c)) (load c r0) m1)"))
    listed = parse_sketch(head.format("(load-rule m0 ((gt c)) ((load c r0)) m1)"))
    assert bare.rules[0].load == listed.rules[0].load
    diags = validate_sketch(bare)
    assert any("(unk t)" in d.message for d in errors(diags))


def test_diagnostics():
    sk = parse_sketch("""(sketch :memory (m0 m1) :internal (m0) :registers (r0)
      :features ((bool h (nonempty (primitive holding 0))) (concept c (primitive clear 0)))
      :rules ((rule m0 () (h) m1)
              (rule m1 () () m0)
              (load-rule m0 () ((load c r0) (not h)) m1)
              (load-rule m1 ((gt c)) ((load c r0)) m0)))""")
    msgs = [str(d) for d in validate_sketch(sk)]
    assert any("r0" in m and "value rule at internal memory" in m for m in msgs)
    assert any("r3: internal (load) rule at external memory 'm1'" in m for m in msgs)
    assert any("may not carry effect (not h)" in m for m in msgs)
    assert any("warning" in m and "(gt c)" in m for m in msgs)


@pytest.mark.parametrize("text, fragment", [
    ("(sketch :features ((bool h (nonempty (primitive holding 0)))) :rules ((rule ((gt h)) ())))", "numerical"),
    ("(sketch :features ((num n (count top))) :rules ((rule (n) ())))", "Boolean"),
    ("(sketch :features ((num n (count top))) :rules ((rule () ((not n)))))", "Boolean"),
    ("(sketch :features () :rules ((rule (q) ())))", "undeclared"),
    ("(sketch :memory (m0) :features () :rules ((rule m0 () () m5)))", "undeclared memory"),
    ("(sketch :z ((bool h (nonempty top))) :features () :rules ((rule () (h))))", "not a tracked"),
    ("(sketch :memory (m0) :features ((concept c top)) :rules ((load-rule m0 () ((load c r3)) m0)))", "register"),
    ("(sketch :internal (m0) :features () :rules ())", "needs :memory"),
    ("(sketch :features () :rules ((frob)))", "plain sketch rules"),
])
def test_sketch_errors(text, fragment):
    with pytest.raises(ParseError) as e:
        parse_sketch(text)
    assert fragment in str(e.value)


def test_unknown_predicate_with_domain(blocks_domain):
    with pytest.raises(ParseError):
        parse_sketch("(sketch :features ((bool q (nonempty (primitive foo 0)))) :rules ())", blocks_domain)


MAIN = "(module main :memory (m0) :features () :z ((concept a top)) :rules ({}))"
CALLEE = "(module f :args ((concept x)) :memory (m0) :features () :rules ())"


@pytest.mark.parametrize("rule, extra, fragment", [
    ("(call m0 () g (a) m0)", CALLEE, "unknown module"),
    ("(call m0 () f (a a) m0)", CALLEE, "takes 1 arguments"),
    ("(call m0 () f (a) m0)", CALLEE.replace("concept x", "role x"), "expects a role"),
    ("(do m0 () fly (a) m0)", "", "unknown action schema"),
    ("(do m0 () stack (a) m0)", "", "takes 2 arguments"),
])
def test_module_set_errors(rule, extra, fragment, blocks_domain):
    main = MAIN.format(rule).replace(":z ((concept a top))", ":z ((concept a top) (role r (primitive on 0 1)))")
    with pytest.raises(ParseError) as e:
        parse_module_set(main + extra, blocks_domain)
    assert fragment in str(e.value)


def test_module_set_structure_errors():
    with pytest.raises(SketchError):
        parse_module_set(CALLEE)  # entry module with arguments
    with pytest.raises(SketchError):
        parse_module_set(MAIN.format("") + MAIN.format(""))
    with pytest.raises(ParseError):
        parse_module_set("(module m :features () :rules ())")  # no memory


def test_nested_sketch_module_form(blocks_domain):
    mods = parse_module_set("""(module main :z ((concept a top))
        (sketch :memory (m0 m1) :features () :rules ((do m0 () pickup (a) m1))))""", blocks_domain)
    assert mods.entry.rules[0].target == "pickup"


def test_effect_semantics():
    assert effect_holds(None, 3, 3) and not effect_holds(None, 3, 2)
    assert effect_holds("dec", 3, 2) and not effect_holds("dec", 3, 3)
    assert effect_holds("inc", 0, 1) and not effect_holds("inc", 1, 1)
    assert effect_holds("unk", 1, 0)
    assert effect_holds("true", None, True) and effect_holds("false", None, False)


def test_pair_compatibility_width0_sketch(sketches):
    sk = sketches["on-width0"]
    gp = bundled("on-3")  # b1 on x, y clear on the table
    ev = Evaluator(gp)
    r0, r1, r2, r3 = sk.rules
    assert satisfies(sk, r0.cond, ev, gp.init)
    s1 = apply(gp.init, gp.ground_action("unstack", ["b1", "x"]))
    assert pair_compatible(sk, r0, ev, gp.init, s1)
    assert not pair_compatible(sk, r1, ev, gp.init, s1)  # condition needs H
    # n is now 0 while b1 is held: no rule condition holds in s1
    assert not any(satisfies(sk, r.cond, ev, s1) for r in sk.rules)
    gp5 = bundled("on-5-holding")  # holding x, three blocks on y
    s = apply(gp5.init, gp5.ground_action("putdown", ["x"]))
    assert pair_compatible(sk, r1, Evaluator(gp5), gp5.init, s)
    s_bad = apply(gp5.init, gp5.ground_action("stack", ["x", "b3"]))  # raises n
    assert not pair_compatible(sk, r1, Evaluator(gp5), gp5.init, s_bad)
    with pytest.raises(ValueError):
        pair_compatible(sketches["on-indexical"], sketches["on-indexical"].rules[2], ev, gp.init, s1)
