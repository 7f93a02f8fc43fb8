"""``sketchrun`` command line: solve, check, width, gen-blocks, gen-hanoi, validate.

Exit codes: 0 success, 1 engine failure / rejected / invalid plan, 2 input error.
File arguments that do not exist on disk are looked up among the bundled
fixtures, so ``sketchrun solve blocks-domain.pddl on-3.pddl on.modules`` works
from any directory.
"""
from __future__ import annotations

import argparse
import logging
import math
import sys
from dataclasses import dataclass
from pathlib import Path

from . import data_path
from .engines import DEFAULT_KMAX, EngineFailure, LoadChooser, sketch_width, siw_m, siw_r, siw_star_r, BoundExceeded
from .generators import GOAL_KINDS, gen_blocks, hanoi_problem
from .pddl import parse_domain, parse_problem
from .sexpr import ParseError, parse_all
from .sketch import errors, parse_module_set, parse_sketch, validate_sketch
from .strips import format_plan, ground, parse_plan
from .termination import build_policy_graph, sieve

ALGOS = ("siw_r", "siw_star", "siw_m")
log = logging.getLogger("sketchrun")


class InputError(Exception):
    pass


@dataclass
class RunConfig:
    algorithm: str
    k_max: int = DEFAULT_KMAX
    seed: int | None = None
    trace: Path | None = None
    plan: Path | None = None

    def __post_init__(self):
        if self.algorithm not in ALGOS:
            raise InputError(f"unknown algorithm {self.algorithm!r}")
        if self.k_max < 0:
            raise InputError("--kmax must be non-negative")


def _resolve(name: str) -> Path:
    p = Path(name)
    if p.exists():
        return p
    bundled = data_path(name)
    if bundled.exists():
        return bundled
    raise InputError(f"no such file: {name}")


def _read(name: str) -> str:
    return _resolve(name).read_text()


def _is_module_file(text: str) -> bool:
    exprs = parse_all(text)
    return bool(exprs) and isinstance(exprs[0], list) and bool(exprs[0]) and str(exprs[0][0]) == "module"


def _load(domain_file: str, problem_file: str):
    domain = parse_domain(_read(domain_file))
    return domain, ground(parse_problem(_read(problem_file), domain))


# --------------------------------------------------------------------------
# commands


def cmd_solve(args) -> int:
    domain, gp = _load(args.domain, args.problem)
    text = _read(args.policy)
    modules = _is_module_file(text)
    algo = args.algo or ("siw_m" if modules else None)
    if modules:
        if algo != "siw_m":
            raise InputError("module files run with --algo siw_m")
        program = parse_module_set(text, domain)
        for mod in program.modules:
            bad = errors(validate_sketch(mod))
            if bad:
                raise InputError(f"{mod.name}: {bad[0]}")
    else:
        program = parse_sketch(text, domain)
        bad = errors(validate_sketch(program))
        if bad:
            raise InputError(str(bad[0]))
        if algo is None:
            algo = "siw_r" if program.plain else "siw_star"
        if algo == "siw_m":
            raise InputError("--algo siw_m needs a module file")
    cfg = RunConfig(algo, args.kmax, args.seed, args.trace, args.plan)
    chooser = LoadChooser(cfg.seed)
    try:
        if algo == "siw_m":
            res = siw_m(gp, program, cfg.k_max, chooser)
        elif algo == "siw_star":
            res = siw_star_r(gp, program, cfg.k_max, chooser)
        else:
            if not program.plain:
                raise InputError("siw_r needs a sketch without memory states")
            res = siw_r(gp, program, cfg.k_max)
    except EngineFailure as e:
        if cfg.trace and e.result is not None:
            cfg.trace.write_text(e.result.trace_lines())
        print(f"FAILURE {e.kind}: {e.message}", file=sys.stderr)
        return 1
    check = gp.validate_plan(res.plan)
    if not check.valid or not gp.is_goal(gp.run_plan(res.plan)):
        # an engine bug, never a user error
        print(f"FAILURE invalid-plan: {check.reason} at step {check.failure_index}", file=sys.stderr)
        return 1
    plan_text = format_plan(res.plan)
    if cfg.plan:
        cfg.plan.write_text(plan_text)
    else:
        sys.stdout.write(plan_text)
    if cfg.trace:
        cfg.trace.write_text(res.trace_lines())
    print(f"solved: {len(res.plan)} actions, {len(res.episodes)} IW episodes, {res.expanded} expanded",
          file=sys.stderr)
    return 0


def _check_one(sk, title: str) -> bool:
    print(f"== {title}")
    diags = validate_sketch(sk)
    for d in diags:
        print(f"  {d}")
    if not diags:
        print("  well formed")
    internal = [m for m in sk.memory if sk.is_internal(m)]
    external = [m for m in sk.memory if not sk.is_internal(m)]
    print(f"  internal memory: {' '.join(internal) or '-'}")
    print(f"  external memory: {' '.join(external) or '-'}")
    pg = build_policy_graph(sk)
    res = sieve(pg)
    print(f"  policy graph: {pg.vertex_count} vertices, {pg.edge_count} edges")
    if res.accepted:
        print("  termination: accepted")
    else:
        print("  termination: rejected")
        print("  witness cycle: " + " -> ".join(res.witness))
        for u, v, k in res.witness_edges:
            print(f"    {k}: {u} -> {v}")
    return res.accepted and not errors(diags)


def cmd_check(args) -> int:
    text = _read(args.sketch)
    ok = True
    if _is_module_file(text):
        for mod in parse_module_set(text).modules:
            ok &= _check_one(mod, f"module {mod.name}")
    else:
        ok = _check_one(parse_sketch(text), args.sketch)
    return 0 if ok else 1


def cmd_width(args) -> int:
    domain, gp = _load(args.domain, args.problem)
    sk = parse_sketch(_read(args.sketch), domain)
    try:
        rep = sketch_width(gp, sk, args.kmax, bound=args.bound)
    except BoundExceeded as e:
        print(f"FAILURE bound-exceeded: {e}", file=sys.stderr)
        return 1
    rows = [(sub, w) for sub, w in rep.table if not gp.is_goal(sub.s)]
    print(f"{'#':>4} {'memory':<8} {'registers':<20} {'width':>5}")
    for i, (sub, w) in enumerate(rows):
        regs = ",".join(gp.objects[o] for o in sub.v) or "-"
        wtxt = ">" + str(args.kmax) if math.isinf(w) else str(w)
        print(f"{i:>4} {sub.m:<8} {regs:<20} {wtxt:>5}")
    best = max((w for _, w in rows), default=0)
    print(f"subproblems: {len(rows)}  max width: {'>' + str(args.kmax) if math.isinf(best) else best}")
    return 0


def cmd_gen_blocks(args) -> int:
    prob = gen_blocks(args.n, args.goal, args.seed)
    _emit(prob.to_pddl(), args.out)
    return 0


def cmd_gen_hanoi(args) -> int:
    _emit(hanoi_problem(args.n), args.out)
    return 0


def _emit(text: str, out: Path | None):
    if out:
        out.write_text(text)
    else:
        sys.stdout.write(text)


def cmd_validate(args) -> int:
    _, gp = _load(args.domain, args.problem)
    plan = parse_plan(_read(args.plan), gp)
    check = gp.validate_plan(plan)
    if not check.valid:
        print(f"invalid: step {check.failure_index}: {check.reason}")
        return 1
    print(f"valid: {len(plan)} actions reach the goal")
    return 0


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sketchrun", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging to stderr")
    sub = p.add_subparsers(dest="cmd", required=True)

    s = sub.add_parser("solve", help="run a sketch or module file on a problem")
    s.add_argument("domain")
    s.add_argument("problem")
    s.add_argument("policy", help="sketch (.sketch) or module (.modules) file")
    s.add_argument("--algo", choices=ALGOS, help="default: siw_m for modules, siw_r / siw_star for sketches")
    s.add_argument("--kmax", type=int, default=DEFAULT_KMAX)
    s.add_argument("--seed", type=int, help="pick load objects at random with this seed")
    s.add_argument("--trace", type=Path, help="write JSON-lines trace here")
    s.add_argument("--plan", type=Path, help="write the plan here instead of stdout")
    s.set_defaults(func=cmd_solve)

    c = sub.add_parser("check", help="diagnostics and termination test for a sketch or module file")
    c.add_argument("sketch")
    c.set_defaults(func=cmd_check)

    w = sub.add_parser("width", help="width of every subproblem a sketch induces on a problem")
    w.add_argument("domain")
    w.add_argument("problem")
    w.add_argument("sketch")
    w.add_argument("--kmax", type=int, default=DEFAULT_KMAX)
    w.add_argument("--bound", type=int, default=20_000, help="maximum closure size")
    w.set_defaults(func=cmd_width)

    g = sub.add_parser("gen-blocks", help="random Blocksworld problem")
    g.add_argument("n", type=int)
    g.add_argument("--goal", choices=GOAL_KINDS, default="on")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", type=Path)
    g.set_defaults(func=cmd_gen_blocks)

    h = sub.add_parser("gen-hanoi", help="Towers of Hanoi problem with n disks")
    h.add_argument("n", type=int)
    h.add_argument("--out", type=Path)
    h.set_defaults(func=cmd_gen_hanoi)

    v = sub.add_parser("validate", help="check a plan against a problem")
    v.add_argument("domain")
    v.add_argument("problem")
    v.add_argument("plan")
    v.set_defaults(func=cmd_validate)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        return args.func(args)
    except (InputError, ParseError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
