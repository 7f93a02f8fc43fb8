import dataclasses
from collections import deque

import pytest
from hypothesis import HealthCheck, settings

from sketchrun import data_path, load_problem, parse_domain, parse_module_set, parse_sketch
from sketchrun.generators import gen_blocks, hanoi_problem

settings.register_profile("repo", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("repo")

BLOCKS = data_path("blocks-domain.pddl")
HANOI = data_path("hanoi-domain.pddl")


def blocks_problem(text):
    return load_problem(BLOCKS, text=text)


def hanoi(n):
    return load_problem(HANOI, text=hanoi_problem(n))


def q_instances(kind="on", count=50, lo=3, hi=8):
    """The seeded instance set shared by the acceptance checks."""
    span = hi - lo + 1
    return [gen_blocks(lo + i % span, kind, seed=i) for i in range(count)]


def all_states(gp):
    """Every state reachable from the initial one, sorted."""
    seen = {gp.init}
    queue = deque([gp.init])
    while queue:
        s = queue.popleft()
        for _, s2 in gp.successors(s):
            if s2 not in seen:
                seen.add(s2)
                queue.append(s2)
    return sorted(seen)


def restart(gp, s):
    """The same grounded problem with a different initial state."""
    return dataclasses.replace(gp, init=s)


@pytest.fixture(scope="session")
def blocks_domain():
    return parse_domain(BLOCKS.read_text())


@pytest.fixture(scope="session")
def sketches():
    names = ["on-width0", "on-width2", "on-indexical", "hanoi", "cycle"]
    return {n: parse_sketch(data_path(n + ".sketch").read_text()) for n in names}


@pytest.fixture(scope="session")
def modules(blocks_domain):
    return {
        "on": parse_module_set(data_path("on.modules").read_text(), blocks_domain),
        "blocks": parse_module_set(data_path("blocks.modules").read_text(), blocks_domain),
    }


def bundled(name):
    dom = HANOI if name.startswith("hanoi") else BLOCKS
    return load_problem(dom, data_path(name + ".pddl"))


# acceptance verdict lines, echoed once at the end of the run
VERDICTS: list[str] = []


def report(criterion: int, ok: bool, detail: str) -> bool:
    line = f"{'PASS' if ok else 'FAIL'} criterion {criterion}: {detail}"
    VERDICTS.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if VERDICTS:
        terminalreporter.section("acceptance")
        for line in VERDICTS:
            terminalreporter.write_line(line)
