"""Policy sketches with memory, registers and modules, run with serialized IW."""
from __future__ import annotations

from importlib import resources
from pathlib import Path

from .engines import (
    AugmentedState, EngineFailure, EngineResult, LoadChooser, enumerate_subproblems, sketch_width,
    siw_m, siw_r, siw_star_r,
)
from .features import Evaluator, parse_feature
from .pddl import Domain, Problem, parse_domain, parse_problem
from .search import bfs, iw, iw_k, measure_width
from .sketch import ModuleSet, Sketch, parse_module_set, parse_sketch, print_sketch, validate_sketch
from .strips import GroundProblem, ground
from .termination import build_policy_graph, is_terminating, sieve

__version__ = "0.1.0"


def data_path(name: str) -> Path:
    """Path of a bundled fixture (domains, instances, sketches, modules)."""
    return Path(str(resources.files(__package__) / "data" / name))


def load_problem(domain: str | Path, problem: str | Path | None = None, *, text: str | None = None) -> GroundProblem:
    """Parse and ground a domain file plus a problem file (or problem ``text``)."""
    dom = parse_domain(Path(domain).read_text())
    body = text if text is not None else Path(problem).read_text()
    return ground(parse_problem(body, dom))


__all__ = [
    "AugmentedState", "Domain", "EngineFailure", "EngineResult", "Evaluator", "GroundProblem", "LoadChooser",
    "ModuleSet", "Problem", "Sketch", "bfs", "build_policy_graph", "data_path", "enumerate_subproblems",
    "ground", "is_terminating", "iw", "iw_k", "load_problem", "measure_width", "parse_domain", "parse_feature",
    "parse_module_set", "parse_problem", "parse_sketch", "print_sketch", "sieve", "siw_m", "siw_r",
    "siw_star_r", "sketch_width", "validate_sketch",
]
