"""Problem generators for Blocksworld (Q_on, Q_tower, Q_blocks) and Towers of Hanoi."""
from __future__ import annotations

import random
from dataclasses import dataclass, field

GOAL_KINDS = ("on", "tower", "arbitrary")


@dataclass
class BlocksState:
    towers: list[list[str]]  # each tower bottom to top
    held: str | None = None

    def atoms(self) -> list[str]:
        out = []
        for t in self.towers:
            out.append(f"(ontable {t[0]})")
            for below, above in zip(t, t[1:]):
                out.append(f"(on {above} {below})")
            out.append(f"(clear {t[-1]})")
        out.append(f"(holding {self.held})" if self.held else "(handempty)")
        return out


@dataclass
class BlocksProblem:
    name: str
    blocks: list[str]
    init: BlocksState
    goal: list[str] = field(default_factory=list)

    def to_pddl(self) -> str:
        init = "\n    ".join(self.init.atoms())
        goal = "\n    ".join(self.goal)
        return (
            f"(define (problem {self.name})\n"
            f"  (:domain blocksworld)\n"
            f"  (:objects {' '.join(self.blocks)})\n"
            f"  (:init\n    {init})\n"
            f"  (:goal (and\n    {goal})))\n"
        )


def random_towers(blocks: list[str], rng: random.Random) -> list[list[str]]:
    order = list(blocks)
    rng.shuffle(order)
    towers: list[list[str]] = []
    for b in order:
        if not towers or rng.random() < 0.4:
            towers.append([b])
        else:
            rng.choice(towers).append(b)
    return towers


def random_state(blocks: list[str], rng: random.Random, hold_prob: float = 0.25) -> BlocksState:
    rest = list(blocks)
    held = None
    if rest and rng.random() < hold_prob:
        held = rng.choice(rest)
        rest.remove(held)
    return BlocksState(random_towers(rest, rng) if rest else [], held)


def tower_goal(towers: list[list[str]]) -> list[str]:
    goal = []
    for t in towers:
        goal.append(f"(ontable {t[0]})")
        goal.extend(f"(on {above} {below})" for below, above in zip(t, t[1:]))
    return goal


def gen_blocks(n: int, kind: str = "on", seed: int = 0, hold_prob: float = 0.25) -> BlocksProblem:
    """Random Blocksworld instance with ``n`` blocks named b1..bn.

    ``on``: goal on(x, y) for two distinct random blocks; ``tower``: one
    tower of all blocks; ``arbitrary``: random target towers.
    """
    if n < 1:
        raise ValueError("need at least one block")
    if kind not in GOAL_KINDS:
        raise ValueError(f"goal kind must be one of {GOAL_KINDS}")
    rng = random.Random(f"{kind}:{n}:{seed}")
    blocks = [f"b{i}" for i in range(1, n + 1)]
    init = random_state(blocks, rng, hold_prob)
    if kind == "on":
        if n < 2:
            raise ValueError("an on(x, y) goal needs two blocks")
        x, y = rng.sample(blocks, 2)
        goal = [f"(on {x} {y})"]
    elif kind == "tower":
        order = list(blocks)
        rng.shuffle(order)
        goal = tower_goal([order])
    else:
        goal = tower_goal(random_towers(blocks, rng))
    return BlocksProblem(f"blocks-{kind}-{n}-{seed}", blocks, init, goal)


def q_on_tower(n: int) -> BlocksProblem:
    """Q_on instance with x at the bottom of a tower of n-1 blocks and y on the table."""
    if n < 2:
        raise ValueError("need at least two blocks")
    above = [f"b{i}" for i in range(1, n - 1)]
    towers = [["x"] + above, ["y"]]
    return BlocksProblem(f"on-tower-{n}", ["x", "y"] + above, BlocksState(towers), ["(on x y)"])


def hanoi_problem(n: int) -> str:
    """n disks d1 (smallest) .. dn stacked on peg1; move them all to peg3."""
    if n < 1:
        raise ValueError("need at least one disk")
    disks = [f"d{i}" for i in range(1, n + 1)]
    pegs = ["peg1", "peg2", "peg3"]
    init = [f"(disk {d})" for d in disks]
    for i, d in enumerate(disks):
        init += [f"(smaller {d} {e})" for e in disks[i + 1:]]
        init += [f"(smaller {d} {p})" for p in pegs]
    below = disks[1:] + ["peg1"]
    init += [f"(on {d} {b})" for d, b in zip(disks, below)]
    init += ["(clear d1)", "(clear peg2)", "(clear peg3)"]
    goal = [f"(on {d} {b})" for d, b in zip(disks, disks[1:] + ["peg3"])]
    body = "\n    ".join(init)
    goals = "\n    ".join(goal)
    return (
        f"(define (problem hanoi-{n})\n"
        f"  (:domain hanoi)\n"
        f"  (:objects {' '.join(disks + pegs)})\n"
        f"  (:init\n    {body})\n"
        f"  (:goal (and\n    {goals})))\n"
    )
