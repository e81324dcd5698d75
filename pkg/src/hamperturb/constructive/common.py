"""Types shared by the construction pipelines."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields

import numpy as np

from ..graph import Graph
from ..oracle import certificate_problem
from ..permutation import (
    CycleStructure,
    FixedPermutation,
    LazyPermutation,
    Permutation,
    apply_permutation,
)


class ConstructionFailed(Exception):
    """A pipeline stage could not complete (the finite-n analogue of a whp event failing)."""

    def __init__(self, stage: str, detail: str = "", exposure_count: int = 0,
                 stats: dict | None = None):
        super().__init__(f"{stage}: {detail}" if detail else stage)
        self.stage = stage
        self.detail = detail
        self.exposure_count = exposure_count
        self.stats = stats or {}
        self.factor: CycleStructure | None = None

    def to_json(self) -> dict:
        return {"stage": self.stage, "detail": self.detail,
                "exposure_count": self.exposure_count}


@dataclass
class Params:
    """Pipeline knobs; ``None`` means "derive from n"."""

    L_override: int | None = None
    run_len: int | None = None
    retries: int = 3
    exposure_cap: int | None = None
    fallback: bool = False
    alpha: float = 0.3
    ell: int | None = None
    reruns: int = 3
    posa_budget: int = 1_000_000
    long_fraction: float = 0.1

    @classmethod
    def from_json(cls, doc: dict | None) -> "Params":
        doc = doc or {}
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(doc) - known)
        if unknown:
            raise ValueError(f"unknown parameter keys: {', '.join(unknown)}")
        return cls(**doc)

    def long_threshold(self, n: int) -> int:
        if self.L_override is not None:
            return int(self.L_override)
        return math.ceil(math.sqrt(n) * math.log(n) ** 2)

    def phase1_run(self, n: int) -> int:
        if self.run_len is not None:
            return int(self.run_len)
        return max(1, math.ceil(math.sqrt(n) * math.log(n)))

    def min_ell_guard(self) -> float:
        return 1000 / self.alpha ** 3


@dataclass
class Certificate:
    """A verified Hamilton cycle of ``G ∪ F`` as a cyclic vertex order."""

    order: list[int]
    factor: CycleStructure
    stats: dict = field(default_factory=dict)

    def to_json(self) -> list[int]:
        return list(self.order)


@dataclass
class PathState:
    """The growing path, kept as a list of F*-positions.

    Images of positions are read through the permutation ``lp``; ``ledger``
    records every exposure made on behalf of the construction.
    """

    path: list[int]
    lp: LazyPermutation
    ledger: list[tuple[int, str]] = field(default_factory=list)
    absorbed: list[int] = field(default_factory=list)
    stage: str = "init"

    @property
    def a(self) -> int:
        return self.lp.image(self.path[0])

    @property
    def b(self) -> int:
        return self.lp.image(self.path[-1])

    @property
    def exposed_count(self) -> int:
        return len(self.ledger)

    def expose(self, pos: int, tag: str) -> int:
        if self.lp.is_untouched(pos):
            self.ledger.append((pos, tag))
            return self.lp.expose_image(pos)
        return self.lp.image(pos)

    def fail(self, stage: str, detail: str = "", **stats) -> ConstructionFailed:
        return ConstructionFailed(stage, detail, self.exposed_count, stats)


def canonical_layout(lengths) -> CycleStructure:
    """F* with the given cycle lengths on consecutive blocks of positions."""
    cycles, start = [], 0
    for m in lengths:
        cycles.append(list(range(start, start + m)))
        start += m
    return CycleStructure(start, cycles)


def fixed_schedule(factor: CycleStructure, rng: np.random.Generator):
    """A fresh exposure schedule for a known factor.

    Each cycle of ``factor`` is rotated and possibly reflected at random, laid
    out on canonical blocks, and wrapped in a :class:`FixedPermutation` so the
    pipelines can "expose" it.  Returns ``(f_star, perm)``.
    """
    f_star = canonical_layout(len(c) for c in factor.cycles)
    images = np.empty(factor.n, dtype=np.int64)
    for block, cyc in zip(f_star.cycles, factor.cycles):
        c = list(cyc)
        if len(c) > 2 and rng.integers(2):
            c.reverse()
        shift = int(rng.integers(len(c)))
        images[block] = c[shift:] + c[:shift]
    return f_star, FixedPermutation(Permutation(images), rng)


def factor_graph(factor: CycleStructure) -> Graph:
    return factor.to_graph()


def finish(g: Graph, lp: LazyPermutation, f_star: CycleStructure, cyclic_positions,
           stats: dict) -> Certificate:
    """Expose everything, translate positions to vertices and verify."""
    pi = lp.expose_all()
    factor = apply_permutation(pi, f_star)
    order = pi.images[np.asarray(cyclic_positions, dtype=np.int64)].tolist()
    problem = certificate_problem(g.union(factor.to_graph()), order)
    if problem is not None:
        raise AssertionError(f"pipeline produced an invalid cycle: {problem}")
    return Certificate(order, factor, stats)


def reveal_factor(lp: LazyPermutation, f_star: CycleStructure) -> CycleStructure:
    return apply_permutation(lp.expose_all(), f_star)
