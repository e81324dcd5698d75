"""Hamilton cycles in ``G ∪ F`` for a random C_l-factor F and linear minimum degree."""

from __future__ import annotations

import math

import numpy as np

from ..graph import Graph, min_degree
from ..oracle import certificate_problem
from ..permutation import CycleStructure
from .common import Certificate, ConstructionFailed, Params


def sample_cycle_factor(n: int, ell: int, rng: np.random.Generator) -> CycleStructure:
    """Uniformly relabelled disjoint union of ``n / ell`` cycles of length ``ell``."""
    if ell < 3 or n % ell:
        raise ValueError(f"need ell >= 3 dividing n, got n={n}, ell={ell}")
    perm = rng.permutation(n)
    return CycleStructure(n, perm.reshape(n // ell, ell).tolist())


def concatenate_cycle_factor(g: Graph, factor: CycleStructure, rng: np.random.Generator,
                             params: Params | None = None) -> Certificate:
    """Concatenate cycles through an auxiliary digraph, then absorb the rest.

    Every cycle gets a red vertex and an adjacent blue vertex; a cycle is
    walked blue to red.  A greedy directed path in the digraph "red of j is
    adjacent to blue of j'" gives a long starting path.  Each remaining cycle
    C is absorbed through a pair ``a b`` of consecutive unexposed path
    vertices with ``first ~ b`` and ``a ~ red(C)``:

        first .. a b .. end   becomes   blue(C) .. red(C) a .. first b .. end
    """
    params = params or Params()
    n = g.n
    lengths = set(factor.lengths)
    if len(lengths) != 1:
        raise ValueError("factor cycles must all have the same length")
    ell = lengths.pop()
    if params.ell is not None and params.ell != ell:
        raise ValueError(f"factor has cycles of length {ell}, params say {params.ell}")
    if ell < 3:
        raise ValueError("cycle length must be at least 3")
    stats = {"ell": ell, "below_guard": ell < params.min_ell_guard(),
             "min_degree_ratio": min_degree(g) / n}
    if len(factor.cycles) == 1:
        return Certificate(list(factor.cycles[0]), factor, dict(stats, absorbed=0))

    cycles = []
    for c in (factor.cycles[i] for i in rng.permutation(len(factor.cycles))):
        c = list(c)
        if rng.integers(2):
            c.reverse()
        shift = int(rng.integers(ell))
        cycles.append(c[shift:] + c[:shift])
    red = np.array([c[0] for c in cycles])
    blue = np.array([c[1] for c in cycles])
    exposed = np.zeros(n, dtype=bool)
    exposed[red] = exposed[blue] = True

    def walk(j: int) -> list[int]:
        return cycles[j][1:] + cycles[j][:1]

    used = np.zeros(len(cycles), dtype=bool)
    if ell > n / math.log(n) ** 2:
        chain = [0]
    else:
        target = math.ceil(params.alpha * n / (3 * ell))
        chain = [0]
        used[0] = True
        while len(chain) < target:
            out = np.flatnonzero(g.neighbor_mask(red[chain[-1]])[blue] & ~used)
            if not len(out):
                raise ConstructionFailed("digraph", f"greedy path stalled at {len(chain)} "
                                         f"of {target} cycles", int(exposed.sum()), stats)
            chain.append(int(out[0]))
            used[out[0]] = True
    used[chain] = True
    path: list[int] = []
    for j in chain:
        path.extend(walk(j))
    stats["chain"] = len(chain)

    def slots_of(seq: list[int]) -> list[tuple[int, int]]:
        out = []
        t = 0
        while t + 1 < len(seq):
            if not exposed[seq[t]] and not exposed[seq[t + 1]]:
                out.append((seq[t], seq[t + 1]))
                t += 2
            else:
                t += 1
        return out

    queue = slots_of(path)
    head = 0
    remaining = [j for j in range(len(cycles)) if not used[j]]
    tried = 0
    while remaining:
        if head >= len(queue):
            raise ConstructionFailed("pairs", f"{len(remaining)} cycles left, pairs exhausted",
                                     int(exposed.sum()), dict(stats, tried=tried))
        u, v = queue[head]
        head += 1
        tried += 1
        exposed[u] = exposed[v] = True
        where = {q: t for t, q in enumerate(path)}
        iu, iv = where[u], where[v]
        if abs(iu - iv) != 1:
            continue
        ia, ib = min(iu, iv), max(iu, iv)
        a, b = path[ia], path[ib]
        if not g.has_edge(path[0], b):
            continue
        hit = np.flatnonzero(g.neighbor_mask(a)[red[remaining]])
        if not len(hit):
            continue
        j = remaining.pop(int(hit[0]))
        path = walk(j) + path[ia::-1] + path[ib:]
        queue.extend(slots_of(cycles[j][2:]))
    # closing
    first, end = path[0], path[-1]
    if g.has_edge(first, end):
        order = path
    else:
        where = {q: t for t, q in enumerate(path)}
        order = None
        for u, v in queue[head:]:
            iu, iv = where[u], where[v]
            if abs(iu - iv) != 1:
                continue
            ia, ib = min(iu, iv), max(iu, iv)
            if g.has_edge(first, path[ib]) and g.has_edge(path[ia], end):
                order = path[: ia + 1] + path[ib:][::-1]
                break
        if order is None:
            raise ConstructionFailed("close", "no pair closes the path", int(exposed.sum()), stats)
    problem = certificate_problem(g.union(factor.to_graph()), order)
    if problem is not None:
        raise AssertionError(f"pipeline produced an invalid cycle: {problem}")
    return Certificate(order, factor, dict(stats, absorbed=len(cycles) - len(chain),
                                           pairs_tried=tried))
