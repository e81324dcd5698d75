"""Rotation-extension search for Hamilton cycles (practical fallback solver)."""

from __future__ import annotations

import math

import numpy as np

from ..graph import Graph
from ..oracle import certificate_problem
from .common import Certificate, ConstructionFailed


def posa_fallback(h: Graph, rng: np.random.Generator, budget: int = 1_000_000) -> Certificate:
    """Search for a Hamilton cycle of ``h`` by Posa rotations with random restarts.

    Each step either extends the path at its end, closes it, rotates it at a
    random neighbour of the end, or (rarely) flips it end for end.  A restart
    from a random vertex happens when the longest path has not grown for a
    while.  Failure is not a proof that ``h`` is non-Hamiltonian.
    """
    n = h.n
    if n < 3:
        raise ConstructionFailed("posa", "fewer than 3 vertices")
    nbrs = [h.neighbors(v).tolist() for v in range(n)]
    if min(len(a) for a in nbrs) < 2:
        raise ConstructionFailed("posa", "a vertex has degree below 2")
    patience = max(100, 4 * n * math.ceil(math.log(n)))
    steps = 0
    restarts = 0
    while steps < budget:
        start = int(rng.integers(n))
        path = [start]
        pos = np.full(n, -1, dtype=np.int64)
        pos[start] = 0
        best, stale = 1, 0
        while steps < budget and stale < patience:
            steps += 1
            end = path[-1]
            options = nbrs[end]
            fresh = [w for w in options if pos[w] < 0]
            if fresh:
                w = fresh[int(rng.integers(len(fresh)))]
                pos[w] = len(path)
                path.append(w)
            elif len(path) == n and pos[path[0]] == 0 and path[0] in options:
                problem = certificate_problem(h, path)
                assert problem is None, problem
                return Certificate(path, None, {"steps": steps, "restarts": restarts})
            elif rng.random() < 0.05:
                path.reverse()
                pos[path] = np.arange(len(path))
            else:
                w = options[int(rng.integers(len(options)))]
                i = int(pos[w])
                if i == len(path) - 2:
                    continue
                path[i + 1:] = path[:i:-1]
                pos[path[i + 1:]] = np.arange(i + 1, len(path))
            if len(path) > best:
                best, stale = len(path), 0
            else:
                stale += 1
        restarts += 1
    raise ConstructionFailed("posa", f"no Hamilton cycle within {budget} steps",
                             stats={"restarts": restarts})
