"""Ground truth at desk scale.

``verify_certificate`` is the zero-tolerance check every constructed cycle
goes through; ``is_hamiltonian_exact`` decides Hamiltonicity exactly by a
subset dynamic program; ``bipartite_witness`` is the one-sided
non-Hamiltonicity certificate for the complete bipartite lower-bound family.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import permutations
from typing import Sequence

import numpy as np

from .graph import Graph, count_components_within, _as_mask

EXACT_CAP = 20


class CapabilityError(ValueError):
    """Instance too large for the exact oracle."""


@dataclass
class OracleVerdict:
    hamiltonian: bool
    certificate: list[int] | None = None

    def to_json(self) -> dict:
        out = {"hamiltonian": self.hamiltonian}
        if self.certificate is not None:
            out["certificate"] = list(self.certificate)
        return out


def certificate_problem(h: Graph, cycle: Sequence[int]) -> str | None:
    """Why ``cycle`` is not a Hamilton cycle of ``h``, or None if it is."""
    try:
        order = np.asarray(cycle, dtype=np.int64)
    except (TypeError, ValueError):
        return "certificate is not a list of integers"
    if order.ndim != 1:
        return "certificate is not a flat vertex list"
    if len(order) != h.n:
        return f"certificate has {len(order)} vertices, graph has {h.n}"
    if h.n < 3:
        return "a Hamilton cycle needs at least 3 vertices"
    if order.min() < 0 or order.max() >= h.n:
        return "certificate mentions a vertex outside the graph"
    if len(np.unique(order)) != h.n:
        return "not a permutation"
    ok = h.has_edges(order, np.roll(order, -1))
    if not ok.all():
        i = int(np.flatnonzero(~ok)[0])
        return f"missing edge ({order[i]}, {order[(i + 1) % h.n]})"
    return None


def verify_certificate(h: Graph, cycle: Sequence[int]) -> bool:
    """True iff ``cycle`` lists every vertex once and consecutive pairs are edges."""
    return certificate_problem(h, cycle) is None


def is_hamiltonian_exact(h: Graph, cap: int = EXACT_CAP) -> OracleVerdict:
    """Exact Hamiltonicity by dynamic programming over vertex subsets.

    ``ends[mask]`` is the bitmask of vertices ``v`` such that some path
    starting at vertex 0 visits exactly ``mask`` and ends at ``v``.
    """
    n = h.n
    if n > cap:
        raise CapabilityError(f"exact oracle capped at n={cap}, got n={n}")
    if n < 3:
        return OracleVerdict(False)
    nbr = [0] * n
    for v in range(n):
        for w in h.neighbors(v).tolist():
            nbr[v] |= 1 << w
    full = (1 << n) - 1
    ends = [0] * (1 << n)
    ends[1] = 1
    for mask in range(3, full + 1, 2):
        reach = 0
        rest = mask & ~1
        while rest:
            low = rest & -rest
            v = low.bit_length() - 1
            if ends[mask ^ low] & nbr[v]:
                reach |= low
            rest ^= low
        ends[mask] = reach
    closing = ends[full] & nbr[0]
    if not closing:
        return OracleVerdict(False)
    # walk back-pointers from an end adjacent to 0
    v = (closing & -closing).bit_length() - 1
    mask = full
    path = [v]
    while mask != 1:
        prev = mask ^ (1 << v)
        cand = ends[prev] & nbr[v]
        u = (cand & -cand).bit_length() - 1
        path.append(u)
        mask, v = prev, u
    path.reverse()
    return OracleVerdict(True, path)


def is_hamiltonian_bruteforce(h: Graph) -> bool:
    """Enumerate all cyclic orders through vertex 0 (for tiny graphs only)."""
    n = h.n
    if n < 3:
        return False
    adj = h.adj
    for rest in permutations(range(1, n)):
        if rest[0] > rest[-1]:
            continue
        order = (0,) + rest
        if all(order[(i + 1) % n] in adj[order[i]] for i in range(n)):
            return True
    return False


def bipartite_witness(f, a) -> bool:
    """True iff ``f`` restricted to ``V \\ A`` has more than ``|A|`` components.

    A true value proves that ``G ∪ F`` has no Hamilton cycle for every ``G``
    whose edges all touch ``A``; a false value proves nothing.
    """
    inside_a = _as_mask(f.n, a)
    return count_components_within(f, ~inside_a) > int(inside_a.sum())
