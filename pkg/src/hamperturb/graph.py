"""Undirected simple graphs on the vertex set 0..n-1.

Graphs are immutable and stored as sorted adjacency arrays (CSR), which keeps
the memory footprint small enough for the desk-scale experiments (n up to a
few times 10^4 with degrees in the hundreds).  The complete bipartite
lower-bound family is represented implicitly so that it can be instantiated
at n = 10^6.
"""

from __future__ import annotations

import math
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components


class GraphError(ValueError):
    """Malformed graph input (bad vertex ids, self-loops, bad sizes)."""


def _edge_keys(n: int, us: np.ndarray, vs: np.ndarray) -> np.ndarray:
    lo = np.minimum(us, vs).astype(np.int64)
    hi = np.maximum(us, vs).astype(np.int64)
    return lo * n + hi


class Graph:
    """Undirected simple graph with sorted neighbour arrays.

    Use :func:`build_graph` (or :meth:`from_edges`) to construct one from an
    edge list; the raw constructor trusts its arguments.
    """

    def __init__(self, n: int, indptr: np.ndarray, indices: np.ndarray):
        self.n = int(n)
        self.indptr = indptr
        self.indices = indices

    # -- construction -------------------------------------------------

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[Sequence[int]]) -> "Graph":
        if n < 0:
            raise GraphError(f"vertex count must be non-negative, got {n}")
        arr = np.asarray(list(edges) if not isinstance(edges, np.ndarray) else edges,
                         dtype=np.int64)
        if arr.size == 0:
            arr = arr.reshape(0, 2)
        if arr.ndim != 2 or arr.shape[1] != 2:
            raise GraphError("edges must be vertex pairs")
        bad = (arr < 0) | (arr >= n)
        if bad.any():
            u, v = arr[bad.any(axis=1)][0]
            raise GraphError(f"edge ({u}, {v}) has a vertex outside 0..{n - 1}")
        loops = arr[:, 0] == arr[:, 1]
        if loops.any():
            raise GraphError(f"self-loop at vertex {arr[loops][0, 0]}")
        return cls._from_keys(n, np.unique(_edge_keys(n, arr[:, 0], arr[:, 1])))

    @classmethod
    def _from_keys(cls, n: int, keys: np.ndarray) -> "Graph":
        """Build from sorted unique keys ``u*n + v`` with ``u < v``."""
        u = keys // n if n else keys
        v = keys % n if n else keys
        src = np.concatenate([u, v])
        dst = np.concatenate([v, u])
        order = np.lexsort((dst, src))
        src, dst = src[order], dst[order]
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(src, minlength=n), out=indptr[1:])
        g = cls(n, indptr, dst.astype(np.int64))
        g.__dict__["edge_keys"] = keys
        return g

    # -- queries ------------------------------------------------------

    @property
    def num_edges(self) -> int:
        return len(self.indices) // 2

    def degree(self, v: int) -> int:
        return int(self.indptr[v + 1] - self.indptr[v])

    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    def neighbors(self, v: int) -> np.ndarray:
        return self.indices[self.indptr[v]:self.indptr[v + 1]]

    def neighbor_mask(self, v: int) -> np.ndarray:
        mask = np.zeros(self.n, dtype=bool)
        mask[self.neighbors(v)] = True
        return mask

    def has_edge(self, u: int, v: int) -> bool:
        row = self.neighbors(u)
        i = np.searchsorted(row, v)
        return bool(i < len(row) and row[i] == v)

    @cached_property
    def edge_keys(self) -> np.ndarray:
        src = np.repeat(np.arange(self.n, dtype=np.int64), self.degrees())
        keep = src < self.indices
        return np.sort(src[keep] * self.n + self.indices[keep])

    def has_edges(self, us, vs) -> np.ndarray:
        """Vectorised edge test for the pairs ``(us[i], vs[i])``."""
        us = np.asarray(us, dtype=np.int64)
        vs = np.asarray(vs, dtype=np.int64)
        keys = _edge_keys(self.n, us, vs)
        table = self.edge_keys
        pos = np.searchsorted(table, keys)
        pos[pos == len(table)] = 0
        found = table[pos] == keys if len(table) else np.zeros(len(keys), bool)
        return found & (us != vs)

    def edges(self) -> np.ndarray:
        """All edges as an ``(m, 2)`` array with ``u < v``, sorted."""
        keys = self.edge_keys
        return np.stack([keys // self.n, keys % self.n], axis=1) if self.n else \
            np.zeros((0, 2), dtype=np.int64)

    @cached_property
    def adj(self) -> tuple[frozenset, ...]:
        """Per-vertex neighbour sets (built on first use)."""
        return tuple(frozenset(self.neighbors(v).tolist()) for v in range(self.n))

    def union(self, other: "Graph") -> "Graph":
        if other.n != self.n:
            raise GraphError(f"cannot union graphs on {self.n} and {other.n} vertices")
        keys = np.union1d(self.edge_keys, other.edge_keys)
        return Graph._from_keys(self.n, keys)

    def add_edges(self, edges) -> "Graph":
        extra = Graph.from_edges(self.n, edges)
        return self.union(extra)

    def to_sparse(self) -> csr_matrix:
        data = np.ones(len(self.indices), dtype=np.int8)
        return csr_matrix((data, self.indices, self.indptr), shape=(self.n, self.n))

    def __repr__(self) -> str:
        return f"{type(self).__name__}(n={self.n}, m={self.num_edges})"

    def __eq__(self, other) -> bool:
        if not isinstance(other, Graph) or other.n != self.n:
            return NotImplemented
        return np.array_equal(self.edge_keys, other.edge_keys)

    __hash__ = None


class CompleteBipartiteGraph(Graph):
    """Complete bipartite graph with parts ``A = {0..a-1}`` and ``B`` = the rest.

    Adjacency is implicit; edge arrays are only materialised on request, which
    is refused beyond ``MATERIALISE_CAP`` edges.
    """

    MATERIALISE_CAP = 20_000_000

    def __init__(self, n: int, a_size: int):
        if not 0 <= a_size <= n:
            raise GraphError(f"part size {a_size} outside 0..{n}")
        self.n = int(n)
        self.a_size = int(a_size)

    @property
    def num_edges(self) -> int:
        return self.a_size * (self.n - self.a_size)

    def _materialise(self) -> Graph:
        if self.num_edges > self.MATERIALISE_CAP:
            raise GraphError(
                f"refusing to materialise {self.num_edges} edges of K_{{{self.a_size},"
                f"{self.n - self.a_size}}}")
        a = np.arange(self.a_size, dtype=np.int64)
        b = np.arange(self.a_size, self.n, dtype=np.int64)
        keys = (a[:, None] * self.n + b[None, :]).ravel()
        return Graph._from_keys(self.n, np.sort(keys))

    @cached_property
    def _csr(self) -> Graph:
        return self._materialise()

    @property
    def indptr(self):
        return self._csr.indptr

    @property
    def indices(self):
        return self._csr.indices

    def degree(self, v: int) -> int:
        return self.n - self.a_size if v < self.a_size else self.a_size

    def degrees(self) -> np.ndarray:
        deg = np.full(self.n, self.a_size, dtype=np.int64)
        deg[:self.a_size] = self.n - self.a_size
        return deg

    def neighbors(self, v: int) -> np.ndarray:
        if v < self.a_size:
            return np.arange(self.a_size, self.n, dtype=np.int64)
        return np.arange(self.a_size, dtype=np.int64)

    def neighbor_mask(self, v: int) -> np.ndarray:
        mask = np.zeros(self.n, dtype=bool)
        if v < self.a_size:
            mask[self.a_size:] = True
        else:
            mask[:self.a_size] = True
        return mask

    def has_edge(self, u: int, v: int) -> bool:
        return (u < self.a_size) != (v < self.a_size)

    def has_edges(self, us, vs) -> np.ndarray:
        us = np.asarray(us)
        vs = np.asarray(vs)
        return (us < self.a_size) != (vs < self.a_size)

    @cached_property
    def edge_keys(self) -> np.ndarray:
        return self._csr.edge_keys

    def edges(self) -> np.ndarray:
        return self._csr.edges()

    @cached_property
    def adj(self):
        return self._csr.adj

    def to_sparse(self):
        return self._csr.to_sparse()


# -- operations ---------------------------------------------------------


def build_graph(n: int, edges: Iterable[Sequence[int]]) -> Graph:
    """Graph on ``0..n-1`` with the deduplicated edge set ``edges``."""
    return Graph.from_edges(n, edges)


def min_degree(g: Graph) -> int:
    if g.n < 1:
        raise GraphError("minimum degree of the empty graph is undefined")
    return int(g.degrees().min())


def max_degree(g: Graph) -> int:
    if g.n < 1:
        raise GraphError("maximum degree of the empty graph is undefined")
    return int(g.degrees().max())


def _as_mask(n: int, vertices) -> np.ndarray:
    if isinstance(vertices, np.ndarray) and vertices.dtype == bool:
        return vertices
    mask = np.zeros(n, dtype=bool)
    idx = np.fromiter(vertices, dtype=np.int64) if not isinstance(vertices, np.ndarray) \
        else vertices.astype(np.int64)
    if idx.size and (idx.min() < 0 or idx.max() >= n):
        raise GraphError("vertex set is not contained in V(G)")
    mask[idx] = True
    return mask


def external_neighbourhood(g: Graph, s) -> set[int]:
    """Vertices outside ``s`` with at least one neighbour in ``s``."""
    inside = _as_mask(g.n, s)
    hit = np.zeros(g.n, dtype=bool)
    for u in np.flatnonzero(inside):
        hit[g.neighbors(int(u))] = True
    return set(np.flatnonzero(hit & ~inside).tolist())


def induced_delete(g: Graph, x) -> tuple[Graph, np.ndarray]:
    """The induced subgraph ``G - X``, relabelled contiguously.

    Returns the subgraph together with ``kept``, where ``kept[i]`` is the
    original id of new vertex ``i``.
    """
    removed = _as_mask(g.n, x)
    kept = np.flatnonzero(~removed)
    new_id = np.full(g.n, -1, dtype=np.int64)
    new_id[kept] = np.arange(len(kept))
    e = g.edges()
    e = e[~removed[e[:, 0]] & ~removed[e[:, 1]]]
    keys = np.sort(new_id[e[:, 0]] * len(kept) + new_id[e[:, 1]])
    return Graph._from_keys(len(kept), keys), kept


def count_components_within(f, b) -> int:
    """Number of connected components of ``f`` induced on the vertex set ``b``.

    ``f`` may be a :class:`Graph` or any object with ``n`` and ``cycles``
    (a 2-factor or cycle structure); for the latter the count is computed from
    edges and whole cycles inside ``b`` without building a graph.
    """
    inside = _as_mask(f.n, b)
    cycles = getattr(f, "cycles", None)
    if cycles is not None and not isinstance(f, Graph):
        comps = 0
        for cyc in cycles:
            c = np.asarray(cyc, dtype=np.int64)
            m = inside[c]
            k = int(m.sum())
            if k == 0:
                continue
            if k == len(c):
                comps += 1
                continue
            # arcs of a partially covered cycle = number of in->out transitions
            comps += int((m & ~np.roll(m, -1)).sum())
        return comps
    sub, _ = induced_delete(f, ~inside)
    if sub.n == 0:
        return 0
    count, _ = connected_components(sub.to_sparse(), directed=False)
    return int(count)


# -- instance families --------------------------------------------------


def threshold_degree(n: int) -> float:
    """The critical minimum degree sqrt(n ln n / 2)."""
    return math.sqrt(n * math.log(n) / 2)


def lower_bound_size(n: int, eps: float) -> int:
    return math.floor((1 - eps) * threshold_degree(n))


def lower_bound_graph(n: int, eps: float) -> tuple[CompleteBipartiteGraph, int]:
    """Complete bipartite graph with ``|A| = floor((1-eps) sqrt(n ln n / 2))``.

    ``A`` is the vertex range ``0..|A|-1``.  Returns ``(G, |A|)``.
    """
    if not 0 < eps < 1:
        raise GraphError(f"eps must lie in (0, 1), got {eps}")
    if n < 2:
        raise GraphError("lower-bound construction needs n >= 2")
    a = lower_bound_size(n, eps)
    if a < 1:
        raise GraphError(f"degenerate construction: |A| = 0 for n={n}, eps={eps}")
    return CompleteBipartiteGraph(n, a), a


def complete_graph(n: int) -> Graph:
    iu = np.triu_indices(n, k=1)
    return Graph._from_keys(n, np.sort(iu[0].astype(np.int64) * n + iu[1]))


def cycle_graph(n: int) -> Graph:
    v = np.arange(n)
    return Graph.from_edges(n, np.stack([v, (v + 1) % n], axis=1))


def path_graph(n: int) -> Graph:
    v = np.arange(n - 1)
    return Graph.from_edges(n, np.stack([v, v + 1], axis=1))


def complete_bipartite_graph(a: int, b: int) -> Graph:
    return CompleteBipartiteGraph(a + b, a)._materialise()


def petersen_graph() -> Graph:
    outer = [(i, (i + 1) % 5) for i in range(5)]
    spokes = [(i, i + 5) for i in range(5)]
    inner = [(5 + i, 5 + (i + 2) % 5) for i in range(5)]
    return build_graph(10, outer + spokes + inner)


def gnp_graph(n: int, p: float, rng: np.random.Generator) -> Graph:
    """Erdos-Renyi G(n, p), sampled by drawing the edge count then distinct pairs."""
    total = n * (n - 1) // 2
    m = int(rng.binomial(total, p)) if total else 0
    keys = np.empty(0, dtype=np.int64)
    while len(keys) < m:
        need = m - len(keys)
        u = rng.integers(0, n, size=need + need // 8 + 16)
        v = rng.integers(0, n, size=len(u))
        ok = u != v
        fresh = np.unique(_edge_keys(n, u[ok], v[ok]))
        fresh = np.setdiff1d(fresh, keys, assume_unique=True)
        # keep a uniformly random subset of the new pairs
        take = rng.permutation(len(fresh))[:need]
        keys = np.union1d(keys, fresh[take])
    return Graph._from_keys(n, keys)


def near_regular_graph(n: int, d: int, rng: np.random.Generator) -> Graph:
    """Random graph with minimum degree ``d`` and maximum degree ``d + O(sqrt d)``.

    Samples G(n, d/n) and then tops every vertex of degree below ``d`` up to
    ``d`` with uniformly random extra neighbours.
    """
    if not 0 <= d < n:
        raise GraphError(f"need 0 <= d < n, got d={d}, n={n}")
    g = gnp_graph(n, d / n, rng)
    deg = g.degrees().copy()
    added: dict[int, set[int]] = {}
    new_edges: list[tuple[int, int]] = []
    for v in np.flatnonzero(deg < d).tolist():
        need = d - deg[v]
        if need <= 0:
            continue
        taken = set(g.neighbors(v).tolist()) | added.get(v, set())
        taken.add(v)
        while need > 0:
            for w in rng.integers(0, n, size=2 * need + 8).tolist():
                if w in taken:
                    continue
                taken.add(w)
                added.setdefault(w, set()).add(v)
                new_edges.append((v, w))
                deg[v] += 1
                deg[w] += 1
                need -= 1
                if need == 0:
                    break
    if not new_edges:
        return g
    return g.add_edges(new_edges)


def clique_blowup_graph(n: int, delta: int) -> Graph:
    """Disjoint cliques of size ``delta + 1`` covering ``0..n-1``.

    Leftover vertices join the last clique, so the minimum degree is exactly
    ``delta`` whenever ``n >= delta + 1``.
    """
    size = delta + 1
    q = n // size
    if q <= 1:
        return complete_graph(n)
    bounds = [i * size for i in range(q)] + [n]
    keys = []
    for lo, hi in zip(bounds[:-1], bounds[1:]):
        iu = np.triu_indices(hi - lo, k=1)
        keys.append((iu[0] + lo).astype(np.int64) * n + (iu[1] + lo))
    return Graph._from_keys(n, np.sort(np.concatenate(keys)))


def random_graph_family(family: str, n: int, delta: int, rng: np.random.Generator) -> Graph:
    """Sample a graph with minimum degree ``delta`` from a named family."""
    if family == "near_regular":
        return near_regular_graph(n, delta, rng)
    if family == "clique_blowup":
        return clique_blowup_graph(n, delta)
    if family == "complete":
        return complete_graph(n)
    raise GraphError(f"unknown graph family {family!r}")
