"""Absorption through special vertex sequences, for sparse near-regular G.

The longest cycle C_1 is cut into a path P_1 and k disjoint intervals are
reserved on it.  Step s absorbs cycle C_{s+1} (or closes the cycle when
s = k) by finding, inside interval I_s, vertices u_1 < ... < u_l with

    x ~ u_1^+,   u_j ~ u_{j+1}^+,   y ~ u_l

where ``x`` is the current path start and ``v^+`` is the successor of
``v`` in the interval order.  The search exposes interval vertices piece by
piece and grows the candidate set S_i geometrically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..graph import Graph
from ..permutation import CycleStructure, LazyPermutation, sample_factor
from .common import (
    Certificate,
    ConstructionFailed,
    Params,
    canonical_layout,
    finish,
    fixed_schedule,
    reveal_factor,
)


@dataclass
class SpecialSequence:
    """``u_1 < ... < u_l`` inside an ordered interval, with their successors."""

    indices: list[int]
    vertices: list[int]
    successors: list[int]
    x: int
    y: int
    stats: dict = field(default_factory=dict)

    @property
    def length(self) -> int:
        return len(self.indices)

    def to_json(self) -> dict:
        return {"indices": self.indices, "vertices": self.vertices,
                "successors": self.successors, "x": self.x, "y": self.y}


def level_cap(n: int) -> int:
    """Sequences must be strictly shorter than ceil(ln n)."""
    return math.ceil(math.log(n))


def check_special_sequence(g: Graph, seq: SpecialSequence, interval=None) -> str | None:
    """Audit a special sequence by its definition; returns a reason or None."""
    ell = seq.length
    if ell == 0:
        return "empty sequence"
    if ell >= level_cap(g.n):
        return f"length {ell} not below ceil(ln n) = {level_cap(g.n)}"
    if any(b <= a for a, b in zip(seq.indices, seq.indices[1:])):
        return "indices not increasing"
    if interval is not None:
        vals = [int(interval[i]) for i in seq.indices]
        nxt = [int(interval[i + 1]) for i in seq.indices]
        if vals != list(seq.vertices) or nxt != list(seq.successors):
            return "vertices disagree with the interval"
    if not g.has_edge(seq.x, seq.successors[0]):
        return "x is not adjacent to u_1^+"
    for j in range(ell - 1):
        if not g.has_edge(seq.vertices[j], seq.successors[j + 1]):
            return f"u_{j + 1} is not adjacent to u_{j + 2}^+"
    if not g.has_edge(seq.y, seq.vertices[-1]):
        return "y is not adjacent to u_l"
    return None


def _take(interval, idx: np.ndarray) -> np.ndarray:
    if hasattr(interval, "take"):
        return interval.take(idx)
    return np.asarray(interval, dtype=np.int64)[idx]


def find_special_sequence(g: Graph, interval, x: int, y: int,
                          pieces: int | None = None) -> SpecialSequence:
    """Staged search for a special sequence from ``x`` to ``y`` in ``interval``.

    ``interval`` is any ordered sequence of vertices; objects with a ``take``
    method are read only where the search looks, so a lazily exposed
    interval is exposed piece by piece.  The interval is cut into ``pieces``
    blocks J_1, J_2, ... of equal even size, each read as (predecessor,
    successor) pairs.  S_1 is the set of successors in J_1 adjacent to x;
    S_{i+1} is the set of successors in J_{i+1} adjacent to some predecessor
    of S_i.  After each level the predecessors are probed for a neighbour of
    y.  The search fails when S empties, when it shrinks before reaching
    1/32 of its block, or when the level cap is hit.
    """
    n = g.n
    m = len(interval)
    cap = level_cap(n)
    p = min(pieces or cap, m // 2)
    width = 2 * (m // (2 * p)) if p else 0
    if width < 2:
        raise ConstructionFailed("special", f"interval of {m} vertices is too short", 0,
                                 {"level": 0})
    max_level = min(p, cap - 1)
    read = 0

    def succ_idx(piece: int) -> np.ndarray:
        return piece * width + 1 + 2 * np.arange(width // 2)

    # level 1: successors adjacent to x
    t_idx = succ_idx(0)
    t_val = _take(interval, t_idx)
    read += len(t_idx)
    keep = g.neighbor_mask(x)[t_val]
    s_idx = t_idx[keep]
    back: list[dict[int, int]] = []  # per level: successor index -> predecessor index one level down
    sizes = [int(len(s_idx))]
    y_mask = g.neighbor_mask(y)
    for level in range(1, max_level + 1):
        if len(s_idx) == 0:
            raise ConstructionFailed("special", f"candidate set empty at level {level}",
                                     read, {"level": level, "sizes": sizes})
        pred_idx = s_idx - 1
        pred_val = _take(interval, pred_idx)
        read += len(pred_idx)
        hits = np.flatnonzero(y_mask[pred_val])
        if len(hits):
            last = int(pred_idx[hits[0]])
            chain = [last]
            for bp in reversed(back):
                chain.append(bp[chain[-1] + 1])
            chain.reverse()
            verts = _take(interval, np.asarray(chain)).tolist()
            succs = _take(interval, np.asarray(chain) + 1).tolist()
            return SpecialSequence(chain, verts, succs, x, y,
                                   {"level": level, "sizes": sizes, "read": read})
        if level == max_level:
            break
        t_idx = succ_idx(level)
        t_val = _take(interval, t_idx)
        read += len(t_idx)
        owner = np.full(len(t_idx), -1, dtype=np.int64)
        for u_i, u in zip(pred_idx.tolist(), pred_val.tolist()):
            free = owner < 0
            if not free.any():
                break
            adj = g.neighbor_mask(u)[t_val] & free
            owner[adj] = u_i
        got = owner >= 0
        next_idx = t_idx[got]
        saturated = len(s_idx) * 32 >= len(t_idx)
        if len(next_idx) < max(1, len(s_idx)) and not saturated:
            raise ConstructionFailed("special", f"growth stalled at level {level}", read,
                                     {"level": level, "sizes": sizes + [int(len(next_idx))]})
        back.append(dict(zip(next_idx.tolist(), owner[got].tolist())))
        s_idx = next_idx
        sizes.append(int(len(s_idx)))
    raise ConstructionFailed("special", f"no neighbour of y within {max_level} levels",
                             read, {"level": max_level, "sizes": sizes})


class _ExposingInterval:
    """A run of F*-positions whose images are exposed when first read."""

    def __init__(self, lp: LazyPermutation, positions: list[int]):
        self.lp = lp
        self.positions = np.asarray(positions, dtype=np.int64)
        self.read = 0

    def __len__(self) -> int:
        return len(self.positions)

    def __getitem__(self, i: int) -> int:
        return int(self.take(np.asarray([i]))[0])

    def take(self, idx) -> np.ndarray:
        out = []
        for q in self.positions[np.asarray(idx, dtype=np.int64)].tolist():
            if self.lp.is_untouched(q):
                self.lp.expose_image(q)
                self.read += 1
            out.append(self.lp.image(q))
        return np.asarray(out, dtype=np.int64)


def plan_intervals(p1_len: int, k: int, n: int) -> list[range]:
    """Index ranges of I_1..I_k on P_1 (indices into P_1), or raise."""
    need = 2 * k * math.ceil(n / (2 * k * math.ceil(math.log(n))))
    size = p1_len // (2 * k)
    if p1_len < need or size < 2:
        raise ConstructionFailed("intervals", f"path of {p1_len} vertices cannot host {k} "
                                 f"intervals (needs {need})", 0, {"k": k})
    stride = (p1_len - 1) // k
    return [range(1 + s * stride, 1 + s * stride + size) for s in range(k)]


def reroute(path: list[int], cut: list[int]) -> list[int]:
    """Reorder ``path`` through the special edges at path indices ``cut`` (u_1..u_l).

    The result starts at u_l and ends at the old path end: segments between
    consecutive u's are walked backwards for j = l-1, l-3, ... and then
    forwards for the other parity, followed by the tail after u_l.
    """
    ell = len(cut)
    segs = [path[: cut[0] + 1]] + [path[cut[j] + 1: cut[j + 1] + 1] for j in range(ell - 1)]
    body = []
    for j in range(ell - 1, -1, -2):
        body.extend(reversed(segs[j]))
    for j in range(ell % 2, ell - 1, 2):
        body.extend(segs[j])
    body.extend(path[cut[-1] + 1:])
    return body


def _run_once(g: Graph, lp: LazyPermutation, f_star: CycleStructure, params: Params) -> Certificate:
    n = g.n
    order = sorted(range(len(f_star.cycles)), key=lambda c: -len(f_star.cycles[c]))
    first = f_star.cycles[order[0]]
    if len(first) < params.long_fraction * n:
        raise ConstructionFailed("no-long-cycle", f"longest cycle {len(first)} < "
                                 f"{params.long_fraction} n", 0, {"longest": len(first)})
    cycles = [f_star.cycles[c] for c in order]
    k = len(cycles)
    if k == 1:
        return finish(g, lp, f_star, first, {"k": 1, "ells": [], "sequences": []})
    p1 = list(first)
    intervals = plan_intervals(len(p1), k, n)
    path = list(p1)
    seqs: list[SpecialSequence] = []
    read = 0
    for s in range(1, k + 1):
        x_pos = path[0]
        x = lp.image(x_pos) if not lp.is_untouched(x_pos) else lp.expose_image(x_pos)
        if s < k:
            y_pos = cycles[s][0]
        else:
            y_pos = path[-1]
        y = lp.image(y_pos) if not lp.is_untouched(y_pos) else lp.expose_image(y_pos)
        offset = len(path) - len(p1)
        view = _ExposingInterval(lp, [p1[t] for t in intervals[s - 1]])
        try:
            seq = find_special_sequence(g, view, x, y)
        except ConstructionFailed as exc:
            exc.stats.update(step=s, k=k, ells=[q.length for q in seqs],
                             sequences=[q.to_json() for q in seqs])
            raise
        read += view.read
        seqs.append(seq)
        cut = [offset + intervals[s - 1][0] + i for i in seq.indices]
        body = reroute(path, cut)
        if s < k:
            cyc = cycles[s]
            path = cyc[::-1] + body
        else:
            path = body
    stats = {"k": k, "ells": [q.length for q in seqs],
             "sequences": [q.to_json() for q in seqs], "interval_reads": read}
    return finish(g, lp, f_star, path, stats)


def construct_hamilton_regular(g: Graph, factor: CycleStructure | None,
                               rng: np.random.Generator, params: Params | None = None, *,
                               model: str = "g_n_2") -> Certificate:
    """Hamilton cycle of ``G ∪ F`` by special-sequence absorption.

    With ``factor=None`` the cycle type is sampled from ``model`` and F is
    exposed lazily (one attempt).  With a given factor, exposure schedules
    are randomised by rotating and reflecting its cycles; ``params.reruns``
    extra schedules are tried before failing.
    """
    params = params or Params()
    if factor is None:
        f_star = canonical_layout(sample_factor(g.n, model, rng).lengths)
        lp = LazyPermutation(g.n, rng)
        try:
            cert = _run_once(g, lp, f_star, params)
        except ConstructionFailed as exc:
            exc.factor = reveal_factor(lp, f_star)
            raise
        cert.stats.update(mode="lazy", attempts=1)
        return cert
    if factor.n != g.n:
        raise ValueError(f"factor on {factor.n} vertices, graph on {g.n}")
    if len(factor.cycles) == 1 and factor.n >= 3:
        return Certificate(list(factor.cycles[0]), factor, {"k": 1, "ells": [],
                                                            "mode": "fixed", "attempts": 0})
    last = None
    for attempt in range(1 + params.reruns):
        f_star, lp = fixed_schedule(factor, rng)
        try:
            cert = _run_once(g, lp, f_star, params)
        except ConstructionFailed as exc:
            last = exc
            if exc.stage in ("no-long-cycle", "intervals"):
                break
            continue
        cert.factor = factor
        cert.stats.update(mode="fixed", attempts=attempt + 1)
        return cert
    last.factor = factor
    raise last
