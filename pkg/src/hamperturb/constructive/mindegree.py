"""Two-phase absorption for ``G ∪ F`` when ``δ(G)`` is above sqrt(n ln n / 2).

``F = π(F*)`` where ``F*`` is a fixed 2-factor (positions) and ``π`` is
exposed lazily.  Phase 1 grows a path from a seed cycle by splicing in every
long cycle through a G-neighbour of the current end, exposing short runs.
Phase 2 absorbs the remaining short cycles one by one through good pairs on
the Phase-1 path, whose orientation is exposed only when needed.
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
    PathState,
    canonical_layout,
    finish,
    fixed_schedule,
    reveal_factor,
)


@dataclass(frozen=True)
class GoodPair:
    """Ordered vertex pair ``(x, y)`` sitting on the P_0 edge ``slot``.

    ``slot`` holds the two P_0 positions in P_0 order; which of them carries
    ``x`` stays hidden until the pair's order is exposed.
    """

    slot: tuple[int, int]
    x: int
    y: int


@dataclass
class GoodPairTable:
    pairs: dict[int, list[GoodPair]]
    ends: list[int]          # b_0, ..., b_k (vertices)
    targets: list[int]       # a_1, ..., a_{k+1} (vertices)
    raw_counts: dict[int, int]
    slot_index: dict[tuple[int, int], int] = field(default_factory=dict)
    matching: str = "window"

    @property
    def steps(self) -> range:
        return range(1, len(self.targets) + 1)

    def slots(self) -> set[tuple[int, int]]:
        return {p.slot for ps in self.pairs.values() for p in ps}

    def twins(self, i: int) -> list[tuple[int, int]]:
        """Slots where both orders are i-good, in P_0 order."""
        seen: dict[tuple[int, int], set] = {}
        for p in self.pairs[i]:
            seen.setdefault(p.slot, set()).add((p.x, p.y))
        out = [s for s, xs in seen.items() if len(xs) == 2]
        return sorted(out, key=self.slot_index.__getitem__)


@dataclass
class TwinAssignment:
    assign: dict[tuple[int, int], int]

    @property
    def steps(self) -> set[int]:
        return set(self.assign.values())

    def slot_for(self, i: int) -> tuple[int, int] | None:
        for slot, j in self.assign.items():
            if j == i:
                return slot
        return None


# -- phase 1 -------------------------------------------------------------------


def _seed_cycle(f_star: CycleStructure) -> int:
    lengths = [len(c) for c in f_star.cycles]
    return lengths.index(max(lengths))


def start_path(lp: LazyPermutation, f_star: CycleStructure) -> PathState:
    """Expose the image of one vertex of the longest F*-cycle and follow that cycle."""
    cid = _seed_cycle(f_star)
    cyc = f_star.cycles[cid]
    state = PathState(path=cyc[1:] + cyc[:1], lp=lp, absorbed=[cid], stage="seed")
    state.expose(cyc[0], "seed")
    return state


def absorb_long_cycles(g: Graph, lp: LazyPermutation, f_star: CycleStructure, L: int,
                       run_len: int, retries: int = 3,
                       state: PathState | None = None) -> PathState:
    """Phase 1: splice every F-cycle of length >= L into the path.

    For each long cycle, runs of ``run_len`` consecutive positions are exposed
    (at most ``retries`` runs) until one image is a G-neighbour of the current
    end; the cycle is then entered there and walked in the direction whose
    final vertex is already exposed.
    """
    if state is None:
        state = start_path(lp, f_star)
    state.stage = "phase1"
    long_ids = [cid for cid, c in enumerate(f_star.cycles)
                if len(c) >= L and cid not in state.absorbed]
    for cid in long_ids:
        cyc = f_star.cycles[cid]
        m = len(cyc)
        nb = g.neighbor_mask(state.b)
        upto, hit = 0, None
        for _ in range(retries):
            if upto >= m:
                break
            length = min(run_len, m - upto)
            values = lp.expose_run(f_star, cid, upto, length)
            state.ledger.extend((cyc[upto + t], "phase1") for t in range(length))
            for t, v in enumerate(values):
                if nb[v]:
                    hit = upto + t
                    break
            upto += length
            if hit is not None:
                break
        if hit is None:
            raise state.fail("phase1", f"cycle {cid}: no neighbour of the path end "
                             f"among {upto} exposed vertices", cycle=cid)
        if hit + 1 < upto:
            seg = [cyc[(hit - s) % m] for s in range(m)]
        else:
            seg = [cyc[(hit + s) % m] for s in range(m)]
            state.expose(seg[-1], "phase1")
        state.path.extend(seg)
        state.absorbed.append(cid)
    return state


# -- preparation for phase 2 ------------------------------------------------------


def expose_anchors(state: PathState, f_star: CycleStructure) -> list[tuple[int, int]]:
    """Expose two consecutive positions ``(a_i, b_i)`` on every short cycle and the path start."""
    state.stage = "anchors"
    anchors = []
    for cid, cyc in enumerate(f_star.cycles):
        if cid in state.absorbed:
            continue
        a_pos, b_pos = cyc[0], cyc[1 % len(cyc)]
        state.expose(a_pos, "anchor")
        state.expose(b_pos, "anchor")
        anchors.append((a_pos, b_pos))
    state.expose(state.path[0], "anchor")
    return anchors


def isolation_survival(g: Graph, lp: LazyPermutation, ends: list[int],
                       targets: list[int]) -> float:
    """Chance that a fresh P_0 edge is not disqualified by one neighbouring edge.

    Computed from the unused values only, i.e. before P_0 is revealed.  With
    ``q`` the chance that a fresh edge is good for some step in some order,
    this is ``1 - q``; an edge survives the window rule with chance about
    ``(1 - q)^2``.
    """
    pool = lp.unused_values()
    if len(pool) == 0:
        return 1.0
    miss = 1.0
    for e, t in zip(ends, targets):
        s = g.neighbor_mask(e)[pool].mean()
        u = g.neighbor_mask(t)[pool].mean()
        miss *= (1 - s * u) ** 2
    return float(miss)


def find_good_pairs(g: Graph, state: PathState, anchors: list[tuple[int, int]]) -> GoodPairTable:
    """The usable i-good ordered edges of P_0, for every step i = 1..k+1.

    An ordered P_0 edge ``xy`` is i-good when both positions were unexposed
    and ``x ~ b_{i-1}``, ``y ~ a_i`` in G.  Normally an edge is kept only if
    no other ordered edge inside its 4-vertex window is good for any step, so
    the kept edges form a matching and each has a hidden orientation.  When
    G is so dense that this window rule would discard most edges (predicted
    survival below 1/2, decided before P_0 is revealed), the fixed matching
    of P_0 edges (0,1), (2,3), ... is used instead; it has the same
    hidden-orientation property.
    """
    lp = state.lp
    p0 = np.asarray(state.path, dtype=np.int64)
    fresh = np.ones(len(p0), dtype=bool)
    exposed_pos = {pos for pos, _ in state.ledger}
    fresh[[i for i, q in enumerate(state.path) if q in exposed_pos]] = False
    ends = [state.b] + [lp.image(b) for _, b in anchors]
    targets = [lp.image(a) for a, _ in anchors] + [state.a]
    window_rule = isolation_survival(g, lp, ends, targets) ** 2 >= 0.5
    # reveal the unexposed part of P_0; its matched pairs get their order hidden below
    untouched = p0[[lp.is_untouched(int(q)) for q in p0]]
    lp.expose_many(untouched)
    vals = np.array([lp.image(int(q)) for q in p0], dtype=np.int64)

    k1 = len(targets)
    fwd, bwd = [], []
    for i in range(k1):
        mx = g.neighbor_mask(ends[i])[vals] & fresh
        my = g.neighbor_mask(targets[i])[vals] & fresh
        fwd.append(mx[:-1] & my[1:])
        bwd.append(mx[1:] & my[:-1])
    fwd = np.array(fwd).reshape(k1, max(len(p0) - 1, 0))
    bwd = np.array(bwd).reshape(k1, max(len(p0) - 1, 0))
    if window_rule:
        anygood = (fwd | bwd).any(axis=0)
        usable = anygood.copy()
        usable[1:] &= ~anygood[:-1]
        usable[:-1] &= ~anygood[1:]
    else:
        usable = np.zeros(fwd.shape[1], dtype=bool)
        usable[::2] = True

    pairs: dict[int, list[GoodPair]] = {}
    raw: dict[int, int] = {}
    slot_index = {}
    for i in range(k1):
        step = i + 1
        raw[step] = int(fwd[i].sum() + bwd[i].sum())
        out = []
        for e in np.flatnonzero((fwd[i] | bwd[i]) & usable).tolist():
            slot = (int(p0[e]), int(p0[e + 1]))
            slot_index[slot] = e
            if fwd[i, e]:
                out.append(GoodPair(slot, int(vals[e]), int(vals[e + 1])))
            if bwd[i, e]:
                out.append(GoodPair(slot, int(vals[e + 1]), int(vals[e])))
        pairs[step] = out
    table = GoodPairTable(pairs, ends, targets, raw, slot_index,
                          "window" if window_rule else "parity")
    for slot in sorted(table.slots(), key=slot_index.__getitem__):
        lp.hold_pair(*slot)
    empty = [i for i in table.steps if not pairs[i]]
    if empty:
        raise state.fail("goodpairs", f"no usable good pair for step {empty[0]}",
                         step=empty[0], raw_counts=raw)
    return table


def select_twins(table: GoodPairTable) -> TwinAssignment:
    """Greedy maximal twin set: steps ascending, slots in P_0 order."""
    assign: dict[tuple[int, int], int] = {}
    for i in table.steps:
        for slot in table.twins(i):
            if slot not in assign:
                assign[slot] = i
                break
    return TwinAssignment(assign)


# -- phase 2 ----------------------------------------------------------------------


def _orient(lp: LazyPermutation, pair: GoodPair) -> tuple[int, int]:
    """Positions of ``x`` and ``y`` once the slot's order is exposed."""
    s0, s1 = pair.slot
    if lp.is_pending(s0):
        lp.expose_pair_order(s0, s1)
    return (s0, s1) if lp.image(s0) == pair.x else (s1, s0)


def _cycle_walk(cyc: list[int]) -> list[int]:
    """Walk a cycle from its first position the long way round to its second."""
    return [cyc[0]] + cyc[:0:-1] if len(cyc) > 1 else list(cyc)


def absorb_short_cycles(g: Graph, state: PathState, f_star: CycleStructure,
                        anchors: list[tuple[int, int]], table: GoodPairTable,
                        twins: TwinAssignment) -> Certificate:
    """Phase 2: absorb short cycle i through a good pair xy with x before y, then close.

    Rerouting: ``a .. x y .. b``  becomes  ``a .. x b .. y a_i .. b_i``.
    """
    lp = state.lp
    state.stage = "phase2"
    short_ids = [cid for cid in range(len(f_star.cycles)) if cid not in state.absorbed]
    anchor_of = dict(zip(range(1, len(anchors) + 1), short_ids))
    path = list(state.path)
    twin_slots = set(twins.assign)
    spent: set[tuple[int, int]] = set()
    first_exposures: list[bool] = []
    order_exposures = 0

    for i in table.steps:
        where = {q: t for t, q in enumerate(path)}
        chosen = None
        slot = twins.slot_for(i)
        if slot is not None:
            pair = next(p for p in table.pairs[i] if p.slot == slot)
            px, py = _orient(lp, pair)
            order_exposures += 1
            if where[px] > where[py]:
                px, py = py, px
            chosen = (px, py)
            spent.add(slot)
        else:
            first = True
            for pair in table.pairs[i]:
                if pair.slot in twin_slots or pair.slot in spent:
                    continue
                px, py = _orient(lp, pair)
                order_exposures += 1
                spent.add(pair.slot)
                good = where[px] + 1 == where[py]
                if first:
                    first_exposures.append(good)
                    first = False
                if good:
                    chosen = (px, py)
                    break
        if chosen is None:
            raise state.fail("phase2", f"good pairs for step {i} exhausted", step=i,
                             first_exposures=first_exposures)
        px, py = chosen
        ix, iy = where[px], where[py]
        assert iy == ix + 1
        assert g.has_edge(lp.image(px), table.ends[i - 1])
        assert g.has_edge(lp.image(py), table.targets[i - 1])
        rerouted = path[: ix + 1] + path[iy:][::-1]
        if i <= len(anchors):
            cyc = f_star.cycles[anchor_of[i]]
            path = rerouted + _cycle_walk(cyc)
            state.absorbed.append(anchor_of[i])
        else:
            path = rerouted
    state.path = path
    stats = {
        "k": len(anchors),
        "twins": len(twins.assign),
        "order_exposures": order_exposures,
        "first_exposures": first_exposures,
        "raw_counts": table.raw_counts,
        "matching": table.matching,
        "exposed": state.exposed_count + 2 * order_exposures,
    }
    return finish(g, lp, f_star, path, stats)


# -- end to end --------------------------------------------------------------------


def _run_once(g: Graph, lp: LazyPermutation, f_star: CycleStructure, params: Params) -> Certificate:
    n = g.n
    L = params.long_threshold(n)
    run_len = params.phase1_run(n)
    state = absorb_long_cycles(g, lp, f_star, L, run_len, params.retries)
    phase1_exposed = state.exposed_count
    anchors = expose_anchors(state, f_star)
    table = find_good_pairs(g, state, anchors)
    twins = select_twins(table)
    cert = absorb_short_cycles(g, state, f_star, anchors, table, twins)
    n_long = sum(1 for c in f_star.cycles if len(c) >= L)
    cap = params.exposure_cap
    if cap is None:
        cap = math.ceil(8 * n / math.log(n)) + 1 + params.retries * run_len * n_long
    cert.stats.update(phase1_exposed=phase1_exposed, long_cycles=n_long, L=L,
                      run_len=run_len, exposure_cap=cap)
    if cert.stats["exposed"] > cap:
        raise ConstructionFailed("exposure-cap", f"{cert.stats['exposed']} > {cap}",
                                 cert.stats["exposed"], cert.stats)
    return cert


def construct_hamilton_min_degree(g: Graph, rng: np.random.Generator,
                                  params: Params | None = None, *,
                                  factor: CycleStructure | None = None,
                                  model: str = "g_n_2") -> Certificate:
    """Build a Hamilton cycle of ``G ∪ F`` or raise :class:`ConstructionFailed`.

    Lazy mode (``factor=None``): the cycle type of F is sampled from ``model``
    and F is revealed online; one attempt.  Fixed mode: F is given, and up to
    ``params.reruns`` further attempts with fresh exposure schedules are made,
    followed by the rotation-extension fallback when ``params.fallback``.
    """
    params = params or Params()
    n = g.n
    if factor is None:
        lengths = sample_factor(n, model, rng).lengths
        f_star = canonical_layout(lengths)
        lp = LazyPermutation(n, rng)
        try:
            cert = _run_once(g, lp, f_star, params)
        except ConstructionFailed as exc:
            exc.factor = reveal_factor(lp, f_star)
            raise
        cert.stats.update(mode="lazy", attempts=1)
        return cert

    if factor.n != n:
        raise ValueError(f"factor on {factor.n} vertices, graph on {n}")
    if len(factor.cycles) == 1 and n >= 3:
        return Certificate(list(factor.cycles[0]), factor,
                           {"k": 0, "exposed": 0, "mode": "fixed", "attempts": 0})
    failures = []
    for attempt in range(1 + params.reruns):
        f_star, lp = fixed_schedule(factor, rng)
        try:
            cert = _run_once(g, lp, f_star, params)
        except ConstructionFailed as exc:
            failures.append(exc.stage)
            continue
        cert.factor = factor
        cert.stats.update(mode="fixed", attempts=attempt + 1)
        return cert
    if params.fallback:
        from .posa import posa_fallback

        h = g.union(factor.to_graph())
        try:
            cert = posa_fallback(h, rng, params.posa_budget)
        except ConstructionFailed as exc:
            exc.stats["stages"] = failures
            exc.factor = factor
            raise
        cert.factor = factor
        cert.stats.update(mode="fixed", attempts=len(failures), fallback=True, stages=failures)
        return cert
    exc = ConstructionFailed(failures[-1], f"all {len(failures)} schedules failed",
                             stats={"stages": failures})
    exc.factor = factor
    raise exc
