"""Uniform permutations, random 2-factors and lazily exposed permutations.

Every sampler takes an explicit ``numpy.random.Generator``; nothing here
touches global random state.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .graph import Graph

MODELS = ("s_n", "g_n_2")


class SamplingError(RuntimeError):
    """A rejection sampler exhausted its attempt budget."""


class ExposureError(RuntimeError):
    """Misuse of a lazily exposed permutation (double exposure etc.)."""


@dataclass(eq=False)
class Permutation:
    """A bijection of ``0..n-1`` given by its one-line image array."""

    images: np.ndarray

    def __post_init__(self):
        self.images = np.asarray(self.images, dtype=np.int64)
        n = len(self.images)
        if self.images.ndim != 1:
            raise ValueError("permutation images must be one-dimensional")
        seen = np.zeros(n, dtype=bool)
        if n and (self.images.min() < 0 or self.images.max() >= n):
            raise ValueError("permutation image outside 0..n-1")
        seen[self.images] = True
        if not seen.all():
            raise ValueError("images do not form a bijection")

    @property
    def n(self) -> int:
        return len(self.images)

    def __call__(self, i: int) -> int:
        return int(self.images[i])

    def __eq__(self, other):
        return isinstance(other, Permutation) and np.array_equal(self.images, other.images)

    def tolist(self) -> list[int]:
        return self.images.tolist()

    @classmethod
    def identity(cls, n: int) -> "Permutation":
        return cls(np.arange(n))


@dataclass(eq=False)
class CycleStructure:
    """Cycle decomposition; every listed cycle follows the permutation."""

    n: int
    cycles: list[list[int]]

    def __post_init__(self):
        self.cycles = [list(map(int, c)) for c in self.cycles]
        flat = [v for c in self.cycles for v in c]
        if sorted(flat) != list(range(self.n)):
            raise ValueError("cycles do not partition 0..n-1")

    @property
    def lengths(self) -> list[int]:
        return [len(c) for c in self.cycles]

    def to_permutation(self) -> Permutation:
        images = np.empty(self.n, dtype=np.int64)
        for c in self.cycles:
            images[c] = np.roll(c, -1)
        return Permutation(images)

    def edges(self) -> list[tuple[int, int]]:
        """Edges of the underlying simple graph (loops and repeats dropped)."""
        out = []
        for c in self.cycles:
            if len(c) == 2:
                out.append((c[0], c[1]))
            elif len(c) >= 3:
                out.extend(zip(c, c[1:] + c[:1]))
        return out

    def to_graph(self) -> Graph:
        return Graph.from_edges(self.n, self.edges())

    def __eq__(self, other):
        return isinstance(other, CycleStructure) and self.n == other.n and \
            self.cycles == other.cycles

    def to_json(self) -> dict:
        return {"n": self.n, "cycles": [list(c) for c in self.cycles]}


class TwoFactor(CycleStructure):
    """Spanning 2-regular graph: a cycle structure with all cycles of length >= 3."""

    def __post_init__(self):
        super().__post_init__()
        short = [c for c in self.cycles if len(c) < 3]
        if short:
            raise ValueError(f"2-factor cycles need length >= 3, got {len(short[0])}")


# -- samplers --------------------------------------------------------------


def sample_uniform(n: int, rng: np.random.Generator) -> Permutation:
    """Uniform random permutation of ``0..n-1`` (Fisher-Yates via numpy)."""
    if n < 1:
        raise ValueError(f"need n >= 1, got {n}")
    return Permutation(rng.permutation(n))


def cycle_structure(p: Permutation) -> CycleStructure:
    """Orbits ordered by smallest element, each listed from that element."""
    images = p.images.tolist()
    seen = [False] * p.n
    cycles = []
    for start in range(p.n):
        if seen[start]:
            continue
        cyc = []
        v = start
        while not seen[v]:
            seen[v] = True
            cyc.append(v)
            v = images[v]
        cycles.append(cyc)
    return CycleStructure(p.n, cycles)


def _has_short_cycle(images: np.ndarray) -> bool:
    idx = np.arange(len(images))
    return bool((images == idx).any() or (images[images] == idx).any())


def sample_two_factor(n: int, rng: np.random.Generator, max_attempts: int = 10_000) -> TwoFactor:
    """Random 2-factor: a uniform permutation conditioned on no 1- or 2-cycles.

    The cycles of the accepted permutation are returned as the 2-factor.
    """
    if n < 3:
        raise ValueError(f"a 2-factor needs n >= 3, got {n}")
    for _ in range(max_attempts):
        images = rng.permutation(n)
        if not _has_short_cycle(images):
            cs = cycle_structure(Permutation(images))
            return TwoFactor(n, cs.cycles)
    raise SamplingError(f"no 2-factor accepted within {max_attempts} attempts")


def sample_factor(n: int, model: str, rng: np.random.Generator) -> CycleStructure:
    """Cycle structure of a uniform permutation (``s_n``) or a 2-factor (``g_n_2``)."""
    if model == "s_n":
        return cycle_structure(sample_uniform(n, rng))
    if model == "g_n_2":
        return sample_two_factor(n, rng)
    raise ValueError(f"unknown model {model!r}; expected one of {MODELS}")


def apply_permutation(p: Permutation, f: CycleStructure) -> CycleStructure:
    """Relabel every cycle vertex ``v`` as ``p(v)``."""
    if p.n != f.n:
        raise ValueError(f"size mismatch: permutation on {p.n}, factor on {f.n}")
    images = p.images
    cycles = [images[np.asarray(c, dtype=np.int64)].tolist() for c in f.cycles]
    return type(f)(f.n, cycles)


def cycle_count_upto(cs: CycleStructure, t: int) -> int:
    if not 1 <= t <= cs.n:
        raise ValueError(f"t must lie in 1..{cs.n}, got {t}")
    return sum(1 for c in cs.cycles if len(c) <= t)


def longest_cycle(cs: CycleStructure) -> int:
    if cs.n < 1:
        raise ValueError("empty permutation")
    return max(len(c) for c in cs.cycles)


# -- batched cycle statistics --------------------------------------------


def cycle_labels(perms: np.ndarray) -> np.ndarray:
    """Label every element by the smallest element of its orbit.

    Works row-wise on a ``(m, n)`` batch by pointer doubling, so the cost is
    ``O(m n log n)`` in vectorised numpy.
    """
    perms = np.atleast_2d(perms)
    m, n = perms.shape
    rows = np.arange(m)[:, None]
    lab = np.broadcast_to(np.arange(n), (m, n)).copy()
    jump = perms.copy()
    steps = max(1, int(np.ceil(np.log2(max(n, 2)))) + 1)
    for _ in range(steps):
        np.minimum(lab, lab[rows, jump], out=lab)
        jump = jump[rows, jump]
    return lab


def cycle_length_of(perms: np.ndarray) -> np.ndarray:
    """For a batch of permutations, the length of the cycle through each element."""
    lab = cycle_labels(perms)
    m, n = lab.shape
    flat = lab + (np.arange(m) * n)[:, None]
    counts = np.bincount(flat.ravel(), minlength=m * n)
    return counts[flat]


def sample_batch(m: int, n: int, model: str, rng: np.random.Generator) -> np.ndarray:
    """``m`` independent permutations as rows; ``g_n_2`` rows are rejection-filtered."""
    if model == "s_n":
        return rng.permuted(np.broadcast_to(np.arange(n), (m, n)), axis=1)
    if model != "g_n_2":
        raise ValueError(f"unknown model {model!r}")
    if n < 3:
        raise ValueError("g_n_2 needs n >= 3")
    out = []
    have = 0
    idx = np.arange(n)
    while have < m:
        batch = rng.permuted(np.broadcast_to(idx, (2 * (m - have) + 8, n)), axis=1)
        rows = np.arange(len(batch))[:, None]
        ok = ~((batch == idx).any(axis=1) | (batch[rows, batch] == idx).any(axis=1))
        good = batch[ok][: m - have]
        out.append(good)
        have += len(good)
    return np.concatenate(out)


# -- lazy exposure -------------------------------------------------------


@dataclass(eq=False)
class LazyPermutation:
    """A uniform permutation whose images are revealed on demand.

    Unexposed images are, conditionally on everything revealed so far, a
    uniformly random bijection onto the unused values.  Besides single
    exposures the class supports *pending pairs*: two positions whose image
    set is known while the assignment between them is not; the assignment is
    revealed later by :meth:`expose_pair_order` with a fair coin.
    """

    n: int
    rng: np.random.Generator
    _images: np.ndarray = field(init=False, repr=False)
    _pool: np.ndarray = field(init=False, repr=False)
    _where: np.ndarray = field(init=False, repr=False)
    _free: int = field(init=False)
    _pending: dict = field(init=False, repr=False)

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"need n >= 1, got {self.n}")
        self._images = np.full(self.n, -1, dtype=np.int64)
        self._pool = np.arange(self.n, dtype=np.int64)
        self._where = np.arange(self.n, dtype=np.int64)
        self._free = self.n
        self._pending = {}

    # state ------------------------------------------------------------

    @property
    def exposed_count(self) -> int:
        """Positions whose image (or pending image set) has been drawn."""
        return self.n - self._free

    def is_exposed(self, i: int) -> bool:
        return self._images[i] >= 0 and i not in self._pending

    def is_pending(self, i: int) -> bool:
        return i in self._pending

    def is_untouched(self, i: int) -> bool:
        return self._images[i] < 0

    def image(self, i: int) -> int:
        if not self.is_exposed(i):
            raise ExposureError(f"position {i} is not exposed")
        return int(self._images[i])

    def unused_values(self) -> np.ndarray:
        """Values not yet drawn by any position."""
        return np.sort(self._pool[: self._free])

    def pending_values(self, i: int) -> tuple[int, int]:
        j = self._pending[i]
        return tuple(sorted((int(self._images[i]), int(self._images[j]))))

    # drawing ----------------------------------------------------------

    def _take(self, value: int) -> None:
        k = self._where[value]
        last = self._free - 1
        other = self._pool[last]
        self._pool[k], self._pool[last] = other, value
        self._where[other], self._where[value] = k, last
        self._free = last

    def _draw(self, i: int) -> int:
        value = int(self._pool[self.rng.integers(self._free)])
        self._take(value)
        return value

    def expose_image(self, i: int) -> int:
        if not self.is_untouched(i):
            raise ExposureError(f"position {i} already exposed")
        value = self._draw(i)
        self._images[i] = value
        return value

    def expose_many(self, positions) -> np.ndarray:
        """Expose all ``positions`` at once (same law as one at a time)."""
        positions = np.asarray(positions, dtype=np.int64)
        if positions.size == 0:
            return positions.copy()
        if (self._images[positions] >= 0).any() or len(np.unique(positions)) != len(positions):
            raise ExposureError("batch overlaps exposed positions")
        values = self._draw_many(positions)
        self._images[positions] = values
        return values

    def _draw_many(self, positions: np.ndarray) -> np.ndarray:
        free = self._pool[: self._free]
        values = free[self.rng.permutation(self._free)[: len(positions)]]
        keep = np.ones(self.n, dtype=bool)
        keep[values] = False
        rest = free[keep[free]]
        self._pool[: len(rest)] = rest
        self._pool[len(rest): self._free] = values
        self._where[self._pool[: self._free]] = np.arange(self._free)
        self._free = len(rest)
        return values

    def expose_run(self, f_star: CycleStructure, cycle_id: int, start_offset: int,
                   length: int) -> list[int]:
        """Expose ``length`` consecutive positions of cycle ``cycle_id`` of ``f_star``.

        Positions wrap around the cycle.  Returns the images in cycle order.
        """
        cyc = f_star.cycles[cycle_id]
        if not 0 < length <= len(cyc):
            raise ExposureError(f"run length {length} invalid for a {len(cyc)}-cycle")
        pos = [cyc[(start_offset + t) % len(cyc)] for t in range(length)]
        if any(not self.is_untouched(q) for q in pos):
            raise ExposureError("run overlaps exposed positions")
        return [self.expose_image(q) for q in pos]

    def expose_all(self) -> Permutation:
        """Expose every remaining position and return the full permutation."""
        if self._pending:
            for i in sorted(self._pending):
                if i in self._pending:
                    self.expose_pair_order(i, self._pending[i])
        rest = np.flatnonzero(self._images < 0)
        if rest.size:
            self.expose_many(rest)
        return Permutation(self._images.copy())

    # pending pairs ----------------------------------------------------

    def hold_pair(self, pos_x: int, pos_y: int) -> None:
        """Turn two exposed positions into a pending pair.

        Only their image set stays known; the assignment is re-drawn by a
        fair coin on :meth:`expose_pair_order`.  Valid whenever everything
        the caller conditions on is invariant under swapping the two images.
        """
        if pos_x == pos_y or not (self.is_exposed(pos_x) and self.is_exposed(pos_y)):
            raise ExposureError("hold_pair needs two distinct exposed positions")
        self._pending[pos_x] = pos_y
        self._pending[pos_y] = pos_x

    def expose_pair_order(self, pos_x: int, pos_y: int) -> bool:
        """Resolve a pending pair; True iff the smaller value lands on ``pos_x``."""
        if self._pending.get(pos_x) != pos_y:
            raise ExposureError(f"positions {pos_x}, {pos_y} are not a pending pair")
        lo, hi = sorted((int(self._images[pos_x]), int(self._images[pos_y])))
        flag = self._resolve(pos_x, pos_y, lo, hi)
        self._images[pos_x], self._images[pos_y] = (lo, hi) if flag else (hi, lo)
        del self._pending[pos_x], self._pending[pos_y]
        return flag

    def _resolve(self, pos_x: int, pos_y: int, lo: int, hi: int) -> bool:
        return bool(self.rng.integers(2))


class FixedPermutation(LazyPermutation):
    """Exposure interface over a permutation that is already fully known.

    Used when the 2-factor is given: the same pipelines run, but every
    "exposure" reads the fixed target and pending pairs resolve to the truth.
    """

    def __init__(self, target: Permutation, rng: np.random.Generator | None = None):
        self.target = target.images
        super().__init__(target.n, rng if rng is not None else np.random.default_rng(0))

    def _draw(self, i: int) -> int:
        value = int(self.target[i])
        self._take(value)
        return value

    def _draw_many(self, positions: np.ndarray) -> np.ndarray:
        values = self.target[positions]
        for v in values.tolist():
            self._take(v)
        return values.copy()

    def _resolve(self, pos_x, pos_y, lo, hi) -> bool:
        return int(self.target[pos_x]) == lo
