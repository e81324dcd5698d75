"""Seeded Monte Carlo harness.

Trials are grouped into blocks of ``block_size``; block ``b`` of grid point
``g`` draws from its own stream ``SeedSequence(seed, spawn_key=(g, b))``.
Blocks may run in any process, and results are concatenated in block order,
so the output does not depend on the number of workers.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from fractions import Fraction
from functools import lru_cache
from itertools import permutations

import numpy as np
from scipy import stats as sps

from . import __version__
from .graph import (
    lower_bound_graph,
    lower_bound_size,
    min_degree,
    random_graph_family,
    threshold_degree,
)
from .permutation import (
    MODELS,
    SamplingError,
    _has_short_cycle,
    cycle_labels,
    cycle_length_of,
    sample_batch,
    sample_factor,
)
from .constructive import ConstructionFailed, Params, construct_hamilton_min_degree
from .oracle import bipartite_witness

CONFIDENCE = 0.9973
SCHEMA = 1
GRAPH_STREAM = 2**32 - 1


class ConfigError(ValueError):
    """Invalid experiment configuration."""


@dataclass
class ExperimentConfig:
    experiment: str
    n: int
    trials: int = 1000
    seed: int = 0
    model: str = "s_n"
    eps: float | None = None
    params: dict = field(default_factory=dict)
    block_size: int = 1000

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}; "
                              f"choose from {sorted(EXPERIMENTS)}")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.block_size < 1:
            raise ConfigError("block_size must be >= 1")
        if self.model not in MODELS:
            raise ConfigError(f"model must be one of {MODELS}")
        if self.n < 1 or (self.model == "g_n_2" and self.n < 3):
            raise ConfigError(f"n={self.n} too small for model {self.model}")
        unknown = sorted(set(self.params) - PARAM_KEYS[self.experiment])
        if unknown:
            raise ConfigError(f"unknown params for {self.experiment}: {', '.join(unknown)}")

    @classmethod
    def from_json(cls, doc: dict) -> "ExperimentConfig":
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(doc) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        missing = sorted({"experiment", "n"} - set(doc))
        if missing:
            raise ConfigError(f"missing config keys: {', '.join(missing)}")
        try:
            return cls(**doc)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    def to_json(self) -> dict:
        return asdict(self)

    def digest(self) -> str:
        blob = json.dumps(self.to_json(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass
class Estimate:
    mean: float
    var: float
    count: int
    radius: float

    @classmethod
    def of(cls, values) -> "Estimate":
        x = np.asarray(values, dtype=float)
        count = len(x)
        mean = float(x.mean()) if count else math.nan
        var = float(x.var(ddof=1)) if count > 1 else 0.0
        return cls(mean, var, count, 3 * math.sqrt(var / count) if count else math.nan)

    def covers(self, value: float) -> bool:
        return abs(self.mean - value) <= self.radius


@dataclass
class Frequency:
    successes: int
    count: int
    freq: float
    lo: float
    hi: float

    @classmethod
    def of(cls, flags) -> "Frequency":
        x = np.asarray(flags, dtype=bool)
        k, m = int(x.sum()), len(x)
        lo, hi = clopper_pearson(k, m)
        return cls(k, m, k / m if m else math.nan, lo, hi)


def clopper_pearson(k: int, m: int, confidence: float = CONFIDENCE) -> tuple[float, float]:
    """Exact binomial confidence interval."""
    if m == 0:
        return 0.0, 1.0
    alpha = 1 - confidence
    lo = 0.0 if k == 0 else float(sps.beta.ppf(alpha / 2, k, m - k + 1))
    hi = 1.0 if k == m else float(sps.beta.ppf(1 - alpha / 2, k + 1, m - k))
    return lo, hi


@dataclass
class Summary:
    config: ExperimentConfig
    estimates: dict = field(default_factory=dict)
    frequencies: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)
    columns: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "tool": f"hamperturb-{__version__}",
            "config_hash": self.config.digest(),
            "seed": self.config.seed,
            "config": self.config.to_json(),
            "estimates": {k: asdict(v) for k, v in sorted(self.estimates.items())},
            "frequencies": {k: asdict(v) for k, v in sorted(self.frequencies.items())},
            "extra": self.extra,
        }

    def rows(self) -> list[list]:
        names = list(self.columns)
        return [list(r) for r in zip(*(self.columns[c] for c in names))]


# -- streams and block execution ------------------------------------------------


def block_rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=key)))


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get("HAMPERTURB_WORKERS", "1")))
    except ValueError:
        return 1


def _blocks(trials: int, size: int) -> list[tuple[int, int]]:
    return [(b, min(size, trials - b * size)) for b in range(math.ceil(trials / size))]


def _run_block(cfg_doc: dict, group: int, block: int, count: int) -> dict:
    cfg = ExperimentConfig.from_json(cfg_doc)
    rng = block_rng(cfg.seed, group, block)
    return BLOCK_FNS[cfg.experiment](cfg, group, rng, count)


def run_blocks(cfg: ExperimentConfig, groups: int = 1, workers: int | None = None) -> list[dict]:
    """Per-trial columns for every group, concatenated in block order."""
    workers = workers or default_workers()
    jobs = [(g, b, c) for g in range(groups) for b, c in _blocks(cfg.trials, cfg.block_size)]
    doc = cfg.to_json()
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_run_block, doc, g, b, c) for g, b, c in jobs]
            parts = [f.result() for f in futures]
    else:
        parts = [_run_block(doc, g, b, c) for g, b, c in jobs]
    merged: list[dict] = [dict() for _ in range(groups)]
    for (g, _, _), part in zip(jobs, parts):
        for key, vals in part.items():
            merged[g].setdefault(key, []).extend(vals)
    return merged


# -- permutation statistics -----------------------------------------------------


def _cycle_block(cfg, group, rng, count):
    n = cfg.n
    t = int(cfg.params.get("t", n))
    perms = sample_batch(count, n, cfg.model, rng)
    lens = cycle_length_of(perms)
    upto = ((lens <= t) / lens).sum(axis=1).round().astype(int)
    return {"count_upto": upto.tolist(), "longest": lens.max(axis=1).tolist(),
            "len0": lens[:, 0].tolist()}


def harmonic(t: int) -> float:
    return float(sum(Fraction(1, i) for i in range(1, t + 1)))


def mc_cycle_stats(cfg: ExperimentConfig, workers: int | None = None) -> Summary:
    """Cycle counts up to length t, longest cycle tail, and the law of the cycle through 0."""
    n = cfg.n
    t = int(cfg.params.get("t", n))
    if not 1 <= t <= n:
        raise ConfigError(f"t must lie in 1..{n}")
    eps = cfg.eps if cfg.eps is not None else 0.25
    cols = run_blocks(cfg, 1, workers)[0]
    longest = np.asarray(cols["longest"])
    len0 = np.asarray(cols["len0"])
    out = Summary(cfg, columns={"trial": list(range(cfg.trials)), **cols})
    out.estimates["count_upto"] = Estimate.of(cols["count_upto"])
    out.estimates["longest"] = Estimate.of(longest)
    out.frequencies["long_cycle"] = Frequency.of(longest >= eps * n)
    counts = np.bincount(len0, minlength=n + 1)[1:]
    out.extra["len0_counts"] = counts.tolist()
    if cfg.model == "s_n":
        out.extra["expected_count_upto"] = harmonic(t)
        out.extra["len0_chisquare_p"] = float(sps.chisquare(counts).pvalue)
    return out


def exact_cycle_stats(n: int, t: int | None = None, eps: float = 0.25,
                      model: str = "s_n") -> dict:
    """Exact laws by enumerating all of S_n (n <= 8), optionally filtered to 2-factors."""
    if n > 8:
        raise ConfigError("exact enumeration is limited to n <= 8")
    t = t or n
    counts, longs, len0 = [], [], []
    for p in permutations(range(n)):
        lens = cycle_length_of(np.asarray(p)[None, :])[0]
        if model == "g_n_2" and lens.min() < 3:
            continue
        counts.append(sum(Fraction(1, int(x)) for x in lens if x <= t))
        longs.append(int(lens.max()))
        len0.append(int(lens[0]))
    total = len(counts)
    mean = sum(counts, Fraction(0)) / total
    return {
        "count": total,
        "mean_count_upto": mean,
        "var_count_upto": sum(((c - mean) ** 2 for c in counts), Fraction(0)) / total,
        "p_long": Fraction(sum(1 for x in longs if x >= eps * n), total),
        "len0_law": [Fraction(len0.count(m), total) for m in range(1, n + 1)],
    }


# -- hitting pairs -------------------------------------------------------------------


def _hit_sets(cfg) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    n = cfg.n
    p = cfg.params
    r_set = np.asarray(p.get("R", range(int(p.get("r", n)))), dtype=np.int64)
    if "S" in p or "T" in p:
        s_set = np.asarray(p.get("S", []), dtype=np.int64)
        t_set = np.asarray(p.get("T", []), dtype=np.int64)
    else:
        s, t = int(p.get("s", 0)), int(p.get("t", 0))
        if s + t > n:
            raise ConfigError("s + t exceeds n")
        s_set, t_set = np.arange(s), np.arange(s, s + t)
    if np.intersect1d(s_set, t_set).size:
        raise ConfigError("S and T must be disjoint")
    for name, arr in (("R", r_set), ("S", s_set), ("T", t_set)):
        if arr.size and (arr.min() < 0 or arr.max() >= n or len(np.unique(arr)) != len(arr)):
            raise ConfigError(f"{name} must be distinct elements of 0..n-1")
    return r_set, s_set, t_set


def hit_count(perms: np.ndarray, r_set, s_set, t_set) -> np.ndarray:
    """Per row: indices i in R whose pair (p(i), p(i+1)) lies in S x T or T x S (cyclically)."""
    perms = np.atleast_2d(perms)
    n = perms.shape[1]
    in_s = np.zeros(n, dtype=bool)
    in_t = np.zeros(n, dtype=bool)
    in_s[s_set] = True
    in_t[t_set] = True
    r_set = np.asarray(r_set, dtype=np.int64)
    a = perms[:, r_set]
    b = perms[:, (r_set + 1) % n]
    return ((in_s[a] & in_t[b]) | (in_t[a] & in_s[b])).sum(axis=1)


def hit_expectation(n: int, r: int, s: int, t: int) -> Fraction:
    return Fraction(2 * r * s * t, n * (n - 1))


def _hit_block(cfg, group, rng, count):
    r_set, s_set, t_set = _hit_sets(cfg)
    perms = sample_batch(count, cfg.n, "s_n", rng)
    return {"X": hit_count(perms, r_set, s_set, t_set).tolist()}


def mc_hitpairs(cfg: ExperimentConfig, workers: int | None = None) -> Summary:
    r_set, s_set, t_set = _hit_sets(cfg)
    cols = run_blocks(cfg, 1, workers)[0]
    x = np.asarray(cols["X"])
    expect = float(hit_expectation(cfg.n, len(r_set), len(s_set), len(t_set)))
    gamma = float(cfg.params.get("gamma", 0.5))
    out = Summary(cfg, columns={"trial": list(range(cfg.trials)), **cols})
    out.estimates["X"] = Estimate.of(x)
    out.frequencies["lower_tail"] = Frequency.of(x < (1 - gamma) * expect)
    out.extra["expected"] = expect
    return out


def exact_hitpairs(n: int, r_set, s_set, t_set) -> Fraction:
    """Mean hit count over all n! permutations (n <= 8)."""
    if n > 8:
        raise ConfigError("exact enumeration is limited to n <= 8")
    total = Fraction(0)
    count = 0
    for p in permutations(range(n)):
        total += int(hit_count(np.asarray(p)[None, :], r_set, s_set, t_set)[0])
        count += 1
    return total / count


# -- random subgraphs ------------------------------------------------------------------


@lru_cache(maxsize=4)
def _family_graph(family: str, n: int, d: int, seed: int):
    return random_graph_family(family, n, d, block_rng(seed, GRAPH_STREAM))


def _cfg_graph(cfg):
    family = cfg.params.get("family", "near_regular")
    d = int(cfg.params.get("d", cfg.n - 1))
    return _family_graph(family, cfg.n, d, cfg.seed)


def _subset(rng, n: int, size: int) -> np.ndarray:
    return rng.choice(n, size=size, replace=False)


def _mindeg_block(cfg, group, rng, count):
    g = _cfg_graph(cfg)
    n = cfg.n
    r = int(cfg.params.get("r", 0))
    d = min_degree(g)
    adj = g.to_sparse()
    deg = g.degrees()
    floor = (1 - 2 * r / n) * d
    fail, mins = [], []
    for _ in range(count):
        x = np.zeros(n)
        x[_subset(rng, n, r)] = 1
        left = deg - adj @ x
        keep = x == 0
        m = int(left[keep].min()) if keep.any() else 0
        mins.append(m)
        fail.append(int(m < floor))
    return {"min_degree": mins, "fail": fail}


def mc_induced_mindegree(cfg: ExperimentConfig, workers: int | None = None) -> Summary:
    """Failure frequency of ``δ(G - X) >= (1 - 2r/n) δ(G)`` for uniform r-subsets X."""
    r = int(cfg.params.get("r", 0))
    if not 0 <= r <= cfg.n // 4:
        raise ConfigError("r must lie in 0..n/4")
    cols = run_blocks(cfg, 1, workers)[0]
    g = _cfg_graph(cfg)
    out = Summary(cfg, columns={"trial": list(range(cfg.trials)), **cols})
    out.estimates["min_degree"] = Estimate.of(cols["min_degree"])
    out.frequencies["fail"] = Frequency.of(cols["fail"])
    out.extra.update(d=min_degree(g), floor=(1 - 2 * r / cfg.n) * min_degree(g))
    return out


def _expansion_block(cfg, group, rng, count):
    g = _cfg_graph(cfg)
    n = cfg.n
    s, t = int(cfg.params["s"]), int(cfg.params["t"])
    d = min_degree(g)
    bound = min(d, n / s) * s * t / (16 * n) if s else 0.0
    adj = g.to_sparse()
    ys, fail = [], []
    for _ in range(count):
        pick = _subset(rng, n, s + t)
        x = np.zeros(n)
        x[pick[:s]] = 1
        y = int(((adj @ x)[pick[s:]] > 0).sum())
        ys.append(y)
        fail.append(int(y < bound))
    return {"Y": ys, "fail": fail}


def mc_expansion(cfg: ExperimentConfig, workers: int | None = None) -> Summary:
    """Frequency of ``Y < d' s t / 16 n`` for random disjoint S, T."""
    s, t = int(cfg.params.get("s", 0)), int(cfg.params.get("t", 0))
    if s < 0 or t < 0 or s + t > cfg.n:
        raise ConfigError("need s, t >= 0 and s + t <= n")
    cols = run_blocks(cfg, 1, workers)[0]
    g = _cfg_graph(cfg)
    d = min_degree(g)
    out = Summary(cfg, columns={"trial": list(range(cfg.trials)), **cols})
    out.estimates["Y"] = Estimate.of(cols["Y"])
    out.frequencies["fail"] = Frequency.of(cols["fail"])
    out.extra.update(d=d, bound=min(d, cfg.n / s) * s * t / (16 * cfg.n) if s else 0.0)
    return out


# -- lower-bound construction ------------------------------------------------------------


def lower_bound_stats(images: np.ndarray, a: int, short: float) -> dict:
    """Z, K, components of F[B] and the witness flag for one permutation.

    ``images`` is the permutation whose cycles form F, with A = {0..a-1}.
    """
    n = len(images)
    idx = np.arange(n)
    # each F-edge once: v -> p(v), skipping loops and the second arc of 2-cycles
    keep = (images != idx) & ~((images[images] == idx) & (images < idx))
    in_a = idx < a
    src, dst = idx[keep], images[keep]
    z = int((in_a[src] & in_a[dst]).sum())
    inside_b = int((~in_a[src] & ~in_a[dst]).sum())
    labels = cycle_labels(images)[0]
    lengths = np.bincount(labels, minlength=n)
    heads = np.flatnonzero(lengths)
    touched = np.zeros(n, dtype=bool)
    touched[labels[:a]] = True
    full_b = heads[~touched[heads]]
    # fixed points and 2-cycles are trees already; only longer cycles close a loop
    components = (n - a) - inside_b + int((lengths[full_b] >= 3).sum())
    k = int((lengths[full_b] <= short).sum())
    return {"Z": z, "K": k, "components": int(components), "witness": int(components > a)}


def _lower_block(cfg, group, rng, count):
    n = cfg.n
    a = lower_bound_size(n, cfg.eps)
    short = math.sqrt(n) / math.log(n)
    cols: dict = {"Z": [], "K": [], "components": [], "witness": []}
    for _ in range(count):
        images = _sample_images(n, cfg.model, rng)
        for key, val in lower_bound_stats(images, a, short).items():
            cols[key].append(val)
    return cols


def _sample_images(n: int, model: str, rng) -> np.ndarray:
    if model == "s_n":
        return rng.permutation(n)
    for _ in range(10_000):
        p = rng.permutation(n)
        if not _has_short_cycle(p):
            return p
    raise SamplingError("2-factor rejection sampler exhausted")


def mc_lower_bound(cfg: ExperimentConfig, workers: int | None = None) -> Summary:
    """Edges of F inside A, short cycles inside B, and the witness frequency."""
    if cfg.eps is None or not 0 < cfg.eps < 1:
        raise ConfigError("lower_bound needs eps in (0, 1)")
    a = lower_bound_size(cfg.n, cfg.eps)
    cols = run_blocks(cfg, 1, workers)[0]
    out = Summary(cfg, columns={"trial": list(range(cfg.trials)), **cols})
    for key in ("Z", "K", "components"):
        out.estimates[key] = Estimate.of(cols[key])
    out.frequencies["witness"] = Frequency.of(cols["witness"])
    out.extra.update(a=a, expected_Z=a * (a - 1) / (cfg.n - 1))
    return out


# -- threshold scan ---------------------------------------------------------------------------


def _scan_grid(cfg) -> list[float]:
    grid = cfg.params.get("grid")
    if not grid:
        raise ConfigError("threshold_scan needs a nonempty grid")
    return [float(x) for x in grid]


def _scan_block(cfg, group, rng, count):
    n = cfg.n
    family = cfg.params.get("family", "near_regular")
    value = _scan_grid(cfg)[group]
    params = Params.from_json(cfg.params.get("pipeline", {}))
    cols: dict = {"grid": [], "delta": [], "success": [], "stage": [], "exposed": [],
                  "witness": []}
    for _ in range(count):
        witness = ""
        if family == "lower_bound":
            g, a = lower_bound_graph(n, value)
            f = sample_factor(n, "g_n_2", rng)
            witness = int(bipartite_witness(f, np.arange(a)))
            delta = a
            if n <= int(cfg.params.get("pipeline_cap", 5000)):
                try:
                    cert = construct_hamilton_min_degree(g, rng, params, factor=f)
                    ok, stage, exposed = 1, "", cert.stats.get("exposed", "")
                except ConstructionFailed as exc:
                    ok, stage, exposed = 0, exc.stage, exc.exposure_count
            else:
                ok, stage, exposed = "", "skipped", ""
        else:
            delta = n - 1 if family == "complete" else math.ceil(value * threshold_degree(n))
            g = random_graph_family(family, n, delta, rng)
            try:
                cert = construct_hamilton_min_degree(g, rng, params, model=cfg.model)
                ok, stage, exposed = 1, "", cert.stats["exposed"]
            except ConstructionFailed as exc:
                ok, stage, exposed = 0, exc.stage, exc.exposure_count
        for key, val in (("grid", value), ("delta", delta), ("success", ok), ("stage", stage),
                         ("exposed", exposed), ("witness", witness)):
            cols[key].append(val)
    return cols


def threshold_scan(cfg: ExperimentConfig, workers: int | None = None) -> Summary:
    """Success rates of the min-degree pipeline (or witness rates) along a grid.

    For the ``lower_bound`` family the grid holds eps values; otherwise it
    holds multipliers of sqrt(n ln n / 2).
    """
    grid = _scan_grid(cfg)
    try:
        Params.from_json(cfg.params.get("pipeline", {}))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad pipeline params: {exc}") from None
    merged = run_blocks(cfg, len(grid), workers)
    out = Summary(cfg)
    cols: dict = {"trial": []}
    points = []
    for value, part in zip(grid, merged):
        cols["trial"].extend(range(cfg.trials))
        for key, vals in part.items():
            cols.setdefault(key, []).extend(vals)
        done = [s for s in part["success"] if s != ""]
        stages: dict = {}
        for s in part["stage"]:
            if s:
                stages[s] = stages.get(s, 0) + 1
        point = {"grid": value, "delta": part["delta"][0], "stages": dict(sorted(stages.items()))}
        if done:
            out.frequencies[f"success@{value}"] = Frequency.of(done)
        wit = [w for w in part["witness"] if w != ""]
        if wit:
            out.frequencies[f"witness@{value}"] = Frequency.of(wit)
        exp = [e for e, s in zip(part["exposed"], part["success"]) if s == 1 and e != ""]
        if exp:
            out.estimates[f"exposed@{value}"] = Estimate.of(exp)
        points.append(point)
    out.columns = cols
    out.extra["points"] = points
    return out


def monotone_within_noise(freqs: list[Frequency], sigmas: float = 2.0) -> bool:
    """True unless some later rate drops below an earlier one by more than ``sigmas`` s.e."""
    for i, a in enumerate(freqs):
        for b in freqs[i + 1:]:
            se = math.sqrt(a.freq * (1 - a.freq) / a.count + b.freq * (1 - b.freq) / b.count)
            if b.freq < a.freq - sigmas * se:
                return False
    return True


# -- registry --------------------------------------------------------------------------------

EXPERIMENTS = {
    "cycle_stats": mc_cycle_stats,
    "hitpairs": mc_hitpairs,
    "induced_mindegree": mc_induced_mindegree,
    "expansion": mc_expansion,
    "lower_bound": mc_lower_bound,
    "threshold_scan": threshold_scan,
}

BLOCK_FNS = {
    "cycle_stats": _cycle_block,
    "hitpairs": _hit_block,
    "induced_mindegree": _mindeg_block,
    "expansion": _expansion_block,
    "lower_bound": _lower_block,
    "threshold_scan": _scan_block,
}

PARAM_KEYS = {
    "cycle_stats": {"t"},
    "hitpairs": {"r", "s", "t", "R", "S", "T", "gamma"},
    "induced_mindegree": {"family", "d", "r"},
    "expansion": {"family", "d", "s", "t"},
    "lower_bound": set(),
    "threshold_scan": {"family", "grid", "pipeline", "pipeline_cap"},
}


def run_experiment(cfg: ExperimentConfig, workers: int | None = None) -> Summary:
    return EXPERIMENTS[cfg.experiment](cfg, workers)
