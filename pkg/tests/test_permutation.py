import itertools
import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from hamperturb.permutation import (
    CycleStructure,
    ExposureError,
    FixedPermutation,
    LazyPermutation,
    Permutation,
    TwoFactor,
    apply_permutation,
    cycle_count_upto,
    cycle_labels,
    cycle_length_of,
    cycle_structure,
    longest_cycle,
    sample_batch,
    sample_factor,
    sample_two_factor,
    sample_uniform,
)

seeds = st.integers(0, 2**32 - 1)


def within_3sigma(count, total, p, k=3.0):
    sigma = math.sqrt(total * p * (1 - p))
    return abs(count - total * p) <= k * sigma


def orbit_lengths(images):
    """Independent orbit walk."""
    n = len(images)
    out = [0] * n
    for s in range(n):
        v, m = images[s], 1
        while v != s:
            v, m = images[v], m + 1
        out[s] = m
    return out


class TestPermutation:
    def test_rejects_non_bijection(self):
        with pytest.raises(ValueError):
            Permutation([0, 0, 1])
        with pytest.raises(ValueError):
            Permutation([0, 3, 1])

    def test_n1_identity(self):
        rng = np.random.default_rng(0)
        assert all(sample_uniform(1, rng).tolist() == [0] for _ in range(5))

    def test_n0(self):
        with pytest.raises(ValueError):
            sample_uniform(0, np.random.default_rng(0))

    def test_uniform_n3(self):
        rng = np.random.default_rng(11)
        total = 60_000
        counts = Counter(tuple(sample_uniform(3, rng).tolist()) for _ in range(total))
        assert len(counts) == 6
        assert all(within_3sigma(c, total, 1 / 6) for c in counts.values())

    def test_seed_determinism(self):
        a = sample_uniform(20, np.random.default_rng(5))
        b = sample_uniform(20, np.random.default_rng(5))
        assert a == b


class TestCycleStructure:
    def test_identity(self):
        cs = cycle_structure(Permutation.identity(4))
        assert cs.cycles == [[0], [1], [2], [3]]

    def test_example(self):
        cs = cycle_structure(Permutation([1, 2, 0, 4, 3]))
        assert cs.cycles == [[0, 1, 2], [3, 4]]

    @given(seeds)
    def test_round_trip(self, seed):
        p = sample_uniform(9, np.random.default_rng(seed))
        cs = cycle_structure(p)
        assert cs.to_permutation() == p
        assert [c[0] for c in cs.cycles] == sorted(c[0] for c in cs.cycles)
        assert all(c[0] == min(c) for c in cs.cycles)

    def test_partition_enforced(self):
        with pytest.raises(ValueError):
            CycleStructure(4, [[0, 1], [1, 2, 3]])

    def test_two_factor_rejects_short(self):
        with pytest.raises(ValueError):
            TwoFactor(5, [[0, 1, 2], [3, 4]])

    def test_edges_and_json(self):
        cs = CycleStructure(6, [[0], [1, 2], [3, 4, 5]])
        assert cs.edges() == [(1, 2), (3, 4), (4, 5), (5, 3)]
        assert cs.to_json() == {"n": 6, "cycles": [[0], [1, 2], [3, 4, 5]]}


class TestTwoFactor:
    def test_n3(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            assert sample_two_factor(3, rng).lengths == [3]

    def test_n5_always_five_cycle(self):
        # S_5 survivors: 24 permutations, all 5-cycles
        survivors = [p for p in itertools.permutations(range(5)) if min(orbit_lengths(p)) >= 3]
        assert len(survivors) == 24 and all(max(orbit_lengths(p)) == 5 for p in survivors)
        rng = np.random.default_rng(1)
        for _ in range(50):
            assert sample_two_factor(5, rng).lengths == [5]

    def test_n6_type_frequency(self):
        survivors = [p for p in itertools.permutations(range(6)) if min(orbit_lengths(p)) >= 3]
        kinds = Counter(tuple(sorted(set(orbit_lengths(p)))) for p in survivors)
        assert len(survivors) == 160 and kinds[(3,)] == 40
        rng = np.random.default_rng(2)
        total = 100_000
        hits = sum(1 for _ in range(total) if sorted(sample_two_factor(6, rng).lengths) == [3, 3])
        assert abs(hits / total - 0.25) <= 0.01

    @pytest.mark.parametrize("n", [6, 7])
    def test_type_law_matches_enumeration(self, n):
        survivors = [p for p in itertools.permutations(range(n)) if min(orbit_lengths(p)) >= 3]
        exact = Counter()
        for p in survivors:
            exact[tuple(sorted(cycle_structure(Permutation(p)).lengths))] += 1
        rng = np.random.default_rng(n)
        total = 20_000
        emp = Counter(tuple(sorted(sample_two_factor(n, rng).lengths)) for _ in range(total))
        for kind, c in exact.items():
            assert within_3sigma(emp[kind], total, c / len(survivors))
        assert set(emp) <= set(exact)

    def test_small_n_error(self):
        with pytest.raises(ValueError):
            sample_two_factor(2, np.random.default_rng(0))

    def test_unknown_model(self):
        with pytest.raises(ValueError):
            sample_factor(5, "ewens", np.random.default_rng(0))


class TestApply:
    def test_identity(self):
        f = sample_two_factor(9, np.random.default_rng(3))
        assert apply_permutation(Permutation.identity(9), f) == f

    @given(seeds)
    def test_lengths_invariant(self, seed):
        rng = np.random.default_rng(seed)
        f = sample_two_factor(10, rng)
        g = apply_permutation(sample_uniform(10, rng), f)
        assert sorted(g.lengths) == sorted(f.lengths)
        assert isinstance(g, TwoFactor)

    def test_size_mismatch(self):
        with pytest.raises(ValueError):
            apply_permutation(Permutation.identity(4), TwoFactor(3, [[0, 1, 2]]))

    def test_edge_marginals_match_direct_sampler(self):
        # relabelling a fixed (4,4) layout vs direct samples conditioned on type (4,4)
        n, total = 8, 20_000
        rng = np.random.default_rng(8)
        fixed = TwoFactor(8, [[0, 1, 2, 3], [4, 5, 6, 7]])
        a = Counter()
        for _ in range(total):
            for e in apply_permutation(sample_uniform(n, rng), fixed).edges():
                a[tuple(sorted(e))] += 1
        b = Counter()
        got = 0
        while got < total:
            f = sample_two_factor(n, rng)
            if sorted(f.lengths) != [4, 4]:
                continue
            got += 1
            for e in f.edges():
                b[tuple(sorted(e))] += 1
        # every edge has probability 8 / 28 in both; 56 comparisons, so 4 sigma each
        p = 8 / 28
        for e in itertools.combinations(range(n), 2):
            assert within_3sigma(a[e], total, p, k=4)
            assert within_3sigma(b[e], total, p, k=4)


class TestCycleCounts:
    def test_identity(self):
        assert cycle_count_upto(cycle_structure(Permutation.identity(5)), 1) == 5
        assert longest_cycle(cycle_structure(Permutation.identity(5))) == 1

    def test_single_cycle(self):
        cs = CycleStructure(6, [list(range(6))])
        assert cycle_count_upto(cs, 5) == 0
        assert longest_cycle(cs) == 6

    def test_t_range(self):
        with pytest.raises(ValueError):
            cycle_count_upto(CycleStructure(3, [[0, 1, 2]]), 4)

    def test_harmonic_mean_n10(self):
        rng = np.random.default_rng(10)
        x = np.array([cycle_count_upto(cycle_structure(sample_uniform(10, rng)), 10)
                      for _ in range(20_000)])
        h10 = 2.928968253968254
        assert abs(x.mean() - h10) <= 3 * x.std(ddof=1) / math.sqrt(len(x))

    def test_longest_tail_n10(self):
        rng = np.random.default_rng(12)
        total = 20_000
        hits = sum(longest_cycle(cycle_structure(sample_uniform(10, rng))) > 5
                   for _ in range(total))
        assert within_3sigma(hits, total, 0.6456349206349207)

    @pytest.mark.parametrize("n", range(1, 8))
    def test_cycle_through_zero_uniform_exact(self, n):
        law = Counter(orbit_lengths(p)[0] for p in itertools.permutations(range(n)))
        assert set(law.values()) == {math.factorial(n) // n}
        assert sorted(law) == list(range(1, n + 1))

    def test_cycle_through_zero_uniform_n50(self):
        rng = np.random.default_rng(50)
        lens = cycle_length_of(sample_batch(50_000, 50, "s_n", rng))[:, 0]
        counts = np.bincount(lens, minlength=51)[1:]
        assert all(within_3sigma(c, 50_000, 1 / 50) for c in counts)


class TestBatched:
    @given(seeds, st.integers(1, 30))
    def test_lengths_match_orbit_walk(self, seed, n):
        perms = sample_batch(4, n, "s_n", np.random.default_rng(seed))
        lens = cycle_length_of(perms)
        for row, got in zip(perms, lens):
            assert got.tolist() == orbit_lengths(row.tolist())

    @given(seeds, st.integers(1, 30))
    def test_labels_are_orbit_minima(self, seed, n):
        perms = sample_batch(3, n, "s_n", np.random.default_rng(seed))
        for row, lab in zip(perms, cycle_labels(perms)):
            cs = cycle_structure(Permutation(row))
            for c in cs.cycles:
                assert set(lab[c].tolist()) == {min(c)}

    def test_g_n_2_rows_have_no_short_cycles(self):
        perms = sample_batch(200, 9, "g_n_2", np.random.default_rng(4))
        assert perms.shape == (200, 9)
        assert cycle_length_of(perms).min() >= 3


class TestLazy:
    def test_n1(self):
        lp = LazyPermutation(1, np.random.default_rng(0))
        assert lp.expose_image(0) == 0

    def test_double_exposure(self):
        lp = LazyPermutation(3, np.random.default_rng(0))
        lp.expose_image(1)
        with pytest.raises(ExposureError):
            lp.expose_image(1)
        with pytest.raises(ExposureError):
            lp.image(2)

    @pytest.mark.parametrize("order", [(0, 1, 2, 3), (3, 1, 0, 2)])
    def test_full_exposure_uniform(self, order):
        rng = np.random.default_rng(sum(order) * 7 + order[0])
        total = 100_000
        counts = Counter()
        for _ in range(total):
            lp = LazyPermutation(4, rng)
            for i in order:
                lp.expose_image(i)
            counts[tuple(lp.expose_all().tolist())] += 1
        assert len(counts) == 24
        assert all(within_3sigma(c, total, 1 / 24) for c in counts.values())

    def test_exposure_order_exchangeable(self):
        rng = np.random.default_rng(99)
        total = 24_000
        tables = []
        for order in [(0, 1, 2, 3), (2, 0, 3, 1)]:
            c = Counter()
            for _ in range(total):
                lp = LazyPermutation(4, rng)
                for i in order:
                    lp.expose_image(i)
                c[tuple(lp.expose_all().tolist())] += 1
            tables.append([c[p] for p in itertools.permutations(range(4))])
        _, pvalue, _, _ = stats.chi2_contingency(np.array(tables))
        assert pvalue > 0.001

    def test_batch_and_single_agree_in_law(self):
        rng = np.random.default_rng(3)
        total = 24_000
        c = Counter()
        for _ in range(total):
            lp = LazyPermutation(4, rng)
            lp.expose_many([2, 0])
            c[tuple(lp.expose_all().tolist())] += 1
        assert all(within_3sigma(v, total, 1 / 24) for v in c.values()) and len(c) == 24

    @given(seeds, st.integers(1, 40))
    def test_bijection_and_count_monotone(self, seed, n):
        rng = np.random.default_rng(seed)
        lp = LazyPermutation(n, rng)
        seen = []
        last = 0
        for i in rng.permutation(n).tolist():
            seen.append(lp.expose_image(i))
            assert lp.exposed_count == last + 1 <= n
            last = lp.exposed_count
        assert sorted(seen) == list(range(n))

    def test_expose_run(self):
        f = CycleStructure(7, [[0, 1, 2, 3, 4], [5, 6]])
        lp = LazyPermutation(7, np.random.default_rng(1))
        vals = lp.expose_run(f, 0, 3, 4)
        assert len(set(vals)) == 4
        assert [lp.image(q) for q in (3, 4, 0, 1)] == vals
        assert lp.is_untouched(2)
        with pytest.raises(ExposureError):
            lp.expose_run(f, 0, 1, 2)

    def test_expose_run_full_cycle(self):
        f = TwoFactor(6, [[0, 1, 2], [3, 4, 5]])
        lp = LazyPermutation(6, np.random.default_rng(2))
        vals = lp.expose_run(f, 1, 0, 3)
        pi = lp.expose_all()
        assert vals == [pi(3), pi(4), pi(5)]

    def test_pair_order_fair(self):
        rng = np.random.default_rng(4)
        total = 100_000
        hits = 0
        for _ in range(total):
            lp = LazyPermutation(3, rng)
            lp.expose_many([0, 1])
            lp.hold_pair(0, 1)
            hits += lp.expose_pair_order(0, 1)
        assert within_3sigma(hits, total, 0.5)

    def test_pair_state_contract(self):
        lp = LazyPermutation(5, np.random.default_rng(0))
        with pytest.raises(ExposureError):
            lp.expose_pair_order(0, 1)
        lp.expose_many([0, 1, 2])
        lp.hold_pair(0, 1)
        assert lp.is_pending(0) and not lp.is_exposed(0)
        with pytest.raises(ExposureError):
            lp.image(1)
        lo, hi = lp.pending_values(0)
        lp.expose_pair_order(0, 1)
        assert lp.is_exposed(0) and lp.is_exposed(1)
        assert sorted((lp.image(0), lp.image(1))) == [lo, hi]

    def test_pairs_independent(self):
        rng = np.random.default_rng(12)
        total = 40_000
        c = Counter()
        for _ in range(total):
            lp = LazyPermutation(12, rng)
            lp.expose_many(list(range(6)))
            for a in (0, 2, 4):
                lp.hold_pair(a, a + 1)
            c[tuple(lp.expose_pair_order(a, a + 1) for a in (4, 0, 2))] += 1
        assert len(c) == 8
        assert all(within_3sigma(v, total, 1 / 8) for v in c.values())

    def test_fixed_permutation_reads_target(self):
        target = Permutation([3, 0, 4, 1, 2])
        fp = FixedPermutation(target, np.random.default_rng(0))
        assert fp.expose_image(2) == 4
        fp.expose_many([0, 1])
        fp.hold_pair(0, 1)
        fp.expose_pair_order(0, 1)
        assert fp.image(0) == 3 and fp.image(1) == 0
        assert fp.expose_all() == target
