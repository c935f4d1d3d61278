import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from parastat import partitions
from parastat.errors import BudgetExceeded, OutOfRange

from . import oracles


def test_p500_pinned():
    t = partitions.build_table(500, 500)
    assert partitions.count_at_most_k(t, 500, 500) == 2300165032574323995027


def test_log_mode_tracks_exact():
    ex = partitions.build_table(300, 60, mode="exact")
    lg = partitions.build_table(300, 60, mode="log_space")
    for n, k in [(300, 1), (300, 17), (250, 60), (10, 3)]:
        assert lg.log_count(n, k) == pytest.approx(math.log(ex.count(n, k)), rel=1e-12)
    assert lg.log_count(5, 6) == -math.inf


def test_column_table_matches_full():
    col = partitions.parts_column(120)
    full = partitions.build_table(120, 120)
    assert [col.count(120, k) for k in range(121)] == [full.count(120, k) for k in range(121)]
    with pytest.raises(OutOfRange):
        col.count(119, 3)


def test_table_bounds_and_budget():
    t = partitions.build_table(20, 5)
    with pytest.raises(OutOfRange):
        t.count(21, 2)
    with pytest.raises(OutOfRange):
        t.count(5, 6)
    with pytest.raises(BudgetExceeded):
        partitions.build_table(10_000, 10_000, max_cells=10**6)
    with pytest.raises(OutOfRange):
        partitions.build_table(4000, 10, mode="exact")


def test_argmax_small_n_matches_enumeration():
    for n in (8, 12, 14):
        counts = oracles.enumerated_counts(n)
        best = max(counts.values())
        want = min(k for k, v in counts.items() if v == best)
        assert partitions.most_probable_parts(partitions.build_table(n, n), n) == want


def test_exactly_k_sampler_uniform_log_mode():
    n, k = 16, 4
    table = partitions.build_table(n, k, mode="log_space")
    draws = partitions.sample_partitions(table, n, k, 20_000, 11, exactly_k=True)
    every = [p for p in oracles.partitions_of(n) if len(p) == k]
    hist = Counter(d.parts() for d in draws)
    assert set(hist) == set(every)
    assert stats.chisquare([hist[p] for p in every]).pvalue > 1e-3


def test_samples_independent_of_threads():
    t = partitions.build_table(200, 30)
    a = partitions.sample_partitions(t, 200, 30, 300, 5, threads=1)
    b = partitions.sample_partitions(t, 200, 30, 300, 5, threads=4)
    assert [s.parts() for s in a] == [s.parts() for s in b]


def test_occupancy_vector():
    v = partitions.OccupancyVector.from_parts([3, 1, 1], 5)
    assert v.counts == {1: 2, 3: 1}
    assert (v.parts_total, v.sum_total, v.n0) == (3, 5, 2)
    assert v.parts() == (3, 1, 1)
    assert list(v.as_array(3)) == [0, 2, 0, 1]


def test_no_partitions_raises():
    t = partitions.build_table(10, 2)
    with pytest.raises(OutOfRange):
        partitions.sample_partitions(t, 10, 0, 1, 0, exactly_k=True)
    t1 = partitions.build_table(10, 0)
    with pytest.raises(OutOfRange):
        partitions.sample_partitions(t1, 10, 0, 1, 0)


@pytest.mark.parametrize("mode", ["exact", "log_space"])
def test_cache_round_trip(tmp_path, mode):
    t = partitions.build_table(60, 12, mode=mode)
    path = tmp_path / "t.pktb"
    partitions.save_table(t, path)
    back = partitions.load_table(path)
    assert (back.n_max, back.k_max, back.mode) == (60, 12, mode)
    for n, k in [(60, 12), (33, 5), (0, 0)]:
        assert back.count(n, k) == t.count(n, k)


def test_cached_table_uses_env(tmp_path, monkeypatch):
    monkeypatch.setenv("PARASTAT_CACHE_DIR", str(tmp_path))
    a = partitions.cached_table(40, 8)
    files = list(tmp_path.iterdir())
    assert len(files) == 1
    b = partitions.cached_table(40, 8)
    assert b.count(40, 8) == a.count(40, 8)
    files[0].write_bytes(b"junk")
    with pytest.warns(RuntimeWarning):
        partitions.cached_table(40, 8)


def test_condensate_statistics_unchecked_below_threshold():
    t = partitions.build_table(100, 10)
    s = partitions.sample_partitions(t, 100, 10, 20, 1)
    summary = partitions.condensate_statistics(s, 10, 18.0)
    assert not summary.band_checked
    assert summary.tail_bound == 1.0


@settings(max_examples=25)
@given(st.integers(1, 60), st.integers(1, 60), st.integers(0, 2**32))
def test_sampled_partitions_are_valid(n, k, seed):
    k = min(k, n)
    t = partitions.build_table(n, k)
    for s in partitions.sample_partitions(t, n, k, 5, seed):
        assert sum(s.parts()) == n
        assert 1 <= len(s.parts()) <= k
        assert s.n0 == k - len(s.parts())


@given(st.integers(0, 80))
def test_row_sums_match_pentagonal(n):
    t = partitions.build_table(80, 80)
    assert sum(t.count(n, k) for k in range(n + 1)) == oracles.pentagonal_partitions(80)[n]


def largest_part_at_most(n, k):
    """Coin-change count of partitions of n using parts 1..k."""
    ways = [1] + [0] * n
    for part in range(1, k + 1):
        for m in range(part, n + 1):
            ways[m] += ways[m - part]
    return ways[n]


@given(st.integers(2, 200), st.integers(1, 50))
def test_conjugation_symmetry(n, k):
    # at most k parts is conjugate to largest part at most k
    k = min(k, n)
    t = partitions.build_table(n, k)
    assert partitions.count_at_most_k(t, n, k) == largest_part_at_most(n, k)
