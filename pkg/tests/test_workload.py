import itertools
from collections import Counter
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hemtsim.workload import (SHUFFLE, STORAGE, PartitionPlan, Stage, build_jobs, make_tasks,
                              partition_even, partition_proportional, quantize_capacities,
                              shuffle_sizes, skewed_bucket)

MiB = 1 << 20
GiB = 1 << 30


def largest_remainder(total, weights):
    """Oracle: exact quotas, floors, then leftover units by descending remainder."""
    ws = [Fraction(w) for w in weights]
    quotas = [total * w / sum(ws) for w in ws]
    floors = [q.numerator // q.denominator for q in quotas]
    rema = sorted(range(len(ws)), key=lambda i: (floors[i] - quotas[i], i))
    for i in rema[:total - sum(floors)]:
        floors[i] += 1
    return floors


def test_partition_even_examples():
    assert partition_even(2 * GiB, 2) == [GiB, GiB]
    assert partition_even(10, 3) == [4, 3, 3]
    assert partition_even(0, 4) == [0, 0, 0, 0]
    with pytest.raises(ValueError):
        partition_even(10, 0)


def test_partition_proportional_examples():
    assert partition_proportional(2048, [1.0, 0.4]) == [1463, 585]
    assert partition_proportional(11, [3, 4, 4]) == [3, 4, 4]
    assert partition_proportional(12345, [1]) == [12345]


def test_partition_proportional_bytes_match_oracle():
    got = partition_proportional(2048 * MiB, [1.0, 0.4])
    assert got == largest_remainder(2048 * MiB, [Fraction(1), Fraction(2, 5)])
    # 1462.857 MiB and 585.143 MiB
    assert got == [1533916891, 613566757]


def test_partition_proportional_rejects_bad_weights():
    with pytest.raises(ValueError):
        partition_proportional(10, [])
    with pytest.raises(ValueError):
        partition_proportional(10, [0, 0])
    with pytest.raises(ValueError):
        partition_proportional(10, [1, -1])


GRID = (0.2, 0.4, 1.0, 3.0)


def test_sizes_sum_to_total_exhaustive():
    for k in (1, 2, 3):
        for weights in itertools.product(GRID, repeat=k):
            for total in range(101):
                sizes = partition_proportional(total, weights)
                assert sum(sizes) == total
                assert sizes == largest_remainder(total, weights)


@settings(max_examples=200, deadline=None)
@given(total=st.integers(0, 10**12), k=st.integers(1, 12))
def test_equal_weights_match_even_split(total, k):
    assert sorted(partition_proportional(total, [0.7] * k)) == sorted(partition_even(total, k))


@settings(max_examples=200, deadline=None)
@given(total=st.integers(0, 10**9),
       weights=st.lists(st.floats(0.01, 100), min_size=1, max_size=10))
def test_proportional_sizes_within_one_unit_of_quota(total, weights):
    sizes = partition_proportional(total, weights)
    assert sum(sizes) == total
    ws = [Fraction(w) for w in weights]
    for s, w in zip(sizes, ws):
        assert abs(s - total * w / sum(ws)) < 1


def test_skewed_bucket_examples():
    caps = [3, 4, 4]
    assert skewed_bucket(0, caps) == 0
    assert skewed_bucket(3, caps) == 1
    assert skewed_bucket(7, caps) == 2
    assert Counter(skewed_bucket(h, caps) for h in range(11)) == {0: 3, 1: 4, 2: 4}
    assert all(skewed_bucket(h, [1]) == 0 for h in (-5, 0, 9, 10**18))
    assert [skewed_bucket(h, [1, 1]) for h in (0, 1)] == [0, 1]


def test_literal_greater_or_equal_reading_distorts_mass():
    # the literal count of prefix sums >= hash shifts one residue between buckets
    prefix = list(itertools.accumulate([3, 4, 4]))
    literal = Counter(sum(p >= h for p in prefix) for h in range(11))
    assert sorted(literal.values()) == [3, 4, 4]
    assert literal[3] == 4 and literal[1] == 3  # 1-based labels, reversed order
    assert literal != Counter({3: 3, 2: 4, 1: 4})


def test_skewed_bucket_negative_hash_wraps():
    assert skewed_bucket(-1, [3, 4, 4]) == skewed_bucket(10, [3, 4, 4])


def test_skewed_bucket_rejects_bad_capacities():
    with pytest.raises(ValueError):
        skewed_bucket(0, [])
    with pytest.raises(ValueError):
        skewed_bucket(0, [1, 0])


@settings(max_examples=100, deadline=None)
@given(caps=st.lists(st.integers(1, 20), min_size=1, max_size=6), offset=st.integers(-10**9, 10**9))
def test_skewed_bucket_exact_over_any_full_cycle(caps, offset):
    counts = Counter(skewed_bucket(h, caps) for h in range(offset, offset + sum(caps)))
    assert [counts[i] for i in range(len(caps))] == caps


def test_skewed_bucket_random_hash_frequencies():
    rng = np.random.default_rng(2024)
    hashes = rng.integers(-2**63, 2**63 - 1, size=100_000, dtype=np.int64)
    counts = Counter(skewed_bucket(int(h), [3, 4, 4]) for h in hashes)
    for b, p in enumerate((3 / 11, 4 / 11, 4 / 11)):
        assert abs(counts[b] / 1e5 - p) < 0.01


def test_quantize_capacities():
    assert quantize_capacities([1.0, 0.4]) == [5, 2]
    assert quantize_capacities([3, 4, 4]) == [3, 4, 4]
    assert quantize_capacities([2.0, 2.0]) == [1, 1]
    with pytest.raises(ValueError):
        quantize_capacities([0.0])


def test_shuffle_sizes_follow_capacities():
    assert shuffle_sizes(700, [1.0, 0.4]) == [500, 200]
    assert sum(shuffle_sizes(10**9 + 7, [0.3, 0.9, 0.5])) == 10**9 + 7


def test_make_tasks_cut_at_block_boundaries():
    stage = Stage(0, "map", 10, 1.0, STORAGE)
    tasks = make_tasks(stage, [3, 7], block_size=4)
    assert tasks[0].segments == ((0, 3),)
    assert tasks[1].segments == ((0, 1), (1, 4), (2, 2))
    assert [t.cpu_work for t in tasks] == [3.0, 7.0]
    with pytest.raises(ValueError):
        make_tasks(stage, [3, 3], block_size=4)


def test_make_tasks_shuffle_single_segment_and_empty():
    stage = Stage(1, "reduce", 5, 2.0, SHUFFLE, frozenset({0}))
    tasks = make_tasks(stage, [5, 0], block_size=4)
    assert tasks[0].segments == ((None, 5),)
    assert tasks[1].segments == ()


def test_build_jobs_kmeans_and_pagerank():
    jobs = build_jobs("kmeans", 256 * MiB, iterations=30)
    assert len(jobs) == 30 and all(len(j.stages) == 2 for j in jobs)
    (pr,) = build_jobs("pagerank", 256 * MiB, iterations=100)
    assert len(pr.stages) == 101
    assert all(s.input_size == 256 * MiB for s in pr.stages)
    assert all(s.deps == frozenset({s.id - 1}) for s in pr.stages[1:])


def test_build_jobs_wordcount_has_light_reduce():
    (job,) = build_jobs("wordcount", 1000)
    assert [s.name for s in job.stages] == ["map", "reduce"]
    assert job.stages[1].input_size == 10
    assert job.stages[1].source == SHUFFLE


def test_build_jobs_synthetic_single_stage():
    (job,) = build_jobs("synthetic", 1000, shuffle_ratio=0)
    assert len(job.stages) == 1 and job.stages[0].source == STORAGE


def test_build_jobs_rejects_bad_parameters():
    with pytest.raises(ValueError):
        build_jobs("terasort", 10)
    with pytest.raises(ValueError):
        build_jobs("kmeans", 10, iterations=0)
    with pytest.raises(ValueError):
        build_jobs("kmeans", 10, shuffle_ratio=-1)


def test_partition_plan_provenance_checked():
    with pytest.raises(ValueError):
        PartitionPlan((1.0,), (1,), "guess")
    assert PartitionPlan((1.0, 1.0), (2, 3)).total == 5
