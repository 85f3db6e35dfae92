import itertools
import math
from fractions import Fraction

import numpy as np
import pytest

from hemtsim.storage import (ReplicaMap, StorageConfig, estimate_collisions_mc, place_block,
                             prob_diff_block, prob_same_block, select_read_node, uplink_rate)


def cfg(n, r, bw=1.0):
    return StorageConfig(n, r, bw, 1)


def enumerate_collisions(n, r):
    """Brute force over every ordered placement pair and replica choice."""
    subsets = list(itertools.combinations(range(n), r))
    same = Fraction(sum(a == b for s in subsets for a in s for b in s),
                    len(subsets) * r * r)
    diff_hits = 0
    overlap = {}
    for s1, s2 in itertools.product(subsets, repeat=2):
        v = len(set(s1) & set(s2))
        overlap[v] = overlap.get(v, 0) + 1
        diff_hits += sum(a == b for a in s1 for b in s2)
    pairs = len(subsets) ** 2
    diff = Fraction(diff_hits, pairs * r * r)
    return same, diff, {v: Fraction(c, pairs) for v, c in overlap.items()}


def test_enumeration_oracle_small_case():
    p1, p2, pv = enumerate_collisions(4, 2)
    assert p1 == Fraction(1, 2)
    assert p2 == Fraction(1, 4)
    assert pv == {0: Fraction(1, 6), 1: Fraction(4, 6), 2: Fraction(1, 6)}


@pytest.mark.parametrize("n,r", [(4, 2), (5, 3), (6, 2), (7, 4), (8, 3)])
def test_closed_form_matches_enumeration(n, r):
    exact = prob_diff_block(cfg(n, r), exact=True)
    p1, p2, pv = enumerate_collisions(n, r)
    assert exact.p1 == p1
    assert exact.p2 == p2
    assert {v: p for v, p in exact.pv.items() if p} == pv


@pytest.mark.parametrize("r,expected", [(2, 0.5), (1, 1.0), (5, 0.2)])
def test_prob_same_block(r, expected):
    assert float(prob_same_block(cfg(10, r))) == expected


def test_equality_when_every_datanode_holds_a_replica():
    for r in range(1, 7):
        res = prob_diff_block(cfg(r, r), exact=True)
        assert res.p1 == res.p2 == Fraction(1, r)


def test_p2_shrinks_with_more_datanodes():
    assert prob_diff_block(cfg(100, 2)).p2 < prob_diff_block(cfg(4, 2)).p2
    p2s = [prob_diff_block(cfg(n, 2)).p2 for n in range(2, 21)]
    assert all(b < a for a, b in zip(p2s, p2s[1:]))


def test_pv_sums_to_one():
    for n in range(1, 30):
        for r in range(1, n + 1):
            res = prob_diff_block(cfg(n, r))
            assert math.fsum(res.pv.values()) == pytest.approx(1.0, abs=1e-12)
            assert 0 <= res.p2 <= res.p1 <= 1


def test_place_block_full_set():
    assert place_block(np.random.default_rng(0), cfg(4, 4)) == frozenset({0, 1, 2, 3})


def test_place_block_deterministic():
    a = place_block(np.random.default_rng(42), cfg(4, 2))
    b = place_block(np.random.default_rng(42), cfg(4, 2))
    assert a == b and len(a) == 2


def test_place_block_uniform_frequency():
    rng = np.random.default_rng(7)
    draws = 100_000
    counts = np.zeros(10)
    for _ in range(draws):
        for i in place_block(rng, cfg(10, 3)):
            counts[i] += 1
    freq = counts / draws
    se = math.sqrt(0.3 * 0.7 / draws)
    assert np.all(np.abs(freq - 0.3) <= 3 * se)


def test_select_read_node():
    rng = np.random.default_rng(3)
    assert select_read_node(rng, {3}) == 3
    with pytest.raises(ValueError):
        select_read_node(rng, set())
    draws = 100_000
    ones = sum(select_read_node(rng, {1, 2}) == 1 for _ in range(draws))
    assert abs(ones / draws - 0.5) <= 3 * math.sqrt(0.25 / draws)
    assert (select_read_node(np.random.default_rng(9), {4, 5, 6})
            == select_read_node(np.random.default_rng(9), {6, 5, 4}))


def test_monte_carlo_concordance():
    p1_hat, p2_hat = estimate_collisions_mc(cfg(4, 2), 100_000, seed=11)
    assert abs(p1_hat - 0.5) <= 3 * math.sqrt(0.25 / 1e5)
    assert abs(p2_hat - 0.25) <= 3 * math.sqrt(0.25 * 0.75 / 1e5)


def test_monte_carlo_equality_case():
    p1_hat, p2_hat = estimate_collisions_mc(cfg(3, 3), 100_000, seed=5)
    se = math.sqrt(2 * (1 / 3) * (2 / 3) / 1e5)
    assert abs(p1_hat - p2_hat) <= 3 * se


def test_monte_carlo_single_trial():
    p1_hat, p2_hat = estimate_collisions_mc(cfg(4, 2), 1, seed=0)
    assert p1_hat in (0.0, 1.0) and p2_hat in (0.0, 1.0)
    with pytest.raises(ValueError):
        estimate_collisions_mc(cfg(4, 2), 0, seed=0)


@pytest.mark.parametrize("readers,share", [(1, 64.0), (2, 32.0), (4, 16.0)])
def test_uplink_fair_share(readers, share):
    assert uplink_rate(readers, cfg(4, 2, bw=64.0)) == share


def test_uplink_rejects_no_readers():
    with pytest.raises(ValueError):
        uplink_rate(0, cfg(4, 2))


def test_config_and_replica_map_validation():
    with pytest.raises(ValueError):
        StorageConfig(2, 3, 1.0, 1)
    with pytest.raises(ValueError):
        StorageConfig(4, 2, 0.0, 1)
    with pytest.raises(ValueError):
        ReplicaMap({0: frozenset({1})}, r=2)
