"""Replicated block store: random placement, uniform replica reads, fair-shared
datanode uplinks, and the collision probabilities of two concurrent readers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping

import numpy as np


@dataclass(frozen=True)
class StorageConfig:
    n: int
    r: int
    uplink_bw: float  # bytes/second per datanode
    block_size: int  # bytes

    def __post_init__(self):
        if not 1 <= self.r <= self.n:
            raise ValueError(f"need n >= r >= 1, got n={self.n}, r={self.r}")
        if self.uplink_bw <= 0:
            raise ValueError("uplink_bw must be positive")
        if self.block_size <= 0:
            raise ValueError("block_size must be positive")


@dataclass(frozen=True)
class ReplicaMap:
    """Block id -> datanodes holding a replica of it."""

    placements: Mapping[int, frozenset[int]]
    r: int

    def __post_init__(self):
        for block, nodes in self.placements.items():
            if len(nodes) != self.r:
                raise ValueError(f"block {block} has {len(nodes)} replicas, expected {self.r}")

    def __getitem__(self, block: int) -> frozenset[int]:
        return self.placements[block]

    def __len__(self) -> int:
        return len(self.placements)


@dataclass(frozen=True)
class CollisionProbabilities:
    p1: float | Fraction
    p2: float | Fraction
    pv: Mapping[int, float | Fraction]


def place_block(rng: np.random.Generator, cfg: StorageConfig) -> frozenset[int]:
    """Uniformly random set of ``r`` distinct datanodes."""
    return frozenset(int(i) for i in rng.choice(cfg.n, size=cfg.r, replace=False))


def place_blocks(rng: np.random.Generator, cfg: StorageConfig, count: int) -> ReplicaMap:
    return ReplicaMap({b: place_block(rng, cfg) for b in range(count)}, cfg.r)


def select_read_node(rng: np.random.Generator, replicas) -> int:
    """Uniform choice among ``replicas`` (iterated in sorted order)."""
    choices = sorted(replicas)
    if not choices:
        raise ValueError("cannot read from an empty replica set")
    return choices[int(rng.integers(len(choices)))]


def prob_same_block(cfg: StorageConfig) -> Fraction:
    """Two readers of one block land on the same datanode."""
    return Fraction(1, cfg.r)


def prob_diff_block(cfg: StorageConfig, exact: bool = False) -> CollisionProbabilities:
    """Two readers of two independently placed blocks share a datanode.

    ``pv[v]`` is the hypergeometric probability that the blocks share ``v``
    datanodes. Fractions are returned when ``exact`` is set.
    """
    n, r = cfg.n, cfg.r
    total = math.comb(n, r)
    pv = {v: Fraction(math.comb(r, v) * math.comb(n - r, r - v), total)
          for v in range(max(2 * r - n, 0), r + 1)}
    p2 = sum((p * Fraction(v, r * r) for v, p in pv.items()), Fraction(0))
    p1 = prob_same_block(cfg)
    if exact:
        return CollisionProbabilities(p1, p2, pv)
    return CollisionProbabilities(float(p1), float(p2), {v: float(p) for v, p in pv.items()})


def _random_subsets(rng: np.random.Generator, n: int, r: int, trials: int) -> np.ndarray:
    # first r entries of a random permutation of range(n), one row per trial
    return np.argsort(rng.random((trials, n)), axis=1)[:, :r]


def estimate_collisions_mc(cfg: StorageConfig, trials: int, seed: int) -> tuple[float, float]:
    """Empirical (p1, p2) from ``trials`` simulated reader pairs."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    rows = np.arange(trials)
    pick = lambda: rng.integers(cfg.r, size=trials)  # noqa: E731

    block = _random_subsets(rng, cfg.n, cfg.r, trials)
    same = block[rows, pick()] == block[rows, pick()]

    a = _random_subsets(rng, cfg.n, cfg.r, trials)
    b = _random_subsets(rng, cfg.n, cfg.r, trials)
    diff = a[rows, pick()] == b[rows, pick()]
    return float(same.mean()), float(diff.mean())


def uplink_rate(active_readers: int, cfg: StorageConfig) -> float:
    """Per-reader share of one datanode's uplink (egalitarian sharing)."""
    if active_readers < 1:
        raise ValueError("need at least one active reader")
    return cfg.uplink_bw / active_readers
