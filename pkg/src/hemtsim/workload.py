"""Multi-stage job shapes, input partitioning and shuffle-bucket assignment."""

from __future__ import annotations

import bisect
import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

STORAGE = "storage"
SHUFFLE = "shuffle"

JOB_KINDS = ("wordcount", "kmeans", "pagerank", "synthetic")

DEFAULT_SHUFFLE_RATIO = {"wordcount": 0.01, "kmeans": 0.01, "pagerank": 1.0, "synthetic": 0.0}

PROVENANCES = ("even", "static-capacity", "credit-based", "adaptive")


@dataclass(frozen=True)
class Task:
    """One unit of work. ``segments`` lists what the task reads, in order, as
    ``(block_id, nbytes)``; ``block_id`` is None for shuffle fetches."""

    id: int
    stage: int
    input_size: int
    work_per_byte: float
    segments: tuple[tuple[int | None, int], ...] = ()

    def __post_init__(self):
        if self.input_size < 0:
            raise ValueError("input_size must be nonnegative")
        if self.work_per_byte <= 0:
            raise ValueError("work_per_byte must be positive")

    @property
    def cpu_work(self) -> float:
        """Full-CPU-seconds needed."""
        return self.input_size * self.work_per_byte


@dataclass(frozen=True)
class Stage:
    id: int
    name: str
    input_size: int
    work_per_byte: float
    source: str = STORAGE
    deps: frozenset[int] = frozenset()


@dataclass(frozen=True)
class Job:
    name: str
    kind: str
    stages: tuple[Stage, ...]
    iterations: int = 1

    def stage(self, sid: int) -> Stage:
        for s in self.stages:
            if s.id == sid:
                return s
        raise KeyError(sid)


@dataclass(frozen=True)
class PartitionPlan:
    weights: tuple[float, ...]
    sizes: tuple[int, ...]
    provenance: str = "even"
    pull: bool = field(default=False, compare=False)

    def __post_init__(self):
        if self.provenance not in PROVENANCES:
            raise ValueError(f"unknown provenance {self.provenance!r}")

    @property
    def total(self) -> int:
        return sum(self.sizes)


def partition_even(total: int, k: int) -> list[int]:
    if k < 1:
        raise ValueError("k must be >= 1")
    q, rem = divmod(int(total), k)
    return [q + 1 if i < rem else q for i in range(k)]


def partition_proportional(total: int, weights: Sequence[float]) -> list[int]:
    """Integer sizes proportional to ``weights`` that sum to ``total``.

    Uses the largest-remainder method on exact rationals; ties go to the lower
    index.
    """
    ws = [Fraction(w) for w in weights]
    if not ws or any(w < 0 for w in ws):
        raise ValueError("weights must be nonnegative")
    wsum = sum(ws)
    if wsum == 0:
        raise ValueError("at least one weight must be positive")
    quotas = [total * w / wsum for w in ws]
    sizes = [math.floor(q) for q in quotas]
    short = int(total) - sum(sizes)
    order = sorted(range(len(ws)), key=lambda i: (-(quotas[i] - sizes[i]), i))
    for i in order[:short]:
        sizes[i] += 1
    return sizes


def quantize_capacities(weights: Sequence[float], scale: int = 1000) -> list[int]:
    """Integer capacities for residue arithmetic, GCD-reduced.

    Weights are first normalized so the largest maps to ``scale``.
    """
    if not weights or any(w < 0 for w in weights) or max(weights) <= 0:
        raise ValueError("weights must be nonnegative with a positive sum")
    top = max(weights)
    q = [int(round(w / top * scale)) for w in weights]
    g = math.gcd(*q)
    return [c // g for c in q]


def skewed_bucket(record_hash: int, capacities: Sequence[int]) -> int:
    """Bucket for a record: capacity-weighted hash partitioning.

    Over any full cycle of ``sum(capacities)`` consecutive hashes, bucket ``i``
    receives exactly ``capacities[i]`` of them. Negative hashes wrap to
    nonnegative residues.
    """
    if not capacities or any(c <= 0 for c in capacities):
        raise ValueError("capacities must be nonempty and positive")
    prefix = list(itertools.accumulate(int(c) for c in capacities))
    h = record_hash % prefix[-1]
    return bisect.bisect_right(prefix, h)


@lru_cache(maxsize=256)
def _cycle_counts(capacities: tuple[int, ...]) -> tuple[int, ...]:
    counts = [0] * len(capacities)
    for h in range(sum(capacities)):
        counts[skewed_bucket(h, capacities)] += 1
    return tuple(counts)


def shuffle_sizes(total: int, weights: Sequence[float], scale: int = 1000) -> list[int]:
    """Bytes landing in each bucket when uniformly hashed records are routed by
    ``skewed_bucket`` with capacities derived from ``weights``."""
    caps = quantize_capacities(weights, scale)
    live = [i for i, c in enumerate(caps) if c > 0]
    counts = _cycle_counts(tuple(caps[i] for i in live))
    out = [0] * len(caps)
    for i, size in zip(live, partition_proportional(total, counts)):
        out[i] = size
    return out


def make_tasks(stage: Stage, sizes: Sequence[int], block_size: int | None = None,
               first_id: int = 0) -> list[Task]:
    """Materialize tasks over consecutive byte ranges of the stage input.

    Storage-backed ranges are cut at block boundaries when ``block_size`` is
    given; other inputs become one shuffle segment per task.
    """
    if sum(sizes) != stage.input_size:
        raise ValueError(
            f"stage {stage.id}: task sizes sum to {sum(sizes)}, input is {stage.input_size}")
    tasks = []
    offset = 0
    for j, size in enumerate(sizes):
        if size == 0:
            segs: tuple = ()
        elif stage.source == STORAGE and block_size:
            segs = tuple(_block_segments(offset, size, block_size))
        else:
            segs = ((None, int(size)),)
        tasks.append(Task(first_id + j, stage.id, int(size), stage.work_per_byte, segs))
        offset += size
    return tasks


def _block_segments(offset: int, size: int, block_size: int):
    end = offset + size
    while offset < end:
        block = offset // block_size
        stop = min(end, (block + 1) * block_size)
        yield block, stop - offset
        offset = stop


def build_jobs(kind: str, input_bytes: int, iterations: int = 1,
               work_per_byte: float = 1e-8, shuffle_ratio: float | None = None,
               stages: int = 1) -> list[Job]:
    """Jobs for one workload, in submission order.

    wordcount/synthetic: ``iterations`` back-to-back copies of the job.
    kmeans: ``iterations`` independent map+reduce jobs over the same input.
    pagerank: one job with a load stage and ``iterations`` chained shuffle
    stages. ``stages`` sets the chain length of a synthetic job.
    """
    if kind not in JOB_KINDS:
        raise ValueError(f"unknown job kind {kind!r}")
    if input_bytes < 0 or iterations < 1 or work_per_byte <= 0:
        raise ValueError("invalid job parameters")
    ratio = DEFAULT_SHUFFLE_RATIO[kind] if shuffle_ratio is None else shuffle_ratio
    if ratio < 0:
        raise ValueError("shuffle_ratio must be nonnegative")

    def chain(names: Sequence[str]) -> tuple[Stage, ...]:
        out = []
        size = int(input_bytes)
        for i, name in enumerate(names):
            out.append(Stage(i, name, size, work_per_byte,
                             STORAGE if i == 0 else SHUFFLE,
                             frozenset({i - 1}) if i else frozenset()))
            size = int(round(size * ratio))
        return tuple(out)

    if kind == "pagerank":
        names = ["load"] + ["iterate"] * iterations
        return [Job("pagerank", kind, chain(names), iterations)]
    if kind == "synthetic":
        n_stages = stages if ratio > 0 else 1
        names = [f"stage{i}" for i in range(n_stages)]
        return [Job(f"synthetic-{j}", kind, chain(names), 1) for j in range(iterations)]
    return [Job(f"{kind}-{j}", kind, chain(["map", "reduce"]), 1) for j in range(iterations)]
