"""Deterministic fluid discrete-event simulation of stages and jobs.

Each node runs one executor. A task launch costs ``sched_overhead`` followed
by ``io_setup`` of dead time; then the task's CPU work and its reads progress
as fluid flows. CPU progresses at the node's effective speed, reads at the
fair share of the serving datanode's uplink. Rates are recomputed at every
event: task start/end, read segment end, credit depletion, interference
boundary.
"""

from __future__ import annotations

import math
from collections import Counter, deque
from dataclasses import dataclass, field
from graphlib import CycleError, TopologicalSorter
from typing import Sequence

import numpy as np

from .cluster import BURSTABLE, CreditState, NodeSpec, effective_speed
from .scheduler import Strategy, pull_next
from .storage import ReplicaMap, StorageConfig, place_blocks, select_read_node, uplink_rate
from .workload import (SHUFFLE, STORAGE, Job, PartitionPlan, Stage, Task, make_tasks,
                       shuffle_sizes)

_REL = 1e-12
_ABS = 1e-12


@dataclass(frozen=True)
class SimConfig:
    sched_overhead: float = 0.1
    io_setup: float = 0.05
    pipeline: bool = True
    shuffle_bw: float = math.inf  # bytes/second per shuffle fetch
    seed: int = 0

    def __post_init__(self):
        if self.sched_overhead < 0 or self.io_setup < 0:
            raise ValueError("overheads must be nonnegative")
        if self.shuffle_bw <= 0:
            raise ValueError("shuffle_bw must be positive")


@dataclass(frozen=True)
class TaskRecord:
    task: int
    stage: int
    node: int
    size: int
    cpu_work: float
    launch: float
    start: float  # after scheduling overhead; executor run time counts from here
    ready: float  # after the first-read setup; data processing starts here
    end: float
    cpu_end: float
    io_end: float

    @property
    def duration(self) -> float:
        return self.end - self.launch

    @property
    def exec_time(self) -> float:
        return self.end - self.start

    @property
    def processing_time(self) -> float:
        """Time spent moving and crunching data, without fixed launch costs."""
        return self.end - self.ready

    @property
    def bottleneck(self) -> str:
        return "cpu" if self.cpu_end >= self.io_end else "net"


@dataclass(frozen=True)
class StageMetrics:
    stage: int
    name: str
    start: float
    end: float
    finish: tuple[float, ...]  # per node; stage start for nodes that ran nothing
    tasks: tuple[TaskRecord, ...]

    @property
    def completion(self) -> float:
        return self.end - self.start

    @property
    def sync_delay(self) -> float:
        return max(self.finish) - min(self.finish)

    @property
    def idle_cpu(self) -> float:
        return math.fsum(self.end - f for f in self.finish)

    @property
    def bottleneck_mix(self) -> float:
        """Fraction of tasks whose CPU side finished last."""
        if not self.tasks:
            return 0.0
        return sum(t.bottleneck == "cpu" for t in self.tasks) / len(self.tasks)

    def node_tasks(self, node: int) -> list[TaskRecord]:
        return [t for t in self.tasks if t.node == node]

    @property
    def last_task_offsets(self) -> tuple[float | None, ...]:
        """Per node, how long its last task had been running when the first
        node went idle (None for nodes that ran nothing)."""
        t0 = min(self.finish)
        out = []
        for i in range(len(self.finish)):
            mine = self.node_tasks(i)
            out.append(t0 - mine[-1].launch if mine else None)
        return tuple(out)

    def per_executor(self, n_nodes: int) -> tuple[list[int], list[float | None]]:
        """Bytes and summed processing time per executor."""
        sizes = [0] * n_nodes
        times: list[float | None] = [None] * n_nodes
        for t in self.tasks:
            sizes[t.node] += t.size
            times[t.node] = (times[t.node] or 0.0) + t.processing_time
        return sizes, times


@dataclass
class ClusterState:
    """Mutable per-run node state: credit balances and the clock."""

    nodes: list[NodeSpec]
    credits: list[float]
    now: float = 0.0

    @classmethod
    def from_specs(cls, nodes: Sequence[NodeSpec]) -> ClusterState:
        return cls(list(nodes), [n.initial_credits if n.kind == BURSTABLE else 0.0
                                 for n in nodes])

    def speed(self, i: int, t: float) -> float:
        return effective_speed(self.nodes[i], CreditState(self.credits[i], t), t)


@dataclass
class StorageState:
    cfg: StorageConfig
    replicas: ReplicaMap
    rng: np.random.Generator

    @classmethod
    def create(cls, cfg: StorageConfig, input_bytes: int,
               rng: np.random.Generator) -> StorageState:
        blocks = max(1, math.ceil(input_bytes / cfg.block_size))
        return cls(cfg, place_blocks(rng, cfg, blocks), rng)


@dataclass
class _Running:
    task: Task
    node: int
    launch: float
    ready: float
    cpu_left: float
    segs: deque = field(default_factory=deque)
    started: bool = False
    seg_left: float = 0.0
    seg_block: int | None = None
    seg_dn: int | None = None
    seg_active: bool = False
    cpu_end: float | None = None
    io_end: float | None = None


def _finished_within(left: float, rate: float, dt: float) -> bool:
    return rate > 0 and left / rate <= dt * (1 + _REL) + _ABS


def run_stage(stage: Stage, plan: PartitionPlan, cluster: ClusterState, cfg: SimConfig,
              storage: StorageState | None = None) -> StageMetrics:
    """Run one stage to its barrier starting at ``cluster.now``.

    ``plan.pull`` selects pull-based dispatch from a FIFO queue (lowest node
    id first on ties); otherwise task ``i`` is pushed to node ``i`` and
    zero-size tasks are skipped.
    """
    n = len(cluster.nodes)
    block_size = storage.cfg.block_size if storage and stage.source == STORAGE else None
    tasks = make_tasks(stage, plan.sizes, block_size)
    if not plan.pull and len(tasks) != n:
        raise ValueError(f"push plan has {len(tasks)} tasks for {n} executors")

    start = now = cluster.now
    running: dict[int, _Running] = {}
    queue: deque = deque(tasks) if plan.pull else deque()
    records: list[TaskRecord] = []
    finish = [start] * n

    def launch(node: int, task: Task):
        ready = now + cfg.sched_overhead + cfg.io_setup
        running[node] = _Running(task, node, now, ready, task.cpu_work, deque(task.segments))

    def next_segment(r: _Running):
        r.seg_active = False
        while r.segs:
            block, nbytes = r.segs.popleft()
            r.seg_block, r.seg_left = block, float(nbytes)
            if block is not None and storage is not None:
                r.seg_dn = select_read_node(storage.rng, storage.replicas[block])
            else:
                r.seg_dn = None
                if math.isinf(cfg.shuffle_bw) or (block is not None and storage is None):
                    continue  # unconstrained fetch completes instantly
            r.seg_active = True
            return
        r.io_end = now

    def cpu_running(r: _Running) -> bool:
        return r.started and r.cpu_left > 0 and (cfg.pipeline or not r.seg_active)

    def cpu_busy(node: int) -> bool:
        # task launch keeps the executor's CPU occupied, so no credits accrue
        r = running.get(node)
        return r is not None and (not r.started or cpu_running(r))

    def settle():
        """Start ready tasks, retire finished ones and refill idle nodes."""
        progressed = True
        while progressed:
            progressed = False
            for node in range(n):
                r = running.get(node)
                if r is None:
                    continue
                if not r.started and r.ready <= now + _ABS:
                    r.started = True
                    next_segment(r)
                    if r.cpu_left <= 0:
                        r.cpu_end = now
                if r.started and not r.seg_active and r.io_end is None:
                    r.io_end = now
                if r.started and r.cpu_left <= 0 and r.cpu_end is None:
                    r.cpu_end = now
                if r.started and r.cpu_left <= 0 and not r.seg_active:
                    records.append(TaskRecord(
                        r.task.id, stage.id, node, r.task.input_size, r.task.cpu_work,
                        r.launch, r.launch + cfg.sched_overhead, r.ready, now, r.cpu_end,
                        r.io_end))
                    finish[node] = now
                    del running[node]
                    if plan.pull:
                        nxt = pull_next(queue, node)
                        if nxt is not None:
                            launch(node, nxt)
                    progressed = True

    if plan.pull:
        for node in range(n):
            t = pull_next(queue, node)
            if t is None:
                break
            launch(node, t)
    else:
        for node, t in enumerate(tasks):
            if t.input_size > 0:
                launch(node, t)
    settle()

    while running:
        readers = Counter(r.seg_dn for r in running.values()
                          if r.seg_active and r.seg_dn is not None)
        io_rate: dict[int, float] = {}
        cpu_rate: dict[int, float] = {}
        dt = math.inf
        depletes: set[int] = set()
        for node, r in running.items():
            if not r.started:
                dt = min(dt, r.ready - now)
                continue
            if r.seg_active:
                io_rate[node] = (uplink_rate(readers[r.seg_dn], storage.cfg)
                                 if r.seg_dn is not None else cfg.shuffle_bw)
                dt = min(dt, r.seg_left / io_rate[node])
            if cpu_running(r):
                cpu_rate[node] = cluster.speed(node, now)
                dt = min(dt, r.cpu_left / cpu_rate[node])
                dt = min(dt, cluster.nodes[node].next_interference_change(now) - now)
        for node, spec in enumerate(cluster.nodes):
            if spec.kind != BURSTABLE or cluster.credits[node] <= 0:
                continue
            busy = 1.0 if cpu_busy(node) else 0.0
            burn = (busy - spec.earn_rate) / 60.0
            if burn > 0:
                t_dep = cluster.credits[node] / burn
                if t_dep <= dt:
                    if t_dep < dt:
                        depletes.clear()
                    dt = t_dep
                    depletes.add(node)
        if not math.isfinite(dt):
            raise RuntimeError("simulation stalled: no progress possible")
        dt = max(dt, 0.0)

        for node, spec in enumerate(cluster.nodes):
            if spec.kind != BURSTABLE:
                continue
            if node in depletes:
                cluster.credits[node] = 0.0
                continue
            busy = 1.0 if cpu_busy(node) else 0.0
            c = cluster.credits[node] + (spec.earn_rate - busy) * dt / 60.0
            cluster.credits[node] = min(max(c, 0.0), spec.credit_cap)
        for node, r in running.items():
            if node in cpu_rate:
                if _finished_within(r.cpu_left, cpu_rate[node], dt):
                    r.cpu_left = 0.0
                else:
                    r.cpu_left -= cpu_rate[node] * dt
            if node in io_rate:
                if _finished_within(r.seg_left, io_rate[node], dt):
                    r.seg_left = 0.0
                else:
                    r.seg_left -= io_rate[node] * dt
        now += dt
        for r in running.values():
            if r.seg_active and r.seg_left <= 0:
                next_segment(r)
        settle()

    cluster.now = now
    return StageMetrics(stage.id, stage.name, start, now, tuple(finish), tuple(records))


def run_probes(stage: Stage, fraction: float, cluster: ClusterState, cfg: SimConfig,
               storage: StorageState | None = None) -> list[tuple[float, float] | None]:
    """Short trial tasks, one per executor, each ``fraction`` of the stage input.

    Returns per-executor (bytes, processing time). Advances the cluster clock
    and credits, but the caller keeps the result out of stage metrics.
    """
    n = len(cluster.nodes)
    size = max(1, int(round(stage.input_size * fraction)))
    probe = Stage(stage.id, f"{stage.name}-probe", size * n, stage.work_per_byte,
                  stage.source, stage.deps)
    m = run_stage(probe, PartitionPlan((1.0,) * n, (size,) * n, "even"), cluster, cfg, storage)
    obs: list[tuple[float, float] | None] = [None] * n
    for t in m.tasks:
        obs[t.node] = (float(t.size), t.processing_time)
    return obs


def stage_order(job: Job) -> list[int]:
    try:
        return list(TopologicalSorter({s.id: s.deps for s in job.stages}).static_order())
    except CycleError as exc:
        raise ValueError(f"job {job.name!r} has a cyclic stage graph") from exc


def run_job(job: Job, strategy: Strategy, cluster: ClusterState, cfg: SimConfig,
            storage: StorageState | None = None) -> list[StageMetrics]:
    """Run every stage of ``job`` in dependency order, one barrier at a time."""
    out = []
    n = len(cluster.nodes)
    for sid in stage_order(job):
        stage = job.stage(sid)
        plan = strategy.plan(stage, job.kind, cluster.nodes, list(cluster.credits))
        if strategy.wants_probe(stage, job.kind):
            obs = run_probes(stage, strategy.probe_fraction, cluster, cfg, storage)
            plan = strategy.apply_probe(stage, job.kind, plan, obs)
        if stage.source == SHUFFLE and not plan.pull and stage.input_size > 0:
            sizes = shuffle_sizes(stage.input_size, plan.weights)
            plan = PartitionPlan(plan.weights, tuple(sizes), plan.provenance)
        metrics = run_stage(stage, plan, cluster, cfg, storage)
        if not plan.pull:
            strategy.observe(stage, job.kind, *metrics.per_executor(n))
        out.append(metrics)
    return out


def run_workload(jobs: Sequence[Job], strategy: Strategy, nodes: Sequence[NodeSpec],
                 cfg: SimConfig, storage_cfg: StorageConfig | None = None,
                 seed: int | None = None) -> list[tuple[int, StageMetrics]]:
    """Run ``jobs`` back to back on a fresh cluster; returns (job index, metrics)."""
    rng = np.random.default_rng(cfg.seed if seed is None else seed)
    cluster = ClusterState.from_specs(nodes)
    storage = None
    if storage_cfg is not None:
        input_bytes = max((s.input_size for j in jobs for s in j.stages if s.source == STORAGE),
                          default=0)
        storage = StorageState.create(storage_cfg, input_bytes, rng)
    out = []
    for j, job in enumerate(jobs):
        out.extend((j, m) for m in run_job(job, strategy, cluster, cfg, storage))
    return out


def verify_claim1(metrics: StageMetrics, tol: float = 1e-9) -> tuple[bool, dict]:
    """Check the pull-tasking idle bound: sync delay is at most the longest
    single-task duration observed on any node (the slowest node's)."""
    bound, slowest = 0.0, None
    for t in metrics.tasks:
        if t.duration > bound:
            bound, slowest = t.duration, t.node
    sync = metrics.sync_delay
    return sync <= bound + tol * max(1.0, bound), {
        "sync_delay": sync, "bound": bound, "slowest_node": slowest}
