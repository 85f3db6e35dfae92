"""Tasking strategies: pull-based homogeneous microtasking (HomT) and three
heterogeneous macrotasking (HeMT) planners.

The planners are pure functions; the strategy classes at the bottom bundle
them with the per-run state the engine needs (learned speeds, probe
corrections).
"""

from __future__ import annotations

import dataclasses
import math
import warnings
from collections import deque
from dataclasses import dataclass, field
from statistics import fmean
from typing import Mapping, Sequence

from .cluster import BURSTABLE, NodeSpec, WorkFunction, build_work_function, depletion_time
from .workload import PartitionPlan, Stage, partition_even, partition_proportional

VBAR_RULES = ("mean", "min", "max", "global")


@dataclass(frozen=True)
class ExecutorPool:
    executors: tuple[int, ...]
    newcomers: frozenset[int] = frozenset()
    capacities: tuple[float, ...] | None = None

    def __post_init__(self):
        if not self.newcomers <= set(self.executors):
            raise ValueError("newcomers must be a subset of executors")


@dataclass(frozen=True)
class SpeedEstimate:
    """Per-executor speed estimates (bytes/second) for one workload type."""

    speeds: Mapping[int, float] = field(default_factory=dict)
    alpha: float = 0.3
    rule: str = "mean"

    def __post_init__(self):
        if not 0 <= self.alpha < 1:
            raise ValueError("alpha must be in [0, 1)")
        if self.rule not in VBAR_RULES:
            raise ValueError(f"unknown vbar rule {self.rule!r}")

    def vbar(self, executors: Sequence[int] | None = None) -> float | None:
        """Fill-in speed for newcomers, or None when nothing is known."""
        if self.rule == "global" or executors is None:
            known = list(self.speeds.values())
        else:
            known = [self.speeds[e] for e in executors if e in self.speeds]
        if not known:
            return None
        if self.rule == "min":
            return min(known)
        if self.rule == "max":
            return max(known)
        return fmean(known)

    def total(self, executors: Sequence[int]) -> float:
        return math.fsum(self.speeds[e] for e in executors)


@dataclass(frozen=True)
class CreditPlanInput:
    functions: tuple[WorkFunction, ...]
    W0: float

    def __post_init__(self):
        if self.W0 <= 0:
            raise ValueError("W0 must be positive")
        if not self.functions:
            raise ValueError("need at least one work function")


def pull_next(pending: deque, executor=None):
    """Head of the FIFO queue, or None once it is drained."""
    return pending.popleft() if pending else None


def update_speed(est: SpeedEstimate, executor: int, d_i: float, t_i: float) -> SpeedEstimate:
    """First-order autoregressive update from one observed task."""
    if d_i <= 0 or t_i <= 0:
        raise ValueError("need positive task size and duration")
    observed = d_i / t_i
    speeds = dict(est.speeds)
    if executor in speeds:
        speeds[executor] = (1 - est.alpha) * observed + est.alpha * speeds[executor]
    else:
        speeds[executor] = observed
    return dataclasses.replace(est, speeds=speeds)


def cold_start(est: SpeedEstimate, pool: ExecutorPool) -> SpeedEstimate:
    """Give newcomers the fill-in speed of the known pool members."""
    fresh = set(pool.newcomers) | {e for e in pool.executors if e not in est.speeds}
    known = [e for e in pool.executors if e not in fresh]
    vbar = est.vbar(known)
    if not fresh or vbar is None:
        return est
    speeds = dict(est.speeds)
    for e in fresh:
        speeds[e] = vbar
    return dataclasses.replace(est, speeds=speeds)


def plan_adaptive(est: SpeedEstimate, pool: ExecutorPool, total: int) -> PartitionPlan:
    """Split ``total`` in proportion to estimated speeds; evenly if any
    executor is still unknown."""
    if any(e not in est.speeds for e in pool.executors):
        n = len(pool.executors)
        return PartitionPlan((1.0,) * n, tuple(partition_even(total, n)), "even")
    weights = tuple(est.speeds[e] for e in pool.executors)
    return PartitionPlan(weights, tuple(partition_proportional(total, weights)), "adaptive")


def superpose_and_invert(inputs: CreditPlanInput) -> tuple[float, list[float]]:
    """Time ``t'`` at which the summed work functions reach ``W0``, and each
    node's share ``W_i(t')``."""
    total = WorkFunction.superpose(inputs.functions)
    if all(s <= 0 for s in total.slopes) and total.tail_slope <= 0:
        raise ValueError("superposed work function is flat")
    t_prime = total.inverse(inputs.W0)
    return t_prime, [f(t_prime) for f in inputs.functions]


def credit_work_functions(nodes: Sequence[NodeSpec], credits: Sequence[float],
                          W0: float) -> tuple[WorkFunction, ...]:
    """Interference-free work functions from each node's current credits."""
    deps = [depletion_time(n, c) for n, c in zip(nodes, credits) if n.kind == BURSTABLE]
    horizon = max([d for d in deps if math.isfinite(d)], default=0.0) + W0 + 1.0
    return tuple(build_work_function(dataclasses.replace(n, interference=()), c, horizon)
                 for n, c in zip(nodes, credits))


def plan_credit_based(nodes: Sequence[NodeSpec], W0: float, total: int,
                      credits: Sequence[float] | None = None) -> PartitionPlan:
    if credits is None:
        credits = [n.initial_credits for n in nodes]
    fns = credit_work_functions(nodes, credits, W0)
    _, weights = superpose_and_invert(CreditPlanInput(fns, W0))
    return PartitionPlan(tuple(weights), tuple(partition_proportional(total, weights)),
                         "credit-based")


def calibrate_fudge(plan: PartitionPlan,
                    probe_observations: Sequence[tuple[float, float] | None]) -> PartitionPlan:
    """Re-plan with speeds observed on short probe tasks, one per executor."""
    obs = list(probe_observations)
    if len(obs) != len(plan.weights) or any(
            o is None or o[0] <= 0 or o[1] <= 0 for o in obs):
        warnings.warn("probe observations missing; keeping nominal plan", RuntimeWarning,
                      stacklevel=2)
        return plan
    weights = tuple(d / t for d, t in obs)
    return PartitionPlan(weights, tuple(partition_proportional(plan.total, weights)),
                         plan.provenance)


class Strategy:
    """Base for tasking strategies driven by the engine."""

    name = "strategy"
    k: int | None = None
    probe_fraction = 0.0

    def plan(self, stage: Stage, kind: str, nodes: Sequence[NodeSpec],
             credits: Sequence[float]) -> PartitionPlan:
        raise NotImplementedError

    def observe(self, stage: Stage, kind: str, sizes: Sequence[int],
                times: Sequence[float | None]) -> None:
        """Feed back per-executor (size, execution time) after a stage."""

    def wants_probe(self, stage: Stage, kind: str) -> bool:
        return False

    def apply_probe(self, stage: Stage, kind: str, plan: PartitionPlan,
                    observations: Sequence[tuple[float, float] | None]) -> PartitionPlan:
        return plan


class HomT(Strategy):
    name = "homt-k"

    def __init__(self, k: int):
        if k < 1:
            raise ValueError("k must be >= 1")
        self.k = k

    def plan(self, stage, kind, nodes, credits):
        sizes = tuple(partition_even(stage.input_size, self.k))
        return PartitionPlan((1.0,) * self.k, sizes, "even", pull=True)


class _Probed(Strategy):
    """Mixin state for probe-based fudge-factor correction."""

    def __init__(self, probe: bool = False, probe_fraction: float = 0.01):
        self.probe = probe
        self.probe_fraction = probe_fraction if probe else 0.0
        self._fudge: dict[tuple[str, str], tuple[float, ...]] = {}

    def wants_probe(self, stage, kind):
        return self.probe and (kind, stage.name) not in self._fudge

    def apply_probe(self, stage, kind, plan, observations):
        new = calibrate_fudge(plan, observations)
        if new is not plan:
            self._fudge[(kind, stage.name)] = tuple(
                w1 / w0 if w0 > 0 else 0.0 for w0, w1 in zip(plan.weights, new.weights))
        return new

    def _corrected(self, stage, kind, plan: PartitionPlan) -> PartitionPlan:
        fudge = self._fudge.get((kind, stage.name))
        if fudge is None:
            return plan
        weights = tuple(w * f for w, f in zip(plan.weights, fudge))
        return PartitionPlan(weights, tuple(partition_proportional(plan.total, weights)),
                             plan.provenance)


class HeMTStatic(_Probed):
    """One task per executor sized by nominal capacity."""

    name = "hemt-static"

    def plan(self, stage, kind, nodes, credits):
        weights = tuple(n.nominal_speed if n.kind != BURSTABLE
                        else (1.0 if c > 0 else n.baseline)
                        for n, c in zip(nodes, credits))
        plan = PartitionPlan(weights, tuple(partition_proportional(stage.input_size, weights)),
                             "static-capacity")
        return self._corrected(stage, kind, plan)


class HeMTCredit(_Probed):
    """One task per executor sized by superposed credit work functions."""

    name = "hemt-credit"

    def plan(self, stage, kind, nodes, credits):
        W0 = stage.input_size * stage.work_per_byte
        if W0 <= 0:
            n = len(nodes)
            return PartitionPlan((1.0,) * n, tuple(partition_even(stage.input_size, n)),
                                 "credit-based")
        plan = plan_credit_based(nodes, W0, stage.input_size, credits)
        return self._corrected(stage, kind, plan)


class OAHeMT(Strategy):
    """Oblivious adaptive HeMT: speeds learned per (job kind, stage name)."""

    name = "oa-hemt"

    def __init__(self, alpha: float = 0.3, rule: str = "mean"):
        self.alpha = alpha
        self.rule = rule
        SpeedEstimate(alpha=alpha, rule=rule)  # validate early
        self.estimates: dict[tuple[str, str], SpeedEstimate] = {}
        self._seen: dict[tuple[str, str], set[int]] = {}

    def _estimate(self, key) -> SpeedEstimate:
        if key not in self.estimates:
            self.estimates[key] = SpeedEstimate(alpha=self.alpha, rule=self.rule)
        return self.estimates[key]

    def plan(self, stage, kind, nodes, credits):
        key = (kind, stage.name)
        executors = tuple(range(len(nodes)))
        pool = ExecutorPool(executors, frozenset(set(executors) - self._seen.get(key, set())))
        est = cold_start(self._estimate(key), pool)
        self.estimates[key] = est
        return plan_adaptive(est, pool, stage.input_size)

    def observe(self, stage, kind, sizes, times):
        key = (kind, stage.name)
        est = self._estimate(key)
        seen = self._seen.setdefault(key, set())
        for e, (d, t) in enumerate(zip(sizes, times)):
            if d > 0 and t is not None and t > 0:
                if e not in seen and e in est.speeds:
                    # drop the cold-start placeholder so the first real
                    # observation is taken as-is
                    est = dataclasses.replace(
                        est, speeds={k: v for k, v in est.speeds.items() if k != e})
                est = update_speed(est, e, d, t)
                seen.add(e)
        self.estimates[key] = est
