"""Node capacity models: static fractional-CPU nodes, burstable token-bucket
nodes and piecewise-constant interference.

Time is in seconds everywhere. CPU credits are in credit-minutes (one credit
is one full CPU busy for one minute), converted at this module's boundary.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

STATIC = "static"
BURSTABLE = "burstable"


@dataclass(frozen=True)
class NodeSpec:
    """Capacity description of one compute node.

    ``capacity`` applies to static nodes; burstable nodes run at 1.0 while
    they hold credits and at ``baseline`` afterwards. ``interference`` is a
    sequence of ``(start_time, multiplier)`` pairs; the multiplier before the
    first start time is 1.0.
    """

    id: str
    kind: str = STATIC
    capacity: float = 1.0
    baseline: float = 1.0
    earn_rate: float | None = None
    credit_cap: float | None = None
    initial_credits: float = 0.0
    interference: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        if self.kind not in (STATIC, BURSTABLE):
            raise ValueError(f"node {self.id!r}: unknown kind {self.kind!r}")
        if not 0 < self.capacity <= 1:
            raise ValueError(f"node {self.id!r}: capacity must be in (0, 1]")
        if not 0 < self.baseline <= 1:
            raise ValueError(f"node {self.id!r}: baseline must be in (0, 1]")
        if self.earn_rate is None:
            object.__setattr__(self, "earn_rate", self.baseline)
        if self.credit_cap is None:
            # a day's earnings; arbitrary, horizons used here never reach it
            object.__setattr__(self, "credit_cap", 24 * 60 * self.earn_rate)
        if self.earn_rate < 0:
            raise ValueError(f"node {self.id!r}: earn_rate must be >= 0")
        if self.credit_cap < 0:
            raise ValueError(f"node {self.id!r}: credit_cap must be >= 0")
        if not 0 <= self.initial_credits <= self.credit_cap:
            raise ValueError(
                f"node {self.id!r}: initial_credits must be in [0, credit_cap]")
        sched = tuple((float(t), float(m)) for t, m in self.interference)
        for (t0, _), (t1, _) in zip(sched, sched[1:]):
            if t1 <= t0:
                raise ValueError(
                    f"node {self.id!r}: interference times must be strictly increasing")
        if any(not 0 < m <= 1 for _, m in sched):
            raise ValueError(
                f"node {self.id!r}: interference multipliers must be in (0, 1]")
        object.__setattr__(self, "interference", sched)

    @property
    def nominal_speed(self) -> float:
        """Speed an operator would assume at launch, ignoring interference."""
        if self.kind == STATIC:
            return self.capacity
        return 1.0 if self.initial_credits > 0 else self.baseline

    def interference_multiplier(self, t: float) -> float:
        times = [s for s, _ in self.interference]
        i = bisect.bisect_right(times, t)
        return 1.0 if i == 0 else self.interference[i - 1][1]

    def next_interference_change(self, t: float) -> float:
        """First schedule boundary strictly after ``t`` (inf if none)."""
        for s, _ in self.interference:
            if s > t:
                return s
        return math.inf


@dataclass(frozen=True)
class CreditState:
    credits: float = 0.0
    last_update: float = 0.0


def effective_speed(spec: NodeSpec, credit: CreditState, t: float) -> float:
    """Fraction of a full core the node delivers at time ``t``."""
    if spec.kind == STATIC:
        base = spec.capacity
    else:
        base = 1.0 if credit.credits > 0 else spec.baseline
    return spec.interference_multiplier(t) * base


def advance_credits(spec: NodeSpec, credit: CreditState, busy_fraction: float,
                    dt: float) -> CreditState:
    """Net the credit balance over ``dt`` seconds of ``busy_fraction`` use.

    Earning and spending are netted linearly and the result is clamped to
    ``[0, credit_cap]``. Callers that need exact trajectories must split the
    interval where the clamp engages.
    """
    if dt < 0:
        raise ValueError("dt must be nonnegative")
    if spec.kind == STATIC:
        return CreditState(credit.credits, credit.last_update + dt)
    delta = (spec.earn_rate - busy_fraction) * dt / 60.0
    credits = min(max(credit.credits + delta, 0.0), spec.credit_cap)
    return CreditState(credits, credit.last_update + dt)


def depletion_time(spec: NodeSpec, credits: float) -> float:
    """Seconds of continuous full-busy use until ``credits`` run out."""
    if spec.kind == STATIC or math.isinf(credits):
        return math.inf
    burn = 1.0 - spec.earn_rate
    if burn <= 0:
        return math.inf
    return credits * 60.0 / burn


@dataclass(frozen=True)
class WorkFunction:
    """Cumulative full-CPU work W(t) a node can finish by time t.

    Piecewise linear through ``breakpoints`` (seconds, CPU-seconds), starting
    at (0, 0); beyond the last breakpoint the final slope continues.
    """

    breakpoints: tuple[tuple[float, float], ...]
    tail_slope: float | None = field(default=None)

    def __post_init__(self):
        pts = tuple((float(t), float(w)) for t, w in self.breakpoints)
        if not pts or pts[0] != (0.0, 0.0):
            raise ValueError("work function must start at (0, 0)")
        for (t0, w0), (t1, w1) in zip(pts, pts[1:]):
            if t1 <= t0:
                raise ValueError("breakpoint times must be strictly increasing")
            if w1 < w0:
                raise ValueError("work must be nondecreasing")
        object.__setattr__(self, "breakpoints", pts)
        if self.tail_slope is None:
            object.__setattr__(self, "tail_slope",
                               self.slopes[-1] if len(pts) > 1 else 0.0)

    @property
    def times(self) -> np.ndarray:
        return np.array([t for t, _ in self.breakpoints])

    @property
    def values(self) -> np.ndarray:
        return np.array([w for _, w in self.breakpoints])

    @property
    def slopes(self) -> list[float]:
        pts = self.breakpoints
        return [(w1 - w0) / (t1 - t0) for (t0, w0), (t1, w1) in zip(pts, pts[1:])]

    def __call__(self, t: float) -> float:
        if t < 0:
            raise ValueError("t must be nonnegative")
        t_last, w_last = self.breakpoints[-1]
        if t >= t_last:
            return w_last + self.tail_slope * (t - t_last)
        return float(np.interp(t, self.times, self.values))

    def is_concave(self) -> bool:
        s = self.slopes + [self.tail_slope]
        return all(b <= a + 1e-12 for a, b in zip(s, s[1:]))

    def inverse(self, work: float) -> float:
        """Earliest t with W(t) = work."""
        if work < 0:
            raise ValueError("work must be nonnegative")
        pts = self.breakpoints
        for (t0, w0), (t1, w1) in zip(pts, pts[1:]):
            if work <= w1:
                if w1 == w0:
                    return t0
                return t0 + (work - w0) * (t1 - t0) / (w1 - w0)
        t_last, w_last = pts[-1]
        if self.tail_slope <= 0:
            raise ValueError("work beyond the reach of a flat work function")
        return t_last + (work - w_last) / self.tail_slope

    @classmethod
    def superpose(cls, functions: Sequence[WorkFunction]) -> WorkFunction:
        """Pointwise sum over the union of all breakpoints."""
        if not functions:
            raise ValueError("nothing to superpose")
        times = sorted({t for f in functions for t, _ in f.breakpoints})
        pts = [(t, math.fsum(f(t) for f in functions)) for t in times]
        return cls(tuple(pts), tail_slope=math.fsum(f.tail_slope for f in functions))


def _collapse(points: Iterable[tuple[float, float]]) -> tuple[tuple[float, float], ...]:
    out: list[tuple[float, float]] = []
    for t, w in points:
        if out and t <= out[-1][0]:
            continue
        out.append((t, w))
    return tuple(out)


def build_work_function(spec: NodeSpec, initial_credits: float,
                        horizon: float) -> WorkFunction:
    """W(t) for a node kept continuously busy from time 0 up to ``horizon``.

    Interference in ``spec`` (times relative to 0) is folded in; strip it from
    the node to get the nominal curve.
    """
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    cuts = {0.0, float(horizon)}
    cuts.update(s for s, _ in spec.interference if 0 < s < horizon)
    t_dep = depletion_time(spec, initial_credits) if spec.kind == BURSTABLE else math.inf
    if t_dep < horizon:
        cuts.add(t_dep)
    times = sorted(cuts)

    def speed_on(t0: float) -> float:
        if spec.kind == STATIC:
            base = spec.capacity
        else:
            base = 1.0 if t0 < t_dep else spec.baseline
        return spec.interference_multiplier(t0) * base

    pts = [(0.0, 0.0)]
    w = 0.0
    for t0, t1 in zip(times, times[1:]):
        w += speed_on(t0) * (t1 - t0)
        pts.append((t1, w))
    return WorkFunction(_collapse(pts), tail_slope=speed_on(times[-1]))
