"""Declarative scenarios, seeded replications and CSV output.

A scenario is a YAML mapping::

    name: container04
    description: free text (optional)
    nodes:                      # one executor per node
      - {id: full, kind: static, capacity: 1.0}
      - {id: slow, kind: burstable, baseline: 0.4, credits: 0,
         interference: [[0, 0.8]]}
    storage:                    # optional; omit for no network model
      {n: 4, r: 2, uplink_mbps: 600, block_mib: 1024}
    job:
      {kind: wordcount, input_mib: 2048, iterations: 1, cpu_s_per_mib: 0.04,
       shuffle_ratio: 0.01, stages: 1}
    strategies:
      - {name: homt-k, k: [2, 4, 8]}
      - {name: hemt-static}
      - {name: hemt-credit, probe: true}
      - {name: oa-hemt, alpha: 0.0, vbar: mean}
    sim: {sched_overhead: 0.1, io_setup: 0.05, pipeline: true, shuffle_mbps: .inf}
    replications: 3
    seed: 1

Node keys: ``id``, ``kind`` (static | burstable), ``capacity`` (static only),
``baseline``, ``earn_rate``, ``credit_cap``, ``credits`` (burstable only) and
``interference``. Strategy keys: ``k`` (homt-k, int or list), ``probe`` and
``probe_fraction`` (hemt-static, hemt-credit), ``alpha`` and ``vbar``
(oa-hemt), ``label`` (any). ``shuffle_ratio: null`` picks the job kind's
default. Unknown keys are errors.
"""

from __future__ import annotations

import csv
import io
import math
import re
import statistics
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Callable

import yaml

from .cluster import BURSTABLE, STATIC, NodeSpec
from .engine import SimConfig, run_workload
from .scheduler import VBAR_RULES, HeMTCredit, HeMTStatic, HomT, OAHeMT, Strategy
from .storage import StorageConfig
from .workload import JOB_KINDS, build_jobs

MiB = 2 ** 20


class _Loader(yaml.SafeLoader):
    """Safe loader that also reads exponent floats without a dot, like 1e-9."""


_Loader.add_implicit_resolver(
    "tag:yaml.org,2002:float",
    re.compile(r"^[-+]?(?:[0-9][0-9_]*)(?:\.[0-9_]*)?[eE][-+]?[0-9]+$"),
    list("-+0123456789"))
STRATEGY_NAMES = ("homt-k", "hemt-static", "hemt-credit", "oa-hemt")

STAGE_COLUMNS = ("scenario", "strategy", "k", "replication", "job", "stage",
                 "completion_s", "sync_delay_s", "idle_cpu_s", "bottleneck_mix")
SUMMARY_COLUMNS = ("scenario", "strategy", "k", "mean_completion_s", "sd_completion_s",
                   "sigma_low_s", "sigma_high_s", "reps")
TASK_COLUMNS = ("scenario", "strategy", "k", "replication", "job", "stage", "task", "node",
                "size_bytes", "launch_s", "start_s", "end_s", "bottleneck")


class ScenarioError(ValueError):
    def __init__(self, message: str, path: str = "", mark=None):
        where = f"line {mark.line + 1}, column {mark.column + 1}: " if mark is not None else ""
        prefix = f"{path}: " if path else ""
        super().__init__(f"{where}{prefix}{message}")
        self.path = path
        self.mark = mark


@dataclass(frozen=True)
class StorageSpec:
    n: int
    r: int
    uplink_mbps: float
    block_mib: float = 128.0

    def config(self) -> StorageConfig:
        return StorageConfig(self.n, self.r, self.uplink_mbps * 1e6 / 8,
                             int(round(self.block_mib * MiB)))


@dataclass(frozen=True)
class JobSpec:
    kind: str
    input_mib: float
    cpu_s_per_mib: float
    iterations: int = 1
    shuffle_ratio: float | None = None
    stages: int = 1

    def jobs(self):
        return build_jobs(self.kind, int(round(self.input_mib * MiB)), self.iterations,
                          self.cpu_s_per_mib / MiB, self.shuffle_ratio, self.stages)


@dataclass(frozen=True)
class StrategySpec:
    name: str
    k: tuple[int, ...] = ()
    alpha: float = 0.3
    vbar: str = "mean"
    probe: bool = False
    probe_fraction: float = 0.01
    label: str | None = None

    @property
    def display(self) -> str:
        if self.label:
            return self.label
        return self.name + ("+probe" if self.probe else "")

    def expand(self) -> list[tuple[str, int | None, Callable[[], Strategy]]]:
        """(label, k, factory) per runnable configuration."""
        if self.name == "homt-k":
            return [(self.display, k, lambda k=k: HomT(k)) for k in self.k]
        if self.name == "hemt-static":
            return [(self.display, None, lambda: HeMTStatic(self.probe, self.probe_fraction))]
        if self.name == "hemt-credit":
            return [(self.display, None, lambda: HeMTCredit(self.probe, self.probe_fraction))]
        return [(self.display, None, lambda: OAHeMT(self.alpha, self.vbar))]


@dataclass(frozen=True)
class SimSpec:
    sched_overhead: float = 0.1
    io_setup: float = 0.05
    pipeline: bool = True
    shuffle_mbps: float = math.inf

    def config(self, seed: int) -> SimConfig:
        return SimConfig(self.sched_overhead, self.io_setup, self.pipeline,
                         self.shuffle_mbps * 1e6 / 8, seed)


@dataclass(frozen=True)
class Scenario:
    name: str
    nodes: tuple[NodeSpec, ...]
    job: JobSpec
    strategies: tuple[StrategySpec, ...]
    storage: StorageSpec | None = None
    sim: SimSpec = field(default_factory=SimSpec)
    replications: int = 1
    seed: int = 0
    description: str = ""


@dataclass(frozen=True)
class SummaryRow:
    scenario: str
    strategy: str
    k: int | None
    mean: float
    sd: float
    low: float
    high: float
    reps: int


@dataclass
class ScenarioResult:
    scenario: Scenario
    stage_rows: list[dict]
    summary: list[SummaryRow]
    task_rows: list[dict] = field(default_factory=list)

    def summary_for(self, strategy: str, k: int | None = None) -> SummaryRow:
        for row in self.summary:
            if row.strategy == strategy and row.k == k:
                return row
        raise KeyError((strategy, k))


# -- parsing ---------------------------------------------------------------

class _Doc:
    """YAML tree converted to Python, remembering where each path came from."""

    def __init__(self, text: str):
        try:
            root = yaml.compose(text, Loader=_Loader)
        except yaml.YAMLError as exc:
            raise ScenarioError(f"malformed YAML: {exc.problem}", mark=exc.problem_mark) from exc
        if root is None:
            raise ScenarioError("empty scenario")
        self.marks: dict[str, Any] = {}
        self.key_marks: dict[str, Any] = {}
        self._ctor = yaml.constructor.SafeConstructor()
        self.data = self._convert(root, "")

    def _convert(self, node, path):
        self.marks[path] = node.start_mark
        if isinstance(node, yaml.MappingNode):
            out = {}
            for k, v in node.value:
                key = self._ctor.construct_object(k)
                sub = f"{path}.{key}" if path else str(key)
                self.key_marks[sub] = k.start_mark
                out[key] = self._convert(v, sub)
            return out
        if isinstance(node, yaml.SequenceNode):
            return [self._convert(v, f"{path}[{i}]") for i, v in enumerate(node.value)]
        return self._ctor.construct_object(node)

    def error(self, path: str, message: str, at_key: bool = False) -> ScenarioError:
        if at_key and path in self.key_marks:
            return ScenarioError(message, path, self.key_marks[path])
        probe = path
        while probe and probe not in self.marks:
            probe = probe.rsplit(".", 1)[0] if "." in probe else ""
        return ScenarioError(message, path, self.marks.get(probe))


def _section(doc: _Doc, data, path: str, allowed, required=()) -> dict:
    if not isinstance(data, dict):
        raise doc.error(path, "expected a mapping")
    for key in data:
        if key not in allowed:
            raise doc.error(f"{path}.{key}" if path else str(key), "unknown key", at_key=True)
    for key in required:
        if key not in data:
            raise doc.error(path, f"missing required field {key!r}")
    return data


def _num(doc, path, value, kind=float, lo=None, hi=None, lo_open=False, hi_open=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise doc.error(path, f"expected a number, got {value!r}")
    if kind is int and (not isinstance(value, int)):
        raise doc.error(path, f"expected an integer, got {value!r}")
    v = kind(value)
    if lo is not None and (v < lo or (lo_open and v == lo)):
        raise doc.error(path, f"must be {'>' if lo_open else '>='} {lo}")
    if hi is not None and (v > hi or (hi_open and v == hi)):
        raise doc.error(path, f"must be {'<' if hi_open else '<='} {hi}")
    return v


_NODE_KEYS = {STATIC: {"id", "kind", "capacity", "interference"},
              BURSTABLE: {"id", "kind", "baseline", "earn_rate", "credit_cap", "credits",
                          "interference"}}


def _parse_node(doc: _Doc, data, path: str) -> NodeSpec:
    _section(doc, data, path, _NODE_KEYS[STATIC] | _NODE_KEYS[BURSTABLE], ("id",))
    kind = data.get("kind", STATIC)
    if kind not in _NODE_KEYS:
        raise doc.error(f"{path}.kind", f"unknown node kind {kind!r}")
    for key in data:
        if key not in _NODE_KEYS[kind]:
            raise doc.error(f"{path}.{key}", f"not valid for a {kind} node")
    sched = data.get("interference", [])
    if not isinstance(sched, list) or any(
            not isinstance(p, list) or len(p) != 2 for p in sched):
        raise doc.error(f"{path}.interference", "expected a list of [time, multiplier] pairs")
    kwargs: dict[str, Any] = {"id": str(data["id"]), "kind": kind,
                              "interference": tuple((float(a), float(b)) for a, b in sched)}
    if kind == STATIC:
        kwargs["capacity"] = _num(doc, f"{path}.capacity", data.get("capacity", 1.0),
                                  lo=0, hi=1, lo_open=True)
    else:
        kwargs["baseline"] = _num(doc, f"{path}.baseline", data.get("baseline", 0.2),
                                  lo=0, hi=1, lo_open=True)
        if data.get("earn_rate") is not None:
            kwargs["earn_rate"] = _num(doc, f"{path}.earn_rate", data["earn_rate"], lo=0)
        if data.get("credit_cap") is not None:
            kwargs["credit_cap"] = _num(doc, f"{path}.credit_cap", data["credit_cap"], lo=0)
        kwargs["initial_credits"] = _num(doc, f"{path}.credits", data.get("credits", 0.0), lo=0)
    try:
        return NodeSpec(**kwargs)
    except ValueError as exc:
        raise doc.error(path, str(exc)) from exc


_STRATEGY_KEYS = {"homt-k": {"k"}, "hemt-static": {"probe", "probe_fraction"},
                  "hemt-credit": {"probe", "probe_fraction"}, "oa-hemt": {"alpha", "vbar"}}


def _parse_strategy(doc: _Doc, data, path: str) -> StrategySpec:
    if isinstance(data, str):
        data = {"name": data}
    _section(doc, data, path, {"name", "label", "k", "probe", "probe_fraction", "alpha",
                               "vbar"}, ("name",))
    name = data["name"]
    if name not in STRATEGY_NAMES:
        raise doc.error(f"{path}.name", f"unknown strategy {name!r}")
    for key in data:
        if key not in ("name", "label") and key not in _STRATEGY_KEYS[name]:
            raise doc.error(f"{path}.{key}", f"not a parameter of {name}")
    kwargs: dict[str, Any] = {"name": name}
    if "label" in data:
        kwargs["label"] = str(data["label"])
    if name == "homt-k":
        if "k" not in data:
            raise doc.error(path, "strategy homt-k requires parameter 'k'")
        ks = data["k"] if isinstance(data["k"], list) else [data["k"]]
        if not ks:
            raise doc.error(f"{path}.k", "empty k list")
        kwargs["k"] = tuple(_num(doc, f"{path}.k", k, int, lo=1) for k in ks)
    if "probe" in data:
        if not isinstance(data["probe"], bool):
            raise doc.error(f"{path}.probe", "expected true or false")
        kwargs["probe"] = data["probe"]
    if "probe_fraction" in data:
        kwargs["probe_fraction"] = _num(doc, f"{path}.probe_fraction", data["probe_fraction"],
                                        lo=0, hi=1, lo_open=True)
    if "alpha" in data:
        kwargs["alpha"] = _num(doc, f"{path}.alpha", data["alpha"], lo=0, hi=1, hi_open=True)
    if "vbar" in data:
        if data["vbar"] not in VBAR_RULES:
            raise doc.error(f"{path}.vbar", f"must be one of {', '.join(VBAR_RULES)}")
        kwargs["vbar"] = data["vbar"]
    return StrategySpec(**kwargs)


def parse_scenario(text: str) -> Scenario:
    """Parse and validate scenario YAML; errors carry line/column."""
    doc = _Doc(text)
    top = _section(doc, doc.data, "",
                   {"name", "description", "nodes", "storage", "job", "strategies", "sim",
                    "replications", "seed"},
                   ("name", "nodes", "job", "strategies"))

    nodes_raw = top["nodes"]
    if not isinstance(nodes_raw, list) or not nodes_raw:
        raise doc.error("nodes", "expected a nonempty list of nodes")
    nodes = tuple(_parse_node(doc, d, f"nodes[{i}]") for i, d in enumerate(nodes_raw))
    if len({n.id for n in nodes}) != len(nodes):
        raise doc.error("nodes", "node ids must be unique")

    storage = None
    if top.get("storage") is not None:
        s = _section(doc, top["storage"], "storage", {"n", "r", "uplink_mbps", "block_mib"},
                     ("n", "r", "uplink_mbps"))
        n = _num(doc, "storage.n", s["n"], int, lo=1)
        r = _num(doc, "storage.r", s["r"], int, lo=1, hi=n)
        storage = StorageSpec(n, r, _num(doc, "storage.uplink_mbps", s["uplink_mbps"],
                                         lo=0, lo_open=True),
                              _num(doc, "storage.block_mib", s.get("block_mib", 128.0),
                                   lo=0, lo_open=True))

    j = _section(doc, top["job"], "job", {"kind", "input_mib", "cpu_s_per_mib", "iterations",
                                         "shuffle_ratio", "stages"},
                 ("kind", "input_mib", "cpu_s_per_mib"))
    if j["kind"] not in JOB_KINDS:
        raise doc.error("job.kind", f"unknown job kind {j['kind']!r}")
    ratio = j.get("shuffle_ratio")
    job = JobSpec(j["kind"], _num(doc, "job.input_mib", j["input_mib"], lo=0),
                  _num(doc, "job.cpu_s_per_mib", j["cpu_s_per_mib"], lo=0, lo_open=True),
                  _num(doc, "job.iterations", j.get("iterations", 1), int, lo=1),
                  None if ratio is None else _num(doc, "job.shuffle_ratio", ratio, lo=0),
                  _num(doc, "job.stages", j.get("stages", 1), int, lo=1))

    strat_raw = top["strategies"]
    if not isinstance(strat_raw, list) or not strat_raw:
        raise doc.error("strategies", "expected a nonempty list of strategies")
    strategies = tuple(_parse_strategy(doc, d, f"strategies[{i}]")
                       for i, d in enumerate(strat_raw))
    labels = [s.display for s in strategies]
    if len(set(labels)) != len(labels):
        raise doc.error("strategies", "duplicate strategy labels; set 'label' to disambiguate")

    sim = SimSpec()
    if top.get("sim") is not None:
        s = _section(doc, top["sim"], "sim",
                     {"sched_overhead", "io_setup", "pipeline", "shuffle_mbps"})
        pipeline = s.get("pipeline", True)
        if not isinstance(pipeline, bool):
            raise doc.error("sim.pipeline", "expected true or false")
        sim = SimSpec(_num(doc, "sim.sched_overhead", s.get("sched_overhead", 0.1), lo=0),
                      _num(doc, "sim.io_setup", s.get("io_setup", 0.05), lo=0),
                      pipeline,
                      _num(doc, "sim.shuffle_mbps", s.get("shuffle_mbps", math.inf),
                           lo=0, lo_open=True))

    return Scenario(
        name=str(top["name"]), nodes=nodes, job=job, strategies=strategies,
        storage=storage, sim=sim,
        replications=_num(doc, "replications", top.get("replications", 1), int, lo=1),
        seed=_num(doc, "seed", top.get("seed", 0), int, lo=0),
        description=str(top.get("description", "")))


def _node_dict(n: NodeSpec) -> dict:
    d: dict[str, Any] = {"id": n.id, "kind": n.kind}
    if n.kind == STATIC:
        d["capacity"] = n.capacity
    else:
        d.update(baseline=n.baseline, earn_rate=n.earn_rate, credit_cap=n.credit_cap,
                 credits=n.initial_credits)
    d["interference"] = [[t, m] for t, m in n.interference]
    return d


def _strategy_dict(s: StrategySpec) -> dict:
    d: dict[str, Any] = {"name": s.name}
    if s.label:
        d["label"] = s.label
    if s.name == "homt-k":
        d["k"] = list(s.k)
    elif s.name == "oa-hemt":
        d.update(alpha=s.alpha, vbar=s.vbar)
    else:
        d.update(probe=s.probe, probe_fraction=s.probe_fraction)
    return d


def scenario_to_dict(sc: Scenario) -> dict:
    d: dict[str, Any] = {"name": sc.name}
    if sc.description:
        d["description"] = sc.description
    d["nodes"] = [_node_dict(n) for n in sc.nodes]
    if sc.storage is not None:
        d["storage"] = {"n": sc.storage.n, "r": sc.storage.r,
                        "uplink_mbps": sc.storage.uplink_mbps, "block_mib": sc.storage.block_mib}
    d["job"] = {"kind": sc.job.kind, "input_mib": sc.job.input_mib,
                "cpu_s_per_mib": sc.job.cpu_s_per_mib, "iterations": sc.job.iterations,
                "shuffle_ratio": sc.job.shuffle_ratio, "stages": sc.job.stages}
    d["strategies"] = [_strategy_dict(s) for s in sc.strategies]
    d["sim"] = {"sched_overhead": sc.sim.sched_overhead, "io_setup": sc.sim.io_setup,
                "pipeline": sc.sim.pipeline, "shuffle_mbps": sc.sim.shuffle_mbps}
    d["replications"] = sc.replications
    d["seed"] = sc.seed
    return d


def dump_scenario(sc: Scenario) -> str:
    return yaml.safe_dump(scenario_to_dict(sc), sort_keys=False, default_flow_style=None)


def load_scenario(path_or_name: str | Path) -> Scenario:
    """Read a scenario file, or a shipped scenario by name."""
    path = Path(path_or_name)
    if path.is_file():
        return parse_scenario(path.read_text())
    name = str(path_or_name)
    if name in list_scenarios():
        return parse_scenario(_library().joinpath(f"{name}.yaml").read_text())
    raise FileNotFoundError(f"no scenario file or shipped scenario named {name!r}")


def _library():
    return resources.files("hemtsim").joinpath("scenarios")


def list_scenarios() -> list[str]:
    return sorted(p.name[:-5] for p in _library().iterdir() if p.name.endswith(".yaml"))


# -- running ---------------------------------------------------------------

def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def summarize(scenario: str, stage_rows: list[dict]) -> list[SummaryRow]:
    """One row per (strategy, k): stats of per-replication total stage time."""
    totals: dict[tuple, dict[int, float]] = {}
    for row in stage_rows:
        key = (row["strategy"], row["k"])
        per_rep = totals.setdefault(key, {})
        per_rep[row["replication"]] = per_rep.get(row["replication"], 0.0) + row["completion_s"]
    out = []
    for (strategy, k), per_rep in totals.items():
        xs = [per_rep[r] for r in sorted(per_rep)]
        mean = math.fsum(xs) / len(xs)
        sd = statistics.stdev(xs) if len(xs) > 1 else 0.0
        half = sd / math.sqrt(len(xs))
        out.append(SummaryRow(scenario, strategy, k, mean, sd, mean - half, mean + half, len(xs)))
    return out


def run_experiment(scenario: Scenario, seed: int | None = None, reps: int | None = None,
                   with_tasks: bool = False) -> ScenarioResult:
    """All strategies x replications; replication j uses seed base+j."""
    base = scenario.seed if seed is None else seed
    reps = scenario.replications if reps is None else reps
    if reps < 1:
        raise ValueError("reps must be >= 1")
    jobs = scenario.job.jobs()
    storage = scenario.storage.config() if scenario.storage else None
    stage_rows, task_rows = [], []
    for spec in scenario.strategies:
        for label, k, factory in spec.expand():
            for rep in range(reps):
                cfg = scenario.sim.config(base + rep)
                for j, m in run_workload(jobs, factory(), scenario.nodes, cfg, storage):
                    stage_rows.append({
                        "scenario": scenario.name, "strategy": label, "k": k,
                        "replication": rep, "job": j, "stage": m.stage,
                        "completion_s": m.completion, "sync_delay_s": m.sync_delay,
                        "idle_cpu_s": m.idle_cpu, "bottleneck_mix": m.bottleneck_mix})
                    if with_tasks:
                        task_rows.extend({
                            "scenario": scenario.name, "strategy": label, "k": k,
                            "replication": rep, "job": j, "stage": m.stage, "task": t.task,
                            "node": scenario.nodes[t.node].id, "size_bytes": t.size,
                            "launch_s": t.launch, "start_s": t.start, "end_s": t.end,
                            "bottleneck": t.bottleneck} for t in m.tasks)
    return ScenarioResult(scenario, stage_rows, summarize(scenario.name, stage_rows), task_rows)


def _csv(rows, columns) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(row[c]) for c in columns])
    return buf.getvalue()


def stage_csv(result: ScenarioResult) -> str:
    return _csv(result.stage_rows, STAGE_COLUMNS)


def summary_csv(result: ScenarioResult) -> str:
    rows = [{"scenario": s.scenario, "strategy": s.strategy, "k": s.k,
             "mean_completion_s": s.mean, "sd_completion_s": s.sd, "sigma_low_s": s.low,
             "sigma_high_s": s.high, "reps": s.reps} for s in result.summary]
    return _csv(rows, SUMMARY_COLUMNS)


def task_csv(result: ScenarioResult) -> str:
    return _csv(result.task_rows, TASK_COLUMNS)


def write_results(result: ScenarioResult, out_dir: str | Path) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    name = result.scenario.name
    files = {f"{name}_stages.csv": stage_csv(result), f"{name}_summary.csv": summary_csv(result)}
    if result.task_rows:
        files[f"{name}_tasks.csv"] = task_csv(result)
    paths = []
    for fname, text in files.items():
        p = out / fname
        p.write_text(text)
        paths.append(p)
    return paths


def read_stage_csv(text: str) -> list[dict]:
    """Inverse of ``stage_csv`` with numeric columns restored."""
    rows = []
    for row in csv.DictReader(io.StringIO(text)):
        rows.append({
            "scenario": row["scenario"], "strategy": row["strategy"],
            "k": int(row["k"]) if row["k"] else None,
            "replication": int(row["replication"]), "job": int(row["job"]),
            "stage": int(row["stage"]), "completion_s": float(row["completion_s"]),
            "sync_delay_s": float(row["sync_delay_s"]), "idle_cpu_s": float(row["idle_cpu_s"]),
            "bottleneck_mix": float(row["bottleneck_mix"])})
    return rows


__all__ = [
    "JobSpec", "Scenario", "ScenarioError", "ScenarioResult",
    "SimSpec", "StorageSpec", "StrategySpec", "SummaryRow", "dump_scenario",
    "list_scenarios", "load_scenario", "parse_scenario", "read_stage_csv", "run_experiment",
    "scenario_to_dict", "stage_csv", "summarize", "summary_csv", "write_results",
]
