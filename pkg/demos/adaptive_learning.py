"""Learning node speeds from finished jobs when nothing is known up front.

The first job is split evenly. After each job the planner records how many
bytes per second each executor managed and sizes the next split to match.
Midway through the run the second node is slowed down by a co-located
tenant; the planner notices on the next job and shifts work away.
"""

from hemtsim import OAHeMT, load_scenario, run_workload

scenario = load_scenario("oa-interference")
cfg = scenario.sim.config(scenario.seed)
storage = scenario.storage.config() if scenario.storage else None

for alpha in (0.0, 0.3, 0.7):
    out = run_workload(scenario.job.jobs(), OAHeMT(alpha=alpha), scenario.nodes, cfg, storage)
    maps = [m for _, m in out if m.name == "map"]
    print(f"alpha={alpha}: map sync delay (s) by job")
    print("  " + " ".join(f"{m.sync_delay:5.1f}" for m in maps[:20]), "...")
    total = sum(m.completion for _, m in out)
    print(f"  total time {total:.1f} s\n")

# Larger alpha remembers more of the past, so it reacts more slowly to the
# slowdowns but is steadier when individual measurements are noisy.
