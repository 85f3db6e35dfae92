"""Iterative jobs: K-Means style (many short jobs) and PageRank style (one
long chain of shuffle stages).

In a chain of shuffle stages every stage pays the per-task costs again, and
with a heterogeneous pair the shuffle must also route more records to the
faster node. A capacity-weighted hash partitioner does that routing.
"""

from hemtsim import load_scenario, run_experiment
from hemtsim.workload import skewed_bucket

counts = [0, 0, 0]
for h in range(11):
    counts[skewed_bucket(h, [3, 4, 4])] += 1
print("capacities [3, 4, 4] receive", counts, "of every 11 consecutive hashes\n")

for name in ("kmeans30", "pagerank100"):
    result = run_experiment(load_scenario(name))
    hemt = result.summary_for("hemt-static").mean
    homt = {r.k: r.mean for r in result.summary if r.k is not None}
    print(f"{name}: HeMT {hemt:.1f} s")
    for k, t in sorted(homt.items()):
        print(f"  HomT k={k:<3} {t:8.1f} s  ({t / hemt - 1:+.0%} vs HeMT)")
