"""Microtasking versus one task per executor on a 1.0 + 0.4 CPU pair.

Splitting a stage into k equal tasks and letting idle executors pull them
balances load, but every task pays a fixed launch cost. Too few tasks leave
the fast node idle at the barrier; too many drown in overhead. Sizing one
task per node by capacity avoids both.
"""

from hemtsim import load_scenario, run_experiment

scenario = load_scenario("container04")
result = run_experiment(scenario)

for row in result.summary:
    label = row.strategy if row.k is None else f"{row.strategy} k={row.k}"
    print(f"{label:<16} {row.mean:8.2f} s  (+/- {row.sd:.2f}, n={row.reps})")

homt = {r.k: r.mean for r in result.summary if r.k is not None}
hemt = result.summary_for("hemt-static").mean
best_k = min(homt, key=homt.get)
print(f"\nbest HomT is k={best_k} at {homt[best_k]:.2f} s; HeMT takes {hemt:.2f} s")
