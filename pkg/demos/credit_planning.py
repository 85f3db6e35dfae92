"""Splitting work across burstable nodes with different credit balances.

Three nodes share a 20% baseline but hold 4, 8 and 12 CPU credits. A node
runs at full speed until its credits are gone, so its cumulative work is a
concave piecewise-linear function of time. Adding the three curves and
solving for the moment they jointly reach the job's total work tells us how
much each node can finish by then, which is exactly the split we want.
"""

from hemtsim import NodeSpec, build_work_function, plan_credit_based
from hemtsim.scheduler import CreditPlanInput, superpose_and_invert

nodes = [NodeSpec(f"t2-{c}", "burstable", baseline=0.2, initial_credits=c) for c in (4, 8, 12)]
W0 = 20 * 60.0  # twenty CPU-minutes

for n in nodes:
    wf = build_work_function(n, n.initial_credits, horizon=1200.0)
    print(f"{n.id}: breakpoints (min, CPU-min) "
          f"{[(round(t / 60, 3), round(w / 60, 3)) for t, w in wf.breakpoints]}")

fns = tuple(build_work_function(n, n.initial_credits, 3600.0) for n in nodes)
t_prime, weights = superpose_and_invert(CreditPlanInput(fns, W0))
print(f"\nall nodes finish together at t' = {t_prime / 60:.4f} min (80/11 = {80 / 11:.4f})")
print("work shares (CPU-min):", [round(w / 60, 4) for w in weights])

plan = plan_credit_based(nodes, W0, total=11 * 10**9)
print("bytes per node for an 11 GB input:", plan.sizes)
