"""How often do two concurrent readers hit the same datanode?

Two tasks reading the same block collide with probability 1/r. Two tasks
reading different blocks collide less often, because the two replica sets
may not even overlap. This script prints both for r=2 across cluster sizes
and checks each against a quick Monte Carlo run.
"""

from hemtsim.cli import probcheck

print(f"{'n':>3} {'p1':>7} {'p2':>7} {'p2_hat':>8}  ok")
for n in range(2, 21, 2):
    row = probcheck(n, 2, trials=50_000, seed=n)
    print(f"{n:>3} {row['p1']:7.4f} {row['p2']:7.4f} {row['p2_hat']:8.4f}  {row['within_3se']}")

# Many small tasks mean many concurrent reads. With few datanodes the odds
# that some pair of them shares an uplink climb quickly, which is why
# network-bound stages get slower as k grows.
