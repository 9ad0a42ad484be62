"""
How much load can one node carry?
=================================

Each routing task costs a few look-ups and insertions in trees of
``rate / 10`` records, plus a share of dropping whole buckets.  The rate
at which one second of tasks needs one second of work is the node's limit.
"""
import numpy as np

from antrouting.capacity import capacity_table
from antrouting.scaling import (
    CollisionParams,
    MemoryParams,
    ScalingParams,
    bandwidth_estimate,
    collision_probability,
    lambda_max,
    memory_report,
    total_time,
)

# work per second of load across a range of rates
for rate in np.logspace(2, 4.5, 6):
    print(f"rate {rate:9.0f}/s  -> {total_time(ScalingParams(rate=rate)):.3f} s of work")

lam = lambda_max(ScalingParams())
print(f"\nsaturation at {lam:.0f} tasks/s (network bound about {2 * lam:.0f})")
print(f"charging the match look-up on every task: {lambda_max(ScalingParams(), True):.0f}")

# more confirmations and more matches per task cost throughput
for c in (0.0, 0.5, 1.0):
    print(f"confirm probability {c}: {lambda_max(ScalingParams(confirm_probability=c)):.0f}")

# memory for 2 s of seeds at 10,000 tasks/s
for r in (0, 4, 8, 40):
    rep = memory_report(MemoryParams(10_000, 2.0, r))
    print(f"r={r:3d}: {rep['megabytes']:.2f} MB (large-r form {rep['large_r_megabytes']:.2f} MB)")

# seed collisions over a century
for bits in (64, 72):
    est = collision_probability(CollisionParams(10_000, 2.0, bits))
    print(f"{bits}-bit seeds: collision chance {est.probability:.3e}")

print("pheromone traffic:", bandwidth_estimate(10_000, 20), "B/s")

print()
for row in capacity_table():
    print(f"{row['label']:<42} {row['tx_per_s_2dp']:>12}")
