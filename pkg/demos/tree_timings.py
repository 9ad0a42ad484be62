"""
Timing the seed trees
=====================

Look-up and insertion should grow with log2 of the tree size, and dropping
a whole tree should grow linearly.  A short run here; the CLI's ``bench``
command runs the full sweep.
"""
from antrouting.scaling import benchmark_constants

res = benchmark_constants([100, 300, 1000, 3000, 10_000, 30_000], trials=500, repeats=3)

print(f"{'N':>7} {'lookup':>10} {'insert':>10} {'delete':>10}")
for n, _, lk, ins, de in res.rows():
    print(f"{n:>7} {lk * 1e9:>8.0f}ns {ins * 1e9:>8.0f}ns {de * 1e6:>8.1f}us")

print(f"\nlookup vs log2 N: slope {res.lookup_fit.slope:.2e} s, R^2 {res.lookup_fit.r2:.3f}")
print(f"insert vs log2 N: slope {res.insert_fit.slope:.2e} s, R^2 {res.insert_fit.r2:.3f}")
print(f"delete vs N:      slope {res.delete_fit.slope:.2e} s, R^2 {res.delete_fit.r2:.3f}")
