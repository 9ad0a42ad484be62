"""
Routing one payment without a routing table
===========================================

Two pheromone seeds flood out from payer and payee.  Where they meet a
match is created and sent back to both ends; the payer picks one match,
confirms it and the payment settles along the matched path.
"""
import random
from pathlib import Path

from antrouting.protocol import PaymentRequest
from antrouting.simnet import SimNetwork, load_network, poisson_workload, run, shortest_path_oracle

# a three node line: 1 - 2 - 3, node 2 charges a fee of 5
net = load_network(Path(__file__).resolve().parents[1] / "scenarios" / "path3" / "network.json")
req = PaymentRequest.random(random.Random(1), payer=1, payee=3, amount=100, max_fees=20, start_time=0.0)
print("counter starts at", req.counter_start, "seed", hex(req.seed))

metrics = run(net, [req])
pay = metrics.payments[0]
print("path:", pay.path, "fees paid:", pay.fees_paid)
print("first match after", pay.first_match_latency, "s")
print("messages:", metrics.messages_by_kind, "bytes:", metrics.bytes_sent)

# every node kept counters of what it handled
for node, info in metrics.per_node.items():
    print(f"  node {node}: {dict(info['stats'])}")

# a larger random network with a stream of payments
rng = random.Random(5)
net = SimNetwork(rng_seed=11)
for i in range(1, 41):
    net.add_node(i, rng.randint(0, 10))
for i in range(2, 41):
    net.add_channel(i, rng.randrange(1, i), 5000, 5000)
for _ in range(40):
    a, b = rng.sample(range(1, 41), 2)
    if (min(a, b), max(a, b)) not in net.channels:
        net.add_channel(a, b, 5000, 5000)

workload = poisson_workload(net, rate=10, duration=5.0, amount_range=(10, 200), max_fees=300, rng_seed=2)
oracle = [shortest_path_oracle(net, p.payer, p.payee, p.amount) for p in workload]
metrics = run(net, workload)

done = [p for p in metrics.payments if p.completed]
print(f"\n{len(done)}/{len(workload)} payments completed")
shortest = sum(1 for p, o in zip(metrics.payments, oracle) if p.completed and p.path_length - 1 == o)
print(f"{shortest} of them took a shortest path (the payer prefers cheaper routes)")
print("mean candidates per payment:",
      round(sum(p.candidates for p in metrics.payments) / len(metrics.payments), 2))
