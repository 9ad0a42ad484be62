"""
Catching a node that lies about the hop count
=============================================

A node that decrements the counter instead of incrementing it makes its
route look shorter.  During confirmation each intermediary adds a random
check to a list, so the payer learns how many nodes really sit on the path
and drops the route when the count disagrees.
"""
import random

from antrouting.protocol import PaymentRequest
from antrouting.simnet import FaultConfig, SimNetwork, run

# payer 1 and payee 2, a cheap route through 3..6 and a dear one through 7..10
net = SimNetwork(rng_seed=3)
net.add_node(1)
net.add_node(2)
cheap, dear = [3, 4, 5, 6], [7, 8, 9, 10]
for n in cheap:
    net.add_node(n, 2)
for n in dear:
    net.add_node(n, 30)
for route in (cheap, dear):
    full = [1] + route + [2]
    for u, v in zip(full, full[1:]):
        net.add_channel(u, v, 10_000, 10_000)

req = PaymentRequest.random(random.Random(0), 1, 2, amount=100, max_fees=500, start_time=0.0)

honest = run(net, [req]).payments[0]
print("honest run:   path", honest.path, "fees", honest.fees_paid)

# node 4 now sends c-1 instead of c+1
faulty = SimNetwork.from_dict(net.to_dict())
lied = run(faulty, [req], FaultConfig({4: "counter_decrement"})).payments[0]
print("cheater at 4: path", lied.path, "fees", lied.fees_paid)
print("  detections:", lied.cheater_detections, "candidates tried:", lied.attempts)

# a node that simply never forwards the payment is skipped after a timeout
faulty = SimNetwork.from_dict(net.to_dict())
silent = run(faulty, [req], FaultConfig({5: "refuse_payment"})).payments[0]
print("silent at 5:  path", silent.path, "timeouts", silent.timeouts)
