"""Scenario builders shared by the simulator and acceptance tests."""
from __future__ import annotations

import random

from antrouting.simnet import SimNetwork

BALANCES = (50, 500, 1000)


def random_connected_graph(rng: random.Random, n: int) -> SimNetwork:
    """Random spanning tree plus about ``n`` extra channels; mixed balances,
    so some directed edges are too thin for a payment of 100."""
    net = SimNetwork(rng_seed=rng.getrandbits(32))
    for i in range(1, n + 1):
        net.add_node(i, rng.randint(0, 20))
    order = list(range(1, n + 1))
    rng.shuffle(order)
    for i in range(1, n):
        net.add_channel(order[i], order[rng.randrange(i)], rng.choice(BALANCES), rng.choice(BALANCES))
    for _ in range(n):
        a, b = rng.sample(range(1, n + 1), 2)
        if (min(a, b), max(a, b)) not in net.channels:
            net.add_channel(a, b, rng.choice(BALANCES), rng.choice(BALANCES))
    return net


def two_route_network(rng: random.Random) -> tuple[SimNetwork, list[int], list[int]]:
    """Payer 1 and payee 2 joined by two disjoint routes of 4 to 6
    intermediaries.  The first route is the cheaper one."""
    net = SimNetwork(rng_seed=rng.getrandbits(32))
    net.add_node(1)
    net.add_node(2)
    routes, nid = [], 3
    for k in range(2):
        route = []
        for _ in range(rng.randint(4, 6)):
            net.add_node(nid, rng.randint(5, 20) if k == 0 else rng.randint(30, 50))
            route.append(nid)
            nid += 1
        full = [1] + route + [2]
        for u, v in zip(full, full[1:]):
            net.add_channel(u, v, 10_000, 10_000)
        routes.append(route)
    return net, routes[0], routes[1]
