"""Deterministic discrete-event simulator for Ant Routing.

The simulator holds the ground truth the nodes never see: the channel graph,
directed balances and link latencies.  Every node runs an
:class:`~antrouting.protocol.AntNode`; messages travel encoded, so byte
counts are the real frame sizes.  Events are ordered by ``(due_time,
insertion sequence)``, which makes a run a pure function of its inputs.
"""
from __future__ import annotations

import csv
import heapq
import io
import json
import random
from collections import Counter, deque
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Optional

from . import __version__
from .protocol import (
    CHEAT_MODES,
    KIND_CONFIRMATION,
    KIND_MATCH,
    KIND_PHEROMONE,
    AntNode,
    NoRoute,
    PayeeReport,
    PaymentRequest,
    ProceedSignal,
    RouteCandidate,
    Send,
    UnroutableLocally,
    encode,
)

_KIND_NAMES = {KIND_PHEROMONE: "pheromone", KIND_MATCH: "match",
               KIND_CONFIRMATION: "confirmation"}


class ConfigError(ValueError):
    pass


# --------------------------------------------------------------------------
# Network description
# --------------------------------------------------------------------------

@dataclass
class NodeSpec:
    node_id: int
    fee: int = 0


@dataclass
class Channel:
    a: int
    b: int
    balance_ab: int
    balance_ba: int

    @property
    def capacity(self) -> int:
        return self.balance_ab + self.balance_ba

    def balance(self, src: int, dst: int) -> int:
        if (src, dst) == (self.a, self.b):
            return self.balance_ab
        if (src, dst) == (self.b, self.a):
            return self.balance_ba
        raise KeyError((src, dst))

    def shift(self, src: int, dst: int, amount: int) -> None:
        if self.balance(src, dst) < amount:
            raise ValueError(f"channel {self.a}-{self.b}: balance {src}->{dst} below {amount}")
        if src == self.a:
            self.balance_ab -= amount
            self.balance_ba += amount
        else:
            self.balance_ba -= amount
            self.balance_ab += amount


def _pair(u: int, v: int) -> tuple[int, int]:
    return (u, v) if u < v else (v, u)


@dataclass
class SimNetwork:
    nodes: dict[int, NodeSpec] = field(default_factory=dict)
    channels: dict[tuple[int, int], Channel] = field(default_factory=dict)
    latency: float = 0.010
    latency_mode: str = "constant"
    rng_seed: int = 0

    def add_node(self, node_id: int, fee: int = 0) -> None:
        self.nodes[node_id] = NodeSpec(node_id, fee)

    def add_channel(self, a: int, b: int, balance_ab: int, balance_ba: Optional[int] = None) -> None:
        self.channels[_pair(a, b)] = Channel(a, b, balance_ab,
                                             balance_ab if balance_ba is None else balance_ba)

    def channel(self, u: int, v: int) -> Channel:
        return self.channels[_pair(u, v)]

    def balance(self, src: int, dst: int) -> int:
        ch = self.channels.get(_pair(src, dst))
        return 0 if ch is None else ch.balance(src, dst)

    def neighbors(self, u: int) -> list[int]:
        return sorted(v for ch in self.channels.values() for v in (ch.a, ch.b)
                      if u in (ch.a, ch.b) and v != u)

    def adjacency(self) -> dict[int, list[int]]:
        adj: dict[int, list[int]] = {n: [] for n in self.nodes}
        for ch in self.channels.values():
            adj.setdefault(ch.a, []).append(ch.b)
            adj.setdefault(ch.b, []).append(ch.a)
        return {n: sorted(vs) for n, vs in adj.items()}

    def validate(self) -> None:
        if self.latency <= 0:
            raise ConfigError("latency must be positive")
        if self.latency_mode not in ("constant", "uniform"):
            raise ConfigError(f"unknown latency_mode {self.latency_mode!r}")
        for ch in self.channels.values():
            name = f"channel {ch.a}-{ch.b}"
            for end in (ch.a, ch.b):
                if end not in self.nodes:
                    raise ConfigError(f"{name}: endpoint {end} is not a declared node")
            if ch.a == ch.b:
                raise ConfigError(f"{name}: self-loop")
            if ch.balance_ab < 0 or ch.balance_ba < 0:
                raise ConfigError(f"{name}: negative balance")
        for n, vs in self.adjacency().items():
            if len(vs) > 255:
                raise ConfigError(f"node {n}: more than 255 channels")

    def to_dict(self) -> dict:
        return {
            "nodes": [{"id": n.node_id, "fee": n.fee} for n in sorted(self.nodes.values(), key=lambda n: n.node_id)],
            "channels": [{"a": c.a, "b": c.b, "balance_ab": c.balance_ab, "balance_ba": c.balance_ba}
                         for _, c in sorted(self.channels.items())],
            "latency": self.latency,
            "latency_mode": self.latency_mode,
            "rng_seed": self.rng_seed,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SimNetwork":
        try:
            net = cls(latency=float(data.get("latency", 0.010)),
                      latency_mode=data.get("latency_mode", "constant"),
                      rng_seed=int(data.get("rng_seed", 0)))
            for n in data["nodes"]:
                net.add_node(int(n["id"]), int(n.get("fee", 0)))
            for i, c in enumerate(data["channels"]):
                if _pair(int(c["a"]), int(c["b"])) in net.channels:
                    raise ConfigError(f"channel {c['a']}-{c['b']}: duplicate (entry {i})")
                net.add_channel(int(c["a"]), int(c["b"]), int(c["balance_ab"]), int(c["balance_ba"]))
        except KeyError as exc:
            raise ConfigError(f"missing field {exc}") from None
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from None
        net.validate()
        return net


def load_json(path) -> object:
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None


def load_network(path) -> SimNetwork:
    return SimNetwork.from_dict(load_json(path))


# --------------------------------------------------------------------------
# Workloads
# --------------------------------------------------------------------------

def poisson_workload(network: SimNetwork, rate: float, duration: float,
                     amount_range: tuple[int, int] = (1, 1000), max_fees: int = 1000,
                     rng_seed: int = 0) -> list[PaymentRequest]:
    """Poisson arrivals at ``rate`` per second with uniform distinct payer/payee."""
    rng = random.Random(rng_seed)
    ids = sorted(network.nodes)
    if len(ids) < 2:
        raise ConfigError("need at least two nodes for a workload")
    out, t = [], rng.expovariate(rate)
    while t < duration:
        payer, payee = rng.sample(ids, 2)
        amount = rng.randint(*amount_range)
        out.append(PaymentRequest.random(rng, payer, payee, amount, max_fees, t))
        t += rng.expovariate(rate)
    return out


def workload_from_data(data, network: SimNetwork, rng_seed: int = 0) -> list[PaymentRequest]:
    """Either a list of payment dicts or ``{"generator": {...}}``."""
    if isinstance(data, dict) and "generator" in data:
        g = data["generator"]
        try:
            return poisson_workload(network, float(g["rate"]), float(g["duration"]),
                                    (int(g.get("amount_min", 1)), int(g.get("amount_max", 1000))),
                                    int(g.get("f_max", 1000)), int(g.get("rng_seed", rng_seed)))
        except KeyError as exc:
            raise ConfigError(f"generator: missing field {exc}") from None
    if isinstance(data, dict):
        data = data.get("payments", [])
    rng = random.Random(rng_seed ^ 0x5EED)
    out = []
    for i, p in enumerate(data):
        try:
            payer, payee = int(p["payer"]), int(p["payee"])
            for n in (payer, payee):
                if n not in network.nodes:
                    raise ConfigError(f"payment {i}: unknown node {n}")
            req = PaymentRequest.random(rng, payer, payee, int(p["amount"]),
                                        int(p.get("f_max", p.get("max_fees", 0))),
                                        float(p["start_time"]))
            if "seed" in p or "counter_start" in p:
                req = PaymentRequest(payer, payee, req.amount, req.max_fees,
                                     int(p.get("counter_start", req.counter_start)),
                                     int(p.get("seed", req.seed)), req.start_time)
        except KeyError as exc:
            raise ConfigError(f"payment {i}: missing field {exc}") from None
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"payment {i}: {exc}") from None
        out.append(req)
    return out


# --------------------------------------------------------------------------
# Oracle and settlement
# --------------------------------------------------------------------------

def shortest_path_oracle(network: SimNetwork, payer: int, payee: int, amount: int) -> Optional[int]:
    """BFS hop count over channels whose balance in the payment direction is >= amount."""
    if payer == payee:
        return 0
    adj = network.adjacency()
    dist = {payer: 0}
    queue = deque([payer])
    while queue:
        u = queue.popleft()
        for v in adj.get(u, ()):
            if v not in dist and network.balance(u, v) >= amount:
                dist[v] = dist[u] + 1
                if v == payee:
                    return dist[v]
                queue.append(v)
    return None


def settle_payment(network: SimNetwork, path: list[int], amount: int,
                   fees: Optional[dict[int, int]] = None) -> bool:
    """Move ``amount`` (plus downstream fees) along ``path``; all-or-nothing.

    Hop ``i`` carries ``amount`` plus the fees of every intermediary after
    it, so each intermediary nets exactly its own fee.
    """
    fees = fees if fees is not None else {n: network.nodes[n].fee for n in path[1:-1]}
    hops = list(zip(path, path[1:]))
    carried, remaining = [], sum(fees.get(n, 0) for n in path[1:-1])
    for u, v in hops:
        carried.append(amount + remaining)
        remaining -= fees.get(v, 0) if v != path[-1] else 0
    for (u, v), x in zip(hops, carried):
        if _pair(u, v) not in network.channels or network.balance(u, v) < x:
            return False
    for (u, v), x in zip(hops, carried):
        network.channel(u, v).shift(u, v, x)
    return True


# --------------------------------------------------------------------------
# Faults and metrics
# --------------------------------------------------------------------------

@dataclass
class FaultConfig:
    cheaters: dict[int, str] = field(default_factory=dict)
    drop_rate: float = 0.0

    def __post_init__(self):
        for n, mode in self.cheaters.items():
            if mode not in CHEAT_MODES:
                raise ConfigError(f"node {n}: unknown cheat mode {mode!r}")
        if not 0.0 <= self.drop_rate < 1.0:
            raise ConfigError("drop_rate must lie in [0, 1)")


@dataclass
class ProtocolConfig:
    lifetime: float = 2.0
    collect_window: float = 1.0
    round_timeout: float = 0.25
    l0_length: int = 4
    l1_length: int = 4
    policy: str = "max_fees"
    privacy_floor: int = 2


@dataclass
class CandidateRecord:
    match_id: int
    first_hop: int
    intermediaries: int
    fees_payable: int
    traced_path: Optional[list[int]]
    traced_fees: Optional[int]


@dataclass
class PaymentMetrics:
    index: int
    payer: int
    payee: int
    amount: int
    start_time: float
    oracle_hops: Optional[int] = None
    route_found: bool = False
    completed: bool = False
    failure_reason: Optional[str] = None
    path: list[int] = field(default_factory=list)
    path_length: int = 0
    fees_paid: int = 0
    first_match_latency: Optional[float] = None
    candidates: int = 0
    attempts: int = 0
    rounds: int = 0
    cheater_detections: int = 0
    timeouts: int = 0
    delivered: list[CandidateRecord] = field(default_factory=list)

    CSV_FIELDS = ("index", "payer", "payee", "amount", "start_time", "oracle_hops",
                  "route_found", "completed", "failure_reason", "path_length", "path",
                  "fees_paid", "first_match_latency", "candidates", "attempts", "rounds",
                  "cheater_detections", "timeouts")


@dataclass
class RunMetrics:
    version: str
    config: dict
    payments: list[PaymentMetrics]
    messages_by_kind: dict[str, int]
    bytes_sent: int
    per_node: dict[str, dict]
    events_processed: int
    end_time: float

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(PaymentMetrics.CSV_FIELDS)
        for p in self.payments:
            row = []
            for name in PaymentMetrics.CSV_FIELDS:
                v = getattr(p, name)
                if name == "path":
                    v = "-".join(map(str, v))
                row.append("" if v is None else v)
            w.writerow(row)
        return buf.getvalue()


# --------------------------------------------------------------------------
# Simulator
# --------------------------------------------------------------------------

@dataclass
class _Payment:
    request: PaymentRequest
    metrics: PaymentMetrics
    state: str = "pending"
    route: Optional[RouteCandidate] = None
    attempt: int = 0


class Simulator:
    def __init__(self, network: SimNetwork, workload: Iterable[PaymentRequest],
                 faults: Optional[FaultConfig] = None, config: Optional[ProtocolConfig] = None) -> None:
        network.validate()
        self.network = network
        # the effective input, before settlements move any balance
        self.network_config = network.to_dict()
        self.faults = faults or FaultConfig()
        self.config = config or ProtocolConfig()
        for n in self.faults.cheaters:
            if n not in network.nodes:
                raise ConfigError(f"cheater {n} is not a declared node")
        self.rng = random.Random(network.rng_seed)
        adj = network.adjacency()
        self.nodes: dict[int, AntNode] = {
            n: AntNode(n, spec.fee, adj.get(n, ()), network.balance,
                       rng=random.Random(network.rng_seed * 1_000_003 + n),
                       lifetime=self.config.lifetime, l0_length=self.config.l0_length,
                       l1_length=self.config.l1_length, cheat=self.faults.cheaters.get(n))
            for n, spec in sorted(network.nodes.items())
        }
        self.payments: list[_Payment] = []
        for i, req in enumerate(workload):
            for n in (req.payer, req.payee):
                if n not in self.nodes:
                    raise ConfigError(f"payment {i}: unknown node {n}")
            self.payments.append(_Payment(req, PaymentMetrics(i, req.payer, req.payee,
                                                              req.amount, req.start_time)))
        self.queue: list = []
        self._seq = 0
        self.now = 0.0
        self.messages: Counter = Counter()
        self.bytes_sent = 0
        self.events = 0

    # -- scheduling ---------------------------------------------------------

    def _push(self, due: float, kind: str, *payload) -> None:
        heapq.heappush(self.queue, (due, self._seq, kind, payload))
        self._seq += 1

    def _delay(self) -> float:
        lat = self.network.latency
        if self.network.latency_mode == "uniform":
            return self.rng.uniform(0.5 * lat, 1.5 * lat)
        return lat

    def _dispatch(self, src: int, outputs) -> None:
        for out in outputs:
            if isinstance(out, Send):
                if self.faults.drop_rate and self.rng.random() < self.faults.drop_rate:
                    self.messages["dropped_link"] += 1
                    continue
                self._push(self.now + self._delay(), "deliver", out.to, src, encode(out.message))
            elif isinstance(out, PayeeReport):
                self._push(self.now + self.network.latency, "report", out)
            elif isinstance(out, ProceedSignal):
                self._push(self.now + self.network.latency, "proceed", out)

    # -- payment lifecycle ----------------------------------------------------

    def _originate(self, idx: int) -> None:
        pay = self.payments[idx]
        req = pay.request
        pay.metrics.oracle_hops = shortest_path_oracle(self.network, req.payer, req.payee, req.amount)
        pay.state = "collecting"
        for n in (req.payer, req.payee):
            try:
                self._dispatch(n, self.nodes[n].originate(req, self.now))
            except UnroutableLocally:
                pay.metrics.failure_reason = "unroutable_locally"
        self._push(req.start_time + self.config.collect_window, "select", idx)

    def _trace(self, start: int, stop: int, match_id: int, ts: float,
               confirmed: bool) -> Optional[list[int]]:
        """Follow stored match (or confirmation) targets from ``start`` to ``stop``."""
        path, node = [start], start
        for _ in range(512):
            if node == stop:
                return path
            nxt = self.nodes[node].next_hop(match_id, ts, confirmed)
            if not nxt:
                return None
            path.append(nxt)
            node = nxt
        return None

    def _select(self, idx: int) -> None:
        pay = self.payments[idx]
        req = pay.request
        payer = self.nodes[req.payer]
        session = payer.sessions.get(req.seed)
        if session is None:
            self._fail(pay, pay.metrics.failure_reason or "no_session")
            return
        ts = session.timestamp
        cands = payer.route_candidates(req.seed)
        m = pay.metrics
        m.candidates = len(cands)
        m.route_found = bool(cands)
        if session.first_match_at is not None:
            m.first_match_latency = round(session.first_match_at - req.start_time, 9)
        for c in sorted(cands, key=lambda c: c.match_id):
            tail = self._trace(c.first_hop, req.payee, c.match_id, ts, confirmed=False)
            path = [req.payer] + tail if tail is not None else None
            fees = (sum(self.network.nodes[n].fee for n in path[1:-1]) if path else None)
            m.delivered.append(CandidateRecord(c.match_id, c.first_hop, c.intermediary_count,
                                               c.fees_payable, path, fees))
        if not cands:
            self._fail(pay, m.failure_reason or "no_route")
            return
        self._try_next(idx)

    def _try_next(self, idx: int) -> None:
        pay = self.payments[idx]
        req = pay.request
        payer = self.nodes[req.payer]
        try:
            pay.route = payer.select_route(req.seed, self.config.policy, self.config.privacy_floor)
        except NoRoute:
            self._fail(pay, "candidates_exhausted")
            return
        pay.state = "confirming"
        pay.metrics.attempts += 1
        self._start_round(idx, payer.confirm(req.seed, pay.route))

    def _start_round(self, idx: int, send: Send) -> None:
        pay = self.payments[idx]
        pay.attempt += 1
        pay.metrics.rounds += 1
        self._dispatch(pay.request.payer, [send])
        self._push(self.now + self.config.round_timeout, "timeout", idx, pay.attempt)

    def _find(self, seed: int, payer: int) -> Optional[int]:
        for i, p in enumerate(self.payments):
            if p.request.seed == seed and p.request.payer == payer and p.state in ("confirming", "checking"):
                return i
        return None

    def _report(self, rep: PayeeReport) -> None:
        idx = self._find(rep.seed, rep.payer)
        if idx is None:
            return
        pay = self.payments[idx]
        if pay.state != "confirming" or pay.route.match_id != rep.match_id:
            return
        payer = self.nodes[rep.payer]
        if not payer.verify_counter_report(rep.seed, rep.checks, pay.route):
            pay.metrics.cheater_detections += 1
            self._try_next(idx)
            return
        pay.state = "checking"
        self._start_round(idx, payer.counter_check_round(rep.seed, pay.route, rep.checks))

    def _proceed(self, sig: ProceedSignal) -> None:
        idx = self._find(sig.seed, sig.payer)
        if idx is None:
            return
        pay = self.payments[idx]
        if pay.state != "checking" or pay.route.match_id != sig.match_id:
            return
        req = pay.request
        session = self.nodes[req.payer].sessions[req.seed]
        tail = self._trace(pay.route.first_hop, req.payee, sig.match_id, session.timestamp,
                           confirmed=True)
        if tail is None:
            self._fail(pay, "path_lost")
            return
        path = [req.payer] + tail
        fees = {n: self.network.nodes[n].fee for n in path[1:-1]}
        m = pay.metrics
        m.path, m.path_length = path, len(path)
        if not settle_payment(self.network, path, req.amount, fees):
            self._fail(pay, "settlement_failed")
            return
        m.fees_paid = sum(fees.values())
        m.completed = True
        m.failure_reason = None
        self._close(pay, "done")

    def _timeout(self, idx: int, attempt: int) -> None:
        pay = self.payments[idx]
        if pay.state in ("confirming", "checking") and pay.attempt == attempt:
            pay.metrics.timeouts += 1
            self._try_next(idx)

    def _fail(self, pay: _Payment, reason: str) -> None:
        pay.metrics.failure_reason = reason
        self._close(pay, "failed")

    def _close(self, pay: _Payment, state: str) -> None:
        pay.state = state
        for n in (pay.request.payer, pay.request.payee):
            self.nodes[n].finish(pay.request.seed)

    # -- main loop ------------------------------------------------------------

    def run(self, horizon: Optional[float] = None) -> RunMetrics:
        for i, pay in enumerate(self.payments):
            if horizon is not None and pay.request.start_time >= horizon:
                raise ConfigError(f"payment {i} starts at or after the horizon")
            self._push(pay.request.start_time, "originate", i)
        while self.queue:
            due, _, kind, payload = self.queue[0]
            if horizon is not None and due > horizon:
                break
            heapq.heappop(self.queue)
            self.now = due
            self.events += 1
            if kind == "deliver":
                to, src, data = payload
                self.bytes_sent += len(data)
                self.messages[_KIND_NAMES[data[0]]] += 1
                self._dispatch(to, self.nodes[to].receive(src, data, due))
            elif kind == "originate":
                self._originate(*payload)
            elif kind == "select":
                self._select(*payload)
            elif kind == "report":
                self.messages["payee_report"] += 1
                self._report(*payload)
            elif kind == "proceed":
                self.messages["proceed_signal"] += 1
                self._proceed(*payload)
            elif kind == "timeout":
                self._timeout(*payload)
        for pay in self.payments:
            if pay.state not in ("done", "failed"):
                pay.metrics.failure_reason = pay.metrics.failure_reason or "horizon"
        return self._metrics(horizon)

    def _metrics(self, horizon: Optional[float]) -> RunMetrics:
        per_node = {}
        for n, node in self.nodes.items():
            per_node[str(n)] = {"peak_sizes": dict(node.peak_sizes),
                                "stats": dict(sorted(node.stats.items()))}
        config = {"network": self.network_config, "protocol": asdict(self.config),
                  "faults": {"cheaters": {str(k): v for k, v in sorted(self.faults.cheaters.items())},
                             "drop_rate": self.faults.drop_rate},
                  "horizon": horizon, "rng_seed": self.network.rng_seed}
        return RunMetrics(__version__, config, [p.metrics for p in self.payments],
                          dict(sorted(self.messages.items())), self.bytes_sent, per_node,
                          self.events, self.now)


def run(network: SimNetwork, workload: Iterable[PaymentRequest], faults: Optional[FaultConfig] = None,
        horizon: Optional[float] = None, config: Optional[ProtocolConfig] = None) -> RunMetrics:
    """Simulate ``workload`` on ``network`` and return the metrics.

    The network's balances are updated in place by settled payments.
    """
    return Simulator(network, workload, faults, config).run(horizon)
