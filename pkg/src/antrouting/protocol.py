"""Ant Routing node state machine and wire codecs.

A node only knows its neighbours and the balances of its own channels.
Route discovery runs in four phases, each a handler on :class:`AntNode`:

* pheromone flooding (:meth:`AntNode.handle_pheromone`),
* match creation and return (:meth:`AntNode.create_match`,
  :meth:`AntNode.handle_match`),
* confirmation with per-hop check integers
  (:meth:`AntNode.handle_confirmation`),
* the counter check round that pops those integers again.

Handlers return a list of outputs (:class:`Send`, :class:`PayeeReport`,
:class:`ProceedSignal`); delivering them is the caller's job.
"""
from __future__ import annotations

import random
import struct
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Union

from .seedstore import (
    BUCKET_WIDTH,
    AvlTree,
    BucketedStore,
    ConfirmationEntry,
    MatchEntry,
    PheromoneEntry,
    SpecialMatchEntry,
    StaleTimestamp,
    time_to_tick,
)

U8, U32, U64 = 0xFF, 0xFFFF_FFFF, 0xFFFF_FFFF_FFFF_FFFF
MAX_NEIGHBORS = 255
COUNTER_START_RANGE = (64, 128)
TIMESTAMP_MODULUS = 200  # 0.1 s units modulo 20 s
DEFAULT_CHECK_LENGTH = 4
PRIVACY_FLOOR = 2

KIND_PHEROMONE = 0x01
KIND_MATCH = 0x02
KIND_CONFIRMATION = 0x03

CHEAT_COUNTER_DECREMENT = "counter_decrement"
CHEAT_REFUSE_PAYMENT = "refuse_payment"
CHEAT_MODES = (CHEAT_COUNTER_DECREMENT, CHEAT_REFUSE_PAYMENT)


class DecodeError(ValueError):
    pass


class UnroutableLocally(RuntimeError):
    """The originating node has no neighbour with enough balance."""


class NoRoute(LookupError):
    """The payer holds no (untried) route candidate."""


# --------------------------------------------------------------------------
# Timestamps
# --------------------------------------------------------------------------

def encode_timestamp(t: float) -> int:
    """Simulation time in seconds -> one-byte timestamp."""
    return time_to_tick(t) % TIMESTAMP_MODULUS


def decode_timestamp(value: int, now: float) -> int:
    """Most recent absolute 0.1 s tick, not after ``now``, whose byte is ``value``."""
    now_tick = time_to_tick(now)
    return now_tick - ((now_tick - value) % TIMESTAMP_MODULUS)


# --------------------------------------------------------------------------
# Messages and codecs
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class PheromoneMessage:
    direction: int
    seed: int
    counter: int
    remaining_fees: int
    amount: int
    timestamp: int


@dataclass(frozen=True)
class MatchMessage:
    direction: int
    seed: int
    match_id: int
    counter: int
    total_counter: int
    total_fees: int
    timestamp: int


@dataclass(frozen=True)
class ConfirmationMessage:
    """Used for both the confirmation pass and the counter check round."""
    match_id: int
    check_list: tuple[int, ...]
    timestamp: int


Message = Union[PheromoneMessage, MatchMessage, ConfirmationMessage]

_PHEROMONE = struct.Struct(">BBQBIIB")
_MATCH = struct.Struct(">BBQQBBIB")
_CONF_HEAD = struct.Struct(">BQB")

PHEROMONE_FRAME_SIZE = _PHEROMONE.size
MATCH_FRAME_SIZE = _MATCH.size


def confirmation_frame_size(n_checks: int) -> int:
    return _CONF_HEAD.size + 8 * n_checks + 1


def _check_range(name: str, value: int, limit: int) -> None:
    if not 0 <= value <= limit:
        raise ValueError(f"{name}={value} out of range [0, {limit}]")


def encode(msg: Message) -> bytes:
    if isinstance(msg, PheromoneMessage):
        _check_range("direction", msg.direction, 1)
        _check_range("seed", msg.seed, U64)
        _check_range("counter", msg.counter, U8)
        _check_range("remaining_fees", msg.remaining_fees, U32)
        _check_range("amount", msg.amount, U32)
        _check_range("timestamp", msg.timestamp, TIMESTAMP_MODULUS - 1)
        return _PHEROMONE.pack(KIND_PHEROMONE, msg.direction, msg.seed, msg.counter,
                               msg.remaining_fees, msg.amount, msg.timestamp)
    if isinstance(msg, MatchMessage):
        _check_range("direction", msg.direction, 1)
        _check_range("seed", msg.seed, U64)
        _check_range("match_id", msg.match_id, U64)
        _check_range("counter", msg.counter, U8)
        _check_range("total_counter", msg.total_counter, U8)
        _check_range("total_fees", msg.total_fees, U32)
        _check_range("timestamp", msg.timestamp, TIMESTAMP_MODULUS - 1)
        return _MATCH.pack(KIND_MATCH, msg.direction, msg.seed, msg.match_id, msg.counter,
                           msg.total_counter, msg.total_fees, msg.timestamp)
    if isinstance(msg, ConfirmationMessage):
        _check_range("match_id", msg.match_id, U64)
        _check_range("list length", len(msg.check_list), U8)
        _check_range("timestamp", msg.timestamp, TIMESTAMP_MODULUS - 1)
        for check in msg.check_list:
            _check_range("check", check, U64)
        n = len(msg.check_list)
        return (_CONF_HEAD.pack(KIND_CONFIRMATION, msg.match_id, n)
                + struct.pack(f">{n}Q", *msg.check_list)
                + bytes([msg.timestamp]))
    raise TypeError(f"cannot encode {type(msg).__name__}")


def decode(buf: bytes) -> Message:
    if not buf:
        raise DecodeError("empty buffer")
    kind = buf[0]
    if kind == KIND_PHEROMONE:
        if len(buf) != _PHEROMONE.size:
            raise DecodeError(f"pheromone frame must be {_PHEROMONE.size} bytes, got {len(buf)}")
        _, d, seed, c, f, a, t = _PHEROMONE.unpack(buf)
        msg = PheromoneMessage(d, seed, c, f, a, t)
    elif kind == KIND_MATCH:
        if len(buf) != _MATCH.size:
            raise DecodeError(f"match frame must be {_MATCH.size} bytes, got {len(buf)}")
        _, d, seed, mid, c, big_c, big_f, t = _MATCH.unpack(buf)
        msg = MatchMessage(d, seed, mid, c, big_c, big_f, t)
    elif kind == KIND_CONFIRMATION:
        if len(buf) < _CONF_HEAD.size + 1:
            raise DecodeError("truncated confirmation frame")
        _, mid, n = _CONF_HEAD.unpack_from(buf)
        if len(buf) != confirmation_frame_size(n):
            raise DecodeError(f"confirmation frame with {n} checks must be "
                              f"{confirmation_frame_size(n)} bytes, got {len(buf)}")
        checks = struct.unpack_from(f">{n}Q", buf, _CONF_HEAD.size)
        msg = ConfirmationMessage(mid, tuple(checks), buf[-1])
    else:
        raise DecodeError(f"unknown message kind 0x{kind:02x}")
    if getattr(msg, "direction", 0) > 1:
        raise DecodeError("direction must be 0 or 1")
    if msg.timestamp >= TIMESTAMP_MODULUS:
        raise DecodeError(f"timestamp {msg.timestamp} >= {TIMESTAMP_MODULUS}")
    return msg


# --------------------------------------------------------------------------
# Handler outputs
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Send:
    to: int
    message: Message


@dataclass(frozen=True)
class PayeeReport:
    """Payee -> payer over the direct (non-channel) link: the checks it saw."""
    payer: int
    seed: int
    match_id: int
    checks: tuple[int, ...]


@dataclass(frozen=True)
class ProceedSignal:
    payer: int
    seed: int
    match_id: int


Output = Union[Send, PayeeReport, ProceedSignal]


# --------------------------------------------------------------------------
# Payment bookkeeping
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class PaymentRequest:
    payer: int
    payee: int
    amount: int
    max_fees: int
    counter_start: int
    seed: int
    start_time: float

    def __post_init__(self):
        lo, hi = COUNTER_START_RANGE
        if not lo <= self.counter_start < hi:
            raise ValueError(f"counter_start must lie in [{lo}, {hi})")
        if self.payer == self.payee:
            raise ValueError("payer and payee must differ")
        _check_range("amount", self.amount, U32)
        _check_range("seed", self.seed, U64)
        # F = f + f' - g has to fit the 32-bit wire field
        _check_range("max_fees", self.max_fees, U32 // 2)

    @classmethod
    def random(cls, rng: random.Random, payer: int, payee: int, amount: int,
               max_fees: int, start_time: float) -> "PaymentRequest":
        return cls(payer, payee, amount, max_fees, rng.randrange(*COUNTER_START_RANGE),
                   rng.getrandbits(64), start_time)


@dataclass(frozen=True)
class RouteCandidate:
    match_id: int
    first_hop: int
    total_counter: int
    total_fees: int
    fees_payable: int
    intermediary_count: int


def intermediaries_from_counter(total_counter: int, counter_start: int) -> int:
    """Recover ``C - 2*c0`` from the 8-bit wire value of C (signed, 8-bit wrap)."""
    return ((total_counter - 2 * counter_start + 128) & U8) - 128


def select_route(candidates: Iterable[RouteCandidate], policy: str = "max_fees",
                 privacy_floor: int = PRIVACY_FLOOR) -> RouteCandidate:
    """Pick one candidate.

    ``max_fees`` takes the largest remaining fee total F (cheapest for the
    payer), then the smaller C, then the smaller Id.  ``shortest`` orders by C
    first.  Candidates below ``privacy_floor`` intermediaries are used only
    when nothing else is available.
    """
    pool = list(candidates)
    if not pool:
        raise NoRoute("no route candidate")
    compliant = [r for r in pool if r.intermediary_count >= privacy_floor]
    pool = compliant or pool
    if policy == "max_fees":
        key = lambda r: (-r.total_fees, r.total_counter, r.match_id)
    elif policy == "shortest":
        key = lambda r: (r.total_counter, -r.total_fees, r.match_id)
    else:
        raise ValueError(f"unknown selection policy {policy!r}")
    return min(pool, key=key)


@dataclass
class PaymentSession:
    request: PaymentRequest
    role: str
    tick: int
    special: Optional[AvlTree] = None
    first_match_at: Optional[float] = None
    tried: set = field(default_factory=set)
    l0: tuple[int, ...] = ()
    reported: set = field(default_factory=set)

    @property
    def timestamp(self) -> float:
        return self.tick * BUCKET_WIDTH


BalanceFn = Callable[[int, int], int]


# --------------------------------------------------------------------------
# Node
# --------------------------------------------------------------------------

class AntNode:
    """One network participant running the routing task.

    ``balance(u, v)`` must return the spendable balance from ``u`` to ``v``
    on their shared channel.  Neighbours are addressed internally by one-byte
    slots, ``0`` meaning "this node".
    """

    def __init__(self, node_id: int, fee: int, neighbors: Iterable[int], balance: BalanceFn,
                 rng: Optional[random.Random] = None, lifetime: float = 2.0,
                 l0_length: int = DEFAULT_CHECK_LENGTH, l1_length: int = DEFAULT_CHECK_LENGTH,
                 cheat: Optional[str] = None) -> None:
        neighbors = sorted(set(neighbors))
        if len(neighbors) > MAX_NEIGHBORS:
            raise ValueError(f"node {node_id} has {len(neighbors)} neighbours (max {MAX_NEIGHBORS})")
        if node_id in neighbors:
            raise ValueError(f"node {node_id} lists itself as neighbour")
        if cheat is not None and cheat not in CHEAT_MODES:
            raise ValueError(f"unknown cheat mode {cheat!r}")
        _check_range("fee", fee, U32)
        if l1_length < 1:
            raise ValueError("l1_length must be at least 1")
        self.node_id = node_id
        self.fee = fee
        self.balance = balance
        self.rng = rng or random.Random(node_id)
        self.l0_length = l0_length
        self.l1_length = l1_length
        self.cheat = cheat
        self.neighbor_of_slot = {i + 1: n for i, n in enumerate(neighbors)}
        self.slot_of = {n: s for s, n in self.neighbor_of_slot.items()}
        self.pheromones: BucketedStore[PheromoneEntry] = BucketedStore(lifetime)
        self.matches: BucketedStore[MatchEntry] = BucketedStore(lifetime)
        self.confirmations: BucketedStore[ConfirmationEntry] = BucketedStore(lifetime)
        self.sessions: dict[int, PaymentSession] = {}
        self._payee_matches: dict[int, int] = {}
        self.stats: Counter = Counter()
        self.peak_sizes = {"pheromone": 0, "match": 0, "confirmation": 0}
        self.now = 0.0

    # -- plumbing -----------------------------------------------------------

    @property
    def neighbors(self) -> list[int]:
        return list(self.slot_of)

    def _node(self, slot: int) -> int:
        return self.neighbor_of_slot[slot]

    @property
    def _shift(self) -> int:
        # a counter-decrementing node sends c-1 instead of c+1 and has to
        # shift match counters by the same 2 to keep its route alive
        return 2 if self.cheat == CHEAT_COUNTER_DECREMENT else 0

    def advance(self, now: float) -> None:
        self.now = now
        for name, store in (("pheromone", self.pheromones), ("match", self.matches),
                            ("confirmation", self.confirmations)):
            expired = store.rotate(now)
            if expired:
                self.stats[f"expired_{name}"] += expired

    def _note_sizes(self) -> None:
        for name, store in (("pheromone", self.pheromones), ("match", self.matches),
                            ("confirmation", self.confirmations)):
            n = len(store)
            if n > self.peak_sizes[name]:
                self.peak_sizes[name] = n

    def _eligible(self, direction: int, neighbor: int, amount: int) -> bool:
        # payments flow payer -> payee, i.e. along P(0) and against P(1)
        if direction == 0:
            return self.balance(self.node_id, neighbor) >= amount
        return self.balance(neighbor, self.node_id) >= amount

    def _resolve_time(self, timestamp: int, now: float) -> float:
        return decode_timestamp(timestamp, now) * BUCKET_WIDTH

    def receive(self, sender: int, data: bytes, now: float) -> list[Output]:
        """Decode one frame from ``sender`` and run the matching handler."""
        msg = decode(data)
        if sender not in self.slot_of:
            self.stats["dropped_not_neighbor"] += 1
            return []
        if isinstance(msg, PheromoneMessage):
            return self.handle_pheromone(sender, msg, now)
        if isinstance(msg, MatchMessage):
            return self.handle_match(sender, msg, now)
        return self.handle_confirmation(sender, msg, now)

    # -- origination ----------------------------------------------------------

    def originate(self, request: PaymentRequest, now: Optional[float] = None) -> list[Send]:
        """Start the pheromone phase as payer (direction 0) or payee (direction 1)."""
        if self.node_id == request.payer:
            direction, role = 0, "payer"
        elif self.node_id == request.payee:
            direction, role = 1, "payee"
        else:
            raise ValueError(f"node {self.node_id} is neither payer nor payee")
        now = request.start_time if now is None else now
        self.advance(now)
        tick = time_to_tick(request.start_time)
        ts = tick * BUCKET_WIDTH
        targets = [n for n in self.neighbors if self._eligible(direction, n, request.amount)]
        if not targets:
            raise UnroutableLocally(f"node {self.node_id}: no neighbour with balance >= {request.amount}")

        entry = self.pheromones.lookup(request.seed, ts)
        if entry is None:
            entry = PheromoneEntry(request.seed, request.amount)
            self.pheromones.insert(request.seed, entry, ts)
        # stored one below the emitted counter: the endpoint acts as hop "-1"
        # so match counters and C come out right at the endpoints too
        entry.set(direction, request.counter_start - 1, 0, request.max_fees)
        session = PaymentSession(request, role, tick)
        if role == "payer":
            session.special = AvlTree()
        self.sessions[request.seed] = session
        self._note_sizes()

        msg = PheromoneMessage(direction, request.seed, request.counter_start,
                               request.max_fees, request.amount, tick % TIMESTAMP_MODULUS)
        self.stats["originated"] += 1
        return [Send(n, msg) for n in targets]

    # -- pheromone phase ------------------------------------------------------

    def handle_pheromone(self, sender: int, msg: PheromoneMessage, now: float) -> list[Output]:
        self.advance(now)
        self.stats["handled_pheromone"] += 1
        ts = self._resolve_time(msg.timestamp, now)
        d, c, f = msg.direction, msg.counter, msg.remaining_fees
        try:
            entry = self.pheromones.lookup(msg.seed, ts)
        except StaleTimestamp:
            self.stats["dropped_stale"] += 1
            return []

        # the payer/payee does not charge itself when a seed meets its own
        own_conjugate = entry is not None and entry.has(1 - d) and entry.get(1 - d)[1] == 0
        g = 0 if own_conjugate else self.fee
        if entry is not None and entry.has(d):
            if entry.get(d)[0] <= c:
                self.stats["dropped_not_better"] += 1
                return []
            if f - g < 0:
                self.stats["dropped_fees"] += 1
                return []
            entry.set(d, c, self.slot_of[sender], f)
            self.stats["replaced"] += 1
        else:
            if f - g < 0:
                self.stats["dropped_fees"] += 1
                return []
            if entry is None:
                entry = PheromoneEntry(msg.seed, msg.amount)
                self.pheromones.insert(msg.seed, entry, ts)
            entry.set(d, c, self.slot_of[sender], f)
            self._note_sizes()

        if entry.has(1 - d):
            return self.create_match(entry, ts)

        out_counter = c - 1 if self.cheat == CHEAT_COUNTER_DECREMENT else c + 1
        if not 0 <= out_counter <= U8:
            self.stats["dropped_counter_overflow"] += 1
            return []
        fwd = PheromoneMessage(d, msg.seed, out_counter, f - g, msg.amount, msg.timestamp)
        return [Send(n, fwd) for n in self.neighbors
                if n != sender and self._eligible(d, n, msg.amount)]

    # -- match phase ----------------------------------------------------------

    def create_match(self, entry: PheromoneEntry, ts: float) -> list[Output]:
        c0, s0, f0 = entry.get(0)
        c1, s1, f1 = entry.get(1)
        g = 0 if (s0 == 0 or s1 == 0) else self.fee
        total_fees = f0 + f1 - g
        if total_fees < 0:
            self.stats["match_fees_exhausted"] += 1
            return []
        match_id = self.rng.getrandbits(64)
        total_counter = (c0 + c1 + 1 - self._shift) & U8
        tsb = encode_timestamp(ts)
        self.matches.insert(match_id, MatchEntry(match_id, s1), ts)
        self.stats["matches_created"] += 1
        self._note_sizes()
        out: list[Output] = []
        if s0 == 0:
            self._store_special(entry.seed, match_id, self._node(s1), total_counter, total_fees, ts)
        else:
            out.append(Send(self._node(s0), MatchMessage(0, entry.seed, match_id, c0,
                                                         total_counter, total_fees, tsb)))
        if s1 == 0:
            self._payee_matches[match_id] = entry.seed
        else:
            out.append(Send(self._node(s1), MatchMessage(1, entry.seed, match_id, c1,
                                                         total_counter, total_fees, tsb)))
        return out

    def _store_special(self, seed: int, match_id: int, first_hop: int,
                       total_counter: int, total_fees: int, ts: float) -> None:
        session = self.sessions.get(seed)
        if session is None or session.special is None:
            self.stats["dropped_no_session"] += 1
            return
        session.special.insert(match_id, SpecialMatchEntry(match_id, self.slot_of[first_hop],
                                                           total_counter, total_fees))
        if session.first_match_at is None:
            session.first_match_at = self.now
        self.stats["special_matches"] += 1

    def handle_match(self, sender: int, msg: MatchMessage, now: float) -> list[Output]:
        self.advance(now)
        self.stats["handled_match"] += 1
        ts = self._resolve_time(msg.timestamp, now)
        d = msg.direction
        try:
            entry = self.pheromones.lookup(msg.seed, ts)
        except StaleTimestamp:
            self.stats["dropped_stale"] += 1
            return []
        if entry is None or not entry.has(d):
            self.stats["dropped_match_unknown"] += 1
            return []
        stored, s, _ = entry.get(d)
        shift = self._shift if s != 0 else 0
        if stored != msg.counter - 1 + shift:
            self.stats["dropped_match_counter"] += 1
            return []
        out_counter = msg.counter - 1 + shift
        tsb = msg.timestamp
        if d == 0:
            if s == 0:
                self._store_special(msg.seed, msg.match_id, sender, msg.total_counter,
                                    msg.total_fees, ts)
                return []
            self.matches.insert(msg.match_id, MatchEntry(msg.match_id, self.slot_of[sender]), ts)
            self._note_sizes()
            return [Send(self._node(s), MatchMessage(0, msg.seed, msg.match_id, out_counter,
                                                     msg.total_counter, msg.total_fees, tsb))]
        self.matches.insert(msg.match_id, MatchEntry(msg.match_id, s), ts)
        self._note_sizes()
        if s == 0:
            self._payee_matches[msg.match_id] = msg.seed
            return []
        return [Send(self._node(s), MatchMessage(1, msg.seed, msg.match_id, out_counter,
                                                 msg.total_counter, msg.total_fees, tsb))]

    # -- payer: route choice, confirmation, counter check ---------------------

    def route_candidates(self, seed: int) -> list[RouteCandidate]:
        session = self.sessions[seed]
        req = session.request
        out = []
        for _, e in session.special.items():
            n = intermediaries_from_counter(e.total_counter, req.counter_start)
            out.append(RouteCandidate(e.match_id, self._node(e.target),
                                      2 * req.counter_start + n, e.total_fees,
                                      2 * req.max_fees - e.total_fees, n))
        return out

    def select_route(self, seed: int, policy: str = "max_fees",
                     privacy_floor: int = PRIVACY_FLOOR) -> RouteCandidate:
        session = self.sessions.get(seed)
        if session is None or session.special is None:
            raise NoRoute(f"node {self.node_id} is not paying with seed {seed}")
        pool = [r for r in self.route_candidates(seed) if r.match_id not in session.tried]
        route = select_route(pool, policy, privacy_floor)
        session.tried.add(route.match_id)
        return route

    def confirm(self, seed: int, route: RouteCandidate) -> Send:
        session = self.sessions[seed]
        session.l0 = tuple(self.rng.getrandbits(64) for _ in range(self.l0_length))
        return Send(route.first_hop, ConfirmationMessage(route.match_id, session.l0,
                                                         session.tick % TIMESTAMP_MODULUS))

    def verify_counter_report(self, seed: int, reported: Iterable[int],
                              route: RouteCandidate) -> bool:
        """True when exactly one check per claimed intermediary was appended."""
        session = self.sessions[seed]
        reported = tuple(reported)
        l0 = session.l0
        if reported[:len(l0)] != l0:
            return False
        return len(reported) - len(l0) == route.intermediary_count

    def counter_check_round(self, seed: int, route: RouteCandidate,
                            verified: Iterable[int]) -> Send:
        session = self.sessions[seed]
        verified = tuple(verified)
        l1 = tuple(self.rng.getrandbits(64) for _ in range(self.l1_length))
        checks = verified[len(session.l0):] + l1
        return Send(route.first_hop, ConfirmationMessage(route.match_id, checks,
                                                         session.tick % TIMESTAMP_MODULUS))

    def finish(self, seed: int) -> None:
        """Drop the payment session; the payer's special match tree goes with it."""
        session = self.sessions.pop(seed, None)
        if session is not None and session.special is not None:
            session.special.destroy()

    # -- confirmation phase and counter check ---------------------------------

    def handle_confirmation(self, sender: int, msg: ConfirmationMessage, now: float) -> list[Output]:
        self.advance(now)
        self.stats["handled_confirmation"] += 1
        ts = self._resolve_time(msg.timestamp, now)
        try:
            conf = self.confirmations.lookup(msg.match_id, ts)
            match = None if conf is not None else self.matches.lookup(msg.match_id, ts)
        except StaleTimestamp:
            self.stats["dropped_stale"] += 1
            return []
        if conf is not None:
            return self._counter_check(conf, msg)
        if match is None:
            self.stats["dropped_confirmation_unknown"] += 1
            return []
        if match.target == 0:
            return self._payee_confirmation(msg)
        check = self.rng.getrandbits(64)
        self.confirmations.insert(msg.match_id, ConfirmationEntry(msg.match_id, match.target, check), ts)
        self._note_sizes()
        return [Send(self._node(match.target),
                     ConfirmationMessage(msg.match_id, msg.check_list + (check,), msg.timestamp))]

    def _counter_check(self, conf: ConfirmationEntry, msg: ConfirmationMessage) -> list[Output]:
        self.stats["handled_counter_check"] += 1
        if self.cheat == CHEAT_REFUSE_PAYMENT:
            self.stats["refused"] += 1
            return []
        if conf.target == 0 or not msg.check_list or msg.check_list[0] != conf.check:
            self.stats["dropped_check_mismatch"] += 1
            return []
        return [Send(self._node(conf.target),
                     ConfirmationMessage(msg.match_id, msg.check_list[1:], msg.timestamp))]

    def _payee_confirmation(self, msg: ConfirmationMessage) -> list[Output]:
        seed = self._payee_matches.get(msg.match_id)
        session = self.sessions.get(seed) if seed is not None else None
        if session is None or session.role != "payee":
            self.stats["dropped_no_session"] += 1
            return []
        payer = session.request.payer
        if msg.match_id not in session.reported:
            session.reported.add(msg.match_id)
            return [PayeeReport(payer, seed, msg.match_id, msg.check_list)]
        return [ProceedSignal(payer, seed, msg.match_id)]

    # -- ground-truth inspection (used by the simulator) ----------------------

    def next_hop(self, match_id: int, ts: float, confirmed: bool = False) -> Optional[int]:
        """Node the stored match (or confirmation) points to; 0 at the payee, None if absent."""
        store = self.confirmations if confirmed else self.matches
        try:
            rec = store.lookup(match_id, ts)
        except StaleTimestamp:
            return None
        if rec is None:
            return None
        return 0 if rec.target == 0 else self._node(rec.target)
