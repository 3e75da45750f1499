"""Network state and the two per-contact forwarding rules.

Node 0 is the source. Every contact allows one packet per direction and both
directions are decided on the pre-contact buffers.

Labels: each node carries a bitmask over the nu batch packets. Under Delta it
is the exact set of lineages held; under Gamma a node gains one label per
innovative reception, drawn uniformly from the sender's labels it lacks (the
degree-of-freedom labelling), so densities are defined for both disciplines.
"""
from __future__ import annotations

import enum
import random
from dataclasses import dataclass
from typing import Callable, NamedTuple

from ..coding import Buffer, CodedPacket, InsertResult, VariableBatch, encode_batch, source_buffer
from ..gf_field import FieldSpec, get_field
from .bloom import CountingBloomFilter

SOURCE = 0


class Forwarding(str, enum.Enum):
    GAMMA = "gamma"
    DELTA = "delta"


class ProtocolKind(str, enum.Enum):
    GAMMA = "gamma"
    DELTA = "delta"
    BENCHMARK1 = "benchmark1"
    BENCHMARK2 = "benchmark2"
    BENCHMARK3 = "benchmark3"
    PIPELINED_GAMMA = "pipelined-gamma"
    PIPELINED_DELTA = "pipelined-delta"

    @property
    def forwarding(self) -> Forwarding:
        if self in (ProtocolKind.GAMMA, ProtocolKind.PIPELINED_GAMMA):
            return Forwarding.GAMMA
        return Forwarding.DELTA

    @property
    def pipelined(self) -> bool:
        return self in (ProtocolKind.PIPELINED_GAMMA, ProtocolKind.PIPELINED_DELTA)

    @property
    def benchmark(self) -> int | None:
        return {ProtocolKind.BENCHMARK1: 1, ProtocolKind.BENCHMARK2: 2,
                ProtocolKind.BENCHMARK3: 3}.get(self)


@dataclass(frozen=True)
class Feedback:
    """Delta buffer summary: exact packet-id sets or a counting Bloom filter."""

    mode: str = "exact"
    m: int | None = None    # counters; defaults to 8 * B
    h: int = 3
    hash_seed: int = 0

    def __post_init__(self):
        if self.mode not in ("exact", "bloom"):
            raise ValueError(f"unknown feedback mode {self.mode!r}")


class NodeState:
    __slots__ = ("node_id", "buffer", "seed_slots", "is_source", "labels",
                 "bloom", "capacity")

    def __init__(self, node_id: int, buffer: Buffer, capacity: int, is_source: bool = False,
                 bloom: CountingBloomFilter | None = None):
        self.node_id = node_id
        self.buffer = buffer
        self.seed_slots: list[CodedPacket] = []
        self.is_source = is_source
        self.labels = 0
        self.bloom = bloom
        self.capacity = capacity

    @property
    def stored(self) -> int:
        return len(self.buffer.rows) + len(self.seed_slots)

    def __repr__(self) -> str:
        return (f"NodeState({self.node_id}, rank={self.buffer.rank}, "
                f"seeds={len(self.seed_slots)}, labels={self.labels:#b})")


class ContactOutcome(NamedTuple):
    time: float
    a: int
    b: int
    sent_ab: bool
    innov_ab: bool
    sent_ba: bool
    innov_ba: bool

    @property
    def n_innovative(self) -> int:
        return int(self.innov_ab) + int(self.innov_ba)

    @property
    def efficient(self) -> bool:
        return self.innov_ab or self.innov_ba


class SimState:
    """Snapshot of every node plus the batch currently propagating."""

    def __init__(self, n_nodes: int, nu: int, capacity: int,
                 forwarding: Forwarding | str = Forwarding.GAMMA,
                 field: FieldSpec | None = None, rng: random.Random | None = None,
                 feedback: Feedback = Feedback(), source_active: bool = True,
                 payload_len: int = 1):
        if n_nodes < 2:
            raise ValueError("need at least two nodes")
        if not 1 <= nu <= capacity:
            raise ValueError("need 1 <= nu <= B")
        self.n_nodes = n_nodes
        self.nu = nu
        self.capacity = capacity
        self.forwarding = Forwarding(forwarding)
        self.field = field or get_field()
        self.rng = rng or random.Random()
        self.feedback = feedback
        self.source_active = source_active
        self.payload_len = payload_len
        self.time = 0.0
        self.batch_id = -1
        self.batch: VariableBatch | None = None
        self.packets: list[CodedPacket] = []
        self.full_mask = (1 << nu) - 1
        self.counts = [0] * nu
        self.n_decoded = 0
        self.transmissions = 0
        self.innovative = 0
        self.redundant = 0
        self.source_tx = 0
        self.on_decode: Callable[[int, float], None] | None = None
        self.nodes: list[NodeState] = []
        bloom_m = feedback.m or 8 * capacity
        for i in range(n_nodes):
            bloom = (CountingBloomFilter(bloom_m, feedback.h, feedback.hash_seed)
                     if feedback.mode == "bloom" else None)
            self.nodes.append(NodeState(i, Buffer(-1, nu, self.field, capacity=nu),
                                        capacity, is_source=(i == SOURCE), bloom=bloom))

    @property
    def source(self) -> NodeState:
        return self.nodes[SOURCE]

    @property
    def n_destinations(self) -> int:
        return self.n_nodes - 1

    def new_batch(self, batch_id: int) -> tuple[VariableBatch, list[CodedPacket]]:
        batch = VariableBatch.random(batch_id, self.nu, self.payload_len * self.field.k,
                                     self.field, self.rng)
        return batch, encode_batch(batch, self.rng)

    def start_batch(self, batch: VariableBatch, packets: list[CodedPacket]) -> None:
        """Make ``batch`` the propagating batch: the source holds it, relays are emptied."""
        self.expire_batch()
        self.batch = batch
        self.batch_id = batch.batch_id
        self.packets = packets
        src = self.source
        if self.forwarding is Forwarding.GAMMA:
            src.buffer = source_buffer(batch)
        else:
            src.buffer = Buffer(batch.batch_id, self.nu, self.field)
            for p in packets:
                src.buffer.insert(p)
        src.labels = self.full_mask
        for node in self.nodes[1:]:
            node.buffer.clear(batch.batch_id)
            node.buffer.capacity = min(self.nu, self.capacity - len(node.seed_slots))
            node.labels = 0
            if node.bloom is not None:
                node.bloom.clear()

    def expire_batch(self) -> None:
        """Every node deletes the propagating batch."""
        for node in self.nodes:
            node.buffer.clear()
            node.labels = 0
            if node.bloom is not None:
                node.bloom.clear()
            node.buffer.capacity = min(self.nu, self.capacity - len(node.seed_slots))
        self.counts = [0] * self.nu
        self.n_decoded = 0
        self.batch = None
        self.batch_id = -1

    # bookkeeping ------------------------------------------------------------

    def _gain(self, node: NodeState, label: int) -> None:
        bit = 1 << label
        if node.labels & bit:
            return
        node.labels |= bit
        if not node.is_source:
            self.counts[label] += 1
        if node.bloom is not None:
            node.bloom.add((self.batch_id, label))

    def _after_insert(self, node: NodeState) -> None:
        if not node.is_source and node.buffer.rank == self.nu:
            self.n_decoded += 1
            if self.on_decode is not None:
                self.on_decode(node.node_id, self.time)

    def place(self, node: NodeState, pkt: CodedPacket) -> InsertResult:
        """Put a batch packet straight into a node's propagation buffer."""
        res = node.buffer.insert(pkt)
        if res:
            if pkt.lineage is not None:
                self._gain(node, pkt.lineage)
            self._after_insert(node)
        return res

    def refresh_capacity(self, node: NodeState) -> None:
        node.buffer.capacity = min(self.nu, self.capacity - len(node.seed_slots))

    @property
    def all_decoded(self) -> bool:
        return self.n_decoded == self.n_nodes - 1


# -- Gamma ----------------------------------------------------------------------

_CERTAINLY_REDUNDANT = object()


def _gamma_pick(state: SimState, s: NodeState, r: NodeState):
    if s.is_source and not state.source_active:
        return None
    buf = s.buffer
    if buf.batch_id != state.batch_id or not buf._piv:
        return None
    if r.buffer.rank == state.nu or len(r.buffer.rows) >= r.buffer.capacity:
        return _CERTAINLY_REDUNDANT
    return buf.random_vector(state.rng)


def _gamma_deliver(state: SimState, s_labels: int, r: NodeState, vec) -> bool:
    state.transmissions += 1
    if vec is _CERTAINLY_REDUNDANT:
        state.redundant += 1
        return False
    if not r.buffer.absorb(vec):
        state.redundant += 1
        return False
    state.innovative += 1
    # degree-of-freedom labelling
    cand = s_labels & ~r.labels
    if not cand:
        cand = state.full_mask & ~r.labels
    if cand:
        state._gain(r, _random_bit(cand, state.nu, state.rng))
    state._after_insert(r)
    return True


def handle_contact_gamma(state: SimState, ev, busy: tuple[bool, bool] = (False, False)) -> ContactOutcome:
    """True RLNC: each side sends a random combination of its buffer."""
    t, a, b = ev
    state.time = t
    na, nb = state.nodes[a], state.nodes[b]
    va = None if busy[0] else _gamma_pick(state, na, nb)
    vb = None if busy[1] else _gamma_pick(state, nb, na)
    la, lb = na.labels, nb.labels
    ia = ib = False
    if va is not None:
        if na.is_source:
            state.source_tx += 1
        ia = _gamma_deliver(state, la, nb, va)
    if vb is not None:
        if nb.is_source:
            state.source_tx += 1
        ib = _gamma_deliver(state, lb, na, vb)
    return ContactOutcome(t, a, b, va is not None, ia, vb is not None, ib)


# -- Delta ----------------------------------------------------------------------

def _random_bit(mask: int, width: int, rng: random.Random) -> int:
    idx = [i for i in range(width) if mask >> i & 1]
    return idx[rng.randrange(len(idx))] if len(idx) > 1 else idx[0]


def _delta_pick(state: SimState, s: NodeState, r: NodeState) -> int | None:
    if s.is_source and not state.source_active:
        return None
    if r.is_source or not s.labels:
        return None
    if len(r.buffer.rows) >= r.buffer.capacity:
        return None
    if r.bloom is None:
        avail = s.labels & ~r.labels
    else:
        avail = 0
        bid = state.batch_id
        for i in range(state.nu):
            if s.labels >> i & 1 and (bid, i) not in r.bloom:
                avail |= 1 << i
    if not avail:
        return None
    return _random_bit(avail, state.nu, state.rng)


def handle_contact_delta(state: SimState, ev, busy: tuple[bool, bool] = (False, False)) -> ContactOutcome:
    """Random message selection: send a uniformly chosen packet the peer lacks."""
    t, a, b = ev
    state.time = t
    na, nb = state.nodes[a], state.nodes[b]
    pa = None if busy[0] else _delta_pick(state, na, nb)
    pb = None if busy[1] else _delta_pick(state, nb, na)
    ia = ib = False
    for lineage, s, r in ((pa, na, nb), (pb, nb, na)):
        if lineage is None:
            continue
        state.transmissions += 1
        if s.is_source:
            state.source_tx += 1
        if state.place(r, state.packets[lineage]):
            state.innovative += 1
            if s is na:
                ia = True
            else:
                ib = True
        else:
            state.redundant += 1
    return ContactOutcome(t, a, b, pa is not None, ia, pb is not None, ib)


def handle_contact(state: SimState, ev, busy: tuple[bool, bool] = (False, False)) -> ContactOutcome:
    if state.forwarding is Forwarding.GAMMA:
        return handle_contact_gamma(state, ev, busy)
    return handle_contact_delta(state, ev, busy)
