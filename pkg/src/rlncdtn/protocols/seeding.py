"""Seeding phase: the source places nu independent coded packets on relays.

Two source disciplines:

* ``blind``: packet p_j goes to the peer of the source's j-th contact (one
  transmission per packet, no retries). A relay that ends up with a second
  packet of the batch hands the extra one over at its first contact with a
  relay holding none; the move transfers the packet, it does not copy it.
* ``retry``: the source reads the peer's summary and keeps p_j until it meets
  a relay without a packet of the batch. Still one transmission per packet;
  the number of source contacts is the coupon-collector quantity.
"""
from __future__ import annotations

import enum
import math
import random
from dataclasses import dataclass, field

import numpy as np

from ..coding import CodedPacket
from .state import SOURCE, SimState


class SeedingMode(str, enum.Enum):
    BLIND = "blind"
    RETRY = "retry"


@dataclass
class SeedingReport:
    batch_id: int
    start: float
    end: float | None = None            # time of the nu-th placement
    source_contacts: int = 0            # source contacts up to the nu-th placement
    transmissions: int = 0
    relocations: int = 0
    holders: dict[int, int] = field(default_factory=dict)   # lineage -> node
    distinct: bool = False

    @property
    def completed(self) -> bool:
        return self.end is not None

    @property
    def seeding_time(self) -> float | None:
        return None if self.end is None else self.end - self.start


class Seeder:
    """Incremental seeding driven by the same contact stream as propagation."""

    def __init__(self, state: SimState, packets: list[CodedPacket], start: float,
                 mode: SeedingMode | str = SeedingMode.BLIND,
                 release_time: float | None = None):
        self.state = state
        self.packets = packets
        self.mode = SeedingMode(mode)
        self.release_time = release_time
        self.promoted = False
        self.j = 0
        self.per_node: dict[int, list[CodedPacket]] = {}
        self.report = SeedingReport(packets[0].batch_id if packets else -1, start)
        for p in packets:
            p.release_time = release_time

    @property
    def done(self) -> bool:
        return self.j == len(self.packets)

    def _room(self, node_id: int) -> bool:
        node = self.state.nodes[node_id]
        if self.promoted:
            buf = node.buffer
            return len(buf.rows) < buf.capacity and buf.rank < self.state.nu
        return node.stored < self.state.capacity

    def _give(self, node_id: int, pkt: CodedPacket) -> None:
        node = self.state.nodes[node_id]
        self.per_node.setdefault(node_id, []).append(pkt)
        self.report.holders[pkt.lineage] = node_id
        if self.promoted:
            self.state.place(node, pkt)
        else:
            node.seed_slots.append(pkt)
            self.state.refresh_capacity(node)

    def on_contact(self, ev) -> tuple[bool, bool]:
        """Handle seeding traffic; returns which directions (a->b, b->a) it used."""
        t, a, b = ev
        if a == SOURCE or b == SOURCE:
            if self.done or t < self.report.start:
                return (False, False)
            peer = b if a == SOURCE else a
            self.report.source_contacts += 1
            if self.mode is SeedingMode.RETRY and self.per_node.get(peer):
                return (False, False)
            if not self._room(peer):
                return (False, False)
            pkt = self.packets[self.j]
            self.j += 1
            self.report.transmissions += 1
            self.state.source_tx += 1
            self._give(peer, pkt)
            if self.done:
                self.report.end = t
            return (a == SOURCE, b == SOURCE)
        if self.promoted:
            return (False, False)
        # relocation of surplus seeds between relays
        busy = [False, False]
        moved = False
        for d, (x, y) in enumerate(((a, b), (b, a))):
            if moved:
                break
            held = self.per_node.get(x)
            if held and len(held) >= 2 and not self.per_node.get(y) and self._room(y):
                pkt = held.pop()
                nx = self.state.nodes[x]
                nx.seed_slots.remove(pkt)
                self.state.refresh_capacity(nx)
                self._give(y, pkt)
                self.report.relocations += 1
                busy[d] = True
                moved = True
        return (busy[0], busy[1])

    def promote(self) -> None:
        """Seed slots become propagation slots (the batch is now the active one)."""
        self.promoted = True
        for node_id, pkts in self.per_node.items():
            node = self.state.nodes[node_id]
            for pkt in pkts:
                if pkt in node.seed_slots:
                    node.seed_slots.remove(pkt)
                    self.state.place(node, pkt)
            self.state.refresh_capacity(node)

    def finalize(self) -> SeedingReport:
        held = {n: len(p) for n, p in self.per_node.items() if p}
        self.report.distinct = self.done and all(c == 1 for c in held.values())
        return self.report


def default_release_delay(n_nodes: int, nu: int, lam: float) -> float:
    """Expected time for nu source contacts: nu / (lambda (N-1))."""
    return nu / (lam * (n_nodes - 1))


def seed_batch(state: SimState, packets: list[CodedPacket], contacts,
               mode: SeedingMode | str = SeedingMode.BLIND, start: float = 0.0,
               release_time: float | None = None) -> SeedingReport:
    """Run one seeding phase on its own, consuming contacts from ``contacts``.

    Relocations continue until the phase ends at max(nu-th placement,
    release time). An incomplete seeding (stream exhausted) reports
    ``completed == False``.
    """
    seeder = Seeder(state, packets, start, mode, release_time)
    for ev in contacts:
        t = ev[0]
        if t < start:
            continue
        if seeder.done and t > max(seeder.report.end, release_time or -math.inf):
            break
        state.time = t
        seeder.on_contact(ev)
    return seeder.finalize()


def simulate_seeding(n_nodes: int, nu: int, lam: float, runs: int,
                     mode: SeedingMode | str = SeedingMode.BLIND,
                     release_delay: float | None = None,
                     rng: random.Random | None = None):
    """Monte-Carlo of the seeding phase on the reduced contact process.

    Only contacts that can change the placement are simulated: the source
    meets a uniform relay at rate lambda(N-1); a relay holding c >= 2 packets
    meets each seedless relay at rate lambda. By Poisson superposition this has
    the same law as running :func:`seed_batch` on a full trace (relays are
    assumed to have buffer room).

    Returns (source_contacts, seeding_times, distinct) as numpy arrays.
    """
    mode = SeedingMode(mode)
    rng = rng or random.Random()
    relays = n_nodes - 1
    r_src = lam * relays
    if release_delay is None:
        release_delay = default_release_delay(n_nodes, nu, lam)
    contacts = np.zeros(runs, dtype=np.int64)
    times = np.zeros(runs)
    distinct = np.zeros(runs, dtype=bool)
    expo = rng.expovariate
    for run in range(runs):
        counts: dict[int, int] = {}
        surplus = 0          # packets beyond the first on their relay
        j = 0
        t = 0.0
        n_contacts = 0
        end = math.inf
        while True:
            seedless = relays - len(counts)
            r_move = lam * seedless * surplus
            rate = (r_src if j < nu else 0.0) + r_move
            if rate == 0.0:
                break
            t += expo(rate)
            if j == nu and t > max(end, release_delay):
                break
            if j < nu and rng.random() * rate < r_src:
                n_contacts += 1
                peer = rng.randrange(relays)
                c = counts.get(peer, 0)
                if c and mode is SeedingMode.RETRY:
                    continue
                counts[peer] = c + 1
                if c:
                    surplus += 1
                j += 1
                if j == nu:
                    end = t
                    times[run] = t
                    contacts[run] = n_contacts
            else:
                # pick the surplus packet's relay proportional to its surplus
                k = rng.randrange(surplus)
                for node, c in counts.items():
                    if c > 1:
                        if k < c - 1:
                            break
                        k -= c - 1
                while True:
                    y = rng.randrange(relays)
                    if y not in counts:
                        break
                counts[node] -= 1
                counts[y] = 1
                surplus -= 1
        distinct[run] = surplus == 0
    return contacts, times, distinct
