"""Gamma versus Delta: exact Markov chains at tiny scale, paired simulation at finite q.

Three checks live here:

* :func:`build_dtmc` enumerates the chain whose state is the set of degrees of
  freedom held by every node. ``DeltaIdeal`` computes the missing degrees of
  freedom as set differences; ``GammaIdeal`` (the q -> infinity limit) obtains
  them by rank tests over the field. The two matrices must coincide.
* :func:`compare_finite_q` feeds identical traces and placements to both
  disciplines at a given q and reports completion-time and innovation gaps.
* :func:`check_inequalities` samples random subspace configurations to
  estimate the two conditional innovation probabilities (both >= 1 - 1/q).
"""
from __future__ import annotations

import enum
import math
import random
from dataclasses import dataclass, field
from itertools import combinations
from typing import Sequence

import numpy as np

from .coding import Buffer
from .gf_field import FieldSpec, field_for_q, get_field
from .mobility import iter_contacts
from .protocols.state import (Forwarding, SimState, handle_contact_delta,
                              handle_contact_gamma)

MAX_NODES = 5
MAX_NU = 3

DtmcState = tuple[int, ...]   # one bitmask of acquired degrees of freedom per node


class Discipline(str, enum.Enum):
    DELTA_IDEAL = "delta-ideal"
    GAMMA_IDEAL = "gamma-ideal"


class StateSpaceTooLarge(ValueError):
    pass


@dataclass
class TransitionMatrix:
    n_nodes: int
    nu: int
    discipline: Discipline
    initial: DtmcState
    rows: dict[DtmcState, dict[DtmcState, float]] = field(default_factory=dict)

    @property
    def states(self) -> list[DtmcState]:
        return sorted(self.rows)

    @property
    def absorbing(self) -> DtmcState:
        full = (1 << self.nu) - 1
        return (full,) * self.n_nodes

    def row_sums(self) -> dict[DtmcState, float]:
        return {s: math.fsum(r.values()) for s, r in self.rows.items()}

    def max_stochastic_error(self) -> float:
        return max(abs(v - 1.0) for v in self.row_sums().values())

    def max_difference(self, other: "TransitionMatrix") -> float:
        """Largest entrywise difference (missing entries count as zero)."""
        worst = 0.0
        for s in set(self.rows) | set(other.rows):
            r1, r2 = self.rows.get(s, {}), other.rows.get(s, {})
            for d in set(r1) | set(r2):
                worst = max(worst, abs(r1.get(d, 0.0) - r2.get(d, 0.0)))
        return worst

    def absorption_distribution(self, max_steps: int = 10_000, tol: float = 1e-13) -> np.ndarray:
        """Pr[absorbed exactly at contact t], t = 0, 1, ... (exact propagation)."""
        target = self.absorbing
        dist = {self.initial: 1.0}
        out = [dist.pop(target, 0.0)]
        remaining = 1.0 - out[0]
        for _ in range(max_steps):
            if remaining <= tol:
                break
            nxt: dict[DtmcState, float] = {}
            for s, p in dist.items():
                for d, w in self.rows[s].items():
                    nxt[d] = nxt.get(d, 0.0) + p * w
            hit = nxt.pop(target, 0.0)
            out.append(hit)
            remaining -= hit
            dist = nxt
        return np.array(out)


def _check_guard(n_nodes: int, nu: int) -> None:
    if n_nodes < 2 or nu < 1:
        raise ValueError("need N >= 2 and nu >= 1")
    if n_nodes > MAX_NODES or nu > MAX_NU:
        raise StateSpaceTooLarge(
            f"N={n_nodes}, nu={nu} exceeds the enumeration guard (N <= {MAX_NODES}, "
            f"nu <= {MAX_NU}); use compare_finite_q (Monte-Carlo) instead")


def source_only_state(n_nodes: int, nu: int) -> DtmcState:
    return ((1 << nu) - 1,) + (0,) * (n_nodes - 1)


def _bits(mask: int, nu: int) -> list[int]:
    return [i for i in range(nu) if mask >> i & 1]


def _missing_delta(sender: int, receiver: int, nu: int, _field=None) -> list[int]:
    return _bits(sender & ~receiver, nu)


def _missing_gamma(sender: int, receiver: int, nu: int, fld: FieldSpec) -> list[int]:
    """Degrees of freedom of the sender outside the receiver's span, by elimination."""
    buf = Buffer(0, nu, fld)
    for i in _bits(receiver, nu):
        buf.absorb([1 if j == i else 0 for j in range(nu)])
    return [i for i in _bits(sender, nu)
            if buf.vector_is_innovative([1 if j == i else 0 for j in range(nu)])]


def build_dtmc(n_nodes: int, nu: int, initial: DtmcState | None = None,
               discipline: Discipline | str = Discipline.DELTA_IDEAL) -> TransitionMatrix:
    """Enumerate every reachable state and its successor distribution.

    Per step one pair of nodes (uniform over all pairs) meets; each direction
    transfers one uniformly chosen missing degree of freedom, both decided on
    the pre-contact state.
    """
    _check_guard(n_nodes, nu)
    discipline = Discipline(discipline)
    full = (1 << nu) - 1
    if initial is None:
        initial = source_only_state(n_nodes, nu)
    initial = tuple(initial)
    if len(initial) != n_nodes or initial[0] != full:
        raise ValueError("initial state needs N entries with a full source")
    if any(not 0 <= s <= full for s in initial):
        raise ValueError("degree-of-freedom masks out of range")
    missing = _missing_delta if discipline is Discipline.DELTA_IDEAL else _missing_gamma
    fld = get_field(8)
    pairs = list(combinations(range(n_nodes), 2))
    p_pair = 1.0 / len(pairs)
    tm = TransitionMatrix(n_nodes, nu, discipline, initial)
    todo = [initial]
    while todo:
        s = todo.pop()
        if s in tm.rows:
            continue
        row: dict[DtmcState, float] = {}
        for a, b in pairs:
            ab = missing(s[a], s[b], nu, fld) or [None]
            ba = missing(s[b], s[a], nu, fld) or [None]
            w = p_pair / (len(ab) * len(ba))
            for x in ab:
                for y in ba:
                    nxt = list(s)
                    if x is not None:
                        nxt[b] |= 1 << x
                    if y is not None:
                        nxt[a] |= 1 << y
                    d = tuple(nxt)
                    row[d] = row.get(d, 0.0) + w
        tm.rows[s] = row
        todo.extend(d for d in row if d not in tm.rows)
    return tm


def monte_carlo_absorption(n_nodes: int, nu: int, runs: int, seed: int = 0,
                           max_steps: int = 100_000) -> np.ndarray:
    """Contacts until every node decodes, simulated with the Delta contact handler.

    Pairs are drawn uniformly per step, as in the chain. Returns the step counts.
    """
    rng = random.Random(seed)
    state = SimState(n_nodes, nu, nu, Forwarding.DELTA, get_field(8), rng)
    batch, packets = state.new_batch(0)
    pairs = list(combinations(range(n_nodes), 2))
    steps = np.zeros(runs, dtype=np.int64)
    for r in range(runs):
        state.start_batch(batch, packets)
        k = 0
        while not state.all_decoded and k < max_steps:
            a, b = pairs[rng.randrange(len(pairs))]
            k += 1
            handle_contact_delta(state, (float(k), a, b))
        steps[r] = k
    return steps


# -- finite q ------------------------------------------------------------------------

@dataclass
class QComparison:
    q: int
    traces: int
    gamma_times: np.ndarray
    delta_times: np.ndarray
    gamma_cond_rate: float      # Pr[innovative | sender rank > receiver rank]
    delta_cond_rate: float
    gamma_cond_n: int
    delta_cond_n: int

    @property
    def paired_diff(self) -> np.ndarray:
        return self.gamma_times - self.delta_times

    @property
    def signed_gap(self) -> float:
        """(mean Gamma - mean Delta) / mean Delta."""
        return float(self.paired_diff.mean() / self.delta_times.mean())

    @property
    def abs_gap(self) -> float:
        return abs(self.signed_gap)

    @property
    def gap_se(self) -> float:
        d = self.paired_diff
        return float(d.std(ddof=1) / math.sqrt(len(d)) / self.delta_times.mean())

    @property
    def innovation_gap(self) -> float:
        return self.delta_cond_rate - self.gamma_cond_rate


def _seeded_run(forwarding: Forwarding, n_nodes: int, nu: int, fld: FieldSpec, seed: int,
                lam: float) -> tuple[float, int, int]:
    """Batch pre-placed on nu distinct relays, silent source; returns
    (completion time, conditioned directions, innovative among them)."""
    state = SimState(n_nodes, nu, nu, forwarding, fld, random.Random(10_007 * seed + 1),
                     source_active=False)
    batch, packets = state.new_batch(0)
    state.start_batch(batch, packets)
    holders = random.Random(seed).sample(range(1, n_nodes), nu)
    for lineage, node_id in enumerate(holders):
        state.place(state.nodes[node_id], packets[lineage])
    handler = handle_contact_gamma if forwarding is Forwarding.GAMMA else handle_contact_delta
    nodes = state.nodes
    cond = innov = 0
    t = 0.0
    for ev in iter_contacts(n_nodes, lam, np.random.default_rng(seed)):
        t, a, b = ev
        ra, rb = nodes[a].buffer.rank, nodes[b].buffer.rank
        out = handler(state, ev)
        if ra > rb and not nodes[a].is_source:
            cond += 1
            innov += out.innov_ab
        if rb > ra and not nodes[b].is_source:
            cond += 1
            innov += out.innov_ba
        if state.all_decoded:
            break
    return t, cond, innov


def compare_finite_q(n_nodes: int, nu: int, q: int, seeds: Sequence[int],
                     lam: float = 1.0) -> QComparison:
    """Paired Gamma/Delta runs on identical traces and identical initial placements.

    The batch starts on nu distinct relays and the source stays silent, so the
    two disciplines differ only in how relays forward.
    """
    seeds = list(seeds)
    if not seeds:
        raise ValueError("need at least one trace seed")
    if len(set(seeds)) != len(seeds):
        raise ValueError("trace seeds must be distinct")
    if not 1 <= nu <= n_nodes - 1:
        raise ValueError("need 1 <= nu <= N-1")
    fld = field_for_q(q)
    gt, dt = np.zeros(len(seeds)), np.zeros(len(seeds))
    gc = gi = dc = di = 0
    for i, s in enumerate(seeds):
        gt[i], c, k = _seeded_run(Forwarding.GAMMA, n_nodes, nu, fld, s, lam)
        gc += c
        gi += k
        dt[i], c, k = _seeded_run(Forwarding.DELTA, n_nodes, nu, fld, s, lam)
        dc += c
        di += k
    return QComparison(q, len(seeds), gt, dt, gi / gc if gc else math.nan,
                       di / dc if dc else math.nan, gc, dc)


# -- conditional innovation probabilities ---------------------------------------------------

@dataclass
class InequalityReport:
    q: int
    trials: int
    freq_escape: float       # Pr[S+_w not in S_u | S_w in S_u, S_v not in S_u]
    freq_gain: float         # Pr[dim S+_w > dim S_w | S_v not in S_w]
    delta_freq_escape: float
    delta_freq_gain: float

    @property
    def bound(self) -> float:
        return 1.0 - 1.0 / self.q

    @property
    def sigma(self) -> float:
        p = self.bound
        return math.sqrt(p * (1 - p) / self.trials)

    @property
    def passed(self) -> bool:
        lo = self.bound - 3 * self.sigma
        return self.freq_escape >= lo and self.freq_gain >= lo and self.delta_freq_gain == 1.0


def _random_vector(fld: FieldSpec, nu: int, rng: random.Random) -> list[int]:
    k = fld.k
    return [rng.getrandbits(k) for _ in range(nu)]


def _random_space(fld: FieldSpec, nu: int, rng: random.Random, max_dim: int) -> Buffer:
    buf = Buffer(0, nu, fld)
    for _ in range(rng.randint(1, max_dim)):
        buf.absorb(_random_vector(fld, nu, rng))
    return buf


def _combination(buf: Buffer, rng: random.Random) -> list[int]:
    """Uniform random element of the buffer's span (coefficient part only)."""
    return buf.random_vector(rng)[: buf.nu]


def _subspace_of(fld: FieldSpec, parent: Buffer, rng: random.Random) -> Buffer:
    buf = Buffer(0, parent.nu, fld)
    for _ in range(rng.randint(0, parent.rank)):
        buf.absorb(_combination(parent, rng))
    return buf


def _contained(small: Buffer, big: Buffer) -> bool:
    return all(not big.vector_is_innovative(row[: big.nu]) for row in small.echelon)


def check_inequalities(q: int, trials: int, nu: int = 4, seed: int = 0) -> InequalityReport:
    """Estimate both conditional innovation probabilities by rejection sampling."""
    if trials < 1:
        raise ValueError("trials must be positive")
    fld = field_for_q(q)
    rng = random.Random(seed)
    hits1 = hits2 = 0
    d_hits1 = 0
    n1 = n2 = 0
    while n2 < trials:
        # Gain: S_v not inside S_w; does a random combination from v raise dim S_w?
        v = _random_space(fld, nu, rng, nu)
        w = _random_space(fld, nu, rng, nu - 1)
        if _contained(v, w):
            continue
        n2 += 1
        hits2 += w.vector_is_innovative(_combination(v, rng))
    while n1 < trials:
        # Escape: S_w inside S_u, S_v not inside S_u; does S+_w leave S_u?
        u = _random_space(fld, nu, rng, nu - 1)
        v = _random_space(fld, nu, rng, nu)
        if _contained(v, u):
            continue
        w = _subspace_of(fld, u, rng)
        w.absorb(_combination(v, rng))
        n1 += 1
        hits1 += not _contained(w, u)
    # Delta analogue on lineage sets: v sends a uniform element of S_v minus S_w.
    d_hits2 = d_n2 = 0
    d_n1 = 0
    while d_n2 < trials:
        sv, sw = rng.getrandbits(nu), rng.getrandbits(nu)
        diff = sv & ~sw
        if not diff:
            continue
        d_n2 += 1
        x = rng.choice(_bits(diff, nu))
        d_hits2 += not sw >> x & 1
    while d_n1 < trials:
        su, sv = rng.getrandbits(nu), rng.getrandbits(nu)
        sw = su & rng.getrandbits(nu)
        if not sv & ~su or not sv & ~sw:
            continue
        d_n1 += 1
        x = rng.choice(_bits(sv & ~sw, nu))
        d_hits1 += not su >> x & 1
    return InequalityReport(q, trials, hits1 / n1, hits2 / n2, d_hits1 / d_n1, d_hits2 / d_n2)
