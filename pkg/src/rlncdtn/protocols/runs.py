"""Run drivers: benchmarks, plain sequential batches and the pipelined protocol."""
from __future__ import annotations

import math
from typing import Callable, Iterable

from ..metrics import BatchRecord, RunMetrics, entropy
from .seeding import Seeder, SeedingMode, default_release_delay
from .state import SOURCE, SimState, handle_contact


def default_ttl(n_nodes: int, lam: float, c: float = 4.0) -> float:
    """TTL = c ln N / (lambda (N-1)), the epidemic spreading time scale."""
    return c * math.log(n_nodes) / (lam * (n_nodes - 1))


def _sync(metrics: RunMetrics, state: SimState) -> RunMetrics:
    metrics.transmissions = state.transmissions
    metrics.innovative = state.innovative
    metrics.redundant_packet_count = state.redundant
    metrics.source_tx_count = state.source_tx
    return metrics


def _state_entropy(state: SimState) -> float:
    total = sum(state.counts)
    if total == 0:
        return 0.0
    return entropy([c / total for c in state.counts])


# -- benchmarks ---------------------------------------------------------------------

def place_initial(state: SimState, assignment: list[int]) -> None:
    """Give relays ``assignment[i]`` packet ``i % nu`` (one packet each)."""
    for i, node_id in enumerate(assignment):
        if node_id == SOURCE:
            raise ValueError("initial placement must use relays")
        state.place(state.nodes[node_id], state.packets[i % state.nu])


def run_benchmark(state: SimState, kind: int, contacts: Iterable, horizon: float = math.inf,
                  keep_outcomes: bool = True) -> RunMetrics:
    """One batch until every destination decodes (or the horizon).

    kind 1: the source transmits the batch continuously, nothing pre-placed.
    kind 2: nu packets pre-placed on distinct relays, the source keeps sending
            packets to relays that miss them.
    kind 3: nu packets pre-placed on distinct relays, the source is silent.
    """
    if kind not in (1, 2, 3):
        raise ValueError(f"unknown benchmark kind {kind}")
    nu = state.nu
    if kind != 1 and nu > state.n_nodes - 1:
        raise ValueError("pre-placement needs nu <= N-1 relays")
    state.source_active = kind != 3
    batch, packets = state.new_batch(0)
    state.start_batch(batch, packets)
    rec = BatchRecord(0, origin=0.0, prop_start=0.0)
    metrics = RunMetrics(nu, state.n_destinations, batches=[rec])
    state.on_decode = lambda node, t: rec.decode_times.__setitem__(node, t)
    if kind != 1:
        place_initial(state, state.rng.sample(range(1, state.n_nodes), nu))
    metrics.entropy_series.append((0.0, _state_entropy(state)))
    t = 0.0
    for ev in contacts:
        t = ev[0]
        if t > horizon:
            t = horizon
            break
        out = handle_contact(state, ev)
        if keep_outcomes:
            metrics.outcomes.append(out)
        if out.n_innovative:
            metrics.entropy_series.append((t, _state_entropy(state)))
        if state.all_decoded:
            rec.completion = t
            break
    rec.deadline = None
    metrics.elapsed = t
    state.on_decode = None
    return _sync(metrics, state)


def density_counts(weights: list[float], total: int) -> list[int]:
    """Split ``total`` relays across packets proportionally (largest remainder)."""
    s = sum(weights)
    raw = [w * total / s for w in weights]
    out = [int(math.floor(r)) for r in raw]
    order = sorted(range(len(raw)), key=lambda i: raw[i] - out[i], reverse=True)
    for i in order[: total - sum(out)]:
        out[i] += 1
    return out


def first_contact_efficiency(state: SimState, counts: list[int], contacts: Iterable) -> float:
    """Fraction of relays whose first relay-relay contact is efficient.

    ``counts[k]`` relays start with packet k (one packet per relay). The source
    stays silent; contacts involving it are skipped.
    """
    nu = state.nu
    if len(counts) != nu or sum(counts) > state.n_nodes - 1:
        raise ValueError("counts must have nu entries summing to at most N-1")
    state.source_active = False
    batch, packets = state.new_batch(0)
    state.start_batch(batch, packets)
    relays = list(range(1, state.n_nodes))
    state.rng.shuffle(relays)
    pos = 0
    for k, c in enumerate(counts):
        for node_id in relays[pos:pos + c]:
            state.place(state.nodes[node_id], packets[k])
        pos += c
    seen: set[int] = set()
    efficient = 0
    n_relays = state.n_nodes - 1
    for ev in contacts:
        _, a, b = ev
        if a == SOURCE or b == SOURCE:
            continue
        out = handle_contact(state, ev)
        for x in (a, b):
            if x not in seen:
                seen.add(x)
                efficient += out.efficient
        if len(seen) == n_relays:
            break
    return efficient / len(seen) if seen else math.nan


# -- plain sequential batches ------------------------------------------------------------

def run_plain(state: SimState, contacts: Iterable, n_batches: int,
              ttl: float | None = None, horizon: float = math.inf) -> RunMetrics:
    """Sequential batches with a continuously transmitting source.

    With ``ttl`` each batch expires ``ttl`` after it starts and the next one
    begins; with ``ttl=None`` the next batch starts as soon as every
    destination has decoded (used to measure T^p).
    """
    if n_batches < 1:
        raise ValueError("n_batches must be >= 1")
    state.source_active = True
    metrics = RunMetrics(state.nu, state.n_destinations, deadline_used=ttl)
    rec: BatchRecord | None = None

    def on_decode(node: int, t: float) -> None:
        rec.decode_times[node] = t

    state.on_decode = on_decode

    def begin(n: int, t: float) -> BatchRecord:
        batch, packets = state.new_batch(n)
        state.start_batch(batch, packets)
        r = BatchRecord(n, origin=t, seed_start=t, prop_start=t, seeding_time=0.0,
                        deadline=None if ttl is None else t + ttl)
        metrics.batches.append(r)
        return r

    rec = begin(0, 0.0)
    t = 0.0
    finished = False
    for ev in contacts:
        t = ev[0]
        if t > horizon:
            t = horizon
            break
        while rec.deadline is not None and t >= rec.deadline:
            if rec.batch_id + 1 == n_batches:
                t = rec.deadline
                finished = True
                break
            rec = begin(rec.batch_id + 1, rec.deadline)
        if finished:
            break
        handle_contact(state, ev)
        if rec.completion is None and state.all_decoded:
            rec.completion = t
            if ttl is None:
                rec.deadline = t
                if rec.batch_id + 1 == n_batches:
                    finished = True
                    break
                rec = begin(rec.batch_id + 1, t)
    state.expire_batch()
    state.on_decode = None
    metrics.elapsed = t
    return _sync(metrics, state)


# -- pipelined protocol ----------------------------------------------------------------------

def run_pipelined(state: SimState, contacts: Iterable, n_batches: int, lam: float,
                  deadline: float | None = None,
                  seeding_mode: SeedingMode | str = SeedingMode.BLIND,
                  release_delay: float | None = None,
                  horizon: float = math.inf) -> RunMetrics:
    """Seeding of batch n+1 overlaps the propagation of batch n.

    Timeline of batch n (times absolute):

    * seeding starts at S_n; the source hands out one packet per contact;
    * its packets wait in seed slots until the promotion time
      P_n = max(D_{n-1}, S_n + release_delay), when batch n-1 has been deleted;
    * propagation starts at max(P_n, end of seeding) and the batch expires at
      D_n = propagation start + ``deadline``;
    * seeding of batch n+1 starts at max(propagation start, D_n - release_delay)
      so that its estimated end coincides with D_n.

    With ``deadline=None`` a batch expires as soon as every destination has
    decoded and the next seeding starts at the propagation start (this mode is
    used to measure T^p).
    """
    if state.capacity - state.nu < 1:
        raise ValueError("pipelining needs nu <= B - 1")
    if n_batches < 1:
        raise ValueError("n_batches must be >= 1")
    state.source_active = False
    n_nodes, nu = state.n_nodes, state.nu
    est = default_release_delay(n_nodes, nu, lam) if release_delay is None else release_delay
    metrics = RunMetrics(nu, state.n_destinations, deadline_used=deadline)
    inf = math.inf

    active: BatchRecord | None = None
    seeding: dict | None = None        # batch being seeded / waiting for promotion
    last_expiry = 0.0
    next_seed_at = inf
    done = False
    t = 0.0

    def on_decode(node: int, when: float) -> None:
        active.decode_times[node] = when

    state.on_decode = on_decode

    def begin_seeding(n: int, when: float) -> dict:
        batch, packets = state.new_batch(n)
        rec = BatchRecord(n, origin=when, seed_start=when)
        metrics.batches.append(rec)
        seeder = Seeder(state, packets, when, seeding_mode, release_time=when + est)
        return {"batch": batch, "packets": packets, "rec": rec, "seeder": seeder,
                "promoted": False}

    def schedule_after_prop_start(rec: BatchRecord) -> None:
        nonlocal next_seed_at
        if deadline is not None:
            rec.deadline = rec.prop_start + deadline
        if rec.batch_id + 1 < n_batches:
            if deadline is None:
                next_seed_at = rec.prop_start
            else:
                next_seed_at = max(rec.prop_start, rec.deadline - est)

    def finish_seeding(sd: dict) -> None:
        rep = sd["seeder"].finalize()
        rec = sd["rec"]
        rec.seeding_time = rep.seeding_time
        rec.seeded_distinct = rep.distinct
        rec.source_tx = rep.transmissions

    def process_timers(now: float) -> bool:
        """Fire every scheduled event due at or before ``now``; True when the run ends."""
        nonlocal active, seeding, last_expiry, next_seed_at
        while True:
            t_dead = active.deadline if active is not None and active.deadline is not None else inf
            t_prom = inf
            if seeding is not None and not seeding["promoted"] and active is None:
                t_prom = max(last_expiry, seeding["rec"].seed_start + est)
            t_seed = next_seed_at
            ev_t = min(t_dead, t_prom, t_seed)
            if ev_t > now:
                return False
            state.time = ev_t
            if ev_t == t_dead:
                state.expire_batch()
                last_expiry = ev_t
                last = active.batch_id + 1 == n_batches
                active = None
                if last:
                    metrics.elapsed = ev_t
                    return True
            elif ev_t == t_prom:
                sd = seeding
                state.start_batch(sd["batch"], sd["packets"])
                sd["seeder"].promote()
                sd["promoted"] = True
                active = sd["rec"]
                active.origin = max(active.seed_start, last_expiry if active.batch_id else 0.0)
                # decodes caused by promotion itself (nu == 1)
                if sd["seeder"].done:
                    active.prop_start = ev_t
                    finish_seeding(sd)
                    seeding = None
                    schedule_after_prop_start(active)
                _check_completion(ev_t)
            else:
                next_seed_at = inf
                seeding = begin_seeding(len(metrics.batches), ev_t)

    def _check_completion(now: float) -> None:
        if active is not None and active.completion is None and state.all_decoded:
            active.completion = now
            if deadline is None and active.prop_start is not None:
                active.deadline = now

    seeding = begin_seeding(0, 0.0)
    for ev in contacts:
        t = ev[0]
        if t > horizon:
            t = horizon
            break
        if process_timers(t):
            done = True
            break
        state.time = t
        busy = (False, False)
        if seeding is not None:
            sd = seeding
            busy = sd["seeder"].on_contact(ev)
            if sd["seeder"].done and sd["rec"].seeding_time is None:
                finish_seeding(sd)
                if sd["promoted"]:
                    active.prop_start = t
                    seeding = None
                    schedule_after_prop_start(active)
                    _check_completion(t)
        if active is not None:
            handle_contact(state, ev, busy)
            _check_completion(t)
    if not done:
        metrics.elapsed = t
    state.expire_batch()
    state.on_decode = None
    return _sync(metrics, state)


def run_calibrated(run: Callable[[float | None], RunMetrics], growth: float = 1.05,
                   max_rounds: int = 20) -> tuple[RunMetrics, RunMetrics]:
    """Enforced run whose deadline is the largest propagation time observed.

    ``run(deadline)`` must replay the same contacts and randomness each call.
    A completion-driven pass gives max T^p; the enforced pass uses it as the
    deadline. Enforcing a deadline shifts later batches onto different contact
    windows, so if some destination still misses it the deadline grows by
    ``growth`` and the pass is repeated. Returns (enforced, probe).
    """
    probe = run(None)
    tps = probe.propagation_times
    if not tps:
        raise RuntimeError("no batch completed in the probe pass")
    deadline = max(tps)
    enforced = probe
    for _ in range(max_rounds):
        enforced = run(deadline)
        enforced.deadline_used = deadline
        if enforced.delivery_ratio == 1.0:
            break
        deadline *= growth
    return enforced, probe
