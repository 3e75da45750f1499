"""Densities, entropy, contact efficiency, throughput/delay and tail bounds."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np


@dataclass
class DensityVector:
    """Copy counts of the nu batch packets among relays (source excluded)."""

    t: float
    m: list[int]
    n_nodes: int

    def __post_init__(self):
        if any(c < 0 or c > self.n_nodes - 1 for c in self.m):
            raise ValueError("copy counts must lie in [0, N-1]")

    @property
    def rho(self) -> list[float]:
        return [c / (self.n_nodes - 1) for c in self.m]

    @property
    def rho_norm(self) -> list[float]:
        """Densities rescaled to sum to one; all zeros while nothing is spread."""
        total = sum(self.m)
        if total == 0:
            return [0.0] * len(self.m)
        return [c / total for c in self.m]

    @property
    def empty(self) -> bool:
        return sum(self.m) == 0


def measure_densities(state) -> DensityVector:
    """Copy counts of the propagating batch in a simulation state.

    ``state`` needs ``time``, ``counts`` (per-packet copies among relays) and
    ``n_nodes``, which :class:`rlncdtn.protocols.SimState` provides.
    """
    return DensityVector(state.time, list(state.counts), state.n_nodes)


@dataclass
class BufferIndicator:
    """Which batch packets (lineages / DOF labels) a node holds, as a bitmask."""

    node_id: int
    bits: int

    @property
    def occupancy(self) -> int:
        return bin(self.bits).count("1")


def entropy(rho_norm: Sequence[float]) -> float:
    """Base-nu entropy of normalised densities, with 0*log(1/0) = 0."""
    nu = len(rho_norm)
    if nu < 2:
        raise ValueError("entropy needs nu >= 2 (log base 1 is undefined)")
    if any(p < 0 for p in rho_norm):
        raise ValueError("densities must be non-negative")
    if abs(math.fsum(rho_norm) - 1.0) > 1e-9:
        raise ValueError("normalised densities must sum to 1")
    h = 0.0
    for p in rho_norm:
        if p > 0:
            h -= p * math.log(p)
    return min(1.0, max(0.0, h / math.log(nu)))


def density_entropy(dv: DensityVector) -> tuple[float, bool]:
    """(H, degenerate). H is 0 and flagged when no packet has been spread yet."""
    if dv.empty:
        return 0.0, True
    return entropy(dv.rho_norm), False


def expected_efficient_fraction(rho: Sequence[float]) -> float:
    """sum_k rho_k (1 - rho_k): expected efficient first contacts per relay.

    Works for single-packet-per-node densities and for densities of whole
    buffer indicators alike (see :func:`indicator_densities`).
    """
    return float(sum(r * (1.0 - r) for r in rho))


def indicator_densities(indicators: Iterable[int]) -> list[float]:
    """Densities of the distinct buffer-indicator functions among relays."""
    counts: dict[int, int] = {}
    n = 0
    for bits in indicators:
        counts[bits] = counts.get(bits, 0) + 1
        n += 1
    if n == 0:
        return []
    return [c / n for c in counts.values()]


def simplex_grid_argmax(nu: int, step: float = 0.01):
    """Brute-force maximum of the efficiency objective over a simplex grid.

    Returns (best value, list of maximising points).
    """
    n = round(1 / step)
    if not math.isclose(n * step, 1.0):
        raise ValueError("step must divide 1")
    best = -1.0
    arg: list[tuple[float, ...]] = []

    def rec(prefix: list[int], left: int, slots: int):
        nonlocal best, arg
        if slots == 1:
            pt = [c / n for c in prefix + [left]]
            val = expected_efficient_fraction(pt)
            if val > best + 1e-12:
                best, arg = val, [tuple(pt)]
            elif abs(val - best) <= 1e-12:
                arg.append(tuple(pt))
            return
        for c in range(left + 1):
            rec(prefix + [c], left - c, slots - 1)

    rec([], n, nu)
    return best, arg


def sliding_efficiency(outcomes: Sequence, window: int = 50, t0: float = 0.0):
    """Efficient transfers per unit time over a trailing window of contacts.

    ``outcomes`` are time-ordered contacts carrying ``time`` and
    ``n_innovative`` (0, 1 or 2; a contact useful both ways counts twice).
    The span of a window is measured from the contact just before it (or
    ``t0``) to its last contact.
    """
    if window < 1:
        raise ValueError("window must be >= 1")
    times = [o.time for o in outcomes]
    eff = [o.n_innovative for o in outcomes]
    series = []
    acc = 0
    for i in range(len(outcomes)):
        acc += eff[i]
        j = i - window
        if j >= 0:
            acc -= eff[j]
            start = times[j]
        else:
            start = t0
        span = times[i] - start
        series.append((times[i], acc / span if span > 0 else 0.0))
    return series


def time_average(series: Sequence[tuple[float, float]], t_start: float, t_end: float) -> float:
    """Mean of a piecewise-constant series (value holds until the next sample)."""
    if t_end <= t_start:
        raise ValueError("empty averaging interval")
    total = 0.0
    for (t, v), nxt in zip(series, list(series[1:]) + [(t_end, None)]):
        lo = max(t, t_start)
        hi = min(nxt[0], t_end)
        if hi > lo:
            total += v * (hi - lo)
    return total / (t_end - t_start)


# -- seeding closed forms ------------------------------------------------------

def seeding_expectation(n_nodes: int, nu: int) -> float:
    """Expected source contacts to place nu packets on distinct nodes: sum N/(N-i+1)."""
    if not 1 <= nu <= n_nodes:
        raise ValueError("need 1 <= nu <= N")
    return math.fsum(n_nodes / (n_nodes - i + 1) for i in range(1, nu + 1))


def seeding_failure_bounds(n_nodes: int, nu: int) -> list[float]:
    """Upper bounds on the chance that packet i does not end on its own relay.

    pi_i <= ((i-1)/N) * prod_{k=i+1..nu} (k-1)/N, for i = 1..nu.
    """
    if not 1 <= nu <= n_nodes:
        raise ValueError("need 1 <= nu <= N")
    out = []
    for i in range(1, nu + 1):
        p = (i - 1) / n_nodes
        for k in range(i + 1, nu + 1):
            p *= (k - 1) / n_nodes
        out.append(p)
    return out


# -- deadline tail bounds --------------------------------------------------------

def markov_bound(mean_tp: float, tl: float) -> float:
    if tl <= 0:
        raise ValueError("deadline must be positive")
    if mean_tp < 0:
        raise ValueError("mean must be non-negative")
    return min(1.0, mean_tp / tl)


def chernoff_bound(samples: Sequence[float], tl: float, n_grid: int = 64) -> float:
    """min over s of exp(-s*Tl) * (empirical mgf at s), clamped to [0, 1].

    The s-grid is log-spaced up to s_max = 700 / max(sample), which keeps every
    exp(s*x) representable; the minimum is taken in log space.
    """
    x = np.asarray(samples, dtype=float)
    if x.size == 0:
        raise ValueError("no samples")
    if tl <= 0:
        raise ValueError("deadline must be positive")
    xmax = float(x.max())
    if xmax <= 0:
        return 0.0
    s_max = 700.0 / xmax
    s = np.geomspace(s_max * 1e-6, s_max, n_grid)
    # log of the empirical mgf via log-sum-exp
    sx = np.outer(s, x)
    top = sx.max(axis=1)
    log_mgf = top + np.log(np.exp(sx - top[:, None]).mean(axis=1))
    log_bound = float(np.min(log_mgf - s * tl))
    return min(1.0, math.exp(log_bound)) if log_bound < 700 else 1.0


def empirical_exceedance(samples: Sequence[float], tl: float) -> float:
    x = np.asarray(samples, dtype=float)
    if x.size == 0:
        raise ValueError("no samples")
    return float(np.mean(x > tl))


# -- run aggregates ---------------------------------------------------------------

@dataclass
class BatchRecord:
    batch_id: int
    origin: float                 # batch takes over the network (delay reference)
    seed_start: float | None = None
    prop_start: float | None = None
    deadline: float | None = None
    seeding_time: float | None = None   # T^s
    completion: float | None = None     # all destinations decoded
    decode_times: dict[int, float] = field(default_factory=dict)
    seeded_distinct: bool | None = None
    source_tx: int = 0

    @property
    def propagation_time(self) -> float | None:
        """T^p: from the start of propagation to the last destination decoding."""
        if self.completion is None or self.prop_start is None:
            return None
        return self.completion - self.prop_start


@dataclass
class RunMetrics:
    """Per-run aggregates. Throughput unit: decoded variables per unit time per destination."""

    nu: int
    n_destinations: int
    elapsed: float = 0.0
    batches: list[BatchRecord] = field(default_factory=list)
    entropy_series: list[tuple[float, float]] = field(default_factory=list)
    outcomes: list = field(default_factory=list)
    transmissions: int = 0
    innovative: int = 0
    redundant_packet_count: int = 0
    source_tx_count: int = 0
    deadline_used: float | None = None

    @property
    def delivered(self) -> int:
        """Destination-batch pairs decoded before the batch expired."""
        total = 0
        for b in self.batches:
            dl = b.deadline
            total += sum(1 for t in b.decode_times.values() if dl is None or t <= dl)
        return total

    @property
    def delivery_ratio(self) -> float:
        if not self.batches:
            return 0.0
        return self.delivered / (len(self.batches) * self.n_destinations)

    @property
    def throughput(self) -> float:
        if self.elapsed <= 0:
            return 0.0
        return self.delivered * self.nu / self.n_destinations / self.elapsed

    @property
    def delay(self) -> float:
        """Mean time from a batch taking over the network to decoding.

        A batch takes over when its predecessor expires (or at its own start if
        that is later); seeding that overlaps the predecessor's propagation is
        therefore free, and only seeding overruns add delay.
        """
        vals = [t - b.origin for b in self.batches for t in b.decode_times.values()]
        return float(np.mean(vals)) if vals else math.nan

    @property
    def propagation_times(self) -> list[float]:
        return [b.propagation_time for b in self.batches if b.propagation_time is not None]

    @property
    def seeding_times(self) -> list[float]:
        return [b.seeding_time for b in self.batches if b.seeding_time is not None]

    @property
    def innovation_rate(self) -> float:
        return self.innovative / self.transmissions if self.transmissions else math.nan

    def summary(self) -> dict[str, float]:
        tp = self.propagation_times
        ts = self.seeding_times
        return {
            "throughput": self.throughput,
            "delay": self.delay,
            "delivery_ratio": self.delivery_ratio,
            "mean_tp": float(np.mean(tp)) if tp else math.nan,
            "max_tp": float(np.max(tp)) if tp else math.nan,
            "mean_ts": float(np.mean(ts)) if ts else math.nan,
            "deadline": self.deadline_used if self.deadline_used is not None else math.nan,
            "batches": len(self.batches),
            "elapsed": self.elapsed,
            "transmissions": self.transmissions,
            "redundant": self.redundant_packet_count,
            "source_tx": self.source_tx_count,
        }
