"""Contact traces: Poisson pairwise meetings, persisted as line-oriented text.

File format::

    N=<int>
    lambda=<float>
    horizon=<float>
    seed=<int>            (optional)
    <time> <a> <b>        (one contact per line, time-ordered)

Lines starting with ``#`` and blank lines are ignored.
"""
from __future__ import annotations

import os
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, NamedTuple

import numpy as np


class TraceFormatError(ValueError):
    def __init__(self, path, lineno: int, msg: str):
        super().__init__(f"{path}:{lineno}: {msg}")
        self.path = path
        self.lineno = lineno


@dataclass(frozen=True)
class MobilityConfig:
    n_nodes: int
    lam: float
    horizon: float
    seed: int | None = 0

    def __post_init__(self):
        if self.n_nodes < 2:
            raise ValueError("need at least two nodes")
        if not self.lam > 0:
            raise ValueError("contact rate lambda must be positive")
        if not self.horizon > 0:
            raise ValueError("horizon must be positive")

    @property
    def n_pairs(self) -> int:
        return self.n_nodes * (self.n_nodes - 1) // 2

    @property
    def aggregate_rate(self) -> float:
        """Rate of the superposed contact process, lambda * N(N-1)/2."""
        return self.lam * self.n_pairs


class ContactEvent(NamedTuple):
    time: float
    a: int
    b: int


class ContactTrace:
    """Time-ordered contacts, stored column-wise."""

    def __init__(self, config: MobilityConfig, times, a, b):
        self.config = config
        self.times = np.asarray(times, dtype=float)
        self.a = np.asarray(a, dtype=np.int64)
        self.b = np.asarray(b, dtype=np.int64)
        if not (len(self.times) == len(self.a) == len(self.b)):
            raise ValueError("column lengths differ")

    def __len__(self) -> int:
        return len(self.times)

    def __iter__(self) -> Iterator[ContactEvent]:
        for t, a, b in zip(self.times.tolist(), self.a.tolist(), self.b.tolist()):
            yield ContactEvent(t, a, b)

    def __getitem__(self, i: int) -> ContactEvent:
        return ContactEvent(float(self.times[i]), int(self.a[i]), int(self.b[i]))

    def __eq__(self, other) -> bool:
        return (isinstance(other, ContactTrace) and self.config == other.config
                and np.array_equal(self.times, other.times)
                and np.array_equal(self.a, other.a) and np.array_equal(self.b, other.b))

    @property
    def events(self) -> list[ContactEvent]:
        return list(self)

    def columns(self) -> tuple[list[float], list[int], list[int]]:
        """Plain-list columns for tight simulation loops."""
        return self.times.tolist(), self.a.tolist(), self.b.tolist()


def _pair_table(n: int) -> tuple[np.ndarray, np.ndarray]:
    return np.triu_indices(n, k=1)


def generate_trace(config: MobilityConfig) -> ContactTrace:
    """Every unordered pair meets as an independent Poisson process of rate lambda.

    Sampled as the superposed process of rate lambda*N(N-1)/2 with the pair
    of each event drawn uniformly; deterministic for a given seed.
    """
    rng = np.random.default_rng(config.seed)
    rate = config.aggregate_rate
    expected = rate * config.horizon
    chunk = max(1024, int(expected + 6 * np.sqrt(expected)) + 16)
    gaps = []
    t_end = 0.0
    while t_end <= config.horizon:
        g = rng.exponential(1.0 / rate, size=chunk)
        gaps.append(g)
        t_end += float(g.sum())
    times = np.cumsum(np.concatenate(gaps))
    times = times[times <= config.horizon]
    first, second = _pair_table(config.n_nodes)
    idx = rng.integers(0, config.n_pairs, size=len(times))
    return ContactTrace(config, times, first[idx], second[idx])


def iter_contacts(n_nodes: int, lam: float, rng: np.random.Generator,
                  block: int = 4096, t0: float = 0.0) -> Iterator[ContactEvent]:
    """Unbounded contact stream, for runs whose length is not known up front."""
    rate = lam * n_nodes * (n_nodes - 1) / 2
    first, second = _pair_table(n_nodes)
    n_pairs = len(first)
    t = t0
    while True:
        times = t + np.cumsum(rng.exponential(1.0 / rate, size=block))
        idx = rng.integers(0, n_pairs, size=block)
        yield from map(ContactEvent._make,
                       zip(times.tolist(), first[idx].tolist(), second[idx].tolist()))
        t = float(times[-1])


def atomic_write(path: Path, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_trace(trace: ContactTrace, path, comments: list[str] | None = None) -> None:
    cfg = trace.config
    lines = [f"# {c}" for c in (comments or [])]
    lines += [f"N={cfg.n_nodes}", f"lambda={cfg.lam!r}", f"horizon={cfg.horizon!r}"]
    if cfg.seed is not None:
        lines.append(f"seed={cfg.seed}")
    lines += [f"{t!r} {a} {b}" for t, a, b in
              zip(trace.times.tolist(), trace.a.tolist(), trace.b.tolist())]
    atomic_write(Path(path), "\n".join(lines) + "\n")


_HEADER_KEYS = {"N": int, "lambda": float, "horizon": float, "seed": int}


def load_trace(path) -> ContactTrace:
    """Parse a trace file. Inter-contact times need not be exponential."""
    header: dict[str, float | int] = {}
    times, aa, bb = [], [], []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" in line:
                if times:
                    raise TraceFormatError(path, lineno, "header line after contact lines")
                key, _, value = (s.strip() for s in line.partition("="))
                if key not in _HEADER_KEYS:
                    raise TraceFormatError(path, lineno, f"unknown header key {key!r}")
                try:
                    header[key] = _HEADER_KEYS[key](value)
                except ValueError:
                    raise TraceFormatError(path, lineno, f"bad value for {key}: {value!r}") from None
                continue
            parts = line.split()
            if len(parts) != 3:
                raise TraceFormatError(path, lineno, f"expected 'time a b', got {line!r}")
            try:
                t, a, b = float(parts[0]), int(parts[1]), int(parts[2])
            except ValueError:
                raise TraceFormatError(path, lineno, f"unparseable contact {line!r}") from None
            if "N" not in header:
                raise TraceFormatError(path, lineno, "contact before N= header")
            n = header["N"]
            if a == b or not (0 <= a < n and 0 <= b < n):
                raise TraceFormatError(path, lineno, f"invalid node pair ({a}, {b}) for N={n}")
            if times and t < times[-1]:
                raise TraceFormatError(path, lineno, "contact times must be non-decreasing")
            times.append(t)
            aa.append(a)
            bb.append(b)
    for key in ("N", "lambda", "horizon"):
        if key not in header:
            raise TraceFormatError(path, 0, f"missing header {key}=")
    if times and times[-1] > header["horizon"]:
        raise TraceFormatError(path, 0, "contact after horizon")
    try:
        cfg = MobilityConfig(int(header["N"]), float(header["lambda"]),
                             float(header["horizon"]), header.get("seed"))
    except ValueError as exc:
        raise TraceFormatError(path, 0, str(exc)) from None
    return ContactTrace(cfg, times, aa, bb)
