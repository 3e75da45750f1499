"""Experiment orchestration: replications, sweeps and CSV output."""
from __future__ import annotations

import csv
import io
import math
import os
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

from .config import ConfigError, ExperimentConfig, with_overrides
from .gf_field import get_field
from .metrics import (RunMetrics, expected_efficient_fraction, sliding_efficiency,
                      time_average)
from .mobility import atomic_write, iter_contacts, load_trace
from .protocols.runs import (default_ttl, density_counts, first_contact_efficiency,
                             run_benchmark, run_calibrated, run_pipelined, run_plain)
from .protocols.state import Feedback, Forwarding, ProtocolKind, SimState

WORKERS_ENV = "RLNCDTN_WORKERS"

SWEEP_PARAMS = ("q", "B", "nu", "B_minus_nu", "init_density", "n_batches")

SUMMARY_COLUMNS = [
    ("seed", "-"), ("protocol", "-"), ("nu", "packets"), ("B", "packets"), ("q", "-"),
    ("throughput", "variables/time/destination"), ("delay", "time"),
    ("delivery_ratio", "-"), ("mean_tp", "time"), ("max_tp", "time"), ("mean_ts", "time"),
    ("deadline", "time"), ("batches", "-"), ("elapsed", "time"),
    ("transmissions", "packets"), ("innovative", "packets"), ("redundant", "packets"),
    ("source_tx", "packets"), ("mean_entropy", "-"), ("mean_efficiency", "transfers/time"),
]

BATCH_COLUMNS = [
    ("seed", "-"), ("protocol", "-"), ("batch", "-"), ("origin", "time"),
    ("seed_start", "time"), ("prop_start", "time"), ("deadline", "time"),
    ("seeding_time", "time"), ("propagation_time", "time"), ("completion", "time"),
    ("decoded", "destinations"), ("seeded_distinct", "-"),
]


def default_workers() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError(WORKERS_ENV, f"not an integer: {raw!r}") from None


# -- tables --------------------------------------------------------------------------

def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return "nan" if math.isnan(v) else repr(v)
    if isinstance(v, np.floating):
        return _fmt(float(v))
    return str(v)


@dataclass
class ResultTable:
    """Rows of named values; columns carry a unit written into the CSV header."""

    columns: list[tuple[str, str]]
    rows: list[dict] = field(default_factory=list)
    key: tuple[str, ...] = ()

    def add(self, row: dict) -> None:
        missing = [c for c, _ in self.columns if c not in row]
        if missing:
            raise KeyError(f"row lacks columns {missing}")
        self.rows.append(row)

    def sorted_rows(self) -> list[dict]:
        if not self.key:
            return list(self.rows)
        return sorted(self.rows, key=lambda r: tuple(str(r[k]) if isinstance(r[k], str)
                                                      else r[k] for k in self.key))

    def column(self, name: str) -> list:
        return [r[name] for r in self.sorted_rows()]

    def to_csv(self, comment: str = "") -> str:
        buf = io.StringIO()
        for line in comment.splitlines():
            buf.write(f"# {line}\n" if line else "#\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([f"{c}[{u}]" for c, u in self.columns])
        for r in self.sorted_rows():
            w.writerow([_fmt(r[c]) for c, _ in self.columns])
        return buf.getvalue()

    def write(self, path, comment: str = "") -> None:
        atomic_write(Path(path), self.to_csv(comment))


def read_table(path) -> tuple[list[str], list[dict[str, str]]]:
    """Read a CSV written by :meth:`ResultTable.write` (comment lines skipped)."""
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    reader = csv.reader(lines)
    header = next(reader)
    names = [h.split("[", 1)[0] for h in header]
    return header, [dict(zip(names, row)) for row in reader]


# -- single runs ------------------------------------------------------------------------

@dataclass
class CellResult:
    seed: int
    kind: str
    summary: dict
    batches: list[dict]
    entropy: list[tuple[float, float]]
    efficiency: list[tuple[float, float]]


@lru_cache(maxsize=4)
def _cached_trace(path: str):
    return load_trace(path)


def contacts_for(cfg: ExperimentConfig, seed: int) -> Iterator:
    m = cfg.mobility
    if m.trace:
        trace = _cached_trace(m.trace)
        if trace.config.n_nodes != m.n_nodes:
            raise ConfigError("mobility.trace", f"trace has N={trace.config.n_nodes}, "
                                                f"config has N={m.n_nodes}")
        return iter(trace)
    return iter_contacts(m.n_nodes, m.lam, np.random.default_rng(seed))


def make_state(cfg: ExperimentConfig, kind: ProtocolKind, seed: int) -> SimState:
    p = cfg.protocol
    nu = cfg.nu_for(kind)
    forwarding = (Forwarding(p.forwarding) if kind.benchmark else kind.forwarding)
    fb = Feedback(p.feedback, p.bloom_m, p.bloom_h)
    fld = get_field(cfg.field.k, cfg.field.reduction_poly)
    return SimState(cfg.mobility.n_nodes, nu, p.B, forwarding, fld, random.Random(seed),
                    feedback=fb, payload_len=cfg.batches.packet_bits // cfg.field.k)


def _run_metrics(cfg: ExperimentConfig, kind: ProtocolKind, seed: int) -> RunMetrics:
    p, m, nb = cfg.protocol, cfg.mobility, cfg.batches.n_batches
    horizon = m.horizon
    if kind.benchmark:
        return run_benchmark(make_state(cfg, kind, seed), kind.benchmark,
                             contacts_for(cfg, seed), horizon=horizon)
    if kind.pipelined:
        def run(deadline):
            return run_pipelined(make_state(cfg, kind, seed), contacts_for(cfg, seed), nb,
                                 m.lam, deadline=deadline, seeding_mode=p.seeding,
                                 release_delay=p.release_delay, horizon=horizon)
        if p.deadline is None:
            return run_calibrated(run)[0]
        return run(p.deadline)

    def run(ttl):
        return run_plain(make_state(cfg, kind, seed), contacts_for(cfg, seed), nb, ttl=ttl,
                         horizon=horizon)
    if p.ttl is None:
        return run_calibrated(run)[0]
    ttl = default_ttl(m.n_nodes, m.lam, p.ttl_c) if p.ttl == "auto" else p.ttl
    return run(ttl)


def run_cell(cfg: ExperimentConfig, kind: ProtocolKind, seed: int) -> CellResult:
    metrics = _run_metrics(cfg, kind, seed)
    s = metrics.summary()
    entropy = metrics.entropy_series
    eff = sliding_efficiency(metrics.outcomes, cfg.output.window) if metrics.outcomes else []
    end = metrics.elapsed
    mean_h = time_average(entropy, 0.0, end) if entropy and end > 0 else math.nan
    mean_e = time_average(eff, 0.0, end) if eff and end > 0 else math.nan
    summary = {
        "seed": seed, "protocol": kind.value, "nu": metrics.nu, "B": cfg.protocol.B,
        "q": 1 << cfg.field.k, "throughput": s["throughput"], "delay": s["delay"],
        "delivery_ratio": s["delivery_ratio"], "mean_tp": s["mean_tp"],
        "max_tp": s["max_tp"], "mean_ts": s["mean_ts"], "deadline": s["deadline"],
        "batches": s["batches"], "elapsed": s["elapsed"],
        "transmissions": metrics.transmissions, "innovative": metrics.innovative,
        "redundant": metrics.redundant_packet_count, "source_tx": metrics.source_tx_count,
        "mean_entropy": mean_h, "mean_efficiency": mean_e,
    }
    batches = [{
        "seed": seed, "protocol": kind.value, "batch": b.batch_id, "origin": b.origin,
        "seed_start": b.seed_start, "prop_start": b.prop_start, "deadline": b.deadline,
        "seeding_time": b.seeding_time, "propagation_time": b.propagation_time,
        "completion": b.completion, "decoded": len(b.decode_times),
        "seeded_distinct": b.seeded_distinct,
    } for b in metrics.batches]
    return CellResult(seed, kind.value, summary, batches, entropy, eff)


def _run_cell_star(args) -> CellResult:
    return run_cell(*args)


def _map(fn, tasks: Sequence, workers: int) -> list:
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=min(workers, len(tasks))) as pool:
        return list(pool.map(fn, tasks))


# -- experiments ---------------------------------------------------------------------------

@dataclass
class ExperimentResult:
    config: ExperimentConfig
    summary: ResultTable
    batches: ResultTable
    aggregate: ResultTable
    cells: list[CellResult]


AGG_METRICS = ("throughput", "delay", "delivery_ratio", "mean_tp", "max_tp", "mean_ts",
               "deadline", "mean_entropy", "mean_efficiency")


def _unit(name: str) -> str:
    return dict(SUMMARY_COLUMNS).get(name, "-")


def aggregate(summary: ResultTable, group: Sequence[str] = ("protocol",)) -> ResultTable:
    """Mean and sample standard deviation over seeds for each group."""
    cols = [(g, "-") for g in group] + [("n_seeds", "-")]
    for mname in AGG_METRICS:
        cols += [(f"{mname}_mean", _unit(mname)), (f"{mname}_std", _unit(mname))]
    out = ResultTable(cols, key=tuple(group))
    groups: dict[tuple, list[dict]] = {}
    for r in summary.sorted_rows():
        groups.setdefault(tuple(r[g] for g in group), []).append(r)
    for key, rows in groups.items():
        row = dict(zip(group, key))
        row["n_seeds"] = len(rows)
        for mname in AGG_METRICS:
            vals = np.array([float(r[mname]) for r in rows])
            ok = vals[~np.isnan(vals)]
            row[f"{mname}_mean"] = float(ok.mean()) if ok.size else math.nan
            row[f"{mname}_std"] = float(ok.std(ddof=1)) if ok.size > 1 else math.nan
        out.add(row)
    return out


def run_experiment(cfg: ExperimentConfig, workers: int | None = None) -> ExperimentResult:
    workers = default_workers() if workers is None else workers
    tasks = [(cfg, kind, seed) for seed in cfg.mobility.seeds for kind in cfg.protocol.kinds]
    cells = _map(_run_cell_star, tasks, workers)
    summary = ResultTable(SUMMARY_COLUMNS, key=("seed", "protocol"))
    batches = ResultTable(BATCH_COLUMNS, key=("seed", "protocol", "batch"))
    for c in cells:
        summary.add(c.summary)
        for b in c.batches:
            batches.add(b)
    return ExperimentResult(cfg, summary, batches, aggregate(summary), cells)


def write_experiment(result: ExperimentResult, out_dir=None) -> list[Path]:
    cfg = result.config
    out = Path(out_dir or cfg.output.directory)
    out.mkdir(parents=True, exist_ok=True)
    (out / "series").mkdir(exist_ok=True)
    echo = cfg.to_ini()
    written = []
    for name, table in (("summary.csv", result.summary), ("batches.csv", result.batches),
                        ("aggregate.csv", result.aggregate)):
        table.write(out / name, echo)
        written.append(out / name)
    scale = (cfg.mobility.n_nodes - 2) if cfg.output.rescale_timeline else 1
    t_unit = "time*(N-2)" if cfg.output.rescale_timeline else "time"
    for c in sorted(result.cells, key=lambda c: (c.seed, c.kind)):
        for label, series, unit in (("entropy", c.entropy, "-"),
                                    ("efficiency", c.efficiency, "transfers/time")):
            if not series:
                continue
            tab = ResultTable([("time", t_unit), (label, unit)])
            for t, v in series:
                tab.add({"time": t * scale, label: v})
            path = out / "series" / f"{label}_{c.kind}_seed{c.seed}.csv"
            tab.write(path, echo)
            written.append(path)
    return written


# -- sweeps ------------------------------------------------------------------------------

def density_weights(name: str, nu: int) -> list[float]:
    if name == "uniform":
        return [1.0] * nu
    if name == "all-on-one":
        return [1.0] + [0.0] * (nu - 1)
    if name.startswith("skewed-"):
        try:
            a, b = (float(x) for x in name[len("skewed-"):].split(":"))
        except ValueError:
            raise ConfigError("sweep.values", f"bad skew {name!r}, expected skewed-a:b") from None
        return [a] + [b] * (nu - 1)
    raise ConfigError("sweep.values", f"unknown density preset {name!r}")


def _density_cell(args) -> dict:
    cfg, name, seed = args
    kind = ProtocolKind.BENCHMARK3
    state = make_state(cfg, kind, seed)
    state.forwarding = Forwarding.DELTA
    counts = density_counts(density_weights(name, state.nu), cfg.mobility.n_nodes - 1)
    eff = first_contact_efficiency(state, counts, contacts_for(cfg, seed))
    rho = [c / (cfg.mobility.n_nodes - 1) for c in counts]
    return {"value": name, "seed": seed, "efficiency": eff,
            "expected": expected_efficient_fraction(rho)}


def apply_sweep_value(cfg: ExperimentConfig, param: str, value: str) -> ExperimentConfig:
    try:
        if param == "q":
            q = int(value, 0)
            k = q.bit_length() - 1
            if q < 2 or q != 1 << k:
                raise ConfigError("sweep.values", f"q={value} is not a power of two >= 2")
            packet_bits = cfg.batches.packet_bits
            if packet_bits % k:
                packet_bits = k * max(1, round(packet_bits / k))
            cfg = with_overrides(cfg, "field", k=k, reduction_poly=None)
            return with_overrides(cfg, "batches", packet_bits=packet_bits)
        if param == "B":
            return with_overrides(cfg, "protocol", B=int(value))
        if param == "nu":
            return with_overrides(cfg, "protocol", nu=int(value))
        if param == "B_minus_nu":
            return with_overrides(cfg, "protocol", nu=cfg.protocol.B - int(value))
        if param == "n_batches":
            return with_overrides(cfg, "batches", n_batches=int(value))
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError("sweep.values", f"{param}={value!r}: {exc}") from None
    raise ConfigError("sweep.param", f"unknown parameter {param!r}; choose from {SWEEP_PARAMS}")


def run_sweep(cfg: ExperimentConfig, param: str, values: Iterable[str],
              workers: int | None = None) -> ResultTable:
    """One summary row per (value, protocol) cell, aggregated over seeds."""
    workers = default_workers() if workers is None else workers
    values = [str(v).strip() for v in values if str(v).strip()]
    if param not in SWEEP_PARAMS:
        raise ConfigError("sweep.param", f"unknown parameter {param!r}; choose from {SWEEP_PARAMS}")
    if not values:
        raise ConfigError("sweep.values", "no values given")
    seeds = cfg.mobility.seeds
    if param == "init_density":
        if "uniform" not in values:
            values = ["uniform"] + values
        for v in values:
            density_weights(v, 2)
        rows = _map(_density_cell, [(cfg, v, s) for v in values for s in seeds], workers)
        table = ResultTable([("value", "-"), ("n_seeds", "-"),
                             ("efficiency_mean", "-"), ("efficiency_std", "-"),
                             ("expected_fraction", "-")])
        for v in values:
            eff = np.array([r["efficiency"] for r in rows if r["value"] == v])
            exp = next(r["expected"] for r in rows if r["value"] == v)
            table.add({"value": v, "n_seeds": len(eff), "efficiency_mean": float(eff.mean()),
                       "efficiency_std": float(eff.std(ddof=1)) if len(eff) > 1 else math.nan,
                       "expected_fraction": exp})
        return table
    cfgs = {v: apply_sweep_value(cfg, param, v) for v in values}
    tasks = [(cfgs[v], kind, s) for v in values for s in seeds for kind in cfgs[v].protocol.kinds]
    cells = _map(_run_cell_star, tasks, workers)
    per_value = ResultTable(SUMMARY_COLUMNS + [("value", "-")], key=("value", "seed", "protocol"))
    i = 0
    for v in values:
        for s in seeds:
            for _ in cfgs[v].protocol.kinds:
                row = dict(cells[i].summary)
                row["value"] = v
                per_value.add(row)
                i += 1
    agg = aggregate(per_value, group=("value", "protocol"))
    # keep the requested value order instead of lexical order
    order = {v: n for n, v in enumerate(values)}
    agg.rows.sort(key=lambda r: (order[r["value"]], r["protocol"]))
    agg.key = ()
    agg.columns = [("param", "-")] + agg.columns
    for r in agg.rows:
        r["param"] = param
    return agg
