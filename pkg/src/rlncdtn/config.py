"""Experiment configuration: INI-style ``key = value`` sections.

Schema (defaults in brackets)::

    [mobility]
    n_nodes = 100            ; N
    lambda = 0.005           ; pairwise contact rate
    horizon = 1e6            ; simulated time cap per run
    seeds = 1, 2, 3          ; one replication per seed (required, non-empty)
    trace =                  ; optional trace file; replaces generated contacts

    [field]
    k = 8                    ; GF(2^k), 1..16
    reduction_poly =         ; optional, e.g. 0x11b

    [protocol]
    kind = pipelined-gamma, gamma   ; comma list, run on identical traces
    B = 11
    nu =                     ; default: B for gamma/delta/benchmark1, else B-1
                             ; (B-2 when B-1 > N/10)
    forwarding = delta       ; relay discipline for benchmark kinds
    feedback = exact         ; exact | bloom
    bloom_m =                ; default 8*B
    bloom_h = 3
    deadline = max           ; pipelined T^l_p: 'max' (calibrated) or a number
    ttl = max                ; plain batches: 'max', 'auto' (c ln N/(lambda(N-1))) or a number
    ttl_c = 4.0
    seeding = blind          ; blind | retry
    release_delay =          ; default nu/(lambda(N-1))

    [batches]
    n_batches = 100
    packet_bits = 8          ; K, multiple of k

    [output]
    directory = results
    rescale_timeline = false ; multiply series times by N-2
    window = 50              ; contacts per efficiency window
"""
from __future__ import annotations

import configparser
import dataclasses
import io
from dataclasses import dataclass, fields, replace
from pathlib import Path

from .protocols.state import ProtocolKind


class ConfigError(ValueError):
    def __init__(self, name: str, msg: str):
        super().__init__(f"{name}: {msg}")
        self.field = name


@dataclass(frozen=True)
class MobilitySection:
    n_nodes: int = 100
    lam: float = 0.005
    horizon: float = 1e6
    seeds: tuple[int, ...] = (1,)
    trace: str | None = None


@dataclass(frozen=True)
class FieldSection:
    k: int = 8
    reduction_poly: int | None = None


@dataclass(frozen=True)
class ProtocolSection:
    kinds: tuple[ProtocolKind, ...] = (ProtocolKind.PIPELINED_GAMMA, ProtocolKind.GAMMA)
    B: int = 11
    nu: int | None = None
    forwarding: str = "delta"
    feedback: str = "exact"
    bloom_m: int | None = None
    bloom_h: int = 3
    deadline: float | None = None      # None means calibrated 'max'
    ttl: float | str | None = None     # None 'max', 'auto', or a number
    ttl_c: float = 4.0
    seeding: str = "blind"
    release_delay: float | None = None


@dataclass(frozen=True)
class BatchSection:
    n_batches: int = 100
    packet_bits: int = 8


@dataclass(frozen=True)
class OutputSection:
    directory: str = "results"
    rescale_timeline: bool = False
    window: int = 50


@dataclass(frozen=True)
class ExperimentConfig:
    mobility: MobilitySection = dataclasses.field(default_factory=MobilitySection)
    field: FieldSection = dataclasses.field(default_factory=FieldSection)
    protocol: ProtocolSection = dataclasses.field(default_factory=ProtocolSection)
    batches: BatchSection = dataclasses.field(default_factory=BatchSection)
    output: OutputSection = dataclasses.field(default_factory=OutputSection)

    def nu_for(self, kind: ProtocolKind) -> int:
        """Batch size for a protocol kind (explicit ``nu`` wins)."""
        p = self.protocol
        if p.nu is not None:
            return p.nu
        if kind in (ProtocolKind.GAMMA, ProtocolKind.DELTA, ProtocolKind.BENCHMARK1):
            return p.B
        nu = p.B - 1
        if nu > self.mobility.n_nodes / 10 and p.B - 2 >= 1:
            nu = p.B - 2
        return nu

    def validate(self) -> "ExperimentConfig":
        m, f, p, b, o = self.mobility, self.field, self.protocol, self.batches, self.output
        if m.n_nodes < 2:
            raise ConfigError("mobility.n_nodes", "must be >= 2")
        if not m.lam > 0:
            raise ConfigError("mobility.lambda", "must be positive")
        if not m.horizon > 0:
            raise ConfigError("mobility.horizon", "must be positive")
        if not m.seeds:
            raise ConfigError("mobility.seeds", "must list at least one seed")
        if not 1 <= f.k <= 16:
            raise ConfigError("field.k", "must lie in 1..16")
        if not p.kinds:
            raise ConfigError("protocol.kind", "must name at least one protocol")
        if p.B < 1 or p.B > m.n_nodes:
            raise ConfigError("protocol.B", "must satisfy 1 <= B <= N")
        if p.nu is not None and not 1 <= p.nu <= p.B:
            raise ConfigError("protocol.nu", "must satisfy 1 <= nu <= B")
        for kind in p.kinds:
            nu = self.nu_for(kind)
            if nu < 1:
                raise ConfigError("protocol.nu", f"no valid batch size for {kind.value}")
            if kind.pipelined and nu > p.B - 1:
                raise ConfigError("protocol.nu", f"{kind.value} needs nu <= B - 1")
            if kind.benchmark in (2, 3) and nu > m.n_nodes - 1:
                raise ConfigError("protocol.nu", f"{kind.value} needs nu <= N - 1")
        if p.forwarding not in ("gamma", "delta"):
            raise ConfigError("protocol.forwarding", "must be gamma or delta")
        if p.feedback not in ("exact", "bloom"):
            raise ConfigError("protocol.feedback", "must be exact or bloom")
        if p.bloom_m is not None and p.bloom_m < 1:
            raise ConfigError("protocol.bloom_m", "must be positive")
        if p.bloom_h < 1:
            raise ConfigError("protocol.bloom_h", "must be positive")
        if p.deadline is not None and not p.deadline > 0:
            raise ConfigError("protocol.deadline", "must be positive or 'max'")
        if isinstance(p.ttl, float) and not p.ttl > 0:
            raise ConfigError("protocol.ttl", "must be positive, 'max' or 'auto'")
        if not p.ttl_c > 0:
            raise ConfigError("protocol.ttl_c", "must be positive")
        if p.seeding not in ("blind", "retry"):
            raise ConfigError("protocol.seeding", "must be blind or retry")
        if p.release_delay is not None and p.release_delay < 0:
            raise ConfigError("protocol.release_delay", "must be non-negative")
        if b.n_batches < 1:
            raise ConfigError("batches.n_batches", "must be >= 1")
        if b.packet_bits < 1 or b.packet_bits % f.k:
            raise ConfigError("batches.packet_bits", "must be a positive multiple of k")
        if o.window < 1:
            raise ConfigError("output.window", "must be >= 1")
        return self

    def to_ini(self) -> str:
        """Fully resolved configuration in the input format (used as output echo)."""
        m, f, p, b, o = self.mobility, self.field, self.protocol, self.batches, self.output

        def opt(v):
            return "" if v is None else str(v)

        cp = configparser.ConfigParser()
        cp["mobility"] = {"n_nodes": str(m.n_nodes), "lambda": repr(m.lam),
                          "horizon": repr(m.horizon),
                          "seeds": ", ".join(str(s) for s in m.seeds), "trace": opt(m.trace)}
        cp["field"] = {"k": str(f.k),
                       "reduction_poly": "" if f.reduction_poly is None else hex(f.reduction_poly)}
        cp["protocol"] = {
            "kind": ", ".join(k.value for k in p.kinds), "B": str(p.B), "nu": opt(p.nu),
            "forwarding": p.forwarding, "feedback": p.feedback, "bloom_m": opt(p.bloom_m),
            "bloom_h": str(p.bloom_h),
            "deadline": "max" if p.deadline is None else repr(p.deadline),
            "ttl": "max" if p.ttl is None else (p.ttl if isinstance(p.ttl, str) else repr(p.ttl)),
            "ttl_c": repr(p.ttl_c), "seeding": p.seeding, "release_delay": opt(p.release_delay)}
        cp["batches"] = {"n_batches": str(b.n_batches), "packet_bits": str(b.packet_bits)}
        cp["output"] = {"directory": o.directory,
                        "rescale_timeline": str(o.rescale_timeline).lower(),
                        "window": str(o.window)}
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue().strip() + "\n"


_KNOWN = {
    "mobility": {"n_nodes", "lambda", "horizon", "seeds", "trace"},
    "field": {"k", "reduction_poly"},
    "protocol": {"kind", "b", "nu", "forwarding", "feedback", "bloom_m", "bloom_h", "deadline",
                 "ttl", "ttl_c", "seeding", "release_delay"},
    "batches": {"n_batches", "packet_bits"},
    "output": {"directory", "rescale_timeline", "window"},
}


def _get(cp, section, key, conv, default):
    if not cp.has_option(section, key):
        return default
    raw = cp.get(section, key).strip()
    if raw == "":
        return default
    try:
        return conv(raw)
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"{section}.{key}", f"invalid value {raw!r} ({exc})") from None


def _int_list(raw: str) -> tuple[int, ...]:
    return tuple(int(x) for x in raw.replace(",", " ").split())


def _kinds(raw: str) -> tuple[ProtocolKind, ...]:
    return tuple(ProtocolKind(x.strip().lower()) for x in raw.split(",") if x.strip())


def _max_or_float(raw: str):
    return None if raw.lower() == "max" else float(raw)


def _ttl(raw: str):
    low = raw.lower()
    if low == "max":
        return None
    if low == "auto":
        return "auto"
    return float(raw)


def _bool(raw: str) -> bool:
    low = raw.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError("expected true/false")


def parse_config(text: str, source: str = "<config>") -> ExperimentConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError("<file>", str(exc)) from None
    for section in cp.sections():
        if section not in _KNOWN:
            raise ConfigError(section, "unknown section")
        for key in cp[section]:
            if key not in _KNOWN[section]:
                raise ConfigError(f"{section}.{key}", "unknown key")
    d = ExperimentConfig()
    seeds = d.mobility.seeds
    if cp.has_option("mobility", "seeds"):
        seeds = _get(cp, "mobility", "seeds", _int_list, ())
        if not seeds:
            raise ConfigError("mobility.seeds", "must list at least one seed")
    mobility = MobilitySection(
        n_nodes=_get(cp, "mobility", "n_nodes", int, d.mobility.n_nodes),
        lam=_get(cp, "mobility", "lambda", float, d.mobility.lam),
        horizon=_get(cp, "mobility", "horizon", float, d.mobility.horizon),
        seeds=seeds,
        trace=_get(cp, "mobility", "trace", str, None))
    fld = FieldSection(
        k=_get(cp, "field", "k", int, d.field.k),
        reduction_poly=_get(cp, "field", "reduction_poly", lambda s: int(s, 0), None))
    proto = ProtocolSection(
        kinds=_get(cp, "protocol", "kind", _kinds, d.protocol.kinds),
        B=_get(cp, "protocol", "b", int, d.protocol.B),
        nu=_get(cp, "protocol", "nu", int, None),
        forwarding=_get(cp, "protocol", "forwarding", str.lower, d.protocol.forwarding),
        feedback=_get(cp, "protocol", "feedback", str.lower, d.protocol.feedback),
        bloom_m=_get(cp, "protocol", "bloom_m", int, None),
        bloom_h=_get(cp, "protocol", "bloom_h", int, d.protocol.bloom_h),
        deadline=_get(cp, "protocol", "deadline", _max_or_float, None),
        ttl=_get(cp, "protocol", "ttl", _ttl, None),
        ttl_c=_get(cp, "protocol", "ttl_c", float, d.protocol.ttl_c),
        seeding=_get(cp, "protocol", "seeding", str.lower, d.protocol.seeding),
        release_delay=_get(cp, "protocol", "release_delay", float, None))
    batches = BatchSection(
        n_batches=_get(cp, "batches", "n_batches", int, d.batches.n_batches),
        packet_bits=_get(cp, "batches", "packet_bits", int, d.batches.packet_bits))
    output = OutputSection(
        directory=_get(cp, "output", "directory", str, d.output.directory),
        rescale_timeline=_get(cp, "output", "rescale_timeline", _bool, False),
        window=_get(cp, "output", "window", int, d.output.window))
    return ExperimentConfig(mobility, fld, proto, batches, output).validate()


def load_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError("<file>", f"cannot read {path}: {exc.strerror}") from None
    return parse_config(text, str(path))


def with_overrides(cfg: ExperimentConfig, section: str, **values) -> ExperimentConfig:
    """Copy of ``cfg`` with fields of one section replaced, re-validated."""
    sec = getattr(cfg, section)
    names = {f.name for f in fields(sec)}
    unknown = set(values) - names
    if unknown:
        raise ConfigError(f"{section}.{sorted(unknown)[0]}", "unknown key")
    return replace(cfg, **{section: replace(sec, **values)}).validate()
