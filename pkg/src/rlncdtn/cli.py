"""Command line: gen-trace, run, sweep, oracle.

Exit codes: 0 success, 1 configuration/usage error, 2 runtime failure,
3 oracle failure.
"""
from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path

from .config import ConfigError, load_config
from .equivalence import (build_dtmc, check_inequalities, compare_finite_q)
from .experiments import default_workers, run_experiment, run_sweep, write_experiment
from .mobility import MobilityConfig, generate_trace, save_trace

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_ORACLE = 0, 1, 2, 3

LADDER = (2, 4, 16, 256, 65536)

log = logging.getLogger("rlncdtn")


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on usage errors; usage errors are config errors here."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _int_list(raw: str) -> list[int]:
    try:
        return [int(x, 0) for x in raw.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected integers, got {raw!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="rlncdtn", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen-trace", help="generate a Poisson contact trace")
    g.add_argument("--n", type=int, required=True, help="number of nodes N")
    g.add_argument("--lambda", dest="lam", type=float, required=True,
                   help="pairwise contact rate")
    g.add_argument("--horizon", type=float, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", type=Path, default=None,
                   help="output path (default trace_N<n>_seed<seed>.txt)")

    r = sub.add_parser("run", help="run the protocols listed in a config file")
    r.add_argument("config", type=Path)
    r.add_argument("--out", type=Path, default=None, help="override output directory")
    r.add_argument("--workers", type=int, default=None)

    s = sub.add_parser("sweep", help="vary one parameter, one summary row per cell")
    s.add_argument("config", type=Path)
    s.add_argument("--param", required=True,
                   help="q, B, nu, B_minus_nu, init_density or n_batches")
    s.add_argument("--values", required=True, help="comma-separated values")
    s.add_argument("--out", type=Path, default=None)
    s.add_argument("--workers", type=int, default=None)

    o = sub.add_parser("oracle", help="Gamma/Delta equivalence and innovation checks")
    o.add_argument("--nmax", type=int, default=4, help="largest N enumerated")
    o.add_argument("--numax", type=int, default=2, help="largest nu enumerated")
    o.add_argument("--q", type=_int_list, default=[2, 256],
                   help="field sizes for the innovation bounds")
    o.add_argument("--trials", type=int, default=10_000)
    o.add_argument("--ladder-n", type=int, default=30, help="N for the finite-q ladder")
    o.add_argument("--ladder-nu", type=int, default=6)
    o.add_argument("--traces", type=int, default=30, help="paired traces per ladder rung")
    return p


def cmd_gen_trace(args) -> int:
    try:
        cfg = MobilityConfig(args.n, args.lam, args.horizon, args.seed)
    except ValueError as exc:
        raise ConfigError("gen-trace", str(exc)) from None
    out = args.out or Path(f"trace_N{args.n}_seed{args.seed}.txt")
    trace = generate_trace(cfg)
    save_trace(trace, out, comments=[
        f"gen-trace --n {args.n} --lambda {args.lam!r} --horizon {args.horizon!r} "
        f"--seed {args.seed}"])
    print(f"wrote {len(trace)} contacts to {out}")
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    workers = default_workers() if args.workers is None else args.workers
    result = run_experiment(cfg, workers)
    paths = write_experiment(result, args.out)
    for row in result.aggregate.sorted_rows():
        print(f"{row['protocol']:>16}  throughput {row['throughput_mean']:.5f}  "
              f"delay {row['delay_mean']:.2f}  delivery {row['delivery_ratio_mean']:.4f}")
    print(f"wrote {len(paths)} files to {paths[0].parent}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    workers = default_workers() if args.workers is None else args.workers
    table = run_sweep(cfg, args.param, args.values.split(","), workers)
    out = Path(args.out or cfg.output.directory)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"sweep_{args.param}.csv"
    table.write(path, cfg.to_ini() + f"sweep param = {args.param}\nsweep values = {args.values}")
    for row in table.rows:
        cells = "  ".join(f"{k}={v:.5g}" if isinstance(v, float) else f"{k}={v}"
                          for k, v in row.items() if not k.endswith("_std"))
        print(cells)
    print(f"wrote {path}")
    return EXIT_OK


def _line(ok: bool, text: str) -> bool:
    print(f"[{'PASS' if ok else 'FAIL'}] {text}")
    return ok


def cmd_oracle(args) -> int:
    if args.nmax < 2 or args.numax < 1 or args.trials < 1 or args.traces < 2:
        raise ConfigError("oracle", "need --nmax >= 2, --numax >= 1, --trials >= 1, --traces >= 2")
    ok = True
    for n in range(2, args.nmax + 1):
        for nu in range(1, args.numax + 1):
            d = build_dtmc(n, nu, discipline="delta-ideal")
            g = build_dtmc(n, nu, discipline="gamma-ideal")
            diff = d.max_difference(g)
            err = max(d.max_stochastic_error(), g.max_stochastic_error())
            ok &= _line(diff <= 1e-12 and err <= 1e-12,
                        f"DTMC N={n} nu={nu}: {len(d.rows)} states, max |P_delta - P_gamma| "
                        f"= {diff:.1e}, row-sum error {err:.1e}")
    for q in args.q:
        rep = check_inequalities(q, args.trials)
        ok &= _line(rep.passed,
                    f"innovation q={q}: escape {rep.freq_escape:.4f}, gain {rep.freq_gain:.4f} "
                    f">= {rep.bound:.4f} - 3*{rep.sigma:.4f}; delta gain {rep.delta_freq_gain:.3f}"
                    f" (delta escape {rep.delta_freq_escape:.3f}, reported only)")
    seeds = range(args.traces)
    prev = None
    for q in LADDER:
        c = compare_finite_q(args.ladder_n, args.ladder_nu, q, seeds)
        se = math.sqrt(c.gamma_cond_rate * (1 - c.gamma_cond_rate) / max(c.gamma_cond_n, 1))
        rung_ok = c.delta_cond_rate == 1.0 and c.gamma_cond_rate <= 1.0
        if prev is not None:
            rung_ok &= c.innovation_gap <= prev[0] + 3 * math.hypot(se, prev[1])
        ok &= _line(rung_ok,
                    f"ladder q={q}: innovation gap {c.innovation_gap:.5f} "
                    f"(gamma {c.gamma_cond_rate:.5f}, delta {c.delta_cond_rate:.1f}); "
                    f"completion gap {100 * c.signed_gap:+.2f}% +- {100 * c.gap_se:.2f}% "
                    f"(reported only)")
        prev = (c.innovation_gap, se)
    print("oracle: all checks passed" if ok else "oracle: FAILED")
    return EXIT_OK if ok else EXIT_ORACLE


COMMANDS = {"gen-trace": cmd_gen_trace, "run": cmd_run, "sweep": cmd_sweep,
            "oracle": cmd_oracle}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - report and map to the runtime exit code
        log.debug("runtime failure", exc_info=True)
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
