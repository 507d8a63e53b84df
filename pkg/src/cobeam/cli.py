"""Command line entry point: ``cobeam run|validate|trace|fixtures``."""

from __future__ import annotations

import argparse
import io
import csv
import json
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import harness
from .errors import CobeamError, ConfigError
from .simenv import load_snapshot, seed_sequence, snapshot

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_USAGE = 2
EXIT_MISMATCH = 3

_RATE_RTOL = 1e-9


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        _fail("UsageError", message, EXIT_USAGE)


def _fail(kind: str, message: str, code: int):
    sys.stderr.write(json.dumps({"error": kind, "message": message}) + "\n")
    raise SystemExit(code)


def _spec_from_args(args) -> harness.ExperimentSpec:
    spec = harness.load_spec(args.config)
    seed = harness.resolve_seed(getattr(args, "seed", None), spec.seed)
    changes = {"seed": seed}
    if getattr(args, "trials", None) is not None:
        if args.trials < 1:
            raise ConfigError("--trials must be >= 1")
        changes["trials"] = args.trials
    return replace(spec, **changes)


def _write(text: str, out: Optional[str]):
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def cmd_run(args) -> int:
    spec = _spec_from_args(args)
    if args.parallel < 1:
        raise ConfigError("--parallel must be >= 1")
    fmt = args.format or spec.format
    rows = harness.run_experiment(spec, parallel=args.parallel)
    _write(harness.format_results(rows, fmt), args.out or spec.output)
    return EXIT_OK


def cmd_validate(args) -> int:
    spec = harness.load_spec(args.config)
    net = spec.network
    summary = {"status": "ok", "scenario": spec.scenario, "algorithms": list(spec.algorithms),
               "snr_points": len(spec.snr_grid_db), "trials": spec.trials,
               "shape": [net.num_coordinated_bs, net.users_per_cell, net.antennas_per_bs]}
    sys.stdout.write(json.dumps(summary) + "\n")
    return EXIT_OK


def _pick_snr(spec, snr: Optional[float]) -> float:
    if snr is None:
        return spec.snr_grid_db[0]
    return float(snr)


def cmd_trace(args) -> int:
    spec = _spec_from_args(args)
    algorithm = args.algorithm or spec.algorithms[0]
    if algorithm not in ("ssca", "sbf", "icbf"):
        raise ConfigError(f"--algorithm: {algorithm!r} is not iterative")
    snr = _pick_snr(spec, args.snr)
    _, channels = harness.trial_instance(spec, args.trial, snr)
    _, trace = harness.run_algorithm(algorithm, channels, spec.network,
                                     seed_sequence(spec.seed, args.trial, 2))
    fields = ("iteration", "bs", "sum_rate", "bound", "info_units", "accepted")
    records = [{k: getattr(r, k) for k in fields} for r in trace.records]
    if (args.format or "csv") == "json":
        doc = {"algorithm": algorithm, "snr_db": snr, "trial": args.trial,
               "initial_sum_rate": trace.initial_sum_rate, "converged": trace.converged,
               "kkt_residual": trace.kkt_residual, "records": records}
        text = json.dumps(doc, indent=2) + "\n"
    else:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(fields)
        for r in records:
            writer.writerow([r["iteration"], r["bs"], format(r["sum_rate"], ".6g"),
                             "" if r["bound"] is None else format(r["bound"], ".6g"),
                             r["info_units"], int(r["accepted"])])
        text = buf.getvalue()
    _write(text, args.out)
    return EXIT_OK


def _fixture_doc(spec, trial: int, snr: float) -> dict:
    topo, channels = harness.trial_instance(spec, trial, snr)
    rates = {}
    for name in spec.algorithms:
        rate, _ = harness.run_algorithm(name, channels, spec.network,
                                        seed_sequence(spec.seed, trial, 2))
        rates[name] = rate
    return {"seed": spec.seed, "trial": trial, "snr_db": snr,
            "snapshot": json.loads(snapshot(topo, channels)), "final_sum_rates": rates}


def cmd_fixtures(args) -> int:
    spec = _spec_from_args(args)
    snr = _pick_snr(spec, args.snr)
    if args.verify is None:
        doc = _fixture_doc(spec, args.trial, snr)
        _write(json.dumps(doc, indent=1, sort_keys=True) + "\n", args.out)
        return EXIT_OK

    try:
        stored = json.loads(Path(args.verify).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"{args.verify}: cannot read fixture: {exc}") from exc
    spec = replace(spec, seed=int(stored["seed"]))
    fresh = _fixture_doc(spec, int(stored["trial"]), float(stored["snr_db"]))
    problems = []
    _, ch_old = load_snapshot(json.dumps(stored["snapshot"]))
    _, ch_new = load_snapshot(json.dumps(fresh["snapshot"]))
    if ch_old.h.shape != ch_new.h.shape or not np.array_equal(ch_old.h, ch_new.h):
        problems.append("channels differ")
    if not np.array_equal(ch_old.noise_power, ch_new.noise_power):
        problems.append("noise powers differ")
    for name, old in stored["final_sum_rates"].items():
        new = fresh["final_sum_rates"].get(name)
        if new is None or abs(new - old) > _RATE_RTOL * max(1.0, abs(old)):
            problems.append(f"{name}: stored {old!r}, recomputed {new!r}")
    if problems:
        _fail("FixtureMismatch", "; ".join(problems), EXIT_MISMATCH)
    sys.stdout.write(json.dumps({"status": "ok", "fixture": str(args.verify)}) + "\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cobeam", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, seed=True):
        p.add_argument("--config", required=True, help="experiment JSON file")
        if seed:
            p.add_argument("--seed", type=int, default=None,
                           help="master seed (falls back to COBEAM_SEED, then the config)")

    p = sub.add_parser("run", help="run an experiment and emit aggregated results")
    common(p)
    p.add_argument("--out", help="output file (default: config 'output' or stdout)")
    p.add_argument("--format", choices=("csv", "json"))
    p.add_argument("--trials", type=int, help="override the number of trials")
    p.add_argument("--parallel", type=int, default=1, help="worker processes")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("validate", help="check a config against the schema")
    common(p, seed=False)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("trace", help="per-iteration dump of one trial")
    common(p)
    p.add_argument("--algorithm", choices=("ssca", "sbf", "icbf"))
    p.add_argument("--trial", type=int, default=0)
    p.add_argument("--snr", type=float, help="SNR in dB (default: first grid point)")
    p.add_argument("--out")
    p.add_argument("--format", choices=("csv", "json"))
    p.set_defaults(func=cmd_trace)

    p = sub.add_parser("fixtures", help="emit or verify a regression snapshot")
    common(p)
    p.add_argument("--trial", type=int, default=0)
    p.add_argument("--snr", type=float)
    p.add_argument("--out")
    p.add_argument("--verify", metavar="PATH", help="compare against a stored fixture")
    p.set_defaults(func=cmd_fixtures)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        _fail("ConfigError", str(exc), EXIT_USAGE)
    except CobeamError as exc:
        _fail(type(exc).__name__, str(exc), EXIT_ERROR)
    except OSError as exc:
        _fail("IoError", f"{exc.filename or ''}: {exc.strerror}".strip(": "), EXIT_ERROR)


if __name__ == "__main__":
    sys.exit(main())
