"""Monte Carlo experiment driver, information-unit accounting and result emission."""

from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import List, Optional, Sequence

import jsonschema
import numpy as np

from .baselines import matched_filter, run_icbf_variant, zero_forcing
from .errors import ConfigError
from .model import NetworkConfig, RunTrace
from .rates import sum_rate
from .sbf import run_sbf
from .simenv import FadingParams, generate_topology, sample_channels, seed_sequence
from .ssca import run_ssca

__all__ = [
    "ExperimentSpec",
    "ResultRow",
    "TrialRecord",
    "SCHEMA",
    "ALGORITHMS",
    "load_spec",
    "parse_spec",
    "trial_instance",
    "run_algorithm",
    "run_trials",
    "aggregate",
    "run_experiment",
    "count_info_units",
    "format_results",
    "emit_results",
]

ALGORITHMS = ("ssca", "sbf", "icbf", "zf", "mf")
CSV_FIELDS = ("algorithm", "snr_db", "mean_sum_rate", "rate_stderr", "mean_iterations",
              "mean_info_units", "trials")
DEFAULT_TRIALS = 50

_positive = {"type": "number", "exclusiveMinimum": 0}
SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["schema_version", "algorithms", "snr_grid_db", "network"],
    "additionalProperties": False,
    "properties": {
        "schema_version": {"const": 1},
        "scenario": {"type": "string"},
        "algorithms": {"type": "array", "minItems": 1, "uniqueItems": True,
                       "items": {"enum": list(ALGORITHMS)}},
        "snr_grid_db": {"type": "array", "minItems": 1, "items": {"type": "number"}},
        "trials": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer", "minimum": 0},
        "output": {"type": "string"},
        "format": {"enum": ["csv", "json"]},
        "network": {
            "type": "object",
            "required": ["num_coordinated_bs", "users_per_cell", "antennas_per_bs"],
            "additionalProperties": False,
            "properties": {
                "num_coordinated_bs": {"type": "integer", "minimum": 1},
                "users_per_cell": {"type": "integer", "minimum": 1},
                "antennas_per_bs": {"type": "integer", "minimum": 1},
                "power_budget": _positive,
                "stop_tol": _positive,
                "max_outer_iters": {"type": "integer", "minimum": 1},
                "bisection_tol": _positive,
                "psd_tol": {"type": "number", "minimum": 0},
                "icbf_inner_iters": {"type": "integer", "minimum": 1},
                "sbf_inner_sweeps": {"type": "integer", "minimum": 0},
            },
        },
        "fading": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "pathloss_ref_distance": _positive,
                "pathloss_exponent": {"type": "number", "exclusiveMinimum": 2},
                "shadowing_std_db": {"type": "number", "minimum": 0},
            },
        },
        "placement": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "inter_site_distance": _positive,
                "d_min": _positive,
                "d_max": _positive,
            },
        },
    },
}


@dataclass(frozen=True)
class ExperimentSpec:
    network: NetworkConfig
    algorithms: tuple
    snr_grid_db: tuple
    trials: int = DEFAULT_TRIALS
    seed: int = 0
    scenario: str = "default"
    fading: FadingParams = field(default_factory=FadingParams)
    inter_site_distance: float = 2000.0
    annulus: tuple = (200.0, 1000.0)
    output: Optional[str] = None
    format: str = "csv"

    def __post_init__(self):
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if not self.snr_grid_db:
            raise ConfigError("snr_grid_db must be nonempty")
        unknown = set(self.algorithms) - set(ALGORITHMS)
        if unknown:
            raise ConfigError(f"unknown algorithms: {sorted(unknown)}")
        if "ssca" in self.algorithms and self.network.users_per_cell != 1:
            raise ConfigError("network.users_per_cell: ssca requires exactly one user per cell")
        if "zf" in self.algorithms and self.network.users_per_cell > self.network.antennas_per_bs:
            raise ConfigError("network.users_per_cell: zf requires users_per_cell <= antennas_per_bs")
        if not 0 < self.annulus[0] <= self.annulus[1]:
            raise ConfigError("placement: d_min must not exceed d_max")


@dataclass(frozen=True)
class TrialRecord:
    algorithm: str
    snr_db: float
    trial: int
    sum_rate: float
    iterations: int
    info_units: int


@dataclass(frozen=True)
class ResultRow:
    algorithm: str
    snr_db: float
    mean_sum_rate: float
    rate_stderr: float
    mean_iterations: float
    mean_info_units: float
    trials: int


def _field_path(err: jsonschema.ValidationError) -> str:
    return ".".join(str(p) for p in err.absolute_path) or "<root>"


def parse_spec(doc: dict) -> ExperimentSpec:
    """Validate a decoded config document and build an :class:`ExperimentSpec`."""
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        raise ConfigError("; ".join(f"{_field_path(e)}: {e.message}" for e in errors))
    net = dict(doc["network"])
    try:
        network = NetworkConfig(**net)
        fading = FadingParams(**doc.get("fading", {}))
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"network: {exc}") from exc
    placement = doc.get("placement", {})
    return ExperimentSpec(
        network=network,
        algorithms=tuple(doc["algorithms"]),
        snr_grid_db=tuple(float(x) for x in doc["snr_grid_db"]),
        trials=int(doc.get("trials", DEFAULT_TRIALS)),
        seed=int(doc.get("seed", 0)),
        scenario=doc.get("scenario", "default"),
        fading=fading,
        inter_site_distance=float(placement.get("inter_site_distance", 2000.0)),
        annulus=(float(placement.get("d_min", 200.0)), float(placement.get("d_max", 1000.0))),
        output=doc.get("output"),
        format=doc.get("format", "csv"),
    )


def load_spec(path) -> ExperimentSpec:
    """Read and validate a JSON config file; errors carry line or field locations."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be an object")
    try:
        return parse_spec(doc)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def trial_instance(spec: ExperimentSpec, trial: int, snr_db: float):
    """Topology and channels of one trial; fading draws are shared across SNR points."""
    net = spec.network
    topo = generate_topology(net.num_coordinated_bs, net.users_per_cell,
                             seed_sequence(spec.seed, trial, 0),
                             spec.inter_site_distance, spec.annulus)
    fading = replace(spec.fading, snr_db=snr_db, power_budget=float(net.power_budget[0]))
    channels = sample_channels(topo, fading, net.antennas_per_bs, seed_sequence(spec.seed, trial, 1))
    return topo, channels


def run_algorithm(name: str, channels, config: NetworkConfig, init_seed) -> tuple:
    """Run one scheme; returns ``(final sum rate, trace or None)``."""
    if name == "ssca":
        trace = run_ssca(channels, config, seed=init_seed)
    elif name == "sbf":
        trace = run_sbf(channels, config, seed=init_seed)
    elif name == "icbf":
        trace = run_icbf_variant(channels, config, seed=init_seed)
    elif name == "zf":
        return sum_rate(channels, zero_forcing(channels, config), config.user_weights), None
    elif name == "mf":
        return sum_rate(channels, matched_filter(channels, config), config.user_weights), None
    else:
        raise ConfigError(f"unknown algorithm {name!r}")
    return trace.final_sum_rate, trace


def count_info_units(trace: RunTrace) -> int:
    """Backhaul cost: one unit per sequential iteration, M per simultaneous one."""
    return trace.info_units


def _run_cell(args) -> List[TrialRecord]:
    spec, snr_db, trial = args
    _, channels = trial_instance(spec, trial, snr_db)
    out = []
    for name in spec.algorithms:
        rate, trace = run_algorithm(name, channels, spec.network, seed_sequence(spec.seed, trial, 2))
        out.append(TrialRecord(algorithm=name, snr_db=snr_db, trial=trial, sum_rate=rate,
                               iterations=trace.iterations if trace else 0,
                               info_units=count_info_units(trace) if trace else 0))
    return out


def run_trials(spec: ExperimentSpec, parallel: int = 1) -> List[TrialRecord]:
    """Every (SNR, trial) work item, results in a canonical order."""
    work = [(spec, snr, t) for snr in spec.snr_grid_db for t in range(spec.trials)]
    if parallel > 1:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            chunks = list(pool.map(_run_cell, work))
    else:
        chunks = [_run_cell(w) for w in work]
    records = [r for chunk in chunks for r in chunk]
    order = {name: k for k, name in enumerate(spec.algorithms)}
    records.sort(key=lambda r: (order[r.algorithm], r.snr_db, r.trial))
    return records


def aggregate(records: Sequence[TrialRecord], algorithms: Sequence[str] = ALGORITHMS) -> List[ResultRow]:
    """Mean and standard error per (algorithm, SNR)."""
    groups = {}
    for r in records:
        groups.setdefault((r.algorithm, r.snr_db), []).append(r)
    order = {name: k for k, name in enumerate(algorithms)}
    rows = []
    for (name, snr), grp in sorted(groups.items(), key=lambda kv: (order.get(kv[0][0], 99), kv[0])):
        rates = np.array([g.sum_rate for g in grp])
        n = len(grp)
        stderr = float(np.std(rates, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
        rows.append(ResultRow(algorithm=name, snr_db=snr, mean_sum_rate=float(np.mean(rates)),
                              rate_stderr=stderr,
                              mean_iterations=float(np.mean([g.iterations for g in grp])),
                              mean_info_units=float(np.mean([g.info_units for g in grp])),
                              trials=n))
    return rows


def run_experiment(spec: ExperimentSpec, parallel: int = 1) -> List[ResultRow]:
    """Run every algorithm on every (SNR, trial) instance and aggregate."""
    return aggregate(run_trials(spec, parallel), spec.algorithms)


def _fmt(x) -> str:
    return format(float(x), ".6g")


def format_results(rows: Sequence[ResultRow], fmt: str = "csv") -> str:
    if not rows:
        raise ValueError("no result rows to emit")
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_FIELDS)
        for r in rows:
            writer.writerow([r.algorithm, _fmt(r.snr_db), _fmt(r.mean_sum_rate), _fmt(r.rate_stderr),
                             _fmt(r.mean_iterations), _fmt(r.mean_info_units), r.trials])
        return buf.getvalue()
    if fmt == "json":
        objs = []
        for r in rows:
            d = asdict(r)
            for k in CSV_FIELDS[1:-1]:
                d[k] = float(_fmt(d[k]))
            objs.append({k: d[k] for k in CSV_FIELDS})
        return json.dumps(objs, indent=2) + "\n"
    raise ValueError(f"unknown format {fmt!r}")


def emit_results(rows: Sequence[ResultRow], fmt: str, path) -> Path:
    """Write rows as CSV or JSON (UTF-8, LF line endings)."""
    text = format_results(rows, fmt)
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    return path


def resolve_seed(cli_seed: Optional[int], spec_seed: int) -> int:
    """``--seed`` wins, then ``COBEAM_SEED``, then the config value."""
    if cli_seed is not None:
        return int(cli_seed)
    env = os.environ.get("COBEAM_SEED")
    if env:
        try:
            return int(env)
        except ValueError as exc:
            raise ConfigError(f"COBEAM_SEED must be an integer, got {env!r}") from exc
    return spec_seed
