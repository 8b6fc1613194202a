"""Command-line front end: run experiment suites, self-verify, list the registry.

Configs are flat ``key = value`` text files; every config field is also
overridable with a ``--field-name`` flag.  Results land in one CSV per suite
plus a manifest carrying the resolved config and its content hash.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .acquisition import ACQUISITION_TAGS
from .benchmarks import benchmark_names, get_benchmark
from .divergences import DivergenceKind
from .engine import ExperimentConfig, RegretRecord, _resolve_n_init, run_suite
from .errors import ConfigurationError, NumericalError
from .verify import PROFILES, format_table, verify_suite

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_PARTIAL = 4

SCHEMA_VERSION = 1

_FIELD_TYPES = {
    f.name: type(getattr(ExperimentConfig(), f.name)) for f in dataclasses.fields(ExperimentConfig)
}


def _parse_scalar(key: str, raw: str):
    if key not in _FIELD_TYPES and key != "repeats":
        known = ", ".join(sorted([*_FIELD_TYPES, "repeats"]))
        raise ConfigurationError(f"unknown config key {key!r}; known keys: {known}")
    raw = raw.strip()
    if key == "repeats":
        return int(raw)
    if key == "kl_lambda" and raw.lower() == "grid":
        return 0.0
    target = _FIELD_TYPES[key]
    if target is bool:
        if raw.lower() in ("true", "1", "yes"):
            return True
        if raw.lower() in ("false", "0", "no"):
            return False
        raise ConfigurationError(f"config key {key!r} expects a boolean, got {raw!r}")
    try:
        return target(raw)
    except ValueError:
        raise ConfigurationError(f"config key {key!r} expects {target.__name__}, got {raw!r}") from None


def parse_config_file(path: str) -> dict:
    """Flat ``key = value`` file with ``#`` comments; unknown keys are errors."""
    values = {}
    bad = []
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config file {path}: {exc}") from exc
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigurationError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key, raw = (part.strip() for part in stripped.split("=", 1))
        try:
            values[key] = _parse_scalar(key, raw)
        except ConfigurationError as exc:
            bad.append(f"{path}:{lineno}: {exc}")
    if bad:
        raise ConfigurationError("config parse failed:\n" + "\n".join(bad))
    return values


def resolve_config(file_values: dict, overrides: dict) -> tuple[ExperimentConfig, int]:
    """Merge defaults, file values, and CLI overrides into a resolved config."""
    merged = dict(file_values)
    merged.update({k: v for k, v in overrides.items() if v is not None})
    repeats = int(merged.pop("repeats", 1))
    if repeats < 1:
        raise ConfigurationError("repeats must be at least 1")
    config = ExperimentConfig(**merged)
    config.validate()
    fn = get_benchmark(config.benchmark)
    config = dataclasses.replace(config, n_init=_resolve_n_init(config, fn))
    return config, repeats


def config_to_dict(config: ExperimentConfig) -> dict:
    return {f.name: getattr(config, f.name) for f in dataclasses.fields(ExperimentConfig)}


def manifest_hash(config: ExperimentConfig, repeats: int) -> str:
    payload = json.dumps({"config": config_to_dict(config), "repeats": repeats}, sort_keys=True)
    return hashlib.sha256(payload.encode()).hexdigest()


def write_manifest(path: Path, config: ExperimentConfig, repeats: int, records: list[RegretRecord]) -> dict:
    errors = [{"run_id": r.run_id, "message": r.error} for r in records if r.error]
    timing = {}
    finished = [r for r in records if not r.error and len(r)]
    if finished:
        timing = {
            "mean_wall_ms": float(np.mean([r.wall_ms.mean() for r in finished])),
            "mean_acq_ms": float(np.mean([r.acq_ms.mean() for r in finished])),
        }
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "config": config_to_dict(config),
        "repeats": repeats,
        "config_hash": manifest_hash(config, repeats),
        "label": config.acquisition,
        "errors": errors,
        "timing": timing,
    }
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest


def _fmt(value: float) -> str:
    return f"{value:.9g}"


def write_results_csv(path: Path, records: list[RegretRecord], record_timing: bool = False) -> None:
    """One row per iteration per run; floats carry 9 significant digits.

    ``wall_ms`` is zeroed unless timing was explicitly requested, so reruns of
    the same seeds produce byte-identical files.
    """
    if not records:
        raise ConfigurationError("no records to serialize")
    dim_x = get_benchmark(records[0].config.benchmark).dim_x
    x_cols = [f"x{i}" for i in range(dim_x)]
    header = ["run_id", "seed", "iter", *x_cols, "c", "y", "eps_t", "r_t", "R_t", "wall_ms"]
    lines = [",".join(header)]
    for rec in records:
        if rec.error:
            continue
        for i in range(len(rec)):
            wall = rec.wall_ms[i] if record_timing else 0.0
            row = [
                rec.run_id,
                str(rec.seed),
                str(i + 1),
                *(_fmt(v) for v in np.atleast_1d(rec.xs[i])),
                _fmt(rec.cs[i]),
                _fmt(rec.ys[i]),
                _fmt(rec.eps[i]),
                _fmt(rec.regret[i]),
                _fmt(rec.cum_regret[i]),
                _fmt(wall),
            ]
            lines.append(",".join(row))
    path.write_text("\n".join(lines) + "\n")


def cmd_run(args) -> int:
    file_values = parse_config_file(args.config) if args.config else {}
    overrides = {name: getattr(args, name) for name in _FIELD_TYPES}
    overrides["repeats"] = args.repeats
    config, repeats = resolve_config(file_values, overrides)
    if args.dry_run:
        for key, value in sorted(config_to_dict(config).items()):
            print(f"{key} = {value}")
        print(f"repeats = {repeats}")
        return EXIT_OK
    out_dir = Path(args.out or os.environ.get("DRBO_OUT") or "drbo_out")
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / "results.csv"
    manifest_path = out_dir / "manifest.json"
    if (csv_path.exists() or manifest_path.exists()) and not args.force:
        print(f"error: output already exists in {out_dir} (use --force to overwrite)", file=sys.stderr)
        return EXIT_CONFIG
    prefix = manifest_hash(config, repeats)[:8]
    records = run_suite([config], repeats=repeats, parallelism=args.jobs, base_seed=config.seed, run_prefix=prefix)
    write_manifest(manifest_path, config, repeats, records)
    failed = [r for r in records if r.error]
    if len(failed) < len(records):
        write_results_csv(csv_path, records, record_timing=args.record_timing)
    for rec in failed:
        print(f"error: run {rec.run_id} failed: {rec.error}", file=sys.stderr)
    if len(failed) == len(records):
        return EXIT_NUMERICAL
    if failed:
        return EXIT_PARTIAL
    print(f"wrote {csv_path} and {manifest_path}")
    return EXIT_OK


def cmd_verify(args) -> int:
    kinds = None if args.divergence is None else [DivergenceKind.parse(args.divergence)]
    results = verify_suite(args.profile, divergences=kinds)
    if args.json:
        print(json.dumps([dataclasses.asdict(r) for r in results], indent=2))
    else:
        print(format_table(results))
    return EXIT_OK if all(r.passed for r in results) else 1


def cmd_list(args) -> int:
    registry = {
        "benchmarks": benchmark_names(),
        "acquisitions": list(ACQUISITION_TAGS),
        "divergences": [k.value for k in DivergenceKind],
        "schedules": ["fixed", "adaptive"],
        "exploration": ["constant", "log_growth"],
    }
    if args.json:
        print(json.dumps(registry, indent=2))
    else:
        for section, names in registry.items():
            print(f"{section}:")
            for name in names:
                print(f"  {name}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="drbo", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute an experiment suite")
    run.add_argument("--config", help="flat key = value config file")
    run.add_argument("--out", help="output directory (default $DRBO_OUT or ./drbo_out)")
    run.add_argument("--jobs", type=int, default=1, help="parallel workers")
    run.add_argument("--repeats", type=int, default=None, help="independent repeats")
    run.add_argument("--force", action="store_true", help="overwrite existing outputs")
    run.add_argument("--dry-run", action="store_true", help="print resolved config and exit")
    run.add_argument("--record-timing", action="store_true", help="write measured wall_ms into the CSV")
    for name, target in _FIELD_TYPES.items():
        flag = "--" + name.replace("_", "-")
        if target is bool:
            run.add_argument(flag, dest=name, default=None, choices=["true", "false"],
                             type=lambda s: s == "true")
        elif name == "kl_lambda":
            run.add_argument(flag, dest=name, default=None,
                             type=lambda s: 0.0 if s.lower() == "grid" else float(s))
        else:
            run.add_argument(flag, dest=name, default=None, type=target)
    run.set_defaults(func=cmd_run)

    verify = sub.add_parser("verify", help="closed-form vs oracle self-checks")
    verify.add_argument("--profile", default="default", choices=sorted(PROFILES))
    verify.add_argument("--divergence", default=None, choices=[k.value for k in DivergenceKind])
    verify.add_argument("--json", action="store_true")
    verify.set_defaults(func=cmd_verify)

    listing = sub.add_parser("list", help="print registered components")
    listing.add_argument("--json", action="store_true")
    listing.set_defaults(func=cmd_list)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
