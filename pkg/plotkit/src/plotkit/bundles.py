"""Loading and aggregating cumulative-regret curves from results CSVs.

Each results.csv sits next to the manifest.json describing its suite; rows
are grouped into one curve matrix per (config hash, method label).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

REQUIRED_COLUMNS = ("run_id", "seed", "iter", "c", "y", "eps_t", "r_t", "R_t", "wall_ms")
AGGREGATES = ("mean", "median")


class PlotkitError(Exception):
    pass


class SchemaError(PlotkitError):
    pass


class UsageError(PlotkitError):
    pass


@dataclass
class CurveBundle:
    """Cumulative regret (and radius) trajectories for one method."""

    label: str
    config_hash: str
    cum_regret: np.ndarray  # (repeats, iterations)
    eps: np.ndarray         # (repeats, iterations)

    @property
    def repeats(self) -> int:
        return self.cum_regret.shape[0]

    @property
    def iterations(self) -> int:
        return self.cum_regret.shape[1]

    def eps_varies(self) -> bool:
        return bool(np.ptp(self.eps) > 0)


def aggregate_curves(matrix: np.ndarray, kind: str) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Center curve plus lower/upper band: mean with stderr, or median with IQR."""
    if kind not in AGGREGATES:
        raise UsageError(f"unknown aggregate {kind!r}, expected one of {AGGREGATES}")
    if kind == "mean":
        center = matrix.mean(axis=0)
        stderr = (
            matrix.std(axis=0, ddof=1) / np.sqrt(matrix.shape[0])
            if matrix.shape[0] > 1
            else np.zeros(matrix.shape[1])
        )
        return center, center - stderr, center + stderr
    center = np.median(matrix, axis=0)
    return center, np.percentile(matrix, 25, axis=0), np.percentile(matrix, 75, axis=0)


def _read_manifest(csv_path: Path) -> tuple[str, str]:
    manifest_path = csv_path.parent / "manifest.json"
    if not manifest_path.exists():
        raise SchemaError(f"no manifest.json next to {csv_path}")
    manifest = json.loads(manifest_path.read_text())
    return str(manifest["config_hash"]), str(manifest.get("label", csv_path.stem))


def _parse_csv(csv_path: Path) -> dict[str, list[tuple[int, float, float]]]:
    """Rows keyed by run id as (iter, eps_t, R_t) triples."""
    lines = csv_path.read_text().splitlines()
    if not lines:
        raise SchemaError(f"{csv_path} is empty")
    header = lines[0].split(",")
    for column in REQUIRED_COLUMNS:
        if column not in header:
            raise SchemaError(f"{csv_path} is missing column {column!r}")
    idx = {name: header.index(name) for name in REQUIRED_COLUMNS}
    runs: dict[str, list[tuple[int, float, float]]] = {}
    for lineno, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != len(header):
            raise SchemaError(f"{csv_path}:{lineno}: expected {len(header)} fields, got {len(parts)}")
        try:
            triple = (int(parts[idx["iter"]]), float(parts[idx["eps_t"]]), float(parts[idx["R_t"]]))
        except ValueError as exc:
            raise SchemaError(f"{csv_path}:{lineno}: {exc}") from None
        runs.setdefault(parts[idx["run_id"]], []).append(triple)
    return runs


def load_results(csv_paths: list[str | Path]) -> list[CurveBundle]:
    """One bundle per (config hash, method) across the given CSV files."""
    if not csv_paths:
        raise UsageError("no input CSVs given")
    grouped: dict[tuple[str, str], dict[str, list[tuple[int, float, float]]]] = {}
    for raw_path in csv_paths:
        csv_path = Path(raw_path)
        key = _read_manifest(csv_path)
        target = grouped.setdefault(key, {})
        for run_id, rows in _parse_csv(csv_path).items():
            target.setdefault(run_id, []).extend(rows)
    bundles = []
    for (config_hash, label), runs in sorted(grouped.items()):
        lengths = {len(rows) for rows in runs.values()}
        if len(lengths) != 1:
            raise SchemaError(f"bundle {label!r}: repeats disagree on iteration count {sorted(lengths)}")
        cum, eps = [], []
        for run_id in sorted(runs):
            ordered = sorted(runs[run_id])
            cum.append([r for _, _, r in ordered])
            eps.append([e for _, e, _ in ordered])
        bundles.append(CurveBundle(label, config_hash, np.array(cum), np.array(eps)))
    return bundles
