"""Criterion 10: consume real experiment CSVs and verify the rendered
aggregates against an independent reduction.

Drives the optimizer only through its command line (the external interface);
skipped when the ``drbo`` executable is not on PATH.
"""

import csv
import shutil
import subprocess
from collections import defaultdict

import numpy as np
import pytest

from plotkit import aggregate_curves, load_results, render_regret

pytestmark = pytest.mark.skipif(shutil.which("drbo") is None, reason="drbo CLI not installed")


def run_cli(out_dir, **overrides):
    args = ["drbo", "run", "--out", str(out_dir), "--jobs", "2"]
    base = {
        "benchmark": "gap", "divergence": "tv", "schedule": "fixed", "eps": "1.0",
        "iterations": "12", "noise-sigma": "0.05", "seed": "7", "repeats": "3",
        "x-grid": "101", "c-grid": "51", "budget": "50",
    }
    base.update(overrides)
    for key, value in base.items():
        args.extend([f"--{key}", value])
    subprocess.run(args, check=True, capture_output=True, text=True)
    return out_dir / "results.csv"


def independent_mean_curve(csv_path):
    """Reduction written against the raw file, not the plotkit loader."""
    per_run = defaultdict(list)
    with open(csv_path, newline="") as handle:
        for row in csv.DictReader(handle):
            per_run[row["run_id"]].append((int(row["iter"]), float(row["R_t"])))
    curves = [np.array([v for _, v in sorted(rows)]) for rows in per_run.values()]
    return np.mean(np.stack(curves), axis=0)


def test_criterion_10_plot_matches_independent_reduction(tmp_path):
    paths = [
        run_cli(tmp_path / "dro_tv", acquisition="dro_tv"),
        run_cli(tmp_path / "ucb", acquisition="ucb"),
        run_cli(tmp_path / "random", acquisition="random"),
        run_cli(tmp_path / "adaptive", acquisition="dro_tv", schedule="adaptive"),
    ]
    bundles = load_results(paths)
    assert len(bundles) == 4  # one curve per method configuration

    reductions = {path: independent_mean_curve(path) for path in paths}
    matched = 0
    for bundle in bundles:
        center, _, _ = aggregate_curves(bundle.cum_regret, "mean")
        for path, reduction in reductions.items():
            if center.shape == reduction.shape and np.allclose(center, reduction, atol=1e-9):
                matched += 1
                reductions.pop(path)
                break
    assert matched == 4, "every plotted aggregate must equal an independent CSV reduction"

    out = tmp_path / "regret.png"
    fig = render_regret(bundles, out, "mean")
    assert out.exists() and out.stat().st_size > 0
    assert len(fig.axes[0].get_lines()) == 4
    assert len(fig.axes) == 2, "adaptive run present, so the radius subplot must render"
    varying = [line for line in fig.axes[1].get_lines() if np.ptp(line.get_ydata()) > 0]
    assert len(varying) == 1
    print("[criterion 10] PASS aggregates match independent reduction to 1e-9; "
          "4 curves, radius subplot for the adaptive run")
