"""Rendering of cumulative-regret figures from curve bundles."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .bundles import CurveBundle, UsageError, aggregate_curves

BAND_LABEL = {"mean": "mean with standard-error band", "median": "median with interquartile band"}


def render_regret(bundles: list[CurveBundle], out_image: str | Path, aggregate: str = "mean"):
    """Write one curve (plus uncertainty band) per bundle; adds a radius
    subplot when any bundle's eps_t changes over iterations.

    Returns the figure so callers can inspect what was drawn; the saved file
    depends only on the inputs.
    """
    if not bundles:
        raise UsageError("no bundles to render")
    show_eps = any(b.eps_varies() for b in bundles)
    if show_eps:
        fig, (ax, ax_eps) = plt.subplots(
            2, 1, figsize=(7.0, 6.5), sharex=True, height_ratios=[3, 1], constrained_layout=True
        )
    else:
        fig, ax = plt.subplots(figsize=(7.0, 4.5), constrained_layout=True)
        ax_eps = None
    for bundle in bundles:
        iters = range(1, bundle.iterations + 1)
        center, low, high = aggregate_curves(bundle.cum_regret, aggregate)
        line, = ax.plot(iters, center, label=bundle.label)
        ax.fill_between(iters, low, high, alpha=0.2, color=line.get_color())
        if ax_eps is not None and bundle.eps_varies():
            eps_center, _, _ = aggregate_curves(bundle.eps, aggregate)
            ax_eps.plot(iters, eps_center, color=line.get_color(), label=bundle.label)
    ax.set_ylabel("cumulative robust regret")
    ax.set_title(f"Cumulative robust regret ({BAND_LABEL[aggregate]})")
    ax.legend()
    if ax_eps is not None:
        ax_eps.set_ylabel("radius")
        ax_eps.set_xlabel("iteration")
    else:
        ax.set_xlabel("iteration")
    fig.savefig(out_image, dpi=120, metadata={"Software": "plotkit"})
    plt.close(fig)
    return fig
