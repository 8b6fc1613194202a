"""Regret-curve plotting for drbo results CSVs."""

from .bundles import AGGREGATES, CurveBundle, PlotkitError, SchemaError, UsageError, aggregate_curves, load_results
from .render import render_regret

__version__ = "0.1.0"
