"""Self-checks pitting the closed-form robust values against the brute-force
simplex oracle, plus dual-bound and radius-schedule identities.

Used by the ``verify`` CLI command and by the test suite.  The closed forms
can be overridden through ``closed_form_overrides`` so sensitivity of the
checks themselves is testable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .divergences import (
    DivergenceKind,
    DualPoint,
    RadiusSchedule,
    dual_objective,
    epsilon_at,
    gamma_inverse,
    gamma_map,
    robust_value_chi2,
    robust_value_kl,
    robust_value_tv,
    worst_case_oracle,
)
from .errors import ConfigurationError

PROFILES = {
    "default": {
        "oracle_step": 0.005,
        "closed_form_tol": {"chi2": 1e-2, "tv": 1e-2, "kl": 2e-2},
        "weak_duality_tol": 1e-3,
        "roundtrip_tol": 1e-12,
        "telescoping_tol": 1e-9,
        "n_payoffs": 20,
    },
    "acceptance": {
        "oracle_step": 0.005,
        "closed_form_tol": {"chi2": 1e-2, "tv": 1e-2, "kl": 2e-2},
        "weak_duality_tol": 1e-3,
        "roundtrip_tol": 1e-12,
        "telescoping_tol": 1e-9,
        "n_payoffs": 50,
    },
}

EPS_LEVELS = (0.01, 0.05, 0.1)

_CLOSED_FORMS: dict[DivergenceKind, Callable] = {
    DivergenceKind.CHI2: robust_value_chi2,
    DivergenceKind.TV: robust_value_tv,
    DivergenceKind.KL: robust_value_kl,
}


@dataclass(frozen=True)
class CheckResult:
    name: str
    max_err: float
    tolerance: float
    passed: bool

    def __post_init__(self):
        # plain scalars only, so the row serializes to JSON as-is
        object.__setattr__(self, "max_err", float(self.max_err))
        object.__setattr__(self, "tolerance", float(self.tolerance))
        object.__setattr__(self, "passed", bool(self.passed))


def _payoffs(count: int, atoms: int = 3, seed: int = 20240) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.uniform(-1.0, 1.0, size=(count, atoms))


def _dual_grid_best(kind: DivergenceKind, f: np.ndarray, w: np.ndarray, eps: float) -> float:
    lams = np.geomspace(1e-3, 1e3, 40)
    bs = np.linspace(f.min() - 1.0, f.max() + 1.0, 40)
    best = -math.inf
    for lam in lams:
        for b in bs:
            val = dual_objective(kind, f, w, eps, DualPoint(lam, b))
            if val > best:
                best = val
    return best


def verify_suite(
    profile: str = "default",
    divergences: list[DivergenceKind] | None = None,
    closed_form_overrides: dict[DivergenceKind, Callable] | None = None,
) -> list[CheckResult]:
    """Run every check; returns one result row per (check, divergence)."""
    if profile not in PROFILES:
        raise ConfigurationError(f"unknown tolerance profile {profile!r}, expected one of: {', '.join(PROFILES)}")
    cfg = PROFILES[profile]
    kinds = list(DivergenceKind) if divergences is None else list(divergences)
    forms = dict(_CLOSED_FORMS)
    if closed_form_overrides:
        forms.update(closed_form_overrides)

    payoffs = _payoffs(cfg["n_payoffs"])
    weights = np.full(payoffs.shape[1], 1.0 / payoffs.shape[1])
    results = []
    for kind in kinds:
        closed = forms[kind]
        tol = cfg["closed_form_tol"][kind.value]
        max_gap = 0.0
        max_dual_excess = -math.inf
        for f in payoffs:
            for eps in EPS_LEVELS:
                oracle_val, _ = worst_case_oracle(kind, f, weights, eps, cfg["oracle_step"])
                max_gap = max(max_gap, abs(closed(f, weights, eps) - oracle_val))
        results.append(CheckResult(f"closed_form_vs_oracle[{kind.value}]", max_gap, tol, max_gap <= tol))

        for f in payoffs[:5]:
            for eps in EPS_LEVELS:
                oracle_val, _ = worst_case_oracle(kind, f, weights, eps, cfg["oracle_step"])
                max_dual_excess = max(max_dual_excess, _dual_grid_best(kind, f, weights, eps) - oracle_val)
        results.append(
            CheckResult(
                f"weak_duality[{kind.value}]",
                max(max_dual_excess, 0.0),
                cfg["weak_duality_tol"],
                max_dual_excess <= cfg["weak_duality_tol"],
            )
        )

        upper = {"tv": 5.0, "chi2": 1.999, "kl": 0.999}[kind.value]
        ys = np.linspace(0.0, upper, 101)
        roundtrip = max(abs(gamma_map(kind, gamma_inverse(kind, y)) - y) for y in ys)
        results.append(
            CheckResult(
                f"gamma_roundtrip[{kind.value}]", roundtrip, cfg["roundtrip_tol"], roundtrip <= cfg["roundtrip_tol"]
            )
        )

        schedule = RadiusSchedule.adaptive(kind)
        total = sum(gamma_map(kind, epsilon_at(schedule, t)) for t in range(1, 101))
        gap = abs(total - (math.sqrt(101.0) - 1.0))
        results.append(
            CheckResult(
                f"schedule_telescoping[{kind.value}]", gap, cfg["telescoping_tol"], gap <= cfg["telescoping_tol"]
            )
        )
    return results


def format_table(results: list[CheckResult]) -> str:
    width = max(len(r.name) for r in results)
    lines = [f"{'check'.ljust(width)}  {'max_err':>12}  {'tol':>9}  status"]
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        lines.append(f"{r.name.ljust(width)}  {r.max_err:>12.3e}  {r.tolerance:>9.0e}  {status}")
    return "\n".join(lines)
