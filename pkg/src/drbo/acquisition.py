"""Acquisition functions over the GP surrogate and their box-constrained maximizer.

The robust acquisitions score a candidate ``x`` from the surrogate's mean and
standard deviation across a finite context sample: an optimistic
context-average minus a divergence-specific penalty on the spread of the mean.
Baselines (context-averaged UCB, worst-context UCB, random) share the same
interface.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .divergences import ContextSet, DivergenceKind, robust_values_rows
from .errors import ConfigurationError, DomainError, NumericalError
from .gp import GpPosterior

ACQUISITION_TAGS = ("dro_chi2", "dro_tv", "dro_kl", "ucb", "stable_opt", "random")


@dataclass(frozen=True)
class ExplorationSchedule:
    """Exploration weight per iteration.

    ``constant`` uses ``value`` directly as sqrt(beta); ``log_growth`` uses
    ``value * sqrt(2 log(t^2 pi^2 / 6))``.
    """

    kind: str = "constant"
    value: float = 2.0

    def __post_init__(self):
        if self.kind not in ("constant", "log_growth"):
            raise ConfigurationError(f"unknown exploration schedule {self.kind!r}")
        if self.value < 0:
            raise ConfigurationError("exploration value must be nonnegative")

    def sqrt_beta_at(self, t: int) -> float:
        if t < 1:
            raise DomainError("iteration index must be at least 1")
        if self.kind == "constant":
            return self.value
        return self.value * math.sqrt(2.0 * math.log(t * t * math.pi**2 / 6.0))


@dataclass(frozen=True)
class AcquisitionKind:
    """Tagged acquisition choice; ``kl_lambda`` fixes the KL multiplier (None = grid)."""

    tag: str
    kl_lambda: float | None = None

    def __post_init__(self):
        if self.tag not in ACQUISITION_TAGS:
            raise ConfigurationError(
                f"unknown acquisition {self.tag!r}, expected one of: {', '.join(ACQUISITION_TAGS)}"
            )
        if self.kl_lambda is not None and self.kl_lambda <= 0:
            raise ConfigurationError("fixed KL lambda must be positive")


@dataclass(frozen=True)
class AcquisitionContext:
    """Everything an acquisition needs at one iteration."""

    posterior: GpPosterior
    contexts: ContextSet
    eps_t: float
    sqrt_beta_t: float

    def __post_init__(self):
        if len(self.contexts) == 0:
            raise ConfigurationError("context set must be nonempty")
        if self.eps_t < 0 or self.sqrt_beta_t < 0:
            raise ConfigurationError("eps_t and sqrt_beta_t must be nonnegative")


def _surface(ctx: AcquisitionContext, candidates: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Mean and UCB matrices of shape (n_candidates, n_contexts)."""
    cand = np.atleast_2d(np.asarray(candidates, dtype=float))
    n, m = cand.shape[0], len(ctx.contexts)
    joint = np.hstack([np.repeat(cand, m, axis=0), np.tile(ctx.contexts.supports, n)[:, None]])
    mu, var = ctx.posterior.predict_batch(joint)
    if not (np.all(np.isfinite(mu)) and np.all(np.isfinite(var))):
        raise NumericalError("surrogate produced non-finite predictions")
    mu = mu.reshape(n, m)
    ucb = mu + ctx.sqrt_beta_t * np.sqrt(var).reshape(n, m)
    return mu, ucb


def acq_values(kind: AcquisitionKind, ctx: AcquisitionContext, candidates: np.ndarray) -> np.ndarray:
    """Acquisition scores for each candidate row."""
    cand = np.atleast_2d(np.asarray(candidates, dtype=float))
    if kind.tag == "random":
        return np.zeros(cand.shape[0])
    mu, ucb = _surface(ctx, cand)
    w = ctx.contexts.weights
    if kind.tag == "ucb":
        return ucb @ w
    if kind.tag == "stable_opt":
        return ucb.min(axis=1)
    if kind.tag == "dro_tv":
        return ucb @ w - 0.5 * ctx.eps_t * (mu.max(axis=1) - mu.min(axis=1))
    if kind.tag == "dro_chi2":
        mean_mu = mu @ w
        var_mu = ((mu - mean_mu[:, None]) ** 2) @ w
        return ucb @ w - np.sqrt(ctx.eps_t * var_mu)
    grid = None if kind.kl_lambda is None else np.array([kind.kl_lambda])
    return robust_values_rows(DivergenceKind.KL, ucb, w, ctx.eps_t, grid)


def acq_value(kind: AcquisitionKind, ctx: AcquisitionContext, x: np.ndarray) -> float:
    """Acquisition score at a single input."""
    return float(acq_values(kind, ctx, np.asarray(x, dtype=float)[None, :])[0])


def maximize_acq(
    kind: AcquisitionKind,
    ctx: AcquisitionContext,
    box: tuple[tuple[float, float], ...],
    budget: int,
    rng: np.random.Generator | int,
    refine_passes: int = 3,
) -> np.ndarray:
    """Pick the best of ``budget`` uniform candidates, then coordinate-refine.

    Refinement runs a fixed number of passes over the coordinates, probing one
    step either way (starting at 10% of each box width, halved per pass) and
    keeping strict improvements.  Ties among candidates go to the lowest
    index; the whole procedure is deterministic given the generator state.
    """
    if not box:
        raise ConfigurationError("input box is empty")
    if budget < 1:
        raise ConfigurationError("candidate budget must be at least 1")
    if isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(int(rng))
    lows = np.array([b[0] for b in box], dtype=float)
    highs = np.array([b[1] for b in box], dtype=float)
    if np.any(highs <= lows):
        raise ConfigurationError("input box has empty extent")
    if kind.tag == "random":
        return rng.uniform(lows, highs)
    candidates = rng.uniform(lows, highs, size=(budget, lows.shape[0]))
    values = acq_values(kind, ctx, candidates)
    best_idx = int(np.argmax(values))
    best_x = candidates[best_idx].copy()
    best_val = float(values[best_idx])
    step = 0.1 * (highs - lows)
    for _ in range(refine_passes):
        for i in range(lows.shape[0]):
            for sign in (1.0, -1.0):
                probe = best_x.copy()
                probe[i] = min(max(best_x[i] + sign * step[i], lows[i]), highs[i])
                val = float(acq_values(kind, ctx, probe[None, :])[0])
                if val > best_val:
                    best_val = val
                    best_x = probe
        step *= 0.5
    return best_x
