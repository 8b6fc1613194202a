"""Divergence machinery for worst-case expectations over context distributions.

Three generator choices are supported: chi-square ``(u-1)^2``, total variation
``|u-1|``, and KL ``u log u``.  Each admits a closed-form (or one-dimensional)
expression for the smallest expectation of a finite payoff vector over the
ball of distributions within radius ``eps`` of a reference; an exhaustive
simplex-grid oracle provides an independent check of those expressions.
"""

from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .errors import ConfigurationError, DomainError


class DivergenceKind(enum.Enum):
    CHI2 = "chi2"
    TV = "tv"
    KL = "kl"

    @classmethod
    def parse(cls, name: str) -> "DivergenceKind":
        try:
            return cls(name.lower())
        except ValueError:
            valid = ", ".join(k.value for k in cls)
            raise ConfigurationError(f"unknown divergence {name!r}, expected one of: {valid}") from None


# Sentinel for the infinite branch of the total-variation conjugate.
INFEASIBLE = math.inf

DEFAULT_LAMBDA_GRID = tuple(np.geomspace(1e-3, 1e3, 64))


def phi(kind: DivergenceKind, u: float) -> float:
    """Divergence generator; convex with ``phi(1) = 0``."""
    if u < 0:
        raise DomainError("generator argument must be a nonnegative density ratio")
    if kind is DivergenceKind.CHI2:
        return (u - 1.0) ** 2
    if kind is DivergenceKind.TV:
        return abs(u - 1.0)
    # u log u, continuously extended to 0 at u = 0
    return u * math.log(u) if u > 0 else 0.0


def phi_conjugate(kind: DivergenceKind, u: float, lam: float) -> float:
    """Scaled convex conjugate ``(lam * phi)^*(u)``.

    chi2: ``u^2 / (4 lam) + u`` (lam > 0)
    tv:   ``u`` on ``|u| <= lam``, ``-lam`` below the band, infinity sentinel
          above it (lam >= 0; density ratios are nonnegative, which caps the
          conjugate below and makes the dual bounded above in ``b``)
    kl:   ``lam * exp(u / lam - 1)`` (lam > 0)
    """
    if kind is DivergenceKind.TV:
        if lam < 0:
            raise DomainError("lam must be nonnegative for the TV conjugate")
        if u > lam:
            return INFEASIBLE
        return max(u, -lam)
    if lam <= 0:
        raise DomainError(f"lam must be positive for the {kind.value} conjugate")
    if kind is DivergenceKind.CHI2:
        return u * u / (4.0 * lam) + u
    exponent = u / lam - 1.0
    if exponent > 700.0:
        return INFEASIBLE
    return lam * math.exp(exponent)


@dataclass(frozen=True)
class DualPoint:
    """Feasible point of the dual problem: multiplier ``lam >= 0`` and shift ``b``."""

    lam: float
    b: float

    def __post_init__(self):
        if self.lam < 0:
            raise DomainError("dual multiplier must be nonnegative")


def _check_weights(weights: np.ndarray) -> np.ndarray:
    w = np.asarray(weights, dtype=float).ravel()
    if w.size == 0 or np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
        raise ConfigurationError("weights must be a probability vector (nonnegative, summing to 1)")
    return w


def _check_values(f_values: np.ndarray) -> np.ndarray:
    f = np.asarray(f_values, dtype=float).ravel()
    if not np.all(np.isfinite(f)):
        raise DomainError("payoff values must be finite")
    return f


def dual_objective(
    kind: DivergenceKind,
    f_values: np.ndarray,
    weights: np.ndarray,
    eps: float,
    dp: DualPoint,
) -> float:
    """Dual lower bound ``b - lam*eps - E_w[(lam*phi)^*(b - f)]``.

    Never exceeds the ball's true infimum (weak duality).  TV points with
    ``|b - f_j| > lam`` on a positive-weight atom evaluate to ``-inf``.
    """
    f = _check_values(f_values)
    w = _check_weights(weights)
    if eps < 0:
        raise DomainError("eps must be nonnegative")
    expectation = 0.0
    for wj, fj in zip(w, f):
        if wj == 0.0:
            continue
        conj = phi_conjugate(kind, dp.b - fj, dp.lam)
        if math.isinf(conj):
            return -math.inf
        expectation += wj * conj
    return dp.b - dp.lam * eps - expectation


def robust_value_chi2(f_values: np.ndarray, weights: np.ndarray, eps: float) -> float:
    """Weighted mean minus ``sqrt(eps * population variance)``."""
    f = _check_values(f_values)
    w = _check_weights(weights)
    if eps < 0:
        raise DomainError("eps must be nonnegative")
    mean = float(w @ f)
    var = float(w @ (f - mean) ** 2)
    return mean - math.sqrt(eps * var)


def robust_value_tv(f_values: np.ndarray, weights: np.ndarray, eps: float) -> float:
    """Weighted mean minus ``eps/2`` times the payoff spread over the support."""
    f = _check_values(f_values)
    w = _check_weights(weights)
    if eps < 0:
        raise DomainError("eps must be nonnegative")
    return float(w @ f) - 0.5 * eps * (float(f.max()) - float(f.min()))


def robust_value_kl(
    f_values: np.ndarray,
    weights: np.ndarray,
    eps: float,
    lambda_grid: np.ndarray | None = None,
) -> float:
    """Best value of ``-lam*eps - lam*log E_w[exp(-f/lam)]`` over the lam grid."""
    f = _check_values(f_values)
    w = _check_weights(weights)
    if eps < 0:
        raise DomainError("eps must be nonnegative")
    grid = np.asarray(DEFAULT_LAMBDA_GRID if lambda_grid is None else lambda_grid, dtype=float).ravel()
    if grid.size == 0 or np.any(grid <= 0):
        raise ConfigurationError("lambda grid must be nonempty and strictly positive")
    best = -math.inf
    for lam in grid:
        val = -lam * eps - lam * float(logsumexp(-f / lam, b=w))
        if val > best:
            best = val
    return best


def robust_value(
    kind: DivergenceKind,
    f_values: np.ndarray,
    weights: np.ndarray,
    eps: float,
    lambda_grid: np.ndarray | None = None,
) -> float:
    """Closed-form worst-case expectation for the given divergence ball."""
    if kind is DivergenceKind.CHI2:
        return robust_value_chi2(f_values, weights, eps)
    if kind is DivergenceKind.TV:
        return robust_value_tv(f_values, weights, eps)
    return robust_value_kl(f_values, weights, eps, lambda_grid)


def robust_values_rows(
    kind: DivergenceKind,
    payoff_rows: np.ndarray,
    weights: np.ndarray,
    eps: float,
    lambda_grid: np.ndarray | None = None,
) -> np.ndarray:
    """Row-wise ``robust_value`` for a matrix of payoff vectors (vectorized)."""
    rows = np.atleast_2d(np.asarray(payoff_rows, dtype=float))
    w = _check_weights(weights)
    if eps < 0:
        raise DomainError("eps must be nonnegative")
    if kind is DivergenceKind.CHI2:
        mean = rows @ w
        var = ((rows - mean[:, None]) ** 2) @ w
        return mean - np.sqrt(eps * var)
    if kind is DivergenceKind.TV:
        return rows @ w - 0.5 * eps * (rows.max(axis=1) - rows.min(axis=1))
    grid = np.asarray(DEFAULT_LAMBDA_GRID if lambda_grid is None else lambda_grid, dtype=float).ravel()
    if grid.size == 0 or np.any(grid <= 0):
        raise ConfigurationError("lambda grid must be nonempty and strictly positive")
    best = np.full(rows.shape[0], -np.inf)
    for lam in grid:
        np.maximum(best, -lam * eps - lam * logsumexp(-rows / lam, b=w, axis=1), out=best)
    return best


def divergence_between(kind: DivergenceKind, q: np.ndarray, p: np.ndarray) -> float:
    """Divergence of ``q`` from the reference ``p``: ``sum_j p_j phi(q_j / p_j)``."""
    return float(_divergence_rows(kind, np.asarray(q, dtype=float)[None, :], _check_weights(p))[0])


def _divergence_rows(kind: DivergenceKind, q_rows: np.ndarray, p: np.ndarray) -> np.ndarray:
    """Vectorized divergence of each row of ``q_rows`` from reference ``p``.

    Atoms with ``p_j = 0`` follow the usual limits: infinite for chi2/KL when a
    row puts mass there; TV charges that mass linearly.
    """
    pos = p > 0
    qp = q_rows[:, pos]
    pp = p[pos]
    escaped = q_rows[:, ~pos].sum(axis=1)
    if kind is DivergenceKind.TV:
        return np.abs(qp - pp).sum(axis=1) + escaped
    if kind is DivergenceKind.CHI2:
        base = ((qp - pp) ** 2 / pp).sum(axis=1)
    else:
        ratio = qp / pp
        terms = np.zeros_like(qp)
        mask = qp > 0
        terms[mask] = qp[mask] * np.log(ratio[mask])
        base = terms.sum(axis=1)
    return np.where(escaped > 0, np.inf, base)


@functools.lru_cache(maxsize=32)
def _simplex_grid(n_steps: int, n_atoms: int) -> np.ndarray:
    """All length-``n_atoms`` integer compositions of ``n_steps`` as rows.

    Cached (read-only) since the oracle reuses one grid across many payoffs.
    """
    if n_atoms == 1:
        out = np.array([[n_steps]], dtype=np.int64)
    else:
        blocks = []
        for k in range(n_steps + 1):
            rest = _simplex_grid(n_steps - k, n_atoms - 1)
            blocks.append(np.hstack([np.full((rest.shape[0], 1), k, dtype=np.int64), rest]))
        out = np.vstack(blocks)
    out.setflags(write=False)
    return out


def worst_case_oracle(
    kind: DivergenceKind,
    f_values: np.ndarray,
    weights: np.ndarray,
    eps: float,
    step: float = 0.005,
) -> tuple[float, np.ndarray]:
    """Brute-force minimum of ``E_q[f]`` over the grid of distributions within
    radius ``eps`` of the reference.

    Enumerates the probability simplex at resolution ``step`` (the reference
    itself is always included, so the feasible set is never empty) and returns
    the minimizing value and distribution.  Every candidate is exactly
    feasible, so the result upper-bounds nothing: it is always at least the
    true infimum.
    """
    f = _check_values(f_values)
    w = _check_weights(weights)
    if f.shape != w.shape:
        raise ConfigurationError("payoffs and weights must have matching lengths")
    if f.size > 4:
        raise ConfigurationError("oracle enumeration supports at most 4 atoms")
    if not (0.0 < step <= 0.1):
        raise DomainError("step must lie in (0, 0.1]")
    if eps < 0:
        raise DomainError("eps must be nonnegative")
    n_steps = int(round(1.0 / step))
    grid = _simplex_grid(n_steps, f.size).astype(float) * (1.0 / n_steps)
    candidates = np.vstack([grid, w[None, :]])
    div = _divergence_rows(kind, candidates, w)
    feasible = div <= eps + 1e-12
    values = candidates @ f
    values[~feasible] = np.inf
    idx = int(np.argmin(values))
    assert feasible[idx], "reference distribution must be feasible"
    return float(values[idx]), candidates[idx].copy()


def gamma_map(kind: DivergenceKind, d: float) -> float:
    """Monotone map bounding total variation by the chosen divergence radius."""
    if d < 0:
        raise DomainError("radius must be nonnegative")
    if kind is DivergenceKind.TV:
        return d
    if kind is DivergenceKind.CHI2:
        return 2.0 * math.sqrt(d / (1.0 + d))
    return -math.expm1(-d)


def gamma_inverse(kind: DivergenceKind, y: float) -> float:
    """Inverse of ``gamma_map`` on its range."""
    if y < 0:
        raise DomainError("value must be nonnegative")
    if kind is DivergenceKind.TV:
        return y
    if kind is DivergenceKind.CHI2:
        if y >= 2.0:
            raise DomainError("chi2 map has range [0, 2)")
        s = y * y / 4.0
        return s / (1.0 - s)
    if y >= 1.0:
        raise DomainError("KL map has range [0, 1)")
    return -math.log1p(-y)


@dataclass(frozen=True)
class RadiusSchedule:
    """Robustness radius per iteration: a constant, or the shrinking adaptive
    sequence ``gamma_inverse(1 / (sqrt(t) + sqrt(t+1)))``."""

    kind: str  # 'fixed' | 'adaptive'
    eps: float = 0.0
    divergence: DivergenceKind | None = None

    def __post_init__(self):
        if self.kind not in ("fixed", "adaptive"):
            raise ConfigurationError(f"unknown schedule kind {self.kind!r}")
        if self.kind == "fixed" and self.eps < 0:
            raise ConfigurationError("fixed radius must be nonnegative")
        if self.kind == "adaptive" and self.divergence is None:
            raise ConfigurationError("adaptive schedule needs a divergence")

    @classmethod
    def fixed(cls, eps: float) -> "RadiusSchedule":
        return cls("fixed", eps=eps)

    @classmethod
    def adaptive(cls, divergence: DivergenceKind) -> "RadiusSchedule":
        return cls("adaptive", divergence=divergence)


def epsilon_at(schedule: RadiusSchedule, t: int) -> float:
    """Radius used at iteration ``t`` (1-based)."""
    if t < 1:
        raise DomainError("iteration index must be at least 1")
    if schedule.kind == "fixed":
        return schedule.eps
    return gamma_inverse(schedule.divergence, 1.0 / (math.sqrt(t) + math.sqrt(t + 1.0)))


@dataclass(frozen=True)
class ContextSet:
    """Finite context support with a reference probability vector."""

    supports: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        supports = np.asarray(self.supports, dtype=float).ravel()
        weights = _check_weights(self.weights)
        if supports.shape != weights.shape:
            raise ConfigurationError("supports and weights must have matching lengths")
        object.__setattr__(self, "supports", supports)
        object.__setattr__(self, "weights", weights)

    def __len__(self) -> int:
        return self.supports.shape[0]

    @classmethod
    def uniform(cls, supports: np.ndarray) -> "ContextSet":
        supports = np.asarray(supports, dtype=float).ravel()
        return cls(supports, np.full(supports.shape[0], 1.0 / supports.shape[0]))

    @classmethod
    def sample_uniform(cls, interval: tuple[float, float], count: int, rng: np.random.Generator) -> "ContextSet":
        lo, hi = interval
        return cls.uniform(rng.uniform(lo, hi, size=count))

    @classmethod
    def grid(cls, interval: tuple[float, float], count: int) -> "ContextSet":
        lo, hi = interval
        return cls.uniform(np.linspace(lo, hi, count))
