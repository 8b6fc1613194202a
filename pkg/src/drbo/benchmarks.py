"""Synthetic objectives f(x, c) with box domains.

Standard minimization benchmarks are exposed with their last dimension acting
as the context variable; the ``negate`` flag flips them for maximization.
Raw closed forms are vectorized over trailing input rows so grid sweeps stay
cheap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ConfigurationError, DomainError


@dataclass(frozen=True)
class BenchmarkFunction:
    name: str
    input_box: tuple[tuple[float, float], ...]
    context_interval: tuple[float, float]
    negate: bool
    noise_sigma: float
    raw: Callable[[np.ndarray], np.ndarray]

    @property
    def dim_x(self) -> int:
        return len(self.input_box)

    @property
    def dim(self) -> int:
        return self.dim_x + 1

    def evaluate_many(self, joint: np.ndarray) -> np.ndarray:
        """Noise-free values on rows of ``[x, c]``; no domain check."""
        values = self.raw(np.asarray(joint, dtype=float))
        return -values if self.negate else values


def evaluate(fn: BenchmarkFunction, x: np.ndarray, c: float) -> float:
    """Exact benchmark value at an in-domain point (sign-flipped when negated)."""
    x = np.asarray(x, dtype=float).ravel()
    if x.shape[0] != fn.dim_x:
        raise DomainError(f"{fn.name} expects {fn.dim_x} input dimensions, got {x.shape[0]}")
    for xi, (lo, hi) in zip(x, fn.input_box):
        if not lo <= xi <= hi:
            raise DomainError(f"{fn.name}: input {xi} outside [{lo}, {hi}]")
    lo, hi = fn.context_interval
    if not lo <= c <= hi:
        raise DomainError(f"{fn.name}: context {c} outside [{lo}, {hi}]")
    return float(fn.evaluate_many(np.append(x, c)[None, :])[0])


def observe(fn: BenchmarkFunction, x: np.ndarray, c: float, rng: np.random.Generator) -> float:
    """Noisy observation: exact value plus seeded Gaussian noise."""
    value = evaluate(fn, x, c)
    if fn.noise_sigma > 0:
        value += rng.normal(0.0, fn.noise_sigma)
    return value


def _branin(u: np.ndarray) -> np.ndarray:
    x1, x2 = u[..., 0], u[..., 1]
    a = x2 - 5.1 * x1**2 / (4 * math.pi**2) + 5 * x1 / math.pi - 6
    return a**2 + 10 * (1 - 1 / (8 * math.pi)) * np.cos(x1) + 10


def _goldstein_price(u: np.ndarray) -> np.ndarray:
    x1, x2 = u[..., 0], u[..., 1]
    a = 1 + (x1 + x2 + 1) ** 2 * (19 - 14 * x1 + 3 * x1**2 - 14 * x2 + 6 * x1 * x2 + 3 * x2**2)
    b = 30 + (2 * x1 - 3 * x2) ** 2 * (18 - 32 * x1 + 12 * x1**2 + 48 * x2 - 36 * x1 * x2 + 27 * x2**2)
    return a * b


def _six_hump_camel(u: np.ndarray) -> np.ndarray:
    x1, x2 = u[..., 0], u[..., 1]
    return (4 - 2.1 * x1**2 + x1**4 / 3) * x1**2 + x1 * x2 + (-4 + 4 * x2**2) * x2**2


_HARTMANN3_A = np.array(
    [[3.0, 10.0, 30.0], [0.1, 10.0, 35.0], [3.0, 10.0, 30.0], [0.1, 10.0, 35.0]]
)
_HARTMANN3_P = 1e-4 * np.array(
    [[3689, 1170, 2673], [4699, 4387, 7470], [1091, 8732, 5547], [381, 5743, 8828]]
)
_HARTMANN3_C = np.array([1.0, 1.2, 3.0, 3.2])


def _hartmann3(u: np.ndarray) -> np.ndarray:
    diffs = u[..., None, :] - _HARTMANN3_P
    exponents = np.sum(_HARTMANN3_A * diffs**2, axis=-1)
    return -np.sum(_HARTMANN3_C * np.exp(-exponents), axis=-1)


def _gap(u: np.ndarray) -> np.ndarray:
    # Two bumps with opposite context behavior: the left one pays a moderate,
    # context-stable reward while the right one pays more on average but
    # collapses as c -> 1.  Average-case and worst-case maximizers differ.
    x, c = u[..., 0], u[..., 1]
    left = np.exp(-((x - 0.2) ** 2) / 0.02)
    right = np.exp(-((x - 0.8) ** 2) / 0.02)
    return left * (0.5 + 0.5 * c) + 2.0 * right * (1.0 - c)


def _builders() -> dict:
    return {
        "branin": lambda noise: BenchmarkFunction(
            "branin", ((-5.0, 10.0),), (0.0, 15.0), True, noise, _branin
        ),
        "goldstein_price": lambda noise: BenchmarkFunction(
            "goldstein_price", ((-2.0, 2.0),), (-2.0, 2.0), True, noise, _goldstein_price
        ),
        "six_hump_camel": lambda noise: BenchmarkFunction(
            "six_hump_camel", ((-3.0, 3.0),), (-2.0, 2.0), True, noise, _six_hump_camel
        ),
        "hartmann3": lambda noise: BenchmarkFunction(
            "hartmann3", ((0.0, 1.0), (0.0, 1.0)), (0.0, 1.0), True, noise, _hartmann3
        ),
        "gap": lambda noise: BenchmarkFunction(
            "gap", ((0.0, 1.0),), (0.0, 1.0), False, noise, _gap
        ),
    }


_REGISTRY = _builders()


def benchmark_names() -> list[str]:
    return sorted(_REGISTRY)


def get_benchmark(name: str, noise_sigma: float = 0.0) -> BenchmarkFunction:
    if noise_sigma < 0:
        raise ConfigurationError("noise_sigma must be nonnegative")
    try:
        builder = _REGISTRY[name]
    except KeyError:
        raise ConfigurationError(
            f"unknown benchmark {name!r}, expected one of: {', '.join(benchmark_names())}"
        ) from None
    return builder(noise_sigma)
