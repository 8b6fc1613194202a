"""Kernels and Gaussian-process regression on the joint input-context space.

The surrogate treats the optimization variables and the scalar context as one
concatenated vector ``[x, c]``.  Fitting factorizes the regularized Gram
matrix once (Cholesky); predictions reuse the factor and the precomputed
weight vector.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, cholesky, solve_triangular

from .errors import ConfigurationError, NumericalError

KERNEL_KINDS = ("se", "matern52")

# Relative diagonal jitter: start value and escalation ceiling (x10 steps).
JITTER_START = 1e-8
JITTER_CEILING = 1e-4


@dataclass(frozen=True)
class KernelSpec:
    """Stationary kernel with one lengthscale per joint dimension.

    ``kind`` is ``"se"`` (squared exponential) or ``"matern52"``.  The kernel
    value at zero distance equals ``signal_variance`` for both kinds.
    """

    kind: str
    lengthscales: tuple[float, ...]
    signal_variance: float
    noise_variance: float

    def __post_init__(self):
        if self.kind not in KERNEL_KINDS:
            raise ConfigurationError(f"unknown kernel kind {self.kind!r}, expected one of {KERNEL_KINDS}")
        if len(self.lengthscales) == 0 or any(l <= 0 for l in self.lengthscales):
            raise ConfigurationError("lengthscales must be positive")
        if self.signal_variance <= 0:
            raise ConfigurationError("signal_variance must be positive")
        if self.noise_variance < 0:
            raise ConfigurationError("noise_variance must be nonnegative")

    @property
    def dim(self) -> int:
        return len(self.lengthscales)


@dataclass(frozen=True)
class Dataset:
    """Ordered training rows: joint inputs ``[x, c]`` and observations ``y``."""

    inputs: np.ndarray   # (t, d)
    targets: np.ndarray  # (t,)

    def __post_init__(self):
        inputs = np.atleast_2d(np.asarray(self.inputs, dtype=float))
        targets = np.asarray(self.targets, dtype=float).ravel()
        if inputs.shape[0] != targets.shape[0]:
            raise ConfigurationError("inputs and targets disagree on row count")
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "targets", targets)

    def __len__(self) -> int:
        return self.inputs.shape[0]

    @property
    def dim(self) -> int:
        return self.inputs.shape[1]

    def append(self, z: np.ndarray, y: float) -> "Dataset":
        z = np.asarray(z, dtype=float).ravel()
        if len(self) and z.shape[0] != self.dim:
            raise ConfigurationError(f"new row has dimension {z.shape[0]}, dataset has {self.dim}")
        return Dataset(np.vstack([self.inputs, z[None, :]]), np.append(self.targets, float(y)))


def _scaled_sqdist(spec: KernelSpec, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise squared distance after dividing each dimension by its lengthscale."""
    ls = np.asarray(spec.lengthscales, dtype=float)
    a = np.atleast_2d(a) / ls
    b = np.atleast_2d(b) / ls
    sq = np.sum(a * a, axis=1)[:, None] + np.sum(b * b, axis=1)[None, :] - 2.0 * (a @ b.T)
    return np.maximum(sq, 0.0)


def kernel_matrix(spec: KernelSpec, a: np.ndarray, b: np.ndarray | None = None) -> np.ndarray:
    """Cross-covariance matrix ``k(a_i, b_j)``; Gram matrix when ``b`` is omitted."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = a if b is None else np.atleast_2d(np.asarray(b, dtype=float))
    if a.shape[1] != spec.dim or b.shape[1] != spec.dim:
        raise ConfigurationError(
            f"input dimension {a.shape[1]}x{b.shape[1]} does not match kernel dimension {spec.dim}"
        )
    sq = _scaled_sqdist(spec, a, b)
    if spec.kind == "se":
        return spec.signal_variance * np.exp(-0.5 * sq)
    r = np.sqrt(sq)
    s = math.sqrt(5.0) * r
    return spec.signal_variance * (1.0 + s + (5.0 / 3.0) * sq) * np.exp(-s)


def kernel_eval(spec: KernelSpec, a: np.ndarray, b: np.ndarray) -> float:
    """Kernel value between two joint points."""
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.shape != b.shape:
        raise ConfigurationError("points have different dimensions")
    return float(kernel_matrix(spec, a[None, :], b[None, :])[0, 0])


@dataclass(frozen=True)
class GpPosterior:
    """Fitted GP: training data, kernel, Cholesky factor, weight vector.

    Immutable after ``gp_fit``; safe for concurrent read-only prediction.
    """

    dataset: Dataset
    kernel: KernelSpec
    chol_factor: np.ndarray    # L, lower triangular, L L^T = K + (noise + jitter) I
    weight_vector: np.ndarray  # (K + (noise + jitter) I)^{-1} (y - y_offset)
    jitter: float
    y_offset: float = 0.0

    def predict_batch(self, queries: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Predictive means and variances at each query row.

        Large batches are processed in cache-sized chunks so the cost stays
        linear in the number of queries.
        """
        queries = np.atleast_2d(np.asarray(queries, dtype=float))
        n = queries.shape[0]
        mean = np.empty(n)
        var = np.empty(n)
        chunk = max(1, 262144 // max(len(self.dataset), 1))
        for start in range(0, n, chunk):
            stop = min(start + chunk, n)
            k_trans = kernel_matrix(self.kernel, queries[start:stop], self.dataset.inputs)
            mean[start:stop] = k_trans @ self.weight_vector + self.y_offset
            v = solve_triangular(self.chol_factor, k_trans.T, lower=True)
            var[start:stop] = self.kernel.signal_variance - np.sum(v * v, axis=0)
        return mean, np.maximum(var, 0.0)

    def predict(self, z: np.ndarray) -> tuple[float, float]:
        mean, var = self.predict_batch(np.asarray(z, dtype=float)[None, :])
        return float(mean[0]), float(var[0])


def _factorize(spec: KernelSpec, gram: np.ndarray) -> tuple[np.ndarray, float]:
    """Cholesky of ``gram + (noise + jitter) I`` under the escalation policy."""
    t = gram.shape[0]
    jitter = JITTER_START
    while True:
        shifted = gram + (spec.noise_variance + jitter * spec.signal_variance) * np.eye(t)
        try:
            return cholesky(shifted, lower=True), jitter
        except np.linalg.LinAlgError:
            pass
        if jitter >= JITTER_CEILING:
            cond = np.linalg.cond(shifted)
            raise NumericalError(
                f"Cholesky failed for {t}x{t} kernel matrix after jitter escalation "
                f"to {jitter:g} (condition number {cond:.3e})"
            )
        jitter *= 10.0


def gp_fit(dataset: Dataset, spec: KernelSpec, center_y: bool = False) -> GpPosterior:
    """Fit the GP posterior on ``dataset`` with a zero-mean prior.

    ``center_y`` subtracts the target mean before fitting and adds it back at
    prediction time; off by default.
    """
    if len(dataset) == 0:
        raise ConfigurationError("cannot fit a GP on an empty dataset")
    if dataset.dim != spec.dim:
        raise ConfigurationError(f"dataset dimension {dataset.dim} does not match kernel dimension {spec.dim}")
    gram = kernel_matrix(spec, dataset.inputs)
    chol, jitter = _factorize(spec, gram)
    offset = float(np.mean(dataset.targets)) if center_y else 0.0
    alpha = cho_solve((chol, True), dataset.targets - offset)
    return GpPosterior(dataset, spec, chol, alpha, jitter, offset)


def gp_predict(post: GpPosterior, z: np.ndarray) -> tuple[float, float]:
    """Predictive mean and variance at a single joint point."""
    return post.predict(z)


def gp_predict_batch(post: GpPosterior, queries: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Predictive means and variances at many joint points at once."""
    return post.predict_batch(queries)


def log_marginal_likelihood(dataset: Dataset, spec: KernelSpec, center_y: bool = False) -> float:
    """Marginal log-likelihood of the data under ``spec``.

    Equals ``-1/2 y^T alpha - sum(log L_ii) - (t/2) log(2 pi)`` with the same
    jittered factorization used by ``gp_fit``.
    """
    post = gp_fit(dataset, spec, center_y=center_y)
    y = dataset.targets - post.y_offset
    t = len(dataset)
    return float(
        -0.5 * y @ post.weight_vector
        - np.sum(np.log(np.diag(post.chol_factor)))
        - 0.5 * t * math.log(2.0 * math.pi)
    )


def fit_hyperparams(dataset: Dataset, grid: list[KernelSpec], center_y: bool = False) -> KernelSpec:
    """Pick the grid entry maximizing the log marginal likelihood.

    Ties keep the earliest entry; entries whose factorization fails are
    skipped.  Raises ``NumericalError`` when every entry fails.
    """
    if not grid:
        raise ConfigurationError("hyperparameter grid is empty")
    best_spec = None
    best_lml = -math.inf
    failures = []
    for spec in grid:
        try:
            lml = log_marginal_likelihood(dataset, spec, center_y=center_y)
        except NumericalError as exc:
            failures.append(exc)
            continue
        if lml > best_lml:
            best_lml = lml
            best_spec = spec
    if best_spec is None:
        raise NumericalError(f"all {len(grid)} grid entries failed factorization: {failures[-1]}")
    return best_spec


def default_spec_grid(
    widths: np.ndarray,
    kind: str = "se",
    noise_variance: float = 1e-2,
    signal_variances: tuple[float, ...] = (0.5, 1.0, 2.0),
) -> list[KernelSpec]:
    """Default search grid: 8 log-spaced lengthscale factors of the per-dimension
    domain widths, crossed with a small set of signal variances."""
    widths = np.asarray(widths, dtype=float).ravel()
    if np.any(widths <= 0):
        raise ConfigurationError("domain widths must be positive")
    grid = []
    for factor in np.geomspace(0.05, 2.0, 8):
        ls = tuple(float(factor) * widths)
        for sv in signal_variances:
            grid.append(KernelSpec(kind, ls, float(sv), noise_variance))
    return grid
