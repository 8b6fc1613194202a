"""Outer optimization loop, robust-regret tracking, and the suite runner.

A run alternates surrogate refits, acquisition maximization, an environment
context draw, and a noisy observation.  Regret per iteration compares the
chosen input against the grid maximizer of the true worst-case value at the
current radius; the true-function grid is evaluated once per run and cached.
"""

from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .acquisition import (
    ACQUISITION_TAGS,
    AcquisitionContext,
    AcquisitionKind,
    ExplorationSchedule,
    maximize_acq,
)
from .benchmarks import BenchmarkFunction, get_benchmark, observe
from .divergences import (
    ContextSet,
    DivergenceKind,
    RadiusSchedule,
    epsilon_at,
    robust_value,
    robust_values_rows,
)
from .errors import ConfigurationError, NumericalError
from .gp import Dataset, default_spec_grid, fit_hyperparams, gp_fit

# Child-stream purposes, so the random consumption of one phase can never
# shift another phase (or another acquisition kind sharing the seed).
_INIT, _CONTEXTS, _ACQ, _CDRAW, _NOISE = range(5)

_GRID_CHUNK = 500_000


def _child_rng(seed: int, t: int, purpose: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence((seed, t, purpose)))


@dataclass(frozen=True)
class ExperimentConfig:
    """Fully resolved description of one run (primitives only, so it pickles
    and hashes cleanly)."""

    benchmark: str = "gap"
    acquisition: str = "dro_tv"
    divergence: str = "tv"
    schedule: str = "fixed"          # 'fixed' | 'adaptive'
    eps: float = 0.5
    iterations: int = 60
    n_init: int = 0                  # 0 resolves to 3 * (dim_x + 1)
    n_contexts: int = 30
    context_mode: str = "resample"   # 'resample' | 'grid'
    exploration: str = "constant"    # 'constant' | 'log_growth'
    sqrt_beta: float = 2.0
    kernel: str = "se"
    noise_variance: float = 1e-2
    noise_sigma: float = 0.0
    sv_scale: str = "fixed"          # 'fixed' | 'variance'
    center_y: bool = False
    kl_lambda: float = 0.0           # 0 resolves to the lambda grid
    eval_eps: float = -1.0           # regret-ball radius; negative tracks the schedule
    seed: int = 0
    x_grid: int = 200
    c_grid: int = 101
    budget: int = 200
    refine_passes: int = 3

    def validate(self) -> None:
        if self.iterations < 1:
            raise ConfigurationError("iterations must be at least 1")
        if self.n_init < 0:
            raise ConfigurationError("n_init must be nonnegative")
        if self.n_contexts < 2:
            raise ConfigurationError("n_contexts must be at least 2")
        if self.acquisition not in ACQUISITION_TAGS:
            raise ConfigurationError(
                f"unknown acquisition {self.acquisition!r}, expected one of: {', '.join(ACQUISITION_TAGS)}"
            )
        if self.schedule not in ("fixed", "adaptive"):
            raise ConfigurationError("schedule must be 'fixed' or 'adaptive'")
        if self.context_mode not in ("resample", "grid"):
            raise ConfigurationError("context_mode must be 'resample' or 'grid'")
        if self.sv_scale not in ("fixed", "variance"):
            raise ConfigurationError("sv_scale must be 'fixed' or 'variance'")
        if self.x_grid < 2 or self.c_grid < 2:
            raise ConfigurationError("grid resolutions must be at least 2")
        if self.schedule == "fixed" and self.eps < 0:
            raise ConfigurationError("fixed radius eps must be nonnegative")
        if self.kl_lambda < 0:
            raise ConfigurationError("kl_lambda must be nonnegative (0 selects the grid)")
        if self.budget < 1 or self.refine_passes < 0:
            raise ConfigurationError("budget must be >= 1 and refine_passes >= 0")
        if min(self.sqrt_beta, self.noise_sigma, self.noise_variance) < 0:
            raise ConfigurationError("sqrt_beta, noise_sigma, and noise_variance must be nonnegative")
        if self.seed < 0:
            raise ConfigurationError("seed must be nonnegative")
        DivergenceKind.parse(self.divergence)
        get_benchmark(self.benchmark)


@dataclass
class RegretRecord:
    """Per-iteration trace of one run plus its cumulative robust regret."""

    run_id: str
    seed: int
    config: ExperimentConfig
    xs: np.ndarray = field(default_factory=lambda: np.empty((0, 0)))
    cs: np.ndarray = field(default_factory=lambda: np.empty(0))
    ys: np.ndarray = field(default_factory=lambda: np.empty(0))
    eps: np.ndarray = field(default_factory=lambda: np.empty(0))
    regret: np.ndarray = field(default_factory=lambda: np.empty(0))
    cum_regret: np.ndarray = field(default_factory=lambda: np.empty(0))
    x_star: np.ndarray = field(default_factory=lambda: np.empty((0, 0)))
    wall_ms: np.ndarray = field(default_factory=lambda: np.empty(0))
    acq_ms: np.ndarray = field(default_factory=lambda: np.empty(0))
    dataset_size: int = 0
    error: str | None = None

    def __len__(self) -> int:
        return self.regret.shape[0]


class RobustRegretOracle:
    """Grid-based maximizer of the true worst-case value.

    The benchmark is evaluated noise-free on a fixed input-by-context grid
    once; worst-case values per input are recomputed (and memoized) for each
    distinct radius, since the radius reshapes the inner infimum.
    """

    def __init__(
        self,
        fn: BenchmarkFunction,
        kind: DivergenceKind,
        x_grid: int,
        c_grid: int,
        lambda_grid: np.ndarray | None = None,
    ):
        axes = [np.linspace(lo, hi, x_grid) for lo, hi in fn.input_box]
        if len(axes) == 1:
            self.x_points = axes[0][:, None]
        else:
            mesh = np.meshgrid(*axes, indexing="ij")
            self.x_points = np.stack([m.ravel() for m in mesh], axis=1)
        lo, hi = fn.context_interval
        self.c_points = np.linspace(lo, hi, c_grid)
        self.fn = fn
        self.kind = kind
        self.lambda_grid = lambda_grid
        self.weights = np.full(c_grid, 1.0 / c_grid)
        n_x, n_c = self.x_points.shape[0], c_grid
        joint = np.hstack(
            [np.repeat(self.x_points, n_c, axis=0), np.tile(self.c_points, n_x)[:, None]]
        )
        values = np.empty(joint.shape[0])
        for start in range(0, joint.shape[0], _GRID_CHUNK):
            stop = min(start + _GRID_CHUNK, joint.shape[0])
            values[start:stop] = fn.evaluate_many(joint[start:stop])
        self.f_grid = values.reshape(n_x, n_c)
        self._cache: dict[float, tuple[np.ndarray, int]] = {}

    def _values_at(self, eps: float) -> tuple[np.ndarray, int]:
        key = float(eps)
        if key not in self._cache:
            vals = robust_values_rows(self.kind, self.f_grid, self.weights, eps, self.lambda_grid)
            self._cache[key] = (vals, int(np.argmax(vals)))
        return self._cache[key]

    def step(self, eps: float, x_t: np.ndarray) -> tuple[float, np.ndarray]:
        """Instantaneous robust regret of ``x_t`` and the grid optimizer."""
        vals, best = self._values_at(eps)
        x_t = np.asarray(x_t, dtype=float).ravel()
        joint = np.hstack(
            [np.repeat(x_t[None, :], self.c_points.shape[0], axis=0), self.c_points[:, None]]
        )
        f_t = self.fn.evaluate_many(joint)
        v_t = robust_value(self.kind, f_t, self.weights, eps, self.lambda_grid)
        return float(vals[best] - v_t), self.x_points[best].copy()


def robust_regret_step(
    fn: BenchmarkFunction,
    kind: DivergenceKind,
    eps_t: float,
    x_t: np.ndarray,
    x_grid: int = 200,
    c_grid: int = 101,
    lambda_grid: np.ndarray | None = None,
) -> tuple[float, np.ndarray]:
    """One-shot regret computation (builds the grid; prefer the oracle class
    inside loops, which caches the grid across iterations)."""
    oracle = RobustRegretOracle(fn, kind, x_grid, c_grid, lambda_grid)
    return oracle.step(eps_t, x_t)


def _resolve_n_init(config: ExperimentConfig, fn: BenchmarkFunction) -> int:
    return config.n_init if config.n_init > 0 else 3 * (fn.dim_x + 1)


def _needs_refit(t: int) -> bool:
    return t <= 25 or t % 5 == 0


def _build_grid(config: ExperimentConfig, fn: BenchmarkFunction, targets: np.ndarray):
    widths = np.array([hi - lo for lo, hi in fn.input_box] + [fn.context_interval[1] - fn.context_interval[0]])
    svs = (0.5, 1.0, 2.0)
    if config.sv_scale == "variance":
        scale = max(float(np.var(targets)), 1e-6)
        svs = tuple(s * scale for s in svs)
    return default_spec_grid(widths, config.kernel, config.noise_variance, svs)


def run_drbo(config: ExperimentConfig, run_id: str = "run") -> RegretRecord:
    """Execute one full run; deterministic given ``config.seed``."""
    config.validate()
    fn = get_benchmark(config.benchmark, config.noise_sigma)
    kind = AcquisitionKind(config.acquisition, config.kl_lambda if config.kl_lambda > 0 else None)
    div = DivergenceKind.parse(config.divergence)
    schedule = (
        RadiusSchedule.fixed(config.eps)
        if config.schedule == "fixed"
        else RadiusSchedule.adaptive(div)
    )
    explore = ExplorationSchedule(config.exploration, config.sqrt_beta)
    lambda_grid = None if config.kl_lambda <= 0 else np.array([config.kl_lambda])
    oracle = RobustRegretOracle(fn, div, config.x_grid, config.c_grid, lambda_grid)

    lows = np.array([b[0] for b in fn.input_box] + [fn.context_interval[0]])
    highs = np.array([b[1] for b in fn.input_box] + [fn.context_interval[1]])
    n_init = _resolve_n_init(config, fn)
    rng_init = _child_rng(config.seed, 0, _INIT)
    inputs = rng_init.uniform(lows, highs, size=(n_init, lows.shape[0]))
    targets = np.array([observe(fn, row[:-1], row[-1], rng_init) for row in inputs])
    dataset = Dataset(inputs, targets)

    record = RegretRecord(run_id=run_id, seed=config.seed, config=config)
    xs, cs, ys, eps_hist, r_hist, R_hist, xstar_hist, wall_hist, acq_hist = ([] for _ in range(9))
    spec = None
    cum = 0.0
    for t in range(1, config.iterations + 1):
        tic = time.perf_counter()
        try:
            if spec is None or _needs_refit(t):
                grid = _build_grid(config, fn, dataset.targets)
                spec = fit_hyperparams(dataset, grid, center_y=config.center_y)
            posterior = gp_fit(dataset, spec, center_y=config.center_y)
        except NumericalError as exc:
            raise NumericalError(f"iteration {t}: {exc}") from exc
        eps_t = epsilon_at(schedule, t)
        if config.context_mode == "grid":
            contexts = ContextSet.grid(fn.context_interval, config.n_contexts)
        else:
            contexts = ContextSet.sample_uniform(
                fn.context_interval, config.n_contexts, _child_rng(config.seed, t, _CONTEXTS)
            )
        actx = AcquisitionContext(posterior, contexts, eps_t, explore.sqrt_beta_at(t))
        acq_tic = time.perf_counter()
        x_t = maximize_acq(
            kind, actx, fn.input_box, config.budget, _child_rng(config.seed, t, _ACQ), config.refine_passes
        )
        acq_ms = (time.perf_counter() - acq_tic) * 1e3
        c_t = float(_child_rng(config.seed, t, _CDRAW).uniform(*fn.context_interval))
        y_t = observe(fn, x_t, c_t, _child_rng(config.seed, t, _NOISE))
        dataset = dataset.append(np.append(x_t, c_t), y_t)
        eval_eps = eps_t if config.eval_eps < 0 else config.eval_eps
        r_t, x_star = oracle.step(eval_eps, x_t)
        cum += r_t
        xs.append(x_t)
        cs.append(c_t)
        ys.append(y_t)
        eps_hist.append(eps_t)
        r_hist.append(r_t)
        R_hist.append(cum)
        xstar_hist.append(x_star)
        acq_hist.append(acq_ms)
        wall_hist.append((time.perf_counter() - tic) * 1e3)

    record.xs = np.array(xs)
    record.cs = np.array(cs)
    record.ys = np.array(ys)
    record.eps = np.array(eps_hist)
    record.regret = np.array(r_hist)
    record.cum_regret = np.array(R_hist)
    record.x_star = np.array(xstar_hist)
    record.wall_ms = np.array(wall_hist)
    record.acq_ms = np.array(acq_hist)
    record.dataset_size = len(dataset)
    return record


def _run_indexed(args: tuple[int, ExperimentConfig, str]) -> tuple[int, RegretRecord]:
    index, config, run_id = args
    try:
        return index, run_drbo(config, run_id)
    except Exception as exc:  # recorded, suite continues
        failed = RegretRecord(run_id=run_id, seed=config.seed, config=config, error=str(exc))
        return index, failed


def run_suite(
    configs: list[ExperimentConfig],
    repeats: int = 1,
    parallelism: int = 1,
    base_seed: int | None = None,
    run_prefix: str | None = None,
) -> list[RegretRecord]:
    """Run each config ``repeats`` times with derived seeds.

    Seeds are ``base + 1000 * config_index + repeat`` (base defaults to each
    config's own seed), so suite results are reproducible and collision-free.
    Output order is (config, repeat) regardless of the worker count.
    """
    if repeats < 1:
        raise ConfigurationError("repeats must be at least 1")
    if parallelism < 1:
        raise ConfigurationError("parallelism must be at least 1")
    tasks = []
    index = 0
    for ci, config in enumerate(configs):
        base = config.seed if base_seed is None else base_seed
        for rep in range(repeats):
            seed = base + 1000 * ci + rep
            stem = run_prefix if run_prefix is not None and len(configs) == 1 else f"{run_prefix or 'c'}{ci}"
            run_id = f"{stem}-r{rep:02d}"
            tasks.append((index, replace(config, seed=seed), run_id))
            index += 1
    results: list[RegretRecord | None] = [None] * len(tasks)
    if parallelism == 1:
        for task in tasks:
            i, rec = _run_indexed(task)
            results[i] = rec
    else:
        with ProcessPoolExecutor(max_workers=parallelism) as pool:
            for i, rec in pool.map(_run_indexed, tasks):
                results[i] = rec
    return results  # type: ignore[return-value]
