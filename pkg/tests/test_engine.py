import dataclasses

import numpy as np
import pytest

from drbo.benchmarks import BenchmarkFunction, evaluate, get_benchmark
from drbo.divergences import DivergenceKind
from drbo.engine import (
    ExperimentConfig,
    RobustRegretOracle,
    _child_rng,
    robust_regret_step,
    run_drbo,
    run_suite,
)
from drbo.errors import ConfigurationError

FAST = dict(benchmark="gap", divergence="tv", schedule="fixed", eps=0.5,
            noise_sigma=0.0, x_grid=101, c_grid=51, budget=50)


def fast_config(**kw):
    merged = {**FAST, **kw}
    return ExperimentConfig(**merged)


def record_state(rec):
    return (rec.xs.tobytes(), rec.cs.tobytes(), rec.ys.tobytes(),
            rec.regret.tobytes(), rec.cum_regret.tobytes(), rec.eps.tobytes())


def test_single_random_iteration_noiseless():
    cfg = fast_config(acquisition="random", iterations=1, seed=3)
    rec = run_drbo(cfg)
    assert len(rec) == 1
    fn = get_benchmark("gap")
    expected_x = _child_rng(3, 1, 2).uniform(np.array([0.0]), np.array([1.0]))
    assert np.array_equal(rec.xs[0], expected_x)
    assert rec.ys[0] == evaluate(fn, rec.xs[0], rec.cs[0])
    assert 0.0 <= rec.cs[0] <= 1.0


def test_run_is_bit_deterministic():
    cfg = fast_config(acquisition="dro_tv", iterations=8, noise_sigma=0.05, seed=11)
    assert record_state(run_drbo(cfg)) == record_state(run_drbo(cfg))


def test_dataset_length_is_ninit_plus_t():
    cfg = fast_config(acquisition="ucb", iterations=5, seed=2)
    rec = run_drbo(cfg)
    assert rec.dataset_size == 3 * 2 + 5


def test_cumulative_regret_consistency():
    cfg = fast_config(acquisition="dro_chi2", divergence="chi2", iterations=10, seed=4)
    rec = run_drbo(cfg)
    assert np.allclose(np.cumsum(rec.regret), rec.cum_regret, atol=1e-9)
    assert np.all(rec.regret >= -1e-9)
    assert np.all(np.diff(rec.cum_regret) >= -1e-9)


def test_zero_radius_trajectories_coincide_across_kinds():
    seqs = {}
    for acq in ("dro_chi2", "dro_tv", "ucb"):
        cfg = fast_config(acquisition=acq, eps=0.0, iterations=6, noise_sigma=0.05, seed=21)
        seqs[acq] = run_drbo(cfg).xs
    assert np.array_equal(seqs["dro_chi2"], seqs["ucb"])
    assert np.array_equal(seqs["dro_tv"], seqs["ucb"])


def test_regret_zero_at_grid_optimum():
    fn = get_benchmark("gap")
    oracle = RobustRegretOracle(fn, DivergenceKind.TV, 101, 51)
    _, x_star = oracle.step(0.5, np.array([0.5]))
    r, _ = oracle.step(0.5, x_star)
    assert r == pytest.approx(0.0, abs=1e-12)


def test_regret_eps_zero_matches_mean_oracle():
    fn = get_benchmark("gap")
    xs = np.linspace(0, 1, 101)
    cs = np.linspace(0, 1, 51)
    joint = np.stack([np.repeat(xs, cs.size), np.tile(cs, xs.size)], axis=1)
    means = fn.evaluate_many(joint).reshape(xs.size, cs.size).mean(axis=1)
    best_idx = int(np.argmax(means))
    x_t = np.array([0.42])
    r, x_star = robust_regret_step(fn, DivergenceKind.TV, 0.0, x_t, x_grid=101, c_grid=51)
    assert x_star[0] == pytest.approx(xs[best_idx])
    mean_at_xt = fn.evaluate_many(np.stack([np.full(cs.size, 0.42), cs], axis=1)).mean()
    assert r == pytest.approx(means[best_idx] - mean_at_xt, abs=1e-12)


def test_regret_zero_for_constant_function():
    flat = BenchmarkFunction("flat", ((0.0, 1.0),), (0.0, 1.0), False, 0.0,
                             lambda u: np.full(u.shape[:-1], 2.5))
    for eps in (0.0, 0.3, 1.0):
        r, _ = robust_regret_step(flat, DivergenceKind.TV, eps, np.array([0.77]), 51, 21)
        assert r == pytest.approx(0.0, abs=1e-12)


def test_adaptive_schedule_recorded_and_decreasing():
    cfg = fast_config(acquisition="dro_tv", schedule="adaptive", iterations=6, seed=5)
    rec = run_drbo(cfg)
    assert np.all(np.diff(rec.eps) < 0)
    assert rec.eps[0] == pytest.approx(1.0 / (1.0 + np.sqrt(2.0)))


def test_suite_single_repeat_matches_run_drbo():
    cfg = fast_config(acquisition="ucb", iterations=4, seed=30)
    suite = run_suite([cfg], repeats=1)
    solo = run_drbo(dataclasses.replace(cfg, seed=30), run_id=suite[0].run_id)
    assert record_state(suite[0]) == record_state(solo)


def test_suite_independent_of_parallelism():
    cfgs = [fast_config(acquisition="ucb", iterations=4, seed=1),
            fast_config(acquisition="dro_tv", iterations=4, seed=1)]
    serial = run_suite(cfgs, repeats=2, parallelism=1)
    parallel = run_suite(cfgs, repeats=2, parallelism=2)
    assert [record_state(r) for r in serial] == [record_state(r) for r in parallel]


def test_suite_seed_derivation():
    cfgs = [fast_config(acquisition="random", iterations=1, seed=0) for _ in range(3)]
    records = run_suite(cfgs, repeats=10, base_seed=100)
    assert len(records) == 30
    seeds = [r.seed for r in records]
    assert seeds == [100 + 1000 * c + r for c in range(3) for r in range(10)]
    assert len(set(seeds)) == 30


def test_suite_records_failures_and_continues(monkeypatch):
    import drbo.engine as engine_mod
    from drbo.errors import NumericalError

    real_run = engine_mod.run_drbo

    def flaky_run(config, run_id="run"):
        if config.seed == 1001:  # second config's derived seed
            raise NumericalError("iteration 1: synthetic failure")
        return real_run(config, run_id)

    monkeypatch.setattr(engine_mod, "run_drbo", flaky_run)
    good = fast_config(acquisition="ucb", iterations=2, seed=1)
    records = run_suite([good, good], repeats=1)
    assert records[0].error is None
    assert records[1].error is not None and "synthetic failure" in records[1].error
    assert len(records) == 2


def test_numerical_failure_carries_iteration_index(monkeypatch):
    import drbo.engine as engine_mod
    from drbo.errors import NumericalError

    def exploding_fit(dataset, grid, center_y=False):
        raise NumericalError("synthetic factorization failure")

    monkeypatch.setattr(engine_mod, "fit_hyperparams", exploding_fit)
    cfg = fast_config(acquisition="ucb", iterations=3, seed=1)
    with pytest.raises(NumericalError, match="iteration 1"):
        run_drbo(cfg)


def test_every_benchmark_runs_end_to_end():
    for name in ("branin", "goldstein_price", "six_hump_camel", "hartmann3", "gap"):
        cfg = ExperimentConfig(benchmark=name, acquisition="dro_tv", divergence="tv",
                               schedule="fixed", eps=0.3, iterations=2, noise_sigma=0.0,
                               seed=1, x_grid=41, c_grid=21, budget=30, n_contexts=8,
                               sv_scale="variance", center_y=True)
        rec = run_drbo(cfg)
        assert len(rec) == 2
        assert np.all(np.isfinite(rec.cum_regret))
        assert np.all(rec.regret >= -1e-9), name


def test_kl_engine_run_with_grid_and_fixed_lambda():
    base = fast_config(acquisition="dro_kl", divergence="kl", schedule="adaptive",
                       iterations=3, seed=9)
    grid_rec = run_drbo(base)
    fixed_rec = run_drbo(dataclasses.replace(base, kl_lambda=1.0))
    assert len(grid_rec) == len(fixed_rec) == 3
    assert np.all(np.isfinite(grid_rec.cum_regret))
    assert np.all(np.isfinite(fixed_rec.cum_regret))


def test_config_validation():
    with pytest.raises(ConfigurationError):
        fast_config(iterations=0).validate()
    with pytest.raises(ConfigurationError):
        fast_config(n_contexts=1).validate()
    with pytest.raises(ConfigurationError):
        fast_config(acquisition="sobol").validate()
    with pytest.raises(ConfigurationError):
        fast_config(benchmark="sphere").validate()
    with pytest.raises(ConfigurationError):
        fast_config(eps=-0.5).validate()
    with pytest.raises(ConfigurationError):
        fast_config(budget=0).validate()
    with pytest.raises(ConfigurationError):
        fast_config(kl_lambda=-1.0).validate()


def test_gap_dro_tv_beats_random_baseline():
    # ordering check over paired seeds: robust method under Fixed(0.5)
    def cfg(acq):
        return ExperimentConfig(benchmark="gap", acquisition=acq, divergence="tv",
                                schedule="fixed", eps=0.5, iterations=60, noise_sigma=0.05)
    records = run_suite([cfg("dro_tv"), cfg("random")], repeats=10, parallelism=2, base_seed=7)
    dro = np.median([r.cum_regret[-1] for r in records[:10]])
    rand = np.median([r.cum_regret[-1] for r in records[10:]])
    assert dro < rand
