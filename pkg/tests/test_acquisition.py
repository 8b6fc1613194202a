import math

import numpy as np
import pytest

from drbo.acquisition import (
    AcquisitionContext,
    AcquisitionKind,
    ExplorationSchedule,
    acq_value,
    acq_values,
    maximize_acq,
)
from drbo.divergences import ContextSet
from drbo.errors import ConfigurationError
from drbo.gp import Dataset, KernelSpec, gp_fit, gp_predict

BOX1 = ((0.0, 1.0),)


class StubPosterior:
    """Surrogate stand-in with a prescribed mean surface and zero variance."""

    def __init__(self, mean_fn, var=0.0):
        self.mean_fn = mean_fn
        self.var = var

    def predict_batch(self, joint):
        joint = np.atleast_2d(joint)
        mu = np.array([self.mean_fn(row[:-1], row[-1]) for row in joint])
        return mu, np.full(joint.shape[0], self.var)


def make_ctx(posterior, eps=0.5, sqrt_beta=2.0, contexts=None):
    contexts = contexts if contexts is not None else ContextSet.grid((0.0, 1.0), 5)
    return AcquisitionContext(posterior, contexts, eps, sqrt_beta)


def fitted_posterior():
    inputs = np.array([[0.1, 0.2], [0.5, 0.8], [0.9, 0.4]])
    targets = np.array([0.5, -0.3, 1.1])
    return gp_fit(Dataset(inputs, targets), KernelSpec("se", (1.0, 1.0), 1.0, 0.01))


def test_penalty_vanishes_at_zero_radius():
    ctx = make_ctx(fitted_posterior(), eps=0.0)
    rng = np.random.default_rng(0)
    for _ in range(10):
        x = rng.uniform(size=1)
        u = acq_value(AcquisitionKind("ucb"), ctx, x)
        assert acq_value(AcquisitionKind("dro_chi2"), ctx, x) == u
        assert acq_value(AcquisitionKind("dro_tv"), ctx, x) == u


def test_tv_penalty_zero_for_context_constant_mean():
    stub = StubPosterior(lambda x, c: 1.0 + x[0], var=0.04)
    ctx = make_ctx(stub, eps=0.8)
    x = np.array([0.3])
    assert acq_value(AcquisitionKind("dro_tv"), ctx, x) == pytest.approx(
        acq_value(AcquisitionKind("ucb"), ctx, x)
    )


def test_dro_chi2_matches_hand_composition():
    post = fitted_posterior()
    contexts = ContextSet.uniform(np.array([0.25, 0.75]))
    eps, sqrt_beta = 0.3, 2.0
    ctx = make_ctx(post, eps=eps, sqrt_beta=sqrt_beta, contexts=contexts)
    x = np.array([0.4])
    mus, sigmas = [], []
    for c in contexts.supports:
        m, v = gp_predict(post, np.array([0.4, c]))
        mus.append(m)
        sigmas.append(math.sqrt(v))
    mean_ucb = np.mean([m + sqrt_beta * s for m, s in zip(mus, sigmas)])
    mu_bar = np.mean(mus)
    penalty = math.sqrt(eps * np.mean([(m - mu_bar) ** 2 for m in mus]))
    assert acq_value(AcquisitionKind("dro_chi2"), ctx, x) == pytest.approx(mean_ucb - penalty, abs=1e-10)


def test_stable_opt_is_worst_context_ucb():
    post = fitted_posterior()
    contexts = ContextSet.grid((0.0, 1.0), 7)
    ctx = make_ctx(post, contexts=contexts)
    x = np.array([0.6])
    ucbs = []
    for c in contexts.supports:
        m, v = gp_predict(post, np.array([0.6, c]))
        ucbs.append(m + 2.0 * math.sqrt(v))
    assert acq_value(AcquisitionKind("stable_opt"), ctx, x) == pytest.approx(min(ucbs), abs=1e-12)


def test_dro_kl_fixed_lambda_vs_grid():
    from drbo.divergences import DEFAULT_LAMBDA_GRID

    post = fitted_posterior()
    ctx = make_ctx(post, eps=0.2)
    x = np.array([0.5])
    grid_val = acq_value(AcquisitionKind("dro_kl"), ctx, x)
    # maximizing over the grid dominates any single grid member
    for lam in (DEFAULT_LAMBDA_GRID[10], DEFAULT_LAMBDA_GRID[32], DEFAULT_LAMBDA_GRID[50]):
        assert grid_val >= acq_value(AcquisitionKind("dro_kl", kl_lambda=lam), ctx, x) - 1e-12
    mean_ucb = acq_value(AcquisitionKind("ucb"), ctx, x)
    assert grid_val <= mean_ucb + 1e-12


def test_dro_acquisitions_never_exceed_ucb():
    post = fitted_posterior()
    ctx = make_ctx(post, eps=0.4)
    rng = np.random.default_rng(1)
    for _ in range(15):
        x = rng.uniform(size=1)
        u = acq_value(AcquisitionKind("ucb"), ctx, x)
        assert acq_value(AcquisitionKind("dro_chi2"), ctx, x) <= u + 1e-12
        assert acq_value(AcquisitionKind("dro_tv"), ctx, x) <= u + 1e-12


def test_tv_penalty_bounded_by_mean_spread():
    post = fitted_posterior()
    ctx = make_ctx(post, eps=0.6)
    rng = np.random.default_rng(2)
    for _ in range(10):
        x = rng.uniform(size=1)
        gap = acq_value(AcquisitionKind("ucb"), ctx, x) - acq_value(AcquisitionKind("dro_tv"), ctx, x)
        mus = [gp_predict(post, np.array([x[0], c]))[0] for c in ctx.contexts.supports]
        assert gap == pytest.approx(0.3 * (max(mus) - min(mus)), abs=1e-10)


def test_dro_kl_fixed_lambda_modes_stay_below_mean_ucb():
    post = fitted_posterior()
    ctx = make_ctx(post, eps=0.2)
    x = np.array([0.5])
    mean_ucb = acq_value(AcquisitionKind("ucb"), ctx, x)
    for lam in (1.0, 5.0):
        val = acq_value(AcquisitionKind("dro_kl", kl_lambda=lam), ctx, x)
        assert math.isfinite(val)
        assert val <= mean_ucb + 1e-12


def test_constant_mean_shift_preserves_argmax():
    base = StubPosterior(lambda x, c: math.sin(3 * x[0]) + 0.2 * c, var=0.01)
    shifted = StubPosterior(lambda x, c: 7.0 + math.sin(3 * x[0]) + 0.2 * c, var=0.01)
    xs = np.linspace(0, 1, 50)[:, None]
    for tag in ("ucb", "dro_tv", "dro_chi2", "stable_opt"):
        kind = AcquisitionKind(tag)
        v0 = acq_values(kind, make_ctx(base, eps=0.4), xs)
        v1 = acq_values(kind, make_ctx(shifted, eps=0.4), xs)
        assert np.allclose(v1 - v0, 7.0, atol=1e-9)
        assert np.argmax(v0) == np.argmax(v1)


def test_maximizer_deterministic_given_seed():
    ctx = make_ctx(fitted_posterior())
    kind = AcquisitionKind("dro_tv")
    a = maximize_acq(kind, ctx, BOX1, budget=64, rng=123)
    b = maximize_acq(kind, ctx, BOX1, budget=64, rng=123)
    assert np.array_equal(a, b)


def test_maximizer_budget_one_without_refinement():
    ctx = make_ctx(fitted_posterior())
    x = maximize_acq(AcquisitionKind("ucb"), ctx, BOX1, budget=1, rng=9, refine_passes=0)
    expected = np.random.default_rng(9).uniform(np.array([0.0]), np.array([1.0]), size=(1, 1))[0]
    assert np.array_equal(x, expected)


def test_maximizer_random_kind_ignores_surrogate():
    ctx_a = make_ctx(fitted_posterior())
    ctx_b = make_ctx(StubPosterior(lambda x, c: 99.0))
    kind = AcquisitionKind("random")
    xa = maximize_acq(kind, ctx_a, BOX1, budget=50, rng=7)
    xb = maximize_acq(kind, ctx_b, BOX1, budget=50, rng=7)
    assert np.array_equal(xa, xb)
    assert 0.0 <= xa[0] <= 1.0


def test_maximizer_refinement_improves_on_raw_candidates():
    ctx = make_ctx(fitted_posterior(), eps=0.2)
    kind = AcquisitionKind("dro_chi2")
    rng = np.random.default_rng(11)
    candidates = rng.uniform(0, 1, size=(32, 1))
    raw_best = acq_values(kind, ctx, candidates).max()
    refined = maximize_acq(kind, ctx, BOX1, budget=32, rng=11)
    assert acq_value(kind, ctx, refined) >= raw_best - 1e-12


def test_maximizer_finds_planted_quadratic_peak():
    stub = StubPosterior(lambda x, c: -((x[0] - 0.37) ** 2), var=0.0)
    ctx = make_ctx(stub, eps=0.0)
    x = maximize_acq(AcquisitionKind("ucb"), ctx, BOX1, budget=200, rng=5)
    assert abs(x[0] - 0.37) <= 1e-2


def test_maximizer_validates_inputs():
    ctx = make_ctx(fitted_posterior())
    with pytest.raises(ConfigurationError):
        maximize_acq(AcquisitionKind("ucb"), ctx, (), budget=10, rng=0)
    with pytest.raises(ConfigurationError):
        maximize_acq(AcquisitionKind("ucb"), ctx, BOX1, budget=0, rng=0)


def test_exploration_schedule():
    const = ExplorationSchedule("constant", 2.0)
    assert const.sqrt_beta_at(1) == const.sqrt_beta_at(50) == 2.0
    grow = ExplorationSchedule("log_growth", 1.0)
    vals = [grow.sqrt_beta_at(t) for t in (1, 5, 50)]
    assert vals[0] == pytest.approx(math.sqrt(2 * math.log(math.pi**2 / 6)))
    assert vals[0] < vals[1] < vals[2]
    with pytest.raises(ConfigurationError):
        ExplorationSchedule("linear", 1.0)


def test_acquisition_kind_validation():
    with pytest.raises(ConfigurationError):
        AcquisitionKind("thompson")
    with pytest.raises(ConfigurationError):
        AcquisitionKind("dro_kl", kl_lambda=-1.0)
