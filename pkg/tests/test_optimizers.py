import logging
import math

import numpy as np
import pytest

import sanc.optimizers as opt
from sanc.curvature import GRADIENT, NEGATIVE_CURVATURE
from sanc.data import make_w1a_like, map_labels
from sanc.objectives import ObjectiveModel, Quadratic, logistic_nonconvex, synthetic_saddle
from sanc.optimizers import (
    NEWTON,
    SUCCESSFUL,
    UNSUCCESSFUL,
    VERY_SUCCESSFUL,
    SancConfig,
    classify,
    rho,
    run,
    sigma_update,
)
from sanc.sampling import BatchSpec


def convex_quadratic(seed=0, n=5, d=6):
    rng = np.random.default_rng(seed)
    M = rng.standard_normal((n, d, d))
    A = np.einsum("kij,klj->kil", M, M) / d + np.eye(d)
    return Quadratic(A, rng.standard_normal((n, d)))


@pytest.fixture(scope="module")
def logistic():
    return logistic_nonconvex(map_labels(make_w1a_like(n=300, d=40, seed=2, positive_rate=0.1), "zero_one"), 1.0)


def test_rho_examples():
    assert rho(1.0, 0.4, 0.2) == pytest.approx(0.75)
    assert rho(2.0, 2.0, 1.0) == 0.0
    assert rho(3.0, 2.0, 2.0) == 1.0
    assert rho(1.0, 0.5, 1.0) is None
    assert rho(1.0, 0.5, 1.0 - 1e-16) is None
    assert classify(None, SancConfig()) == UNSUCCESSFUL


def test_sigma_update_examples():
    cfg = SancConfig()
    assert sigma_update(1.0, 0.9, 0.5, cfg) == 0.5
    assert sigma_update(1.0, 0.5, 0.5, cfg) == 1.0
    assert sigma_update(1.0, 0.1, 0.5, cfg) == 2.0
    assert sigma_update(1.0, None, 0.5, cfg) == 2.0
    assert sigma_update(1.0, 0.9, 0.0, cfg) == cfg.eps_m
    assert classify(0.2, cfg) == SUCCESSFUL and classify(0.8, cfg) == SUCCESSFUL
    assert classify(0.81, cfg) == VERY_SUCCESSFUL


@pytest.mark.parametrize(
    "kwargs",
    [dict(gamma=1.0), dict(eta1=0.8, eta2=0.2), dict(eta2=1.0), dict(sigma0=0.0), dict(L1=-1.0),
     dict(eps=1.5), dict(eps_s=-1.0), dict(j_max=0), dict(max_iter=0), dict(f_mode="guess"), dict(budget=0)],
)
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        SancConfig(**kwargs)


def test_config_precondition_warning(caplog):
    with caplog.at_level(logging.WARNING):
        SancConfig(eps=1e-3, eps_g=1e-3)
    assert "complexity guarantee" in caplog.text
    assert SancConfig(eps_s=0.0).sigma_max_bound() == math.inf
    assert SancConfig().sigma_max_bound() >= SancConfig().sigma0


def test_unknown_kind():
    with pytest.raises(ValueError):
        run("adam", convex_quadratic(), SancConfig())
    with pytest.raises(ValueError):
        opt.baseline_step("sanc", None, None, SancConfig())


@pytest.mark.parametrize("sigma0", [1e-3, 1.0, 50.0])
def test_full_batch_convex_quadratic(sigma0):
    q = convex_quadratic()
    tr = run("sanc", q, SancConfig(sigma0=sigma0, max_iter=200))
    assert tr.stop_reason == "converged"
    assert tr.records and tr.unsuccessful == 0
    assert all(r.step_kind == NEWTON and r.success_class == VERY_SUCCESSFUL for r in tr.records)
    f = [tr.initial_f_value] + [r.f_value for r in tr.records]
    assert all(b <= a for a, b in zip(f, f[1:]))
    assert all(SancConfig().eps_m <= r.sigma <= sigma0 for r in tr.records)


def test_saddle_first_step_is_negative_curvature():
    m = synthetic_saddle(10)
    tr = run("sanc", m, SancConfig(max_iter=200), x0=np.zeros(10))
    first = tr.records[0]
    assert first.success_class == UNSUCCESSFUL and first.rho is None
    assert first.step_kind == NEGATIVE_CURVATURE and first.z in (-1, 1)
    assert first.f_value < 0.0
    assert tr.stop_reason == "converged" and tr.final_f_value <= -0.24


def test_small_sigma0_logistic_moves_on_rejections(logistic):
    b = math.ceil(logistic.n / 20)
    tr = run("sanc", logistic, SancConfig(sigma0=1e-3, batch=BatchSpec(b, b), max_iter=60))
    rejected = [r for r in tr.records if r.success_class == UNSUCCESSFUL]
    assert rejected and any(r.t < 20 for r in rejected)
    for r in rejected:
        assert r.step_kind in (NEGATIVE_CURVATURE, GRADIENT) and r.step_norm > 0


def test_scr_rejection_freezes_iterate(logistic):
    b = math.ceil(logistic.n / 20)
    cfg = SancConfig(sigma0=1e-3, batch=BatchSpec(b, b), max_iter=40)
    tr = run("scr", logistic, cfg)
    prev_f = tr.initial_f_value
    rejected = 0
    for cur, nxt in zip(tr.records, tr.records[1:]):
        if cur.success_class == UNSUCCESSFUL:
            rejected += 1
            assert cur.f_value == prev_f and cur.step_norm == 0.0
            assert nxt.sigma == cfg.gamma * cur.sigma
        prev_f = cur.f_value
    assert rejected


def test_sigma_floor_and_growth(logistic):
    b = math.ceil(logistic.n / 20)
    cfg = SancConfig(sigma0=1e-3, batch=BatchSpec(b, b), max_iter=80)
    tr = run("sanc", logistic, cfg)
    for cur, nxt in zip(tr.records, tr.records[1:]):
        assert cur.sigma >= cfg.eps_m
        assert nxt.sigma == sigma_update(cur.sigma, cur.rho, cur.grad_norm, cfg)
        if cur.success_class == UNSUCCESSFUL:
            assert nxt.sigma == cfg.gamma * cur.sigma


def test_accepted_step_decrease_with_exact_f(logistic):
    b = math.ceil(logistic.n / 20)
    cfg = SancConfig(sigma0=1e-3, batch=BatchSpec(b, b), max_iter=80)
    tr = run("sanc", logistic, cfg)
    prev = tr.initial_f_value
    for r in tr.records:
        if r.success_class != UNSUCCESSFUL:
            assert prev - r.f_value >= cfg.eta1 * r.sigma / 6 * r.step_norm**3 - 1e-8
        prev = r.f_value


def test_sanc_equals_scr_without_rejections(logistic):
    cfg = SancConfig(sigma0=1.0, max_iter=15)
    a, b = run("sanc", logistic, cfg), run("scr", logistic, cfg)
    assert a.unsuccessful == 0
    assert a.records == b.records and np.array_equal(a.final_x, b.final_x)


def test_cr_fixed_sigma(monkeypatch, logistic):
    def boom(*args, **kwargs):
        raise AssertionError("sigma_update called")

    monkeypatch.setattr(opt, "sigma_update", boom)
    tr = run("cr", logistic, SancConfig(max_iter=10))
    assert all(r.sigma == 5.0 and r.success_class == SUCCESSFUL and r.rho is None for r in tr.records)


def test_ncd_on_convex_quadratic_uses_gradient():
    tr = run("ncd", convex_quadratic(), SancConfig(max_iter=30))
    assert tr.records and all(r.step_kind == GRADIENT for r in tr.records)


def test_sgd_monotone_and_accounting():
    q = convex_quadratic()
    tr = run("sgd", q, SancConfig(max_iter=100))
    f = [tr.initial_f_value] + [r.f_value for r in tr.records]
    assert all(b < a for a, b in zip(f, f[1:]))
    assert [r.oracle_calls_cum for r in tr.records] == [q.n * (t + 1) for t in range(100)]
    assert tr.stop_reason == "max_iter"
    tr = run("sgd", q, SancConfig(max_iter=10, batch=BatchSpec(2, 3)))
    assert tr.records[-1].oracle_calls_cum == 20


def test_sgd_at_stationary_point_makes_no_progress():
    tr = run("sgd", synthetic_saddle(10), SancConfig(max_iter=20), x0=np.zeros(10))
    assert all(r.f_value == 0.0 and r.step_norm == 0.0 for r in tr.records)


def test_oracle_accounting_cubic(logistic):
    cfg = SancConfig(sigma0=1.0, max_iter=3)
    tr = run("scr", logistic, cfg)
    n = logistic.n
    assert tr.initial_oracle_calls == n
    # per iteration: n gradients, one Hessian product per Lanczos step, n for f(x+s)
    first = tr.records[0].oracle_calls_cum - n
    assert (first - 2 * n) % n == 0 and 1 <= (first - 2 * n) // n <= cfg.j_max + 1
    calls = [r.oracle_calls_cum for r in tr.records]
    assert calls == sorted(calls)


def test_budget_and_iteration_limits(logistic):
    tr = run("sanc", logistic, SancConfig(sigma0=1e-3, budget=5000, max_iter=1000))
    assert tr.stop_reason == "budget" and tr.oracle_calls >= 5000
    assert tr.records[-2].oracle_calls_cum < 5000
    tr = run("sanc", logistic, SancConfig(max_iter=3, eps=1e-12, eps_g=1e-14, eps_B=1e-8))
    assert tr.stop_reason == "max_iter" and len(tr.records) == 3


def test_estimate_mode_charges_batches(logistic):
    cfg = SancConfig(sigma0=1.0, f_mode="estimate", batch=BatchSpec(30, 30), max_iter=5)
    tr = run("sanc", logistic, cfg)
    assert tr.initial_oracle_calls == 0 and len(tr.records) == 5
    assert all(r.rho is not None for r in tr.records)


class _Exploding(ObjectiveModel):
    n, d = 1, 2

    def value(self, x, idx=None):
        return float(x @ x)

    def grad(self, x, idx=None):
        return np.array([np.inf, 1.0]) if x[0] < 0 else 2 * x

    def hvp_cache(self, x, idx=None):
        return None

    def hvp_cached(self, cache, v):
        return -v


def test_non_finite_state_stops_with_error():
    tr = run("sgd", _Exploding(), SancConfig(sgd_step=1.0, max_iter=5), x0=np.array([1.0, 0.0]))
    assert tr.stop_reason == "error"


def test_determinism(logistic):
    b = math.ceil(logistic.n / 20)
    for kind in opt.KINDS:
        cfg = SancConfig(sigma0=1e-3, batch=BatchSpec(b, b), max_iter=25, seed=11)
        assert run(kind, logistic, cfg).records == run(kind, logistic, cfg).records
