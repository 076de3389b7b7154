"""REINFORCE trainer: estimator oracle, accounting, determinism, resume."""

import math

import numpy as np
import pytest

from ldectl.benchfn import EvalCounter, make_suite
from ldectl.de_core import init_population
from ldectl.errors import NumericFailure
from ldectl.neural import (
    FIELD_ORDER,
    flatten_weights,
    forward_step,
    grad_norm,
    init_weights,
    zero_state,
)
from ldectl.rng import stream
from ldectl.trainer import TrainConfig, Trajectory, epoch_gradient, sample_trajectory, train


def _tiny_cfg(**kw):
    base = dict(epochs=2, rollouts=2, horizon=3, pop_size=4, bins=1,
                window=2, hidden=4, seed=7)
    base.update(kw)
    return TrainConfig(**base)


def _tiny_setup(cfg, fn_seed=7):
    f = make_suite(fn_seed, 2, 1, 0).train[0]
    w = init_weights(cfg.hidden, cfg.input_size, cfg.pop_size, stream(cfg.seed, "w"))
    pop0 = init_population(f, cfg.pop_size, stream(cfg.seed, "p0"))
    return f, w, pop0


# ---------------------------------------------------------------- trajectories
def test_trajectory_shape_and_return_consistency():
    cfg = _tiny_cfg(horizon=5)
    f, w, pop0 = _tiny_setup(cfg)
    tr = sample_trajectory(w, f, pop0, cfg, stream(0, "t"))
    assert len(tr.steps) == 5
    assert tr.function_id == f.id
    assert abs(tr.total_return - sum(s.reward for s in tr.steps)) < 1e-12
    assert all(0.0 <= s.reward <= 1.0 for s in tr.steps)


def test_trajectory_zero_horizon():
    cfg = _tiny_cfg(horizon=0)
    f, w, pop0 = _tiny_setup(cfg)
    tr = sample_trajectory(w, f, pop0, cfg, stream(0, "t"))
    assert tr.steps == [] and tr.total_return == 0.0


def test_trajectory_deterministic_and_pure():
    cfg = _tiny_cfg()
    f, w, pop0 = _tiny_setup(cfg)
    before = pop0.members.copy()
    a = sample_trajectory(w, f, pop0, cfg, stream(3, "t"))
    b = sample_trajectory(w, f, pop0, cfg, stream(3, "t"))
    np.testing.assert_array_equal(pop0.members, before)
    assert a.total_return == b.total_return
    for sa, sb in zip(a.steps, b.steps):
        np.testing.assert_array_equal(sa.action.raw, sb.action.raw)
        np.testing.assert_array_equal(sa.mu, sb.mu)


def test_trajectory_consumes_exactly_n_times_t_evaluations():
    cfg = _tiny_cfg(horizon=6)
    f, w, pop0 = _tiny_setup(cfg)
    counted = EvalCounter(f)
    sample_trajectory(w, counted, pop0, cfg, stream(0, "t"))
    assert counted.count == cfg.pop_size * 6


def test_random_weights_make_progress_on_sphere():
    # even untrained parameter wobble around 0.5 improves sphere at n=2
    cfg = _tiny_cfg(pop_size=8, horizon=20, bins=5, window=5, hidden=8)
    wins = 0
    for seed in range(10):
        suite = make_suite(seed, 2, 1, 0)
        f = suite.train[0]
        assert f.base == "sphere"
        w = init_weights(cfg.hidden, cfg.input_size, cfg.pop_size, stream(seed, "w"))
        pop0 = init_population(f, cfg.pop_size, stream(seed, "p0"))
        tr = sample_trajectory(w, f, pop0, cfg, stream(seed, "t"))
        wins += tr.total_return > 0.0
    assert wins >= 9


# ---------------------------------------------------------------- estimator
def _replay_logdensity(w, trajs, scales, sigma, hidden):
    total = 0.0
    for tr, s in zip(trajs, scales):
        st = zero_state(hidden)
        for step in tr.steps:
            mu, st, _ = forward_step(w, step.state.as_vector, st)
            total += s * float(np.sum(-((step.action.raw - mu) ** 2))) / (2 * sigma ** 2)
    return total / len(trajs)


@pytest.mark.parametrize("baseline", [False, True])
def test_epoch_gradient_matches_composite_finite_differences(baseline):
    # REINFORCE estimator == d/dW of mean_i s_i * ln pi(a_i | W) with the
    # sampled actions, states, and scales held fixed
    cfg = _tiny_cfg(baseline=baseline)
    f, w, pop0 = _tiny_setup(cfg)
    trajs = [sample_trajectory(w, f, pop0, cfg, stream(1, "t", l)) for l in range(3)]

    mean_ret = float(np.mean([t.total_return for t in trajs]))
    scales = [t.total_return - (mean_ret if baseline else 0.0) for t in trajs]

    analytic = epoch_gradient(w, trajs, cfg)
    eps = 1e-6
    for k in FIELD_ORDER:
        arr = getattr(w, k)
        numeric = np.zeros_like(arr)
        it = np.nditer(arr, flags=["multi_index"])
        for _ in it:
            ix = it.multi_index
            orig = arr[ix]
            arr[ix] = orig + eps
            hi = _replay_logdensity(w, trajs, scales, cfg.sigma, cfg.hidden)
            arr[ix] = orig - eps
            lo = _replay_logdensity(w, trajs, scales, cfg.sigma, cfg.hidden)
            arr[ix] = orig
            numeric[ix] = (hi - lo) / (2 * eps)
        a = getattr(analytic, k)
        rel = np.linalg.norm(a - numeric) / max(
            np.linalg.norm(a), np.linalg.norm(numeric), 1e-12)
        assert rel < 1e-5, (k, rel)


def test_epoch_gradient_zero_returns_zero_gradient():
    cfg = _tiny_cfg()
    f, w, pop0 = _tiny_setup(cfg)
    trajs = [sample_trajectory(w, f, pop0, cfg, stream(1, "t", l)) for l in range(2)]
    for tr in trajs:  # zero every return: every term is scaled by it
        tr.total_return = 0.0
    assert grad_norm(epoch_gradient(w, trajs, cfg)) == 0.0


def test_epoch_gradient_baseline_single_rollout_cancels():
    cfg = _tiny_cfg(baseline=True)
    f, w, pop0 = _tiny_setup(cfg)
    tr = sample_trajectory(w, f, pop0, cfg, stream(1, "t"))
    assert grad_norm(epoch_gradient(w, [tr], cfg)) == 0.0


def test_epoch_gradient_baseline_centers_per_function():
    cfg = _tiny_cfg(baseline=True)
    f, w, pop0 = _tiny_setup(cfg)
    # two synthetic trajectories with equal returns on one function: the
    # centered scales are both zero
    a = sample_trajectory(w, f, pop0, cfg, stream(2, "t", 0))
    b = sample_trajectory(w, f, pop0, cfg, stream(2, "t", 1))
    a.total_return = b.total_return = 1.25
    assert grad_norm(epoch_gradient(w, [a, b], cfg)) == 0.0


def test_epoch_gradient_requires_trajectories():
    with pytest.raises(ValueError):
        epoch_gradient(init_weights(4, 6, 4, stream(0, "w")), [], _tiny_cfg())


# ---------------------------------------------------------------- train
def test_train_zero_epochs_returns_seeded_init():
    cfg = _tiny_cfg(epochs=0)
    suite = make_suite(cfg.seed, 2, 2, 0)
    w, rows = train(suite.train, cfg)
    init = init_weights(cfg.hidden, cfg.input_size, cfg.pop_size,
                        stream(cfg.seed, "weights"))
    np.testing.assert_array_equal(flatten_weights(w), flatten_weights(init))
    assert rows == []


def test_train_alpha_zero_leaves_weights_unchanged():
    cfg = _tiny_cfg(alpha=0.0, epochs=3)
    suite = make_suite(cfg.seed, 2, 2, 0)
    w, rows = train(suite.train, cfg)
    init = init_weights(cfg.hidden, cfg.input_size, cfg.pop_size,
                        stream(cfg.seed, "weights"))
    np.testing.assert_array_equal(flatten_weights(w), flatten_weights(init))
    assert len(rows) == 3 * 2  # one row per (epoch, function)


def test_train_evaluation_accounting():
    cfg = _tiny_cfg(epochs=2, rollouts=3, horizon=4, pop_size=5)
    suite = make_suite(cfg.seed, 2, 2, 0)
    counted = [EvalCounter(f) for f in suite.train]
    train(counted, cfg)
    total = sum(c.count for c in counted)
    Q, M, L, N, T = 2, 2, 3, 5, 4
    assert total == Q * M * (L * N * T + N)


def test_train_log_rows_schema_and_order():
    cfg = _tiny_cfg(epochs=2)
    suite = make_suite(cfg.seed, 2, 3, 0)
    _, rows = train(suite.train, cfg)
    assert len(rows) == 2 * 3
    want_keys = {"epoch", "function_id", "mean_return", "return_std",
                 "grad_norm", "wallclock_ms"}
    assert all(set(r) == want_keys for r in rows)
    assert [r["epoch"] for r in rows] == [0, 0, 0, 1, 1, 1]
    assert [r["function_id"] for r in rows[:3]] == [f.id for f in suite.train]
    by_epoch = {r["epoch"]: r["grad_norm"] for r in rows}
    assert all(g > 0 for g in by_epoch.values())


def test_train_worker_count_does_not_change_results():
    cfg = _tiny_cfg(epochs=2, rollouts=3)
    suite = make_suite(cfg.seed, 2, 2, 0)
    w1, rows1 = train(suite.train, cfg, jobs=1)
    w2, rows2 = train(suite.train, cfg, jobs=2)
    np.testing.assert_array_equal(flatten_weights(w1), flatten_weights(w2))
    for a, b in zip(rows1, rows2):
        for key in ("epoch", "function_id", "mean_return", "return_std", "grad_norm"):
            assert a[key] == b[key]  # wallclock_ms may differ


def test_train_resume_is_bit_exact():
    cfg = _tiny_cfg(epochs=4)
    suite = make_suite(cfg.seed, 2, 2, 0)
    w_full, rows_full = train(suite.train, cfg)

    half = _tiny_cfg(epochs=2)
    w_half, rows_half = train(suite.train, half)
    w_res, rows_res = train(suite.train, cfg, weights=w_half, start_epoch=2)
    np.testing.assert_array_equal(flatten_weights(w_full), flatten_weights(w_res))
    full_tail = [(r["epoch"], r["mean_return"]) for r in rows_full[4:]]
    res_rows = [(r["epoch"], r["mean_return"]) for r in rows_res]
    assert full_tail == res_rows


def test_train_validation_errors():
    cfg = _tiny_cfg()
    suite = make_suite(cfg.seed, 2, 2, 0)
    with pytest.raises(ValueError):
        train([], cfg)
    with pytest.raises(ValueError):
        train(suite.train, _tiny_cfg(n_functions=3))
    mixed = [suite.train[0], make_suite(1, 3, 1, 0).train[0]]
    with pytest.raises(ValueError):
        train(mixed, cfg)
    with pytest.raises(ValueError):
        train(suite.train, cfg, start_epoch=9)
    wrong = init_weights(cfg.hidden, cfg.input_size + 1, cfg.pop_size, stream(0, "w"))
    with pytest.raises(ValueError):
        train(suite.train, cfg, weights=wrong)


def test_train_divergence_carries_last_good_state():
    cfg = _tiny_cfg(alpha=math.inf, epochs=2)
    suite = make_suite(cfg.seed, 2, 1, 0)
    with pytest.raises(NumericFailure) as err:
        train(suite.train, cfg)
    last_good = err.value.last_good
    assert last_good["epochs_done"] == 0
    init = init_weights(cfg.hidden, cfg.input_size, cfg.pop_size,
                        stream(cfg.seed, "weights"))
    np.testing.assert_array_equal(
        flatten_weights(last_good["weights"]), flatten_weights(init))


def test_train_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(pop_size=3)
    with pytest.raises(ValueError):
        TrainConfig(rollouts=0)
    with pytest.raises(ValueError):
        TrainConfig(alpha=-0.1)
    with pytest.raises(ValueError):
        TrainConfig(sigma=0.0)
    with pytest.raises(ValueError):
        TrainConfig(p_best=0.0)
    assert TrainConfig().input_size == 20 + 2 * 5
