import math

import jax.numpy as jnp
import numpy as np
import pytest

from isoreg.game_engine.core import (
    LossKind,
    NetTooLargeError,
    ProtocolError,
    ew_net_regret_bound,
    ew_squared_regret_bound,
)
from isoreg.game_engine.learners import LearnerConfig, net
from isoreg.game_engine.learners.net import (
    ENTROPIC_ETA,
    SQUARED_ETA,
    EwEntropicLearner,
    EwNetLearner,
    NetWeightsState,
    ew_entropic_grid,
    ew_net_naive_predict,
    ew_net_observe,
    ew_net_predict,
    ew_net_predict_isotonic_fast,
    log_partition,
    squared_grid,
)


def _state(horizon, k, eta=SQUARED_ETA, kind=LossKind.SQUARED):
    grid = squared_grid(k) if kind is LossKind.SQUARED else ew_entropic_grid(k)
    return NetWeightsState.create(horizon, grid, eta, kind)


def test_squared_grid():
    np.testing.assert_allclose(squared_grid(2), [0.0, 0.5, 1.0])
    with pytest.raises(ValueError):
        squared_grid(0)


def test_entropic_grid():
    z = np.asarray(ew_entropic_grid(2))
    s = math.sin(math.pi / 8) ** 2
    np.testing.assert_allclose(z, [s, 0.5, 1.0 - s], rtol=1e-12)
    for k in (2, 3, 7):
        z = np.asarray(ew_entropic_grid(k))
        np.testing.assert_allclose(z + z[::-1], 1.0, atol=1e-12)
        assert np.all(np.diff(z) > 0)
    np.testing.assert_allclose(ew_entropic_grid(1), [0.5, 0.5])


def test_observe_sets_squared_factor_row():
    state = ew_net_observe(_state(3, 2), 1, 0.0)
    np.testing.assert_allclose(
        state.beta[1], [1.0, math.exp(-1 / 8), math.exp(-1 / 2)], rtol=1e-12
    )
    np.testing.assert_allclose(state.beta[0], 1.0)
    assert state.num_labeled == 1
    # Out of isotonic order, the prefix cache does not move.
    assert state.prefix_len == 0


def test_observe_label_on_grid_has_unit_factor():
    state = ew_net_observe(_state(2, 4), 0, 0.75)
    assert float(state.beta[0, 3]) == pytest.approx(1.0)


def test_entropic_factor_row():
    state = _state(2, 3, ENTROPIC_ETA, LossKind.ENTROPIC)
    z = np.asarray(state.grid)
    state = ew_net_observe(state, 0, 0.0)
    np.testing.assert_allclose(state.beta[0], 1.0 - z, rtol=1e-12)


def test_single_trial_predicts_half():
    assert ew_net_predict(_state(1, 1), 0) == pytest.approx(0.5)
    assert ew_net_predict(_state(5, 3), 2) == pytest.approx(0.5)


def test_fresh_prediction_matches_level_counts():
    # T=3, K=2: 6, 3 and 1 members have f_0 at levels 0, 1 and 2.
    assert ew_net_predict(_state(3, 2), 0) == pytest.approx(0.25)
    assert ew_net_predict_isotonic_fast(_state(3, 2), 0) == pytest.approx(0.25)


def test_prediction_after_one_label():
    state = ew_net_observe(_state(2, 1), 0, 0.0)
    expected = (1.0 + math.exp(-0.5)) / (2.0 + math.exp(-0.5))
    assert ew_net_predict(state, 1) == pytest.approx(expected, rel=1e-12)


@pytest.mark.parametrize("seed", range(8))
@pytest.mark.parametrize("kind", [LossKind.SQUARED, LossKind.ENTROPIC])
def test_sweeps_match_enumeration(seed, kind):
    rng = np.random.default_rng(seed)
    horizon = int(rng.integers(1, 7))
    if kind is LossKind.SQUARED:
        k, eta = int(rng.integers(1, 4)), SQUARED_ETA
        grid = squared_grid(k)
    else:
        k, eta = int(rng.integers(2, 4)), ENTROPIC_ETA
        grid = ew_entropic_grid(k)
    state = NetWeightsState.create(horizon, grid, eta, kind)
    history = []
    for index in rng.permutation(horizon):
        index = int(index)
        naive = ew_net_naive_predict(grid, history, index, horizon, eta, kind)
        assert ew_net_predict(state, index) == pytest.approx(naive, rel=1e-9)
        y = float(rng.uniform())
        state = ew_net_observe(state, index, y)
        history.append((index, y))


@pytest.mark.parametrize("horizon, k", [(20, 3), (50, 10)])
def test_fast_path_matches_sweeps(horizon, k):
    rng = np.random.default_rng(horizon)
    state = _state(horizon, k)
    for t in range(horizon):
        fast = ew_net_predict_isotonic_fast(state, t)
        assert fast == pytest.approx(ew_net_predict(state, t), abs=1e-10)
        state = ew_net_observe(state, t, float(rng.uniform()))
    assert state.prefix_len == horizon


def test_observe_compiles_once_per_game_shape():
    # A shape no other test uses, so the kernel cache starts without it.
    rng = np.random.default_rng(11)
    state = ew_net_observe(_state(97, 6), 0, 0.5)
    before = net._observe_kernel._cache_size()
    for index in range(1, 97):
        state = ew_net_observe(state, index, float(rng.uniform()))
    assert net._observe_kernel._cache_size() == before
    assert state.num_labeled == state.prefix_len == 97


def test_prefix_stops_at_the_first_gap():
    state = _state(4, 2)
    for index in (0, 2, 1):
        state = ew_net_observe(state, index, 1.0)
    assert state.num_labeled == 3
    assert state.prefix_len == 2


def test_fast_path_requires_isotonic_order():
    state = ew_net_observe(_state(4, 2), 2, 1.0)
    with pytest.raises(ProtocolError, match="isotonic"):
        ew_net_predict_isotonic_fast(state, 0)


def test_repeated_index_is_rejected():
    state = ew_net_observe(_state(3, 2), 1, 0.5)
    with pytest.raises(ProtocolError):
        ew_net_predict(state, 1)
    with pytest.raises(ProtocolError):
        ew_net_observe(state, 1, 0.5)
    with pytest.raises(ProtocolError):
        ew_net_predict(state, 3)


def test_log_partition_before_any_label():
    expected = math.log(math.comb(9, 3))
    assert log_partition(_state(6, 3)) == pytest.approx(expected)


def test_log_partition_stays_finite_on_long_games():
    state = _state(2000, 8)
    for t in range(0, 2000, 97):
        state = ew_net_observe(state, t, 1.0 if t % 2 else 0.0)
    assert math.isfinite(log_partition(state))
    assert 0.0 <= ew_net_predict(state, 1) <= 1.0


def test_naive_refuses_large_nets():
    with pytest.raises(NetTooLargeError):
        ew_net_naive_predict(jnp.linspace(0, 1, 11), [], 0, 40, max_size=1000)


class TestEwNetLearner:
    def test_tuned_learner_carries_tuned_bound(self):
        learner = EwNetLearner(LearnerConfig(), 1000)
        assert learner.k == 4
        expected = ew_squared_regret_bound(1000)
        assert learner.regret_bound() == pytest.approx(expected)

    def test_explicit_k_carries_net_bound(self):
        learner = EwNetLearner(LearnerConfig(k=6), 100)
        expected = ew_net_regret_bound(100, 6)
        assert learner.regret_bound() == pytest.approx(expected)

    def test_explicit_eta_drops_bound(self):
        assert EwNetLearner(LearnerConfig(eta=0.1), 100).regret_bound() is None

    def test_fast_and_slow_paths_agree(self):
        fast = EwNetLearner(LearnerConfig(k=3), 12)
        slow = EwNetLearner(LearnerConfig(k=3, fast_path=False), 12)
        for t in range(12):
            assert fast.predict(t) == pytest.approx(slow.predict(t), abs=1e-10)
            y = (t % 3) / 2.0
            fast.observe(t, y)
            slow.observe(t, y)

    def test_rejects_entropic_loss(self):
        with pytest.raises(ValueError, match="does not support"):
            EwNetLearner(LearnerConfig(), 10, LossKind.ENTROPIC)


class TestEwEntropicLearner:
    def test_needs_two_levels(self):
        with pytest.raises(ValueError, match="K >= 2"):
            EwEntropicLearner(LearnerConfig(name="ew-entropic", k=1), 10)

    def test_predictions_stay_inside_grid_range(self):
        learner = EwEntropicLearner(LearnerConfig(name="ew-entropic"), 32)
        z = np.asarray(learner.state.grid)
        for t in range(32):
            prediction = learner.predict(t)
            assert z[0] - 1e-12 <= prediction <= z[-1] + 1e-12
            learner.observe(t, 1.0 if t > 20 else 0.0)


def test_naive_learner_matches_net_learner():
    config = LearnerConfig(name="ew-net-naive", k=2)
    naive = net.EwNaiveLearner(config, 5)
    dp = EwNetLearner(LearnerConfig(k=2, fast_path=False), 5)
    for index, y in zip((3, 0, 4, 1, 2), (0.7, 0.1, 0.9, 0.3, 0.5)):
        assert naive.predict(index) == pytest.approx(dp.predict(index), rel=1e-9)
        naive.observe(index, y)
        dp.observe(index, y)
