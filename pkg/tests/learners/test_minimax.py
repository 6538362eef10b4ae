import numpy as np
import pytest

from isoreg.game_engine.core import (
    NoiseFreeViolation,
    UnsupportedScenarioError,
)
from isoreg.game_engine.learners import LearnerConfig
from isoreg.game_engine.learners.minimax import (
    MinimaxAnyOrderLearner,
    MinimaxIsotonicLearner,
    SegmentState,
    _split_value,
    minimax_alpha_table,
    minimax_anyorder_predict,
    minimax_beta_table,
    minimax_isotonic_predict,
)


def test_beta_table_small_values():
    beta = minimax_beta_table(3)
    np.testing.assert_allclose(beta, [0.0, 0.25, 25 / 64, 0.5], rtol=1e-15)


def test_beta_table_below_log_bound():
    beta = minimax_beta_table(256)
    ns = np.arange(257)
    assert np.all(beta <= 0.25 * np.log2(ns + 1) + 1e-12)
    assert np.all(np.diff(beta) >= 0.0)
    # Powers of two minus one reach the bound.
    for k in range(1, 9):
        assert beta[2**k - 1] == pytest.approx(k / 4.0)


@pytest.mark.parametrize("step", [1e-3, 0.25, 2.0])
def test_split_value_is_monotone_in_both_runs(step):
    beta = minimax_beta_table(200)
    for n in range(1, 201):
        ks = np.arange(n + 1)
        left, right = beta[ks], beta[n - ks]
        base = _split_value(left, right)
        assert np.all(_split_value(left + step, right) >= base - 1e-12)
        assert np.all(_split_value(left, right + step) >= base - 1e-12)


def test_split_value_is_continuous_at_the_clamp():
    # |beta_k - beta_{n-k}| = 1 is where the prediction hits u or v.
    right = np.array([0.0, 0.3, 1.7])
    inside = _split_value(right + 1.0, right)
    outside = _split_value(right + 1.0 + 1e-9, right)
    np.testing.assert_allclose(inside, right + 1.0, rtol=1e-12)
    np.testing.assert_allclose(outside, inside, atol=1e-8)


def test_alpha_table():
    alpha = minimax_alpha_table(64)
    assert alpha[0] == 0.0
    assert alpha[1] == pytest.approx(0.25)
    assert alpha[2] == pytest.approx(0.390625)
    assert alpha[3] == pytest.approx((89 / 128) ** 2)
    assert np.all(np.diff(alpha) > 0.0)
    assert alpha[-1] < 1.0


def test_isotonic_predict():
    alpha = minimax_alpha_table(4)
    assert minimax_isotonic_predict(0.0, 1, alpha) == pytest.approx(0.5)
    assert minimax_isotonic_predict(0.0, 2, alpha) == pytest.approx(0.375)
    assert minimax_isotonic_predict(1.0, 3, alpha) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        minimax_isotonic_predict(0.0, 0, alpha)


def test_anyorder_first_predictions():
    assert minimax_anyorder_predict(SegmentState.create(1), 0) == 0.5
    assert minimax_anyorder_predict(SegmentState.create(3), 1) == 0.5
    # Left end of two unknowns agrees with the isotonic-order value.
    pair = SegmentState.create(2)
    assert minimax_anyorder_predict(pair, 0) == pytest.approx(0.375)
    assert minimax_anyorder_predict(pair, 1) == pytest.approx(0.625)


def test_segment_split():
    state = SegmentState.create(5)
    state.split(2, 0.4)
    assert [(s.u, s.v, s.start, s.stop) for s in state.segments] == [
        (0.0, 0.4, 0, 2),
        (0.4, 1.0, 3, 5),
    ]
    assert 0.0 <= minimax_anyorder_predict(state, 0) <= 0.4
    assert 0.4 <= minimax_anyorder_predict(state, 4) <= 1.0
    # Boundary labels are feasible.
    state.split(3, 0.4)
    with pytest.raises(NoiseFreeViolation):
        state.split(0, 0.5)


def test_anyorder_learner_bound():
    learner = MinimaxAnyOrderLearner(LearnerConfig(name="minimax-any"), 7)
    assert learner.regret_bound() == pytest.approx(0.75)
    assert learner.bound_requires_noise_free


def test_isotonic_learner_protocol():
    learner = MinimaxIsotonicLearner(LearnerConfig(name="minimax-iso"), 3)
    with pytest.raises(UnsupportedScenarioError):
        learner.predict(1)
    assert learner.predict(0) == pytest.approx((1.0 - 25 / 64) / 2.0)
    learner.observe(0, 0.5)
    learner.predict(1)
    with pytest.raises(NoiseFreeViolation):
        learner.observe(1, 0.25)
    assert learner.regret_bound() == pytest.approx(minimax_alpha_table(3)[3])
