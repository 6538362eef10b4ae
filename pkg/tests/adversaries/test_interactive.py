import numpy as np
import pytest

from isoreg.game_engine.adversaries import AdversaryConfig, BaseAdversary
from isoreg.game_engine.core import LossKind, anyorder_minimax_value_bound
from isoreg.game_engine.engine import run_game
from isoreg.game_engine.learners import BaseLearner, LearnerConfig
from isoreg.game_engine.learners.minimax import minimax_alpha_table


def _play(learner_name, adversary_name, horizon, **learner_params):
    learner = BaseLearner.from_name(
        learner_name,
        horizon,
        LossKind.SQUARED,
        LearnerConfig(name=learner_name, **learner_params),
    )
    adversary = BaseAdversary.from_name(
        adversary_name, horizon, AdversaryConfig(name=adversary_name)
    )
    return run_game(learner, adversary, horizon)


def test_midpoint_single_trial():
    result = _play("constant", "midpoint", 1)
    assert result.transcript.trials[0].label == 1.0
    assert result.learner_loss == pytest.approx(0.25)


@pytest.mark.parametrize("horizon", [1, 3, 7, 15])
def test_midpoint_against_minimax_reaches_value(horizon):
    result = _play("minimax-any", "midpoint", horizon)
    assert result.learner_loss == pytest.approx(
        anyorder_minimax_value_bound(horizon), abs=1e-9
    )
    assert result.oracle_loss == 0.0


@pytest.mark.parametrize("learner", ["constant", "ew-net", "eg", "ogd"])
def test_midpoint_forces_log_loss_on_every_learner(learner):
    result = _play(learner, "midpoint", 15)
    assert np.all(np.diff(result.transcript.labels_by_position()) >= 0.0)
    assert result.learner_loss >= 1.0 - 1e-12


@pytest.mark.parametrize("horizon", [2, 5, 10])
def test_midpoint_reveals_everything_for_any_horizon(horizon):
    result = _play("constant", "midpoint", horizon)
    assert result.transcript.complete
    indices = sorted(t.index for t in result.transcript.trials)
    assert indices == list(range(horizon))


@pytest.mark.parametrize("horizon", [1, 2, 4, 9])
def test_greedy_against_minimax_isotonic(horizon):
    result = _play("minimax-iso", "greedy-iso", horizon)
    assert result.learner_loss == pytest.approx(
        minimax_alpha_table(horizon)[horizon], abs=1e-9
    )
    assert result.regret == pytest.approx(result.learner_loss)


def test_greedy_labels_are_isotonic():
    result = _play("ew-net", "greedy-iso", 16)
    labels = result.transcript.labels_by_position()
    assert np.all(np.diff(labels) >= 0.0)
    assert result.learner_loss >= minimax_alpha_table(16)[16] - 1e-9
