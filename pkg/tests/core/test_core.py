import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from isoreg.game_engine.core import (
    GameTranscript,
    InfiniteLossError,
    IsotonicFunction,
    LabelSequence,
    LossKind,
    NoiseFreeViolation,
    ProtocolError,
    RevealOrder,
    covering_net_members,
    covering_net_size,
    enumerate_covering_net,
    loss,
    loss_derivative,
    tune_k_entropic,
    tune_k_squared,
)

unit = st.floats(min_value=0.0, max_value=1.0)
interior = st.floats(min_value=1e-6, max_value=1.0 - 1e-6)


@pytest.mark.parametrize(
    "kind, y, y_hat, expected",
    [
        (LossKind.SQUARED, 1.0, 0.5, 0.25),
        (LossKind.SQUARED, 0.0, 0.0, 0.0),
        (LossKind.ABSOLUTE, 0.3, 0.3, 0.0),
        (LossKind.ABSOLUTE, 1.0, 0.25, 0.75),
        (LossKind.ENTROPIC, 0.5, 0.5, math.log(2.0)),
        (LossKind.ENTROPIC, 0.0, 0.0, 0.0),
        (LossKind.ENTROPIC, 1.0, 1.0, 0.0),
    ],
)
def test_loss_values(kind, y, y_hat, expected):
    assert loss(kind, y, y_hat) == pytest.approx(expected, abs=1e-15)


def test_entropic_loss_infinite_at_mismatched_boundary():
    with pytest.raises(InfiniteLossError):
        loss(LossKind.ENTROPIC, 1.0, 0.0)
    with pytest.raises(InfiniteLossError):
        loss_derivative(LossKind.ENTROPIC, 0.5, 1.0)


def test_loss_kind_from_name():
    assert LossKind.from_name("entropic") is LossKind.ENTROPIC
    with pytest.raises(ValueError, match="valid"):
        LossKind.from_name("hinge")


@settings(deadline=None, max_examples=200)
@given(y=unit, y_hat=interior)
def test_losses_are_symmetric(y, y_hat):
    for kind in LossKind:
        assert loss(kind, y, y_hat) == pytest.approx(
            loss(kind, 1.0 - y, 1.0 - y_hat), rel=1e-9, abs=1e-12
        )


@settings(deadline=None, max_examples=200)
@given(y=unit, a=interior, b=interior)
def test_losses_are_convex_in_prediction(y, a, b):
    for kind in LossKind:
        mid = loss(kind, y, (a + b) / 2.0)
        assert mid <= (loss(kind, y, a) + loss(kind, y, b)) / 2.0 + 1e-12


def test_squared_derivative():
    assert loss_derivative(LossKind.SQUARED, 0.0, 0.5) == 1.0
    assert loss_derivative(LossKind.ABSOLUTE, 0.5, 0.5) == 0.0


@pytest.mark.parametrize(
    "horizon, k", itertools.product(range(1, 7), range(0, 4))
)
def test_covering_net_size_matches_enumeration(horizon, k):
    members = list(enumerate_covering_net(horizon, k))
    assert covering_net_size(horizon, k) == len(members)
    assert all(list(f) == sorted(f) for f in members)
    if k >= 1:
        array = covering_net_members(horizon, k)
        assert array.shape == (len(members), horizon)
        assert np.all(np.diff(array, axis=1) >= 0)


def test_covering_net_size_small_cases():
    assert covering_net_size(3, 1) == 4
    assert covering_net_size(2, 2) == 6
    assert covering_net_size(5, 0) == 1
    with pytest.raises(ValueError):
        covering_net_size(0, 1)


def test_tune_k_squared():
    assert tune_k_squared(1000) == 4
    assert tune_k_squared(1) == 1
    expected = math.ceil((8 / (4 * math.log(9))) ** (1 / 3))
    assert tune_k_squared(8) == max(1, expected)


def test_tune_k_entropic():
    assert tune_k_entropic(1) == 3
    assert tune_k_entropic(1000) == 12
    ks = [tune_k_entropic(t) for t in range(1, 2000, 7)]
    assert min(ks) >= 2


class TestIsotonicFunction:
    def test_rejects_decreasing(self):
        with pytest.raises(ValueError, match="non-decreasing"):
            IsotonicFunction(np.array([0.5, 0.4]))

    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError, match=r"\[0, 1\]"):
            IsotonicFunction(np.array([0.0, 1.5]))

    def test_diagonal(self):
        np.testing.assert_allclose(
            IsotonicFunction.diagonal(4).values, [0.25, 0.5, 0.75, 1.0]
        )

    def test_from_name(self):
        assert IsotonicFunction.from_name("half", 3)[2] == 0.5
        with pytest.raises(ValueError):
            IsotonicFunction.from_name("ramp", 3)


def test_reveal_order_must_be_a_permutation():
    with pytest.raises(ProtocolError):
        RevealOrder((0, 0, 1))
    assert RevealOrder.isotonic(3).is_isotonic
    assert tuple(RevealOrder.antitonic(3)) == (2, 1, 0)


def test_noise_free_labels_must_be_isotonic():
    LabelSequence(np.array([0.0, 0.5, 0.5]), noise_free=True)
    with pytest.raises(NoiseFreeViolation):
        LabelSequence(np.array([1.0, 0.0]), noise_free=True)
    with pytest.raises(ValueError):
        LabelSequence(np.array([1.5]))


@pytest.mark.parametrize(
    "labels", [[0.2, math.nan], [math.nan], [0.0, -math.inf], [math.inf]]
)
def test_label_sequence_rejects_non_finite_labels(labels):
    with pytest.raises(ValueError):
        LabelSequence(np.array(labels))


def test_label_sequence_accepts_empty_and_boundary_labels():
    assert len(LabelSequence(np.array([]))) == 0
    assert LabelSequence(np.array([0.0, 1.0]))[1] == 1.0


class TestGameTranscript:
    def test_labels_by_position(self):
        transcript = GameTranscript(3)
        transcript.record(2, 0.5, 1.0)
        transcript.record(0, 0.5, 0.0)
        assert 2 in transcript and 1 not in transcript
        with pytest.raises(ProtocolError):
            transcript.labels_by_position()
        transcript.record(1, 0.5, 0.5)
        labels = transcript.labels_by_position()
        np.testing.assert_array_equal(labels, [0, 0.5, 1])
        assert transcript.order.indices == (2, 0, 1)
        assert transcript.learner_loss() == pytest.approx(0.5)

    def test_rejects_repeats_and_out_of_range(self):
        transcript = GameTranscript(2)
        transcript.record(0, 0.5, 0.0)
        with pytest.raises(ProtocolError):
            transcript.record(0, 0.5, 0.0)
        with pytest.raises(ProtocolError):
            transcript.record(2, 0.5, 0.0)
