import itertools

import numpy as np
import pytest

from isoreg.game_engine.adversaries import (
    AdversaryConfig,
    BaseAdversary,
    adversary_registry,
)
from isoreg.game_engine.adversaries.generators import (
    coin_flips,
    default_segments,
    gd_killer,
    lower_bound_probabilities,
    lower_bound_sequence,
    noisy_isotonic,
    parse_omega,
    random_isotonic,
    random_order,
)
from isoreg.game_engine.core import ProtocolError


def test_lower_bound_probabilities_two_segments():
    pairs = {
        tuple(lower_bound_probabilities(2, omega))
        for omega in itertools.product((0, 1), repeat=2)
    }
    assert pairs == {(0.25, 0.5), (0.25, 0.75), (0.5, 0.5), (0.5, 0.75)}


@pytest.mark.parametrize("omega", list(itertools.product((0, 1), repeat=4)))
def test_lower_bound_probabilities_are_isotonic(omega):
    p = lower_bound_probabilities(4, omega)
    assert np.all(np.diff(p) >= 0.0)
    assert p.min() >= 0.25 and p.max() <= 0.75


def test_lower_bound_probabilities_validate_omega():
    with pytest.raises(ValueError):
        lower_bound_probabilities(2, [0, 2])
    with pytest.raises(ValueError):
        lower_bound_probabilities(3, [0, 1])
    np.testing.assert_array_equal(parse_omega("0110"), [0, 1, 1, 0])
    assert parse_omega("") is None


def test_default_segments():
    assert default_segments(64) == 4
    assert default_segments(1) == 1


def test_lower_bound_sequence_is_deterministic():
    a, order = lower_bound_sequence(64, seed=3)
    b, _ = lower_bound_sequence(64, seed=3)
    np.testing.assert_array_equal(a.labels, b.labels)
    assert order.is_isotonic
    assert set(np.unique(a.labels)) <= {0.0, 1.0}


def test_lower_bound_segment_means_track_their_probabilities():
    horizon, k = 216, 6
    size = horizon // k
    outside, total = 0, 0
    for seed in range(100):
        omega = [(seed >> j) & 1 for j in range(k)]
        labels, _ = lower_bound_sequence(horizon, k=k, omega=omega, seed=seed)
        means = labels.labels.reshape(k, size).mean(axis=1)
        p = lower_bound_probabilities(k, omega)
        sigma = np.sqrt(p * (1.0 - p) / size)
        outside += int(np.sum(np.abs(means - p) > 3.0 * sigma))
        total += k
    # About 0.3% of means should land outside a 3 sigma band.
    assert outside <= 0.02 * total


def test_lower_bound_sequence_uneven_segments():
    labels, _ = lower_bound_sequence(10, k=3, omega=[1, 1, 1], seed=0)
    assert len(labels) == 10
    # More segments than trials collapses to one segment per trial.
    labels, _ = lower_bound_sequence(3, k=5, seed=0)
    assert len(labels) == 3


def test_gd_killers():
    zeros, order = gd_killer(3, "zeros")
    assert order.indices == (0, 1, 2) and not zeros.labels.any()
    ones, order = gd_killer(3, "ones")
    assert order.indices == (2, 1, 0) and ones.labels.all()
    with pytest.raises(ValueError):
        gd_killer(3, "halves")


def test_random_sequences():
    labels, _ = random_isotonic(50, seed=1)
    assert labels.noise_free
    assert np.all(np.diff(labels.labels) >= 0.0)

    noisy, _ = noisy_isotonic(50, sigma=0.0, seed=1)
    np.testing.assert_array_equal(noisy.labels, labels.labels)
    noisy, _ = noisy_isotonic(50, sigma=0.3, seed=1)
    assert noisy.labels.min() >= 0.0 and noisy.labels.max() <= 1.0
    with pytest.raises(ValueError):
        noisy_isotonic(5, sigma=-1.0)

    assert sorted(random_order(20, seed=4)) == list(range(20))
    coins, _ = coin_flips(20, seed=4)
    assert set(np.unique(coins.labels)) <= {0.0, 1.0}


def test_registry():
    expected = {
        "lb-segments",
        "gd-killer-zeros",
        "gd-killer-ones",
        "random-iso",
        "noisy-iso",
        "random-order",
        "coin-flips",
        "fixed",
        "midpoint",
        "greedy-iso",
    }
    assert expected <= set(adversary_registry)
    with pytest.raises(ValueError, match="valid"):
        BaseAdversary.from_name("nobody", 4)


def test_sequence_adversary_protocol():
    adversary = BaseAdversary.from_name("gd-killer-ones", 2)
    assert adversary.noise_free
    with pytest.raises(ProtocolError):
        adversary.label(0.5)
    assert adversary.next_index() == 1
    assert adversary.label(0.5) == 1.0
    adversary.next_index()
    adversary.label(0.5)
    with pytest.raises(ProtocolError):
        adversary.next_index()


def test_fixed_adversary():
    config = AdversaryConfig(name="fixed", labels="0,0.5,0.25", order="2,0,1")
    adversary = BaseAdversary.from_name("fixed", 3, config)
    assert not adversary.noise_free
    assert adversary.next_index() == 2
    assert adversary.label(0.0) == 0.25
    with pytest.raises(ValueError):
        BaseAdversary.from_name("fixed", 3)
    with pytest.raises(ValueError):
        BaseAdversary.from_name("fixed", 2, config)
