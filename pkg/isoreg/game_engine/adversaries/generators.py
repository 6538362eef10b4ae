"""Label sequences and reveal orders fixed ahead of the game.

Randomness comes from jax.random threefry keys: every generator folds a
component id into `PRNGKey(seed)`, so streams are reproducible per
(seed, component).
"""

from typing import Optional, Sequence, Tuple

import jax
import jax.numpy as jnp
import numpy as np
from absl import logging

from isoreg.game_engine.adversaries.base import (
    AdversaryConfig,
    SequenceAdversary,
    register,
)
from isoreg.game_engine.core import LabelSequence, RevealOrder


# Component ids for key derivation.
_OMEGA, _BERNOULLI, _UNIFORM, _NOISE, _ORDER, _COINS = range(6)

# Noise is drawn from a standard normal truncated to +-2, then scaled.
_NOISE_TRUNCATION = 2.0

Generated = Tuple[LabelSequence, RevealOrder]


def _key(seed: int, component: int) -> jax.Array:
    return jax.random.fold_in(jax.random.PRNGKey(seed), component)


def default_segments(horizon: int) -> int:
    """K = round(T^(1/3)), at least 1."""
    return max(1, round(horizon ** (1.0 / 3.0)))


def lower_bound_probabilities(k: int, omega: Sequence[int]) -> np.ndarray:
    """p_j = 1/4 + (j + omega_j) / (2K) for 0-based segment j."""
    omega = np.asarray(omega, dtype=np.int64)
    if omega.shape != (k,) or np.any((omega != 0) & (omega != 1)):
        raise ValueError(
            f"omega must be a bit vector of length {k}, got {omega}"
        )
    return 0.25 + (np.arange(k) + omega) / (2.0 * k)


def parse_omega(bits: str) -> Optional[np.ndarray]:
    if not bits:
        return None
    return np.asarray([int(b) for b in bits.strip()], dtype=np.int64)


def lower_bound_sequence(
    horizon: int,
    k: Optional[int] = None,
    omega: Optional[Sequence[int]] = None,
    seed: int = 0,
) -> Generated:
    """Segmented Bernoulli labels in isotonic order.

    Position t falls in segment min(t // (T // K), K - 1), so the last segment
    absorbs the remainder when K does not divide T.
    """
    k = k if k is not None else default_segments(horizon)
    if k < 1:
        raise ValueError(f"Need at least one segment, got K={k}")
    if k > horizon:
        logging.warning(f"K={k} exceeds T={horizon}; using K={horizon}")
        k = horizon
    if horizon % k:
        logging.warning(
            f"K={k} does not divide T={horizon}; last segment is longer"
        )
    if omega is None:
        bits = jax.random.bernoulli(_key(seed, _OMEGA), 0.5, (k,))
        omega = np.asarray(bits, dtype=np.int64)
    p = lower_bound_probabilities(k, omega)

    segment = np.minimum(np.arange(horizon) // (horizon // k), k - 1)
    draws = jax.random.bernoulli(_key(seed, _BERNOULLI), jnp.asarray(p[segment]))
    labels = np.asarray(draws, dtype=np.float64)
    return LabelSequence(labels), RevealOrder.isotonic(horizon)


def gd_killer(horizon: int, variant: str = "zeros") -> Generated:
    """All zeros in isotonic order, or all ones in antitonic order."""
    if variant == "zeros":
        labels = LabelSequence(np.zeros(horizon), noise_free=True)
        return labels, RevealOrder.isotonic(horizon)
    if variant == "ones":
        labels = LabelSequence(np.ones(horizon), noise_free=True)
        return labels, RevealOrder.antitonic(horizon)
    raise ValueError(f"Unknown killer variant {variant!r} (valid: zeros, ones)")


def _sorted_uniform(horizon: int, seed: int) -> np.ndarray:
    draws = jax.random.uniform(
        _key(seed, _UNIFORM), (horizon,), dtype=jnp.float64
    )
    return np.sort(np.asarray(draws))


def random_isotonic(horizon: int, seed: int = 0) -> Generated:
    labels = LabelSequence(_sorted_uniform(horizon, seed), noise_free=True)
    return labels, RevealOrder.isotonic(horizon)


def noisy_isotonic(horizon: int, sigma: float, seed: int = 0) -> Generated:
    """Sorted uniforms plus sigma-scaled truncated normal noise, clipped."""
    if sigma < 0.0:
        raise ValueError(f"Noise level must be non-negative, got sigma={sigma}")
    base = _sorted_uniform(horizon, seed)
    noise = jax.random.truncated_normal(
        _key(seed, _NOISE),
        -_NOISE_TRUNCATION,
        _NOISE_TRUNCATION,
        (horizon,),
        dtype=jnp.float64,
    )
    labels = np.clip(base + sigma * np.asarray(noise), 0.0, 1.0)
    return LabelSequence(labels), RevealOrder.isotonic(horizon)


def random_order(horizon: int, seed: int = 0) -> RevealOrder:
    permutation = jax.random.permutation(_key(seed, _ORDER), horizon)
    return RevealOrder(tuple(np.asarray(permutation)))


def coin_flips(horizon: int, seed: int = 0) -> Generated:
    """Fair coin labels in a random order."""
    coins = jax.random.bernoulli(_key(seed, _COINS), 0.5, (horizon,))
    labels = LabelSequence(np.asarray(coins, dtype=np.float64))
    return labels, random_order(horizon, seed)


@register
class LowerBoundAdversary(SequenceAdversary):
    name = "lb-segments"

    def build(self):
        return lower_bound_sequence(
            self.horizon,
            self.config.k,
            parse_omega(self.config.omega),
            self.config.seed,
        )


@register
class ZerosKillerAdversary(SequenceAdversary):
    name = "gd-killer-zeros"
    noise_free = True

    def build(self):
        return gd_killer(self.horizon, "zeros")


@register
class OnesKillerAdversary(SequenceAdversary):
    name = "gd-killer-ones"
    noise_free = True

    def build(self):
        return gd_killer(self.horizon, "ones")


@register
class RandomIsotonicAdversary(SequenceAdversary):
    name = "random-iso"
    noise_free = True

    def build(self):
        return random_isotonic(self.horizon, self.config.seed)


@register
class NoisyIsotonicAdversary(SequenceAdversary):
    name = "noisy-iso"

    def build(self):
        return noisy_isotonic(self.horizon, self.config.sigma, self.config.seed)


@register
class RandomOrderAdversary(SequenceAdversary):
    """Random isotonic labels revealed in a random order."""

    name = "random-order"
    noise_free = True

    def build(self):
        labels, _ = random_isotonic(self.horizon, self.config.seed)
        return labels, random_order(self.horizon, self.config.seed)


@register
class CoinFlipAdversary(SequenceAdversary):
    name = "coin-flips"

    def build(self):
        return coin_flips(self.horizon, self.config.seed)


@register
class FixedAdversary(SequenceAdversary):
    """Labels and order given in the config as comma-separated lists."""

    name = "fixed"

    def __init__(self, config: AdversaryConfig, horizon: int):
        if not config.labels:
            raise ValueError(
                "The fixed adversary needs labels, e.g. labels='0,0.5,1'"
            )
        super().__init__(config, horizon)

    def build(self):
        labels = LabelSequence([float(y) for y in self.config.labels.split(",")])
        if self.config.order:
            indices = self.config.order.split(",")
            order = RevealOrder(tuple(int(i) for i in indices))
        else:
            order = RevealOrder.isotonic(len(labels))
        return labels, order
