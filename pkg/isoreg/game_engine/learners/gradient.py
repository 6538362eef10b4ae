"""First-order learners: Exponentiated Gradient, OGD and FTRL."""

import math
from typing import Optional, Sequence, Tuple

import jax
import jax.numpy as jnp
import numpy as np
import optax
from absl import logging
from jaxtyping import Array, Float

from isoreg.game_engine.core import (
    IsotonicFunction,
    LossKind,
    eg_noise_free_regret_bound,
    eg_regret_bound,
    loss_derivative,
)
from isoreg.game_engine.learners.base import BaseLearner, LearnerConfig, register
from isoreg.game_engine.oracle import project_isotonic_box, weighted_isotonic_box


_SIMPLEX_TOL = 1e-9


########################################################
# Exponentiated Gradient on the increment simplex
########################################################
def eg_default_eta(horizon: int) -> float:
    """eta = 2 sqrt(ln(T+1)) / (sqrt(T/2) + sqrt(ln(T+1)))."""
    log_t = math.log(horizon + 1)
    return 2.0 * math.sqrt(log_t) / (math.sqrt(horizon / 2.0) + math.sqrt(log_t))


@jax.jit
def _eg_prefix_mass(log_p: Float[Array, "T1"], index: Array) -> Float[Array, ""]:
    # Masked rather than sliced: one compiled kernel serves every index.
    mask = jnp.arange(log_p.size) <= index
    mass = jnp.sum(jnp.where(mask, jnp.exp(log_p), 0.0))
    return jnp.clip(mass, 0.0, 1.0)


def eg_prediction(log_p: Float[Array, "T1"], index: int) -> float:
    """f_index = p_0 + ... + p_index for the 0-based position `index`."""
    return float(_eg_prefix_mass(log_p, index))


@jax.jit
def _eg_log_update(
    log_p: Float[Array, "T1"], index: Array, grad: Array, eta: Array
) -> Float[Array, "T1"]:
    mask = jnp.arange(log_p.size) <= index
    return jax.nn.log_softmax(log_p - eta * grad * mask)


def eg_step(
    p: Sequence[float],
    index: int,
    y: float,
    eta: float,
    loss_kind: LossKind = LossKind.SQUARED,
) -> Tuple[float, Float[Array, "T1"]]:
    """Predicts at `index`, then applies the multiplicative update for label y.

    Returns:
        The prediction made before the update and the updated distribution.
    """
    p = jnp.asarray(p, dtype=jnp.float64)
    total = float(jnp.sum(p))
    if abs(total - 1.0) > _SIMPLEX_TOL or bool(jnp.any(p < 0.0)):
        raise ValueError(f"EG weights must lie on the simplex, sum is {total!r}")
    log_p = jnp.log(p)
    y_hat = eg_prediction(log_p, index)
    grad = loss_derivative(loss_kind, y, y_hat)
    return y_hat, jnp.exp(_eg_log_update(log_p, index, grad, eta))


@register
class EgLearner(BaseLearner):
    """EG over the T+1 increments f_t - f_{t-1}, uniform start."""

    name = "eg"
    supported_losses = (LossKind.SQUARED, LossKind.ABSOLUTE)

    def __init__(
        self,
        config: LearnerConfig,
        horizon: int,
        loss_kind: LossKind = LossKind.SQUARED,
    ):
        super().__init__(config, horizon, loss_kind)
        self.eta = config.eta if config.eta is not None else self._default_eta()
        # log p keeps small increments from underflowing over long games.
        self.log_p = jnp.full(
            horizon + 1, -math.log(horizon + 1), dtype=jnp.float64
        )
        self._last_prediction = 0.0
        logging.info(f"{self.name}: T={horizon}, eta={self.eta:.6f}")

    def _default_eta(self) -> float:
        return eg_default_eta(self.horizon)

    @property
    def p(self) -> Float[Array, "T1"]:
        return jnp.exp(self.log_p)

    def _predict(self, index: int) -> float:
        self._last_prediction = eg_prediction(self.log_p, index)
        return self._last_prediction

    def _observe(self, index: int, y: float) -> None:
        grad = loss_derivative(self.loss_kind, y, self._last_prediction)
        self.log_p = _eg_log_update(self.log_p, index, grad, self.eta)

    def regret_bound(self) -> Optional[float]:
        if self.config.eta is not None or self.loss_kind is not LossKind.SQUARED:
            return None
        return eg_regret_bound(self.horizon)


@register
class EgNoiseFreeLearner(EgLearner):
    """EG tuned for a zero-loss comparator: eta = 2."""

    name = "eg-noise-free"
    supported_losses = (LossKind.SQUARED,)
    bound_requires_noise_free = True

    def _default_eta(self) -> float:
        return 2.0

    def regret_bound(self) -> Optional[float]:
        if self.config.eta is not None:
            return None
        return eg_noise_free_regret_bound(self.horizon)


########################################################
# Online Gradient Descent with isotonic projection
########################################################
def ogd_step(
    f: IsotonicFunction,
    index: int,
    y: float,
    eta: float,
    loss_kind: LossKind = LossKind.SQUARED,
) -> Tuple[float, IsotonicFunction]:
    """Predicts f_index, descends on that coordinate, projects back onto F."""
    y_hat = f[index]
    grads = jnp.zeros(len(f), dtype=jnp.float64).at[index].set(
        loss_derivative(loss_kind, y, y_hat)
    )
    params = jnp.asarray(f.values)
    optimizer = optax.sgd(learning_rate=eta)
    updates, _ = optimizer.update(grads, optimizer.init(params), params)
    params = optax.apply_updates(params, updates)
    return y_hat, project_isotonic_box(np.asarray(params))


@register
class OgdLearner(BaseLearner):
    name = "ogd"
    supported_losses = (LossKind.SQUARED, LossKind.ABSOLUTE)

    def __init__(
        self,
        config: LearnerConfig,
        horizon: int,
        loss_kind: LossKind = LossKind.SQUARED,
    ):
        super().__init__(config, horizon, loss_kind)
        self.eta = config.eta if config.eta is not None else 0.5
        self.f = IsotonicFunction.from_name(config.init, horizon)

    def _predict(self, index: int) -> float:
        return self.f[index]

    def _observe(self, index: int, y: float) -> None:
        _, self.f = ogd_step(self.f, index, y, self.eta, self.loss_kind)


########################################################
# Follow the Regularized Leader
########################################################
def ftrl_predict(
    f0: IsotonicFunction,
    lam: float,
    history: Sequence[Tuple[int, float]],
) -> IsotonicFunction:
    """argmin over F of lam ||f - f0||^2 + sum over history of (f_i - y_i)^2.

    Coordinate i carries weight lam + n_i and target
    (lam f0_i + n_i y_i) / (lam + n_i), n_i = 1 if i is labeled.
    """
    if lam <= 0.0:
        raise ValueError(f"FTRL regularization must be positive, got {lam!r}")
    counts = np.zeros(len(f0))
    sums = np.zeros(len(f0))
    for index, y in history:
        counts[index] += 1.0
        sums[index] += y
    weights = lam + counts
    targets = (lam * f0.values + sums) / weights
    return weighted_isotonic_box(targets, weights)


@register
class FtrlLearner(BaseLearner):
    name = "ftrl"

    def __init__(
        self,
        config: LearnerConfig,
        horizon: int,
        loss_kind: LossKind = LossKind.SQUARED,
    ):
        super().__init__(config, horizon, loss_kind)
        self.f0 = IsotonicFunction.from_name(config.init, horizon)
        self.history = []

    def _predict(self, index: int) -> float:
        return ftrl_predict(self.f0, self.config.lam, self.history)[index]

    def _observe(self, index: int, y: float) -> None:
        self.history.append((index, y))
