"""Exponential weights over the isotonic covering net.

The net F_K holds every non-decreasing sequence of grid levels. Its
exponentially weighted mean is computed with a forward and a backward sweep
over positions, each a cumulative log-sum-exp over levels, so one prediction
costs O(TK) instead of O(|F_K|).
"""

import functools
import math
from typing import Optional, Sequence, Tuple

import equinox as eqx
import jax
import jax.numpy as jnp
import jax.scipy.special as jsp_special
import numpy as np
from absl import logging
from jaxtyping import Array, Bool, Float
from scipy import special

from isoreg.game_engine.core import (
    LossKind,
    NetTooLargeError,
    ProtocolError,
    covering_net_members,
    covering_net_size,
    ew_entropic_net_regret_bound,
    ew_entropic_regret_bound,
    ew_net_regret_bound,
    ew_squared_regret_bound,
    grid_losses,
    tune_k_entropic,
    tune_k_squared,
)
from isoreg.game_engine.learners.base import BaseLearner, LearnerConfig, register


# Exp-concavity constants: squared loss on [0, 1] is 1/2-exp-concave, entropic
# loss is 1-exp-concave.
SQUARED_ETA = 0.5
ENTROPIC_ETA = 1.0


def squared_grid(k: int) -> Float[Array, "K1"]:
    """Levels j / K, j = 0..K."""
    if k < 1:
        raise ValueError(f"Grid size must be positive, got K={k}")
    return jnp.arange(k + 1, dtype=jnp.float64) / k


def ew_entropic_grid(k: int) -> Float[Array, "K1"]:
    """Arcsin grid: z_k = sin^2(pi k / 2K), ends moved to sin^2(pi / 4K) and
    cos^2(pi / 4K)."""
    if k < 1:
        raise ValueError(f"Grid size must be positive, got K={k}")
    if k == 1:
        logging.warning("Arcsin grid with K=1 collapses to the single level 0.5")
    psi = jnp.pi * jnp.arange(k + 1, dtype=jnp.float64) / (2 * k)
    edge = jnp.pi / (4 * k)
    psi = psi.at[0].set(edge).at[k].set(jnp.pi / 2 - edge)
    return jnp.sin(psi) ** 2


class NetWeightsState(eqx.Module):
    """Per-position, per-level factors of exponential weights on F_K.

    `log_beta[s, j]` is -eta * loss(y_s, z_j) once position s is labeled and 0
    before. `prefix_log_w` caches the normalized forward accumulator at
    position `prefix_len`, valid while labels arrive in isotonic order.
    """

    grid: Float[Array, "K1"]
    log_beta: Float[Array, "T K1"]
    labeled: Bool[Array, "T"]
    prefix_log_w: Float[Array, "K1"]
    prefix_len: int
    num_labeled: int
    eta: float = eqx.field(static=True)
    loss_kind: LossKind = eqx.field(static=True)

    @classmethod
    def create(
        cls,
        horizon: int,
        grid: Float[Array, "K1"],
        eta: float,
        loss_kind: LossKind = LossKind.SQUARED,
    ) -> "NetWeightsState":
        grid = jnp.asarray(grid, dtype=jnp.float64)
        return cls(
            grid=grid,
            log_beta=jnp.zeros((horizon, grid.size), dtype=jnp.float64),
            labeled=jnp.zeros(horizon, dtype=bool),
            prefix_log_w=jnp.zeros(grid.size, dtype=jnp.float64),
            prefix_len=0,
            num_labeled=0,
            eta=float(eta),
            loss_kind=LossKind.from_name(loss_kind),
        )

    @property
    def horizon(self) -> int:
        return self.log_beta.shape[0]

    @property
    def k(self) -> int:
        return self.grid.size - 1

    @property
    def beta(self) -> Float[Array, "T K1"]:
        return jnp.exp(self.log_beta)


def _advance(log_w: Float[Array, "K1"], log_beta_row: Float[Array, "K1"]):
    """One forward step; returns the next accumulator normalized to max 0."""
    log_next = jax.lax.cumlogsumexp(log_w + log_beta_row)
    top = log_next[-1]
    return log_next - top, top


@jax.jit
def _forward_sweep(
    log_beta: Float[Array, "T K1"],
) -> Tuple[Float[Array, "T K1"], Float[Array, ""]]:
    """Forward accumulators w_s (labels strictly left of s) and log Z."""

    def step(carry, log_beta_row):
        log_w, log_scale = carry
        log_next, top = _advance(log_w, log_beta_row)
        return (log_next, log_scale + top), log_w

    init = (
        jnp.zeros(log_beta.shape[1], dtype=log_beta.dtype),
        jnp.zeros((), dtype=log_beta.dtype),
    )
    (_, log_z), log_w = jax.lax.scan(step, init, log_beta)
    return log_w, log_z


@jax.jit
def _backward_sweep(log_beta: Float[Array, "T K1"]) -> Float[Array, "T K1"]:
    """Backward accumulators v_s (labels strictly right of s)."""

    def step(log_v, log_beta_row):
        log_prev = jax.lax.cumlogsumexp(log_v + log_beta_row, reverse=True)
        return log_prev - log_prev[0], log_v

    init = jnp.zeros(log_beta.shape[1], dtype=log_beta.dtype)
    _, log_v = jax.lax.scan(step, init, log_beta, reverse=True)
    return log_v


@jax.jit
def _sweep_marginal(
    log_beta: Float[Array, "T K1"], grid: Float[Array, "K1"], index: Array
) -> Float[Array, ""]:
    log_w, _ = _forward_sweep(log_beta)
    log_v = _backward_sweep(log_beta)
    logits = log_w[index] + log_beta[index] + log_v[index]
    return jnp.dot(jax.nn.softmax(logits), grid)


def ew_net_predict(state: NetWeightsState, index: int) -> float:
    """Exponentially weighted mean of f_index over F_K, O(TK)."""
    if not 0 <= index < state.horizon:
        raise ProtocolError(f"Index {index} outside 0..{state.horizon - 1}")
    if bool(state.labeled[index]):
        raise ProtocolError(f"Index {index} was already labeled")
    return float(_sweep_marginal(state.log_beta, state.grid, index))


@functools.partial(jax.jit, static_argnames=("loss_kind",))
def _observe_kernel(
    log_beta: Float[Array, "T K1"],
    labeled: Bool[Array, "T"],
    prefix_log_w: Float[Array, "K1"],
    grid: Float[Array, "K1"],
    index: Array,
    y: Array,
    eta: Array,
    extends_prefix: Array,
    loss_kind: LossKind,
):
    """Writes the factor row of `index` and advances the isotonic prefix."""
    row = -eta * grid_losses(loss_kind, y, grid)
    advanced, _ = _advance(prefix_log_w, row)
    return (
        log_beta.at[index].set(row),
        labeled.at[index].set(True),
        jnp.where(extends_prefix, advanced, prefix_log_w),
    )


def ew_net_observe(
    state: NetWeightsState, index: int, y: float
) -> NetWeightsState:
    """Sets the factor row of `index` to exp(-eta * loss(y, z_j))."""
    if not 0 <= index < state.horizon:
        raise ProtocolError(f"Index {index} outside 0..{state.horizon - 1}")
    if bool(state.labeled[index]):
        raise ProtocolError(f"Index {index} was already labeled")
    extends_prefix = index == state.prefix_len
    log_beta, labeled, prefix_log_w = _observe_kernel(
        state.log_beta,
        state.labeled,
        state.prefix_log_w,
        state.grid,
        int(index),
        float(y),
        state.eta,
        extends_prefix,
        loss_kind=state.loss_kind,
    )
    return eqx.tree_at(
        lambda s: (
            s.log_beta,
            s.labeled,
            s.prefix_log_w,
            s.prefix_len,
            s.num_labeled,
        ),
        state,
        (
            log_beta,
            labeled,
            prefix_log_w,
            state.prefix_len + int(extends_prefix),
            state.num_labeled + 1,
        ),
    )


@functools.partial(jax.jit, static_argnames=("horizon",))
def _isotonic_marginal(
    prefix_log_w: Float[Array, "K1"],
    grid: Float[Array, "K1"],
    t: Array,
    horizon: int,
) -> Float[Array, ""]:
    k = grid.size - 1
    levels = jnp.arange(k + 1)
    remaining = horizon - 1 - t
    # v_t^k = C(remaining + K - k, K - k): isotonic completions above level k.
    log_v = (
        jsp_special.gammaln(remaining + k - levels + 1.0)
        - jsp_special.gammaln(k - levels + 1.0)
        - jsp_special.gammaln(remaining + 1.0)
    )
    return jnp.dot(jax.nn.softmax(prefix_log_w + log_v), grid)


def ew_net_predict_isotonic_fast(state: NetWeightsState, t: int) -> float:
    """O(K) prediction at position t when exactly 0..t-1 are labeled."""
    if t != state.prefix_len or state.num_labeled != t:
        raise ProtocolError(
            f"Fast path needs isotonic order: asked for {t}, "
            f"prefix has {state.prefix_len} of {state.num_labeled} labels"
        )
    if not 0 <= t < state.horizon:
        raise ProtocolError(f"Index {t} outside 0..{state.horizon - 1}")
    return float(
        _isotonic_marginal(state.prefix_log_w, state.grid, t, state.horizon)
    )


def log_partition(state: NetWeightsState) -> float:
    """ln sum_{f in F_K} prod_s beta_s(f_s); ln |F_K| before any label."""
    _, log_z = _forward_sweep(state.log_beta)
    return float(log_z)


def ew_net_naive_predict(
    grid: Sequence[float],
    history: Sequence[Tuple[int, float]],
    index: int,
    horizon: int,
    eta: float = SQUARED_ETA,
    loss_kind: LossKind = LossKind.SQUARED,
    max_size: int = 10**6,
) -> float:
    """Exponentially weighted mean of f_index by enumerating F_K.

    Args:
        grid: The K+1 levels.
        history: (index, label) pairs revealed so far.
        index: The position to predict.
        horizon: T.
    """
    grid = np.asarray(grid, dtype=np.float64)
    k = grid.size - 1
    size = covering_net_size(horizon, k)
    if size > max_size:
        raise NetTooLargeError(
            f"|F_K| = C({horizon}+{k}, {k}) = {size} exceeds {max_size}"
        )
    members = covering_net_members(horizon, k)

    log_weights = np.zeros(size)
    for position, y in history:
        level_losses = np.asarray(grid_losses(loss_kind, y, grid))
        log_weights -= eta * level_losses[members[:, position]]
    return float(np.dot(special.softmax(log_weights), grid[members[:, index]]))


class _NetLearner(BaseLearner):
    """Drives a NetWeightsState through the learner contract."""

    default_eta: float = SQUARED_ETA

    def __init__(
        self,
        config: LearnerConfig,
        horizon: int,
        loss_kind: LossKind = LossKind.SQUARED,
    ):
        super().__init__(config, horizon, loss_kind)
        self.k = config.k if config.k is not None else self._tuned_k()
        self.eta = config.eta if config.eta is not None else self.default_eta
        self.state = NetWeightsState.create(
            horizon, self._grid(), self.eta, self.loss_kind
        )
        logging.info(
            f"{self.name}: T={horizon}, K={self.k}, eta={self.eta}, "
            f"ln|F_K|={math.log(covering_net_size(horizon, self.k)):.3f}"
        )

    def _tuned_k(self) -> int:
        raise NotImplementedError

    def _grid(self) -> Float[Array, "K1"]:
        raise NotImplementedError

    def _predict(self, index: int) -> float:
        if (
            self.config.fast_path
            and index == self.state.prefix_len
            and len(self.labeled) == index
        ):
            return ew_net_predict_isotonic_fast(self.state, index)
        return ew_net_predict(self.state, index)

    def _observe(self, index: int, y: float) -> None:
        self.state = ew_net_observe(self.state, index, y)


@register
class EwNetLearner(_NetLearner):
    """Exponential weights with eta = 1/2 on the grid {j/K}."""

    name = "ew-net"

    def _tuned_k(self) -> int:
        return tune_k_squared(self.horizon)

    def _grid(self):
        return squared_grid(self.k)

    def regret_bound(self) -> Optional[float]:
        if self.config.eta is not None:
            return None
        if self.config.k is None:
            return ew_squared_regret_bound(self.horizon)
        return ew_net_regret_bound(self.horizon, self.k)


@register
class EwEntropicLearner(_NetLearner):
    """Exponential weights with eta = 1 on the arcsin grid."""

    name = "ew-entropic"
    supported_losses = (LossKind.ENTROPIC,)
    default_eta = ENTROPIC_ETA

    def __init__(
        self,
        config: LearnerConfig,
        horizon: int,
        loss_kind: LossKind = LossKind.ENTROPIC,
    ):
        if config.k is not None and config.k < 2:
            raise ValueError(f"Entropic net needs K >= 2, got K={config.k}")
        super().__init__(config, horizon, loss_kind)

    def _tuned_k(self) -> int:
        return tune_k_entropic(self.horizon)

    def _grid(self):
        return ew_entropic_grid(self.k)

    def regret_bound(self) -> Optional[float]:
        if self.config.eta is not None:
            return None
        if self.config.k is None:
            return ew_entropic_regret_bound(self.horizon)
        return ew_entropic_net_regret_bound(self.horizon, self.k)


@register
class EwNaiveLearner(BaseLearner):
    """Enumerates F_K at every prediction; only for tiny games."""

    name = "ew-net-naive"
    supported_losses = (LossKind.SQUARED, LossKind.ENTROPIC)

    def __init__(
        self,
        config: LearnerConfig,
        horizon: int,
        loss_kind: LossKind = LossKind.SQUARED,
    ):
        super().__init__(config, horizon, loss_kind)
        if self.loss_kind is LossKind.SQUARED:
            tune, make_grid, eta = tune_k_squared, squared_grid, SQUARED_ETA
        else:
            tune, make_grid = tune_k_entropic, ew_entropic_grid
            eta = ENTROPIC_ETA
        self.k = config.k if config.k is not None else tune(horizon)
        self.grid = np.asarray(make_grid(self.k))
        self.eta = config.eta if config.eta is not None else eta
        self.history = []

    def _predict(self, index: int) -> float:
        return ew_net_naive_predict(
            self.grid,
            self.history,
            index,
            self.horizon,
            self.eta,
            self.loss_kind,
        )

    def _observe(self, index: int, y: float) -> None:
        self.history.append((index, y))
