"""Shared domain types, loss functions and covering-net combinatorics."""

import enum
import itertools
import math
from dataclasses import dataclass, field
from typing import Iterator, List, NamedTuple, Optional, Sequence, Tuple

import jax.numpy as jnp
import jax.scipy.special as jsp_special
import numpy as np
from jaxtyping import Array, Float
from scipy import special


# Tolerance for order and range checks on values produced by pooling.
_ATOL = 1e-12


class IsoregError(ValueError):
    """Base class for all errors raised by isoreg."""


class InfiniteLossError(IsoregError):
    """Entropic loss of a boundary prediction against a mismatched label."""


class ProtocolError(IsoregError):
    """A learner or adversary broke the online protocol."""


class NoiseFreeViolation(IsoregError):
    """A label fell outside the range a noise-free game allows."""


class NetTooLargeError(IsoregError):
    """The covering net is too large to enumerate."""


class UnsupportedScenarioError(IsoregError):
    """A learner was asked to play outside the scenario it is defined for."""


class GameAbortedError(IsoregError):
    """The engine stopped a game; the message carries the diagnostic."""


class LossKind(str, enum.Enum):
    SQUARED = "squared"
    ENTROPIC = "entropic"
    ABSOLUTE = "absolute"

    @classmethod
    def from_name(cls, name: "str | LossKind") -> "LossKind":
        if isinstance(name, LossKind):
            return name
        try:
            return cls(name)
        except ValueError:
            valid = ", ".join(k.value for k in cls)
            raise ValueError(
                f"Unknown loss kind: {name!r} (valid: {valid})"
            ) from None


def loss(kind: LossKind, y: float, y_hat: float) -> float:
    """Loss of predicting `y_hat` when the label is `y`.

    Entropic loss uses the natural logarithm with 0 log 0 := 0.

    Raises:
        InfiniteLossError: entropic loss with a boundary prediction that does
            not match the label.
    """
    kind = LossKind.from_name(kind)
    if kind is LossKind.SQUARED:
        return float((y - y_hat) ** 2)
    if kind is LossKind.ABSOLUTE:
        return float(abs(y - y_hat))
    value = -float(special.xlogy(y, y_hat) + special.xlogy(1.0 - y, 1.0 - y_hat))
    if math.isinf(value) or math.isnan(value):
        raise InfiniteLossError(
            f"Entropic loss is infinite for y={y!r}, prediction={y_hat!r}"
        )
    return value + 0.0  # normalises -0.0


def loss_derivative(kind: LossKind, y: float, y_hat: float) -> float:
    """(Sub)gradient of the loss with respect to the prediction.

    The absolute-loss subgradient at `y_hat == y` is 0.
    """
    kind = LossKind.from_name(kind)
    if kind is LossKind.SQUARED:
        return 2.0 * (y_hat - y)
    if kind is LossKind.ABSOLUTE:
        return float(np.sign(y_hat - y))
    if y_hat <= 0.0 or y_hat >= 1.0:
        raise InfiniteLossError(
            f"Entropic gradient undefined at boundary prediction {y_hat!r}"
        )
    return (y_hat - y) / (y_hat * (1.0 - y_hat))


def grid_losses(
    kind: LossKind, y: float, grid: Float[Array, "K1"]
) -> Float[Array, "K1"]:
    """Loss of every grid level against label `y`."""
    kind = LossKind.from_name(kind)
    if kind is LossKind.SQUARED:
        return (grid - y) ** 2
    if kind is LossKind.ABSOLUTE:
        return jnp.abs(grid - y)
    return -(jsp_special.xlogy(y, grid) + jsp_special.xlogy(1.0 - y, 1.0 - grid))


def total_loss(
    kind: LossKind, labels: Sequence[float], predictions: Sequence[float]
) -> float:
    return math.fsum(loss(kind, y, p) for y, p in zip(labels, predictions))


@dataclass(frozen=True)
class IsotonicFunction:
    """A non-decreasing vector 0 <= f_1 <= ... <= f_T <= 1."""

    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 1 or values.size == 0:
            raise ValueError(
                "IsotonicFunction needs a non-empty vector, "
                f"got shape {values.shape}"
            )
        if np.any(np.diff(values) < -_ATOL):
            raise ValueError("IsotonicFunction values must be non-decreasing")
        if values.min() < -_ATOL or values.max() > 1.0 + _ATOL:
            raise ValueError("IsotonicFunction values must lie in [0, 1]")
        object.__setattr__(self, "values", np.clip(values, 0.0, 1.0))

    def __len__(self) -> int:
        return self.values.size

    def __getitem__(self, index: int) -> float:
        return float(self.values[index])

    @classmethod
    def diagonal(cls, horizon: int) -> "IsotonicFunction":
        """f_t = t / T for 1-based t."""
        return cls(np.arange(1, horizon + 1, dtype=np.float64) / horizon)

    @classmethod
    def constant(cls, horizon: int, value: float) -> "IsotonicFunction":
        return cls(np.full(horizon, value, dtype=np.float64))

    @classmethod
    def from_name(cls, name: str, horizon: int) -> "IsotonicFunction":
        """Named initializers used by the gradient learners."""
        if name == "diagonal":
            return cls.diagonal(horizon)
        if name == "half":
            return cls.constant(horizon, 0.5)
        if name == "zeros":
            return cls.constant(horizon, 0.0)
        raise ValueError(
            f"Unknown initial function {name!r} (valid: diagonal, half, zeros)"
        )


@dataclass(frozen=True)
class RevealOrder:
    """A permutation of the positions 0..T-1."""

    indices: Tuple[int, ...]

    def __post_init__(self):
        indices = tuple(int(i) for i in self.indices)
        if sorted(indices) != list(range(len(indices))):
            raise ProtocolError(
                f"Reveal order must be a permutation of 0..{len(indices) - 1}"
            )
        object.__setattr__(self, "indices", indices)

    def __len__(self) -> int:
        return len(self.indices)

    def __iter__(self) -> Iterator[int]:
        return iter(self.indices)

    @property
    def is_isotonic(self) -> bool:
        return self.indices == tuple(range(len(self.indices)))

    @classmethod
    def isotonic(cls, horizon: int) -> "RevealOrder":
        return cls(tuple(range(horizon)))

    @classmethod
    def antitonic(cls, horizon: int) -> "RevealOrder":
        return cls(tuple(range(horizon - 1, -1, -1)))


@dataclass(frozen=True)
class LabelSequence:
    """Labels indexed by position (not by trial)."""

    labels: np.ndarray
    noise_free: bool = False

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.float64)
        if labels.ndim != 1:
            raise ValueError("LabelSequence needs a vector of labels")
        # NaN fails both comparisons, so it is rejected here too.
        if not np.all((labels >= 0.0) & (labels <= 1.0)):
            raise ValueError(f"Labels must lie in [0, 1], got {labels!r}")
        if self.noise_free and np.any(np.diff(labels) < 0.0):
            raise NoiseFreeViolation(
                "Labels flagged noise-free must be non-decreasing in position"
            )
        object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return self.labels.size

    def __getitem__(self, index: int) -> float:
        return float(self.labels[index])


class Trial(NamedTuple):
    trial: int
    index: int
    prediction: float
    label: float


@dataclass
class GameTranscript:
    """Per-trial record of a game, the unit of regret evaluation."""

    horizon: int
    loss_kind: LossKind = LossKind.SQUARED
    trials: List[Trial] = field(default_factory=list)

    def __post_init__(self):
        self.loss_kind = LossKind.from_name(self.loss_kind)
        self._seen = {trial.index for trial in self.trials}

    def record(self, index: int, prediction: float, label: float) -> Trial:
        if index in self._seen:
            raise ProtocolError(f"Index {index} was already revealed")
        if not 0 <= index < self.horizon:
            raise ProtocolError(
                f"Index {index} outside 0..{self.horizon - 1}"
            )
        trial = Trial(
            len(self.trials), int(index), float(prediction), float(label)
        )
        self.trials.append(trial)
        self._seen.add(index)
        return trial

    def __len__(self) -> int:
        return len(self.trials)

    def __contains__(self, index: int) -> bool:
        return index in self._seen

    @property
    def complete(self) -> bool:
        return len(self.trials) == self.horizon

    @property
    def order(self) -> RevealOrder:
        return RevealOrder(tuple(t.index for t in self.trials))

    def labels_by_position(self) -> np.ndarray:
        if not self.complete:
            raise ProtocolError(
                f"Transcript has {len(self.trials)} of {self.horizon} trials"
            )
        labels = np.empty(self.horizon, dtype=np.float64)
        for trial in self.trials:
            labels[trial.index] = trial.label
        return labels

    def trial_losses(self) -> List[float]:
        return [loss(self.loss_kind, t.label, t.prediction) for t in self.trials]

    def learner_loss(self) -> float:
        return math.fsum(self.trial_losses())


########################################################
# Covering-net combinatorics
########################################################
def covering_net_size(horizon: int, k: int) -> int:
    """|F_K| = C(T+K, K), exact."""
    if horizon < 1 or k < 0:
        raise ValueError(f"Need T >= 1 and K >= 0, got T={horizon}, K={k}")
    return math.comb(horizon + k, k)


def log_covering_net_size(horizon: int, k: int) -> float:
    return math.log(covering_net_size(horizon, k))


def enumerate_covering_net(horizon: int, k: int) -> Iterator[Tuple[int, ...]]:
    """Yields the level indices k_1 <= ... <= k_T of every net member."""
    return itertools.combinations_with_replacement(range(k + 1), horizon)


def covering_net_members(horizon: int, k: int) -> np.ndarray:
    """All of F_K as a |F_K| x T array of level indices."""
    size = covering_net_size(horizon, k)
    return np.fromiter(
        (level for f in enumerate_covering_net(horizon, k) for level in f),
        dtype=np.int64,
        count=size * horizon,
    ).reshape(size, horizon)


def tune_k_squared(horizon: int) -> int:
    """K = ceil((T / (4 ln(T+1)))^(1/3)), at least 1."""
    if horizon < 1:
        raise ValueError(f"Horizon must be positive, got {horizon}")
    k_star = (horizon / (4.0 * math.log(horizon + 1))) ** (1.0 / 3.0)
    return max(1, math.ceil(k_star))


def tune_k_entropic(horizon: int) -> int:
    """K = ceil((2(2-sqrt 2) pi^2 T / ln(T+1))^(1/3)), at least 2."""
    if horizon < 1:
        raise ValueError(f"Horizon must be positive, got {horizon}")
    scale = 2.0 * (2.0 - math.sqrt(2.0)) * math.pi**2
    k_star = (scale * horizon / math.log(horizon + 1)) ** (1.0 / 3.0)
    return max(2, math.ceil(k_star))


########################################################
# Regret bounds
########################################################
def ew_net_regret_bound(horizon: int, k: int) -> float:
    """2 ln |F_K| + T / (4K^2), valid for any K >= 1."""
    return 2.0 * log_covering_net_size(horizon, k) + horizon / (4.0 * k * k)


def ew_entropic_net_regret_bound(horizon: int, k: int) -> float:
    """ln |F_K| + (2 - sqrt 2) pi^2 T / K^2 on the arcsin grid, K >= 2."""
    return log_covering_net_size(horizon, k) + (
        (2.0 - math.sqrt(2.0)) * math.pi**2 * horizon / (k * k)
    )


def ew_squared_regret_bound(horizon: int) -> float:
    log_t = math.log(horizon + 1)
    return (
        3.0 / 2.0 ** (2.0 / 3.0) * horizon ** (1.0 / 3.0) * log_t ** (2.0 / 3.0)
        + 2.0 * log_t
    )


def ew_entropic_regret_bound(horizon: int) -> float:
    log_t = math.log(horizon + 1)
    constant = (
        3.0
        * (2.0 - math.sqrt(2.0)) ** (1.0 / 3.0)
        * math.pi ** (2.0 / 3.0)
        / 2.0 ** (2.0 / 3.0)
    )
    return constant * horizon ** (1.0 / 3.0) * log_t ** (2.0 / 3.0) + 2.0 * log_t


def eg_regret_bound(horizon: int) -> float:
    log_t = math.log(horizon + 1)
    return math.sqrt(horizon * log_t / 2.0) + log_t / 2.0


def eg_noise_free_regret_bound(horizon: int) -> float:
    return math.log(horizon + 1) / 2.0


def anyorder_minimax_value_bound(horizon: int) -> float:
    return 0.25 * math.log2(horizon + 1)


def check_probability(name: str, value: float, upper: Optional[float] = 1.0):
    if not 0.0 <= value <= upper:
        raise ValueError(f"{name} must lie in [0, {upper}], got {value!r}")
