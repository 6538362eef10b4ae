# base.py
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import ClassVar, Dict, Optional, Set, Tuple, Type

from isoreg.game_engine.core import LossKind, ProtocolError, check_probability


@dataclass
class LearnerConfig:
    """Base configuration for learners."""

    name: str = "ew-net"

    # Covering-net resolution; tuned from the horizon when unset.
    k: Optional[int] = None
    # Learning rate; each learner has its own default.
    eta: Optional[float] = None

    # Gradient learners
    lam: float = 1.0
    init: str = "diagonal"

    # Exponential weights on the net
    fast_path: bool = True

    # Constant predictor
    value: float = 0.5


class BaseLearner(ABC):
    """Base class for all online isotonic learners.

    The protocol per trial is `predict(index)` then `observe(index, y)`; every
    position is predicted and observed exactly once.
    """

    name: ClassVar[str] = ""
    supported_losses: ClassVar[Tuple[LossKind, ...]] = (LossKind.SQUARED,)
    # Minimax guarantees only hold when the revealed labels are isotonic.
    bound_requires_noise_free: ClassVar[bool] = False

    def __init__(
        self,
        config: LearnerConfig,
        horizon: int,
        loss_kind: LossKind = LossKind.SQUARED,
    ):
        if horizon < 1:
            raise ValueError(f"Horizon must be positive, got {horizon}")
        loss_kind = LossKind.from_name(loss_kind)
        if loss_kind not in self.supported_losses:
            supported = ", ".join(k.value for k in self.supported_losses)
            raise ValueError(
                f"Learner {self.name!r} does not support {loss_kind.value} loss "
                f"(supported: {supported})"
            )
        self.config = config
        self.horizon = horizon
        self.loss_kind = loss_kind
        self.labeled: Set[int] = set()
        self._pending: Optional[int] = None

    @abstractmethod
    def _predict(self, index: int) -> float:
        pass

    @abstractmethod
    def _observe(self, index: int, y: float) -> None:
        pass

    def _check_unlabeled(self, index: int):
        if not 0 <= index < self.horizon:
            raise ProtocolError(
                f"Index {index} outside 0..{self.horizon - 1}"
            )
        if index in self.labeled:
            raise ProtocolError(f"Index {index} was already labeled")

    def predict(self, index: int) -> float:
        self._check_unlabeled(index)
        y_hat = float(self._predict(index))
        self._pending = index
        return y_hat

    def observe(self, index: int, y: float) -> None:
        self._check_unlabeled(index)
        if self._pending != index:
            raise ProtocolError(
                f"observe({index}) without a preceding predict({index})"
            )
        check_probability("label", y)
        self._observe(index, float(y))
        self.labeled.add(index)
        self._pending = None

    def regret_bound(self) -> Optional[float]:
        """Regret guarantee for this horizon, if the learner has one."""
        return None

    @classmethod
    def from_name(
        cls,
        name: str,
        horizon: int,
        loss_kind: LossKind = LossKind.SQUARED,
        config: Optional[LearnerConfig] = None,
    ) -> "BaseLearner":
        if name not in learner_registry:
            valid = ", ".join(sorted(learner_registry))
            raise ValueError(f"Unknown learner {name!r} (valid: {valid})")
        config = config or LearnerConfig(name=name)
        return learner_registry[name](config, horizon, loss_kind)


# Maps learner names to learner classes
learner_registry: Dict[str, Type[BaseLearner]] = {}


def register(learner_cls: Type[BaseLearner]) -> Type[BaseLearner]:
    learner_registry[learner_cls.name] = learner_cls
    return learner_cls


@register
class ConstantLearner(BaseLearner):
    """Predicts the same value everywhere."""

    name = "constant"
    supported_losses = (LossKind.SQUARED, LossKind.ABSOLUTE, LossKind.ENTROPIC)

    def _predict(self, index: int) -> float:
        return self.config.value

    def _observe(self, index: int, y: float) -> None:
        pass
