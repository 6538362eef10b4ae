# base.py
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import ClassVar, Dict, Iterator, Optional, Type

import numpy as np

from isoreg.game_engine.core import LabelSequence, ProtocolError, RevealOrder


@dataclass
class AdversaryConfig:
    """Base configuration for adversaries."""

    name: str = "lb-segments"
    seed: int = 0

    # Lower-bound construction: number of segments and the K-bit choice of
    # probabilities, e.g. "0110". Drawn from the seed when empty.
    k: Optional[int] = None
    omega: str = ""

    # Noisy isotonic labels
    sigma: float = 0.1

    # Fixed sequences, comma-separated; order defaults to isotonic.
    labels: str = ""
    order: str = ""


class BaseAdversary(ABC):
    """Base class for all adversaries.

    Per trial the engine calls `next_index()`, shows the learner's prediction
    to `label(prediction)` and uses the returned label.
    """

    name: ClassVar[str] = ""
    # Whether every label sequence this adversary can produce is isotonic.
    noise_free: ClassVar[bool] = False

    def __init__(self, config: AdversaryConfig, horizon: int):
        if horizon < 1:
            raise ValueError(f"Horizon must be positive, got {horizon}")
        self.config = config
        self.horizon = horizon

    @abstractmethod
    def next_index(self) -> int:
        pass

    @abstractmethod
    def label(self, prediction: float) -> float:
        pass

    @classmethod
    def from_name(
        cls, name: str, horizon: int, config: Optional[AdversaryConfig] = None
    ) -> "BaseAdversary":
        if name not in adversary_registry:
            valid = ", ".join(sorted(adversary_registry))
            raise ValueError(f"Unknown adversary {name!r} (valid: {valid})")
        config = config or AdversaryConfig(name=name)
        return adversary_registry[name](config, horizon)


# Maps adversary names to adversary classes
adversary_registry: Dict[str, Type[BaseAdversary]] = {}


def register(adversary_cls: Type[BaseAdversary]) -> Type[BaseAdversary]:
    adversary_registry[adversary_cls.name] = adversary_cls
    return adversary_cls


class SequenceAdversary(BaseAdversary):
    """Plays a label sequence fixed before the game, ignoring predictions."""

    def __init__(self, config: AdversaryConfig, horizon: int):
        super().__init__(config, horizon)
        self.labels, self.order = self.build()
        if len(self.labels) != horizon or len(self.order) != horizon:
            raise ValueError(
                f"{self.name}: built {len(self.labels)} labels and "
                f"{len(self.order)} indices for horizon {horizon}"
            )
        self.noise_free = bool(np.all(np.diff(self.labels.labels) >= 0.0))
        self._indices: Iterator[int] = iter(self.order)
        self._current: Optional[int] = None

    @abstractmethod
    def build(self) -> "tuple[LabelSequence, RevealOrder]":
        pass

    def next_index(self) -> int:
        try:
            self._current = next(self._indices)
        except StopIteration:
            raise ProtocolError(
                f"{self.name}: all {self.horizon} indices revealed"
            )
        return self._current

    def label(self, prediction: float) -> float:
        if self._current is None:
            raise ProtocolError("label() called before next_index()")
        index, self._current = self._current, None
        return self.labels[index]
