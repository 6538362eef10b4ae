"""Adversaries that read the learner's prediction before labeling."""

from collections import deque
from typing import Deque, Dict, Optional, Tuple

from absl import logging

from isoreg.game_engine.adversaries.base import (
    AdversaryConfig,
    BaseAdversary,
    register,
)
from isoreg.game_engine.core import ProtocolError
from isoreg.game_engine.learners.minimax import minimax_alpha_table


# (start, stop, u, v) of the range still in play.
_Range = Tuple[int, int, float, float]


@register
class MidpointSplitter(BaseAdversary):
    """Queries the middle of the active range and labels it with the farther
    endpoint of [u, v]; ties go to v.

    The half the label pins down is revealed next at its forced value; play
    then continues on the other half. For T = 2^k - 1 every learner loses at
    least k/4.
    """

    name = "midpoint"
    noise_free = True

    def __init__(self, config: AdversaryConfig, horizon: int):
        super().__init__(config, horizon)
        if (horizon + 1) & horizon:
            logging.warning(
                f"midpoint: T={horizon} is not 2^k - 1, the exact-value "
                "guarantee does not apply"
            )
        self._range: Optional[_Range] = (0, horizon, 0.0, 1.0)
        self._forced: Deque[int] = deque()
        self._forced_labels: Dict[int, float] = {}
        self._current: Optional[int] = None

    def next_index(self) -> int:
        if self._forced:
            self._current = self._forced.popleft()
        elif self._range is not None:
            start, stop, _, _ = self._range
            self._current = (start + stop) // 2
        else:
            raise ProtocolError(
                f"{self.name}: all {self.horizon} indices revealed"
            )
        return self._current

    def label(self, prediction: float) -> float:
        if self._current is None:
            raise ProtocolError("label() called before next_index()")
        index, self._current = self._current, None
        if index in self._forced_labels:
            return self._forced_labels.pop(index)

        start, stop, u, v = self._range
        y = v if (prediction - v) ** 2 >= (prediction - u) ** 2 else u
        if y == v:
            forced, rest = range(index + 1, stop), (start, index)
        else:
            forced, rest = range(start, index), (index + 1, stop)
        for i in forced:
            self._forced.append(i)
            self._forced_labels[i] = y
        self._range = (*rest, u, v) if rest[1] > rest[0] else None
        return y


@register
class GreedyIsotonicAdversary(BaseAdversary):
    """Isotonic order; picks y in {c, 1} maximizing
    (prediction - y)^2 + alpha_{n-1} (1 - y)^2, ties go to 1.
    """

    name = "greedy-iso"
    noise_free = True

    def __init__(self, config: AdversaryConfig, horizon: int):
        super().__init__(config, horizon)
        self.alpha = minimax_alpha_table(horizon)
        self.last_label = 0.0
        self._next = 0
        self._current: Optional[int] = None

    def next_index(self) -> int:
        if self._next >= self.horizon:
            raise ProtocolError(
                f"{self.name}: all {self.horizon} indices revealed"
            )
        self._current, self._next = self._next, self._next + 1
        return self._current

    def _value(self, prediction: float, y: float, remaining: int) -> float:
        return (prediction - y) ** 2 + self.alpha[remaining - 1] * (1.0 - y) ** 2

    def label(self, prediction: float) -> float:
        if self._current is None:
            raise ProtocolError("label() called before next_index()")
        remaining = self.horizon - self._current
        self._current = None
        c = self.last_label
        low = self._value(prediction, c, remaining)
        high = self._value(prediction, 1.0, remaining)
        self.last_label = 1.0 if high >= low else c
        return self.last_label

