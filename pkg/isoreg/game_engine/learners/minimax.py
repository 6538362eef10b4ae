"""Exact minimax learners for noise-free games.

Any order: a run of n unknown labels squeezed between revealed labels u <= v
has game value (v - u)^2 beta_n. Isotonic order: with last label c and n labels
to go the value is (1 - c)^2 alpha_n.
"""

import bisect
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from isoreg.game_engine.core import (
    LossKind,
    NoiseFreeViolation,
    ProtocolError,
    UnsupportedScenarioError,
    anyorder_minimax_value_bound,
)
from isoreg.game_engine.learners.base import BaseLearner, LearnerConfig, register


def _split_value(left: np.ndarray, right: np.ndarray) -> np.ndarray:
    """beta_{n,k} from beta_k (left) and beta_{n-k} (right)."""
    d = left - right
    inner = 0.25 * d**2 + 0.5 * (left + right) + 0.25
    return np.where(d > 1.0, left, np.where(d < -1.0, right, inner))


def minimax_beta_table(horizon: int) -> np.ndarray:
    """beta_0..beta_T with beta_0 = 0, beta_{n+1} = max_k beta_{n,k}."""
    if horizon < 0:
        raise ValueError(f"Horizon must be non-negative, got {horizon}")
    beta = np.zeros(horizon + 1, dtype=np.float64)
    for n in range(horizon):
        ks = np.arange(n + 1)
        beta[n + 1] = np.max(_split_value(beta[ks], beta[n - ks]))
    return beta


def minimax_alpha_table(horizon: int) -> np.ndarray:
    """alpha_0..alpha_T, alpha_0 = 0, alpha_t = ((alpha_{t-1} + 1) / 2)^2."""
    if horizon < 1:
        raise ValueError(f"Horizon must be positive, got {horizon}")
    alpha = np.zeros(horizon + 1, dtype=np.float64)
    for t in range(1, horizon + 1):
        alpha[t] = ((alpha[t - 1] + 1.0) / 2.0) ** 2
    return alpha


@dataclass(frozen=True)
class Segment:
    """Unlabeled positions start..stop-1, bounded by revealed labels u <= v."""

    u: float
    v: float
    start: int
    stop: int

    @property
    def size(self) -> int:
        return self.stop - self.start


@dataclass
class SegmentState:
    segments: List[Segment]
    beta_table: np.ndarray
    _starts: List[int] = field(default_factory=list, repr=False)

    def __post_init__(self):
        self._starts = [s.start for s in self.segments]

    @classmethod
    def create(cls, horizon: int) -> "SegmentState":
        return cls([Segment(0.0, 1.0, 0, horizon)], minimax_beta_table(horizon))

    def locate(self, index: int) -> int:
        """Position in `segments` of the segment holding `index`."""
        pos = bisect.bisect_right(self._starts, index) - 1
        if pos < 0 or index >= self.segments[pos].stop:
            raise ProtocolError(f"Index {index} is not an unlabeled position")
        return pos

    def split(self, index: int, y: float) -> None:
        pos = self.locate(index)
        seg = self.segments[pos]
        if not seg.u <= y <= seg.v:
            raise NoiseFreeViolation(
                f"Label {y!r} at index {index} outside feasible range "
                f"[{seg.u}, {seg.v}]"
            )
        parts = [
            Segment(seg.u, y, seg.start, index),
            Segment(y, seg.v, index + 1, seg.stop),
        ]
        self.segments[pos : pos + 1] = [p for p in parts if p.size > 0]
        self._starts = [s.start for s in self.segments]


def minimax_anyorder_predict(state: SegmentState, index: int) -> float:
    seg = state.segments[state.locate(index)]
    k = index - seg.start
    rest = seg.stop - index - 1
    d = state.beta_table[k] - state.beta_table[rest]
    if d > 1.0:
        return seg.v
    if d < -1.0:
        return seg.u
    return (seg.u + seg.v) / 2.0 + (seg.v - seg.u) / 2.0 * d


def minimax_isotonic_predict(c: float, n: int, alpha: np.ndarray) -> float:
    """(c + 1)/2 + alpha_{n-1} (c - 1)/2; n counts this label too."""
    if n < 1:
        raise ValueError(f"Need at least one remaining label, got n={n}")
    return (c + 1.0) / 2.0 + alpha[n - 1] * (c - 1.0) / 2.0


@register
class MinimaxAnyOrderLearner(BaseLearner):
    name = "minimax-any"
    bound_requires_noise_free = True

    def __init__(
        self,
        config: LearnerConfig,
        horizon: int,
        loss_kind: LossKind = LossKind.SQUARED,
    ):
        super().__init__(config, horizon, loss_kind)
        self.state = SegmentState.create(horizon)

    def _predict(self, index: int) -> float:
        return minimax_anyorder_predict(self.state, index)

    def _observe(self, index: int, y: float) -> None:
        self.state.split(index, y)

    def regret_bound(self) -> Optional[float]:
        return anyorder_minimax_value_bound(self.horizon)


@register
class MinimaxIsotonicLearner(BaseLearner):
    name = "minimax-iso"
    bound_requires_noise_free = True

    def __init__(
        self,
        config: LearnerConfig,
        horizon: int,
        loss_kind: LossKind = LossKind.SQUARED,
    ):
        super().__init__(config, horizon, loss_kind)
        self.alpha = minimax_alpha_table(horizon)
        self.last_label = 0.0

    def _predict(self, index: int) -> float:
        if index != len(self.labeled):
            raise UnsupportedScenarioError(
                f"minimax-iso needs isotonic order, got index {index} at "
                f"trial {len(self.labeled)}"
            )
        return minimax_isotonic_predict(
            self.last_label, self.horizon - index, self.alpha
        )

    def _observe(self, index: int, y: float) -> None:
        if y < self.last_label:
            raise NoiseFreeViolation(
                f"Label {y!r} at index {index} below previous label "
                f"{self.last_label!r}"
            )
        self.last_label = y

    def regret_bound(self) -> Optional[float]:
        return float(self.alpha[self.horizon])
