"""Offline comparators: PAVA, L1 isotonic regression and box projection."""

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from isoreg.game_engine.core import (
    GameTranscript,
    IsotonicFunction,
    LossKind,
    NetTooLargeError,
    covering_net_members,
    covering_net_size,
    grid_losses,
    loss,
)


@dataclass(frozen=True)
class PavaFit:
    """Weighted isotonic fit and its level sets.

    `values` is not clipped, so with targets outside [0, 1] it may leave the
    unit interval; `as_function` clips.
    """

    values: np.ndarray
    level_sets: Tuple[Tuple[int, int], ...]

    def as_function(self) -> IsotonicFunction:
        return IsotonicFunction(np.clip(self.values, 0.0, 1.0))

    def __len__(self) -> int:
        return self.values.size


def pava(
    labels: Sequence[float], weights: Optional[Sequence[float]] = None
) -> PavaFit:
    """Pool Adjacent Violators.

    Returns the unique minimizer of sum_t w_t (y_t - f_t)^2 over non-decreasing
    f. Single left-to-right pass with a back-merging stack, O(T) amortized.
    """
    y = np.asarray(labels, dtype=np.float64)
    if y.ndim != 1 or y.size == 0:
        raise ValueError("pava needs a non-empty vector of labels")
    if weights is None:
        w = np.ones_like(y)
    else:
        w = np.asarray(weights, dtype=np.float64)
        if w.shape != y.shape:
            raise ValueError(
                f"labels and weights differ in shape: {y.shape} vs {w.shape}"
            )
        if np.any(w <= 0.0):
            raise ValueError("pava weights must be positive")

    means: List[float] = []
    totals: List[float] = []
    starts: List[int] = []
    for i in range(y.size):
        means.append(float(y[i]))
        totals.append(float(w[i]))
        starts.append(i)
        # Equal neighbours are merged too, so blocks are maximal.
        while len(means) > 1 and means[-2] >= means[-1]:
            mean, total = means.pop(), totals.pop()
            starts.pop()
            merged = totals[-1] + total
            means[-1] = (totals[-1] * means[-1] + total * mean) / merged
            totals[-1] = merged

    stops = starts[1:] + [y.size]
    values = np.repeat(np.asarray(means), np.diff(starts + [y.size]))
    return PavaFit(values=values, level_sets=tuple(zip(starts, stops)))


def project_isotonic_box(v: Sequence[float]) -> IsotonicFunction:
    """Euclidean projection onto F: unit-weight PAVA, then clip to [0, 1]."""
    return pava(v).as_function()


def weighted_isotonic_box(
    targets: Sequence[float], weights: Sequence[float]
) -> IsotonicFunction:
    """argmin over F of sum_t w_t (targets_t - f_t)^2."""
    return pava(targets, weights).as_function()


def l1_isotonic(labels: Sequence[float]) -> IsotonicFunction:
    """Isotonic minimizer of sum_t |y_t - f_t|.

    Dynamic program over the distinct label values; ties go to the smallest
    optimal value, choosing the last position first.
    """
    y = np.asarray(labels, dtype=np.float64)
    if y.ndim != 1 or y.size == 0:
        raise ValueError("l1_isotonic needs a non-empty vector of labels")
    candidates = np.unique(y)

    # cost[t, j]: best loss of y_0..y_t with f_t = candidates[j].
    cost = np.empty((y.size, candidates.size))
    cost[0] = np.abs(y[0] - candidates)
    for t in range(1, y.size):
        cost[t] = np.abs(y[t] - candidates) + np.minimum.accumulate(cost[t - 1])

    fit = np.empty(y.size)
    j = int(np.argmin(cost[-1]))
    fit[-1] = candidates[j]
    for t in range(y.size - 2, -1, -1):
        j = int(np.argmin(cost[t, : j + 1]))
        fit[t] = candidates[j]
    return IsotonicFunction(fit)


def isotonic_fit(labels: Sequence[float], kind: LossKind) -> IsotonicFunction:
    """Best isotonic comparator for `kind`.

    PAVA serves both squared and entropic loss: the squared-loss isotonic
    regression minimizes every Bregman divergence.
    """
    kind = LossKind.from_name(kind)
    if kind is LossKind.ABSOLUTE:
        return l1_isotonic(labels)
    return project_isotonic_box(labels)


def isotonic_loss(labels: Sequence[float], kind: LossKind) -> float:
    """Total loss of the best isotonic comparator, labels by position."""
    fit = isotonic_fit(labels, kind)
    return math.fsum(loss(kind, y, f) for y, f in zip(labels, fit.values))


def best_isotonic_loss(
    transcript: Union[GameTranscript, Sequence[float]],
    kind: Optional[LossKind] = None,
) -> float:
    """Oracle loss of a finished game.

    Raises:
        InfiniteLossError: entropic loss where the fit sits on 0 or 1 and a
            label on that level set disagrees.
    """
    if isinstance(transcript, GameTranscript):
        kind = kind or transcript.loss_kind
        labels = transcript.labels_by_position()
    else:
        labels = np.asarray(transcript, dtype=np.float64)
        kind = kind or LossKind.SQUARED
    return isotonic_loss(labels, kind)


def grid_isotonic_minimum(
    labels: Sequence[float],
    k: int,
    kind: LossKind = LossKind.SQUARED,
    max_size: int = 10**6,
) -> Tuple[float, IsotonicFunction]:
    """Brute-force minimum over isotonic functions on the grid {j/k}.

    Used to check oracle optimality on small instances.
    """
    y = np.asarray(labels, dtype=np.float64)
    size = covering_net_size(y.size, k)
    if size > max_size:
        raise NetTooLargeError(
            f"Grid of size C({y.size}+{k}, {k}) = {size} exceeds {max_size}"
        )
    members = covering_net_members(y.size, k)
    levels = np.arange(k + 1, dtype=np.float64) / k
    # level_losses[t, j]: loss of level j against label t; inf where undefined.
    level_losses = np.stack(
        [np.asarray(grid_losses(kind, a, levels)) for a in y]
    )
    totals = level_losses[np.arange(y.size), members].sum(axis=1)
    best = int(np.argmin(totals))
    return float(totals[best]), IsotonicFunction(levels[members[best]])
