"""Runs online isotonic regression games and regret sweeps."""

import math
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from absl import logging
from scipy import special
from tqdm import tqdm

from isoreg.game_engine.adversaries import AdversaryConfig, BaseAdversary
from isoreg.game_engine.core import (
    GameAbortedError,
    GameTranscript,
    IsotonicFunction,
    LossKind,
    ProtocolError,
    loss,
    total_loss,
)
from isoreg.game_engine.learners import BaseLearner, LearnerConfig
from isoreg.game_engine.learners.net import ew_entropic_grid
from isoreg.game_engine.oracle import best_isotonic_loss, isotonic_fit


# Entropic predictions are clamped into [eps, 1 - eps].
ENTROPIC_EPS = 1e-9
# Slack when comparing a regret against its bound.
BOUND_TOL = 1e-9
# Regrets at or below zero are clamped here before taking logs.
_REGRET_FLOOR = 1e-12


@dataclass
class GameConfig:
    """Configuration for a single game."""

    horizon: int = 64
    loss: str = "squared"
    learner: LearnerConfig = field(default_factory=LearnerConfig)
    adversary: AdversaryConfig = field(default_factory=AdversaryConfig)


@dataclass
class GameResult:
    transcript: GameTranscript
    learner_loss: float
    oracle_loss: float
    regret: float
    bound_value: Optional[float] = None
    bound_satisfied: bool = True
    learner: str = ""
    adversary: str = ""
    seed: int = 0

    @property
    def summary(self) -> Dict[str, Any]:
        return {
            "learner": self.learner,
            "adversary": self.adversary,
            "seed": self.seed,
            "horizon": self.transcript.horizon,
            "loss_kind": self.transcript.loss_kind.value,
            "learner_loss": self.learner_loss,
            "oracle_loss": self.oracle_loss,
            "regret": self.regret,
            "bound": self.bound_value,
            "bound_satisfied": self.bound_satisfied,
        }


# Core game driver -- one learner, one adversary, T trials.
class Game:
    def __init__(
        self,
        config: GameConfig,
        learner: Optional[BaseLearner] = None,
        adversary: Optional[BaseAdversary] = None,
    ):
        self.config = config
        self.loss_kind = LossKind.from_name(config.loss)
        self.learner = learner or BaseLearner.from_name(
            config.learner.name, config.horizon, self.loss_kind, config.learner
        )
        self.adversary = adversary or BaseAdversary.from_name(
            config.adversary.name, config.horizon, config.adversary
        )
        if self.learner.horizon != config.horizon:
            raise ValueError(
                f"Learner horizon {self.learner.horizon} != game horizon "
                f"{config.horizon}"
            )
        if self.adversary.horizon != config.horizon:
            raise ValueError(
                f"Adversary horizon {self.adversary.horizon} != game horizon "
                f"{config.horizon}"
            )
        if self.learner.loss_kind is not self.loss_kind:
            raise ValueError(
                f"Learner plays {self.learner.loss_kind.value} loss, game is "
                f"{self.loss_kind.value}"
            )

    def _clamp(self, prediction: float) -> float:
        if self.loss_kind is LossKind.ENTROPIC:
            return min(max(prediction, ENTROPIC_EPS), 1.0 - ENTROPIC_EPS)
        return prediction

    def step(self, transcript: GameTranscript) -> Tuple[int, float, float]:
        """Plays one trial and records it."""
        trial = len(transcript)
        index = self.adversary.next_index()
        if not 0 <= index < transcript.horizon or index in transcript:
            raise GameAbortedError(
                f"Trial {trial}: adversary {self.adversary.name!r} revealed "
                f"index {index}, which is repeated or out of range"
            )
        prediction = self.learner.predict(index)
        if not 0.0 <= prediction <= 1.0:
            raise GameAbortedError(
                f"Trial {trial}: learner {self.learner.name!r} predicted "
                f"{prediction!r} at index {index}, outside [0, 1]"
            )
        prediction = self._clamp(prediction)
        label = float(self.adversary.label(prediction))
        if not 0.0 <= label <= 1.0:
            raise GameAbortedError(
                f"Trial {trial}: adversary labeled index {index} with {label!r}"
            )
        self.learner.observe(index, label)
        transcript.record(index, prediction, label)
        return index, prediction, label

    def _bound(self) -> Optional[float]:
        learner, adversary = self.learner, self.adversary
        if learner.bound_requires_noise_free and not adversary.noise_free:
            return None
        return learner.regret_bound()

    def play(self) -> GameResult:
        transcript = GameTranscript(self.config.horizon, self.loss_kind)
        running = []
        for _ in range(self.config.horizon):
            _, prediction, label = self.step(transcript)
            running.append(loss(self.loss_kind, label, prediction))

        learner_loss = math.fsum(running)
        oracle_loss = best_isotonic_loss(transcript)
        regret = learner_loss - oracle_loss
        bound = self._bound()
        satisfied = bound is None or regret <= bound + BOUND_TOL
        if not satisfied:
            logging.warning(
                f"{self.learner.name} vs {self.adversary.name}, "
                f"T={self.config.horizon}: "
                f"regret {regret:.6g} exceeds bound {bound:.6g}"
            )
        return GameResult(
            transcript=transcript,
            learner_loss=learner_loss,
            oracle_loss=oracle_loss,
            regret=regret,
            bound_value=bound,
            bound_satisfied=satisfied,
            learner=self.learner.name,
            adversary=self.adversary.name,
            seed=getattr(self.adversary.config, "seed", 0),
        )


def run_game(
    learner: BaseLearner,
    adversary: BaseAdversary,
    horizon: int,
    kind: LossKind = LossKind.SQUARED,
) -> GameResult:
    """Plays `learner` against `adversary` for `horizon` trials."""
    config = GameConfig(
        horizon=horizon,
        loss=LossKind.from_name(kind).value,
        learner=learner.config,
        adversary=adversary.config,
    )
    return Game(config, learner=learner, adversary=adversary).play()


########################################################
# Sweeps
########################################################
def parse_list(value: str, cast=str) -> List[Any]:
    """Splits a comma-separated config value, e.g. "64,128" or "ew-net,eg"."""
    return [cast(item.strip()) for item in str(value).split(",") if item.strip()]


@dataclass
class SweepConfig:
    """Configuration for a regret sweep over learners, adversaries and T."""

    learners: str = "ew-net"
    adversaries: str = "lb-segments"
    t_grid: str = "64,128,256,512"
    seeds: str = "0,1,2"
    loss: str = "squared"
    learner: LearnerConfig = field(default_factory=LearnerConfig)
    adversary: AdversaryConfig = field(default_factory=AdversaryConfig)


@dataclass
class SweepCell:
    learner: str
    adversary: str
    horizon: int
    seeds: List[int]
    regrets: List[float]
    bounds: List[Optional[float]]
    violations: int

    @property
    def mean_regret(self) -> float:
        return float(np.mean(self.regrets))

    @property
    def max_regret(self) -> float:
        return float(np.max(self.regrets))

    def to_dict(self) -> Dict[str, Any]:
        record = asdict(self)
        record.update(mean_regret=self.mean_regret, max_regret=self.max_regret)
        return record


@dataclass
class ExponentFit:
    """log regret ≈ slope * log T + intercept."""

    learner: str
    adversary: str
    statistic: str
    slope: float
    intercept: float
    residual: float
    clamped: int


@dataclass
class SweepReport:
    cells: List[SweepCell]
    fits: List[ExponentFit]

    @property
    def violations(self) -> int:
        return sum(cell.violations for cell in self.cells)

    def fit_for(
        self, learner: str, adversary: str, statistic: str = "max"
    ) -> ExponentFit:
        for fit in self.fits:
            if (fit.learner, fit.adversary, fit.statistic) == (
                learner,
                adversary,
                statistic,
            ):
                return fit
        raise KeyError(f"No {statistic} fit for {learner} vs {adversary}")

    def to_dict(self) -> Dict[str, Any]:
        cells = sorted(
            self.cells, key=lambda c: (c.learner, c.adversary, c.horizon)
        )
        fits = sorted(
            self.fits, key=lambda f: (f.learner, f.adversary, f.statistic)
        )
        return {
            "cells": [cell.to_dict() for cell in cells],
            "fits": [asdict(fit) for fit in fits],
            "violations": self.violations,
        }


def fit_exponent(
    horizons: Sequence[int], regrets: Sequence[float]
) -> Tuple[float, float, float, int]:
    """Least-squares slope of log regret against log T.

    Returns:
        (slope, intercept, residual sum of squares, number of clamped regrets)
    """
    if len(horizons) < 2:
        raise ValueError("Need at least two horizons to fit an exponent")
    regrets = np.asarray(regrets, dtype=np.float64)
    clamped = int(np.sum(regrets <= _REGRET_FLOOR))
    x = np.log(np.asarray(horizons, dtype=np.float64))
    y = np.log(np.maximum(regrets, _REGRET_FLOOR))
    (slope, intercept), residuals, *_ = np.polyfit(x, y, 1, full=True)
    residual = float(residuals[0]) if residuals.size else 0.0
    return float(slope), float(intercept), residual, clamped


def regret_curve(
    learners: Sequence[str],
    adversaries: Sequence[str],
    t_grid: Sequence[int],
    seeds: Sequence[int],
    loss_kind: LossKind = LossKind.SQUARED,
    learner_config: Optional[LearnerConfig] = None,
    adversary_config: Optional[AdversaryConfig] = None,
    progress: bool = True,
) -> SweepReport:
    """Regret per (learner, adversary, T) over seeds, with exponent fits."""
    if not seeds:
        raise ValueError("A sweep needs at least one seed")
    if list(t_grid) != sorted(t_grid):
        raise ValueError(f"T grid must be ascending, got {list(t_grid)}")
    learner_config = learner_config or LearnerConfig()
    adversary_config = adversary_config or AdversaryConfig()

    grid = [
        (learner, adversary, horizon)
        for learner in learners
        for adversary in adversaries
        for horizon in t_grid
    ]
    cells = []
    for learner, adversary, horizon in tqdm(
        grid, desc="sweep", disable=not progress
    ):
        results = []
        for seed in seeds:
            config = GameConfig(
                horizon=horizon,
                loss=LossKind.from_name(loss_kind).value,
                learner=LearnerConfig(
                    **{**asdict(learner_config), "name": learner}
                ),
                adversary=AdversaryConfig(
                    **{
                        **asdict(adversary_config),
                        "name": adversary,
                        "seed": seed,
                    }
                ),
            )
            results.append(Game(config).play())
        cells.append(
            SweepCell(
                learner=learner,
                adversary=adversary,
                horizon=horizon,
                seeds=list(seeds),
                regrets=[r.regret for r in results],
                bounds=[r.bound_value for r in results],
                violations=sum(not r.bound_satisfied for r in results),
            )
        )
        logging.info(
            f"{learner} vs {adversary}, T={horizon}: "
            f"max regret {cells[-1].max_regret:.6g}"
        )

    fits = []
    if len(t_grid) >= 2:
        for learner in learners:
            for adversary in adversaries:
                pair = (learner, adversary)
                row = [c for c in cells if (c.learner, c.adversary) == pair]
                horizons = [c.horizon for c in row]
                for statistic in ("max", "mean"):
                    values = [getattr(c, f"{statistic}_regret") for c in row]
                    fits.append(
                        ExponentFit(
                            learner,
                            adversary,
                            statistic,
                            *fit_exponent(horizons, values),
                        )
                    )
    return SweepReport(cells=cells, fits=fits)


def run_sweep(config: SweepConfig, progress: bool = True) -> SweepReport:
    return regret_curve(
        parse_list(config.learners),
        parse_list(config.adversaries),
        parse_list(config.t_grid, int),
        parse_list(config.seeds, int),
        LossKind.from_name(config.loss),
        config.learner,
        config.adversary,
        progress=progress,
    )


########################################################
# Diagnostics
########################################################
def round_to_grid(values: Sequence[float], k: int) -> np.ndarray:
    """Rounds each value to the nearest j/K, halves up."""
    values = np.asarray(values, dtype=np.float64)
    return np.floor(values * k + 0.5) / k


def _entropic_divergence(c: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Binary KL divergence D(c || z), z in (0, 1)."""
    return special.xlogy(c, c / z) + special.xlogy(
        1.0 - c, (1.0 - c) / (1.0 - z)
    )


def round_to_arcsin_grid(values: Sequence[float], k: int) -> np.ndarray:
    """Maps each value c to the arcsin-grid level z minimizing D(c || z)."""
    values = np.asarray(values, dtype=np.float64)
    grid = np.asarray(ew_entropic_grid(k))
    divergences = _entropic_divergence(values[:, None], grid[None, :])
    return grid[np.argmin(divergences, axis=1)]


def _rounded_fit(
    labels: Sequence[float], k: int, kind: LossKind
) -> Tuple[np.ndarray, np.ndarray]:
    kind = LossKind.from_name(kind)
    if kind is LossKind.ABSOLUTE:
        raise ValueError(
            "Discretization gap is defined for squared and entropic loss"
        )
    f_star = isotonic_fit(labels, kind).values
    if kind is LossKind.SQUARED:
        return f_star, round_to_grid(f_star, k)
    return f_star, round_to_arcsin_grid(f_star, k)


def discretization_gap(
    labels: Sequence[float], k: int, kind: LossKind = LossKind.SQUARED
) -> float:
    """L(f+) - L(f*), f* the isotonic fit and f+ its rounding to the K-grid.

    Labels are indexed by position; the reveal order does not enter.
    """
    f_star, f_plus = _rounded_fit(labels, k, kind)
    return total_loss(kind, labels, f_plus) - total_loss(kind, labels, f_star)


def discretization_divergence(
    labels: Sequence[float], k: int, kind: LossKind = LossKind.SQUARED
) -> float:
    """sum_t D(f*_t || f+_t).

    Equals `discretization_gap` because f* averages the labels on each of its
    level sets.
    """
    f_star, f_plus = _rounded_fit(labels, k, kind)
    if LossKind.from_name(kind) is LossKind.SQUARED:
        return math.fsum((f_plus - f_star) ** 2)
    return math.fsum(_entropic_divergence(f_star, f_plus))


def discretization_gap_bound(
    horizon: int, k: int, kind: LossKind = LossKind.SQUARED
) -> float:
    if LossKind.from_name(kind) is LossKind.SQUARED:
        return horizon / (4.0 * k * k)
    return (2.0 - math.sqrt(2.0)) * math.pi**2 * horizon / (k * k)


def regret_against(
    transcript: GameTranscript, comparator: IsotonicFunction
) -> float:
    """Learner loss minus the loss of a given isotonic comparator."""
    if len(comparator) != transcript.horizon:
        raise ProtocolError(
            f"Comparator has length {len(comparator)}, "
            f"game has T={transcript.horizon}"
        )
    comparator_loss = math.fsum(
        loss(transcript.loss_kind, t.label, comparator[t.index])
        for t in transcript.trials
    )
    return transcript.learner_loss() - comparator_loss
