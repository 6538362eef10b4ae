"""Exponential weights with a uniform prior over all of F.

Only the all-zeros, isotonic-order game has a closed-form marginal:
    p_t(z) ∝ (1 - z)^(T - t) G(z)^(t - 1),  G(z) = ∫_0^z exp(-x^2 / 2) dx,
so that is the only scenario this learner plays.
"""

import math

import numpy as np
from scipy import integrate, special

from isoreg.game_engine.core import UnsupportedScenarioError
from isoreg.game_engine.learners.base import BaseLearner, register


_QUAD_TOL = 1e-10
_PEAK_GRID = 4097


def _log_density(z: np.ndarray, t: int, horizon: int) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        g = math.sqrt(math.pi / 2.0) * special.erf(z / math.sqrt(2.0))
        log_g = np.log(g)
        log_phi = special.xlog1py(horizon - t, -z)
        if t > 1:
            log_phi = log_phi + (t - 1) * log_g
    return np.where(np.isnan(log_phi), -np.inf, log_phi)


def continuous_ew_predict(t: int, horizon: int) -> float:
    """Mean of the marginal of f_t after t - 1 zero labels, t is 1-based."""
    if not 1 <= t <= horizon:
        raise ValueError(f"Trial must lie in 1..{horizon}, got t={t}")

    # Shift the exponent by its peak so the integrand stays O(1).
    zs = np.linspace(0.0, 1.0, _PEAK_GRID)
    log_phi = _log_density(zs, t, horizon)
    peak = int(np.argmax(log_phi))
    shift = float(log_phi[peak])
    points = [zs[peak]] if 0 < peak < _PEAK_GRID - 1 else None

    def density(z):
        return math.exp(float(_log_density(z, t, horizon)) - shift)

    options = dict(epsabs=_QUAD_TOL, epsrel=_QUAD_TOL, limit=200, points=points)
    mass, _ = integrate.quad(density, 0.0, 1.0, **options)
    moment, _ = integrate.quad(lambda z: z * density(z), 0.0, 1.0, **options)
    return float(np.clip(moment / mass, 0.0, 1.0))


@register
class ContinuousEwLearner(BaseLearner):
    """Uniform-prior exponential weights, eta = 1/2.

    Plays only the all-zeros game in isotonic order.
    """

    name = "continuous-ew"

    def _predict(self, index: int) -> float:
        if index != len(self.labeled):
            raise UnsupportedScenarioError(
                f"continuous-ew needs isotonic order, got index {index} at "
                f"trial {len(self.labeled)}"
            )
        return continuous_ew_predict(index + 1, self.horizon)

    def _observe(self, index: int, y: float) -> None:
        if y != 0.0:
            raise UnsupportedScenarioError(
                f"continuous-ew has a closed form only for zero labels, "
                f"got {y!r}"
            )
