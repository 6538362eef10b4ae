"""Built-in acceptance checks run by `isoreg verify`.

Each check returns a CheckResult; `quick=True` shrinks horizons and seed
counts so the suite runs in seconds.
"""

import functools
import math
import time
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional

import jax
import jax.numpy as jnp
import numpy as np
from absl import logging

from isoreg.game_engine import core, oracle
from isoreg.game_engine.adversaries import AdversaryConfig
from isoreg.game_engine.engine import (
    Game,
    GameConfig,
    discretization_divergence,
    discretization_gap,
    discretization_gap_bound,
    regret_curve,
)
from isoreg.game_engine.learners import LearnerConfig, net
from isoreg.game_engine.learners.continuous import continuous_ew_predict
from isoreg.game_engine.learners.minimax import (
    minimax_alpha_table,
    minimax_beta_table,
)


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0


def _play(
    learner: str,
    adversary: str,
    horizon: int,
    loss: str = "squared",
    seed: int = 0,
    learner_config: Optional[LearnerConfig] = None,
):
    learner_config = learner_config or LearnerConfig(name=learner)
    config = GameConfig(
        horizon=horizon,
        loss=loss,
        learner=learner_config,
        adversary=AdversaryConfig(name=adversary, seed=seed),
    )
    return Game(config).play()


def check_dp_equivalence(quick: bool = False) -> CheckResult:
    rng = np.random.default_rng(0)
    games = 40 if quick else 200
    worst = 0.0
    for game in range(games):
        kind = core.LossKind.SQUARED if game % 2 == 0 else core.LossKind.ENTROPIC
        horizon = int(rng.integers(1, 7))
        if kind is core.LossKind.SQUARED:
            k = int(rng.integers(1, 4))
            grid, eta = net.squared_grid(k), net.SQUARED_ETA
        else:
            k = int(rng.integers(2, 4))
            grid, eta = net.ew_entropic_grid(k), net.ENTROPIC_ETA
        state = net.NetWeightsState.create(horizon, grid, eta, kind)
        history = []
        for index in rng.permutation(horizon):
            index = int(index)
            fast = net.ew_net_predict(state, index)
            naive = net.ew_net_naive_predict(
                grid, history, index, horizon, eta, kind
            )
            worst = max(worst, abs(fast - naive) / max(abs(naive), 1e-300))
            y = float(rng.uniform())
            state = net.ew_net_observe(state, index, y)
            history.append((index, y))
    return CheckResult(
        "dp-equivalence",
        worst <= 1e-9,
        f"{games} games, max rel err {worst:.2e}",
    )


def _bound_matrix(
    learner: str,
    adversaries: List[str],
    horizons: List[int],
    seeds: int,
    loss: str = "squared",
) -> CheckResult:
    violations, games, worst = 0, 0, -math.inf
    for adversary in adversaries:
        # Only the lower-bound construction varies with the seed.
        adversary_seeds = range(seeds if adversary == "lb-segments" else 1)
        for horizon in horizons:
            for seed in adversary_seeds:
                result = _play(learner, adversary, horizon, loss, seed)
                games += 1
                violations += not result.bound_satisfied
                if result.bound_value:
                    worst = max(worst, result.regret / result.bound_value)
    return CheckResult(
        "",
        violations == 0,
        f"{games} games, {violations} violations, max regret/bound {worst:.3f}",
    )


def check_ew_net_bound(quick: bool = False) -> CheckResult:
    horizons = [64, 128] if quick else [64, 128, 256, 512, 1024, 2048, 4096]
    adversaries = [
        "lb-segments",
        "gd-killer-zeros",
        "gd-killer-ones",
        "random-iso",
        "random-order",
    ]
    result = _bound_matrix("ew-net", adversaries, horizons, 2 if quick else 20)
    result.name = "ew-net-bound"
    return result


def _shapes(jaxpr):
    """Shapes of every intermediate in a jaxpr, nested calls included."""
    for eqn in jaxpr.eqns:
        for var in eqn.outvars:
            yield var.aval.shape
        for param in eqn.params.values():
            inner = getattr(param, "jaxpr", param)
            if hasattr(inner, "eqns"):
                yield from _shapes(inner)


def check_fast_path(quick: bool = False) -> CheckResult:
    rng = np.random.default_rng(1)
    cases = [(20, 3), (50, 10)]
    if not quick:
        cases += [(200, 5), (200, 10)]
    worst = 0.0
    for horizon, k in cases:
        state = net.NetWeightsState.create(
            horizon, net.squared_grid(k), net.SQUARED_ETA
        )
        for t in range(horizon):
            fast = net.ew_net_predict_isotonic_fast(state, t)
            slow = net.ew_net_predict(state, t)
            worst = max(worst, abs(fast - slow))
            state = net.ew_net_observe(state, t, float(rng.uniform()))

    # No array in the fast kernel may carry a T-sized axis.
    k = 5
    kernel = functools.partial(net._isotonic_marginal, horizon=10_000)
    jaxpr = jax.make_jaxpr(kernel)(jnp.zeros(k + 1), net.squared_grid(k), 0)
    widest = max(
        (max(shape, default=1) for shape in _shapes(jaxpr.jaxpr)), default=1
    )
    return CheckResult(
        "fast-path",
        worst <= 1e-10 and widest <= k + 1,
        f"max abs diff {worst:.2e}, widest kernel array {widest} at T=10000",
    )


def check_killer_sequences(quick: bool = False) -> CheckResult:
    horizons = [100] if quick else [100, 1000]
    failures = []
    for horizon in horizons:
        f0 = core.IsotonicFunction.diagonal(horizon)
        for name, param in [("ogd", e) for e in (0.1, 0.5, 1.0)] + [
            ("ftrl", lam) for lam in (0.1, 1.0, 10.0)
        ]:
            config = LearnerConfig(name=name, init="diagonal")
            if name == "ogd":
                config.eta = param
            else:
                config.lam = param
            zeros = _play(
                name, "gd-killer-zeros", horizon, learner_config=config
            )
            ones = _play(name, "gd-killer-ones", horizon, learner_config=config)
            if max(zeros.regret, ones.regret) < horizon / 4.0 - 1e-6:
                failures.append(f"{name}({param}) T={horizon}")
            if name == "ogd":
                expected_zeros = math.fsum(f0.values**2)
                expected_ones = math.fsum((1.0 - f0.values) ** 2)
                if abs(zeros.learner_loss - expected_zeros) > 1e-9:
                    failures.append(f"ogd({param}) zeros loss T={horizon}")
                if abs(ones.learner_loss - expected_ones) > 1e-9:
                    failures.append(f"ogd({param}) ones loss T={horizon}")
    detail = "all linear" if not failures else "failed: " + ", ".join(failures)
    return CheckResult("killer-sequences", not failures, detail)


def check_continuous_ew(quick: bool = False) -> CheckResult:
    horizon = 32 if quick else 1024
    late = [
        continuous_ew_predict(t, horizon)
        for t in range(horizon // 2 + 1, horizon + 1)
    ]
    smallest = min(late)
    # The late trials alone already carry at least T/128 loss.
    late_loss = math.fsum(p * p for p in late)
    return CheckResult(
        "continuous-ew",
        smallest >= 0.125 and late_loss >= horizon / 128.0,
        f"T={horizon}: min late prediction {smallest:.4f}, "
        f"late loss {late_loss:.3f}",
    )


def check_minimax_anyorder(quick: bool = False) -> CheckResult:
    failures = []
    for horizon in (1, 3, 7, 15, 31, 63):
        result = _play("minimax-any", "midpoint", horizon)
        value = core.anyorder_minimax_value_bound(horizon)
        if abs(result.learner_loss - value) > 1e-8:
            failures.append(f"midpoint T={horizon}: {result.learner_loss:.10f}")
    rng = np.random.default_rng(2)
    for seed in range(10 if quick else 100):
        horizon = int(rng.integers(1, 64))
        result = _play("minimax-any", "random-order", horizon, seed=seed)
        value = core.anyorder_minimax_value_bound(horizon)
        if result.learner_loss > value + 1e-8:
            failures.append(f"random-order seed={seed} T={horizon}")
    beta = minimax_beta_table(2048)
    ns = np.arange(2049)
    if np.any(beta > 0.25 * np.log2(ns + 1) + 1e-12):
        failures.append("beta table above 1/4 log2(n+1)")
    detail = "exact value reached"
    if failures:
        detail = "failed: " + ", ".join(failures)
    return CheckResult("minimax-anyorder", not failures, detail)


def check_minimax_isotonic(quick: bool = False) -> CheckResult:
    top = 16 if quick else 64
    alpha = minimax_alpha_table(top)
    failures = []
    if np.any(alpha > 1.0):
        failures.append("alpha above 1")
    for horizon in range(1, top + 1):
        result = _play("minimax-iso", "greedy-iso", horizon)
        if abs(result.learner_loss - alpha[horizon]) > 1e-9:
            failures.append(f"T={horizon}: {result.learner_loss:.10f}")
    for horizon in ([4, 16] if quick else [4, 16, 64]):
        result = _play("ew-net", "greedy-iso", horizon)
        if result.learner_loss < alpha[horizon] - 1e-9:
            failures.append(f"ew-net below alpha_T at T={horizon}")
    detail = "exact value reached"
    if failures:
        detail = "failed: " + ", ".join(failures)
    return CheckResult("minimax-isotonic", not failures, detail)


def check_ew_entropic_bound(quick: bool = False) -> CheckResult:
    horizons = [32, 64] if quick else [64, 256, 1024, 2048]
    result = _bound_matrix(
        "ew-entropic",
        ["random-iso", "random-order", "noisy-iso"],
        horizons,
        1,
        "entropic",
    )
    result.name = "ew-entropic-bound"
    return result


def check_eg_bound(quick: bool = False) -> CheckResult:
    horizons = [64, 128] if quick else [64, 256, 1024, 4096]
    adversaries = [
        "lb-segments",
        "gd-killer-zeros",
        "gd-killer-ones",
        "random-iso",
        "random-order",
        "noisy-iso",
        "coin-flips",
    ]
    squared = _bound_matrix("eg", adversaries, horizons, 2 if quick else 5)

    report = regret_curve(
        ["eg"],
        ["coin-flips"],
        horizons,
        list(range(3)),
        core.LossKind.ABSOLUTE,
        progress=False,
    )
    slope = report.fit_for("eg", "coin-flips", "mean").slope
    passed = squared.passed and slope <= 0.6
    return CheckResult(
        "eg-bound",
        passed,
        f"squared: {squared.detail}; absolute slope {slope:.3f}",
    )


def check_discretization(quick: bool = False) -> CheckResult:
    rng = np.random.default_rng(3)
    instances = 100 if quick else 1000
    failures = 0
    for _ in range(instances):
        horizon = int(rng.integers(1, 101))
        k = int(rng.integers(1, 11))
        labels = rng.uniform(size=horizon)
        gap = discretization_gap(labels, k)
        divergence = discretization_divergence(labels, k)
        if gap > discretization_gap_bound(horizon, k) + 1e-12:
            failures += 1
        elif abs(gap - divergence) > 1e-10:
            failures += 1
        if k >= 2:
            kind = core.LossKind.ENTROPIC
            if discretization_gap(labels, k, kind) > discretization_gap_bound(
                horizon, k, kind
            ):
                failures += 1
    return CheckResult(
        "discretization",
        failures == 0,
        f"{instances} instances, {failures} failures",
    )


def check_lower_bound_slope(quick: bool = False) -> CheckResult:
    horizons = [2**p for p in (range(6, 9) if quick else range(6, 14))]
    seeds = list(range(3 if quick else 20))
    report = regret_curve(
        ["ew-net"], ["lb-segments"], horizons, seeds, progress=False
    )
    fit = report.fit_for("ew-net", "lb-segments", "max")
    return CheckResult(
        "lower-bound-slope",
        0.25 <= fit.slope <= 0.50,
        f"slope {fit.slope:.3f} over T={horizons[0]}..{horizons[-1]}, "
        f"{len(seeds)} seeds, residual {fit.residual:.3g}",
    )


def check_pava(quick: bool = False) -> CheckResult:
    rng = np.random.default_rng(4)
    failures = []
    for _ in range(100 if quick else 1000):
        horizon = int(rng.integers(1, 51))
        labels = rng.uniform(size=horizon)
        weights = rng.uniform(0.1, 2.0, size=horizon)
        fit = oracle.pava(labels, weights)
        if np.any(np.diff(fit.values) < -1e-12):
            failures.append("non-monotone fit")
        for start, stop in fit.level_sets:
            block = slice(start, stop)
            mean = np.dot(labels[block], weights[block]) / weights[block].sum()
            if np.max(np.abs(fit.values[block] - mean)) > 1e-12:
                failures.append("level set off its weighted mean")

    for _ in range(5 if quick else 20):
        horizon = int(rng.integers(1, 7))
        labels = rng.uniform(0.01, 0.99, size=horizon)
        for kind in (core.LossKind.SQUARED, core.LossKind.ENTROPIC):
            brute, _ = oracle.grid_isotonic_minimum(labels, 20, kind)
            if oracle.isotonic_loss(labels, kind) > brute + 1e-12:
                failures.append(
                    f"{kind.value} fit beaten by grid at T={horizon}"
                )
    detail = "; ".join(sorted(set(failures))) or "all properties hold"
    return CheckResult("pava", not failures, detail)


# Maps check names to check functions, in reporting order.
CHECKS: Dict[str, Callable[[bool], CheckResult]] = {
    "dp-equivalence": check_dp_equivalence,
    "ew-net-bound": check_ew_net_bound,
    "fast-path": check_fast_path,
    "killer-sequences": check_killer_sequences,
    "continuous-ew": check_continuous_ew,
    "minimax-anyorder": check_minimax_anyorder,
    "minimax-isotonic": check_minimax_isotonic,
    "ew-entropic-bound": check_ew_entropic_bound,
    "eg-bound": check_eg_bound,
    "discretization": check_discretization,
    "lower-bound-slope": check_lower_bound_slope,
    "pava": check_pava,
}


def select_checks(only: str = "") -> List[str]:
    """Check names containing any of the comma-separated filters."""
    filters = [f.strip() for f in only.split(",") if f.strip()]
    if not filters:
        return list(CHECKS)
    return [name for name in CHECKS if any(f in name for f in filters)]


def run_checks(only: str = "", quick: bool = False) -> List[CheckResult]:
    results = []
    for name in select_checks(only):
        start = time.perf_counter()
        try:
            result = CHECKS[name](quick)
        except core.IsoregError as e:
            result = CheckResult(name, False, f"{type(e).__name__}: {e}")
        result.seconds = time.perf_counter() - start
        status = "PASS" if result.passed else "FAIL"
        logging.info(f"{name}: {status} ({result.detail})")
        results.append(result)
    return results
