"""Regret of the covering-net learner against the lower-bound construction.

Plays one configured game, then sweeps T to exhibit the T^(1/3) growth and
writes everything under the output directory.

    python -m projects.regret_sweep.pipeline
"""

import os

from isoreg.game_engine import utils
from isoreg.game_engine.adversaries import AdversaryConfig
from isoreg.game_engine.engine import Game, GameConfig, SweepConfig, run_sweep
from isoreg.game_engine.learners import LearnerConfig
from isoreg.game_engine.setup import setup_environment


########################################################
# Configure a single game
########################################################
game_config = GameConfig(
    horizon=512,
    loss="squared",
    learner=LearnerConfig(name="ew-net"),  # K tuned from T
    adversary=AdversaryConfig(name="lb-segments", seed=7),
)


########################################################
# Configure the sweep
########################################################
sweep_config = SweepConfig(
    learners="ew-net,eg",
    adversaries="lb-segments,gd-killer-zeros",
    t_grid="64,128,256,512",
    seeds="0,1,2",
)


def run(base_dir: str = "", game=game_config, sweep=sweep_config):
    base_dir = setup_environment(base_dir)

    result = Game(game).play()
    utils.write_transcripts(
        os.path.join(base_dir, "game.csv"),
        [result],
        utils.provenance(game, game.adversary.seed),
    )

    report = run_sweep(sweep)
    meta = utils.provenance(sweep, 0)
    utils.write_json(
        os.path.join(base_dir, "sweep.json"),
        {**meta, "report": report.to_dict()},
    )
    utils.write_csv(
        os.path.join(base_dir, "sweep.csv"), utils.sweep_frame(report), meta
    )

    print(f"Game regret {result.regret:.4f} (bound {result.bound_value})")
    for fit in report.fits:
        pair = f"{fit.learner} vs {fit.adversary}"
        print(f"{pair} ({fit.statistic}): slope {fit.slope:.3f}")
    return result, report


if __name__ == "__main__":
    run()
