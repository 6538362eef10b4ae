"""Command-line front end: `isoreg run|sweep|verify [--flags]`.

Flags are parsed by pyrallis into the dataclass configs below; a YAML file
given with `--config_path` supplies defaults and explicit flags win.
"""

import os
import sys
from dataclasses import dataclass, field, fields, is_dataclass
from typing import List, Optional, Set

import pandas as pd
import pyrallis
from absl import logging

from isoreg import acceptance
from isoreg.game_engine.adversaries import AdversaryConfig, adversary_registry
from isoreg.game_engine.core import IsoregError, LossKind
from isoreg.game_engine.engine import (
    Game,
    GameConfig,
    SweepConfig,
    parse_list,
    run_sweep,
)
from isoreg.game_engine.learners import LearnerConfig, learner_registry
from isoreg.game_engine.setup import resolve_output_path, setup_environment
from isoreg.game_engine.utils import (
    provenance,
    sweep_frame,
    write_csv,
    write_json,
    write_transcripts,
)


FORMATS = ("csv", "json")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_FAILED = 2


def _check_names(kind: str, names: List[str], registry) -> None:
    for name in names:
        if name not in registry:
            valid = ", ".join(sorted(registry))
            raise ValueError(f"Unknown {kind} {name!r} (valid: {valid})")


@dataclass
class RunConfig:
    """Plays one learner against one adversary for each seed."""

    learner: str = "ew-net"
    adversary: str = "lb-segments"
    t: int = 64
    loss: str = "squared"
    seed: int = 0
    # Comma-separated seeds; overrides `seed` when set.
    seeds: str = ""

    output: str = "run.csv"
    format: str = "csv"
    assert_bounds: bool = False
    # Results and the JAX cache live here; $ISOREG_OUTPUT_DIR or cwd if empty.
    base_dir: str = ""

    learner_params: LearnerConfig = field(default_factory=LearnerConfig)
    adversary_params: AdversaryConfig = field(default_factory=AdversaryConfig)

    def seed_list(self) -> List[int]:
        return parse_list(self.seeds, int) if self.seeds else [self.seed]

    def validate(self) -> None:
        _check_names("learner", [self.learner], learner_registry)
        _check_names("adversary", [self.adversary], adversary_registry)
        LossKind.from_name(self.loss)
        if self.format not in FORMATS:
            raise ValueError(
                f"Unknown format {self.format!r} (valid: csv, json)"
            )
        if self.t < 1:
            raise ValueError(f"T must be positive, got {self.t}")


@dataclass
class SweepCliConfig(SweepConfig):
    """Regret sweep; writes a JSON report and a flat CSV next to it."""

    output: str = "sweep.json"
    csv_output: str = ""
    assert_bounds: bool = False
    base_dir: str = ""

    def validate(self) -> None:
        _check_names("learner", parse_list(self.learners), learner_registry)
        _check_names(
            "adversary", parse_list(self.adversaries), adversary_registry
        )
        LossKind.from_name(self.loss)
        if not parse_list(self.seeds, int):
            raise ValueError("A sweep needs at least one seed")
        if not parse_list(self.t_grid, int):
            raise ValueError("A sweep needs at least one horizon")


@dataclass
class VerifyConfig:
    """Runs the built-in acceptance checks."""

    # Comma-separated substrings of check names, e.g. "minimax".
    only: str = ""
    quick: bool = False


def cmd_run(config: RunConfig) -> int:
    try:
        config.validate()
        setup_environment(config.base_dir)
        results = []
        for seed in config.seed_list():
            game_config = GameConfig(
                horizon=config.t,
                loss=config.loss,
                learner=LearnerConfig(
                    **{**vars(config.learner_params), "name": config.learner}
                ),
                adversary=AdversaryConfig(
                    **{
                        **vars(config.adversary_params),
                        "name": config.adversary,
                        "seed": seed,
                    }
                ),
            )
            results.append(Game(game_config).play())
    except IsoregError as e:
        logging.error(f"run aborted: {e}")
        return EXIT_ERROR
    except ValueError as e:
        logging.error(f"invalid configuration: {e}")
        return EXIT_ERROR
    except OSError as e:
        logging.error(f"cannot prepare output directory: {e}")
        return EXIT_ERROR

    path = resolve_output_path(config.output)
    try:
        meta = provenance(config, config.seed_list()[0])
        write_transcripts(path, results, meta, config.format)
    except OSError as e:
        logging.error(f"cannot write {path}: {e}")
        return EXIT_ERROR

    for result in results:
        s = result.summary
        print(
            f"seed={s['seed']} learner_loss={s['learner_loss']:.6f} "
            f"oracle_loss={s['oracle_loss']:.6f} regret={s['regret']:.6f} "
            f"bound={s['bound']} satisfied={s['bound_satisfied']}"
        )
    if config.assert_bounds and not all(r.bound_satisfied for r in results):
        logging.error("regret bound violated")
        return EXIT_FAILED
    return EXIT_OK


def cmd_sweep(config: SweepCliConfig) -> int:
    try:
        config.validate()
        setup_environment(config.base_dir)
        report = run_sweep(config)
    except ValueError as e:
        logging.error(f"invalid configuration: {e}")
        return EXIT_ERROR
    except OSError as e:
        logging.error(f"cannot prepare output directory: {e}")
        return EXIT_ERROR

    json_path = resolve_output_path(config.output)
    csv_path = resolve_output_path(
        config.csv_output or os.path.splitext(config.output)[0] + ".csv"
    )
    meta = provenance(config, parse_list(config.seeds, int)[0])
    try:
        write_json(json_path, {**meta, "report": report.to_dict()})
        write_csv(csv_path, sweep_frame(report), meta)
    except OSError as e:
        logging.error(f"cannot write sweep results: {e}")
        return EXIT_ERROR

    for fit in report.fits:
        print(
            f"{fit.learner} vs {fit.adversary} ({fit.statistic}): "
            f"slope={fit.slope:.4f} residual={fit.residual:.3g}"
        )
    if config.assert_bounds and report.violations:
        logging.error(f"{report.violations} bound violations")
        return EXIT_FAILED
    return EXIT_OK


def cmd_verify(config: VerifyConfig) -> int:
    if not acceptance.select_checks(config.only):
        logging.error(f"no check matches {config.only!r}")
        return EXIT_ERROR
    results = acceptance.run_checks(config.only, config.quick)
    table = pd.DataFrame(
        {
            "check": [r.name for r in results],
            "status": ["PASS" if r.passed else "FAIL" for r in results],
            "seconds": [round(r.seconds, 2) for r in results],
            "detail": [r.detail for r in results],
        }
    )
    print(table.to_string(index=False))
    return EXIT_OK if all(r.passed for r in results) else EXIT_FAILED


COMMANDS = {
    "run": (RunConfig, cmd_run),
    "sweep": (SweepCliConfig, cmd_sweep),
    "verify": (VerifyConfig, cmd_verify),
}


def _bool_flags(config_class, prefix: str = "") -> Set[str]:
    """Dotted names of every bool field, nested configs included."""
    names = set()
    for f in fields(config_class):
        if f.type is bool:
            names.add(prefix + f.name)
        elif is_dataclass(f.type):
            names |= _bool_flags(f.type, f"{prefix}{f.name}.")
    return names


def normalize_flags(args: List[str], config_class) -> List[str]:
    """Accepts `--assert-bounds` style spellings and bare boolean switches.

    Option names have hyphens mapped to underscores; a bool option with no
    value is read as `true`.
    """
    bools = _bool_flags(config_class)
    out = []
    for i, arg in enumerate(args):
        if not arg.startswith("--") or len(arg) == 2:
            out.append(arg)
            continue
        name, sep, value = arg[2:].partition("=")
        name = name.replace("-", "_")
        out.append(f"--{name}{sep}{value}")
        bare = i + 1 == len(args) or args[i + 1].startswith("--")
        if name in bools and not sep and bare:
            out.append("true")
    return out


def main(argv: Optional[List[str]] = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    if not argv or argv[0] not in COMMANDS:
        usage = f"usage: isoreg {{{','.join(COMMANDS)}}} [--flags]"
        print(usage, file=sys.stderr)
        return EXIT_ERROR
    config_class, command = COMMANDS[argv[0]]
    args = normalize_flags(argv[1:], config_class)
    try:
        config = pyrallis.parse(config_class=config_class, args=args)
    except SystemExit as e:
        return EXIT_OK if not e.code else EXIT_ERROR
    return command(config)


if __name__ == "__main__":
    sys.exit(main())
