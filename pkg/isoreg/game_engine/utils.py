import dataclasses
import json
import os
from typing import Any, Dict, List, Optional, Sequence

import pandas as pd

import isoreg
from isoreg.game_engine.engine import GameResult, SweepReport


# 17 significant digits round-trip every float64 exactly.
FLOAT_FORMAT = "%.17g"

TRANSCRIPT_COLUMNS = [
    "record",
    "learner",
    "adversary",
    "seed",
    "trial",
    "index",
    "prediction",
    "label",
    "loss",
    "learner_loss",
    "oracle_loss",
    "regret",
    "bound",
    "bound_satisfied",
]

SWEEP_COLUMNS = ["learner", "adversary", "horizon", "seed", "regret", "bound"]


def provenance(config: Any, seed: Optional[int] = None) -> Dict[str, Any]:
    """Version, config echo and master seed embedded in every output."""
    echo = config
    if dataclasses.is_dataclass(config):
        echo = dataclasses.asdict(config)
    return {"version": isoreg.__version__, "config": echo, "seed": seed}


def _prepare(path: str) -> str:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    return path


def transcript_frame(results: Sequence[GameResult]) -> pd.DataFrame:
    """One row per trial, then one summary row per game."""
    rows: List[Dict[str, Any]] = []
    for result in results:
        losses = result.transcript.trial_losses()
        for trial, trial_loss in zip(result.transcript.trials, losses):
            rows.append(
                {
                    "record": "trial",
                    "learner": result.learner,
                    "adversary": result.adversary,
                    "seed": result.seed,
                    "trial": trial.trial,
                    "index": trial.index,
                    "prediction": trial.prediction,
                    "label": trial.label,
                    "loss": trial_loss,
                }
            )
        summary = result.summary
        rows.append(
            {
                "record": "summary",
                "learner": result.learner,
                "adversary": result.adversary,
                "seed": result.seed,
                **{k: summary[k] for k in TRANSCRIPT_COLUMNS[9:]},
            }
        )
    frame = pd.DataFrame(rows, columns=TRANSCRIPT_COLUMNS)
    for column in ("seed", "trial", "index"):
        frame[column] = frame[column].astype("Int64")
    return frame


def write_csv(path: str, frame: pd.DataFrame, meta: Dict[str, Any]) -> str:
    """Writes `meta` as leading '# ' lines, then the frame with a fixed header.

    Read back with `pd.read_csv(path, comment="#")`.
    """
    _prepare(path)
    with open(path, "w", newline="") as f:
        for key in sorted(meta):
            f.write(f"# {key}: {json.dumps(meta[key], sort_keys=True)}\n")
        frame.to_csv(
            f, index=False, float_format=FLOAT_FORMAT, lineterminator="\n"
        )
    return path


def write_json(path: str, payload: Dict[str, Any]) -> str:
    _prepare(path)
    with open(path, "w") as f:
        json.dump(payload, f, sort_keys=True, indent=2)
        f.write("\n")
    return path


def write_transcripts(
    path: str,
    results: Sequence[GameResult],
    meta: Dict[str, Any],
    fmt: str = "csv",
) -> str:
    if fmt == "csv":
        return write_csv(path, transcript_frame(results), meta)
    if fmt == "json":
        games = [
            {
                "summary": result.summary,
                "trials": [
                    {**trial._asdict(), "loss": trial_loss}
                    for trial, trial_loss in zip(
                        result.transcript.trials,
                        result.transcript.trial_losses(),
                    )
                ],
            }
            for result in results
        ]
        return write_json(path, {**meta, "games": games})
    raise ValueError(f"Unknown output format {fmt!r} (valid: csv, json)")


def sweep_frame(report: SweepReport) -> pd.DataFrame:
    """Flat (learner, adversary, T, seed, regret, bound) rows for plotting."""
    rows = [
        {
            "learner": cell.learner,
            "adversary": cell.adversary,
            "horizon": cell.horizon,
            "seed": seed,
            "regret": regret,
            "bound": bound,
        }
        for cell in report.cells
        for seed, regret, bound in zip(cell.seeds, cell.regrets, cell.bounds)
    ]
    frame = pd.DataFrame(rows, columns=SWEEP_COLUMNS)
    return frame.sort_values(SWEEP_COLUMNS[:4], kind="stable")
