"""CSV persistence for run logs, per-repetition summaries and aggregates"""
import os
from dataclasses import dataclass
from pathlib import Path
from typing import List, Sequence

import numpy as np
import pandas as pd

from ..errors import ConfigError, UsageError
from ..utils.logger import setup_logger
from .models import RUNLOG_HEADER, RunLog

logger = setup_logger(__name__)

SUMMARY_HEADER = ("rep", "stream", "final_best_train", "final_best_test", "metric",
                  "evaluations", "elapsed_s")
AGGREGATE_HEADER = ("setup", "repetitions", "metric", "median_test", "mean_test",
                    "median_train", "mean_train", "median_elapsed_s", "mean_elapsed_s")

# 17 significant digits round-trip every double
FLOAT_FORMAT = "%.17g"


def prepare_output_dir(out_dir) -> Path:
    """Create ``out_dir`` if needed and make sure it is writable

    Raises:
        ConfigError: if the directory cannot be created or written to
    """
    path = Path(out_dir)
    try:
        path.mkdir(parents=True, exist_ok=True)
    except PermissionError as e:
        raise ConfigError(
            f"Cannot create output directory '{path}': {e}\n"
            f"Choose another --out directory or fix its permissions (e.g. chmod u+w on the parent)."
        ) from e
    except OSError as e:
        raise ConfigError(
            f"Cannot create output directory '{path}': {e}\n"
            f"Please check that the path is valid and you have write permissions."
        ) from e

    if not os.access(path, os.W_OK):
        raise ConfigError(
            f"Output directory '{path}' is not writable.\n"
            f"Choose another --out directory or fix its permissions (e.g. chmod u+w '{path}')."
        )
    return path


def write_runlog(log: RunLog, path) -> Path:
    frame = pd.DataFrame([row.as_record() for row in log.rows], columns=list(RUNLOG_HEADER))
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    logger.debug(f"Wrote {len(frame)} generation rows to {path}")
    return Path(path)


@dataclass(frozen=True)
class SummaryRow:
    rep: int
    stream: int
    final_best_train: float
    final_best_test: float
    metric: str
    evaluations: int
    elapsed_s: float

    @classmethod
    def from_runlog(cls, rep: int, stream: int, log: RunLog) -> "SummaryRow":
        final = log.final
        return cls(rep, stream, final.best_train, final.best_test, log.test_metric,
                   final.evaluations, final.elapsed_s)


def write_summary(rows: Sequence[SummaryRow], path) -> Path:
    frame = pd.DataFrame([vars(r) for r in rows], columns=list(SUMMARY_HEADER))
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    logger.info(f"Wrote summary of {len(frame)} repetition(s) to {path}")
    return Path(path)


def read_summary(path) -> pd.DataFrame:
    """Load a summary file, sorted by repetition

    Raises:
        UsageError: if the file is missing or lacks summary columns
    """
    path = Path(path)
    if not path.exists():
        raise UsageError(f"Summary file not found: {path}")
    frame = pd.read_csv(path)
    missing = [c for c in SUMMARY_HEADER if c not in frame.columns]
    if missing:
        raise UsageError(f"{path}: not a summary file, missing column(s) {', '.join(missing)}")
    return frame.sort_values("rep").reset_index(drop=True)


def aggregate(rows: Sequence[SummaryRow], setup: str) -> dict:
    test = np.array([r.final_best_test for r in rows], dtype=float)
    train = np.array([r.final_best_train for r in rows], dtype=float)
    elapsed = np.array([r.elapsed_s for r in rows], dtype=float)
    # nan when the setup has no test split
    return {
        "setup": setup,
        "repetitions": len(rows),
        "metric": rows[0].metric if rows else "",
        "median_test": float(np.median(test)) if len(test) else float("nan"),
        "mean_test": float(np.mean(test)) if len(test) else float("nan"),
        "median_train": float(np.median(train)) if len(train) else float("nan"),
        "mean_train": float(np.mean(train)) if len(train) else float("nan"),
        "median_elapsed_s": float(np.median(elapsed)) if len(elapsed) else float("nan"),
        "mean_elapsed_s": float(np.mean(elapsed)) if len(elapsed) else float("nan"),
    }


def write_aggregate(records: List[dict], path) -> Path:
    pd.DataFrame(records, columns=list(AGGREGATE_HEADER)).to_csv(path, index=False, float_format=FLOAT_FORMAT)
    return Path(path)
