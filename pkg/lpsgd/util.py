import os
from enum import Enum
from pathlib import Path
from typing import Dict, Optional

import numpy as np
import pandas as pd
import ujson as json

from . import config, logger
from .constants import SUMMARY_PREFIX


def setting(value, default):
    """Missing config keys read as an empty addict.Dict; fall back for those only."""
    if isinstance(value, dict) and not value:
        return default
    return value


def output_dir(out: Optional[str] = None) -> Path:
    directory = out or os.getenv("LPSGD_OUT") or setting(config.output.directory, "lpsgd-output")
    path = Path(os.path.expandvars(str(directory))).expanduser()
    path.mkdir(parents=True, exist_ok=True)
    return path


def to_record(value):
    """Make numpy scalars, arrays and enums JSON-serializable."""
    if isinstance(value, dict):
        return {str(k): to_record(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_record(v) for v in value]
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, Enum):
        return value.value
    return value


def dumps(record: Dict) -> str:
    return json.dumps(to_record(record), sort_keys=True)


def float_repr(value) -> str:
    return repr(float(value))


def write_csv(frame: pd.DataFrame, path: Path, summary: Optional[Dict] = None) -> Path:
    """Write a CSV with shortest round-trip floats and a trailing summary comment."""
    text = frame.to_csv(index=False, float_format=float_repr, lineterminator="\n")
    if summary is not None:
        text += f"{SUMMARY_PREFIX}{dumps(summary)}\n"
    path = Path(path)
    path.write_text(text)
    logger.info("Wrote %s", path)
    return path


def read_csv(path: Path) -> pd.DataFrame:
    return pd.read_csv(path, comment="#")
