#!/usr/bin/env python3
import sys

import fire

from . import logger
from .client import ExperimentClient
from .constants import ExitStatus
from .exceptions import BoundViolation, LpsgdException
from .mixins import AnalysisMixin, LogregMixin, SyntheticMixin
from .util import dumps

# lazily computed state, never a subcommand
HIDDEN = {"settings", "output", "dataset", "logreg_problem", "logreg_start", "logreg_reference", "holder_fit"}


class Experiments(ExperimentClient, SyntheticMixin, LogregMixin, AnalysisMixin):
    """Low-precision SGD experiments: synthetic power-norm runs, logistic regression and bound checks."""

    # keyword-only: positional words and the remaining flags belong to the subcommand
    def __init__(self, *, config=None, seed=None, out=None):
        super().__init__(config=config, seed=seed, out=out)

    def __dir__(self):
        names = super().__dir__()
        names = [name for name in names if not name.startswith("_") and name not in HIDDEN]
        return names


def _serialize(result):
    return dumps(result) if isinstance(result, dict) else result


def main(argv=None):
    """Main function."""
    try:
        fire.Fire(Experiments, command=argv, serialize=_serialize)
    except BoundViolation as exc:
        logger.error("%s", exc)
        sys.exit(ExitStatus.BOUND_VIOLATION)
    except LpsgdException as exc:
        logger.error("%s", exc)
        sys.exit(ExitStatus.USAGE)
    except KeyboardInterrupt:
        print("Quitting")


if __name__ == "__main__":
    main()
