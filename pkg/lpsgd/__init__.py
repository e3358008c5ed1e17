__version__ = "0.3.0"

import pathlib  # isort:skip

root = pathlib.Path(__file__).parent  # isort:skip
APP_NAME = "LPSGD"

import kick  # isort:skip

kick.start(APP_NAME.lower())  # isort:skip

from kick import config, logger  # isort:skip

from .constants import *
from .exceptions import *
from .lowfloat import FloatFormat, lp_dot, lp_op, round_to_format, unit_roundoff
from .result import BoundReport
from .wrapper import Experiments
