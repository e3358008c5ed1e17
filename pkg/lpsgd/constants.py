import re
from enum import Enum, IntEnum


class NoiseKind(Enum):
    NONE = "none"
    UNIFORM = "uniform"
    ARITHMETIC = "arithmetic"


class DomainKind(Enum):
    UNCONSTRAINED = "unconstrained"
    BALL = "ball"


class FitMode(Enum):
    LEAST_SQUARES = "least-squares"
    MAJORIZING = "majorizing"


class RoundingFlag(Enum):
    EXACT = "exact"
    INEXACT = "inexact"
    OVERFLOW = "overflow"
    UNDERFLOW = "underflow"


class Op(Enum):
    ADD = "+"
    SUB = "-"
    MUL = "*"
    DIV = "/"


OP_ALIASES = {"×": Op.MUL, "x": Op.MUL, "−": Op.SUB, "÷": Op.DIV}


class StepRule(Enum):
    FIXED = "fixed"
    AUTO_COROLLARY1 = "auto-corollary1"
    AUTO_COROLLARY2 = "auto-corollary2"


class Theorem(Enum):
    DETERMINISTIC = "theorem1"
    FINITE_K = "theorem2"
    STOCHASTIC = "theorem3"


class LogregMode(Enum):
    WORKING = "a"
    BFLOAT = "b"
    BFLOAT_GRADIENTS = "c"
    NARROW_ACCUMULATOR = "d"


class Stream(IntEnum):
    GRADIENT = 0
    UPDATE = 1
    BATCH = 2
    PROBE = 3


class ExitStatus(IntEnum):
    SUCCESS = 0
    BOUND_VIOLATION = 1
    USAGE = 2


class IdxMagic(IntEnum):
    LABELS = 0x00000801
    IMAGES = 0x00000803


FORMAT_RE = re.compile(r"^e(?P<exponent>\d+)m(?P<fraction>\d+)(?P<ftz>fz)?$")
BFLOAT16 = "e8m7"
SINGLE = "e8m23"
WORKING = "e11m52"

# (gradient multiplier, gradient accumulator, weight update)
LOGREG_MODE_FORMATS = {
    LogregMode.WORKING: (WORKING, WORKING, WORKING),
    LogregMode.BFLOAT: (BFLOAT16, "e8m15", BFLOAT16),
    LogregMode.BFLOAT_GRADIENTS: (BFLOAT16, "e8m15", WORKING),
    LogregMode.NARROW_ACCUMULATOR: (BFLOAT16, "e8m10", WORKING),
}

TRAJECTORY_COLUMNS = ("k", "loss", "min_loss", "dist_to_opt", "norm_r", "norm_s")
BOUND_COLUMNS = ("bound_det", "bound_stoch", "bound_finiteK")
SUMMARY_PREFIX = "# summary: "
DIVERGENCE_PATIENCE = 50
MIN_PROBE_STEPS = 30
MIN_LEMMA1_RESOLUTION = 100
