import math

import addict

from .constants import BOUND_COLUMNS, Theorem
from .util import dumps

COLUMN_THEOREMS = dict(zip(BOUND_COLUMNS, (Theorem.DETERMINISTIC, Theorem.STOCHASTIC, Theorem.FINITE_K)))


class BoundReport(addict.Dict):
    """Bound values keyed by theorem id, with validity flags and step sizes."""

    def add(self, theorem, value, valid=True, vacuous=False, reason="", **extra):
        theorem = Theorem(theorem)
        self.bounds[theorem.value] = addict.Dict(
            theorem=theorem.value, value=float(value), valid=valid, vacuous=vacuous, reason=reason, **extra
        )
        return self

    def bound(self, theorem):
        entry = self.bounds.get(Theorem(theorem).value)
        if entry is None or not entry.valid:
            return None
        return entry.value

    def flags(self):
        return {
            key: {"valid": entry.valid, "vacuous": entry.vacuous}
            for key, entry in self.bounds.items()
        }

    def columns(self, include=BOUND_COLUMNS):
        """Constant-valued CSV columns; invalid or missing bounds become NaN."""
        values = {}
        for column in include:
            value = self.bound(COLUMN_THEOREMS[column])
            values[column] = math.nan if value is None else value
        return values

    def to_text(self):
        return dumps(self.to_dict())

    def __str__(self):
        return self.to_text()
