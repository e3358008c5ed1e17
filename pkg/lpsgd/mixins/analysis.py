from pathlib import Path

import addict
import pandas as pd
import toml

from .. import logger
from ..bounds import (
    BoundInputs,
    compute_bounds,
    lemma1_attained,
    lemma1_brute_force,
    lemma1_closed_form,
    lemma1_instances,
)
from ..constants import FitMode
from ..exceptions import BoundViolation, ConfigError, DomainError
from ..problems import fit_holder
from ..util import read_csv, setting

INPUT_FIELDS = BoundInputs._fields


class AnalysisMixin:
    """Direct access to the bounds, the noise-maximum oracle and the estimators."""

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)

    @staticmethod
    def _bound_inputs(path=None, **values):
        record = {}
        if path:
            path = Path(path).expanduser()
            if not path.is_file():
                raise ConfigError(f"Inputs file not found: {path}")
            try:
                record = toml.load(str(path))
            except toml.TomlDecodeError as exc:
                raise ConfigError(f"Malformed inputs {path}: {exc}") from exc
            record = record.get("inputs", record)
        record.update({key: value for key, value in values.items() if value is not None})

        unknown = set(record) - set(INPUT_FIELDS)
        if unknown:
            raise ConfigError(f"Unknown bound inputs: {sorted(unknown)}")
        missing = {"p", "L", "f_star", "eta", "c"} - set(record)
        if missing:
            raise ConfigError(f"Missing bound inputs: {sorted(missing)}")
        try:
            return BoundInputs(**record).validate()
        except (TypeError, DomainError) as exc:
            raise ConfigError(f"Invalid bound inputs: {exc}") from exc

    def bounds(self, inputs=None, **values):
        """Every applicable bound, validity flags and both optimal step sizes.

        :param inputs: TOML file with p, L, f_star, eta, c, R, S, d, sigma_r_sq, sigma_s_sq, K
        """
        report = compute_bounds(self._bound_inputs(inputs, **values))
        self._write_record("bounds.json", report)
        return report

    def verify_lemma1(self, count=None, d=2, resolution=None, tolerance=None):
        """Compare the closed-form noise maximum with a brute-force search on random instances."""
        count = count or setting(self.settings.lemma1.count, 50)
        if not isinstance(count, int) or count < 1:
            raise ConfigError(f"count must be a positive integer, got {count!r}")
        tolerance = tolerance or setting(self.settings.lemma1.tolerance, 1e-3)
        resolution = resolution or setting(self.settings.lemma1.resolution, 1000)
        seed = self.seed if self.seed is not None else 0

        rows = []
        for instance in lemma1_instances(count, seed, d):
            closed = lemma1_closed_form(instance)
            brute = lemma1_brute_force(instance, resolution)
            attained = d >= 2 and lemma1_attained(instance)
            slack = tolerance * (1 + abs(closed))
            gap = closed - brute
            ok = -slack <= gap <= slack if attained else gap >= -slack
            rows.append(
                dict(
                    eta=instance.eta,
                    R=instance.R,
                    B=instance.B,
                    C=instance.C,
                    closed_form=closed,
                    brute_force=brute,
                    gap=gap,
                    attained=attained,
                    ok=ok,
                )
            )
            logger.debug("Instance %s: closed %r brute %r", instance[:4], closed, brute)

        frame = pd.DataFrame(rows)
        checked = frame[frame.attained]
        report = addict.Dict(
            count=count,
            d=d,
            seed=seed,
            max_gap=float(checked.gap.abs().max()) if len(checked) else 0.0,
            upper_bound_only=int((~frame.attained).sum()),
            failures=int((~frame.ok).sum()),
        )
        report.passed = report.failures == 0
        self._write_csv("lemma1.csv", frame, summary=report)
        if not report.passed:
            raise BoundViolation(f"{report.failures} noise-maximum instances out of tolerance", report=report)
        return report

    def fit_holder(self, samples=None, mode=None, p=None):
        """Fit f - f* = L * distance ** p.

        :param samples: CSV with `distance,excess` columns; without it the logreg problem is probed
        """
        mode = FitMode(mode or self.settings.holder.mode or FitMode.LEAST_SQUARES)
        if samples:
            path = Path(samples).expanduser()
            if not path.is_file():
                raise ConfigError(f"Samples file not found: {path}")
            frame = read_csv(path)
            if not {"distance", "excess"} <= set(frame.columns):
                raise ConfigError(f"{path} needs distance and excess columns")
            fit = fit_holder(zip(frame.distance, frame.excess), mode=mode, p=p)
        else:
            fit, probes = self.holder_fit(mode=mode, p=p)
            self._write_csv("holder-samples.csv", pd.DataFrame(probes, columns=["distance", "excess"]))
        record = fit.to_dict()
        self._write_record("holder.json", record)
        return record

    def estimate_noise(self, mode=None, mul=None, acc=None, update=None, probe_steps=None):
        """Empirical d*sigma^2 and max norms of r_k, s_k for the logreg formats."""
        mode, formats = self._logreg_formats(mode, mul, acc, update)
        noise = self._logreg_noise(formats, self._logreg_seed)
        moments = self._logreg_moments(noise, probe_steps)
        record = dict(moments.to_dict(), mode=mode.value, formats=[str(fmt) for fmt in formats])
        self._write_record(f"noise-mode{mode.value}.json", record)
        return record
