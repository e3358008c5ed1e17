import copy
import math
from pathlib import Path

import addict
import numpy as np
import toml
from cached_property import cached_property

from . import config, logger
from .constants import Stream, StepRule
from .exceptions import ConfigError, DomainError
from .lowfloat import FloatFormat
from .util import dumps, output_dir, write_csv


def merge(base: dict, override: dict) -> dict:
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(base.get(key), dict):
            merge(base[key], value)
        else:
            base[key] = value
    return base


class ExperimentClient:
    def __init__(self, *args, config=None, seed=None, out=None, **kwargs):
        """
        Base for the experiment commands.

        :param config: Experiment file with `key = value` lines under `[section]` headers, merged over the defaults
        :param seed: Overrides every seed list with this single seed
        :param out: Output directory; wins over LPSGD_OUT and the configured directory
        """
        super().__init__(*args, **kwargs)
        self.config_path = config
        self.seed = seed
        self.out = out
        if seed is not None and (not isinstance(seed, int) or not 0 <= seed < 2 ** 64):
            raise ConfigError(f"--seed must be an unsigned 64-bit integer, got {seed!r}")

    @cached_property
    def settings(self) -> addict.Dict:
        defaults = copy.deepcopy(config.to_dict())
        if not self.config_path:
            return addict.Dict(defaults)

        path = Path(self.config_path).expanduser()
        if not path.is_file():
            raise ConfigError(f"Config file not found: {path}")
        try:
            override = toml.load(str(path))
        except toml.TomlDecodeError as exc:
            raise ConfigError(f"Malformed config {path}: {exc}") from exc
        logger.info("Loaded experiment config %s", path)
        return addict.Dict(merge(defaults, override))

    @cached_property
    def output(self) -> Path:
        return output_dir(self.out)

    def _number(self, section, key, minimum=None, exclusive=False, integer=False):
        value = self.settings[section][key]
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"[{section}] {key} must be a number, got {value!r}")
        if integer and not float(value).is_integer():
            raise ConfigError(f"[{section}] {key} must be an integer, got {value!r}")
        if minimum is not None and (value < minimum or (exclusive and value == minimum)):
            relation = ">" if exclusive else ">="
            raise ConfigError(f"[{section}] {key} must be {relation} {minimum}, got {value!r}")
        return int(value) if integer else float(value)

    def _format(self, section, key, default):
        try:
            return FloatFormat.parse(self.settings[section][key] or default)
        except DomainError as exc:
            raise ConfigError(f"[{section}] {key}: {exc}") from exc

    def _step_rule(self, section):
        eta = self.settings[section].eta
        if isinstance(eta, str):
            try:
                return StepRule(eta)
            except ValueError as exc:
                raise ConfigError(f"[{section}] eta must be a number or one of {[r.value for r in StepRule]}") from exc
        return self._number(section, "eta", minimum=0, exclusive=True)

    def _seeds(self, section):
        if self.seed is not None:
            return [self.seed]
        seeds = self.settings[section].seeds or [0]
        if not isinstance(seeds, list) or not all(isinstance(s, int) and 0 <= s < 2 ** 64 for s in seeds):
            raise ConfigError(f"[{section}] seeds must be a list of unsigned 64-bit integers")
        return seeds

    @staticmethod
    def _start_on_sphere(dimension, radius, seed):
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, Stream.PROBE])))
        direction = rng.standard_normal(dimension)
        return radius * direction / np.linalg.norm(direction)

    def _path(self, name) -> Path:
        return self.output / name

    def _write_csv(self, name, frame, summary=None) -> Path:
        return write_csv(frame, self._path(name), summary=summary)

    def _write_record(self, name, record) -> Path:
        path = self._path(name)
        path.write_text(dumps(record) + "\n")
        logger.info("Wrote %s", path)
        return path

    @staticmethod
    def _finite(value):
        return value if value is not None and math.isfinite(value) else None
