"""Normalized projected quasi-subgradient descent with injected or
arithmetic-induced noise.

One step moves ``w`` to ``P(w - eta * (g_hat + r) + s)`` where ``g_hat`` is the
exact unit quasi-subgradient, ``r`` the gradient error and ``s`` the update
error. Under arithmetic noise both errors are realized by running the same
step through the emulated formats and subtracting the exact pipeline.
"""
import math
from typing import NamedTuple, Optional, Tuple

import addict
import numpy as np
import pandas as pd
from cached_property import cached_property

from . import config, logger
from .constants import MIN_PROBE_STEPS, TRAJECTORY_COLUMNS, DomainKind, NoiseKind, Stream
from .exceptions import AtOptimum, DomainError, NonFiniteLoss
from .lowfloat import FloatFormat, lp_matmul, quantize
from .problems import Problem, ReferenceOptimum
from .util import setting, write_csv


class NoiseSpec(NamedTuple):
    kind: NoiseKind = NoiseKind.NONE
    bound: float = 0.0
    formats: Tuple[FloatFormat, ...] = ()

    @classmethod
    def none(cls):
        return cls()

    @classmethod
    def uniform(cls, bound):
        if bound < 0:
            raise DomainError(f"Uniform noise bound must be non-negative, got {bound}")
        return cls(NoiseKind.UNIFORM, float(bound))

    @classmethod
    def arithmetic(cls, *formats):
        return cls(NoiseKind.ARITHMETIC, 0.0, tuple(FloatFormat.parse(f) for f in formats))

    @property
    def variance(self):
        """Per-coordinate variance of injected noise, B^2 / 3 for U(-B, B)."""
        if self.kind is NoiseKind.UNIFORM:
            return self.bound ** 2 / 3
        return 0.0

    @property
    def emulated(self):
        """Arithmetic noise through at least one format narrower than working precision."""
        return self.kind is NoiseKind.ARITHMETIC and not all(fmt.is_working for fmt in self.formats)

    def describe(self):
        if self.kind is NoiseKind.UNIFORM:
            return f"uniform({self.bound})"
        if self.kind is NoiseKind.ARITHMETIC:
            return f"arithmetic({','.join(map(str, self.formats))})"
        return "none"


class NoiseModel:
    """Gradient noise r_k and update noise s_k, drawn from independent streams."""

    def __init__(self, gradient: NoiseSpec = None, update: NoiseSpec = None, seed=0):
        self.gradient = gradient or NoiseSpec.none()
        self.update = update or NoiseSpec.none()
        if self.gradient.kind is NoiseKind.ARITHMETIC and len(self.gradient.formats) != 2:
            raise DomainError("Arithmetic gradient noise needs (mul_fmt, acc_fmt)")
        if self.update.kind is NoiseKind.ARITHMETIC and len(self.update.formats) != 1:
            raise DomainError("Arithmetic update noise needs a single update_fmt")
        if not 0 <= int(seed) < 2 ** 64:
            raise DomainError(f"Seed must be an unsigned 64-bit integer, got {seed}")
        self.seed = int(seed)

    def __repr__(self):
        return (
            f"NoiseModel(gradient={self.gradient.describe()}, "
            f"update={self.update.describe()}, seed={self.seed})"
        )

    @classmethod
    def uniform(cls, B_r, B_s, seed=0):
        return cls(NoiseSpec.uniform(B_r), NoiseSpec.uniform(B_s), seed)

    @classmethod
    def arithmetic(cls, mul_fmt, acc_fmt, update_fmt, seed=0):
        return cls(NoiseSpec.arithmetic(mul_fmt, acc_fmt), NoiseSpec.arithmetic(update_fmt), seed)

    def with_seed(self, seed):
        return NoiseModel(self.gradient, self.update, seed)

    @property
    def update_format(self) -> Optional[FloatFormat]:
        if self.update.emulated:
            return self.update.formats[0]
        return None


class NoiseStreams:
    """Philox streams keyed by (seed, stream id); streams never share draws."""

    def __init__(self, seed):
        self.seed = seed

    @cached_property
    def generators(self):
        return {
            stream: np.random.Generator(np.random.Philox(np.random.SeedSequence([self.seed, stream])))
            for stream in Stream
        }

    def uniform(self, stream, bound, size):
        return self.generators[stream].uniform(-bound, bound, size)

    def batch(self, population, size):
        return self.generators[Stream.BATCH].integers(0, population, size)


class Domain(NamedTuple):
    kind: DomainKind = DomainKind.UNCONSTRAINED
    center: Optional[np.ndarray] = None
    radius: float = math.inf

    @classmethod
    def unconstrained(cls):
        return cls()

    @classmethod
    def ball(cls, center, radius):
        if radius <= 0:
            raise DomainError(f"Ball radius must be positive, got {radius}")
        return cls(DomainKind.BALL, np.asarray(center, dtype=np.float64), float(radius))

    @property
    def diameter(self):
        return 2 * self.radius if self.kind is DomainKind.BALL else math.inf

    def contains(self, x, slack=1e-12):
        if self.kind is DomainKind.UNCONSTRAINED:
            return True
        return float(np.linalg.norm(np.asarray(x) - self.center)) <= self.radius * (1 + slack)


def project(domain: Domain, x) -> np.ndarray:
    """Euclidean projection onto the domain."""
    x = np.asarray(x, dtype=np.float64)
    if domain.kind is DomainKind.UNCONSTRAINED:
        return x
    offset = x - domain.center
    distance = float(np.linalg.norm(offset))
    if distance <= domain.radius:
        return x
    return domain.center + domain.radius * offset / distance


class StepResult(NamedTuple):
    w: np.ndarray
    r: np.ndarray
    s: np.ndarray
    g_hat: np.ndarray


def _lowp_direction(problem, w, noise, indices):
    mul_fmt, acc_fmt = noise.gradient.formats
    gradient = problem.lowp_gradient(w, mul_fmt, acc_fmt, indices)
    norm_sq = lp_matmul(gradient[None, :], gradient, mul_fmt, acc_fmt)[0]
    norm = quantize(math.sqrt(norm_sq), mul_fmt)
    if norm == 0:
        raise AtOptimum(point=w)
    return quantize(gradient / norm, mul_fmt)


def sgd_step(
    w,
    problem: Problem,
    eta: float,
    noise: NoiseModel,
    domain: Domain,
    streams: NoiseStreams = None,
    batch_size: int = 0,
) -> StepResult:
    """One normalized step; returns the new iterate with the realized r_k, s_k."""
    w = problem.check_dimension(w)
    streams = streams or NoiseStreams(noise.seed)
    gradient = problem.quasi_subgradient(w)
    g_hat = gradient / np.linalg.norm(gradient)

    indices = None
    if batch_size and batch_size < problem.num_samples:
        indices = streams.batch(problem.num_samples, batch_size)

    if noise.gradient.emulated:
        direction = _lowp_direction(problem, w, noise, indices)
    else:
        direction = g_hat
        if indices is not None:
            sampled = problem.batch_subgradient(w, indices)
            sampled_norm = np.linalg.norm(sampled)
            if sampled_norm > 0:
                direction = sampled / sampled_norm
        if noise.gradient.kind is NoiseKind.UNIFORM:
            direction = direction + streams.uniform(Stream.GRADIENT, noise.gradient.bound, w.shape)
    r = direction - g_hat

    exact_update = w - eta * direction
    update_fmt = noise.update_format
    if update_fmt is not None:
        step = quantize(eta * direction, update_fmt)
        updated = quantize(w - step, update_fmt)
        s = updated - exact_update
    elif noise.update.kind is NoiseKind.UNIFORM:
        s = streams.uniform(Stream.UPDATE, noise.update.bound, w.shape)
        updated = exact_update + s
    else:
        s = np.zeros_like(w)
        updated = exact_update

    w_next = project(domain, updated)
    if update_fmt is not None:
        w_next = quantize(w_next, update_fmt)
    return StepResult(w_next, r, s, g_hat)


class Trajectory:
    """Per-iteration losses and realized noise norms of one run."""

    def __init__(self, losses, dists, norms_r, norms_s, eta, dimension, completed=False, seed=0):
        self.losses = np.asarray(losses, dtype=np.float64)
        self.dists = np.asarray(dists, dtype=np.float64)
        self.norms_r = np.asarray(norms_r, dtype=np.float64)
        self.norms_s = np.asarray(norms_s, dtype=np.float64)
        self.eta = eta
        self.dimension = dimension
        self.completed = completed
        self.seed = seed

    def __len__(self):
        return self.losses.size

    @cached_property
    def min_losses(self):
        return np.minimum.accumulate(self.losses)

    @cached_property
    def frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            dict(
                zip(
                    TRAJECTORY_COLUMNS,
                    (
                        np.arange(len(self)),
                        self.losses,
                        self.min_losses,
                        self.dists,
                        self.norms_r,
                        self.norms_s,
                    ),
                )
            )
        )

    @cached_property
    def summary(self) -> addict.Dict:
        steps = len(self) - 1 if self.completed else len(self)
        norms_r, norms_s = self.norms_r[:steps], self.norms_s[:steps]
        moments = (
            float(np.mean(norms_r ** 2)) if steps else 0.0,
            float(np.mean(norms_s ** 2)) if steps else 0.0,
            float(np.max(norms_r)) if steps else 0.0,
            float(np.max(norms_s)) if steps else 0.0,
        )
        return addict.Dict(
            min_loss=float(self.min_losses[-1]),
            argmin=int(np.argmin(self.losses)),
            d_sigma_r_sq=moments[0],
            d_sigma_s_sq=moments[1],
            R_hat=moments[2],
            S_hat=moments[3],
            steps=len(self),
            completed=self.completed,
            eta=self.eta,
            seed=self.seed,
        )

    def to_csv(self, path, columns=None, summary=None):
        frame = self.frame.copy()
        for name, value in (columns or {}).items():
            frame[name] = value
        return write_csv(frame, path, summary={**self.summary, **(summary or {})})


def _trajectory(losses, dists, norms_r, norms_s, eta, problem, completed, seed):
    return Trajectory(losses, dists, norms_r, norms_s, eta, problem.dimension, completed, seed)


def run(
    problem: Problem,
    start,
    eta: float,
    steps: int,
    noise: NoiseModel,
    domain: Domain,
    reference: Optional[ReferenceOptimum] = None,
    batch_size: int = None,
) -> Trajectory:
    """Iterate sgd_step ``steps`` times from ``start`` and record the trajectory.

    Stops early only when the iterate is a minimizer. Identical inputs give a
    bit-identical trajectory.
    """
    if steps < 1:
        raise DomainError(f"Need at least one step, got {steps}")
    if eta <= 0:
        raise DomainError(f"Step size must be positive, got {eta}")
    w = problem.check_dimension(start).copy()
    if not domain.contains(w):
        raise DomainError("The starting point lies outside the domain")
    if batch_size is None:
        batch_size = setting(config.optimizer.batch_size, 0)

    update_fmt = noise.update_format
    if update_fmt is not None:
        rounded = float(quantize(eta, update_fmt))
        if rounded != eta:
            logger.info("Step size %r rounded to %r in %s", eta, rounded, update_fmt)
        eta = rounded
        w = quantize(w, update_fmt)

    streams = NoiseStreams(noise.seed)
    losses, dists, norms_r, norms_s = [], [], [], []
    completed = False
    for k in range(steps):
        loss = problem.evaluate(w)
        if not math.isfinite(loss):
            partial = _trajectory(losses, dists, norms_r, norms_s, eta, problem, False, noise.seed)
            raise NonFiniteLoss(step=k, trajectory=partial)
        losses.append(loss)
        dists.append(float(np.linalg.norm(w - reference.w_star)) if reference is not None else math.nan)
        try:
            result = sgd_step(w, problem, eta, noise, domain, streams, batch_size)
        except AtOptimum:
            logger.info("Reached a minimizer at step %d; trajectory complete", k)
            norms_r.append(0.0)
            norms_s.append(0.0)
            completed = True
            break
        norms_r.append(float(np.linalg.norm(result.r)))
        norms_s.append(float(np.linalg.norm(result.s)))
        w = result.w
        if k % 500 == 0:
            logger.debug("step %d: loss=%r |r|=%r |s|=%r", k, loss, norms_r[-1], norms_s[-1])
    trajectory = _trajectory(losses, dists, norms_r, norms_s, eta, problem, completed, noise.seed)
    trajectory.final = w
    return trajectory


class NoiseMoments(NamedTuple):
    d_sigma_r_sq: float
    d_sigma_s_sq: float
    R_hat: float
    S_hat: float

    def to_dict(self):
        return self._asdict()


def estimate_noise_moments(
    problem: Problem,
    noise: NoiseModel,
    domain: Domain,
    probe_steps: int = None,
    seed: int = None,
    start=None,
    eta: float = None,
    batch_size: int = None,
) -> NoiseMoments:
    """Sample means of |r_k|^2, |s_k|^2 and sample maxima of |r_k|, |s_k| along a probe run."""
    probe_steps = probe_steps or setting(config.optimizer.probe_steps, 100)
    if probe_steps < MIN_PROBE_STEPS:
        raise DomainError(f"Need at least {MIN_PROBE_STEPS} probe steps, got {probe_steps}")
    if seed is not None:
        noise = noise.with_seed(seed)
    start = problem.default_start() if start is None else start
    eta = eta or setting(config.optimizer.probe_eta, 0.01)
    trajectory = run(problem, start, eta, probe_steps, noise, domain, batch_size=batch_size)
    if trajectory.completed and len(trajectory) - 1 < MIN_PROBE_STEPS:
        raise DomainError(f"Reached the optimum after {len(trajectory) - 1} probes")
    summary = trajectory.summary
    moments = NoiseMoments(summary.d_sigma_r_sq, summary.d_sigma_s_sq, summary.R_hat, summary.S_hat)
    logger.info("Noise moments for %r: %s", noise, moments)
    return moments
