import math
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from . import config, logger
from .constants import DIVERGENCE_PATIENCE, FitMode, Stream
from .exceptions import AtOptimum, DomainError, ReferenceDivergence
from .frange import frange
from .lowfloat import FloatFormat, lp_matmul, quantize
from .util import setting


class ReferenceOptimum(NamedTuple):
    w_star: np.ndarray
    f_star: float
    c0: float


class HolderFit(NamedTuple):
    p: float
    L: float
    mode: FitMode
    residual: float

    def to_dict(self):
        return {"p": self.p, "L": self.L, "mode": self.mode.value, "residual": self.residual}


class Problem:
    """A quasi-convex objective on R^d."""

    dimension = 0

    def check_dimension(self, w):
        w = np.asarray(w, dtype=np.float64)
        if w.shape != (self.dimension,):
            raise DomainError(f"Expected a vector of dimension {self.dimension}, got shape {w.shape}")
        return w

    def evaluate(self, w) -> float:
        raise NotImplementedError

    def quasi_subgradient(self, w) -> np.ndarray:
        raise NotImplementedError

    def lowp_gradient(self, w, mul_fmt: FloatFormat, acc_fmt: FloatFormat, indices=None) -> np.ndarray:
        raise NotImplementedError

    def batch_subgradient(self, w, indices=None) -> np.ndarray:
        return self.quasi_subgradient(w)

    def default_start(self) -> np.ndarray:
        return np.zeros(self.dimension)

    @property
    def num_samples(self):
        return 0

    @property
    def known_optimum(self) -> Optional[ReferenceOptimum]:
        return None


class PowerNormFunction(Problem):
    """f(x) = L * ||x|| ** p, minimized at the origin with f* = 0."""

    def __init__(self, L=3.0, p=0.2, dimension=40):
        if L <= 0 or not 0 < p <= 1 or dimension < 1:
            raise DomainError(f"Invalid power-norm parameters L={L}, p={p}, d={dimension}")
        self.L = float(L)
        self.p = float(p)
        self.dimension = int(dimension)

    def __repr__(self):
        return f"PowerNormFunction(L={self.L}, p={self.p}, dimension={self.dimension})"

    def evaluate(self, w):
        w = self.check_dimension(w)
        return self.L * float(np.linalg.norm(w)) ** self.p

    def quasi_subgradient(self, w):
        w = self.check_dimension(w)
        if not np.any(w):
            raise AtOptimum(point=w)
        return w.copy()

    def lowp_gradient(self, w, mul_fmt, acc_fmt, indices=None):
        direction = quantize(self.check_dimension(w), mul_fmt)
        if not np.any(direction):
            raise AtOptimum(point=w)
        return direction

    def default_start(self):
        # the origin is the minimizer
        return np.full(self.dimension, 1 / math.sqrt(self.dimension))

    @property
    def known_optimum(self):
        return ReferenceOptimum(np.zeros(self.dimension), 0.0, 0.0)


def _softmax(logits):
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=1, keepdims=True)


class LogisticRegressionProblem(Problem):
    """Mean multinomial cross-entropy with an L2 penalty (lambda / 2) * ||w||^2.

    The weight vector is the row-major flattening of a (F + 1) x C matrix whose
    last row holds the per-class biases.
    """

    def __init__(self, features, labels, num_classes=None, regularization=None):
        features = np.atleast_2d(np.asarray(features, dtype=np.float64))
        labels = np.asarray(labels, dtype=np.int64)
        if features.shape[0] != labels.shape[0] or features.shape[0] < 1:
            raise DomainError(f"{features.shape[0]} samples but {labels.shape[0]} labels")
        self.num_classes = int(num_classes or labels.max() + 1)
        if labels.min() < 0 or labels.max() >= self.num_classes:
            raise DomainError(f"Labels must lie in [0, {self.num_classes})")
        if regularization is None:
            regularization = setting(config.problems.logreg.regularization, 1e-3)
        self.regularization = float(regularization)
        self.features = features
        self.labels = labels
        self.design = np.hstack([features, np.ones((features.shape[0], 1))])
        self.onehot = np.eye(self.num_classes)[labels]
        self.dimension = self.design.shape[1] * self.num_classes

    def __repr__(self):
        return (
            f"LogisticRegressionProblem(N={self.num_samples}, F={self.features.shape[1]}, "
            f"C={self.num_classes}, regularization={self.regularization})"
        )

    @property
    def num_samples(self):
        return self.design.shape[0]

    def weights(self, w):
        return self.check_dimension(w).reshape(self.design.shape[1], self.num_classes)

    def _rows(self, indices):
        if indices is None:
            return self.design, self.onehot, self.labels
        return self.design[indices], self.onehot[indices], self.labels[indices]

    def evaluate(self, w):
        weights = self.weights(w)
        logits = self.design @ weights
        peak = logits.max(axis=1)
        log_norm = peak + np.log(np.exp(logits - peak[:, None]).sum(axis=1))
        data_loss = float(np.mean(log_norm - logits[np.arange(self.num_samples), self.labels]))
        return data_loss + 0.5 * self.regularization * float(np.dot(w, w))

    def batch_subgradient(self, w, indices=None):
        weights = self.weights(w)
        design, onehot, _ = self._rows(indices)
        residual = _softmax(design @ weights) - onehot
        gradient = design.T @ residual / design.shape[0] + self.regularization * weights
        return gradient.reshape(-1)

    def quasi_subgradient(self, w):
        gradient = self.batch_subgradient(w)
        if not np.any(gradient):
            raise AtOptimum(point=w)
        return gradient

    def lowp_gradient(self, w, mul_fmt, acc_fmt, indices=None):
        weights = quantize(self.weights(w), mul_fmt)
        design, onehot, _ = self._rows(indices)
        design = quantize(design, mul_fmt)
        logits = lp_matmul(design, weights, mul_fmt, acc_fmt)
        residual = quantize(_softmax(logits) - onehot, mul_fmt)
        gradient = lp_matmul(design.T, residual, mul_fmt, acc_fmt)
        gradient = quantize(gradient / design.shape[0], acc_fmt)
        penalty = quantize(self.regularization * weights, mul_fmt)
        gradient = quantize(gradient + penalty, acc_fmt).reshape(-1)
        if not np.any(gradient):
            raise AtOptimum(point=w)
        return gradient

    def accuracy(self, w):
        predictions = np.argmax(self.design @ self.weights(w), axis=1)
        return float(np.mean(predictions == self.labels))


def evaluate(problem: Problem, w) -> float:
    return problem.evaluate(w)


def quasi_subgradient(problem: Problem, w) -> np.ndarray:
    return problem.quasi_subgradient(w)


def sublevel_member(problem: Problem, a: float, x) -> bool:
    """Membership in the strict sublevel set {x : f(x) < a}."""
    return problem.evaluate(x) < a


def fit_holder(
    samples: Sequence[Tuple[float, float]], mode=FitMode.LEAST_SQUARES, p: Optional[float] = None
) -> HolderFit:
    """Fit excess = L * distance ** p in log-log space.

    With ``p`` given only L is fitted. In majorizing mode L is raised to the
    smallest value with L * d_i ** p >= excess_i for every sample.
    """
    mode = FitMode(mode)
    samples = list(samples)
    if any(distance <= 0 for distance, _ in samples):
        raise DomainError("Hölder fit distances must be positive")
    usable = [(d, e) for d, e in samples if e > 0]
    if len(usable) < len(samples):
        logger.debug("Dropped %d zero-excess samples", len(samples) - len(usable))
    distances = np.array([d for d, _ in usable], dtype=np.float64)
    excesses = np.array([e for _, e in usable], dtype=np.float64)
    if len(usable) < 2 or np.unique(distances).size < 2:
        raise DomainError("Hölder fit needs at least 2 samples with distinct distances")

    log_d, log_e = np.log(distances), np.log(excesses)
    if p is None:
        slope, intercept = np.polyfit(log_d, log_e, 1)
    else:
        slope = float(p)
        intercept = float(np.mean(log_e - slope * log_d))
    L = math.exp(intercept)
    if mode is FitMode.MAJORIZING:
        L = float(np.max(excesses / distances ** slope))
    residual = float(np.sqrt(np.mean((log_e - (math.log(L) + slope * log_d)) ** 2)))
    return HolderFit(float(slope), float(L), mode, residual)


def holder_samples(
    problem: Problem,
    reference: ReferenceOptimum,
    max_radius: float,
    radii=None,
    directions=None,
    min_radius=None,
    seed=0,
) -> List[Tuple[float, float]]:
    """Radial probes around w*: the largest excess over random directions per radius."""
    radii = radii or config.holder.radii or 20
    directions = directions or config.holder.directions or 8
    min_radius = min_radius or config.holder.min_radius or 1e-2
    if max_radius <= min_radius:
        raise DomainError(f"Probe radius range is empty: [{min_radius}, {max_radius}]")
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, Stream.PROBE])))
    samples = []
    for radius in frange(min_radius, max_radius, radii, log=True):
        unit = rng.standard_normal((directions, problem.dimension))
        unit /= np.linalg.norm(unit, axis=1, keepdims=True)
        excess = max(problem.evaluate(reference.w_star + radius * u) for u in unit)
        samples.append((float(radius), excess - reference.f_star))
    return samples


def find_reference_optimum(problem: Problem, start, steps=None, rate=None, tolerance=0.0) -> ReferenceOptimum:
    """Full-batch gradient descent at working precision.

    The best iterate seen is returned, so f* never exceeds a recorded loss.
    """
    start = problem.check_dimension(start)
    known = problem.known_optimum
    if known is not None:
        return known._replace(c0=float(np.linalg.norm(start - known.w_star)))

    steps = steps or config.problems.reference.steps or 5000
    rate = rate or config.problems.reference.rate or 0.5
    patience = config.optimizer.divergence_patience or DIVERGENCE_PATIENCE
    w = start.copy()
    loss = problem.evaluate(w)
    best_w, best_loss = w.copy(), loss
    increases = taken = 0
    for step in range(1, steps + 1):
        gradient = problem.batch_subgradient(w)
        if float(np.linalg.norm(gradient)) <= tolerance:
            logger.debug("Reference GD converged after %d steps", step - 1)
            break
        w = w - rate * gradient
        taken = step
        new_loss = problem.evaluate(w)
        if not math.isfinite(new_loss):
            raise ReferenceDivergence(step=step, loss=new_loss, best_loss=best_loss, rate=rate)
        increases = increases + 1 if new_loss > loss else 0
        if increases >= patience:
            raise ReferenceDivergence(step=step, loss=new_loss, best_loss=best_loss, rate=rate)
        loss = new_loss
        if loss < best_loss:
            best_w, best_loss = w.copy(), loss
    logger.info("Reference optimum: f* = %r after %d steps", best_loss, taken)
    return ReferenceOptimum(best_w, best_loss, float(np.linalg.norm(start - best_w)))
