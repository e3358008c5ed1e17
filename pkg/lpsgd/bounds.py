"""Closed-form convergence bounds and optimal step sizes for noisy normalized SGD.

All arithmetic here is at working precision; the bounds describe the
emulated process but are exact formulas themselves.
"""
import math
from typing import Dict, NamedTuple, Optional, Tuple

import numpy as np

from . import config, logger
from .constants import MIN_LEMMA1_RESOLUTION, Stream, Theorem
from .exceptions import DegenerateStepSize, DomainError, HypothesisViolation
from .frange import frange
from .lowfloat import FloatFormat, unit_roundoff
from .result import BoundReport
from .util import setting


class BoundInputs(NamedTuple):
    p: float
    L: float
    f_star: float
    eta: float
    c: float
    R: float = 0.0
    S: float = 0.0
    d: int = 1
    sigma_r_sq: float = 0.0
    sigma_s_sq: float = 0.0
    K: Optional[int] = None

    @property
    def rho(self):
        return self.R + self.S / self.eta

    def validate(self):
        if self.p <= 0 or self.L <= 0:
            raise DomainError(f"Hölder order and constant must be positive (p={self.p}, L={self.L})")
        if self.eta <= 0:
            raise DomainError(f"Step size must be positive, got {self.eta}")
        if self.c < 0 or self.R < 0 or self.S < 0:
            raise DomainError("c, R and S must be non-negative")
        if self.sigma_r_sq < 0 or self.sigma_s_sq < 0:
            raise DomainError("Variances must be non-negative")
        if self.d < 1:
            raise DomainError(f"Dimension must be at least 1, got {self.d}")
        if self.K is not None and self.K < 1:
            raise DomainError(f"Iteration budget must be at least 1, got {self.K}")
        return self


def _gamma(eta, R, S, c):
    rho = R + S / eta
    return np.maximum(eta / 2 * (1 + rho ** 2), eta / 2 * (1 - rho ** 2) + c * rho)


def gamma(eta, R, S, c) -> float:
    """max{(eta/2)(1 + rho^2), (eta/2)(1 - rho^2) + c*rho} with rho = R + S/eta."""
    if eta <= 0 or c < 0 or R < 0 or S < 0:
        raise DomainError(f"Invalid gamma arguments eta={eta}, R={R}, S={S}, c={c}")
    return float(_gamma(eta, R, S, c))


def is_vacuous(gamma_value, c) -> bool:
    return gamma_value >= c


def liminf_bound(p, L, f_star, gamma_value) -> float:
    if gamma_value < 0:
        raise DomainError(f"Gamma must be non-negative, got {gamma_value}")
    return f_star + L * gamma_value ** p


def deterministic_bound(inputs: BoundInputs) -> float:
    """Limit-inferior bound for bounded gradient and update errors; needs R < 1."""
    inputs.validate()
    if inputs.R >= 1:
        raise HypothesisViolation(f"R = {inputs.R}", hypothesis="R < 1")
    return liminf_bound(inputs.p, inputs.L, inputs.f_star, gamma(inputs.eta, inputs.R, inputs.S, inputs.c))


def _finite_k_term(c0, eta, K, squared=False):
    return (c0 ** 2 if squared else c0) / (2 * eta * K)


def finite_k_bound(inputs: BoundInputs, squared=False) -> float:
    """Bound on min_{k<K} f(x_k), with ``c`` read as the initial distance c0.

    The default distance term is c0/(2*eta*K). With ``squared`` it is
    c0**2/(2*eta*K), the term that telescoping |x_k - x*|**2 over K steps gives;
    the default one can fall below observed runs when c0 > 1.
    """
    inputs.validate()
    if inputs.K is None:
        raise DomainError("The finite-K bound needs an iteration budget K")
    if inputs.R >= 1:
        raise HypothesisViolation(f"R = {inputs.R}", hypothesis="R < 1")
    c0 = inputs.c
    inner = gamma(inputs.eta, inputs.R, inputs.S, c0) + _finite_k_term(c0, inputs.eta, inputs.K, squared)
    return inputs.f_star + inputs.L * inner ** inputs.p


def stochastic_bound(p, L, f_star, eta, d, sigma_r_sq, sigma_s_sq) -> float:
    if eta <= 0 or sigma_r_sq < 0 or sigma_s_sq < 0:
        raise DomainError(f"Invalid stochastic bound arguments eta={eta}, variances=({sigma_r_sq}, {sigma_s_sq})")
    inner = eta / 2 * (1 + d * sigma_r_sq) + d * sigma_s_sq / (2 * eta)
    return f_star + L * inner ** p


class StepChoice(NamedTuple):
    eta: float
    value: float
    candidates: Dict[str, Tuple[float, float]]
    fallback: bool = False

    def to_dict(self):
        return {
            "eta": self.eta,
            "value": self.value,
            "candidates": {name: {"eta": e, "G": g} for name, (e, g) in self.candidates.items()},
            "fallback": self.fallback,
        }


def _step_candidates(R, S, c):
    yield "eta1", S / math.sqrt(1 + R ** 2)
    # printed second-branch formula and the actual stationary point of that branch
    yield "eta2", math.sqrt(S * (c - 2 * S) / (1 - R ** 2)) if c > 2 * S else math.nan
    yield "eta2_prime", math.sqrt(S * (2 * c - S) / (1 - R ** 2)) if 2 * c > S else math.nan
    yield "eta3", (c - S) / R if R > 0 else math.nan


def step_grid(c, grid=None) -> frange:
    grid = grid or setting(config.bounds.grid, 100_000)
    return frange(0, c, grid, include_start=False)


def optimal_step_deterministic(R, S, c, grid=None) -> StepChoice:
    """The step size minimizing G(eta) = gamma(eta, R, S, c).

    G is the maximum of two convex branches, so its minimizer is a branch
    minimizer or the crossing point. With S = 0 G only grows with eta and the
    infimum sits at eta -> 0; a grid over (0, c] then yields its smallest point.
    """
    if R >= 1:
        raise HypothesisViolation(f"R = {R}", hypothesis="R < 1")
    if R < 0 or S < 0 or c <= 0:
        raise DomainError(f"Invalid step-size arguments R={R}, S={S}, c={c}")

    candidates = {
        name: (eta, gamma(eta, R, S, c))
        for name, eta in _step_candidates(R, S, c)
        if math.isfinite(eta) and eta > 0
    }
    if S > 0 and candidates:
        name = min(candidates, key=lambda key: (candidates[key][1], candidates[key][0]))
        return StepChoice(*candidates[name], candidates)

    logger.info("No usable step-size candidate for R=%r, S=%r, c=%r; searching a grid", R, S, c)
    etas = step_grid(c, grid).array
    values = _gamma(etas, R, S, c)
    best = int(np.argmin(values))
    return StepChoice(float(etas[best]), float(values[best]), candidates, fallback=True)


def optimal_step_stochastic(d, sigma_r_sq, sigma_s_sq) -> float:
    """sqrt(d * sigma_s^2 / (d * sigma_r^2 + 1)), the minimizer of the stochastic bound."""
    if sigma_r_sq < 0 or sigma_s_sq < 0 or d < 1:
        raise DomainError(f"Invalid arguments d={d}, variances=({sigma_r_sq}, {sigma_s_sq})")
    if sigma_s_sq == 0:
        raise DegenerateStepSize()
    return math.sqrt(d * sigma_s_sq / (d * sigma_r_sq + 1))


def uniform_noise_bounds(B_r, B_s, d):
    """Worst-case norms B*sqrt(d) and per-coordinate variances B^2/3 of U(-B, B)^d noise."""
    root = math.sqrt(d)
    return B_r * root, B_s * root, B_r ** 2 / 3, B_s ** 2 / 3


def a_priori_noise_bounds(gradient_fmt: FloatFormat, update_fmt: FloatFormat, operations: int, radius: float):
    """Rounding-error norm bounds before any run.

    A unit gradient through ``operations`` roundings has error at most about
    operations * u; an update rounded once into a ball of the given radius
    errs by at most u * radius.
    """
    if operations < 1 or radius < 0:
        raise DomainError(f"Invalid arguments operations={operations}, radius={radius}")
    gradient_fmt, update_fmt = FloatFormat.parse(gradient_fmt), FloatFormat.parse(update_fmt)
    return operations * unit_roundoff(gradient_fmt), unit_roundoff(update_fmt) * radius


class Lemma1Instance(NamedTuple):
    eta: float
    R: float
    B: float
    C: float
    d: int = 2
    g: Optional[np.ndarray] = None

    @property
    def direction(self):
        if self.g is None:
            return np.eye(self.d)[0]
        return np.asarray(self.g, dtype=np.float64)

    @property
    def radicand(self):
        return self.eta ** 2 + self.C ** 2 - 2 * self.eta * self.B

    def validate(self):
        if self.eta <= 0 or self.B <= 0:
            raise DomainError(f"eta and B must be positive (eta={self.eta}, B={self.B})")
        if not 0 <= self.R < 1:
            raise HypothesisViolation(f"R = {self.R}", hypothesis="R < 1")
        if self.C <= self.B:
            raise HypothesisViolation(f"C = {self.C}, B = {self.B}", hypothesis="C > B")
        if self.d < 1 or not math.isclose(float(np.linalg.norm(self.direction)), 1.0, rel_tol=1e-12):
            raise DomainError("g must be a unit vector of dimension d >= 1")
        return self

    @classmethod
    def sample(cls, rng: np.random.Generator, d=2):
        B = rng.uniform(0.1, 2.0)
        g = rng.standard_normal(d)
        return cls(
            eta=rng.uniform(0.1, 2.0),
            R=rng.uniform(0.05, 0.95),
            B=B,
            C=B + rng.uniform(0.1, 2.0),
            d=d,
            g=g / np.linalg.norm(g),
        )


def lemma1_instances(count, seed=0, d=2):
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, Stream.PROBE])))
    return [Lemma1Instance.sample(rng, d) for _ in range(count)]


def lemma1_closed_form(instance: Lemma1Instance) -> float:
    """max{eta(1 + R^2) + 2R sqrt(eta^2 + C^2 - 2 eta B) - 2B, eta(R^2 - 1)}"""
    eta, R, B = instance.eta, instance.R, instance.B
    radicand = instance.radicand
    if radicand < 0:
        raise DomainError(f"Negative radicand {radicand} for {instance}")
    return max(eta * (1 + R ** 2) + 2 * R * math.sqrt(radicand) - 2 * B, eta * (R ** 2 - 1))


def lemma1_attained(instance: Lemma1Instance) -> bool:
    """Whether the first branch dominates; only then is the closed form reached on the cap."""
    return instance.eta + instance.R * math.sqrt(max(instance.radicand, 0.0)) >= instance.B


def _worst_case_value(instance, inner, distance):
    # max over |r| <= R of F(x, r) for fixed x, with r aligned to eta*g - x
    return instance.eta * (1 + instance.R ** 2) + 2 * instance.R * distance - 2 * inner


def _structured_search(instance, resolution):
    eta, B, C = instance.eta, instance.B, instance.C
    if instance.d == 1:
        inner = np.linspace(B, C, resolution)
        return float(np.max(_worst_case_value(instance, inner, np.abs(eta - inner))))
    # ||x|| = C and <x, g> = C cos(theta); only these two numbers enter F
    theta = frange(0, math.acos(B / C), resolution).array
    inner = C * np.cos(theta)
    distance = np.sqrt(np.maximum(eta ** 2 + C ** 2 - 2 * eta * inner, 0.0))
    return float(np.max(_worst_case_value(instance, inner, distance)))


def _dense_search(instance):
    d, g, C, R = instance.d, instance.direction, instance.C, instance.R
    points = {1: 401, 2: 81, 3: 31}[d]
    axis = np.linspace(-C, C, points)
    grid = np.stack(np.meshgrid(*([axis] * d), indexing="ij"), axis=-1).reshape(-1, d)
    feasible = grid[(grid @ g >= instance.B) & (np.linalg.norm(grid, axis=1) <= C)]
    if feasible.size == 0:
        return -math.inf

    if d == 1:
        directions = np.array([[1.0], [-1.0]])
    elif d == 2:
        angles = np.linspace(0, 2 * math.pi, 48, endpoint=False)
        directions = np.stack([np.cos(angles), np.sin(angles)], axis=1)
    else:
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([0, Stream.PROBE])))
        directions = rng.standard_normal((48, d))
        directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    perturbations = np.concatenate([np.zeros((1, d)), R / 2 * directions, R * directions])
    noisy = g + perturbations
    values = instance.eta * np.sum(noisy ** 2, axis=1) - 2 * feasible @ noisy.T
    return float(values.max())


def lemma1_brute_force(instance: Lemma1Instance, resolution=None) -> float:
    """Numerical maximum of eta*||g + r||^2 - 2<x, g + r> over the feasible set.

    The structured search walks the sphere ||x|| = C inside the half-space
    with the inner maximization over r done in closed form; a coarse grid over
    the whole feasible region backs it up.
    """
    resolution = resolution or setting(config.lemma1.resolution, 1000)
    if resolution < MIN_LEMMA1_RESOLUTION:
        raise DomainError(f"Resolution {resolution} is below {MIN_LEMMA1_RESOLUTION} samples")
    instance.validate()
    if instance.d > 3:
        raise DomainError(f"Brute force supports d <= 3, got {instance.d}")
    structured = _structured_search(instance, int(resolution))
    dense = _dense_search(instance)
    if dense > structured:
        logger.warning("Dense search beat the structured one by %r on %s", dense - structured, instance)
    return max(structured, dense)


def compute_bounds(inputs: BoundInputs) -> BoundReport:
    """Every applicable bound with validity flags and both optimal step sizes."""
    inputs.validate()
    report = BoundReport(inputs=inputs._asdict())
    valid = inputs.R < 1

    gamma_value = gamma(inputs.eta, inputs.R, inputs.S, inputs.c)
    report.add(
        Theorem.DETERMINISTIC,
        liminf_bound(inputs.p, inputs.L, inputs.f_star, gamma_value),
        valid=valid,
        vacuous=is_vacuous(gamma_value, inputs.c) or inputs.rho >= 1,
        reason="" if valid else "R >= 1",
        gamma=gamma_value,
        rho=inputs.rho,
    )
    if not valid:
        logger.warning("Deterministic bounds invalid: R = %r violates R < 1", inputs.R)
    if inputs.K is not None:
        values = [
            inputs.f_star
            + inputs.L * (gamma_value + _finite_k_term(inputs.c, inputs.eta, inputs.K, squared)) ** inputs.p
            for squared in (False, True)
        ]
        report.add(
            Theorem.FINITE_K,
            values[0],
            valid=valid,
            reason="" if valid else "R >= 1",
            value_squared=values[1],
        )
    report.add(
        Theorem.STOCHASTIC,
        stochastic_bound(
            inputs.p, inputs.L, inputs.f_star, inputs.eta, inputs.d, inputs.sigma_r_sq, inputs.sigma_s_sq
        ),
    )

    if not valid:
        report.step_sizes.deterministic = {"error": f"hypothesis R < 1 violated (R = {inputs.R})"}
    elif inputs.c <= 0:
        report.step_sizes.deterministic = {"error": "c must be positive"}
    else:
        report.step_sizes.deterministic = optimal_step_deterministic(inputs.R, inputs.S, inputs.c).to_dict()
    try:
        report.step_sizes.stochastic = {
            "eta": optimal_step_stochastic(inputs.d, inputs.sigma_r_sq, inputs.sigma_s_sq)
        }
    except DegenerateStepSize as exc:
        report.step_sizes.stochastic = {"degenerate": True, "error": str(exc)}
    return report
