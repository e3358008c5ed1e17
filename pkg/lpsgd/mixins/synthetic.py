import addict
import numpy as np
import pandas as pd

from .. import logger
from ..bounds import (
    BoundInputs,
    compute_bounds,
    finite_k_bound,
    optimal_step_deterministic,
    optimal_step_stochastic,
    stochastic_bound,
    uniform_noise_bounds,
)
from ..constants import StepRule, Theorem
from ..exceptions import BoundViolation, ConfigError, DegenerateStepSize, HypothesisViolation
from ..optimizer import Domain, NoiseModel, run
from ..problems import PowerNormFunction


class SyntheticMixin:
    """f(x) = L * ||x|| ** p with uniform gradient and update noise."""

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)

    def _synthetic_params(self):
        params = addict.Dict(
            L=self._number("synthetic", "L", minimum=0, exclusive=True),
            p=self._number("synthetic", "p", minimum=0, exclusive=True),
            d=self._number("synthetic", "d", minimum=1, integer=True),
            C0=self._number("synthetic", "C0", minimum=0, exclusive=True),
            K=self._number("synthetic", "K", minimum=1, integer=True),
            B_r=self._number("synthetic", "B_r", minimum=0),
            B_s=self._number("synthetic", "B_s", minimum=0),
        )
        if params.p > 1:
            raise ConfigError(f"[synthetic] p must lie in (0, 1], got {params.p}")
        params.R, params.S, params.sigma_r_sq, params.sigma_s_sq = uniform_noise_bounds(
            params.B_r, params.B_s, params.d
        )
        return params

    def _synthetic_eta(self, params, rule):
        if not isinstance(rule, StepRule):
            return rule
        try:
            if rule is StepRule.AUTO_COROLLARY1:
                eta = optimal_step_deterministic(params.R, params.S, params.C0).eta
            elif rule is StepRule.AUTO_COROLLARY2:
                eta = optimal_step_stochastic(params.d, params.sigma_r_sq, params.sigma_s_sq)
            else:
                raise ConfigError("[synthetic] eta = 'fixed' needs a numeric step size")
        except (HypothesisViolation, DegenerateStepSize) as exc:
            raise ConfigError(f"[synthetic] cannot derive eta by {rule.value}: {exc}") from exc
        logger.info("Step size from %s: %r", rule.value, eta)
        return eta

    def _synthetic_run(self, params, eta, seed):
        problem = PowerNormFunction(params.L, params.p, params.d)
        domain = Domain.ball(np.zeros(params.d), params.C0 / 2)
        start = self._start_on_sphere(params.d, params.C0 / 2, seed)
        reference = problem.known_optimum
        noise = NoiseModel.uniform(params.B_r, params.B_s, seed)
        trajectory = run(problem, start, eta, params.K, noise, domain, reference=reference)
        c0 = float(np.linalg.norm(start - reference.w_star))
        return trajectory, c0

    def _synthetic_report(self, params, eta, c0):
        inputs = BoundInputs(
            p=params.p,
            L=params.L,
            f_star=0.0,
            eta=eta,
            c=params.C0,
            R=params.R,
            S=params.S,
            d=params.d,
            sigma_r_sq=params.sigma_r_sq,
            sigma_s_sq=params.sigma_s_sq,
            K=params.K,
        )
        report = compute_bounds(inputs)
        if inputs.R < 1:
            at_start = inputs._replace(c=c0)
            report.add(
                Theorem.FINITE_K,
                finite_k_bound(at_start),
                c0=c0,
                value_squared=finite_k_bound(at_start, squared=True),
            )
        return report, inputs

    def run_synthetic(self, sweep=None):
        """Run every seed and write one trajectory CSV each, with bound columns.

        :param sweep: Extra step sizes; for each one the max-over-seeds loss trace is written
        """
        params = self._synthetic_params()
        eta = self._synthetic_eta(params, self._step_rule("synthetic"))
        seeds = self._seeds("synthetic")
        sweeps = self._sweep(sweep)

        violations = []
        summary = addict.Dict(eta=eta, files=[], seeds={})
        for seed in seeds:
            trajectory, c0 = self._synthetic_run(params, eta, seed)
            report, inputs = self._synthetic_report(params, eta, c0)
            final_min = float(trajectory.min_losses[-1])

            checks = {Theorem.STOCHASTIC: report.bound(Theorem.STOCHASTIC)}
            if inputs.rho < 1 and inputs.R < 1:
                checks[Theorem.DETERMINISTIC] = report.bound(Theorem.DETERMINISTIC)
            failed = [theorem.value for theorem, bound in checks.items() if final_min > bound]
            if failed:
                logger.warning("Seed %d: running min %r exceeds %s", seed, final_min, failed)
                violations.append({"seed": seed, "min_loss": final_min, "theorems": failed})

            path = trajectory.to_csv(
                self._path(f"synthetic-seed{seed}.csv"),
                columns=report.columns(),
                summary={"bounds": report.bounds, "rho": inputs.rho, "violated": failed},
            )
            summary.files.append(str(path))
            summary.seeds[str(seed)] = {"min_loss": final_min, "bounds": report.flags()}
            logger.info("Seed %d: min loss %r (stochastic bound %r)", seed, final_min, checks[Theorem.STOCHASTIC])

        for sweep_eta in sweeps:
            summary.files.append(str(self._synthetic_sweep(params, sweep_eta, seeds)))

        summary.violations = violations
        self._write_record("synthetic-summary.json", summary)
        if violations:
            raise BoundViolation(f"{len(violations)} of {len(seeds)} seeds", report=summary)
        return summary

    def _sweep(self, sweep):
        sweep = sweep if sweep is not None else self.settings.synthetic.sweep or []
        if isinstance(sweep, (int, float)):
            sweep = [sweep]
        if not all(isinstance(eta, (int, float)) and eta > 0 for eta in sweep):
            raise ConfigError(f"Sweep step sizes must be positive numbers, got {sweep!r}")
        return [float(eta) for eta in sweep]

    def _synthetic_sweep(self, params, eta, seeds):
        """Per-iteration maximum over seeds of the loss and running minimum."""
        losses = np.full((len(seeds), params.K), np.nan)
        for row, seed in enumerate(seeds):
            trajectory, _ = self._synthetic_run(params, eta, seed)
            losses[row, : len(trajectory)] = trajectory.losses
        # trajectories ending at the optimum keep their last loss
        losses = pd.DataFrame(losses.T).ffill().to_numpy().T
        frame = pd.DataFrame(
            {
                "k": np.arange(params.K),
                "max_loss": losses.max(axis=0),
                "max_min_loss": np.minimum.accumulate(losses, axis=1).max(axis=0),
            }
        )
        frame["bound_stoch"] = stochastic_bound(
            params.p, params.L, 0.0, eta, params.d, params.sigma_r_sq, params.sigma_s_sq
        )
        logger.info("Sweep eta=%r over %d seeds", eta, len(seeds))
        return self._write_csv(
            f"synthetic-sweep-eta{eta!r}.csv", frame, summary={"eta": eta, "seeds": seeds}
        )
