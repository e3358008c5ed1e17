import addict
import numpy as np
from cached_property import cached_property

from .. import logger
from ..bounds import stochastic_bound
from ..constants import LOGREG_MODE_FORMATS, FitMode, LogregMode
from ..data import Dataset, fit_pca, load_mnist, save_projected, synthetic_blobs, transform
from ..exceptions import BoundViolation, ConfigError
from ..lowfloat import FloatFormat
from ..optimizer import Domain, NoiseModel, NoiseSpec, estimate_noise_moments, run
from ..problems import LogisticRegressionProblem, find_reference_optimum, fit_holder, holder_samples
from ..util import setting


class LogregMixin:
    """Multinomial logistic regression on PCA-reduced images or synthetic blobs."""

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)

    @property
    def _logreg_seed(self):
        return self._seeds("logreg")[0]

    def _load_dataset(self) -> Dataset:
        section = self.settings.logreg
        if section.images and section.labels:
            return load_mnist(section.images, section.labels, limit=section.limit or None)
        if not section.fallback:
            raise ConfigError("[logreg] images/labels are not set and the synthetic fallback is disabled")
        logger.info("No image files configured; using synthetic blobs")
        return synthetic_blobs(
            self._number("logreg", "classes", minimum=2, integer=True),
            self._number("logreg", "per_class", minimum=1, integer=True),
            self._number("logreg", "features", minimum=1, integer=True),
            self._number("logreg", "separation", minimum=0),
            seed=self._logreg_seed,
        )

    @cached_property
    def dataset(self) -> Dataset:
        dataset = self._load_dataset()
        components = self._number("logreg", "pca_components", minimum=0, integer=True)
        if not components:
            return dataset
        model = fit_pca(dataset.features, components)
        model.save(self._path("pca.json"))
        projected = Dataset.create(
            transform(model, dataset.features), dataset.labels, dataset.num_classes, dataset.feature_scale
        )
        save_projected(projected, self._path("projected.csv"), summary={"feature_scale": dataset.feature_scale})
        return projected

    @cached_property
    def logreg_problem(self) -> LogisticRegressionProblem:
        return LogisticRegressionProblem(
            self.dataset.features,
            self.dataset.labels,
            self.dataset.num_classes,
            regularization=setting(self.settings.problems.logreg.regularization, None),
        )

    @cached_property
    def logreg_start(self):
        return np.zeros(self.logreg_problem.dimension)

    @cached_property
    def logreg_reference(self):
        section = self.settings.problems.reference
        return find_reference_optimum(
            self.logreg_problem, self.logreg_start, steps=section.steps or None, rate=section.rate or None
        )

    def holder_fit(self, mode=None, p=None):
        reference = self.logreg_reference
        section = self.settings.holder
        min_radius = section.min_radius or 1e-2
        samples = holder_samples(
            self.logreg_problem,
            reference,
            max(reference.c0 / 2, 10 * min_radius),
            radii=section.radii or None,
            directions=section.directions or None,
            min_radius=min_radius,
            seed=self._logreg_seed,
        )
        mode = FitMode(mode or self.settings.logreg.holder_mode or section.mode or FitMode.LEAST_SQUARES)
        fit = fit_holder(samples, mode=mode, p=p)
        logger.info("Hölder fit: p=%r L=%r (%s)", fit.p, fit.L, fit.mode.value)
        return fit, samples

    def _logreg_formats(self, mode=None, mul=None, acc=None, update=None):
        try:
            mode = LogregMode(mode or self.settings.logreg.mode or LogregMode.WORKING)
        except ValueError as exc:
            raise ConfigError(f"Unknown logreg mode {mode!r}; choose from {[m.value for m in LogregMode]}") from exc
        formats = LOGREG_MODE_FORMATS[mode]
        overrides = (mul, acc, update)
        return mode, tuple(FloatFormat.parse(o or f) for o, f in zip(overrides, formats))

    def _logreg_noise(self, formats, seed):
        mul_fmt, acc_fmt, update_fmt = formats
        return NoiseModel(NoiseSpec.arithmetic(mul_fmt, acc_fmt), NoiseSpec.arithmetic(update_fmt), seed)

    def _logreg_moments(self, noise, probe_steps=None):
        # short probes from the start point, away from the cancellation near w*
        return estimate_noise_moments(
            self.logreg_problem,
            noise,
            Domain.unconstrained(),
            probe_steps=probe_steps or self.settings.optimizer.probe_steps or None,
            start=self.logreg_start,
            eta=self.settings.optimizer.probe_eta or None,
            batch_size=self.settings.logreg.batch_size or 0,
        )

    def run_logreg(self, mode=None, mul=None, acc=None, update=None):
        """Reference optimum, Hölder fit, noise moments and one SGD run in the given arithmetic mode.

        :param mode: a (working precision), b (bfloat gradients and update, 15-bit accumulator),
            c (bfloat gradients, exact update), d (as c with a 10-bit accumulator)
        """
        mode, formats = self._logreg_formats(mode, mul, acc, update)
        eta = self._number("logreg", "eta", minimum=0, exclusive=True)
        steps = self._number("logreg", "K", minimum=1, integer=True)
        seed = self._logreg_seed
        problem, reference = self.logreg_problem, self.logreg_reference
        fit, _ = self.holder_fit()

        noise = self._logreg_noise(formats, seed)
        moments = self._logreg_moments(noise)
        d = problem.dimension
        bound = stochastic_bound(
            fit.p, fit.L, reference.f_star, eta, d, moments.d_sigma_r_sq / d, moments.d_sigma_s_sq / d
        )

        trajectory = run(
            problem,
            self.logreg_start,
            eta,
            steps,
            noise,
            Domain.unconstrained(),
            reference=reference,
            batch_size=self.settings.logreg.batch_size or 0,
        )
        final_min = float(trajectory.min_losses[-1])
        summary = addict.Dict(
            mode=mode.value,
            formats=[str(fmt) for fmt in formats],
            f_star=reference.f_star,
            c0=reference.c0,
            holder=fit.to_dict(),
            moments=moments.to_dict(),
            bound_stoch=bound,
            min_loss=final_min,
            within_bound=final_min <= bound,
            accuracy=problem.accuracy(trajectory.final),
        )
        summary.file = str(
            trajectory.to_csv(self._path(f"logreg-mode{mode.value}.csv"), columns={"bound_stoch": bound}, summary=summary)
        )
        logger.info("Mode %s: min loss %r, stochastic bound %r", mode.value, final_min, bound)
        if not summary.within_bound:
            logger.warning("Mode %s: running minimum above the stochastic bound", mode.value)
            if self.settings.logreg.strict:
                raise BoundViolation(f"logreg mode {mode.value}", report=summary)
        return summary
