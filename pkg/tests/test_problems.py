import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from lpsgd.constants import FitMode
from lpsgd.exceptions import AtOptimum, DomainError, ReferenceDivergence
from lpsgd.lowfloat import FloatFormat, quantize
from lpsgd.problems import (
    LogisticRegressionProblem,
    PowerNormFunction,
    Problem,
    evaluate,
    find_reference_optimum,
    fit_holder,
    holder_samples,
    quasi_subgradient,
    sublevel_member,
)


class Ascent(Problem):
    """A quadratic whose reported gradient points uphill."""

    dimension = 2

    def evaluate(self, w):
        return float(np.dot(w, w))

    def batch_subgradient(self, w, indices=None):
        return -np.asarray(w, dtype=np.float64)


class TestPowerNorm:
    def test_evaluate(self, power_norm):
        assert evaluate(power_norm, [0.0, 0.0]) == 0.0
        assert evaluate(power_norm, [1.0, 0.0]) == 3.0
        assert power_norm.evaluate([3.0, 4.0]) == pytest.approx(3 * 5 ** 0.2)

    def test_quasi_subgradient_is_the_point(self, power_norm):
        assert np.array_equal(quasi_subgradient(power_norm, [3.0, -4.0]), [3.0, -4.0])

    def test_no_direction_at_optimum(self, power_norm):
        with pytest.raises(AtOptimum):
            power_norm.quasi_subgradient(np.zeros(2))
        with pytest.raises(AtOptimum):
            power_norm.lowp_gradient([1e-50, 0.0], FloatFormat.parse("e5m10"), FloatFormat.parse("e5m10"))

    def test_lowp_gradient_rounds_into_multiplier_format(self, power_norm, bfloat16):
        assert np.array_equal(power_norm.lowp_gradient([math.pi, 1.0], bfloat16, bfloat16), [3.140625, 1.0])

    def test_rejects_wrong_dimension(self, power_norm):
        with pytest.raises(DomainError):
            power_norm.evaluate([1.0, 2.0, 3.0])

    @pytest.mark.parametrize("L, p, d", [(0, 0.2, 2), (3, 0, 2), (3, 1.5, 2), (3, 0.2, 0)])
    def test_rejects_invalid_parameters(self, L, p, d):
        with pytest.raises(DomainError):
            PowerNormFunction(L, p, d)

    def test_known_optimum(self, power_norm):
        reference = find_reference_optimum(power_norm, np.array([3.0, 4.0]))
        assert reference.f_star == 0.0
        assert reference.c0 == 5.0
        assert np.array_equal(reference.w_star, np.zeros(2))

    def test_default_start_is_off_the_optimum(self):
        problem = PowerNormFunction(dimension=4)
        assert np.linalg.norm(problem.default_start()) == pytest.approx(1.0)

    def test_sublevel_membership_is_strict(self, power_norm):
        assert sublevel_member(power_norm, 3.5, [1.0, 0.0])
        assert not sublevel_member(power_norm, 3.0, [1.0, 0.0])
        assert not sublevel_member(power_norm, 0.0, [0.0, 0.0])


class TestLogisticRegression:
    def test_zero_weights_give_log_classes(self, logreg):
        assert logreg.evaluate(np.zeros(logreg.dimension)) == pytest.approx(math.log(3))

    def test_dimension_includes_bias(self, logreg):
        assert logreg.dimension == (2 + 1) * 3

    def test_gradient_matches_finite_differences(self, logreg, rng):
        w = rng.standard_normal(logreg.dimension) * 0.5
        h = 1e-6
        numeric = np.array(
            [
                (logreg.evaluate(w + h * e) - logreg.evaluate(w - h * e)) / (2 * h)
                for e in np.eye(logreg.dimension)
            ]
        )
        assert_allclose(logreg.quasi_subgradient(w), numeric, atol=1e-6)

    def test_minibatch_gradient_of_all_rows_is_full_gradient(self, logreg, rng):
        w = rng.standard_normal(logreg.dimension)
        assert_allclose(
            logreg.batch_subgradient(w, np.arange(logreg.num_samples)), logreg.batch_subgradient(w), rtol=1e-12
        )

    @pytest.mark.parametrize("problem_name", ["power_norm", "logreg"])
    def test_quasi_subgradient_separates_sublevel_set(self, problem_name, request, rng):
        problem = request.getfixturevalue(problem_name)
        for _ in range(50):
            x = rng.standard_normal(problem.dimension)
            g = problem.quasi_subgradient(x)
            for y in x + rng.standard_normal((20, problem.dimension)):
                if problem.evaluate(y) < problem.evaluate(x):
                    assert np.dot(g, y - x) <= 1e-12

    def test_working_precision_gradient_matches_batch_gradient(self, logreg, working, rng):
        w = rng.standard_normal(logreg.dimension)
        assert_allclose(logreg.lowp_gradient(w, working, working), logreg.batch_subgradient(w), rtol=1e-10, atol=1e-14)

    def test_low_precision_gradient_is_representable(self, logreg, bfloat16, rng):
        accumulator = FloatFormat.parse("e8m15")
        w = rng.standard_normal(logreg.dimension)
        gradient = logreg.lowp_gradient(w, bfloat16, accumulator)
        assert np.array_equal(quantize(gradient, accumulator), gradient)
        assert_allclose(gradient, logreg.batch_subgradient(w), atol=0.25)

    def test_rejects_out_of_range_labels(self):
        with pytest.raises(DomainError):
            LogisticRegressionProblem([[0.0], [1.0]], [0, 2], num_classes=2)
        with pytest.raises(DomainError):
            LogisticRegressionProblem([[0.0], [1.0]], [0], num_classes=2)

    def test_accuracy(self, logreg):
        assert 0.0 <= logreg.accuracy(np.zeros(logreg.dimension)) <= 1.0


class TestReferenceOptimum:
    def test_separable_pair_converges(self):
        problem = LogisticRegressionProblem([[1.0, 0.0], [-1.0, 0.0]], [0, 1], 2, regularization=1e-3)
        start = np.zeros(problem.dimension)
        reference = find_reference_optimum(problem, start, steps=40_000, rate=1.0, tolerance=1e-6)
        assert np.linalg.norm(problem.batch_subgradient(reference.w_star)) <= 1e-5
        assert reference.f_star < problem.evaluate(start)
        assert reference.c0 == pytest.approx(np.linalg.norm(reference.w_star))

    @pytest.mark.parametrize("steps, tolerance, taken", [(7, 0.0, 7), (500, 1e9, 0)])
    def test_logs_the_steps_taken(self, logreg, monkeypatch, steps, tolerance, taken):
        messages = []
        monkeypatch.setattr("lpsgd.problems.logger.info", lambda message, *args: messages.append(message % args))
        find_reference_optimum(logreg, np.zeros(logreg.dimension), steps=steps, rate=0.5, tolerance=tolerance)
        assert messages[-1].endswith(f"after {taken} steps")

    def test_f_star_is_the_best_loss_seen(self, logreg):
        start = np.zeros(logreg.dimension)
        reference = find_reference_optimum(logreg, start, steps=200, rate=0.5)
        assert reference.f_star == logreg.evaluate(reference.w_star)
        assert reference.f_star <= logreg.evaluate(start)

    def test_divergence(self):
        with pytest.raises(ReferenceDivergence) as info:
            find_reference_optimum(Ascent(), np.ones(2), steps=1000, rate=0.5)
        assert info.value.best_loss == 2.0


class TestHolderFit:
    @pytest.mark.parametrize("p, L", [(0.2, 3.0), (1.6, 0.85)])
    def test_recovers_exact_power_law(self, p, L):
        samples = [(d, L * d ** p) for d in np.geomspace(1e-2, 10, 12)]
        fit = fit_holder(samples)
        assert fit.p == pytest.approx(p, rel=1e-9)
        assert fit.L == pytest.approx(L, rel=1e-9)
        assert fit.residual == pytest.approx(0, abs=1e-9)
        assert fit.mode is FitMode.LEAST_SQUARES

    def test_fixed_exponent(self):
        samples = [(d, 2.0 * d ** 0.5) for d in (0.1, 1.0, 4.0)]
        fit = fit_holder(samples, p=0.5)
        assert fit.p == 0.5
        assert fit.L == pytest.approx(2.0)

    def test_majorizing_covers_every_sample(self):
        samples = [(d, 2.0 * d ** 0.5) for d in np.geomspace(0.1, 10, 8)] + [(1.0, 5.0)]
        least = fit_holder(samples)
        fit = fit_holder(samples, mode="majorizing")
        assert fit.L >= least.L
        for distance, excess in samples:
            assert fit.L * distance ** fit.p >= excess * (1 - 1e-12)

    def test_zero_excess_samples_are_dropped(self):
        samples = [(0.5, 0.0), (1.0, 1.0), (4.0, 2.0)]
        assert fit_holder(samples).p == pytest.approx(0.5)

    @pytest.mark.parametrize(
        "samples",
        [
            [(1.0, 1.0)],
            [(1.0, 1.0), (1.0, 2.0)],
            [(0.0, 1.0), (1.0, 2.0)],
            [(-1.0, 1.0), (1.0, 2.0)],
            [(1.0, 0.0), (2.0, 0.0)],
        ],
    )
    def test_degenerate_samples(self, samples):
        with pytest.raises(DomainError):
            fit_holder(samples)

    def test_power_norm_probes(self):
        problem = PowerNormFunction(L=3.0, p=0.2, dimension=5)
        reference = problem.known_optimum
        samples = holder_samples(problem, reference, 5.0, radii=10, directions=4, min_radius=1e-2, seed=3)
        assert len(samples) == 10
        assert samples[0][0] == pytest.approx(1e-2)
        assert samples[-1][0] == pytest.approx(5.0)
        fit = fit_holder(samples)
        assert fit.p == pytest.approx(0.2, rel=1e-6)
        assert fit.L == pytest.approx(3.0, rel=1e-6)

    def test_empty_probe_range(self, power_norm):
        with pytest.raises(DomainError):
            holder_samples(power_norm, power_norm.known_optimum, 1e-3, min_radius=1e-2)
