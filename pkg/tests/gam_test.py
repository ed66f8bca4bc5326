"""
Tests for the gamma/log GAM: bases, penalties, fitting, GCV and model comparison.
"""
import numpy as np
import pytest
from scipy import stats

from reading_predictability import gam
from reading_predictability.gam import (
    ConvergenceError,
    build_smooth,
    compare_models,
    fit_gam,
    gamma_deviance,
    gcv_score,
    gcv_value,
    partial_effect,
    predict,
    term_summaries,
    working_weights,
)
from reading_predictability.models import SmoothSpec
from test_data import gamma_sample, reference_gamma_glm


def test_gamma_deviance_reference_value():
    """Test the deviance of y = (1, 2) at mu = (2, 1)."""
    assert gamma_deviance(np.array([1.0, 2.0]), np.array([2.0, 1.0])) == pytest.approx(1.0, abs=1e-12)


def test_gamma_deviance_zero_at_perfect_fit():
    """Test that the deviance vanishes when mu equals y."""
    y = np.array([120.0, 250.0, 310.0])
    assert gamma_deviance(y, y) == 0.0


def test_working_weights_are_one():
    """Test the unit IRLS weights of the gamma family with log link."""
    np.testing.assert_array_equal(working_weights(np.array([0.5, 200.0])), np.ones(2))


def test_gcv_value():
    """Test GCV = n D / (n - tau)^2 and the over-parameterized error."""
    assert gcv_value(100, 50.0, 10.0) == pytest.approx(0.617284, abs=1e-6)
    with pytest.raises(ValueError):
        gcv_value(10, 1.0, 10.0)


@pytest.mark.parametrize("basis", ["tp", "cr"])
def test_smooth_basis_is_centered_with_psd_penalty(basis):
    """Test sum-to-zero columns, rank k - 1 and a positive semi-definite penalty."""
    x = np.random.default_rng(1).uniform(0, 10, size=200)
    smooth = build_smooth(x, SmoothSpec("x", k=8, basis=basis))
    columns = smooth.evaluate(x)
    assert columns.shape == (200, 7)
    np.testing.assert_allclose(columns.sum(axis=0), 0.0, atol=1e-8)
    assert np.linalg.eigvalsh(smooth.penalty).min() > -1e-8
    np.testing.assert_allclose(smooth.penalty, smooth.penalty.T)


@pytest.mark.parametrize("basis", ["tp", "cr"])
def test_penalty_null_space_is_linear(basis):
    """Test that a linear function of x is unpenalized."""
    x = np.linspace(0, 1, 100)
    smooth = build_smooth(x, SmoothSpec("x", k=6, basis=basis))
    columns = smooth.evaluate(x)
    coefficients = np.linalg.lstsq(columns, x - x.mean(), rcond=None)[0]
    np.testing.assert_allclose(columns @ coefficients, x - x.mean(), atol=1e-6)
    penalty = coefficients @ smooth.penalty @ coefficients
    assert penalty < 1e-6 * np.linalg.norm(smooth.penalty)


def test_smooth_needs_three_distinct_values():
    """Test rejection of covariates with too few distinct values."""
    with pytest.raises(ValueError):
        build_smooth(np.array([1.0, 2.0, 1.0, 2.0]), SmoothSpec("x"))
    with pytest.raises(ValueError):
        build_smooth(np.array([1.0, np.nan, 2.0, 3.0]), SmoothSpec("x"))


def test_smooth_rank_is_reduced_to_distinct_values():
    """Test that k shrinks to the number of distinct values."""
    x = np.tile([1.0, 2.0, 3.0, 4.0], 10)
    assert build_smooth(x, SmoothSpec("x", k=10)).evaluate(x).shape[1] == 3


def test_smooth_spec_validation():
    """Test rejection of small k, other penalty orders and unknown bases."""
    for kwargs in ({"k": 2}, {"m": 3}, {"basis": "ps"}):
        with pytest.raises(ValueError):
            SmoothSpec("x", **kwargs)


def test_linear_fit_matches_glm(linear_data):
    """Test that a fit with linear terms only is the gamma GLM."""
    fit = fit_gam(linear_data["y"], [], linear_data, linear_terms=["x", "z"])
    x = np.column_stack([np.ones(300), linear_data["x"], linear_data["z"]])
    coefficients, fitted = reference_gamma_glm(x, linear_data["y"])
    np.testing.assert_allclose(fit.fitted, fitted, rtol=1e-5)
    np.testing.assert_allclose(fit.coefficients[1:], coefficients[1:], rtol=1e-4)
    assert fit.tau == pytest.approx(3.0)
    assert fit.deviance == pytest.approx(gamma_deviance(linear_data["y"], fitted), rel=1e-8)
    assert gcv_score(fit) == pytest.approx(300 * fit.deviance / (300 - 3) ** 2)


def test_heavy_penalty_reduces_smooth_to_line(linear_data):
    """Test that a very large smoothing parameter leaves only the linear part."""
    data = {"x": linear_data["x"]}
    smooth = SmoothSpec("x", k=8)
    fit = fit_gam(linear_data["y"], [smooth], data, fixed_lambdas={"x": 1e8})
    x = np.column_stack([np.ones(300), linear_data["x"]])
    _, fitted = reference_gamma_glm(x, linear_data["y"])
    assert fit.deviance == pytest.approx(gamma_deviance(linear_data["y"], fitted), rel=1e-3)
    assert fit.tau == pytest.approx(2.0, abs=0.05)


def test_recovers_sine(sine_data):
    """Test recovery of a smooth log-mean curve."""
    fit = fit_gam(sine_data["y"], [SmoothSpec("x", k=10)], sine_data)
    eta = np.log(fit.fitted)
    assert np.sqrt(np.mean((eta - sine_data["truth"]) ** 2)) < 0.1
    assert 3.0 < fit.edf["x"] < 9.0
    assert fit.r2_adj > 0.5


@pytest.mark.parametrize("factor", [1.1, 1 / 1.1])
def test_selected_lambda_is_gcv_optimal(sine_data, factor):
    """Test that moving the selected smoothing parameter by 10% does not lower GCV."""
    spec = SmoothSpec("x", k=10)
    fit = fit_gam(sine_data["y"], [spec], sine_data)
    moved = fit_gam(sine_data["y"], [spec], sine_data, fixed_lambdas={"x": fit.lambdas["x"] * factor})
    assert moved.gcv >= fit.gcv * (1 - 1e-7)


def test_edf_bounds(sine_data):
    """Test that term edf lies within the number of term coefficients."""
    rng = np.random.default_rng(5)
    data = {"x": sine_data["x"], "noise": rng.uniform(size=400)}
    fit = fit_gam(sine_data["y"], [SmoothSpec("x", k=8), SmoothSpec("noise", k=6)], data)
    assert 0.0 < fit.edf["noise"] <= 5.0 + 1e-9
    assert 0.0 < fit.edf["x"] <= 7.0 + 1e-9
    assert fit.tau == pytest.approx(1.0 + fit.edf["x"] + fit.edf["noise"])


def test_cubic_regression_basis_fits(sine_data):
    """Test the cubic regression basis on the same curve."""
    fit = fit_gam(sine_data["y"], [SmoothSpec("x", k=10, basis="cr")], sine_data)
    assert np.sqrt(np.mean((np.log(fit.fitted) - sine_data["truth"]) ** 2)) < 0.1


def test_invalid_responses():
    """Test rejection of non-positive responses and unknown covariates."""
    with pytest.raises(ValueError):
        fit_gam([1.0, 0.0, 2.0], [], {})
    with pytest.raises(ValueError):
        fit_gam([1.0, 2.0, 3.0], [SmoothSpec("x")], {})


def test_convergence_error_carries_trace():
    """Test the convergence error payload."""
    error = ConvergenceError("no", [3.0, 2.0])
    assert error.trace == [3.0, 2.0]
    assert isinstance(error, RuntimeError)


def test_compare_identical_fits(linear_data):
    """Test that a fit compared with itself shows no change."""
    fit = fit_gam(linear_data["y"], [], linear_data, linear_terms=["x"])
    comparison = compare_models(fit, fit)
    assert comparison.delta_deviance == 0.0
    assert comparison.delta_edf == 0.0
    assert comparison.chi2 == 0.0
    assert comparison.p_value == 1.0


def test_compare_nested_linear_fits(linear_data):
    """Test the chi-square statistic and p-value of a nested comparison."""
    base = fit_gam(linear_data["y"], [], linear_data, linear_terms=["x"])
    extended = fit_gam(linear_data["y"], [], linear_data, linear_terms=["x", "z"])
    comparison = compare_models(base, extended)
    assert comparison.delta_edf == pytest.approx(1.0)
    assert comparison.delta_deviance > 0
    assert comparison.chi2 == pytest.approx(comparison.delta_deviance / extended.scale)
    assert comparison.p_value == pytest.approx(stats.chi2.sf(comparison.chi2, 1.0), rel=1e-8)
    assert comparison.p_value < 0.05
    assert comparison.delta_gcv == pytest.approx(extended.gcv - base.gcv)


def test_compare_rejects_different_responses(linear_data):
    """Test that fits of different responses cannot be compared."""
    base = fit_gam(linear_data["y"], [], linear_data, linear_terms=["x"])
    other = fit_gam(linear_data["y"] * 2, [], linear_data, linear_terms=["x"])
    with pytest.raises(ValueError):
        compare_models(base, other)


def test_compare_undefined_p_value(linear_data):
    """Test a NaN p-value when deviance drops without extra degrees of freedom."""
    better = fit_gam(linear_data["y"], [], linear_data, linear_terms=["x", "z"])
    worse = fit_gam(linear_data["y"], [], linear_data, linear_terms=["x", "z"])
    worse.deviance += 1.0
    assert np.isnan(compare_models(worse, better).p_value)


def test_partial_effect(sine_data):
    """Test curve shape, standard errors and the linear predictor column."""
    fit = fit_gam(sine_data["y"], [SmoothSpec("x", k=10)], sine_data)
    effect = partial_effect(fit, "x", points=50)
    assert effect.grid.shape == effect.effect.shape == effect.se.shape == (50,)
    assert effect.grid[0] == pytest.approx(sine_data["x"].min())
    assert np.all(effect.se > 0)
    np.testing.assert_allclose(effect.linear_predictor, fit.coefficients[0] + effect.effect)
    np.testing.assert_allclose(effect.linear_predictor, predict(fit, {"x": effect.grid}))
    with pytest.raises(ValueError):
        partial_effect(fit, "missing")


def test_term_summaries_detect_signal(sine_data):
    """Test that the real effect is significant and pure noise is not."""
    rng = np.random.default_rng(8)
    data = {"x": sine_data["x"], "noise": rng.uniform(size=400)}
    fit = fit_gam(sine_data["y"], [SmoothSpec("x", k=8), SmoothSpec("noise", k=6)], data)
    summaries = {s.term: s for s in term_summaries(fit)}
    assert summaries["x"].p_value < 1e-6
    assert summaries["noise"].p_value > 1e-4


def test_fit_is_deterministic(sine_data):
    """Test identical results for identical input."""
    first = fit_gam(sine_data["y"], [SmoothSpec("x", k=8)], sine_data)
    second = fit_gam(sine_data["y"], [SmoothSpec("x", k=8)], sine_data)
    assert first.gcv == second.gcv
    np.testing.assert_array_equal(first.coefficients, second.coefficients)


def test_intercept_only_fit():
    """Test that an intercept-only fit returns the mean."""
    y = gamma_sample(np.random.default_rng(2), np.full(50, 200.0))
    fit = fit_gam(y, [], {})
    np.testing.assert_allclose(fit.fitted, y.mean(), rtol=1e-8)


def test_pirls_uses_working_weights(linear_data, monkeypatch):
    """Test that the penalized IRLS loop takes its weights from the family."""
    calls = []

    def counting_weights(mu):
        calls.append(len(mu))
        return np.ones_like(mu)

    monkeypatch.setattr(gam, "working_weights", counting_weights)
    fit = fit_gam(linear_data["y"], [], linear_data, linear_terms=["x", "z"])
    assert calls and set(calls) == {300}
    x = np.column_stack([np.ones(300), linear_data["x"], linear_data["z"]])
    _, fitted = reference_gamma_glm(x, linear_data["y"])
    np.testing.assert_allclose(fit.fitted, fitted, rtol=1e-5)


def test_penalized_line_is_straight_and_matches_glm_gcv(linear_data):
    """Test that an effectively infinite penalty gives a straight curve and the GLM score."""
    fit = fit_gam(linear_data["y"], [SmoothSpec("x", k=10)], {"x": linear_data["x"]}, fixed_lambdas={"x": 1e10})
    assert fit.edf["x"] == pytest.approx(1.0, abs=1e-3)
    effect = partial_effect(fit, "x", points=100)
    assert np.abs(np.diff(effect.effect, n=2)).max() < 1e-8
    x = np.column_stack([np.ones(300), linear_data["x"]])
    _, fitted = reference_gamma_glm(x, linear_data["y"])
    expected = gcv_value(300, gamma_deviance(linear_data["y"], fitted), 2.0)
    assert fit.gcv == pytest.approx(expected, rel=1e-6)


def test_edf_decreases_with_lambda(sine_data):
    """Test that a term's edf falls monotonically towards 1 as its smoothing parameter grows."""
    spec = SmoothSpec("x", k=10)
    edfs = [fit_gam(sine_data["y"], [spec], sine_data, fixed_lambdas={"x": value}).edf["x"]
            for value in np.logspace(-4, 8, 13)]
    assert np.all(np.diff(edfs) <= 1e-9)
    assert edfs[0] > 8.0
    assert edfs[-1] == pytest.approx(1.0, abs=0.05)


def test_gcv_selects_a_line_for_linear_truth():
    """Test GCV selection on linear log-mean data over several seeds."""
    spec = SmoothSpec("x", k=10)
    straight = 0
    for seed in range(5):
        rng = np.random.default_rng(40 + seed)
        x = rng.uniform(-1.0, 1.0, size=300)
        y = gamma_sample(rng, np.exp(5.0 + 0.3 * x), shape=8.0)
        fit = fit_gam(y, [spec], {"x": x})
        heavy = fit_gam(y, [spec], {"x": x}, fixed_lambdas={"x": 1e6})
        assert fit.gcv <= heavy.gcv * (1 + 1e-6)
        straight += fit.edf["x"] <= 1.05
    assert straight >= 4


def test_compare_models_is_antisymmetric(sine_data):
    """Test that swapping the arguments negates the deviance and edf differences."""
    base = fit_gam(sine_data["y"], [], sine_data, linear_terms=["x"])
    extended = fit_gam(sine_data["y"], [SmoothSpec("x", k=8)], sine_data)
    forward = compare_models(base, extended)
    backward = compare_models(extended, base)
    assert backward.delta_deviance == -forward.delta_deviance
    assert backward.delta_edf == -forward.delta_edf
    assert backward.delta_gcv == pytest.approx(-forward.delta_gcv)
    assert forward.delta_deviance > 0
    assert backward.p_value == 1.0


def test_recovers_sine_from_noisy_large_sample():
    """Test curve recovery with 2000 observations and gamma shape 5."""
    rng = np.random.default_rng(21)
    x = np.sort(rng.uniform(0.0, 1.0, size=2000))
    truth = 5.0 + np.sin(2.0 * np.pi * x)
    fit = fit_gam(gamma_sample(rng, np.exp(truth), shape=5.0), [SmoothSpec("x", k=10)], {"x": x})
    assert np.sqrt(np.mean((np.log(fit.fitted) - truth) ** 2)) < 0.1
