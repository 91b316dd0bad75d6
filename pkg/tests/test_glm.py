from __future__ import annotations

import numpy as np
import pytest
from conftest import make_dataset
from oracles import grid_search_mle, logistic_loglik, normal_equations

from proxyaudit.data import encode_design
from proxyaudit.errors import ConvergenceError, DataError, FitError, SeparationError
from proxyaudit.glm import (
    Accuracy,
    ModelSpec,
    fit,
    fit_logistic,
    fit_ols,
    goodness_of_fit,
    mean_accuracy,
    predict,
    residual_summary,
    zero_coefficients,
)

SIX = make_dataset(
    ("x1", "continuous", "predictor", [1.0, 2.0, 3.0, 4.0, 5.0, 6.0]),
    ("x2", "continuous", "predictor", [2.0, 1.0, 4.0, 3.0, 6.0, 8.0]),
    ("y", "continuous", "outcome", [3.1, 3.9, 7.2, 7.8, 11.5, 14.1]),
)
EIGHT_X = [0, 1, 2, 3, 4, 5, 6, 7]
EIGHT_Y = [0, 0, 1, 0, 1, 0, 1, 1]
EIGHT = make_dataset(("x", "continuous", "predictor", EIGHT_X), ("y", "binary", "outcome", EIGHT_Y))
# coarse-to-fine grid-search MLE for EIGHT, frozen
EIGHT_MLE = (-2.07929534, 0.59408438)


def test_exact_line():
    x = np.linspace(-3, 3, 9)
    d = make_dataset(("x", "continuous", "predictor", x), ("y", "continuous", "outcome", 2 * x + 1))
    m = fit(d, ModelSpec("m", "ols", "y", ("x",)))
    assert m.coefficients["x"] == pytest.approx(2.0, abs=1e-12)
    assert m.intercept == pytest.approx(1.0, abs=1e-12)
    assert m.r_squared == pytest.approx(1.0, abs=1e-9)


def test_ols_matches_normal_equations():
    spec = ModelSpec("m", "ols", "y", ("x1", "x2"))
    m = fit_ols(SIX, spec)
    X = encode_design(SIX, spec.predictors).X
    exact = [float(b) for b in normal_equations(X, SIX["y"])]
    assert np.allclose(m.beta(), exact, atol=1e-8, rtol=0)


def test_duplicate_predictor_dropped():
    d = make_dataset(
        ("a", "continuous", "predictor", SIX["x1"]),
        ("b", "continuous", "predictor", SIX["x1"] * 1.0),
        ("y", "continuous", "outcome", SIX["y"]),
    )
    both = fit(d, ModelSpec("m", "ols", "y", ("a", "b")))
    one = fit(d, ModelSpec("m", "ols", "y", ("a",)))
    assert both.dropped == ("b",)
    assert both.coefficients["b"] == 0.0
    assert np.allclose(predict(both, d), predict(one, d), atol=1e-8)
    assert both.r_squared == pytest.approx(one.r_squared, abs=1e-12)


def test_ols_errors():
    d = make_dataset(("x", "continuous", "predictor", [1, 2]), ("y", "continuous", "outcome", [1, 3]))
    with pytest.raises(FitError):
        fit(d, ModelSpec("m", "ols", "y", ("x",)))
    flat = make_dataset(("x", "continuous", "predictor", [1, 2, 3]), ("y", "continuous", "outcome", [2, 2, 2]))
    with pytest.raises(FitError):
        fit(flat, ModelSpec("m", "ols", "y", ("x",)))


def test_logistic_matches_grid_search():
    m = fit_logistic(EIGHT, ModelSpec("m", "logistic", "y", ("x",)))
    X = np.column_stack([np.ones(8), EIGHT_X])
    oracle = grid_search_mle(X, EIGHT_Y)
    assert np.allclose(oracle, EIGHT_MLE, atol=1e-6)
    assert m.intercept == pytest.approx(EIGHT_MLE[0], abs=1e-3)
    assert m.coefficients["x"] == pytest.approx(EIGHT_MLE[1], abs=1e-3)
    assert m.log_likelihood == pytest.approx(logistic_loglik(m.beta(), X, EIGHT_Y), abs=1e-12)
    assert m.log_likelihood >= m.null_log_likelihood - 1e-8
    assert 0 <= m.mcfadden_r2 < 1


def test_logistic_null_relationship():
    x = np.tile([0.0, 1.0], 200)
    y = np.tile([0, 0, 1, 1], 100)
    d = make_dataset(("x", "continuous", "predictor", x), ("y", "binary", "outcome", y))
    m = fit(d, ModelSpec("m", "logistic", "y", ("x",)))
    assert abs(m.coefficients["x"]) < 1e-2
    assert m.mcfadden_r2 < 0.01


def test_logistic_separation():
    d = make_dataset(("x", "continuous", "predictor", [1, 2, 3, 4, 5, 6]), ("y", "binary", "outcome", [0, 0, 0, 1, 1, 1]))
    with pytest.raises(SeparationError):
        fit(d, ModelSpec("m", "logistic", "y", ("x",)))


def test_logistic_one_class():
    d = make_dataset(("x", "continuous", "predictor", [1, 2, 3]), ("y", "binary", "outcome", [1, 1, 1]))
    with pytest.raises(FitError):
        fit(d, ModelSpec("m", "logistic", "y", ("x",)))


def test_convergence_error_is_fit_error():
    assert issubclass(ConvergenceError, FitError)


def test_rare_category_converges():
    # a 1%-sized category with a large effect needs step control to converge
    g = np.array(["a"] * 990 + ["b"] * 10)
    y = np.array([0] * 940 + [1] * 50 + [0] * 1 + [1] * 9)
    d = make_dataset(("g", "categorical", "predictor", g, ("a", "b")), ("y", "binary", "outcome", y))
    m = fit(d, ModelSpec("m", "logistic", "y", ("g",)))
    assert m.coefficients["g[b]"] == pytest.approx(np.log(9 / 1) - np.log(50 / 940), abs=1e-6)


def test_predict_intercept_row():
    m = fit(SIX, ModelSpec("m", "ols", "y", ("x1", "x2")))
    zero = make_dataset(
        ("x1", "continuous", "predictor", [0.0, 0.0]),
        ("x2", "continuous", "predictor", [0.0, 0.0]),
        ("y", "continuous", "outcome", [0.0, 1.0]),
    )
    assert predict(m, zero)[0] == pytest.approx(m.intercept)
    lm = fit(EIGHT, ModelSpec("m", "logistic", "y", ("x",)))
    z = make_dataset(("x", "continuous", "predictor", [0.0, 1.0]), ("y", "binary", "outcome", [0, 1]))
    assert predict(lm, z)[0] == pytest.approx(1 / (1 + np.exp(-lm.intercept)))


def test_residuals_sum_to_zero():
    m = fit(SIX, ModelSpec("m", "ols", "y", ("x1", "x2")))
    assert abs(np.sum(SIX["y"] - predict(m, SIX))) < 1e-8


def test_logistic_predictions_in_unit_interval():
    p = predict(fit(EIGHT, ModelSpec("m", "logistic", "y", ("x",))), EIGHT)
    assert ((p > 0) & (p < 1)).all()


def test_predict_unseen_level_and_missing_column():
    d = make_dataset(
        ("g", "categorical", "predictor", ["a", "a", "b", "b", "a", "b"], ("a", "b", "c")),
        ("y", "continuous", "outcome", [1, 2, 3, 4, 1.5, 3.5]),
    )
    m = fit(d, ModelSpec("m", "ols", "y", ("g",)))
    new = make_dataset(("g", "categorical", "predictor", ["a", "c"], ("a", "b", "c")), ("y", "continuous", "outcome", [0, 1]))
    with pytest.raises(DataError, match="unseen category level"):
        predict(m, new)
    with pytest.raises(DataError):
        predict(m, make_dataset(("y", "continuous", "outcome", [0, 1])))


def test_goodness_of_fit_consistency():
    m = fit(SIX, ModelSpec("m", "ols", "y", ("x1", "x2")))
    assert goodness_of_fit(m, SIX) == pytest.approx(m.r_squared, abs=1e-9)
    lm = fit(EIGHT, ModelSpec("m", "logistic", "y", ("x",)))
    assert goodness_of_fit(lm, EIGHT) == pytest.approx(lm.mcfadden_r2, abs=1e-9)
    null = fit(SIX, ModelSpec("n", "ols", "y", ()))
    assert null.r_squared == pytest.approx(0.0, abs=1e-12)
    lnull = fit(EIGHT, ModelSpec("n", "logistic", "y", ()))
    assert lnull.mcfadden_r2 == pytest.approx(0.0, abs=1e-12)


def test_mean_accuracy():
    x = np.arange(6.0)
    d = make_dataset(("x", "continuous", "predictor", x), ("y", "continuous", "outcome", 3 * x))
    m = fit(d, ModelSpec("m", "ols", "y", ("x",)))
    acc = mean_accuracy(m, d)
    assert acc.metric == "mae" and acc.value == pytest.approx(0.0, abs=1e-12)
    assert not acc.higher_is_better
    test = make_dataset(("x", "continuous", "predictor", [0, 1, 2, 3]), ("y", "continuous", "outcome", [1, 2, 6, 8]))
    # hand MAE: |1-0| + |2-3| + |6-6| + |8-9| over 4
    assert mean_accuracy(m, test).value == pytest.approx(0.75, abs=1e-9)


def test_classification_accuracy_chance_and_perfect():
    x = np.tile([0.0, 1.0], 50)
    y = np.tile([0, 0, 1, 1], 25)
    d = make_dataset(("x", "continuous", "predictor", x), ("y", "binary", "outcome", y))
    m = fit(d, ModelSpec("m", "logistic", "y", ()))
    acc = mean_accuracy(m, d)
    assert acc.metric == "accuracy" and acc.higher_is_better
    assert acc.value == pytest.approx(0.5)
    lm = fit(EIGHT, ModelSpec("m", "logistic", "y", ("x",)))
    perfect = make_dataset(("x", "continuous", "predictor", [0.0, 7.0]), ("y", "binary", "outcome", [0, 1]))
    assert mean_accuracy(lm, perfect).value == 1.0
    assert Accuracy(0.9, "accuracy").higher_is_better


def test_zero_coefficients():
    m = fit(SIX, ModelSpec("m", "ols", "y", ("x1", "x2")))
    assert np.array_equal(predict(zero_coefficients(m, []), SIX), predict(m, SIX))
    z = zero_coefficients(m, ["x2"])
    assert z.stale and z.r_squared is None
    assert z.coefficients["x2"] == 0.0 and z.coefficients["x1"] == m.coefficients["x1"]
    assert z.intercept == m.intercept
    with pytest.raises(DataError):
        zero_coefficients(m, ["nope"])


def test_zero_coefficients_orthogonal_design_matches_refit():
    # centred, mutually orthogonal predictors
    x = np.array([-1.0, 1.0, -1.0, 1.0, -1.0, 1.0, -1.0, 1.0])
    w = np.array([-1.0, -1.0, 1.0, 1.0, -1.0, -1.0, 1.0, 1.0])
    y = 2 * x - 3 * w + np.array([0.1, -0.2, 0.3, 0.0, -0.1, 0.2, -0.3, 0.05])
    d = make_dataset(("x", "continuous", "predictor", x), ("w", "continuous", "protected", w), ("y", "continuous", "outcome", y))
    full = fit(d, ModelSpec("m", "ols", "y", ("x", "w")))
    refit = fit(d, ModelSpec("m", "ols", "y", ("x",)))
    assert np.allclose(predict(zero_coefficients(full, ["w"]), d), predict(refit, d), atol=1e-8)


def test_zero_already_zero_is_noop():
    d = make_dataset(
        ("a", "continuous", "predictor", SIX["x1"]),
        ("b", "continuous", "predictor", SIX["x1"]),
        ("y", "continuous", "outcome", SIX["y"]),
    )
    m = fit(d, ModelSpec("m", "ols", "y", ("a", "b")))
    assert np.array_equal(predict(zero_coefficients(m, ["b"]), d), predict(m, d))


def test_model_spec_validation_and_json():
    with pytest.raises(DataError):
        ModelSpec("m", "probit", "y", ())
    with pytest.raises(DataError):
        ModelSpec("m", "ols", "y", ("y",))
    with pytest.raises(DataError):
        ModelSpec("m", "ols", "y", ("a", "a"))
    s = ModelSpec.from_json('{"id":"m1","family":"ols","outcome":"default","predictors":["zip","income"]}')
    assert s.predictors == ("zip", "income")
    assert ModelSpec.from_dict(s.to_dict()) == s
    with pytest.raises(DataError):
        ModelSpec.from_json("{")


def test_residual_summary_ols_and_logistic():
    m = fit(SIX, ModelSpec("m", "ols", "y", ("x1", "x2")))
    r = SIX["y"] - predict(m, SIX)
    s = residual_summary(m, SIX)
    assert s["n"] == 6 and s["mean"] == pytest.approx(0.0, abs=1e-10)
    assert s["sd"] == pytest.approx(r.std(ddof=1), rel=1e-12)
    assert s["quantiles"]["max"] == pytest.approx(r.max())
    lg = residual_summary(fit(EIGHT, ModelSpec("l", "logistic", "y", ("x",))), EIGHT)
    assert -1 < lg["quantiles"]["min"] <= lg["quantiles"]["max"] < 1
