import math

import numpy as np
import pytest

from gencal.errors import (ConvergenceError, DataError, DivergenceError,
                           RankDeficiencyError)
from gencal.families import get_family, get_link
from gencal.glm import (DesignMatrix, FitControls, build_spline_basis,
                        design_with_intercept, fit_glm, fit_glm_offset_only,
                        intercept_only_design, predict_glm)
from gencal.simdata import SimConfig, generate
from oracles import bspline_recursive, newton_glm, poisson_offset_alpha_bisect

POI, LOG = get_family("poisson"), get_link("log")
BER, LOGIT = get_family("bernoulli"), get_link("logit")
GAU, IDENT = get_family("gaussian"), get_link("identity")


def test_intercept_only_poisson_matches_mean():
    y = np.array([1.0, 2.0, 3.0])
    fit = fit_glm(y, intercept_only_design(3), POI, LOG)
    assert fit.coefficients[0] == pytest.approx(math.log(2.0), abs=1e-8)
    assert fit.converged


def test_intercept_only_bernoulli_balanced():
    y = np.array([1.0, 1.0, 0.0, 0.0])
    fit = fit_glm(y, intercept_only_design(4), BER, LOGIT)
    assert fit.coefficients[0] == pytest.approx(0.0, abs=1e-8)


def test_offset_only_reproducing_offsets():
    fit = fit_glm_offset_only(np.array([2.0, 4.0]), np.log([2.0, 4.0]), POI, LOG)
    assert fit.coefficients[0] == pytest.approx(0.0, abs=1e-10)


def test_offset_only_closed_form_log_two():
    y = np.array([2.0, 4.0])
    offset = np.log([1.0, 2.0])
    fit = fit_glm_offset_only(y, offset, POI, LOG)
    assert fit.coefficients[0] == pytest.approx(math.log(2.0), abs=1e-10)
    assert fit.coefficients[0] == pytest.approx(poisson_offset_alpha_bisect(y, offset), abs=1e-9)


def test_offset_only_bernoulli_balanced():
    fit = fit_glm_offset_only(np.array([1.0, 0.0]), np.zeros(2), BER, LOGIT)
    assert fit.coefficients[0] == pytest.approx(0.0, abs=1e-10)


def test_poisson_regression_recovers_beta_and_matches_newton():
    _, train, _ = generate(SimConfig(n_population=100_000, seed=5))
    X = design_with_intercept([(f"x{j + 1}", train.X[:, j]) for j in range(5)])
    fit = fit_glm(train.y.astype(float), X, POI, LOG)
    true_beta = np.array([-2.3, 1.5, 2.0, -1.0, -2.0, -1.5])
    se = fit.se()
    assert np.all(np.abs(fit.coefficients - true_beta) < 3.0 * se)
    oracle = newton_glm(train.y.astype(float), X.values, "poisson", "log")
    assert np.max(np.abs(fit.coefficients - oracle)) < 1e-6


def test_gaussian_identity_matches_ols():
    rng = np.random.default_rng(8)
    for _ in range(5):
        X = np.column_stack([np.ones(60), rng.standard_normal((60, 3))])
        y = rng.standard_normal(60) + X @ np.array([1.0, 0.5, -0.3, 2.0])
        dm = DesignMatrix(X, ("intercept", "a", "b", "c"), intercept_index=0)
        fit = fit_glm(y, dm, GAU, IDENT)
        ols = np.linalg.solve(X.T @ X, X.T @ y)
        assert np.max(np.abs(fit.coefficients - ols)) < 1e-8


def test_fit_with_offset_matches_newton_with_offset():
    rng = np.random.default_rng(12)
    x = rng.uniform(-1, 1, 300)
    offset = rng.uniform(-0.5, 0.5, 300)
    lam = np.exp(-0.5 + 0.8 * x + offset)
    y = rng.poisson(lam).astype(float)
    dm = design_with_intercept([("x", x)])
    fit = fit_glm(y, dm, POI, LOG, offset=offset)
    oracle = newton_glm(y, dm.values, "poisson", "log", offset=offset)
    assert np.max(np.abs(fit.coefficients - oracle)) < 1e-8
    # fitted invariant: mean = g_inverse(linear_predictor + offset)
    back = np.exp(fit.linear_predictor + fit.offset)
    assert np.max(np.abs(back - fit.fitted_mean)) < 1e-10


def test_row_permutation_invariance():
    rng = np.random.default_rng(21)
    x = rng.uniform(-1, 1, 200)
    y = rng.poisson(np.exp(0.3 + 0.7 * x)).astype(float)
    dm = design_with_intercept([("x", x)])
    fit = fit_glm(y, dm, POI, LOG)
    perm = rng.permutation(200)
    dm2 = design_with_intercept([("x", x[perm])])
    fit2 = fit_glm(y[perm], dm2, POI, LOG)
    assert np.max(np.abs(fit.coefficients - fit2.coefficients)) < 1e-10


def test_deviance_trace_nonincreasing():
    rng = np.random.default_rng(30)
    for seed in range(3):
        r = np.random.default_rng(seed)
        x = r.uniform(-2, 2, 150)
        y = r.poisson(np.exp(0.2 + 0.9 * x)).astype(float)
        fit = fit_glm(y, design_with_intercept([("x", x)]), POI, LOG)
        trace = np.array(fit.deviance_trace)
        assert np.all(np.diff(trace) <= 1e-10)


def test_rank_deficiency_names_columns():
    x = np.linspace(-1, 1, 50)
    dm = DesignMatrix(np.column_stack([np.ones(50), x, 2.0 * x]),
                      ("intercept", "x", "x_again"), intercept_index=0)
    y = np.exp(x) + 0.1
    with pytest.raises(RankDeficiencyError) as err:
        fit_glm(y, dm, POI, LOG)
    assert "x_again" in err.value.columns


def test_separation_raises_fit_error():
    # perfectly separated logistic data cannot converge at finite beta
    x = np.concatenate([np.linspace(-2, -0.5, 20), np.linspace(0.5, 2, 20)])
    y = (x > 0).astype(float)
    with pytest.raises((DivergenceError, ConvergenceError)):
        fit_glm(y, design_with_intercept([("x", x)]), BER, LOGIT,
                controls=FitControls(max_iter=60, tol=1e-12))


def test_nonconvergence_error_carries_trace():
    rng = np.random.default_rng(2)
    x = rng.uniform(-1, 1, 100)
    y = rng.poisson(np.exp(0.5 * x) + 0.2).astype(float)
    with pytest.raises(ConvergenceError) as err:
        fit_glm(y, design_with_intercept([("x", x)]), POI, LOG,
                controls=FitControls(max_iter=1, tol=1e-15))
    assert len(err.value.trace) >= 1


def test_predict_in_sample_identity():
    rng = np.random.default_rng(17)
    x = rng.uniform(-1, 1, 120)
    y = rng.poisson(np.exp(0.1 + 0.5 * x)).astype(float)
    dm = design_with_intercept([("x", x)])
    fit = fit_glm(y, dm, POI, LOG)
    assert np.array_equal(predict_glm(fit, dm), fit.fitted_mean)


def test_predict_intercept_only_constant():
    fit = fit_glm(np.array([1.0, 2.0, 3.0]), intercept_only_design(3), POI, LOG)
    out = predict_glm(fit, intercept_only_design(1))
    assert out[0] == pytest.approx(2.0, abs=1e-7)


def test_predict_column_mismatch():
    fit = fit_glm(np.array([1.0, 2.0, 3.0]), intercept_only_design(3), POI, LOG)
    bad = DesignMatrix(np.array([[1.0], [2.0]]), ("not_intercept",))
    with pytest.raises(DataError):
        predict_glm(fit, bad)


def test_design_matrix_validation():
    with pytest.raises(DataError):
        DesignMatrix(np.column_stack([np.ones(10), np.full(10, 3.0)]),
                     ("intercept", "const"), intercept_index=0)
    with pytest.raises(DataError):
        DesignMatrix(np.array([[1.0, np.inf]]), ("a", "b"))


# spline basis


def test_spline_knot_placement_error():
    x = np.array([0.0, 0.0, 1.0, 1.0, 2.0, 2.0])
    with pytest.raises(DataError):
        build_spline_basis(x, n_interior_knots=5, degree=3)


def test_spline_column_count():
    rng = np.random.default_rng(40)
    x = rng.uniform(-1, 1, 300)
    for k in (2, 5, 7):
        basis, cols = build_spline_basis(x, n_interior_knots=k, degree=3)
        assert cols.shape == (300, k + 4)
        assert len(basis.column_names) == k + 4


def test_spline_partition_of_unity_and_recursion_oracle():
    rng = np.random.default_rng(41)
    x = rng.uniform(-2, 3, 400)
    basis, cols = build_spline_basis(x, n_interior_knots=5, degree=3)
    sums = cols.sum(axis=1)
    assert np.max(np.abs(sums - 1.0)) < 1e-10

    lo, hi = basis.boundary
    t = np.concatenate([np.full(4, lo), basis.knots, np.full(4, hi)])
    pts = rng.uniform(lo, hi, 100)
    vals = basis.evaluate(pts)
    for idx in range(0, 100, 9):
        for i in range(basis.n_columns):
            ref = bspline_recursive(float(pts[idx]), t, i, 3)
            assert vals[idx, i] == pytest.approx(ref, abs=1e-10)


def test_spline_model_in_sample_consistency():
    rng = np.random.default_rng(42)
    x = rng.uniform(-1, 1, 500)
    lam = np.exp(0.3 - 0.8 * np.sin(2 * x))
    y = rng.poisson(lam).astype(float)
    basis, cols = build_spline_basis(x, 5, 3)
    arrays = np.column_stack([np.ones(500), cols[:, 1:]])
    names = ("intercept",) + basis.column_names[1:]
    dm = DesignMatrix(arrays, names, intercept_index=0)
    fit = fit_glm(y, dm, POI, LOG)
    again = predict_glm(fit, dm)
    assert np.max(np.abs(again - fit.fitted_mean)) < 1e-10
