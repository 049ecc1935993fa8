import math

import numpy as np
import pytest

from gencal.calibration import (AssessOptions, assess, calibration_binned,
                                calibration_flexible, calibration_glm,
                                calibration_intercept, default_grid,
                                make_prediction_set, predictions_to_csv)
from gencal.errors import DataError
from gencal.families import get_family, get_link
from gencal.glm import fit_glm_offset_only
from gencal.loess import loess_fit
from gencal.rng import Rng
from gencal.simdata import SimConfig, generate
from gencal.models import true_lambda_predictions
from oracles import decile_bins, logistic_calibration, poisson_offset_alpha_bisect

POI, LOG = get_family("poisson"), get_link("log")
BER, LOGIT = get_family("bernoulli"), get_link("logit")


def _poisson_preds(seed=3, n=1000, distort=1.0, scale=1.0):
    """Seeded validation pairs; distort != 1 makes predictions too extreme
    (>1) or too compressed (<1) on the log scale."""
    rng = Rng(seed)
    lam = np.exp(-1.0 + 1.2 * (rng.uniforms(n) * 2.0 - 1.0))
    y = rng.poisson(lam).astype(float)
    mu_hat = scale * np.exp(distort * np.log(lam))
    return make_prediction_set(y, mu_hat, POI, LOG)


def test_prediction_set_validation():
    with pytest.raises(DataError):
        make_prediction_set([1.0] * 5, [1.0] * 5, POI, LOG)  # below the floor
    with pytest.raises(DataError):
        make_prediction_set([1.0] * 12, [1.0] * 11 + [-0.5], POI, LOG)
    with pytest.raises(DataError):
        make_prediction_set([1.0] * 12, [0.5] * 11 + [1.2], BER, LOGIT)


def test_prediction_set_boundary_clamp():
    mu = [0.5] * 11 + [0.0]
    preds = make_prediction_set([1.0] * 12, mu, POI, LOG)
    assert preds.clamped_count == 1
    assert preds.mu_hat[-1] == pytest.approx(1e-10, abs=1e-12)
    both = make_prediction_set([1.0, 0.0] * 6, [0.0, 1.0] + [0.5] * 10, BER, LOGIT)
    assert both.clamped_count == 2


def test_min_n_floor_configurable():
    preds = make_prediction_set([1.0] * 5, [1.0] * 5, POI, LOG, min_n=5)
    assert preds.n == 5


def test_glm_calibration_perfect_predictions():
    cfg = SimConfig(n_population=200_000, seed=14)
    _, _, valid = generate(cfg)
    preds = true_lambda_predictions(valid)
    res = calibration_glm(preds)
    assert abs(res.zeta - 1.0) < 0.35
    assert abs(calibration_intercept(preds).alpha_c) < 0.3
    assert not res.nonpositive_slope


def test_glm_calibration_detects_overfitting_direction():
    # predictions too extreme on the link scale -> slope < 1
    over = calibration_glm(_poisson_preds(seed=5, distort=1.6))
    assert over.zeta < 1.0
    # compressed predictions -> slope > 1
    under = calibration_glm(_poisson_preds(seed=5, distort=0.55))
    assert under.zeta > 1.0


def test_glm_calibration_curve_monotone_when_slope_positive():
    res = calibration_glm(_poisson_preds(seed=8))
    assert res.zeta > 0
    assert np.all(np.diff(res.curve) > 0)


def test_glm_calibration_degenerate_predictions():
    y = Rng(1).poisson(np.full(50, 1.0)).astype(float)
    preds = make_prediction_set(y, np.full(50, 1.3), POI, LOG)
    with pytest.raises(DataError):
        calibration_glm(preds)


def test_anticalibrated_predictions_flagged_not_raised():
    rng = Rng(10)
    lam = np.exp(-0.5 + 1.5 * (rng.uniforms(800) - 0.5))
    y = rng.poisson(lam).astype(float)
    preds = make_prediction_set(y, np.exp(-np.log(lam)) * 0.2, POI, LOG)
    res = calibration_glm(preds)
    assert res.zeta <= 0
    assert res.nonpositive_slope


def test_intercept_zero_when_predictions_reproduce_outcomes():
    y = np.array([1.0, 2.0, 3.0, 4.0, 2.0, 1.0, 5.0, 2.0, 3.0, 1.0])
    preds = make_prediction_set(y, y.copy(), POI, LOG)
    assert calibration_intercept(preds).alpha_c == pytest.approx(0.0, abs=1e-10)


def test_intercept_closed_form_log_two():
    rng = Rng(2)
    mu = 0.4 + rng.uniforms(40) * 2.0
    y = rng.poisson(2.0 * mu).astype(float)
    y[0] = max(y[0], 1.0)
    # rescale predictions so sum(y) = 2 * sum(mu_hat) exactly
    preds = make_prediction_set(y, y.sum() / 2.0 * mu / mu.sum(), POI, LOG)
    res = calibration_intercept(preds)
    assert res.alpha_c == pytest.approx(math.log(2.0), abs=1e-10)
    assert res.alpha_c == pytest.approx(
        poisson_offset_alpha_bisect(y, np.log(preds.mu_hat)), abs=1e-9)


def test_intercept_bernoulli_balanced_half():
    y = np.array([0.0, 1.0] * 10)
    preds = make_prediction_set(y, np.full(20, 0.5), BER, LOGIT)
    assert calibration_intercept(preds).alpha_c == pytest.approx(0.0, abs=1e-10)


def test_intercept_sign_interpretation():
    # overestimation on average -> negative alpha_c
    rng = Rng(6)
    lam = 0.3 + rng.uniforms(500)
    y = rng.poisson(lam).astype(float)
    over = make_prediction_set(y, lam * 3.0, POI, LOG)
    assert calibration_intercept(over).alpha_c < 0
    under = make_prediction_set(y, lam / 3.0, POI, LOG)
    assert calibration_intercept(under).alpha_c > 0


def test_intercept_matches_offset_only_fit_bitwise():
    preds = _poisson_preds(seed=4, n=300)
    res = calibration_intercept(preds)
    fit = fit_glm_offset_only(preds.y_obs, np.log(preds.mu_hat), POI, LOG)
    assert res.alpha_c == float(fit.coefficients[0])
    assert res.se == float(fit.se()[0])


def test_poisson_scale_shift_property():
    preds = _poisson_preds(seed=9, n=600)
    base_i = calibration_intercept(preds).alpha_c
    base_z = calibration_glm(preds).zeta
    for c in (0.25, 3.0):
        scaled = make_prediction_set(preds.y_obs, c * preds.mu_hat, POI, LOG)
        assert calibration_intercept(scaled).alpha_c == pytest.approx(
            base_i - math.log(c), abs=1e-8)
        assert calibration_glm(scaled).zeta == pytest.approx(base_z, abs=1e-8)


def test_flexible_delegates_to_loess():
    preds = _poisson_preds(seed=12, n=200)
    grid = default_grid(preds, 41)
    flex = calibration_flexible(preds, span=0.75, degree=2, grid=grid)
    direct = loess_fit(preds.mu_hat, preds.y_obs, span=0.75, degree=2, eval_points=grid)
    assert np.max(np.abs(flex.curve - direct.fitted)) < 1e-12
    assert np.all(flex.lower <= flex.curve) and np.all(flex.curve <= flex.upper)


def test_flexible_rejects_constant_predictions():
    y = Rng(3).poisson(np.full(60, 1.0)).astype(float)
    preds = make_prediction_set(y, np.full(60, 0.9), POI, LOG)
    with pytest.raises(DataError):
        calibration_flexible(preds)


def test_binned_identity_on_diagonal():
    rng = Rng(21)
    y = 0.1 + rng.uniforms(100) * 4.0
    preds = make_prediction_set(y, y.copy(), POI, LOG)
    res = calibration_binned(preds, 10)
    assert np.allclose(res.mean_predicted, res.mean_observed)
    assert res.counts.sum() == 100


def test_binned_even_split_without_ties():
    preds = _poisson_preds(seed=30, n=1000)
    res = calibration_binned(preds, 10)
    assert res.counts.tolist() == [100] * 10
    assert not res.merged_bins


def test_binned_matches_independent_oracle():
    for seed in range(6):
        rng = Rng(100 + seed)
        n = 40 + 17 * seed
        mu = np.round(0.2 + 2.0 * rng.uniforms(n), 1 if seed % 2 else 3)
        y = rng.poisson(np.clip(mu, 0.05, None)).astype(float)
        preds = make_prediction_set(y, mu, POI, LOG)
        res = calibration_binned(preds, 10)
        ref, dropped = decile_bins(preds.mu_hat, preds.y_obs, 10)
        assert len(ref) == len(res.counts)
        for j, (m, yy, c) in enumerate(ref):
            assert res.mean_predicted[j] == pytest.approx(m, rel=1e-12)
            assert res.mean_observed[j] == pytest.approx(yy, rel=1e-12, abs=1e-12)
            assert res.counts[j] == c
        assert res.merged_bins == dropped


def test_binned_heavy_ties_merge_and_count():
    # a run of ties swallowing every provisional boundary collapses to one bin
    y = Rng(44).poisson(np.full(100, 1.0)).astype(float)
    mu = np.full(100, 2.0)
    mu[:3] = 1.0
    preds = make_prediction_set(y, mu, POI, LOG)
    res = calibration_binned(preds, 10)
    assert res.merged_bins
    assert res.counts.sum() == 100
    assert len(res.counts) == 1

    # triple-valued ties slide boundaries without emptying any bin
    mu2 = np.repeat(np.linspace(0.1, 3.3, 33), 3)[:99]
    y2 = Rng(45).poisson(mu2).astype(float)
    preds2 = make_prediction_set(y2, mu2, POI, LOG)
    res2 = calibration_binned(preds2, 10)
    assert res2.counts.sum() == 99
    assert len(res2.counts) == 10
    # ties never straddle bins
    sorted_mu = np.sort(preds2.mu_hat)
    edges = np.cumsum(res2.counts)[:-1]
    for e in edges:
        assert sorted_mu[e - 1] != sorted_mu[e]


def test_assess_complete_structure():
    preds = _poisson_preds(seed=40, n=800)
    a = assess(preds, AssessOptions())
    assert a.complete
    assert a.glm is not None and a.intercept is not None
    assert a.flexible is not None and a.binned is not None
    assert a.grid.shape == (101,)
    assert np.all(np.diff(a.grid) > 0)
    assert a.histogram.counts.sum() == a.n == 800
    assert a.binned.counts.sum() == 800


def test_assess_degenerate_predictions_partial():
    y = Rng(50).poisson(np.full(60, 1.0)).astype(float)
    preds = make_prediction_set(y, np.full(60, 1.1), POI, LOG)
    a = assess(preds)
    assert a.intercept is not None
    assert a.glm is None and "slope" in a.errors
    assert a.flexible is None and "flexible" in a.errors
    assert not a.complete


def test_bernoulli_reduction_matches_hardcoded_logistic():
    rng = Rng(60)
    x = rng.uniforms(500) * 4.0 - 2.0
    pi = 1.0 / (1.0 + np.exp(-(-0.3 + 1.1 * x)))
    y = (rng.uniforms(500) < pi).astype(float)
    pi_hat = 1.0 / (1.0 + np.exp(-(-0.1 + 0.8 * x)))
    preds = make_prediction_set(y, pi_hat, BER, LOGIT)
    res = calibration_glm(preds)
    citl = calibration_intercept(preds)
    alpha_ref, zeta_ref, alpha_c_ref = logistic_calibration(y, pi_hat)
    assert res.alpha == pytest.approx(alpha_ref, abs=1e-10)
    assert res.zeta == pytest.approx(zeta_ref, abs=1e-10)
    assert citl.alpha_c == pytest.approx(alpha_c_ref, abs=1e-10)


def test_link_override_changes_transform():
    preds_log = _poisson_preds(seed=70, n=400)
    preds_id = make_prediction_set(preds_log.y_obs, preds_log.mu_hat, POI,
                                   get_link("identity"))
    z_log = calibration_glm(preds_log).zeta
    z_id = calibration_glm(preds_id).zeta
    assert z_log != pytest.approx(z_id, abs=1e-6)


def test_predictions_csv_roundtrip():
    preds = _poisson_preds(seed=80, n=25)
    text = predictions_to_csv(preds)
    lines = text.strip().split("\n")
    assert lines[0] == "y,mu_hat"
    assert len(lines) == 26
    y0, m0 = lines[1].split(",")
    assert float(y0) == preds.y_obs[0] and float(m0) == preds.mu_hat[0]
