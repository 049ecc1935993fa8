"""Calibration curves, slope and intercept for exponential-family outcomes.

Given validation pairs (y_i, mu_hat_i), the calibration model regresses
the observed outcome on the link-transformed prediction:

    g(E(y | mu_hat)) = alpha + zeta * g(mu_hat)

The slope zeta quantifies over- (zeta < 1) or underfitting (zeta > 1);
the calibration-in-the-large alpha_c is the intercept of the same model
with the slope fixed at 1 through an offset, and is negative when
predictions overestimate on average.  Alongside the GLM curve the module
estimates a flexible (loess) curve with a pointwise band and a
quantile-binned curve.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from gencal.errors import DataError, GencalError
from gencal.families import canonical_link, link_apply
from gencal.glm import FitControls, design_with_intercept, fit_glm, fit_glm_offset_only
from gencal.loess import loess_confidence_band, loess_fit

BOUNDARY_EPS = 1e-10
CALIBRATION_CONTROLS = FitControls(max_iter=100, tol=1e-12)


@dataclass(frozen=True)
class PredictionSet:
    """Validation outcomes paired with model predictions.

    Predictions exactly on a link-domain boundary are nudged inward by
    BOUNDARY_EPS and counted in clamped_count; values beyond the boundary
    are rejected.
    """

    y_obs: np.ndarray
    mu_hat: np.ndarray
    family: object
    link: object
    clamped_count: int = 0

    @property
    def n(self):
        return self.y_obs.shape[0]


def make_prediction_set(y, mu_hat, family, link=None, min_n=10):
    y = np.asarray(y, dtype=np.float64)
    mu = np.asarray(mu_hat, dtype=np.float64).copy()
    if link is None:
        link = canonical_link(family)
    if y.shape != mu.shape or y.ndim != 1:
        raise DataError("y and mu_hat must be 1-d arrays of equal length")
    if y.shape[0] < min_n:
        raise DataError(f"need at least {min_n} prediction pairs, got {y.shape[0]}")
    family.check_support(y)
    if not np.all(np.isfinite(mu)):
        raise DataError("predictions contain non-finite values")

    clamped = 0
    lo, hi = link.mu_domain
    if lo is not None:
        if np.any(mu < lo):
            bad = float(mu[mu < lo][0])
            raise DataError(f"prediction {bad!r} lies outside the domain of link '{link.name}'")
        on_lo = mu == lo
        clamped += int(np.count_nonzero(on_lo))
        mu[on_lo] = lo + BOUNDARY_EPS
    if hi is not None:
        if np.any(mu > hi):
            bad = float(mu[mu > hi][0])
            raise DataError(f"prediction {bad!r} lies outside the domain of link '{link.name}'")
        on_hi = mu == hi
        clamped += int(np.count_nonzero(on_hi))
        mu[on_hi] = hi - BOUNDARY_EPS
    return PredictionSet(y_obs=y, mu_hat=mu, family=family, link=link,
                         clamped_count=clamped)


def predictions_to_csv(preds):
    """The minimal interchange format the CLI ingests: y,mu_hat."""
    lines = ["y,mu_hat"]
    for yi, mi in zip(preds.y_obs, preds.mu_hat):
        lines.append(f"{repr(float(yi))},{repr(float(mi))}")
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class GlmCalibration:
    alpha: float
    alpha_se: float
    zeta: float
    zeta_se: float
    grid: np.ndarray
    curve: np.ndarray
    nonpositive_slope: bool


@dataclass(frozen=True)
class InterceptResult:
    alpha_c: float
    se: float


@dataclass(frozen=True)
class FlexibleCurve:
    grid: np.ndarray
    curve: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    span: float
    degree: int


@dataclass(frozen=True)
class BinnedCurve:
    mean_predicted: np.ndarray
    mean_observed: np.ndarray
    counts: np.ndarray
    merged_bins: bool


@dataclass(frozen=True)
class PredictionHistogram:
    edges: np.ndarray
    counts: np.ndarray


@dataclass(frozen=True)
class AssessOptions:
    span: float = 0.75
    degree: int = 2
    n_bins: int = 10
    grid_points: int = 101
    hist_bins: int = 30
    min_n: int = 10


@dataclass(frozen=True)
class CalibrationAssessment:
    n: int
    clamped_count: int
    grid: np.ndarray
    glm: Optional[GlmCalibration]
    intercept: Optional[InterceptResult]
    flexible: Optional[FlexibleCurve]
    binned: Optional[BinnedCurve]
    histogram: PredictionHistogram
    errors: dict = field(default_factory=dict)

    @property
    def complete(self):
        return not self.errors


def default_grid(preds, n_points=101):
    """n equally spaced points between the 1st and 99th percentile of mu_hat."""
    lo = float(np.quantile(preds.mu_hat, 0.01))
    hi = float(np.quantile(preds.mu_hat, 0.99))
    if not hi > lo:
        raise DataError("predictions are too concentrated to build an evaluation grid")
    return np.linspace(lo, hi, n_points)


def calibration_glm(preds, grid=None):
    """Slope/intercept fit of g(E(y|mu_hat)) = alpha + zeta g(mu_hat)."""
    gmu = link_apply(preds.link, preds.mu_hat)
    if float(np.var(gmu)) == 0.0:
        raise DataError("all predictions are equal; calibration slope is ill-posed")
    if grid is None:
        grid = default_grid(preds)
    X = design_with_intercept([("g(mu_hat)", gmu)])
    fit = fit_glm(preds.y_obs, X, preds.family, preds.link, controls=CALIBRATION_CONTROLS)
    alpha, zeta = float(fit.coefficients[0]), float(fit.coefficients[1])
    se = fit.se()
    curve = fit.link.g_inverse(np.clip(alpha + zeta * link_apply(preds.link, grid), -30, 30))
    return GlmCalibration(alpha=alpha, alpha_se=float(se[0]), zeta=zeta,
                          zeta_se=float(se[1]), grid=np.asarray(grid), curve=curve,
                          nonpositive_slope=zeta <= 0)


def calibration_intercept(preds):
    """Calibration-in-the-large: intercept with slope fixed at 1 by offset."""
    offset = link_apply(preds.link, preds.mu_hat)
    fit = fit_glm_offset_only(preds.y_obs, offset, preds.family, preds.link)
    return InterceptResult(alpha_c=float(fit.coefficients[0]), se=float(fit.se()[0]))


def calibration_flexible(preds, span=0.75, degree=2, grid=None):
    """Loess of y on mu_hat (raw scale) with a pointwise 95% band."""
    if grid is None:
        grid = default_grid(preds)
    grid = np.asarray(grid, dtype=np.float64)
    if float(np.var(preds.mu_hat)) == 0.0:
        raise DataError("all predictions are equal; flexible curve is ill-posed")
    fit = loess_fit(preds.mu_hat, preds.y_obs, span=span, degree=degree, eval_points=grid)
    lower, upper = loess_confidence_band(fit, 0.95)
    return FlexibleCurve(grid=grid, curve=fit.fitted, lower=lower, upper=upper,
                         span=span, degree=degree)


def calibration_binned(preds, n_bins=10):
    """Quantile-group binned curve.

    Rows are stably sorted by prediction and split at ranks floor(j*n/B);
    a boundary falling inside a run of tied predictions slides right so
    ties never straddle bins.  Bins emptied by the slide are dropped and
    flagged via merged_bins.
    """
    n = preds.n
    if n_bins < 1 or n < n_bins:
        raise DataError(f"cannot form {n_bins} bins from {n} observations")
    order = np.argsort(preds.mu_hat, kind="stable")
    mu = preds.mu_hat[order]
    y = preds.y_obs[order]

    bounds = [0]
    merged = False
    for j in range(1, n_bins):
        b = (j * n) // n_bins
        while b < n and b > 0 and mu[b - 1] == mu[b]:
            b += 1
        if b <= bounds[-1] or b >= n:
            merged = True
            continue
        bounds.append(b)
    bounds.append(n)

    mean_mu, mean_y, counts = [], [], []
    for a, b in zip(bounds[:-1], bounds[1:]):
        mean_mu.append(float(np.mean(mu[a:b])))
        mean_y.append(float(np.mean(y[a:b])))
        counts.append(b - a)
    return BinnedCurve(mean_predicted=np.asarray(mean_mu),
                       mean_observed=np.asarray(mean_y),
                       counts=np.asarray(counts, dtype=np.int64),
                       merged_bins=merged)


def prediction_histogram(preds, n_bins=30):
    counts, edges = np.histogram(preds.mu_hat, bins=n_bins)
    return PredictionHistogram(edges=edges, counts=counts.astype(np.int64))


def assess(preds, options=AssessOptions()):
    """Run all four analyses; failures are recorded, never silently dropped."""
    errors = {}
    try:
        grid = default_grid(preds, options.grid_points)
    except GencalError as exc:
        grid = np.asarray([])
        errors["grid"] = str(exc)

    glm_part = intercept_part = flex_part = binned_part = None
    if grid.size:
        try:
            glm_part = calibration_glm(preds, grid=grid)
        except GencalError as exc:
            errors["slope"] = str(exc)
    else:
        errors.setdefault("slope", "no evaluation grid")
    try:
        intercept_part = calibration_intercept(preds)
    except GencalError as exc:
        errors["intercept"] = str(exc)
    if grid.size:
        try:
            flex_part = calibration_flexible(preds, options.span, options.degree, grid)
        except GencalError as exc:
            errors["flexible"] = str(exc)
    else:
        errors.setdefault("flexible", "no evaluation grid")
    try:
        binned_part = calibration_binned(preds, options.n_bins)
    except GencalError as exc:
        errors["binned"] = str(exc)

    return CalibrationAssessment(
        n=preds.n,
        clamped_count=preds.clamped_count,
        grid=grid,
        glm=glm_part,
        intercept=intercept_part,
        flexible=flex_part,
        binned=binned_part,
        histogram=prediction_histogram(preds, options.hist_bins),
        errors=errors,
    )
