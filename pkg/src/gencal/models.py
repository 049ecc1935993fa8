"""The three demonstration prediction models fitted on the training set.

model-1 is correctly specified (all five covariates), model-2 is an
overcomplex specification (x1, x3, their interaction and an unpenalized
cubic spline in x5; prone to overfitting), model-3 keeps only x2 and is
prone to underfitting.  All are Poisson GLMs with log link.
"""

from dataclasses import dataclass

import numpy as np

from gencal.calibration import make_prediction_set
from gencal.errors import ConfigError, FitError
from gencal.families import get_family, get_link
from gencal.glm import DesignMatrix, build_spline_basis, fit_glm, predict_glm

POISSON = get_family("poisson")
LOG = get_link("log")

SPLINE_INTERIOR_KNOTS = 5
SPLINE_DEGREE = 3

MODEL_IDS = ("model-1", "model-2", "model-3")


@dataclass(frozen=True)
class ModelSpec:
    model_id: str
    terms: tuple


MODEL_SPECS = {
    "model-1": ModelSpec("model-1", ("x1", "x2", "x3", "x4", "x5")),
    "model-2": ModelSpec("model-2", ("x1", "x3", "x1:x3", "s(x5)")),
    "model-3": ModelSpec("model-3", ("x2",)),
}


@dataclass(frozen=True)
class FittedModel:
    spec: ModelSpec
    glm_fit: object
    spline: object = None  # basis carried along for model-2 predictions


def _design(spec, X, spline=None):
    n = X.shape[0]
    cols = [np.ones(n)]
    names = ["intercept"]
    for term in spec.terms:
        if term == "x1:x3":
            cols.append(X[:, 0] * X[:, 2])
            names.append("x1:x3")
        elif term == "s(x5)":
            # drop the first basis column against the intercept
            b = spline.evaluate(X[:, 4])[:, 1:]
            for j in range(b.shape[1]):
                cols.append(b[:, j])
                names.append(spline.column_names[j + 1])
        else:
            j = int(term[1:]) - 1
            cols.append(X[:, j])
            names.append(term)
    return DesignMatrix(np.column_stack(cols), tuple(names), intercept_index=0)


def fit_model(spec, train, controls=None):
    """Fit one of the demonstration models; returns the fit plus the
    artifacts needed to rebuild the design on new data."""
    if isinstance(spec, str):
        try:
            spec = MODEL_SPECS[spec]
        except KeyError:
            raise ConfigError(f"unknown model id '{spec}'") from None
    spline = None
    if "s(x5)" in spec.terms:
        spline, _ = build_spline_basis(train.X[:, 4], SPLINE_INTERIOR_KNOTS,
                                       SPLINE_DEGREE, name="x5")
    design = _design(spec, train.X, spline)
    kwargs = {} if controls is None else {"controls": controls}
    try:
        fit = fit_glm(train.y.astype(np.float64), design, POISSON, LOG, **kwargs)
    except FitError as exc:
        raise type(exc)(f"{spec.model_id}: {exc}") from exc
    return FittedModel(spec=spec, glm_fit=fit, spline=spline)


def predict_validation(fitted, valid):
    """PredictionSet of validation outcomes vs model predictions."""
    design = _design(fitted.spec, valid.X, fitted.spline)
    mu = predict_glm(fitted.glm_fit, design)
    return make_prediction_set(valid.y.astype(np.float64), mu, POISSON, LOG)


def true_lambda_predictions(valid):
    """PredictionSet built from the known true intensities."""
    return make_prediction_set(valid.y.astype(np.float64), valid.lam, POISSON, LOG)
