"""Generalized linear models fitted by iteratively reweighted least squares.

Supports offsets (needed by the calibration-in-the-large fit), prior
weights and B-spline expanded columns.  The inner weighted least-squares
solve uses QR on the sqrt(W)-scaled system.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from gencal.errors import (ConvergenceError, DataError, DivergenceError,
                           RankDeficiencyError)
from gencal.families import FamilySpec, LinkSpec

ETA_GUARD = 30.0  # |eta| cap for log/logit inverse links during iteration


@dataclass(frozen=True)
class FitControls:
    max_iter: int = 50
    tol: float = 1e-8


@dataclass(frozen=True)
class DesignMatrix:
    """A named, validated design matrix."""

    values: np.ndarray
    columns: tuple
    intercept_index: Optional[int] = None

    def __post_init__(self):
        vals = np.ascontiguousarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "columns", tuple(self.columns))
        if vals.ndim != 2:
            raise DataError("design matrix must be 2-dimensional")
        if vals.shape[1] != len(self.columns):
            raise DataError("number of column names does not match matrix width")
        if not np.all(np.isfinite(vals)):
            raise DataError("design matrix contains non-finite entries")
        for j in range(vals.shape[1]):
            if j == self.intercept_index:
                continue
            if vals.shape[0] > 1 and np.all(vals[:, j] == vals[0, j]):
                raise DataError(f"column '{self.columns[j]}' is constant but not the intercept")

    @property
    def rows(self):
        return self.values.shape[0]


def design_with_intercept(named_columns):
    """DesignMatrix from [(name, values), ...] with a leading intercept."""
    cols = [("intercept", None)] + list(named_columns)
    n = len(np.asarray(cols[1][1])) if len(cols) > 1 else 1
    arrays = [np.ones(n)]
    names = ["intercept"]
    for name, values in cols[1:]:
        arrays.append(np.asarray(values, dtype=np.float64))
        names.append(name)
    return DesignMatrix(np.column_stack(arrays), tuple(names), intercept_index=0)


def intercept_only_design(n):
    return DesignMatrix(np.ones((n, 1)), ("intercept",), intercept_index=0)


@dataclass(frozen=True)
class GlmFit:
    """Result of an IRLS fit; immutable.

    linear_predictor excludes the offset: fitted_mean equals
    g_inverse(linear_predictor + offset) elementwise.
    """

    coefficients: np.ndarray
    column_names: tuple
    linear_predictor: np.ndarray
    offset: np.ndarray
    fitted_mean: np.ndarray
    deviance: float
    deviance_trace: tuple
    iterations: int
    converged: bool
    family: FamilySpec
    link: LinkSpec
    coef_cov: np.ndarray = field(repr=False, default=None)

    def se(self):
        return np.sqrt(np.diag(self.coef_cov))


def _initial_mean(family, y):
    if family.name == "poisson":
        return y + 0.1
    if family.name == "bernoulli":
        return (y + 0.5) / 2.0
    if family.name == "gamma":
        return np.maximum(y, 1e-8)
    return y.astype(np.float64).copy()


def _guarded_inverse(link, eta):
    if link.name in ("log", "logit"):
        return link.g_inverse(np.clip(eta, -ETA_GUARD, ETA_GUARD))
    if link.name == "inverse":
        return link.g_inverse(np.maximum(eta, 1e-10))
    return link.g_inverse(eta)


def _check_rank(a, columns):
    # QR diagonal of the weighted design; a tiny entry at position j means
    # column j is (numerically) in the span of the preceding columns
    r = np.linalg.qr(a, mode="r")
    diag = np.abs(np.diag(r))
    scale = diag.max() if diag.size else 0.0
    bad = diag <= scale * max(a.shape) * np.finfo(float).eps * 1e3
    if bad.any():
        names = [columns[j] for j in np.nonzero(bad)[0]]
        raise RankDeficiencyError(
            f"design matrix is rank deficient; collinear columns: {names}", columns=names)


def fit_glm(y, X, family, link, offset=None, weights=None, controls=FitControls()):
    """Fit a GLM by IRLS; raises on non-convergence, rank loss or divergence."""
    y = family.check_support(y)
    if not isinstance(X, DesignMatrix):
        raise DataError("X must be a DesignMatrix")
    n, p = X.values.shape
    if y.shape[0] != n:
        raise DataError(f"length mismatch: y has {y.shape[0]} rows, X has {n}")
    if offset is None:
        offset = np.zeros(n)
    else:
        offset = np.asarray(offset, dtype=np.float64)
        if offset.shape[0] != n:
            raise DataError("offset length does not match X")
    if weights is None:
        weights = np.ones(n)
    else:
        weights = np.asarray(weights, dtype=np.float64)
        if weights.shape[0] != n or np.any(weights < 0):
            raise DataError("weights must be nonnegative and match X rows")

    mu = _initial_mean(family, y)
    eta = link.g(mu)
    beta = np.zeros(p)
    dev = None  # deviance of the previous model iterate
    trace = []
    Xv = X.values
    converged = False
    iters = 0
    guard_hit = False

    for iters in range(1, controls.max_iter + 1):
        gp = link.g_prime(mu)
        w = weights / (family.variance_fn(mu) * gp * gp)
        if np.any(~np.isfinite(w)) or np.any(w <= 0):
            w = np.clip(np.nan_to_num(w, nan=0.0, posinf=0.0), 1e-12, None)
        z = (eta - offset) + (y - mu) * gp
        sw = np.sqrt(w)
        a = Xv * sw[:, None]
        if iters == 1:
            _check_rank(a, X.columns)
        q, r = np.linalg.qr(a, mode="reduced")
        new_beta = np.linalg.solve(r, q.T @ (sw * z))

        # step-halve if the deviance would rise above the previous iterate
        step = 1.0
        for _ in range(32):
            cand = beta + step * (new_beta - beta)
            eta_raw = Xv @ cand + offset
            guard_hit = bool(np.any(np.abs(eta_raw) > ETA_GUARD)) and link.name in ("log", "logit")
            mu_cand = _guarded_inverse(link, eta_raw)
            dev_cand = float(np.sum(weights * family.unit_deviance(y, mu_cand)))
            if np.isfinite(dev_cand) and (dev is None or dev_cand <= dev + 1e-10):
                break
            step /= 2.0
        beta = beta + step * (new_beta - beta)
        eta = Xv @ beta + offset
        if link.name in ("log", "logit"):
            eta = np.clip(eta, -ETA_GUARD, ETA_GUARD)
        elif link.name == "inverse":
            eta = np.maximum(eta, 1e-10)
        mu = link.g_inverse(eta)
        new_dev = float(np.sum(weights * family.unit_deviance(y, mu)))
        trace.append(new_dev)
        if not np.isfinite(new_dev):
            raise DivergenceError(f"deviance became non-finite at iteration {iters}")
        if dev is not None and abs(new_dev - dev) / (abs(new_dev) + 0.1) < controls.tol:
            dev = new_dev
            converged = True
            break
        dev = new_dev

    if not converged:
        if guard_hit:
            raise DivergenceError(
                f"linear predictor exceeded +/-{ETA_GUARD} and the fit did not converge "
                f"after {controls.max_iter} iterations (possible separation)")
        raise ConvergenceError(
            f"IRLS did not converge in {controls.max_iter} iterations", trace=trace)
    if link.name in ("log", "logit"):
        # a fixed offset may push eta past the guard legitimately (e.g. the
        # log of a near-zero prediction); separation shows up in X beta
        if np.any(np.abs(Xv @ beta) > ETA_GUARD):
            raise DivergenceError(
                f"fit converged only against the +/-{ETA_GUARD} linear-predictor guard "
                f"(possible separation)")

    gp = link.g_prime(mu)
    w = weights / (family.variance_fn(mu) * gp * gp)
    info = (Xv * w[:, None]).T @ Xv
    if family.dispersion_known:
        phi = 1.0
    else:
        pearson = np.sum(weights * (y - mu) ** 2 / family.variance_fn(mu))
        phi = pearson / max(n - p, 1)
    cov = np.linalg.inv(info) * phi

    return GlmFit(
        coefficients=beta,
        column_names=X.columns,
        linear_predictor=Xv @ beta,
        offset=offset,
        fitted_mean=mu,
        deviance=dev,
        deviance_trace=tuple(trace),
        iterations=iters,
        converged=converged,
        family=family,
        link=link,
        coef_cov=cov,
    )


def fit_glm_offset_only(y, offset, family, link, controls=FitControls(max_iter=100, tol=1e-12)):
    """Intercept-only fit with an offset, i.e. the slope-fixed-at-1 model."""
    y = np.asarray(y, dtype=np.float64)
    return fit_glm(y, intercept_only_design(y.shape[0]), family, link,
                   offset=offset, controls=controls)


def predict_glm(fit, X_new, offset_new=None):
    """Mean predictions for new rows; columns must match by name and order."""
    if not isinstance(X_new, DesignMatrix):
        raise DataError("X_new must be a DesignMatrix")
    if X_new.columns != fit.column_names:
        raise DataError(
            f"column mismatch: fit has {list(fit.column_names)}, new data has {list(X_new.columns)}")
    eta = X_new.values @ fit.coefficients
    if offset_new is not None:
        eta = eta + np.asarray(offset_new, dtype=np.float64)
    return _guarded_inverse(fit.link, eta)


@dataclass(frozen=True)
class SplineBasis:
    """Cubic (or lower-degree) B-spline basis with quantile interior knots."""

    knots: np.ndarray  # interior knots
    boundary: tuple  # (lo, hi)
    degree: int
    column_names: tuple

    @property
    def n_columns(self):
        return len(self.knots) + self.degree + 1

    def evaluate(self, x):
        """Basis columns at x; values are clamped into the knot range."""
        x = np.asarray(x, dtype=np.float64)
        lo, hi = self.boundary
        xc = np.clip(x, lo, hi)
        d = self.degree
        t = np.concatenate([np.full(d + 1, lo), self.knots, np.full(d + 1, hi)])
        nb = self.n_columns
        # Cox-de Boor, degree 0 upward; the top interval is closed at hi
        b = np.zeros((x.shape[0], len(t) - 1))
        for i in range(len(t) - 1):
            if t[i] < t[i + 1]:
                b[:, i] = ((xc >= t[i]) & (xc < t[i + 1])).astype(np.float64)
        top = np.nonzero(t < hi)[0]
        if top.size:
            b[xc == hi, top[-1]] = 1.0
        for deg in range(1, d + 1):
            nb_d = len(t) - 1 - deg
            new = np.zeros((x.shape[0], nb_d))
            for i in range(nb_d):
                den1 = t[i + deg] - t[i]
                den2 = t[i + deg + 1] - t[i + 1]
                term = 0.0
                if den1 > 0:
                    term = (xc - t[i]) / den1 * b[:, i]
                if den2 > 0:
                    term = term + (t[i + deg + 1] - xc) / den2 * b[:, i + 1]
                new[:, i] = term
            b = new
        return b[:, :nb]


def build_spline_basis(x, n_interior_knots=5, degree=3, name="x"):
    """Quantile-knot B-spline expansion of x.

    Returns (SplineBasis, columns); columns has n_interior_knots + degree + 1
    columns (one is usually dropped downstream against the intercept).
    """
    x = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise DataError("spline input contains non-finite values")
    if n_interior_knots < 1:
        raise DataError("need at least one interior knot")
    lo, hi = float(x.min()), float(x.max())
    probs = np.arange(1, n_interior_knots + 1) / (n_interior_knots + 1)
    knots = np.quantile(x, probs)
    all_knots = np.concatenate([[lo], knots, [hi]])
    if np.any(np.diff(all_knots) <= 0):
        raise DataError(
            f"cannot place {n_interior_knots} distinct interior knots: "
            f"too few distinct values in '{name}'")
    names = tuple(f"bs({name}){i + 1}" for i in range(n_interior_knots + degree + 1))
    basis = SplineBasis(knots=knots, boundary=(lo, hi), degree=degree, column_names=names)
    return basis, basis.evaluate(x)
