"""Locally estimated scatterplot smoothing with tricube weights.

Plain loess (no robustness iterations): at each query point the
k = ceil(span * n) nearest neighbours get tricube weights and a local
polynomial of degree 1 or 2 is fitted by weighted least squares.
Pointwise standard errors come from the smoother's linear weights,
se(x0)^2 = sigma2 * ||l(x0)||^2, with sigma2 estimated from the
normalized residual sum of squares.
"""

import math
from dataclasses import dataclass

import numpy as np

from gencal.errors import DataError


@dataclass(frozen=True)
class LoessFit:
    x: np.ndarray  # sorted copy of the predictor
    y: np.ndarray  # response aligned with x
    span: float
    degree: int
    eval_points: np.ndarray
    fitted: np.ndarray
    se: np.ndarray
    sigma2: float
    trace_hat: float
    trace_sq: float
    fitted_data: np.ndarray  # smoother output at the data points


def _neighborhood(xs, x0, k):
    """Window [lo, hi) of the k nearest sorted values; ties go left."""
    n = xs.shape[0]
    pos = np.searchsorted(xs, x0)
    lo = hi = int(pos)
    while hi - lo < k:
        if lo == 0:
            hi += 1
        elif hi == n:
            lo -= 1
        elif x0 - xs[lo - 1] <= xs[hi] - x0:
            lo -= 1
        else:
            hi += 1
    return lo, hi


def _local_weights(xs, ys, x0, k, degree):
    """Smoother weight vector l(x0) over the neighbourhood; returns
    (lo, l) with fitted(x0) = l . ys[lo:lo+len(l)]."""
    lo, hi = _neighborhood(xs, x0, k)
    xw = xs[lo:hi]
    d = np.abs(xw - x0)
    dmax = d.max()
    if dmax == 0.0:
        w = np.ones_like(d)
    else:
        w = (1.0 - (d / dmax) ** 3) ** 3
        w[w < 0] = 0.0
    dx = xw - x0
    cols = [np.ones_like(dx), dx]
    if degree == 2:
        cols.append(dx * dx)
    X = np.column_stack(cols)
    XtW = X.T * w
    A = XtW @ X
    try:
        first_row = np.linalg.solve(A, np.eye(A.shape[0])[:, 0])
    except np.linalg.LinAlgError:
        # all neighbours at the same x: degenerate to the weighted mean
        sw = w.sum()
        return lo, w / sw if sw > 0 else np.full_like(w, 1.0 / w.shape[0])
    l = (X @ first_row) * w
    return lo, l


def loess_fit(x, y, span=0.75, degree=2, eval_points=None):
    """Fit loess and evaluate it (with standard errors) at eval_points."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise DataError("x and y must be 1-d arrays of equal length")
    n = x.shape[0]
    if degree not in (1, 2):
        raise DataError("degree must be 1 or 2")
    if n < degree + 2:
        raise DataError(f"need at least {degree + 2} points for degree {degree}")
    if not 0 < span <= 1:
        raise DataError("span must be in (0, 1]")
    k = math.ceil(span * n)
    if k < degree + 1:
        raise DataError(f"span {span} keeps only {k} neighbours; degree {degree} needs "
                        f"at least {degree + 1}")
    order = np.argsort(x, kind="stable")
    xs = x[order]
    ys = y[order]
    if eval_points is None:
        eval_points = xs.copy()
    eval_points = np.asarray(eval_points, dtype=np.float64)
    if eval_points.size and (eval_points.min() < xs[0] or eval_points.max() > xs[-1]):
        raise DataError("evaluation points outside the data range (extrapolation rejected)")

    # smoother at the data points: residuals and trace terms for sigma2
    fitted_data = np.empty(n)
    trace_hat = 0.0
    trace_sq = 0.0
    for i in range(n):
        lo, l = _local_weights(xs, ys, xs[i], k, degree)
        fitted_data[i] = l @ ys[lo:lo + l.shape[0]]
        if 0 <= i - lo < l.shape[0]:  # own point can fall out of tied windows
            trace_hat += l[i - lo]
        trace_sq += float(l @ l)
    rss = float(np.sum((ys - fitted_data) ** 2))
    df = n - 2.0 * trace_hat + trace_sq
    sigma2 = rss / df if df > 0 else 0.0

    m = eval_points.shape[0]
    fitted = np.empty(m)
    se = np.empty(m)
    for j in range(m):
        lo, l = _local_weights(xs, ys, eval_points[j], k, degree)
        fitted[j] = l @ ys[lo:lo + l.shape[0]]
        se[j] = math.sqrt(max(sigma2, 0.0) * float(l @ l))

    return LoessFit(x=xs, y=ys, span=span, degree=degree,
                    eval_points=eval_points, fitted=fitted, se=se,
                    sigma2=sigma2, trace_hat=trace_hat, trace_sq=trace_sq,
                    fitted_data=fitted_data)


def normal_quantile(p):
    """Standard normal quantile (Wichura's AS 241, double precision)."""
    if not 0.0 < p < 1.0:
        raise DataError("quantile level must be strictly inside (0, 1)")
    q = p - 0.5
    if abs(q) <= 0.425:
        r = 0.180625 - q * q
        num = (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r
                    + 6.7265770927008700853e4) * r + 4.5921953931549871457e4) * r
                  + 1.3731693765509461125e4) * r + 1.9715909503065514427e3) * r
                + 1.3314166789178437745e2) * r + 3.3871328727963666080e0)
        den = (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r
                    + 3.9307895800092710610e4) * r + 2.1213794301586595867e4) * r
                  + 5.3941960214247511077e3) * r + 6.8718700749205790830e2) * r
                + 4.2313330701600911252e1) * r + 1.0)
        return q * num / den
    r = p if q < 0 else 1.0 - p
    r = math.sqrt(-math.log(r))
    if r <= 5.0:
        r = r - 1.6
        num = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r
                    + 2.41780725177450611770e-1) * r + 1.27045825245236838258e0) * r
                  + 3.64784832476320460504e0) * r + 5.76949722146069140550e0) * r
                + 4.63033784615654529590e0) * r + 1.42343711074968357734e0)
        den = (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r
                    + 1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r
                  + 6.89767334985100004550e-1) * r + 1.67638483018380384940e0) * r
                + 2.05319162663775882187e0) * r + 1.0)
    else:
        r = r - 5.0
        num = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r
                    + 1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r
                  + 2.96560571828504891230e-1) * r + 1.78482653991729133580e0) * r
                + 5.46378491116411436990e0) * r + 6.65790464350110377720e0)
        den = (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r
                    + 1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r
                  + 1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r
                + 5.99832206555887937690e-1) * r + 1.0)
    val = num / den
    return -val if q < 0 else val


def loess_confidence_band(fit, level=0.95):
    """Pointwise gaussian band: fitted +/- z * se."""
    if not 0.0 < level < 1.0:
        raise DataError("confidence level must be in (0, 1)")
    z = normal_quantile((1.0 + level) / 2.0)
    return fit.fitted - z * fit.se, fit.fitted + z * fit.se
