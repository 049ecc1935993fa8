"""Independent reference implementations used to check the library.

Everything here is deliberately written from first principles (explicit
gradients, recursions, brute-force loops) rather than through the
package's own code paths.
"""

import math

import numpy as np


def bisect(f, lo, hi, tol=1e-14, max_iter=200):
    flo = f(lo)
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if fm == 0 or hi - lo < tol:
            return mid
        if (flo < 0) == (fm < 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def newton_glm(y, X, family, link, offset=None, max_iter=200, tol=1e-12):
    """Newton-Raphson ML fit from explicit score and Hessian formulas.

    family in {'poisson', 'bernoulli', 'gaussian'} with its canonical link.
    """
    y = np.asarray(y, dtype=float)
    X = np.asarray(X, dtype=float)
    n, p = X.shape
    off = np.zeros(n) if offset is None else np.asarray(offset, dtype=float)
    beta = np.zeros(p)
    for _ in range(max_iter):
        eta = X @ beta + off
        if family == "poisson":
            mu = np.exp(np.clip(eta, -30, 30))
            w = mu
        elif family == "bernoulli":
            mu = 1.0 / (1.0 + np.exp(-np.clip(eta, -30, 30)))
            w = mu * (1.0 - mu)
        elif family == "gaussian":
            mu = eta
            w = np.ones(n)
        else:
            raise ValueError(family)
        grad = X.T @ (y - mu)
        hess = (X * w[:, None]).T @ X
        step = np.linalg.solve(hess, grad)
        beta = beta + step
        if np.max(np.abs(step)) < tol:
            break
    return beta


def logistic_calibration(y, pi_hat):
    """Hard-coded logistic recalibration: slope model and offset model.

    Returns (alpha, zeta, alpha_c) for
        logit P(y=1 | pi_hat) = alpha + zeta * logit(pi_hat)
        logit P(y=1 | pi_hat) = alpha_c + offset(logit(pi_hat))
    """
    y = np.asarray(y, dtype=float)
    lp = np.log(pi_hat / (1.0 - pi_hat))
    X = np.column_stack([np.ones_like(lp), lp])
    ab = newton_glm(y, X, "bernoulli", "logit")
    a_c = newton_glm(y, np.ones((len(y), 1)), "bernoulli", "logit", offset=lp)[0]
    return float(ab[0]), float(ab[1]), float(a_c)


def bspline_recursive(x, knot_vector, i, degree):
    """Textbook Cox-de Boor recursion for one basis function N_{i,degree}."""
    t = knot_vector
    if degree == 0:
        if t[i] <= x < t[i + 1]:
            return 1.0
        # closed top interval
        if x == t[-1] and t[i] < t[i + 1] == t[-1]:
            return 1.0
        return 0.0
    out = 0.0
    if t[i + degree] > t[i]:
        out += (x - t[i]) / (t[i + degree] - t[i]) * bspline_recursive(x, t, i, degree - 1)
    if t[i + degree + 1] > t[i + 1]:
        out += ((t[i + degree + 1] - x) / (t[i + degree + 1] - t[i + 1])
                * bspline_recursive(x, t, i + 1, degree - 1))
    return out


def loess_point(x, y, x0, span, degree):
    """Brute-force tricube local polynomial value at one query point."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = len(x)
    k = math.ceil(span * n)
    order = np.argsort(x, kind="stable")
    xs, ys = x[order], y[order]
    d = np.abs(xs - x0)
    nearest = np.argsort(d, kind="stable")[:k]
    xw, yw = xs[nearest], ys[nearest]
    dw = d[nearest]
    dmax = dw.max()
    w = np.ones_like(dw) if dmax == 0 else np.clip(1 - (dw / dmax) ** 3, 0, None) ** 3
    cols = [np.ones_like(xw), xw - x0]
    if degree == 2:
        cols.append((xw - x0) ** 2)
    A = np.column_stack(cols)
    beta = np.linalg.solve((A * w[:, None]).T @ A, (A * w[:, None]).T @ yw)
    return float(beta[0])


def decile_bins(mu, y, n_bins):
    """Independent sort-and-split binning with tie closure.

    Walks the sorted values explicitly: provisional boundaries at ranks
    floor(j*n/B); a boundary inside a tied run moves to the end of the
    run; boundaries that collide or fall off the end are dropped.
    """
    mu = np.asarray(mu, dtype=float)
    y = np.asarray(y, dtype=float)
    n = len(mu)
    order = sorted(range(n), key=lambda i: (mu[i], i))
    ms = [mu[i] for i in order]
    ys = [y[i] for i in order]
    cuts = [0]
    dropped = False
    for j in range(1, n_bins):
        b = (j * n) // n_bins
        while 0 < b < n and ms[b - 1] == ms[b]:
            b += 1
        if b <= cuts[-1] or b >= n:
            dropped = True
            continue
        cuts.append(b)
    cuts.append(n)
    bins = []
    for a, b in zip(cuts[:-1], cuts[1:]):
        # bin membership is derived independently above; the per-bin average
        # uses the same arithmetic definition as the implementation so the
        # comparison can be bitwise
        bins.append((float(np.mean(ms[a:b])), float(np.mean(ys[a:b])), b - a))
    return bins, dropped


def normal_quantile_bisect(p):
    """Inverse standard-normal cdf via erf and bisection."""
    return bisect(lambda x: 0.5 * (1.0 + math.erf(x / math.sqrt(2))) - p, -10, 10)


def poisson_offset_alpha_bisect(y, offset):
    """Solve sum(y - exp(a + offset)) = 0 for a by bisection."""
    y = np.asarray(y, dtype=float)
    offset = np.asarray(offset, dtype=float)
    return bisect(lambda a: float(np.sum(y - np.exp(a + offset))), -40, 40)
