"""Exponential-family members and link functions.

A family is reduced to the two ingredients every fitting and calibration
routine needs: the variance function V(mu) and the per-observation unit
deviance d(y, mu).  Links carry the map g, its inverse and its
derivative.  Families and links are looked up by lowercase string token,
which is also how the CLI refers to them.
"""

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from gencal.errors import DataError, DomainError


def _xlogy(x, y):
    # x * log(y) with the 0*log(0) = 0 convention
    x = np.asarray(x, dtype=np.float64)
    out = np.zeros_like(x)
    nz = x != 0
    with np.errstate(divide="ignore", invalid="ignore"):
        out[nz] = x[nz] * np.log(np.asarray(y, dtype=np.float64)[nz])
    return out


@dataclass(frozen=True)
class LinkSpec:
    """A monotone map g from the mean scale to the linear-predictor scale."""

    name: str
    g: Callable = field(repr=False)
    g_inverse: Callable = field(repr=False)
    g_prime: Callable = field(repr=False)
    # open domain for mu as (lo, hi); None means unbounded on that side
    mu_domain: tuple = (None, None)

    def check_mu(self, mu, context="mu"):
        mu = np.asarray(mu, dtype=np.float64)
        if not np.all(np.isfinite(mu)):
            raise DomainError(f"{context} contains non-finite values")
        lo, hi = self.mu_domain
        if lo is not None and np.any(mu <= lo):
            bad = float(mu[mu <= lo].flat[0])
            raise DomainError(f"{context}={bad!r} is outside the open domain of link '{self.name}'")
        if hi is not None and np.any(mu >= hi):
            bad = float(mu[mu >= hi].flat[0])
            raise DomainError(f"{context}={bad!r} is outside the open domain of link '{self.name}'")
        return mu


@dataclass(frozen=True)
class FamilySpec:
    """An exponential-family member, described by variance and deviance."""

    name: str
    dispersion_known: bool
    variance_fn: Callable = field(repr=False)
    unit_deviance: Callable = field(repr=False)
    check_support: Callable = field(repr=False)
    # closed mean domain used by deviance (limits allowed); open for fitting
    mean_domain: tuple = (None, None)
    canonical_link_name: str = "identity"

    def check_mean(self, mu, context="mu"):
        mu = np.asarray(mu, dtype=np.float64)
        if not np.all(np.isfinite(mu)):
            raise DomainError(f"{context} contains non-finite values")
        lo, hi = self.mean_domain
        if lo is not None and np.any(mu < lo):
            raise DomainError(f"{context} below the mean domain of family '{self.name}'")
        if hi is not None and np.any(mu > hi):
            raise DomainError(f"{context} above the mean domain of family '{self.name}'")
        return mu


def _bernoulli_support(y):
    y = np.asarray(y, dtype=np.float64)
    if not np.all((y == 0) | (y == 1)):
        bad = float(y[(y != 0) & (y != 1)].flat[0])
        raise DataError(f"bernoulli outcomes must be 0 or 1, got {bad!r}")
    return y


def _poisson_support(y):
    y = np.asarray(y, dtype=np.float64)
    if not np.all(np.isfinite(y)) or np.any(y < 0):
        raise DataError("poisson outcomes must be finite and nonnegative")
    return y


def _gaussian_support(y):
    y = np.asarray(y, dtype=np.float64)
    if not np.all(np.isfinite(y)):
        raise DataError("gaussian outcomes must be finite")
    return y


def _gamma_support(y):
    y = np.asarray(y, dtype=np.float64)
    if not np.all(np.isfinite(y)) or np.any(y <= 0):
        raise DataError("gamma outcomes must be finite and positive")
    return y


def _bernoulli_dev(y, mu):
    return 2.0 * (_xlogy(y, y / np.clip(mu, 1e-300, None))
                  + _xlogy(1.0 - y, (1.0 - y) / np.clip(1.0 - mu, 1e-300, None)))


def _poisson_dev(y, mu):
    with np.errstate(divide="ignore", invalid="ignore"):
        term = _xlogy(y, y / np.where(mu > 0, mu, np.inf))
    term = np.where((y > 0) & (mu == 0), np.inf, term)
    return 2.0 * (term - (y - mu))


FAMILIES = {
    "bernoulli": FamilySpec(
        name="bernoulli",
        dispersion_known=True,
        variance_fn=lambda mu: mu * (1.0 - mu),
        unit_deviance=_bernoulli_dev,
        check_support=_bernoulli_support,
        mean_domain=(0.0, 1.0),
        canonical_link_name="logit",
    ),
    "poisson": FamilySpec(
        name="poisson",
        dispersion_known=True,
        variance_fn=lambda mu: mu,
        unit_deviance=_poisson_dev,
        check_support=_poisson_support,
        mean_domain=(0.0, None),
        canonical_link_name="log",
    ),
    "gaussian": FamilySpec(
        name="gaussian",
        dispersion_known=False,
        variance_fn=lambda mu: np.ones_like(np.asarray(mu, dtype=np.float64)),
        unit_deviance=lambda y, mu: (y - mu) ** 2,
        check_support=_gaussian_support,
        mean_domain=(None, None),
        canonical_link_name="identity",
    ),
    "gamma": FamilySpec(
        name="gamma",
        dispersion_known=False,
        variance_fn=lambda mu: mu * mu,
        unit_deviance=lambda y, mu: 2.0 * (-np.log(y / mu) + (y - mu) / mu),
        check_support=_gamma_support,
        mean_domain=(0.0, None),
        canonical_link_name="inverse",
    ),
}

LINKS = {
    "logit": LinkSpec(
        name="logit",
        g=lambda mu: np.log(mu / (1.0 - mu)),
        g_inverse=lambda eta: 1.0 / (1.0 + np.exp(-eta)),
        g_prime=lambda mu: 1.0 / (mu * (1.0 - mu)),
        mu_domain=(0.0, 1.0),
    ),
    "log": LinkSpec(
        name="log",
        g=np.log,
        g_inverse=np.exp,
        g_prime=lambda mu: 1.0 / mu,
        mu_domain=(0.0, None),
    ),
    "identity": LinkSpec(
        name="identity",
        g=lambda mu: np.asarray(mu, dtype=np.float64),
        g_inverse=lambda eta: np.asarray(eta, dtype=np.float64),
        g_prime=lambda mu: np.ones_like(np.asarray(mu, dtype=np.float64)),
        mu_domain=(None, None),
    ),
    "inverse": LinkSpec(
        name="inverse",
        g=lambda mu: 1.0 / mu,
        g_inverse=lambda eta: 1.0 / eta,
        g_prime=lambda mu: -1.0 / (mu * mu),
        mu_domain=(0.0, None),
    ),
}


def get_family(token):
    try:
        return FAMILIES[token.lower()]
    except KeyError:
        raise DataError(f"unknown family '{token}'; choose from {sorted(FAMILIES)}") from None


def get_link(token):
    try:
        return LINKS[token.lower()]
    except KeyError:
        raise DataError(f"unknown link '{token}'; choose from {sorted(LINKS)}") from None


def canonical_link(family):
    return LINKS[family.canonical_link_name]


def link_apply(link, mu):
    """eta = g(mu), rejecting values on or outside the domain boundary."""
    mu = link.check_mu(mu)
    eta = link.g(mu)
    if not np.all(np.isfinite(eta)):
        raise DomainError(f"link '{link.name}' produced non-finite values")
    return eta


def deviance(family, y, mu, weights=None):
    """Total deviance sum(w_i * d(y_i, mu_i)).

    mu may sit on a closed boundary where the deviance limit is finite
    (e.g. poisson mu=0 with y=0); invalid means raise DomainError.
    """
    y = family.check_support(y)
    mu = family.check_mean(mu)
    if y.shape != mu.shape:
        raise DataError(f"length mismatch: y has {y.shape[0]}, mu has {mu.shape[0]}")
    if weights is None:
        weights = np.ones_like(y)
    else:
        weights = np.asarray(weights, dtype=np.float64)
        if weights.shape != y.shape:
            raise DataError("weights length does not match y")
        if np.any(weights < 0):
            raise DataError("weights must be nonnegative")
    return float(np.sum(weights * family.unit_deviance(y, mu)))
