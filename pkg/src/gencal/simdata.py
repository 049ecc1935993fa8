"""Synthetic data pipeline for the Poisson demonstration study.

Five correlated standard-normal covariates are rescaled columnwise onto
[-1, 1] by a min-max map, the outcome intensity is log-linear in the
covariates, and counts are drawn from the Poisson sampler.  Training and
validation sets are disjoint subsamples of the population.
"""

import io
from dataclasses import dataclass, field

import numpy as np

from gencal.errors import ConfigError, DataError
from gencal.rng import Rng

DEFAULT_SEED = 14

DEFAULT_BETA = (-2.3, 1.5, 2.0, -1.0, -2.0, -1.5)

DEFAULT_SIGMA = (
    (1.000, 0.025, 0.000, 0.050, 0.000),
    (0.025, 1.000, 0.000, 0.075, 0.025),
    (0.000, 0.000, 1.000, 0.000, 0.000),
    (0.050, 0.075, 0.000, 1.000, 0.000),
    (0.000, 0.025, 0.000, 0.000, 1.000),
)

CSV_HEADER = "x1,x2,x3,x4,x5,y,lambda,role"


@dataclass(frozen=True)
class SimConfig:
    n_population: int = 1_000_000
    n_train: int = 5000
    n_valid: int = 1000
    beta: tuple = DEFAULT_BETA
    sigma: tuple = DEFAULT_SIGMA
    seed: int = DEFAULT_SEED

    def __post_init__(self):
        beta = tuple(float(b) for b in self.beta)
        sigma = tuple(tuple(float(v) for v in row) for row in self.sigma)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "sigma", sigma)
        if len(beta) != 6:
            raise ConfigError("beta must have 6 entries (intercept + 5 covariates)")
        s = np.asarray(sigma)
        if s.shape != (5, 5) or not np.allclose(s, s.T):
            raise ConfigError("sigma must be a symmetric 5x5 matrix")
        try:
            np.linalg.cholesky(s)
        except np.linalg.LinAlgError:
            raise ConfigError("sigma is not positive definite") from None
        if self.n_population <= 0 or self.n_train <= 0 or self.n_valid <= 0:
            raise ConfigError("sample sizes must be positive")
        if self.n_train + self.n_valid > self.n_population:
            raise ConfigError(
                f"n_train + n_valid = {self.n_train + self.n_valid} exceeds "
                f"n_population = {self.n_population}")


@dataclass(frozen=True)
class SimDataset:
    X: np.ndarray
    y: np.ndarray
    lam: np.ndarray
    role: str = field(default="population")

    @property
    def n(self):
        return self.X.shape[0]

    def subset(self, idx, role):
        return SimDataset(X=self.X[idx], y=self.y[idx], lam=self.lam[idx], role=role)


def sample_mvn(n, sigma, rng):
    """n i.i.d. rows from N(0, sigma) via the Cholesky transform."""
    sigma = np.asarray(sigma, dtype=np.float64)
    try:
        chol = np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError:
        raise DataError("covariance matrix is not positive definite") from None
    p = sigma.shape[0]
    if n == 0:
        return np.empty((0, p))
    z = rng.normals(n * p).reshape(n, p)
    return z @ chol.T


def rescale_to_unit_interval(X):
    """Columnwise affine map onto exactly [-1, 1]."""
    X = np.asarray(X, dtype=np.float64)
    lo = X.min(axis=0)
    hi = X.max(axis=0)
    if np.any(hi <= lo):
        j = int(np.nonzero(hi <= lo)[0][0])
        raise DataError(f"column {j} is constant; cannot rescale to [-1, 1]")
    return -1.0 + 2.0 * (X - lo) / (hi - lo)


def poisson_draw(lam, rng):
    """Single Poisson draw, exposed for direct use."""
    if not np.isfinite(lam) or lam <= 0:
        raise DataError(f"poisson intensity must be finite and positive, got {lam!r}")
    return int(rng.poisson(np.array([float(lam)]))[0])


def generate(config):
    """Population, training and validation datasets, deterministic per seed."""
    rng = Rng(config.seed)
    raw = sample_mvn(config.n_population, config.sigma, rng.derive("covariates"))
    X = rescale_to_unit_interval(raw)
    beta = np.asarray(config.beta)
    lam = np.exp(beta[0] + X @ beta[1:])
    y = rng.derive("outcomes").poisson(lam)
    population = SimDataset(X=X, y=y, lam=lam, role="population")

    take = rng.derive("split").sample_indices(config.n_population,
                                              config.n_train + config.n_valid)
    train = population.subset(take[:config.n_train], "train")
    valid = population.subset(take[config.n_train:], "valid")
    return population, train, valid


def dataset_to_csv(ds):
    """CSV text with header x1..x5,y,lambda,role; floats at full precision."""
    buf = io.StringIO()
    buf.write(CSV_HEADER + "\n")
    for i in range(ds.n):
        xs = ",".join(repr(float(v)) for v in ds.X[i])
        buf.write(f"{xs},{int(ds.y[i])},{repr(float(ds.lam[i]))},{ds.role}\n")
    return buf.getvalue()
