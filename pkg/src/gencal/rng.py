"""Deterministic random streams on top of the splitmix64 kernels.

An ``Rng`` is (seed, counter); every draw advances the counter by a
documented amount, so results are reproducible bit for bit across runs
and across the compiled/fallback kernel flavours (integer draws) for a
given seed.  Child streams for independent tasks are derived from a
label, which keeps parallel execution order out of the picture.
"""

import numpy as np

from gencal import _kernels
from gencal.errors import DataError

_MASK = (1 << 64) - 1
_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3


def _mix64(z):
    z &= _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def _fnv1a(label):
    h = _FNV_OFFSET
    for byte in label.encode("utf-8"):
        h = ((h ^ byte) * _FNV_PRIME) & _MASK
    return h


class Rng:
    """Counter-based splitmix64 stream."""

    def __init__(self, seed, kernel=None):
        self.seed = int(seed) & _MASK
        self.counter = 0
        self._k = kernel if kernel is not None else _kernels.active

    def derive(self, label):
        """Independent child stream named by a label."""
        return Rng(_mix64(self.seed ^ _fnv1a(str(label))), kernel=self._k)

    def raw(self, n):
        out = self._k.raw64(self.seed, self.counter, int(n))
        self.counter += int(n)
        return out

    def uniforms(self, n):
        out = self._k.uniforms(self.seed, self.counter, int(n))
        self.counter += int(n)
        return out

    def normals(self, n):
        out, used = self._k.normals(self.seed, self.counter, int(n))
        self.counter += used
        return out

    def poisson(self, lam):
        """One Poisson draw per element of lam (all strictly positive)."""
        lam = np.ascontiguousarray(lam, dtype=np.float64)
        if lam.size and (not np.all(np.isfinite(lam)) or np.any(lam <= 0)):
            raise DataError("poisson intensities must be finite and positive")
        pexp = np.exp(-lam)
        with np.errstate(divide="ignore"):
            loglam = np.log(lam)
        out, used = self._k.poisson(self.seed, self.counter, lam, pexp, loglam)
        self.counter += int(used)
        return out

    def sample_indices(self, n, k):
        """k distinct indices from range(n), uniform without replacement."""
        if k > n:
            raise DataError(f"cannot take {k} distinct indices from {n}")
        out, used = self._k.fisher_yates_take(self.seed, self.counter, int(n), int(k))
        self.counter += int(used)
        return out

    def permutation(self, n):
        return self.sample_indices(n, n)
