"""One-dimensional marginal laws used to build movement distributions."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special

from ..errors import DomainError

_LOG_SQRT_2PI = 0.5 * np.log(2.0 * np.pi)


@dataclass(frozen=True)
class GaussianMarginal:
    """Normal law with the given mean and standard deviation."""

    mean: float = 0.0
    stddev: float = 1.0

    def __post_init__(self):
        if not (np.isfinite(self.mean) and np.isfinite(self.stddev)):
            raise DomainError("Gaussian marginal parameters must be finite")
        if self.stddev <= 0:
            raise DomainError(f"stddev must be positive, got {self.stddev}")

    kind = "gaussian"

    def _z(self, x):
        return (np.asarray(x, dtype=float) - self.mean) / self.stddev

    def pdf(self, x):
        z = self._z(x)
        return np.exp(-0.5 * z * z - _LOG_SQRT_2PI) / self.stddev

    def cdf(self, x):
        return special.ndtr(self._z(x))

    def sf(self, x):
        return special.ndtr(-self._z(x))

    def quantile(self, u):
        return self.mean + self.stddev * special.ndtri(np.asarray(u, dtype=float))

    def sample(self, rng, size):
        return self.mean + self.stddev * rng.standard_normal(size)

    def to_dict(self):
        return {"kind": self.kind, "mean": float(self.mean),
                "stddev": float(self.stddev)}


@dataclass(frozen=True)
class StudentTMarginal:
    """Location-scale Student t law.

    Heavy tailed: exponential moments of every order diverge, which makes
    it the natural counterexample for moment checks.
    """

    df: float
    loc: float = 0.0
    scale: float = 1.0

    def __post_init__(self):
        if self.df <= 0 or self.scale <= 0:
            raise DomainError("Student t marginal needs df > 0 and scale > 0")

    kind = "student_t"

    def _z(self, x):
        return (np.asarray(x, dtype=float) - self.loc) / self.scale

    def pdf(self, x):
        z = self._z(x)
        nu = self.df
        logc = (special.gammaln((nu + 1) / 2) - special.gammaln(nu / 2)
                - 0.5 * np.log(nu * np.pi))
        return np.exp(logc - (nu + 1) / 2 * np.log1p(z * z / nu)) / self.scale

    def cdf(self, x):
        return special.stdtr(self.df, self._z(x))

    def sf(self, x):
        return special.stdtr(self.df, -self._z(x))

    def quantile(self, u):
        return self.loc + self.scale * special.stdtrit(
            self.df, np.asarray(u, dtype=float))

    def sample(self, rng, size):
        return self.loc + self.scale * rng.standard_t(self.df, size)

    def to_dict(self):
        return {"kind": self.kind, "df": float(self.df), "loc": float(self.loc),
                "scale": float(self.scale)}


Marginal1D = GaussianMarginal | StudentTMarginal

STANDARD_NORMAL = GaussianMarginal()


def marginal_from_dict(spec):
    kind = spec.get("kind", "gaussian")
    if kind == "gaussian":
        return GaussianMarginal(float(spec.get("mean", 0.0)),
                                float(spec.get("stddev", 1.0)))
    if kind == "student_t":
        return StudentTMarginal(float(spec["df"]), float(spec.get("loc", 0.0)),
                                float(spec.get("scale", 1.0)))
    raise DomainError(f"unknown marginal kind {kind!r}")
