"""Laws of a single movement vector.

Only the first two coordinates carry the joint law ``H``; coordinates
3..d are drawn independently from ``tail``. Both kinds can be decomposed
into ``(marginal_1, marginal_2, copula)``, which is the form the analysis
layer integrates over.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import tanhsinh

from ..errors import DomainError
from .copulas import GaussianCopula, ProductCopula, bivariate_normal_cdf, copula_from_dict
from .marginals import STANDARD_NORMAL, GaussianMarginal, Marginal1D, marginal_from_dict


def plane_normal(n):
    """Return ``(n1, n2)`` after checking that ``n`` lives in the first two axes."""
    vec = np.asarray(getattr(n, "vector", n), dtype=float).ravel()
    if vec.size < 2:
        raise DomainError("constraint normal needs at least two components")
    if np.any(vec[2:] != 0):
        raise DomainError(
            "the two-dimensional movement law only determines n.x when n "
            "vanishes beyond its first two components")
    if vec[0] == 0 and vec[1] == 0:
        raise DomainError("constraint normal has no component in the first two axes")
    return float(vec[0]), float(vec[1])


@dataclass(frozen=True)
class BivariateGaussian:
    mean: tuple = (0.0, 0.0)
    covariance: tuple = ((1.0, 0.0), (0.0, 1.0))
    tail: Marginal1D = STANDARD_NORMAL

    kind = "bivariate_gaussian"

    def __post_init__(self):
        mean = tuple(float(x) for x in np.asarray(self.mean, dtype=float).ravel())
        cov = np.asarray(self.covariance, dtype=float)
        if len(mean) != 2 or cov.shape != (2, 2):
            raise DomainError("bivariate Gaussian needs a 2-vector mean and 2x2 covariance")
        if not np.allclose(cov, cov.T, rtol=0, atol=1e-14):
            raise DomainError("covariance must be symmetric")
        if cov[0, 0] <= 0 or np.linalg.det(cov) <= 0:
            raise DomainError("covariance must be positive definite")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", tuple(map(tuple, cov.tolist())))

    @property
    def _cov(self):
        return np.array(self.covariance)

    @property
    def stddevs(self):
        c = self._cov
        return float(np.sqrt(c[0, 0])), float(np.sqrt(c[1, 1]))

    @property
    def rho(self):
        c = self._cov
        s1, s2 = self.stddevs
        return float(c[0, 1] / (s1 * s2))

    def components(self):
        s1, s2 = self.stddevs
        rho = self.rho
        cop = ProductCopula() if rho == 0 else GaussianCopula(rho)
        return (GaussianMarginal(self.mean[0], s1), GaussianMarginal(self.mean[1], s2), cop)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        s1, s2 = self.stddevs
        with np.errstate(invalid="ignore"):
            z1 = (x[..., 0] - self.mean[0]) / s1
            z2 = (x[..., 1] - self.mean[1]) / s2
        return bivariate_normal_cdf(z1, z2, self.rho)

    def density(self, x):
        x = np.asarray(x, dtype=float)
        d = x[..., :2] - np.asarray(self.mean)
        cov = self._cov
        inv = np.linalg.inv(cov)
        q = np.einsum("...i,ij,...j->...", d, inv, d)
        return np.exp(-0.5 * q) / (2.0 * np.pi * np.sqrt(np.linalg.det(cov)))

    def sample_plane(self, rng, size):
        chol = np.linalg.cholesky(self._cov)
        z = rng.standard_normal((size, 2))
        return np.asarray(self.mean) + z @ chol.T

    def halfspace_mass(self, n1, n2, delta):
        nv = np.array([n1, n2])
        mu = float(nv @ np.asarray(self.mean))
        sd = float(np.sqrt(nv @ self._cov @ nv))
        return GaussianMarginal(mu, sd).cdf(delta)

    def to_dict(self):
        return {"kind": self.kind, "mean": list(self.mean),
                "covariance": [list(r) for r in self.covariance],
                "tail": self.tail.to_dict()}


@dataclass(frozen=True)
class ComposedMovement:
    """Joint law built from two marginals glued by a copula."""

    m1: Marginal1D
    m2: Marginal1D
    copula: object = field(default_factory=ProductCopula)
    tail: Marginal1D = STANDARD_NORMAL

    kind = "composed"

    def components(self):
        return self.m1, self.m2, self.copula

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return self.copula.cdf(self.m1.cdf(x[..., 0]), self.m2.cdf(x[..., 1]))

    def density(self, x):
        x = np.asarray(x, dtype=float)
        x1, x2 = x[..., 0], x[..., 1]
        u1 = np.clip(self.m1.cdf(x1), 1e-300, 1 - 2.0 ** -53)
        u2 = np.clip(self.m2.cdf(x2), 1e-300, 1 - 2.0 ** -53)
        return self.copula._density(u1, u2) * self.m1.pdf(x1) * self.m2.pdf(x2)

    def sample_plane(self, rng, size):
        uv = self.copula.sample(rng, size)
        return np.column_stack([self.m1.quantile(uv[:, 0]), self.m2.quantile(uv[:, 1])])

    def halfspace_mass(self, n1, n2, delta):
        if n2 == 0:
            return self.m1.cdf(delta / n1) if n1 > 0 else self.m1.sf(delta / n1)
        m1, m2, cop = self.m1, self.m2, self.copula

        def feasible(u1):
            z = m2.cdf((delta - n1 * m1.quantile(u1)) / n2)
            p = cop._cond_cdf(u1, z)
            return p if n2 > 0 else 1.0 - p

        res = tanhsinh(feasible, 0.0, 1.0, atol=1e-14, rtol=1e-12)
        return float(np.clip(res.integral, 0.0, 1.0))

    def to_dict(self):
        return {"kind": self.kind, "marginals": [self.m1.to_dict(), self.m2.to_dict()],
                "copula": self.copula.to_dict(), "tail": self.tail.to_dict()}


MovementDistribution = BivariateGaussian | ComposedMovement


def movement_cdf(M, x):
    out = M.cdf(x)
    return float(out) if np.ndim(out) == 0 else out


def movement_density(M, x):
    out = M.density(x)
    return float(out) if np.ndim(out) == 0 else out


def movement_sample(M, d, rng, size=None):
    """Draw ``size`` movements of dimension ``d`` (one d-vector if size is None)."""
    if d < 2:
        raise DomainError(f"movement dimension must be >= 2, got {d}")
    k = 1 if size is None else int(size)
    plane = M.sample_plane(rng, k)
    if d > 2:
        tail = M.tail.sample(rng, (k, d - 2))
        out = np.concatenate([plane, tail], axis=1)
    else:
        out = plane
    return out[0] if size is None else out


def halfspace_mass(M, n, delta):
    """H(L_delta) = P(n1 x1 + n2 x2 < delta) under the movement law."""
    n1, n2 = plane_normal(n)
    return float(M.halfspace_mass(n1, n2, float(delta)))


def movement_from_dict(spec):
    kind = spec.get("kind")
    tail = marginal_from_dict(spec["tail"]) if "tail" in spec else STANDARD_NORMAL
    if kind == "bivariate_gaussian":
        return BivariateGaussian(tuple(spec.get("mean", (0.0, 0.0))),
                                 tuple(map(tuple, spec.get("covariance",
                                                           ((1.0, 0.0), (0.0, 1.0))))),
                                 tail)
    if kind == "composed":
        m1, m2 = (marginal_from_dict(m) for m in spec["marginals"])
        return ComposedMovement(m1, m2, copula_from_dict(spec["copula"]), tail)
    raise DomainError(f"unknown movement kind {kind!r}")
