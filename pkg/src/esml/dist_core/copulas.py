"""Bivariate copulas: product, Archimedean (Gumbel generator) and Gaussian.

Every copula exposes the same vectorized surface::

    cdf(u, v)          C(u, v)
    density(u, v)      d^2 C / du dv
    cond_cdf(u, v)     dC/du (u, v), the law of V given U = u
    cond_ppf(u, w)     solves cond_cdf(u, v) = w for v
    sample(rng, size)  pairs drawn by the conditional-distribution method

The public ``cdf``/``density`` methods validate their domain; the
underscored variants skip validation and are used inside quadrature loops.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special

from ..errors import DomainError, NumericError, SingularityError

# bisection for the conditional quantile
BISECT_TOL = 1e-12
BISECT_MAX_STEPS = 200

# keeps quadrature nodes that round onto the boundary usable
_U_LO = 1e-300
_U_HI = 1.0 - 2.0 ** -53


def _clip_open(u):
    return np.clip(u, _U_LO, _U_HI)


def _as_pair(u, v):
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    return np.broadcast_arrays(u, v)


def _check_closed(u, v):
    if np.any(~((u >= 0) & (u <= 1))) or np.any(~((v >= 0) & (v <= 1))):
        raise DomainError("copula arguments must lie in [0, 1]")


def _check_open(u, v):
    if np.any(~((u > 0) & (u < 1))) or np.any(~((v > 0) & (v < 1))):
        raise DomainError("copula density needs arguments strictly inside (0, 1)")


def _scalar_or_array(x):
    x = np.asarray(x)
    return float(x) if x.ndim == 0 else x


# ---------------------------------------------------------------------------
# Archimedean generators


@dataclass(frozen=True)
class GumbelGenerator:
    """psi(t) = exp(-t**(1/theta)) for theta >= 1."""

    theta: float

    def __post_init__(self):
        if not np.isfinite(self.theta) or self.theta < 1:
            raise DomainError(f"Gumbel generator needs theta >= 1, got {self.theta}")

    kind = "gumbel"

    @property
    def singular_at_zero(self):
        return self.theta > 1

    def psi(self, t):
        t = np.asarray(t, dtype=float)
        return np.exp(-t ** (1.0 / self.theta))

    def psi_prime(self, t):
        t = np.asarray(t, dtype=float)
        if self.theta == 1:
            return -np.exp(-t)
        a = 1.0 / self.theta
        with np.errstate(divide="ignore"):
            return -a * t ** (a - 1.0) * np.exp(-t ** a)

    def psi_second(self, t):
        t = np.asarray(t, dtype=float)
        if self.theta == 1:
            return np.exp(-t)
        a = 1.0 / self.theta
        with np.errstate(divide="ignore", invalid="ignore"):
            ta = t ** a
            return a * t ** (a - 2.0) * np.exp(-ta) * (a * ta + 1.0 - a)

    def psi_inverse(self, u):
        u = np.asarray(u, dtype=float)
        return (-np.log(u)) ** self.theta

    def to_dict(self):
        return {"kind": self.kind, "theta": float(self.theta)}


ArchimedeanGenerator = GumbelGenerator


def generator_eval(g, t):
    """Return ``(psi, psi', psi'')`` at ``t >= 0``.

    Raises ``DomainError`` for negative ``t`` and ``SingularityError`` when
    the derivatives blow up at ``t = 0`` (Gumbel with theta > 1).
    """
    t_arr = np.asarray(t, dtype=float)
    if np.any(~(t_arr >= 0)):
        raise DomainError(f"generator argument must be >= 0, got {t}")
    if np.any(t_arr == 0) and getattr(g, "singular_at_zero", False):
        raise SingularityError("generator derivatives are singular at t = 0")
    return (_scalar_or_array(g.psi(t_arr)), _scalar_or_array(g.psi_prime(t_arr)),
            _scalar_or_array(g.psi_second(t_arr)))


def generator_inverse(g, u):
    u_arr = np.asarray(u, dtype=float)
    if np.any(~((u_arr > 0) & (u_arr <= 1))):
        raise DomainError(f"generator inverse needs 0 < u <= 1, got {u}")
    return _scalar_or_array(g.psi_inverse(u_arr))


# ---------------------------------------------------------------------------
# Copulas


class _CopulaBase:
    def cdf(self, u, v):
        u, v = _as_pair(u, v)
        _check_closed(u, v)
        return _scalar_or_array(self._cdf(u, v))

    def density(self, u, v):
        u, v = _as_pair(u, v)
        _check_open(u, v)
        return _scalar_or_array(self._density(u, v))

    def cond_cdf(self, u, v):
        u, v = _as_pair(u, v)
        return self._cond_cdf(_clip_open(u), v)

    def cond_ppf(self, u, w):
        u, w = _as_pair(u, w)
        return self._cond_ppf(_clip_open(u), w)

    def sample(self, rng, size=None):
        """Draw pairs; ``size=None`` returns a single ``(u, v)`` pair."""
        n = 1 if size is None else int(size)
        u = rng.random(n)
        w = rng.random(n)
        v = self._cond_ppf(_clip_open(u), w)
        out = np.column_stack([u, v])
        return out[0] if size is None else out


@dataclass(frozen=True)
class ProductCopula(_CopulaBase):
    kind = "product"

    def _cdf(self, u, v):
        return u * v

    def _density(self, u, v):
        return np.ones_like(u * v)

    def _cond_cdf(self, u, v):
        return np.clip(v, 0.0, 1.0) + 0.0 * u

    def _cond_ppf(self, u, w):
        return w + 0.0 * u

    def to_dict(self):
        return {"kind": self.kind}


@dataclass(frozen=True)
class ArchimedeanCopula(_CopulaBase):
    """C(u, v) = psi(psi^-1(u) + psi^-1(v)).

    The density uses the bivariate chain rule
    ``psi''(s) / (psi'(psi^-1(u)) psi'(psi^-1(v)))``.
    """

    generator: GumbelGenerator
    kind = "archimedean"

    def _cdf(self, u, v):
        g = self.generator
        with np.errstate(divide="ignore"):
            s = g.psi_inverse(u) + g.psi_inverse(v)
        return np.clip(g.psi(s), 0.0, 1.0)

    def _density(self, u, v):
        g = self.generator
        t1 = g.psi_inverse(u)
        t2 = g.psi_inverse(v)
        return g.psi_second(t1 + t2) / (g.psi_prime(t1) * g.psi_prime(t2))

    def _cond_cdf(self, u, v):
        g = self.generator
        t1 = g.psi_inverse(u)
        with np.errstate(divide="ignore", invalid="ignore"):
            s = t1 + g.psi_inverse(np.clip(v, 0.0, 1.0))
            out = g.psi_prime(s) / g.psi_prime(t1)
        out = np.where(v <= 0, 0.0, np.where(v >= 1, 1.0, out))
        return np.clip(np.nan_to_num(out, nan=0.0), 0.0, 1.0)

    def _cond_ppf(self, u, w):
        u, w = np.broadcast_arrays(u, w)
        lo = np.zeros(u.shape)
        hi = np.ones(u.shape)
        for _ in range(BISECT_MAX_STEPS):
            mid = 0.5 * (lo + hi)
            below = self._cond_cdf(u, mid) < w
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
            if np.all(hi - lo <= BISECT_TOL):
                return 0.5 * (lo + hi)
        raise NumericError(
            f"conditional quantile did not converge in {BISECT_MAX_STEPS} bisection steps")

    def to_dict(self):
        return {"kind": self.kind, "generator": self.generator.to_dict()}


def gumbel_copula(theta):
    return ArchimedeanCopula(GumbelGenerator(theta))


def bivariate_normal_cdf(h, k, rho):
    """P(Z1 <= h, Z2 <= k) for standard normals with correlation ``rho``.

    Uses Owen's T function; exact limits are returned for infinite
    arguments and for ``rho == 0``.
    """
    h, k = np.broadcast_arrays(np.asarray(h, dtype=float), np.asarray(k, dtype=float))
    if rho == 0:
        return special.ndtr(h) * special.ndtr(k)
    r = np.sqrt(1.0 - rho * rho)
    out = np.empty(h.shape)
    fin = np.isfinite(h) & np.isfinite(k)
    out[~fin] = np.where(
        (h[~fin] == -np.inf) | (k[~fin] == -np.inf), 0.0,
        np.where(h[~fin] == np.inf, special.ndtr(k[~fin]), special.ndtr(h[~fin])))
    hf, kf = h[fin], k[fin]
    both0 = (hf == 0) & (kf == 0)
    # nudge single zeros off the axis; the formula is continuous there
    tiny = np.finfo(float).tiny
    hs = np.where((hf == 0) & ~both0, tiny, hf)
    ks = np.where((kf == 0) & ~both0, tiny, kf)
    with np.errstate(divide="ignore", invalid="ignore"):
        ah = (ks - rho * hs) / (hs * r)
        ak = (hs - rho * ks) / (ks * r)
        val = (0.5 * special.ndtr(hs) + 0.5 * special.ndtr(ks)
               - special.owens_t(hs, ah) - special.owens_t(ks, ak))
    val = val - np.where(hs * ks < 0, 0.5, 0.0)
    val = np.where(both0, 0.25 + np.arcsin(rho) / (2 * np.pi), val)
    out[fin] = np.clip(val, 0.0, 1.0)
    return out


@dataclass(frozen=True)
class GaussianCopula(_CopulaBase):
    rho: float
    kind = "gaussian"

    def __post_init__(self):
        if not (-1 < self.rho < 1):
            raise DomainError(f"Gaussian copula needs -1 < rho < 1, got {self.rho}")

    def _cdf(self, u, v):
        with np.errstate(divide="ignore"):
            return bivariate_normal_cdf(special.ndtri(u), special.ndtri(v), self.rho)

    def _density(self, u, v):
        a = special.ndtri(u)
        b = special.ndtri(v)
        r2 = 1.0 - self.rho ** 2
        q = (self.rho ** 2 * (a * a + b * b) - 2.0 * self.rho * a * b) / (2.0 * r2)
        return np.exp(-q) / np.sqrt(r2)

    def _cond_cdf(self, u, v):
        with np.errstate(divide="ignore"):
            b = special.ndtri(np.clip(v, 0.0, 1.0))
        z = (b - self.rho * special.ndtri(u)) / np.sqrt(1.0 - self.rho ** 2)
        return special.ndtr(z)

    def _cond_ppf(self, u, w):
        z = special.ndtri(w)
        return special.ndtr(self.rho * special.ndtri(u)
                            + np.sqrt(1.0 - self.rho ** 2) * z)

    def to_dict(self):
        return {"kind": self.kind, "rho": float(self.rho)}


Copula = ProductCopula | ArchimedeanCopula | GaussianCopula


def copula_cdf(c, u):
    u = np.asarray(u, dtype=float)
    return c.cdf(u[..., 0], u[..., 1])


def copula_density(c, u):
    u = np.asarray(u, dtype=float)
    return c.density(u[..., 0], u[..., 1])


def copula_sample(c, rng, size=None):
    return c.sample(rng, size)


def copula_from_dict(spec):
    kind = spec.get("kind")
    if kind == "product":
        return ProductCopula()
    if kind == "gumbel":
        return gumbel_copula(float(spec["theta"]))
    if kind == "archimedean":
        gen = spec["generator"]
        if gen.get("kind") != "gumbel":
            raise DomainError(f"unknown generator kind {gen.get('kind')!r}")
        return gumbel_copula(float(gen["theta"]))
    if kind == "gaussian":
        return GaussianCopula(float(spec["rho"]))
    raise DomainError(f"unknown copula kind {kind!r}")


# ---------------------------------------------------------------------------
# m-monotonicity


@dataclass(frozen=True)
class MonotoneReport:
    passed: bool
    m: int
    first_violation: tuple[int, float] | None = None
    reason: str = ""

    def to_dict(self):
        return {"pass": self.passed, "m": self.m,
                "first_violation": (None if self.first_violation is None
                                    else list(self.first_violation)),
                "reason": self.reason}


def default_monotone_grid():
    return np.logspace(-4, np.log10(50.0), 200)


def _central_derivative(psi, t, k):
    """k-th derivative of ``psi`` at ``t`` by a central difference stencil.

    The step scales with ``t`` so every stencil point stays in (0, inf).
    """
    if k == 0:
        return np.asarray(psi(t), dtype=float)
    eps = np.finfo(float).eps
    h = t * min(eps ** (1.0 / (k + 2)), 0.5 / k)
    acc = np.zeros_like(t)
    for j in range(k + 1):
        coef = (-1) ** j * special.comb(k, j)
        acc = acc + coef * np.asarray(psi(t + (k / 2.0 - j) * h), dtype=float)
    return acc / h ** k


def m_monotone_check(g, m, grid=None, tol=1e-8):
    """Numerically test whether a generator is m-monotone on ``grid``.

    ``g`` may be a generator object or a bare callable ``psi``. The
    sign conditions ``(-1)**k psi^(k) >= -tol`` are checked for
    ``k <= m - 2``; additionally ``psi^(m-2)`` must be non-increasing and
    convex across the grid points.
    """
    if m < 2:
        raise DomainError(f"m must be >= 2, got {m}")
    t = default_monotone_grid() if grid is None else np.sort(np.asarray(grid, dtype=float))
    if t.size == 0:
        raise DomainError("m-monotone check needs a non-empty grid")
    if np.any(t <= 0):
        raise DomainError("grid points must be positive")
    psi = g.psi if hasattr(g, "psi") else g
    exact = {1: getattr(g, "psi_prime", None), 2: getattr(g, "psi_second", None)}

    top = None
    for k in range(m - 1):
        # closed-form derivatives where the generator provides them
        if exact.get(k) is not None:
            dk = np.asarray(exact[k](t), dtype=float)
        else:
            dk = _central_derivative(psi, t, k)
        signed = (-1) ** k * dk
        bad = np.nonzero(~(signed >= -tol))[0]
        if bad.size:
            i = int(bad[0])
            return MonotoneReport(False, m, (k, float(t[i])),
                                  f"sign condition fails for derivative order {k}")
        top = dk

    # shape of psi^(m-2): non-increasing and convex (scale-aware tolerance)
    k = m - 2
    scale = np.maximum(np.abs(top), 1.0)
    slope_tol = tol * scale[:-1] + 1e-6 * np.abs(top[:-1])
    rises = np.nonzero(np.diff(top) > slope_tol)[0]
    if rises.size:
        i = int(rises[0])
        return MonotoneReport(False, m, (k, float(t[i])),
                              f"derivative of order {k} is not decreasing")
    if t.size >= 3:
        s = np.diff(top) / np.diff(t)
        ds = np.diff(s)
        curv_tol = tol * np.maximum(np.abs(s[:-1]), 1.0) + 1e-6 * np.abs(s[:-1])
        concave = np.nonzero(ds < -curv_tol)[0]
        if concave.size:
            i = int(concave[0]) + 1
            return MonotoneReport(False, m, (k, float(t[i])),
                                  f"derivative of order {k} is not convex")
    return MonotoneReport(True, m)
