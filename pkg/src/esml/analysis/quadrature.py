"""Integration over truncated half-planes in probability coordinates.

A movement law is handled through its decomposition ``(F1, F2, C)``.
With ``u1 = F1(x1)`` and ``w`` the conditional probability level of the
second coordinate given ``U1 = u1`` (so ``u2 = C_{2|1}^{-1}(w | u1)``),
the plane measure becomes Lebesgue measure on the unit square and the
half-plane ``{n.x < c}`` becomes, for each ``u1``, an interval of ``w``.
Selection by the first coordinate only reweights ``u1``: the selected
first coordinate has CDF ``G(u1) ** lam`` where ``G`` is the truncated
first-coordinate CDF. Every analytic quantity of the chain is therefore
a one- or two-level nested integral of smooth functions, evaluated here
with scipy's tanh-sinh rule.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import tanhsinh

from ..dist_core.copulas import _clip_open
from ..dist_core.movement import plane_normal
from ..errors import DomainError, NumericError


@dataclass(frozen=True)
class QuadratureSpec:
    """Tolerances for quadrature and sizes for Monte-Carlo confirmation.

    ``max_subdivisions`` is the maximum refinement level of the tanh-sinh
    rule; ``mc_seed`` seeds the confirmation runs.
    """

    abs_tol: float = 1e-8
    rel_tol: float = 1e-8
    max_subdivisions: int = 12
    mc_samples: int = 10 ** 6
    mc_seed: int = 0

    def __post_init__(self):
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise DomainError("quadrature tolerances must be positive")
        if self.max_subdivisions < 1 or self.mc_samples < 1:
            raise DomainError("max_subdivisions and mc_samples must be >= 1")

    def to_dict(self):
        return dict(self.__dict__)


DEFAULT_SPEC = QuadratureSpec()


def integrate(f, a, b, spec=DEFAULT_SPEC, args=(), scale=1.0, failures=None):
    """Vectorized tanh-sinh integral; ``scale`` tightens the tolerances.

    Elements that did not converge are counted into ``failures`` (a
    one-element list) when given.
    """
    res = tanhsinh(f, a, b, args=args, atol=spec.abs_tol * scale, rtol=spec.rel_tol * scale,
                   maxlevel=spec.max_subdivisions)
    if failures is not None:
        failures[0] += int(np.sum(~np.asarray(res.success) | ~np.isfinite(res.integral)))
    return res.integral


class TruncatedPlane:
    """The half-plane ``{n.x < delta}`` under a movement law.

    ``delta = inf`` gives the untruncated plane.
    """

    def __init__(self, M, n, delta, spec=DEFAULT_SPEC):
        self.m1, self.m2, self.cop = M.components()
        self.n1, self.n2 = plane_normal(n)
        self.delta = float(delta)
        self.spec = spec
        # count of non-converged quadrature elements since construction
        self.failures = [0]
        self.lo, self.hi = self._u1_range(self.delta)
        if self.n2 == 0 or np.isinf(self.delta):
            self.mass = self.hi - self.lo
        else:
            self.mass = float(integrate(self.cond_mass, 0.0, 1.0, spec, scale=1e-3))
        if not self.mass > 0:
            raise NumericError(f"feasible mass vanished at threshold {delta!r}")

    # -- one-dimensional pieces -------------------------------------------

    def x1(self, u1):
        return self.m1.quantile(u1)

    def _u1_range(self, c):
        """u1 interval on which ``n1 x1 < c`` (only restrictive when n2 = 0)."""
        if self.n2 != 0:
            return 0.0, 1.0
        edge = float(self.m1.cdf(c / self.n1))
        return (0.0, edge) if self.n1 > 0 else (edge, 1.0)

    def cond_mass(self, u1, c=None):
        """P(n.X < c | U1 = u1); ``c`` defaults to the truncation level."""
        c = self.delta if c is None else c
        u1 = _clip_open(u1)
        if np.isinf(c):
            return np.full(np.shape(u1), 1.0 if c > 0 else 0.0)
        if self.n2 == 0:
            return (self.n1 * self.x1(u1) < c).astype(float)
        z = self.m2.cdf((c - self.n1 * self.x1(u1)) / self.n2)
        k = self.cop._cond_cdf(u1, z)
        return k if self.n2 > 0 else 1.0 - k

    def w_range(self, u1, c=None):
        """Interval of conditional levels w with ``n.x < c`` at ``u1``."""
        k = self.cond_mass(u1, c)
        if self.n2 >= 0:
            return np.zeros_like(k), k
        return 1.0 - k, np.ones_like(k)

    def proj(self, u1, w):
        u1 = _clip_open(u1)
        x1 = self.x1(u1)
        if self.n2 == 0:
            return self.n1 * x1 + 0.0 * w
        u2 = _clip_open(self.cop._cond_ppf(u1, _clip_open(w)))
        return self.n1 * x1 + self.n2 * self.m2.quantile(u2)

    def zero_level(self, u1):
        """Conditional level w at which ``n.x = 0`` (n2 != 0)."""
        u1 = _clip_open(u1)
        return self.cop._cond_cdf(u1, self.m2.cdf(-self.n1 * self.x1(u1) / self.n2))

    def first_cdf(self, u1):
        """G(u1): truncated CDF of the first coordinate in probability units."""
        u1 = np.asarray(u1, dtype=float)
        if self.n2 == 0 or np.isinf(self.delta):
            return (np.clip(u1, self.lo, self.hi) - self.lo) / self.mass
        out = integrate(self.cond_mass, np.zeros_like(u1), u1, self.spec, scale=1e-3)
        return np.clip(out / self.mass, 0.0, 1.0)

    # -- selected law -------------------------------------------------------

    def selected_expectation(self, lam, g, split_at_zero=False):
        """E[g(n.M*)] for the best of ``lam`` truncated movements.

        ``g`` must be vectorized. ``split_at_zero`` breaks the inner
        integral where ``n.x = 0`` (for integrands with a kink there).
        """
        spec = self.spec

        def inner(w, u1):
            return g(self.proj(u1, w))

        def weight(u1):
            return lam * self.first_cdf(u1) ** (lam - 1) / self.mass

        if self.n2 == 0:
            def outer(u1):
                return weight(u1) * g(self.n1 * self.x1(_clip_open(u1)))

            pieces = [self.lo, self.hi]
            if split_at_zero:
                z = float(self.m1.cdf(0.0))
                if self.lo < z < self.hi:
                    pieces = [self.lo, z, self.hi]
            return float(sum(integrate(outer, a, b, spec, failures=self.failures)
                             for a, b in zip(pieces[:-1], pieces[1:])))

        def outer(u1):
            a, b = self.w_range(u1)
            if split_at_zero:
                z = np.clip(self.zero_level(u1), a, b)
                val = (integrate(inner, a, z, spec, args=(u1,), scale=1e-2,
                                     failures=self.failures)
                       + integrate(inner, z, b, spec, args=(u1,), scale=1e-2,
                                       failures=self.failures))
            else:
                val = integrate(inner, a, b, spec, args=(u1,), scale=1e-2,
                                failures=self.failures)
            return weight(u1) * val

        return float(integrate(outer, 0.0, 1.0, spec, failures=self.failures))

    def selected_band_mass(self, lam, c_lo, c_hi):
        """P(c_lo < n.M* < c_hi) for the best of ``lam`` truncated movements."""
        c_hi = min(c_hi, self.delta)
        if not c_lo < c_hi:
            return 0.0
        if self.n2 == 0:
            a, b = self._u1_range_between(c_lo, c_hi)
            ga, gb = self.first_cdf(np.array([a, b]))
            return float(gb ** lam - ga ** lam)

        def outer(u1):
            band = self.cond_mass(u1, c_hi) - self.cond_mass(u1, c_lo)
            return lam * self.first_cdf(u1) ** (lam - 1) / self.mass * band

        return float(integrate(outer, 0.0, 1.0, self.spec))

    def _u1_range_between(self, c_lo, c_hi):
        lo1, hi1 = self._u1_range(c_hi)
        lo0, hi0 = self._u1_range(c_lo)
        # n1 > 0: {c_lo < n1 x1 < c_hi} = (F1(c_lo/n1), F1(c_hi/n1))
        if self.n1 > 0:
            a, b = hi0, hi1
        else:
            a, b = lo1, lo0
        a = min(max(a, self.lo), self.hi)
        b = min(max(b, self.lo), self.hi)
        return a, max(a, b)
