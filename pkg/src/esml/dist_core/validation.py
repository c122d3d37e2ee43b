"""Quadrature checks on copulas: normalization, Kendall's tau and
agreement between the density and finite differences of the CDF."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import tanhsinh

from .copulas import ArchimedeanCopula, GumbelGenerator, ProductCopula, _clip_open


def _square_integral(f, atol=1e-14, rtol=1e-12):
    """Integral of ``f(u, v)`` over the unit square.

    The inner integral is split on the diagonal, where Archimedean and
    Gaussian densities concentrate.
    """

    def inner(v, u):
        return np.nan_to_num(f(_clip_open(u), _clip_open(v)), nan=0.0, posinf=0.0)

    def outer(u):
        lo = tanhsinh(inner, 0.0, u, args=(u,), atol=atol, rtol=rtol).integral
        hi = tanhsinh(inner, u, 1.0, args=(u,), atol=atol, rtol=rtol).integral
        return lo + hi

    res = tanhsinh(outer, 0.0, 1.0, atol=10 * atol, rtol=10 * rtol)
    return float(res.integral), float(res.error)


def density_integral(c):
    """Integral of the copula density over the unit square (should be 1)."""
    return _square_integral(c._density)[0]


def kendall_tau(c):
    """Kendall's tau as ``4 E[C(U, V)] - 1`` by quadrature."""
    val, _ = _square_integral(lambda u, v: c._cdf(u, v) * c._density(u, v))
    return 4.0 * val - 1.0


def interior_grid(k, lo=0.05, hi=0.95):
    return np.linspace(lo, hi, k)


def mixed_difference(cdf, u, v, h):
    """Centered second mixed difference of ``cdf`` at ``(u, v)``."""
    return (cdf(u + h, v + h) - cdf(u + h, v - h)
            - cdf(u - h, v + h) + cdf(u - h, v - h)) / (4.0 * h * h)


def density_fd_error(c, k=9, h=1e-4):
    """Max relative error between the density and a finite difference of C on a k x k grid."""
    g = interior_grid(k)
    u, v = np.meshgrid(g, g, indexing="ij")
    fd = mixed_difference(c._cdf, u, v, h)
    dens = c._density(u, v)
    return float(np.max(np.abs(fd - dens) / np.abs(dens)))


def ratio_form_density(g, u, v):
    """``psi''(s) / psi'(s)`` with ``s = psi^-1(u) + psi^-1(v)``.

    A tempting shortcut for Archimedean densities that is *not* the mixed
    derivative of C; kept only so its deviation can be reported.
    """
    s = g.psi_inverse(u) + g.psi_inverse(v)
    return g.psi_second(s) / g.psi_prime(s)


def gumbel_alternative_density(theta, u, v):
    """Gumbel density variant with last factor ``1 - (theta-1)/(theta*S)``.

    ``S = (-ln u)**theta + (-ln v)**theta``. The exact density carries
    ``1 + (theta-1) S**(-1/theta)`` instead; the two agree only at theta=1.
    """
    a = -np.log(u)
    b = -np.log(v)
    s = a ** theta + b ** theta
    cdf = np.exp(-s ** (1.0 / theta))
    shape = (a * b / s ** (2.0 / theta)) ** (theta - 1.0)
    return cdf / (u * v) * shape * (1.0 - (theta - 1.0) / (theta * s))


@dataclass
class CopulaReport:
    """Numerical health report for one copula."""

    copula: dict
    density_integral: float
    kendall_tau: float
    fd_max_rel_error: float
    fd_grid: int
    fd_step: float
    product_max_abs_diff: float | None = None
    ratio_form_max_rel_dev: float | None = None
    alternative_form_max_rel_dev: float | None = None
    kendall_tau_closed_form: float | None = None
    extra: dict = field(default_factory=dict)

    def to_dict(self):
        return {k: v for k, v in self.__dict__.items()}


def validate_copula(c, k=9, h=1e-4):
    """Run every quadrature/finite-difference check on ``c``."""
    rep = CopulaReport(
        copula=c.to_dict(),
        density_integral=density_integral(c),
        kendall_tau=kendall_tau(c),
        fd_max_rel_error=density_fd_error(c, k, h),
        fd_grid=k, fd_step=h)
    if isinstance(c, ArchimedeanCopula) and isinstance(c.generator, GumbelGenerator):
        theta = c.generator.theta
        g = interior_grid(k)
        u, v = np.meshgrid(g, g, indexing="ij")
        dens = c._density(u, v)
        prod = ProductCopula()
        rep.kendall_tau_closed_form = 1.0 - 1.0 / theta
        rep.product_max_abs_diff = float(np.max(np.abs(c._cdf(u, v) - prod._cdf(u, v))))
        rep.ratio_form_max_rel_dev = float(np.max(
            np.abs(ratio_form_density(c.generator, u, v) - dens) / dens))
        rep.alternative_form_max_rel_dev = float(np.max(
            np.abs(gumbel_alternative_density(theta, u, v) - dens) / dens))
    return rep
