"""Densities of resampled and selected movements and the transition kernel
of the normalized distance."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..dist_core.movement import plane_normal
from ..errors import DomainError
from .quadrature import DEFAULT_SPEC, TruncatedPlane


def _check_delta(delta):
    if not delta > 0:
        raise DomainError(f"threshold must be positive, got {delta}")


def _check_lambda(lam):
    if int(lam) != lam or lam < 2:
        raise DomainError(f"analysis operations need an integer population size >= 2, got {lam}")


def _points(x):
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != 2:
        raise DomainError("points must be 2-vectors")
    return x


def _out(v):
    v = np.asarray(v, dtype=float)
    return float(v) if v.ndim == 0 else v


def resampled_density(M, n, delta, x, spec=DEFAULT_SPEC):
    """Density of one feasible movement: ``h(x) 1{n.x < delta} / H(n.x < delta)``."""
    _check_delta(delta)
    n1, n2 = plane_normal(n)
    x = _points(x)
    mass = M.halfspace_mass(n1, n2, float(delta))
    inside = x[..., 0] * n1 + x[..., 1] * n2 < delta
    return _out(np.where(inside, M.density(x) / mass, 0.0))


def selection_marginal_cdf(M, n, delta, x1, spec=DEFAULT_SPEC):
    """P(X1 < x1) for one feasible movement, ``X1`` its first coordinate."""
    _check_delta(delta)
    plane = TruncatedPlane(M, n, delta, spec)
    return _out(plane.first_cdf(plane.m1.cdf(np.asarray(x1, dtype=float))))


def selected_density(M, n, lam, delta, x, spec=DEFAULT_SPEC):
    """Density of the movement that wins selection among ``lam`` feasible ones."""
    _check_lambda(lam)
    _check_delta(delta)
    x = _points(x)
    plane = TruncatedPlane(M, n, delta, spec)
    inside = x[..., 0] * plane.n1 + x[..., 1] * plane.n2 < delta
    first = plane.first_cdf(plane.m1.cdf(x[..., 0]))
    val = lam * M.density(x) / plane.mass * first ** (lam - 1)
    return _out(np.where(inside, val, 0.0))


def selected_first_cdf(M, n, lam, delta, x1, spec=DEFAULT_SPEC):
    """CDF of the selected movement's first coordinate (the max of ``lam``)."""
    _check_lambda(lam)
    plane = TruncatedPlane(M, n, delta, spec)
    return _out(plane.first_cdf(plane.m1.cdf(np.asarray(x1, dtype=float))) ** lam)


def transition_prob(M, n, lam, delta, interval, spec=DEFAULT_SPEC):
    """P(a < D' < b | D = delta) with ``D' = delta - n.M*``."""
    _check_lambda(lam)
    _check_delta(delta)
    a, b = map(float, interval)
    if not a < b:
        raise DomainError(f"interval needs a < b, got ({a}, {b})")
    plane = TruncatedPlane(M, n, delta, spec)
    return plane.selected_band_mass(lam, delta - b, delta - a)


@dataclass
class ContinuityRow:
    eps: float
    below: float
    above: float

    @property
    def worst(self):
        return max(self.below, self.above)


@dataclass
class ContinuityProbe:
    delta: float
    interval: tuple
    base: float
    rows: list

    @property
    def monotone(self):
        """Differences shrink (up to quadrature noise) as eps decreases."""
        rows = sorted(self.rows, key=lambda r: -r.eps)
        return all(r2.worst <= r1.worst + 1e-9 for r1, r2 in zip(rows, rows[1:]))

    def to_dict(self):
        return {"delta": self.delta, "interval": list(self.interval), "base": self.base,
                "monotone": self.monotone,
                "rows": [{"eps": r.eps, "below": r.below, "above": r.above} for r in self.rows]}


def kernel_continuity_probe(M, n, lam, delta, interval, eps_list=(1e-1, 1e-2, 1e-3, 1e-4),
                            spec=DEFAULT_SPEC):
    """Table of ``|P(delta -+ eps, A) - P(delta, A)|`` over ``eps_list``."""
    if any(delta - e <= 0 for e in eps_list):
        raise DomainError("every probed threshold delta - eps must be positive")
    base = transition_prob(M, n, lam, delta, interval, spec)
    rows = []
    for e in eps_list:
        if e == 0:
            rows.append(ContinuityRow(0.0, 0.0, 0.0))
            continue
        lo = transition_prob(M, n, lam, delta - e, interval, spec)
        hi = transition_prob(M, n, lam, delta + e, interval, spec)
        rows.append(ContinuityRow(float(e), abs(lo - base), abs(hi - base)))
    return ContinuityProbe(float(delta), tuple(map(float, interval)), base, rows)
