"""Large-distance gain, exponential moments and the exponential drift of
the normalized-distance chain under a constant step size.

Terminology used below:

``delta_infinity``
    ``E[n.X * F1(X1)**(lam-1)]`` for an untruncated movement ``X``. It is
    the expected selected gain divided by ``lam``.
``limit gain``
    ``lam * delta_infinity``, the large-distance limit of the expected
    one-step gain ``E[n.M*]`` of the selected movement.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special
from scipy.integrate import tanhsinh

from ..dist_core.movement import movement_sample, plane_normal
from ..errors import DomainError, InfiniteMomentError, NoBetaFoundError, NumericInconsistencyError
from ..es_sim import sample_selected
from .kernel import _check_delta, _check_lambda
from .quadrature import DEFAULT_SPEC, TruncatedPlane

Z99 = float(special.ndtri(0.995))


def _rng(spec, rng):
    return np.random.default_rng(spec.mc_seed) if rng is None else rng


# ---------------------------------------------------------------------------
# delta_infinity


@dataclass
class DeltaInfinity:
    estimate: float
    ci: float
    quadrature: float
    monte_carlo: float
    mc_samples: int
    lam: int

    @property
    def limit_gain(self):
        return self.lam * self.estimate

    def __iter__(self):
        yield self.estimate
        yield self.ci

    def to_dict(self):
        return {"estimate": self.estimate, "ci_halfwidth": self.ci,
                "quadrature": self.quadrature, "monte_carlo": self.monte_carlo,
                "mc_samples": self.mc_samples, "limit_gain": self.limit_gain}


def delta_infinity_quadrature(M, n, lam, spec=DEFAULT_SPEC):
    _check_lambda(lam)
    plane = TruncatedPlane(M, n, np.inf, spec)
    return plane.selected_expectation(lam, lambda p: p) / lam


def delta_infinity_mc(M, n, lam, samples, rng):
    """Monte-Carlo route: the best of ``lam`` untruncated movements.

    Returns ``(mean, 99% half-width)``, both divided by ``lam``.
    """
    n1, n2 = plane_normal(n)
    x = movement_sample(M, 2, rng, samples * lam).reshape(samples, lam, 2)
    best = x[np.arange(samples), np.argmax(x[:, :, 0], axis=1)]
    p = best @ np.array([n1, n2])
    return float(p.mean() / lam), float(Z99 * p.std(ddof=1) / math.sqrt(samples) / lam)


def delta_infinity(M, n, lam, spec=DEFAULT_SPEC, rng=None):
    """Quadrature value of ``delta_infinity`` confirmed by Monte Carlo.

    Raises ``NumericInconsistencyError`` when the two routes differ by
    more than three 99% half-widths.
    """
    quad = delta_infinity_quadrature(M, n, lam, spec)
    mc, ci = delta_infinity_mc(M, n, lam, spec.mc_samples, _rng(spec, rng))
    if abs(quad - mc) > 3 * ci:
        raise NumericInconsistencyError(
            f"delta_infinity: quadrature {quad!r} vs Monte Carlo {mc!r} (ci {ci!r})")
    return DeltaInfinity(quad, ci, quad, mc, spec.mc_samples, int(lam))


# ---------------------------------------------------------------------------
# exponential moments

SHELL_EDGES = (5.0, 10.0, 20.0, 40.0)


def _box_integral(f, x1a, x1b, x2a, x2b, cuts1, cuts2):
    """Nested tanh-sinh over a rectangle.

    ``cuts1`` are fixed break points for ``x1``; ``cuts2(x1)`` returns
    break points for ``x2`` (arrays broadcasting against ``x1``).
    """

    def inner(x2, x1):
        return f(x1, x2)

    def outer(x1):
        pts = [np.full_like(x1, x2a), np.full_like(x1, x2b)]
        pts += [np.clip(c, x2a, x2b) for c in cuts2(x1)]
        pts = np.sort(np.stack(np.broadcast_arrays(*pts)), axis=0)
        return sum(tanhsinh(inner, a, b, args=(x1,), atol=1e-300, rtol=1e-11).integral
                   for a, b in zip(pts[:-1], pts[1:]))

    pts = [x1a] + sorted(c for c in cuts1 if x1a < c < x1b) + [x1b]
    return float(sum(tanhsinh(outer, a, b, atol=1e-300, rtol=1e-10).integral
                     for a, b in zip(pts[:-1], pts[1:])))


def shell_contributions(M, n, alpha, edges=SHELL_EDGES):
    """Mass of ``exp(|alpha n.x|) h(x)`` on the core box and each square shell."""
    n1, n2 = plane_normal(n)
    m1, m2, _ = M.components()
    med1, med2 = float(m1.quantile(0.5)), float(m2.quantile(0.5))
    # break at the marginal medians and on the kink line n.x = 0
    cuts1 = [med1] + ([0.0] if n2 == 0 else [])

    def cuts2(x1):
        return [np.full_like(x1, med2)] + ([] if n2 == 0 else [-n1 * x1 / n2])

    def f(x1, x2):
        x = np.stack(np.broadcast_arrays(x1, x2), axis=-1)
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            val = np.exp(np.abs(alpha * (n1 * x[..., 0] + n2 * x[..., 1]))) * M.density(x)
        return np.nan_to_num(val, nan=0.0, posinf=np.finfo(float).max)

    def box(a, b, c, d):
        return _box_integral(f, a, b, c, d, cuts1, cuts2)

    k0 = edges[0]
    core = box(-k0, k0, -k0, k0)
    shells = []
    for k, K in zip(edges[:-1], edges[1:]):
        shells.append(box(-K, K, k, K) + box(-K, K, -K, -k)
                      + box(k, K, -k, k) + box(-K, -k, -k, k))
    return core, shells


def exp_moment(M, n, alpha, spec=DEFAULT_SPEC):
    """``E exp(|alpha n.X|)`` for an untruncated movement ``X``.

    The value is the integral over ``[-40, 40]^2``, assembled from a core
    box and square shells ``[-2k, 2k]^2 minus [-k, k]^2``. Divergence is
    flagged (``InfiniteMomentError``) when a shell carries at least as much
    as the one inside it, or when the outermost shell is not negligible
    (above ``spec.rel_tol`` of the total), i.e. finiteness cannot be shown.
    """
    if not alpha > 0:
        raise DomainError(f"alpha must be positive, got {alpha}")
    core, shells = shell_contributions(M, n, alpha)
    for k, (s0, s1) in enumerate(zip(shells, shells[1:])):
        if s1 > 0 and s1 >= s0:
            raise InfiniteMomentError(
                f"exp(|{alpha} n.x|) moment: shell {k + 2} carries {s1!r} "
                f">= shell {k + 1} ({s0!r})")
    total = core + sum(shells)
    if not math.isfinite(total) or shells[-1] > spec.rel_tol * total:
        raise InfiniteMomentError(
            f"exp(|{alpha} n.x|) moment: outermost shell {shells[-1]!r} is not "
            f"negligible against {total!r}")
    return total


# ---------------------------------------------------------------------------
# conditional gain and drift


def conditional_mean(M, n, lam, delta, spec=DEFAULT_SPEC):
    """Expected gain ``E[n.M* | D = delta]`` of the selected movement."""
    _check_lambda(lam)
    _check_delta(delta)
    return TruncatedPlane(M, n, delta, spec).selected_expectation(lam, lambda p: p)


@dataclass
class DriftPoint:
    """``value = E[V(D') | D = delta] - V(delta)`` with ``V = exp(alpha *)``."""

    alpha: float
    delta: float
    value: float
    ratio: float
    mc_ratio: float
    mc_stderr: float

    @property
    def lyapunov(self):
        return math.exp(self.alpha * self.delta)

    def to_dict(self):
        return dict(self.__dict__)


def drift_ratio(M, n, lam, alpha, delta, spec=DEFAULT_SPEC):
    plane = TruncatedPlane(M, n, delta, spec)
    return plane.selected_expectation(lam, lambda p: np.exp(-alpha * p)) - 1.0


def drift(M, n, lam, alpha, delta, spec=DEFAULT_SPEC, rng=None, z=3.0):
    """Quadrature drift confirmed by simulating ``spec.mc_samples`` selections.

    Raises ``NumericInconsistencyError`` if the routes differ by more than
    ``z`` Monte-Carlo standard errors.
    """
    _check_lambda(lam)
    _check_delta(delta)
    if not alpha > 0:
        raise DomainError(f"alpha must be positive, got {alpha}")
    ratio = drift_ratio(M, n, lam, alpha, delta, spec)
    n1, n2 = plane_normal(n)
    x = sample_selected(M, (n1, n2), lam, delta, spec.mc_samples, _rng(spec, rng))
    e = np.exp(-alpha * (x @ np.array([n1, n2])))
    mc = float(e.mean() - 1.0)
    se = float(e.std(ddof=1) / math.sqrt(len(e)))
    if abs(ratio - mc) > z * se:
        raise NumericInconsistencyError(
            f"drift at delta={delta!r}, alpha={alpha!r}: quadrature {ratio!r} vs "
            f"Monte Carlo {mc!r} (stderr {se!r})")
    return DriftPoint(float(alpha), float(delta), math.exp(alpha * delta) * ratio,
                      ratio, mc, se)


@dataclass
class DriftCurve:
    alpha: float
    points: list = field(default_factory=list)

    @property
    def deltas(self):
        return np.array([p.delta for p in self.points])

    @property
    def ratios(self):
        return np.array([p.ratio for p in self.points])

    def to_dict(self):
        return {"alpha": self.alpha, "points": [p.to_dict() for p in self.points]}


def drift_curve(M, n, lam, alpha, deltas, spec=DEFAULT_SPEC, rng=None, family_level=0.0027):
    """Drift over a grid of thresholds.

    The per-point agreement test is Bonferroni-corrected so the whole curve
    has false-alarm probability ``family_level``.
    """
    deltas = [float(d) for d in deltas]
    z = float(-special.ndtri(family_level / (2 * len(deltas))))
    rng = _rng(spec, rng)
    return DriftCurve(float(alpha), [drift(M, n, lam, alpha, d, spec, rng, z) for d in deltas])


# ---------------------------------------------------------------------------
# beta search


def beta_grid(points=400, lo=1e-3, hi=100.0):
    return np.geomspace(lo, hi, points)


@dataclass
class BetaResult:
    beta: float
    limit: float
    bracket: tuple
    grid: np.ndarray
    means: np.ndarray

    def jumps(self, factor=10.0, floor=1e-9):
        """Grid indices where the mean jumps by more than ``factor`` times
        the median of the neighbouring differences."""
        d = np.abs(np.diff(self.means))
        out = []
        for i in range(len(d)):
            nb = np.concatenate([d[max(0, i - 2):i], d[i + 1:i + 3]])
            if d[i] > floor and nb.size and d[i] > factor * max(np.median(nb), floor):
                out.append(i)
        return out

    def to_dict(self):
        return {"beta": self.beta, "limit_gain": self.limit, "bracket": list(self.bracket),
                "grid": self.grid.tolist(), "conditional_mean": self.means.tolist()}


def find_beta(M, n, lam, spec=DEFAULT_SPEC, grid=None, limit=None):
    """Smallest grid threshold beyond which the conditional gain stays in
    ``(2 L / 3, 4 L / 3)``, where ``L`` is the limit gain.

    ``limit`` defaults to ``lam * delta_infinity`` by quadrature.
    """
    _check_lambda(lam)
    grid = beta_grid() if grid is None else np.asarray(grid, dtype=float)
    if limit is None:
        limit = lam * delta_infinity_quadrature(M, n, lam, spec)
    if not limit > 0:
        raise NoBetaFoundError(f"limit gain {limit!r} is not positive")
    lo, hi = 2.0 * limit / 3.0, 4.0 * limit / 3.0
    means = np.array([conditional_mean(M, n, lam, d, spec) for d in grid])
    inside = (means > lo) & (means < hi)
    if not inside[-1]:
        raise NoBetaFoundError(
            f"conditional gain {means[-1]!r} at delta={grid[-1]!r} is outside ({lo!r}, {hi!r})")
    bad = np.nonzero(~inside)[0]
    first = 0 if bad.size == 0 else int(bad[-1]) + 1
    return BetaResult(float(grid[first]), float(limit), (lo, hi), grid, means)
