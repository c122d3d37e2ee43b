"""Statistical convergence checks on simulated traces and the combined
diagnostics report."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from ..errors import DomainError, SampleSizeError


def _finite_or_none(x):
    if isinstance(x, float) and not math.isfinite(x):
        return None
    return x


def _clean(obj):
    """Recursively replace non-finite floats by None so the JSON stays standard."""
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, np.generic):
        return _clean(obj.item())
    return _finite_or_none(obj)


@dataclass
class RateFit:
    """Least-squares fit ``|E V(D_t) - limit| ~ C rho**t``.

    ``mode`` is ``"transient"`` for the decay towards the tail mean,
    ``"growth"`` when the tail itself trends (fit of ``log E V(D_t)``
    over the last half) and ``"none"`` when no transient rises above the
    Monte-Carlo noise.
    """

    rate: float
    r2: float
    points: int
    mode: str

    def to_dict(self):
        return dict(self.__dict__)


def _linfit(t, y):
    slope, icpt, r, _, _ = stats.linregress(t, y)
    return float(slope), float(r * r)


def _log_mean_exp(a, axis=0):
    m = a.max(axis=axis)
    return m + np.log(np.mean(np.exp(a - m), axis=axis))


def geometric_rate_fit(D, alpha, trend, noise_z=3.0):
    """Fit the approach of ``E exp(alpha D_t)`` to its limit.

    ``D`` has shape ``(replicas, T)``. When ``trend`` is true there is no
    limit; the growth rate of ``E exp(alpha D_t)`` over the last half is
    reported instead.
    """
    R, T = D.shape
    t = np.arange(1, T + 1)
    if trend:
        half = slice(T // 2, T)
        slope, r2 = _linfit(t[half], _log_mean_exp(alpha * D[:, half]))
        return RateFit(math.exp(slope), r2, T - T // 2, "growth")
    v = np.exp(alpha * D)
    y = v.mean(axis=0)
    se = v.std(axis=0, ddof=1) / math.sqrt(R)
    tail = v[:, T // 2:].mean()
    dev = np.abs(y - tail)
    # leading run of generations whose deviation exceeds the noise
    above = dev > noise_z * np.maximum(se, 1e-300)
    k = int(np.argmin(above)) if not above.all() else T
    if k < 3:
        return RateFit(float("nan"), float("nan"), k, "none")
    slope, r2 = _linfit(t[:k], np.log(dev[:k]))
    return RateFit(math.exp(slope), r2, k, "transient")


@dataclass
class ErgodicityDiagnostics:
    slices: tuple
    window: int
    ks_slice: float
    ks_window: float
    ks_threshold: float
    window_means: tuple
    rate_fit: RateFit
    cross_seed_means: tuple
    cross_seed_z: float
    z_threshold: float
    replicas: int

    @property
    def stationary(self):
        return self.ks_window < self.ks_threshold

    @property
    def cross_seed_agree(self):
        return self.cross_seed_z < self.z_threshold

    @property
    def converged(self):
        rate_ok = not (self.rate_fit.rate >= 1.0)
        return self.stationary and self.cross_seed_agree and rate_ok

    def to_dict(self):
        d = {k: v for k, v in self.__dict__.items() if k != "rate_fit"}
        d["rate_fit"] = self.rate_fit.to_dict()
        d.update(stationary=self.stationary, cross_seed_agree=self.cross_seed_agree,
                 converged=self.converged)
        return _clean(d)


def ergodicity_diagnostics(traces, alpha=0.1, slices=None, window=500, burn_in=None,
                           ks_threshold=0.02, z_threshold=3.0, min_samples=1000):
    """Convergence proxies for replicas of a constant step-size chain.

    ``slices`` are two 1-based generations (default ``T/2`` and ``T``).
    ``ks_slice`` compares the replica values of ``D`` at exactly those
    generations; ``ks_window`` pools the ``window`` generations ending at
    each slice. The cross-seed check splits the replicas into two halves
    and compares their long-run means of ``D`` (after ``burn_in``,
    default ``T/2``) in units of the pooled standard error.
    """
    if not traces:
        raise DomainError("no traces given")
    D = np.array([tr.D for tr in traces])
    if D.ndim != 2:
        raise DomainError("all traces must have the same length")
    R, T = D.shape
    if R < min_samples:
        raise SampleSizeError(f"{R} replicas per time slice, need at least {min_samples}")
    ta, tb = slices if slices is not None else (T // 2, T)
    if not 1 <= ta < tb <= T:
        raise DomainError(f"slices must satisfy 1 <= first < second <= {T}")
    window = int(min(window, ta, tb - ta))
    if window < 1:
        raise DomainError("window must be >= 1")
    burn_in = T // 2 if burn_in is None else int(burn_in)

    ks_slice = float(stats.ks_2samp(D[:, ta - 1], D[:, tb - 1]).statistic)
    wa = D[:, ta - window:ta].ravel()
    wb = D[:, tb - window:tb].ravel()
    ks_window = float(stats.ks_2samp(wa, wb).statistic)

    per_rep = D[:, burn_in:].mean(axis=1)
    ga, gb = per_rep[:R // 2], per_rep[R // 2:]
    se = math.sqrt(ga.var(ddof=1) / len(ga) + gb.var(ddof=1) / len(gb))
    z = abs(ga.mean() - gb.mean()) / se if se > 0 else float("inf")

    rate = geometric_rate_fit(D, alpha, trend=ks_window >= ks_threshold)
    return ErgodicityDiagnostics(
        (int(ta), int(tb)), window, ks_slice, ks_window, float(ks_threshold),
        (float(wa.mean()), float(wb.mean())), rate,
        (float(ga.mean()), float(gb.mean())), float(z), float(z_threshold), R)


@dataclass
class DiagnosticsReport:
    """Analytic and statistical evidence for geometric ergodicity."""

    delta_infinity: tuple
    beta: float
    drift_curve: object
    kernel_mass_error: float
    ks_stationarity: float
    geometric_rate_fit: tuple
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.delta_infinity[1] < 0:
            raise DomainError("confidence half-width must be non-negative")

    def to_dict(self):
        return _clean({
            "delta_infinity": {"estimate": self.delta_infinity[0],
                               "ci_halfwidth": self.delta_infinity[1]},
            "beta": self.beta,
            "drift_curve": self.drift_curve.to_dict(),
            "kernel_mass_error": self.kernel_mass_error,
            "ks_stationarity": self.ks_stationarity,
            "geometric_rate_fit": {"rate": self.geometric_rate_fit[0],
                                   "r2": self.geometric_rate_fit[1]},
            "details": self.details,
        })
