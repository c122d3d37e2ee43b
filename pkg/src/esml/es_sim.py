"""Exact simulation of the (1, lambda)-ES with resampling on a linear
function under one linear constraint.

Generation ``t`` (1-based, as in the logs) does the following:

1. ``Sigma_t = eta(block_t) * Sigma_{t-1}`` (constant rules skip ``eta``);
2. ``D_t = -n.X_{t-1} / Sigma_t``;
3. each of the ``lam`` offspring draws movements until ``n.M < D_t``;
4. the offspring with the largest first coordinate wins (lowest index on
   ties) and ``X_t = X_{t-1} + Sigma_t * M*``.

For a constant step size this collapses to ``D_{t+1} = D_t - n.M*``.

Random streams: replica ``r`` of a run seeded with ``seed`` draws from
``STREAM_DERIVATION``, i.e. ``SeedSequence(entropy=seed, spawn_key=(r,))``
feeding a PCG64 generator. Offspring index ``i`` is 0-based everywhere.
"""

from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .dist_core.movement import movement_sample
from .errors import DomainError, EsmlError, ResampleExhaustedError

STREAM_DERIVATION = (
    "numpy.random.Generator(PCG64(SeedSequence(entropy=seed, spawn_key=(replica,))))")

DEFAULT_RESAMPLE_CAP = 10 ** 6


def replica_rng(seed, replica=0):
    if seed < 0 or replica < 0:
        raise DomainError("seed and replica index must be non-negative")
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(replica),))
    return np.random.Generator(np.random.PCG64(ss))


# ---------------------------------------------------------------------------
# configuration types


@dataclass(frozen=True)
class ConstraintNormal:
    """Normal vector ``n`` of the constraint ``n.x < 0``.

    When both leading components are positive, all components beyond the
    second must vanish.
    """

    vector: tuple

    def __post_init__(self):
        v = tuple(float(x) for x in np.asarray(self.vector, dtype=float).ravel())
        if len(v) < 2:
            raise DomainError("constraint normal needs dimension >= 2")
        if not all(math.isfinite(x) for x in v):
            raise DomainError("constraint normal must be finite")
        if all(x == 0 for x in v):
            raise DomainError("constraint normal must be nonzero")
        if v[0] > 0 and v[1] > 0 and any(x != 0 for x in v[2:]):
            raise DomainError(
                "constraint normal with both leading components positive must "
                "vanish in every component beyond the second")
        object.__setattr__(self, "vector", v)

    @property
    def d(self):
        return len(self.vector)

    @property
    def array(self):
        return np.array(self.vector)

    def dot(self, x):
        return float(np.dot(self.vector, x))

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.vector, dtype=dtype)


@dataclass(frozen=True)
class ConstantStep:
    sigma: float
    depth = 0

    def __post_init__(self):
        if not (self.sigma > 0 and math.isfinite(self.sigma)):
            raise DomainError(f"constant step size must be positive, got {self.sigma}")

    def next_sigma(self, sigma_prev, block):
        return self.sigma

    def to_dict(self):
        return {"kind": "constant", "sigma": float(self.sigma)}


@dataclass(frozen=True)
class CustomStep:
    """Multiplicative step-size update ``Sigma_t = eta(block) * Sigma_{t-1}``.

    ``eta`` receives the first ``depth`` raw movements of every offspring of
    the generation, as an array of shape ``(lam, depth, d)``. Those same
    movements are then used as the first resampling attempts, so ``eta``
    really is a function of the generation's movement collection.
    """

    eta: Callable[[np.ndarray], float]
    depth: int = 1

    def __post_init__(self):
        if self.depth < 1:
            raise DomainError("custom step rule needs depth >= 1")

    def next_sigma(self, sigma_prev, block):
        f = float(self.eta(block))
        if not (f > 0 and math.isfinite(f)):
            raise DomainError(f"step-size factor must be a positive real, got {f}")
        return f * sigma_prev

    def to_dict(self):
        name = f"{getattr(self.eta, '__module__', '?')}:{getattr(self.eta, '__qualname__', repr(self.eta))}"
        return {"kind": "custom", "eta": name, "depth": int(self.depth)}


StepSizeRule = ConstantStep | CustomStep


@dataclass(frozen=True)
class ESConfig:
    d: int
    lam: int
    n: ConstraintNormal
    movement: object
    step: StepSizeRule = field(default_factory=lambda: ConstantStep(1.0))
    x0: tuple | None = None
    sigma0: float | None = None
    resample_cap: int = DEFAULT_RESAMPLE_CAP
    seed: int = 0

    def __post_init__(self):
        if not isinstance(self.n, ConstraintNormal):
            object.__setattr__(self, "n", ConstraintNormal(self.n))
        if self.d < 2:
            raise DomainError(f"dimension must be >= 2, got {self.d}")
        if self.lam < 1:
            raise DomainError(f"population size must be >= 1, got {self.lam}")
        if self.n.d != self.d:
            raise DomainError(f"constraint normal has dimension {self.n.d}, expected {self.d}")
        if self.x0 is None:
            nv = self.n.array
            x0 = -nv / float(nv @ nv)
        else:
            x0 = np.asarray(self.x0, dtype=float).ravel()
        if x0.size != self.d:
            raise DomainError(f"x0 has dimension {x0.size}, expected {self.d}")
        if not -self.n.dot(x0) > 0:
            raise DomainError("initial point must be strictly feasible: -n.x0 > 0")
        object.__setattr__(self, "x0", tuple(float(v) for v in x0))
        sigma0 = self.sigma0
        if sigma0 is None:
            sigma0 = self.step.sigma if isinstance(self.step, ConstantStep) else 1.0
        if not (sigma0 > 0 and math.isfinite(sigma0)):
            raise DomainError(f"initial step size must be positive, got {sigma0}")
        object.__setattr__(self, "sigma0", float(sigma0))
        if self.resample_cap < 1:
            raise DomainError("resample cap must be >= 1")
        if self.seed < 0:
            raise DomainError("seed must be non-negative")

    def to_dict(self):
        return {
            "d": self.d, "lambda": self.lam, "n": list(self.n.vector),
            "movement": self.movement.to_dict(), "step_size": self.step.to_dict(),
            "x0": list(self.x0), "sigma0": self.sigma0,
            "resample_cap": self.resample_cap, "seed": self.seed,
        }

    def config_hash(self):
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


# ---------------------------------------------------------------------------
# chain state and records


@dataclass(frozen=True)
class ChainState:
    """Chain point ``(D_t, Sigma_t)`` entering generation ``t``.

    ``X`` is the parent ``X_{t-1}`` when the full process is tracked;
    ``pending`` holds raw movements already drawn for ``eta`` (custom
    step rules only).
    """

    D: float
    Sigma: float
    X: np.ndarray | None = None
    pending: tuple | None = None
    t: int = 1

    def __post_init__(self):
        if not self.D > 0:
            raise DomainError(f"normalized distance must be positive, got {self.D}")
        if not self.Sigma > 0:
            raise DomainError(f"step size must be positive, got {self.Sigma}")


@dataclass(frozen=True)
class GenerationRecord:
    t: int
    D: float
    Sigma: float
    selected: int
    counts: tuple
    n_dot_move: float
    movement: np.ndarray
    X: np.ndarray | None = None

    @property
    def j_total(self):
        return sum(self.counts)


# ---------------------------------------------------------------------------
# movement stream


class MovementSource:
    """Buffered i.i.d. movement stream for one chain.

    Movements are drawn in chunks and handed out in order, which leaves the
    law of every resampled sequence unchanged. Not thread-safe; give each
    replica its own source.
    """

    def __init__(self, movement, n, d, rng, chunk=64, max_chunk=4096):
        self.movement = movement
        self.n = n if isinstance(n, ConstraintNormal) else ConstraintNormal(n)
        if self.n.d != d:
            raise DomainError("constraint normal and movement dimension differ")
        self.d = d
        self.rng = rng
        self._nvec = self.n.array
        self._chunk = int(chunk)
        self._max_chunk = int(max_chunk)
        self._buf = np.empty((0, d))
        self._proj = []
        self._pos = 0
        self.drawn = 0

    def _refill(self):
        self._buf = movement_sample(self.movement, self.d, self.rng, self._chunk)
        self._proj = (self._buf @ self._nvec).tolist()
        self._pos = 0
        self._chunk = min(2 * self._chunk, self._max_chunk)

    def draw_block(self, count):
        """Next ``count`` raw movements and their projections on ``n``."""
        rows, proj = [], []
        for _ in range(count):
            if self._pos == len(self._proj):
                self._refill()
            rows.append(self._buf[self._pos])
            proj.append(self._proj[self._pos])
            self._pos += 1
        self.drawn += count
        return np.array(rows).reshape(count, self.d), proj

    def resample(self, delta, cap, used=0):
        """Draw until ``n.M < delta``; returns ``(movement, n.M, attempts)``."""
        j = used
        proj = self._proj
        pos = self._pos
        while j < cap:
            if pos == len(proj):
                self.drawn += pos - self._pos
                self._refill()
                proj = self._proj
                pos = 0
            p = proj[pos]
            pos += 1
            j += 1
            if p < delta:
                self.drawn += pos - self._pos
                self._pos = pos
                return self._buf[pos - 1], p, j
        self.drawn += pos - self._pos
        self._pos = pos
        raise ResampleExhaustedError(j, delta)


def _as_source(rng, movement, n, d=None):
    if isinstance(rng, MovementSource):
        if rng.movement != movement:
            raise DomainError("movement source was built for a different distribution")
        return rng
    nvec = n if isinstance(n, ConstraintNormal) else ConstraintNormal(n)
    return MovementSource(movement, nvec, d or nvec.d, rng, chunk=1, max_chunk=64)


# ---------------------------------------------------------------------------
# operations


def resample_movement(M, n, delta, cap, rng):
    """Draw movements until one satisfies ``n.x < delta``.

    ``rng`` is a ``MovementSource`` (preferred for repeated calls) or a
    numpy ``Generator``. Returns ``(x, j)`` with ``j`` the number of draws.
    """
    if not delta > 0:
        raise DomainError(f"resampling threshold must be positive, got {delta}")
    if cap < 1:
        raise DomainError("resample cap must be >= 1")
    source = _as_source(rng, M, n)
    x, _, j = source.resample(delta, cap)
    return x.copy(), j


def generate_offspring(state, cfg, source):
    """Resample ``lam`` feasible movements against threshold ``state.D``.

    Returns a list of ``(movement, j)`` pairs.
    """
    return [(m, j) for m, _, j in _offspring(state, cfg, source)]


def _offspring(state, cfg, source):
    delta = state.D
    cap = cfg.resample_cap
    out = []
    if state.pending is None:
        for _ in range(cfg.lam):
            out.append(source.resample(delta, cap))
        return out
    block, proj = state.pending
    depth = block.shape[1]
    for i in range(cfg.lam):
        for k in range(depth):
            if proj[i][k] < delta:
                out.append((block[i, k], proj[i][k], k + 1))
                break
        else:
            out.append(source.resample(delta, cap, used=depth))
    return out


def select_best(candidates):
    """Index of the largest first coordinate; the lowest index wins ties."""
    best_i = -1
    best = 0.0
    for i, c in enumerate(candidates):
        v = c[0]
        if best_i < 0 or v > best:
            best_i, best = i, v
    if best_i < 0:
        raise DomainError("cannot select from an empty population")
    return best_i


def _advance_sigma(cfg, sigma, source):
    if cfg.step.depth == 0:
        return cfg.step.next_sigma(sigma, None), None
    rows, proj = source.draw_block(cfg.lam * cfg.step.depth)
    block = rows.reshape(cfg.lam, cfg.step.depth, cfg.d)
    proj = [proj[i * cfg.step.depth:(i + 1) * cfg.step.depth] for i in range(cfg.lam)]
    return cfg.step.next_sigma(sigma, block), (block, proj)


def initial_state(cfg, source, track_x=False):
    x0 = np.array(cfg.x0)
    sigma1, pending = _advance_sigma(cfg, cfg.sigma0, source)
    d1 = -cfg.n.dot(x0) / sigma1
    return ChainState(d1, sigma1, x0 if track_x else None, pending, 1)


def step(state, cfg, source):
    """One generation; returns ``(next_state, record)``."""
    offspring = _offspring(state, cfg, source)
    i = select_best([m for m, _, _ in offspring])
    best, nm, _ = offspring[i]
    best = best.copy()
    gap = state.D - nm
    x_new = None if state.X is None else state.X + state.Sigma * best
    sigma_new, pending = _advance_sigma(cfg, state.Sigma, source)
    rec = GenerationRecord(state.t, state.D, state.Sigma, i,
                           tuple(j for _, _, j in offspring), nm, best, x_new)
    nxt = ChainState(gap * state.Sigma / sigma_new, sigma_new, x_new, pending, state.t + 1)
    return nxt, rec


# ---------------------------------------------------------------------------
# traces


@dataclass
class Trace:
    """Per-generation log of one replica (row ``k`` is generation ``k + 1``)."""

    D: np.ndarray
    Sigma: np.ndarray
    selected: np.ndarray
    counts: np.ndarray
    n_dot_move: np.ndarray
    movement: np.ndarray
    X: np.ndarray | None
    x0: tuple
    seed: int
    replica: int
    config_hash: str
    stream: str = STREAM_DERIVATION

    @property
    def T(self):
        return len(self.D)

    @property
    def t(self):
        return np.arange(1, self.T + 1)

    @property
    def j_total(self):
        return self.counts.sum(axis=1)

    def provenance(self):
        return {"config_hash": self.config_hash, "seed": self.seed,
                "replica": self.replica, "stream_derivation": self.stream}


def _run(cfg, T, source, replica, track_x, cfg_hash):
    lam, d = cfg.lam, cfg.d
    D = np.empty(T)
    Sigma = np.empty(T)
    sel = np.empty(T, dtype=np.int64)
    counts = np.empty((T, lam), dtype=np.int64)
    ndm = np.empty(T)
    mov = np.empty((T, d))
    X = np.empty((T, d)) if track_x else None
    state = initial_state(cfg, source, track_x)
    for k in range(T):
        try:
            state, rec = step(state, cfg, source)
        except EsmlError as err:
            err.generation = k + 1
            err.replica = replica
            raise
        D[k] = rec.D
        Sigma[k] = rec.Sigma
        sel[k] = rec.selected
        counts[k] = rec.counts
        ndm[k] = rec.n_dot_move
        mov[k] = rec.movement
        if track_x:
            X[k] = rec.X
    return Trace(D, Sigma, sel, counts, ndm, mov, X, cfg.x0, cfg.seed, replica, cfg_hash)


def _run_replica(args):
    cfg, T, replica, track_x, cfg_hash = args
    source = MovementSource(cfg.movement, cfg.n, cfg.d, replica_rng(cfg.seed, replica))
    return _run(cfg, T, source, replica, track_x, cfg_hash)


def run_chain(cfg, T, replicas=1, jobs=1, record_x=False):
    """Independent replicas of length ``T``; output order never depends on ``jobs``."""
    if T < 1 or replicas < 1:
        raise DomainError("T and replicas must be >= 1")
    h = cfg.config_hash()
    work = [(cfg, T, r, record_x, h) for r in range(replicas)]
    if jobs <= 1 or replicas == 1:
        return [_run_replica(w) for w in work]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_run_replica, work, chunksize=max(1, replicas // (4 * jobs))))


def run_full_es(cfg, T, rng=None):
    """Single run logging the full d-dimensional trajectory ``X_t``."""
    if T < 1:
        raise DomainError("T must be >= 1")
    rng = replica_rng(cfg.seed, 0) if rng is None else rng
    source = rng if isinstance(rng, MovementSource) else MovementSource(
        cfg.movement, cfg.n, cfg.d, rng)
    return _run(cfg, T, source, 0, True, cfg.config_hash())


# ---------------------------------------------------------------------------
# vectorized samplers (simulation oracles for the analytic layer)


def sample_resampled(M, n, delta, size, rng, d=None):
    """``size`` feasible movements (``n.x < delta``) by batched rejection."""
    nvec = n.array if isinstance(n, ConstraintNormal) else np.asarray(n, dtype=float)
    d = d or nvec.size
    out = []
    have = 0
    rate = 0.5
    while have < size:
        need = size - have
        batch = int(need / max(rate, 1e-3) * 1.1) + 16
        x = movement_sample(M, d, rng, batch)
        ok = x[(x @ nvec) < delta]
        rate = max(len(ok) / batch, 1e-3)
        out.append(ok[:need])
        have += min(len(ok), need)
    return np.concatenate(out)


def sample_selected(M, n, lam, delta, size, rng, d=None):
    """``size`` selected movements at fixed threshold ``delta``."""
    x = sample_resampled(M, n, delta, size * lam, rng, d).reshape(size, lam, -1)
    idx = np.argmax(x[:, :, 0], axis=1)
    return x[np.arange(size), idx]


# ---------------------------------------------------------------------------
# CSV serialization

CSV_COLUMNS = ("t", "D", "Sigma", "i_t", "j_total", "n_dot_move")


def _fmt(x):
    return format(float(x), ".17g")


def write_trace_csv(trace, fh, provenance=None, include_x=None):
    """Write a trace as CSV; provenance lines are ``#``-prefixed comments."""
    include_x = trace.X is not None if include_x is None else include_x
    for key, val in (provenance or trace.provenance()).items():
        fh.write(f"# {key}: {val}\n")
    cols = list(CSV_COLUMNS)
    if include_x:
        cols += [f"x{k + 1}" for k in range(trace.X.shape[1])]
    fh.write(",".join(cols) + "\n")
    jt = trace.j_total
    for k in range(trace.T):
        row = [str(k + 1), _fmt(trace.D[k]), _fmt(trace.Sigma[k]), str(int(trace.selected[k])),
               str(int(jt[k])), _fmt(trace.n_dot_move[k])]
        if include_x:
            row += [_fmt(v) for v in trace.X[k]]
        fh.write(",".join(row) + "\n")


def read_trace_csv(fh):
    """Parse a trace CSV into ``(provenance, columns)``."""
    prov = {}
    header = None
    rows = []
    for line in fh:
        line = line.rstrip("\n")
        if not line:
            continue
        if line.startswith("#"):
            key, _, val = line[1:].strip().partition(": ")
            prov[key] = val
        elif header is None:
            header = line.split(",")
        else:
            rows.append([float(v) for v in line.split(",")])
    data = np.array(rows).reshape(len(rows), len(header))
    return prov, {name: data[:, k] for k, name in enumerate(header)}
