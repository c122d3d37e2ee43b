import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from conftest import GAUSS, default_config
from esml.dist_core import ComposedMovement, STANDARD_NORMAL, gumbel_copula
from esml.dist_core.marginals import GaussianMarginal
from esml.errors import DomainError, ResampleExhaustedError
from esml.es_sim import (
    ChainState,
    ConstantStep,
    ConstraintNormal,
    CustomStep,
    ESConfig,
    MovementSource,
    STREAM_DERIVATION,
    generate_offspring,
    read_trace_csv,
    replica_rng,
    resample_movement,
    run_chain,
    run_full_es,
    select_best,
    step,
    write_trace_csv,
)

# 1 / Phi(1) and 1 / sqrt(pi), from 30-digit mpmath evaluations
INV_CDF1 = 1.18857341734506020599211466822
INV_SQRT_PI = 0.564189583547756286948079451561


def source_for(cfg, seed=0):
    return MovementSource(cfg.movement, cfg.n, cfg.d, np.random.default_rng(seed))


class FixedSource:
    """Stand-in movement stream returning a fixed list of feasible rows."""

    def __init__(self, rows, n):
        self.rows = [np.asarray(r, dtype=float) for r in rows]
        self.n = np.asarray(n, dtype=float)

    def resample(self, delta, cap, used=0):
        row = self.rows.pop(0)
        return row, float(row @ self.n), 1


# -- configuration types ----------------------------------------------------


def test_constraint_normal_rules():
    with pytest.raises(DomainError):
        ConstraintNormal((1.0, 1.0, 1.0))
    with pytest.raises(DomainError):
        ConstraintNormal((0.0, 0.0))
    assert ConstraintNormal((1.0, -1.0, 2.0)).d == 3
    assert ConstraintNormal((1.0, 1.0, 0.0)).dot([1.0, 2.0, 3.0]) == 3.0


def test_esconfig_defaults_and_validation():
    cfg = default_config()
    assert cfg.x0 == (-1.0, 0.0)
    assert cfg.sigma0 == 1.0
    assert cfg.resample_cap == 10 ** 6
    with pytest.raises(DomainError):
        default_config(x0=(1.0, 0.0))
    with pytest.raises(DomainError):
        default_config(sigma0=-1.0)
    with pytest.raises(DomainError):
        ConstantStep(0.0)
    assert default_config().config_hash() == default_config().config_hash()
    assert default_config().config_hash() != default_config(seed=1).config_hash()


def test_chain_state_invariants():
    with pytest.raises(DomainError):
        ChainState(0.0, 1.0)
    with pytest.raises(DomainError):
        ChainState(1.0, -1.0)


def test_replica_streams_differ_and_repeat():
    a = replica_rng(3, 0).random(4)
    assert np.array_equal(a, replica_rng(3, 0).random(4))
    assert not np.array_equal(a, replica_rng(3, 1).random(4))
    assert "spawn_key" in STREAM_DERIVATION


# -- resampling -------------------------------------------------------------


def test_resample_postcondition():
    src = source_for(default_config(), 1)
    for _ in range(2000):
        x, j = resample_movement(GAUSS, (1.0, 0.0), 0.5, 10 ** 6, src)
        assert x[0] < 0.5 and j >= 1


@pytest.mark.parametrize("delta,expected,tol", [(1e-9, 2.0, 0.05), (1.0, INV_CDF1, 0.02)])
def test_resample_mean_count(delta, expected, tol):
    src = source_for(default_config(), 2)
    j = np.array([resample_movement(GAUSS, (1.0, 0.0), delta, 10 ** 6, src)[1]
                  for _ in range(100_000)])
    assert abs(j.mean() - expected) < tol
    # geometric law: within 3 standard errors of 1 / mass as well
    p = 1.0 / expected
    assert abs(j.mean() - expected) < 3 * math.sqrt((1 - p) / p ** 2 / j.size)


def test_resample_errors():
    src = source_for(default_config(), 0)
    with pytest.raises(DomainError):
        resample_movement(GAUSS, (1.0, 0.0), 0.0, 10, src)
    with pytest.raises(DomainError):
        resample_movement(GAUSS, (1.0, 0.0), 1.0, 0, src)
    far = ComposedMovement(GaussianMarginal(40.0, 1.0), STANDARD_NORMAL, gumbel_copula(1.0))
    with pytest.raises(ResampleExhaustedError) as info:
        resample_movement(far, (1.0, 0.0), 1.0, 3, np.random.default_rng(0))
    assert info.value.count == 3


def test_resample_exhaustion_reports_count_and_generation():
    far = ComposedMovement(GaussianMarginal(40.0, 1.0), STANDARD_NORMAL, gumbel_copula(1.0))
    cfg = default_config(movement=far, resample_cap=50)
    with pytest.raises(ResampleExhaustedError) as info:
        run_chain(cfg, 5)
    assert info.value.count == 50
    assert info.value.generation == 1
    assert info.value.replica == 0


# -- offspring and selection ------------------------------------------------


def test_generate_offspring_count_and_feasibility():
    cfg = default_config()
    out = generate_offspring(ChainState(0.3, 1.0), cfg, source_for(cfg, 4))
    assert len(out) == 2
    assert all(m[0] < 0.3 and j >= 1 for m, j in out)


def test_generate_offspring_deterministic():
    cfg = default_config(lam=4)
    a = generate_offspring(ChainState(1.0, 1.0), cfg, source_for(cfg, 9))
    b = generate_offspring(ChainState(1.0, 1.0), cfg, source_for(cfg, 9))
    assert all(np.array_equal(x, y) and i == k for (x, i), (y, k) in zip(a, b))


def test_offspring_projection_law():
    cfg = default_config(lam=5)
    src = source_for(cfg, 5)
    state = ChainState(1.0, 1.0)
    proj = np.array([m[0] for _ in range(10_000) for m, _ in generate_offspring(state, cfg, src)])
    cdf1 = STANDARD_NORMAL.cdf(1.0)
    ks = stats.kstest(proj, lambda x: np.minimum(STANDARD_NORMAL.cdf(x) / cdf1, 1.0)).statistic
    assert ks < 0.01


@pytest.mark.parametrize("cands,expected", [
    ([(1.0, 0.0), (2.0, 0.0)], 1),
    ([(3.0, 0.0), (3.0, 0.0)], 0),
    ([(-1.0, 0.0), (-2.0, 0.0), (0.5, 0.0)], 2),
])
def test_select_best_examples(cands, expected):
    assert select_best(cands) == expected


def test_select_best_empty():
    with pytest.raises(DomainError):
        select_best([])


@settings(max_examples=100, deadline=None)
@given(first=st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=8),
       shift=st.floats(-1e3, 1e3), seed=st.integers(0, 2 ** 32 - 1))
def test_select_best_invariances(first, shift, seed):
    rng = np.random.default_rng(seed)
    cands = np.column_stack([first, rng.normal(size=len(first))])
    i = select_best(cands)
    assert cands[i, 0] == max(first)
    assert i == first.index(max(first))
    other = np.column_stack([first, rng.normal(size=len(first)) * 100])
    assert select_best(other) == i
    shifted = cands.copy()
    shifted[:, 0] += shift
    # the shift may merge nearly-equal values; the winner must stay maximal
    j = select_best(shifted)
    assert shifted[j, 0] == shifted[:, 0].max()
    if len(set(shifted[:, 0])) == len(set(first)):
        assert j == i


# -- stepping ---------------------------------------------------------------


def test_step_arithmetic():
    cfg = default_config()
    src = FixedSource([(-0.7, 0.3), (-0.5, 2.0)], (1.0, 0.0))
    nxt, rec = step(ChainState(1.0, 1.0), cfg, src)
    assert rec.selected == 1
    assert rec.n_dot_move == -0.5
    assert nxt.D == 1.5
    assert nxt.Sigma == 1.0
    assert rec.counts == (1, 1)
    assert nxt.t == 2


@settings(max_examples=40, deadline=None)
@given(D=st.floats(1e-6, 50.0), lam=st.integers(1, 6), seed=st.integers(0, 2 ** 32 - 1),
       n=st.sampled_from([(1.0, 0.0), (0.6, 0.8), (-0.5, 1.0), (0.0, -1.0)]))
def test_step_feasibility(D, lam, seed, n):
    cfg = default_config(lam=lam, n=n, x0=tuple(-np.asarray(n)))
    src = source_for(cfg, seed)
    state = ChainState(D, 1.0)
    for _ in range(5):
        nxt, rec = step(state, cfg, src)
        assert rec.n_dot_move < state.D
        assert nxt.D > 0
        assert min(rec.counts) >= 1 and len(rec.counts) == lam
        state = nxt


def test_step_mean_gain_far_from_boundary():
    cfg = default_config()
    src = source_for(cfg, 6)
    start = ChainState(5.0, 1.0)
    gain = np.array([step(start, cfg, src)[0].D - 5.0 for _ in range(100_000)])
    # the mean of the better of two standard normals is 1/sqrt(pi)
    assert abs(gain.mean() + INV_SQRT_PI) < 0.01
    assert abs(gain.mean() + INV_SQRT_PI / 2) > 0.2


def test_custom_step_size_rule():
    def eta(block):
        return 1.5 if block[0, 0, 0] > 0 else 0.5

    cfg = default_config(step=CustomStep(eta, depth=2), lam=3)
    tr = run_full_es(cfg, 300)
    X = np.vstack([np.array(cfg.x0), tr.X])
    ratios = tr.Sigma[1:] / tr.Sigma[:-1]
    assert set(np.round(ratios, 12)) <= {0.5, 1.5}
    D_from_X = -X[:-1] @ cfg.n.array / tr.Sigma
    np.testing.assert_allclose(D_from_X, tr.D, rtol=1e-12, atol=1e-12)
    assert np.all(tr.D > 0)


def test_custom_step_rejects_nonpositive_factor():
    cfg = default_config(step=CustomStep(lambda b: 0.0))
    with pytest.raises(DomainError):
        run_chain(cfg, 3)


# -- runners ----------------------------------------------------------------


def test_run_chain_deterministic():
    cfg = default_config()
    a = run_chain(cfg, 100, 2)
    b = run_chain(cfg, 100, 2)
    assert np.array_equal(a[0].D, b[0].D)
    assert np.array_equal(a[1].movement, b[1].movement)
    assert not np.array_equal(a[0].D, a[1].D)


def test_run_chain_jobs_invariant():
    cfg = default_config()
    a = run_chain(cfg, 200, 4, jobs=1)
    b = run_chain(cfg, 200, 4, jobs=2)
    for x, y in zip(a, b):
        assert x.replica == y.replica
        assert np.array_equal(x.D, y.D) and np.array_equal(x.counts, y.counts)


def test_run_chain_validation():
    with pytest.raises(DomainError):
        run_chain(default_config(), 0)
    with pytest.raises(DomainError):
        run_chain(default_config(), 10, 0)


def test_constant_sigma_trace_properties():
    cfg = default_config(step=ConstantStep(0.7), sigma0=0.7)
    tr = run_chain(cfg, 500, record_x=True)[0]
    assert np.all(tr.Sigma == 0.7)
    assert np.all(tr.D > 0)
    assert np.all(tr.counts >= 1)
    X = np.vstack([np.array(cfg.x0), tr.X])
    np.testing.assert_allclose(-X[:-1] @ cfg.n.array / 0.7, tr.D, rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(tr.D[1:], tr.D[:-1] - tr.n_dot_move[:-1], rtol=1e-12, atol=1e-12)


def test_full_es_feasible_and_progressing():
    cfg = default_config()
    tr = run_full_es(cfg, 10_000)
    assert np.all(-tr.X @ cfg.n.array > 0)
    assert np.mean(np.diff(tr.X[:, 0], prepend=cfg.x0[0])) > 0


@pytest.mark.slow
def test_tail_coordinate_is_random_walk():
    cfg = default_config(d=3, n=(1.0, 0.0, 0.0))
    T, R = 1000, 1000
    tail = np.array([tr.X[-1, 2] for tr in run_chain(cfg, T, R, record_x=True)])
    assert abs(tail.var(ddof=1) / T - 1.0) < 0.1


def test_lambda_one_allowed_in_simulation():
    tr = run_chain(default_config(lam=1), 50)[0]
    assert np.all(tr.selected == 0)


@pytest.mark.slow
def test_homogeneous_transitions(default_D):
    # next-state law from D_t in a narrow bin, early generations vs late ones
    lo, hi = 0.5, 0.6

    def nxt(t0, t1):
        cur, new = default_D[:, t0:t1 - 1].ravel(), default_D[:, t0 + 1:t1].ravel()
        return new[(cur >= lo) & (cur < hi)]

    early, late = nxt(1, 151), nxt(1000, 1150)
    assert min(early.size, late.size) >= 10_000
    assert stats.ks_2samp(early, late).statistic < 0.03


@pytest.mark.slow
def test_disjoint_windows_agree(default_D):
    ks = stats.ks_2samp(default_D[:, 499:999].ravel(), default_D[:, 999:1499].ravel())
    assert ks.statistic < 0.02


# -- serialization ----------------------------------------------------------


def test_csv_round_trip():
    cfg = default_config(d=3, n=(1.0, 0.0, 0.0))
    tr = run_full_es(cfg, 25)
    buf = io.StringIO()
    write_trace_csv(tr, buf)
    text = buf.getvalue()
    lines = text.splitlines()
    header = [ln for ln in lines if not ln.startswith("#")][0]
    assert header == "t,D,Sigma,i_t,j_total,n_dot_move,x1,x2,x3"
    prov, cols = read_trace_csv(io.StringIO(text))
    assert prov["stream_derivation"] == STREAM_DERIVATION
    assert prov["seed"] == str(cfg.seed)
    assert np.array_equal(cols["D"], tr.D)
    assert np.array_equal(cols["n_dot_move"], tr.n_dot_move)
    assert np.array_equal(cols["x3"], tr.X[:, 2])
    assert np.array_equal(cols["j_total"], tr.j_total)
    assert np.array_equal(cols["t"], np.arange(1, 26))
