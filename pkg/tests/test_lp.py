import math

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import assume, given, settings, strategies as st
from scipy.optimize import linprog

from evagg.lp import (
    EQ,
    GE,
    INFEASIBLE,
    LE,
    OPTIMAL,
    UNBOUNDED,
    Basis,
    LpError,
    LpProblem,
    ModelBuilder,
    SimplexOptions,
    dual_values,
    _repair_basis,
    solve_lp,
)
from oracles import bfs_enumeration, random_bounded_lp


def lp(cost, rows, senses, rhs, lo=None, hi=None):
    n = len(cost)
    return LpProblem(np.asarray(cost, float), np.atleast_2d(np.asarray(rows, float)), np.array(senses),
                     np.asarray(rhs, float), np.zeros(n) if lo is None else lo,
                     np.full(n, math.inf) if hi is None else hi)


def test_single_bound_active():
    p = lp([1.0], [[1.0]], [GE], [3.0], hi=np.array([10.0]))
    s = solve_lp(p)
    assert s.status == OPTIMAL
    assert s.x[0] == pytest.approx(3.0)
    assert s.objective == pytest.approx(3.0)
    assert dual_values(s, 0) == pytest.approx(1.0)


def test_symmetric_face():
    s = solve_lp(lp([-1.0, -1.0], [[1.0, 1.0]], [LE], [1.0]))
    assert s.objective == pytest.approx(-1.0)
    assert s.x.sum() == pytest.approx(1.0)
    assert dual_values(s, 0) == pytest.approx(-1.0)


def test_nonbinding_row_has_zero_dual():
    s = solve_lp(lp([1.0, 1.0], [[1.0, 0.0], [1.0, 1.0]], [GE, LE], [2.0, 10.0]))
    assert dual_values(s, 1) == 0.0
    assert dual_values(s, 0) == pytest.approx(1.0)


def test_infeasible_and_unbounded():
    assert solve_lp(lp([1.0], [[1.0], [1.0]], [GE, LE], [2.0, 1.0])).status == INFEASIBLE
    assert solve_lp(lp([-1.0, 0.0], [[1.0, -1.0]], [LE], [1.0])).status == UNBOUNDED


def test_dual_of_non_optimal_raises():
    s = solve_lp(lp([1.0], [[1.0], [1.0]], [GE, LE], [2.0, 1.0]))
    with pytest.raises(ValueError):
        dual_values(s, 0)


def test_free_and_negative_bounds():
    # min x - y, x free, y in [-2, 3], x >= y - 1, x >= -5
    p = lp([1.0, -1.0], [[1.0, -1.0], [1.0, 0.0]], [GE, GE], [-1.0, -5.0],
           lo=np.array([-math.inf, -2.0]), hi=np.array([math.inf, 3.0]))
    s = solve_lp(p)
    assert s.objective == pytest.approx(-1.0)
    assert p.primal_residual(s.x) <= 1e-9


def test_iteration_cap_raises():
    rng = np.random.default_rng(0)
    cost, A, senses, rhs = random_bounded_lp(rng, 6, 10)
    with pytest.raises(LpError):
        solve_lp(lp(cost, A, senses, rhs), options=SimplexOptions(max_iterations=1, crash=False))


def test_malformed_problem_rejected():
    with pytest.raises(ValueError):
        lp([1.0], [[1.0]], ["?"], [1.0])
    with pytest.raises(ValueError):
        lp([1.0], [[1.0]], [LE], [1.0], lo=np.array([2.0]), hi=np.array([1.0]))
    with pytest.raises(ValueError):
        lp([math.nan], [[1.0]], [LE], [1.0])


def test_builder_roundtrip():
    b = ModelBuilder()
    x = b.add_vars(3, 0.0, 1.0, [1.0, 2.0, 3.0], "x")
    r = b.add_row(x, 1.0, GE, 2.0, "cover")
    p = b.build()
    assert p.row_names[r] == "cover"
    assert p.var_names == ["x[0]", "x[1]", "x[2]"]
    assert solve_lp(p).objective == pytest.approx(3.0)


def test_rhs_sensitivity_matches_duals():
    rng = np.random.default_rng(7)
    checked = 0
    for _ in range(40):
        cost, A, senses, rhs = random_bounded_lp(rng, 5, 8)
        p = lp(cost, A, senses, rhs)
        s = solve_lp(p)
        if s.status != OPTIMAL:
            continue
        for i in range(p.n_rows):
            eps = 1e-6
            up = solve_lp(lp(cost, A, senses, rhs + eps * np.eye(p.n_rows)[i]))
            dn = solve_lp(lp(cost, A, senses, rhs - eps * np.eye(p.n_rows)[i]))
            if up.status != OPTIMAL or dn.status != OPTIMAL:
                continue
            slope_up = (up.objective - s.objective) / eps
            slope_dn = (s.objective - dn.objective) / eps
            if abs(slope_up - slope_dn) > 1e-4:
                continue  # degenerate vertex: one-sided slopes differ
            assert s.duals[i] == pytest.approx(slope_up, abs=1e-4)
            checked += 1
    assert checked > 50


def test_warm_start_gives_same_optimum():
    rng = np.random.default_rng(11)
    for _ in range(20):
        cost, A, senses, rhs = random_bounded_lp(rng)
        p = lp(cost, A, senses, rhs)
        s = solve_lp(p)
        if s.status != OPTIMAL:
            continue
        p2 = lp(cost * 1.1 + 0.1, A, senses, rhs)
        cold = solve_lp(p2)
        warm = solve_lp(p2, warm_start=s.basis)
        assert warm.objective == pytest.approx(cold.objective, abs=1e-9)


def test_bad_warm_start_falls_back():
    p = lp([1.0, 1.0], [[1.0, 1.0], [1.0, 1.0]], [GE, GE], [1.0, 1.0])
    s = solve_lp(p, warm_start=Basis(head=np.array([0, 0]), at_upper=np.zeros(4, dtype=bool)))
    assert s.objective == pytest.approx(1.0)


def test_deterministic_output():
    rng = np.random.default_rng(5)
    cost, A, senses, rhs = random_bounded_lp(rng)
    a, b = solve_lp(lp(cost, A, senses, rhs)), solve_lp(lp(cost, A, senses, rhs))
    assert a.status == b.status
    if a.status == OPTIMAL:
        assert np.array_equal(a.x, b.x) and np.array_equal(a.duals, b.duals)


@st.composite
def bounded_lps(draw):
    seed = draw(st.integers(0, 2**32 - 1))
    return random_bounded_lp(np.random.default_rng(seed))


@settings(max_examples=60, deadline=None)
@given(bounded_lps())
def test_matches_vertex_enumeration(case):
    cost, A, senses, rhs = case
    s = solve_lp(lp(cost, A, senses, rhs))
    ref = bfs_enumeration(cost, A, senses, rhs)
    if math.isinf(ref):
        assert s.status == INFEASIBLE
    else:
        assert s.status == OPTIMAL
        assert s.objective == pytest.approx(ref, abs=1e-7)


@st.composite
def general_lps(draw):
    rng = np.random.default_rng(draw(st.integers(0, 2**32 - 1)))
    m, n = int(rng.integers(1, 15)), int(rng.integers(1, 25))
    A = rng.normal(size=(m, n)) * (rng.random((m, n)) < 0.5)
    senses = rng.choice([LE, GE, EQ], m, p=[0.5, 0.3, 0.2])
    lo = np.where(rng.random(n) < 0.15, -math.inf, rng.uniform(-3, 1, n))
    hi = np.where(rng.random(n) < 0.3, math.inf, lo + rng.uniform(0, 4, n))
    hi = np.where(np.isinf(lo) & np.isinf(hi), 5.0, hi)
    x0 = np.clip(rng.normal(size=n), lo, hi)
    act = A @ x0
    rhs = np.where(senses == LE, act + rng.uniform(0, 1, m), np.where(senses == GE, act - rng.uniform(0, 1, m), act))
    return lp(rng.normal(size=n), A, senses, rhs, lo=lo, hi=hi)


@settings(max_examples=60, deadline=None)
@given(general_lps())
def test_optimality_certificates(p):
    s = solve_lp(p)
    r = linprog(p.cost, A_ub=np.vstack([p.A.toarray()[p.senses == LE], -p.A.toarray()[p.senses == GE]]),
                b_ub=np.concatenate([p.rhs[p.senses == LE], -p.rhs[p.senses == GE]]),
                A_eq=p.A.toarray()[p.senses == EQ] if (p.senses == EQ).any() else None,
                b_eq=p.rhs[p.senses == EQ] if (p.senses == EQ).any() else None,
                bounds=list(zip(np.where(np.isinf(p.lo), None, p.lo), np.where(np.isinf(p.hi), None, p.hi))),
                method="highs")
    expected = {0: OPTIMAL, 2: INFEASIBLE, 3: UNBOUNDED}[r.status]
    assert s.status == expected
    if s.status != OPTIMAL:
        return
    assert s.objective == pytest.approx(r.fun, abs=1e-6 * (1 + abs(r.fun)))
    assert p.primal_residual(s.x) <= 1e-7
    assert abs(s.objective - s.dual_objective) <= 1e-6 * (1 + abs(s.objective))
    # dual signs and complementary slackness
    slack = p.rhs - p.A @ s.x
    assert np.all(s.duals[p.senses == GE] >= -1e-9)
    assert np.all(s.duals[p.senses == LE] <= 1e-9)
    assert np.abs(s.duals * slack).max(initial=0) <= 1e-6
    d = s.reduced_costs
    at_lo = np.abs(s.x - p.lo) <= 1e-9
    at_hi = np.abs(s.x - p.hi) <= 1e-9
    interior = ~at_lo & ~at_hi
    assert np.abs(d[interior]).max(initial=0) <= 1e-6
    assert np.all(d[at_lo & ~at_hi] >= -1e-6)
    assert np.all(d[at_hi & ~at_lo] <= 1e-6)


@settings(max_examples=60, deadline=None)
@given(general_lps(), st.integers(0, 2**32 - 1))
def test_dual_reoptimisation_after_bound_changes(p, seed):
    # tighten a few bounds as branching does and re-solve from the old basis
    s = solve_lp(p)
    assume(s.status == OPTIMAL)
    rng = np.random.default_rng(seed)
    lo, hi = p.lo.copy(), p.hi.copy()
    for j in rng.choice(p.n_vars, min(3, p.n_vars), replace=False):
        cut = s.x[j] + rng.uniform(-1, 1)
        if rng.random() < 0.5:
            hi[j] = max(lo[j], min(hi[j], cut))
        else:
            lo[j] = min(hi[j], max(lo[j], cut))
    q = p.with_bounds(lo, hi)
    cold = solve_lp(q, options=SimplexOptions(dual=False))
    warm = solve_lp(q, warm_start=s.basis)
    assert warm.status == cold.status
    if cold.status == OPTIMAL:
        assert warm.objective == pytest.approx(cold.objective, abs=1e-6 * (1 + abs(cold.objective)))
        assert q.primal_residual(warm.x) <= 1e-7


def test_repair_basis_swaps_dependent_columns_for_logicals():
    A = sp.csc_matrix(np.array([[1.0, 2.0, 0.0], [2.0, 4.0, 0.0], [0.0, 0.0, 3.0]]))
    M = sp.hstack([A, sp.identity(3, format="csc")], format="csc")
    head = np.array([0, 1, 2])  # columns 0 and 1 are parallel
    new = _repair_basis(M, head)
    assert len(set(new.tolist())) == 3 and 2 in new
    assert len({0, 1} & set(new.tolist())) == 1
    assert abs(np.linalg.det(M[:, new].toarray())) > 1e-9
