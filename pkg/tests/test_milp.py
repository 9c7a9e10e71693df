import math

import highspy
import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from evagg.lp import GE, INFEASIBLE, LE, OPTIMAL, LpProblem, solve_lp
from evagg.milp import NODE_LIMIT, MilpProblem, export_mps, gomory_cuts, import_mps, solve_milp
from evagg.robust import build_single_level
from evagg.verify import random_instance
from oracles import milp_by_fixing, random_milp


def test_knapsack_toy():
    p = LpProblem(np.array([-1.0, -2.0]), np.array([[1.0, 1.0]]), np.array([LE]), np.array([1.0]),
                  np.zeros(2), np.ones(2))
    s = solve_milp(MilpProblem(p, [0, 1]))
    assert s.status == OPTIMAL
    assert s.x.tolist() == [0.0, 1.0]
    assert s.objective == pytest.approx(-2.0)


def test_fixed_binaries_reduce_to_lp():
    rng = np.random.default_rng(4)
    p, bins = random_milp(rng, 5)
    lo, hi = p.lo.copy(), p.hi.copy()
    lo[bins] = hi[bins] = 1.0
    q = p.with_bounds(lo, hi)
    s, r = solve_milp(MilpProblem(q, bins)), solve_lp(q)
    assert s.status == r.status
    if r.status == OPTIMAL:
        assert s.objective == pytest.approx(r.objective)
        assert s.nodes == 1


def test_infeasible_root():
    p = LpProblem(np.array([1.0]), np.array([[1.0], [1.0]]), np.array([GE, LE]), np.array([2.0, 1.0]),
                  np.zeros(1), np.ones(1))
    assert solve_milp(MilpProblem(p, [0])).status == INFEASIBLE


def test_integer_infeasible_after_branching():
    # 0.4 <= x <= 0.6 has LP solutions but no binary one
    p = LpProblem(np.array([1.0]), np.array([[1.0], [1.0]]), np.array([GE, LE]), np.array([0.4, 0.6]),
                  np.zeros(1), np.ones(1))
    s = solve_milp(MilpProblem(p, [0]))
    assert s.status == INFEASIBLE and s.nodes == 3


def test_binary_bounds_validated():
    p = LpProblem(np.array([1.0]), np.zeros((0, 1)), np.array([], dtype="<U1"), np.zeros(0),
                  np.zeros(1), np.array([2.0]))
    with pytest.raises(ValueError):
        MilpProblem(p, [0])
    with pytest.raises(ValueError):
        solve_milp(MilpProblem(p.with_bounds(np.zeros(1), np.ones(1)), [0]), gap_target=-1)


def test_node_limit_returns_incumbent():
    p, bins = random_milp(np.random.default_rng(18), 12)
    full = solve_milp(MilpProblem(p, bins))
    lim = solve_milp(MilpProblem(p, bins), node_limit=2)
    assert full.status == OPTIMAL and full.nodes > 2
    assert lim.status == NODE_LIMIT
    assert lim.objective >= full.objective - 1e-9
    assert lim.bound <= full.objective + 1e-9
    assert lim.gap >= 0


@st.composite
def milps(draw):
    return random_milp(np.random.default_rng(draw(st.integers(0, 2**32 - 1))), 8)


@settings(max_examples=40, deadline=None)
@given(milps())
def test_matches_exhaustive_fixing(case):
    p, bins = case
    s = solve_milp(MilpProblem(p, bins))
    ref = milp_by_fixing(p, bins)
    if math.isinf(ref):
        assert s.status == INFEASIBLE
        return
    assert s.status == OPTIMAL
    assert s.objective == pytest.approx(ref, abs=1e-6)
    assert np.abs(s.x[bins] - np.round(s.x[bins])).max() <= 1e-9
    assert p.primal_residual(s.x) <= 1e-7
    assert s.nodes <= 2 ** (len(bins) + 1) - 1


@settings(max_examples=30, deadline=None)
@given(milps())
def test_lazy_rows_match_full_model(case):
    # hold back half the rows and hand them over only when violated
    p, bins = case
    m = p.n_rows
    keep = np.arange(m) < max(1, m // 2)
    A = p.A.toarray()
    base = LpProblem(p.cost, A[keep], p.senses[keep], p.rhs[keep], p.lo, p.hi)
    held = [(np.flatnonzero(A[i]), A[i][A[i] != 0], p.senses[i], p.rhs[i]) for i in np.flatnonzero(~keep)]

    def lazy(x):
        out = []
        for idx, coef, sense, rhs in held:
            act = float(coef @ x[idx])
            if (sense == LE and act > rhs + 1e-7) or (sense == GE and act < rhs - 1e-7):
                out.append((idx, coef, sense, rhs))
        return out

    full = solve_milp(MilpProblem(p, bins))
    lz = solve_milp(MilpProblem(base, bins), lazy=lazy)
    assert lz.status == full.status
    if full.status == OPTIMAL:
        assert lz.objective == pytest.approx(full.objective, abs=1e-6)
        assert p.primal_residual(lz.x) <= 1e-7


@settings(max_examples=40, deadline=None)
@given(milps())
def test_branching_options_agree(case):
    p, bins = case
    ref = solve_milp(MilpProblem(p, bins), branching="fractional")

    def prefix(x):
        # split on the running count of binaries, where it is fractional
        pre = np.cumsum(x[bins])
        frac = np.flatnonzero(np.abs(pre - np.round(pre)) > 1e-6)
        return None if not frac.size else (bins[: frac[0] + 1], np.ones(frac[0] + 1))

    for kw in ({}, {"root_cuts": 5}, {"brancher": prefix}, {"root_cuts": 3, "branching": "fractional"}):
        s = solve_milp(MilpProblem(p, bins), **kw)
        assert s.status == ref.status
        if ref.status == OPTIMAL:
            assert s.objective == pytest.approx(ref.objective, abs=1e-6)
            assert p.primal_residual(s.x) <= 1e-7


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_gomory_cuts_keep_every_integer_point(seed):
    p, bins = random_milp(np.random.default_rng(seed), 6)
    root = solve_lp(p)
    assume(root.status == OPTIMAL)
    A = p.A.toarray()
    for idx, coef, sense, rhs in gomory_cuts(p, root, bins):
        assert sense == GE
        w = np.zeros(p.n_vars)
        w[idx] = coef
        assert w @ root.x < rhs
        # smallest value of the cut form over the mixed-integer feasible set
        low = milp_by_fixing(LpProblem(w, A, p.senses, p.rhs, p.lo, p.hi), bins)
        assert low >= rhs - 1e-7


def test_unknown_branching_rule_rejected():
    p, bins = random_milp(np.random.default_rng(1), 3)
    with pytest.raises(ValueError):
        solve_milp(MilpProblem(p, bins), branching="random")


def test_mps_roundtrip_exact(tmp_path):
    rng = np.random.default_rng(3)
    for i in range(5):
        p, bins = random_milp(rng, 6)
        m = MilpProblem(p, bins)
        f = tmp_path / f"m{i}.mps"
        export_mps(m, f)
        q = import_mps(f)
        assert (p.A != q.lp.A).nnz == 0
        for name in ("cost", "rhs", "lo", "hi"):
            assert np.array_equal(getattr(p, name), getattr(q.lp, name))
        assert np.array_equal(p.senses, q.lp.senses)
        assert np.array_equal(m.binaries, q.binaries)
        assert q.lp.var_names == p.var_names and q.lp.row_names == p.row_names


def test_mps_counts(tmp_path):
    p = LpProblem(np.array([-1.0, -2.0, 0.5]), np.array([[1.0, 1.0, 0.0], [0.0, 1.0, 1.0]]),
                  np.array([LE, GE]), np.array([1.0, 0.2]), np.zeros(3), np.array([1.0, 1.0, math.inf]))
    f = tmp_path / "toy.mps"
    export_mps(MilpProblem(p, [0, 1]), f)
    lines = f.read_text().splitlines()
    sec = {}
    cur = None
    for ln in lines:
        if ln.startswith("*"):
            continue
        if not ln[0].isspace():
            cur = ln.split()[0]
            continue
        sec.setdefault(cur, []).append(ln)
    assert len(sec["ROWS"]) == 3  # objective + 2
    assert sum("'MARKER'" in ln for ln in sec["COLUMNS"]) == 2
    assert len([ln for ln in sec["COLUMNS"] if "'MARKER'" not in ln]) == 3 + 4  # costs and nonzeros
    assert len(sec["RHS"]) == 2


def test_mps_parse_error_names_line(tmp_path):
    f = tmp_path / "bad.mps"
    f.write_text("NAME X\nROWS\n N  COST\n Q  R1\nENDATA\n")
    with pytest.raises(ValueError, match=":4:"):
        import_mps(f)


def _highs_objective(path):
    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    h.readModel(str(path))
    h.run()
    assert h.getModelStatus() == highspy.HighsModelStatus.kOptimal
    return h.getInfo().objective_function_value


def test_external_solver_reads_robust_model(tmp_path):
    rng = np.random.default_rng(12)
    for i in range(3):
        inst = random_instance(rng, 24)
        m = build_single_level(inst, 0).milp
        f = tmp_path / f"robust{i}.mps"
        export_mps(m, f)
        ours = solve_milp(m).objective
        assert _highs_objective(f) == pytest.approx(ours, rel=1e-7, abs=1e-7)
