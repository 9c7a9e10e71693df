"""Best-bound branch-and-bound over binary variables, built on :mod:`evagg.lp`."""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .lp import EQ, GE, INFEASIBLE, LE, OPTIMAL, UNBOUNDED, Basis, LpError, LpProblem, SimplexOptions, solve_lp

NODE_LIMIT = "node_limit"
INT_TOL = 1e-6
# reliability branching: strong-branch a binary until it has this many
# pseudocost observations per side, at most MAX_PROBES candidates per node
RELIABLE = 2
MAX_PROBES = 8


@dataclass
class MilpProblem:
    lp: LpProblem
    binaries: np.ndarray

    def __post_init__(self):
        self.binaries = np.asarray(self.binaries, dtype=int)
        if self.binaries.size:
            if self.binaries.min() < 0 or self.binaries.max() >= self.lp.n_vars:
                raise ValueError("binary index out of range")
            if np.any(self.lp.lo[self.binaries] < 0) or np.any(self.lp.hi[self.binaries] > 1):
                raise ValueError("binary variables must have bounds within [0, 1]")


@dataclass
class MilpSolution:
    status: str
    x: Optional[np.ndarray] = None
    objective: float = math.nan
    bound: float = math.nan
    gap: float = math.nan
    nodes: int = 0
    lp_iterations: int = 0

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


def relative_gap(incumbent: float, bound: float) -> float:
    if not math.isfinite(incumbent):
        return math.inf
    return max(0.0, incumbent - bound) / max(1.0, abs(incumbent))


def stack(lp: LpProblem, rows, prefix: str = "local") -> LpProblem:
    """``lp`` with ``rows`` (idx, coef, sense, rhs) appended."""
    m, n = lp.n_rows, lp.n_vars
    data, ri, ci = [], [], []
    for k, (idx, coef, _, _) in enumerate(rows):
        idx = np.asarray(idx, dtype=int)
        ci.extend(idx)
        ri.extend([k] * len(idx))
        data.extend(np.broadcast_to(np.asarray(coef, dtype=float), idx.shape))
    extra = sp.csr_matrix((data, (ri, ci)), shape=(len(rows), n))
    return LpProblem(
        cost=lp.cost, A=sp.vstack([lp.A, extra], format="csr"),
        senses=np.concatenate([lp.senses, [r[2] for r in rows]]),
        rhs=np.concatenate([lp.rhs, [float(r[3]) for r in rows]]),
        lo=lp.lo, hi=lp.hi, var_names=lp.var_names,
        row_names=list(lp.row_names) + [f"{prefix}{m + k}" for k in range(len(rows))],
    )


def gomory_cuts(lp: LpProblem, sol, bins, max_cuts: int = 50, away: float = 0.01, max_dynamism: float = 1e8):
    """Gomory mixed-integer cuts read off the optimal tableau of ``sol``.

    Only binaries count as integer; logicals and every other column are
    treated as continuous. Coefficients too small to keep are dropped only
    against a finite range and the rhs is relaxed by what they could
    contribute, so rounding never makes a cut invalid. Returns rows
    ``(idx, coef, GE, rhs)`` violated by ``sol.x``.
    """
    m, n = lp.n_rows, lp.n_vars
    N = n + m
    head = np.asarray(sol.basis.head)
    M = sp.hstack([lp.A.tocsc(), sp.identity(m, format="csc")], format="csc")
    lo = np.concatenate([lp.lo, np.where(lp.senses == GE, -math.inf, 0.0)])
    hi = np.concatenate([lp.hi, np.where(lp.senses == LE, math.inf, 0.0)])
    x = np.concatenate([sol.x, lp.rhs - lp.A @ sol.x])
    is_int = np.zeros(N, dtype=bool)
    is_int[bins] = True
    nonbasic = np.ones(N, dtype=bool)
    nonbasic[head] = False
    upper = nonbasic & np.asarray(sol.basis.at_upper, dtype=bool)
    lower = nonbasic & ~upper & np.isfinite(lo)
    free = nonbasic & ~upper & ~lower
    active = nonbasic & (lo < hi)
    bound = np.where(upper, hi, lo)
    span = hi - lo

    rows = [r for r, j in enumerate(head) if is_int[j]]
    frac = {r: x[head[r]] - math.floor(x[head[r]]) for r in rows}
    rows = [r for r in rows if away <= frac[r] <= 1 - away]
    rows.sort(key=lambda r: abs(frac[r] - 0.5))
    if not rows:
        return []
    try:
        lu = splu(M[:, head].tocsc())
    except RuntimeError:
        return []
    MT = M.T.tocsr()
    cuts = []
    for r in rows[:max_cuts]:
        e = np.zeros(m)
        e[r] = 1.0
        abar = MT @ lu.solve(e, trans="T")
        abar[~active] = 0.0
        abar[np.abs(abar) < 1e-11] = 0.0
        if np.any(abar[free]):
            continue
        a = np.where(upper, -abar, abar)
        f0 = frac[r]
        g = np.zeros(N)
        fi = a - np.floor(a)
        ii = is_int & (a != 0)
        g[ii] = np.where(fi[ii] <= f0, fi[ii] / f0, (1 - fi[ii]) / (1 - f0))
        cc = ~is_int & (a != 0)
        g[cc] = np.where(a[cc] > 0, a[cc] / f0, -a[cc] / (1 - f0))
        # sum g_j t_j >= 1 with t_j the distance of column j from its bound
        rhs = 1.0
        small = (g > 0) & (g < 1e-9 * g.max(initial=0.0))
        if np.any(small & ~np.isfinite(span)):
            continue
        rhs -= float(g[small] @ span[small])
        g[small] = 0.0
        sign = np.where(upper, -1.0, 1.0)
        w = g * sign
        rhs += float(w[g > 0] @ bound[g > 0])
        # logicals s = b - A x
        ws = w[n:]
        coef = w[:n] - lp.A.T @ ws
        rhs -= float(ws @ lp.rhs)
        big = np.abs(coef).max(initial=0.0)
        if big == 0.0:
            continue
        tiny = (coef != 0) & (np.abs(coef) < 1e-9 * big)
        if np.any(tiny & ~(np.isfinite(lp.lo) & np.isfinite(lp.hi))):
            continue
        rhs -= float(np.maximum(coef[tiny] * lp.lo[tiny], coef[tiny] * lp.hi[tiny]).sum())
        coef[tiny] = 0.0
        idx = np.flatnonzero(coef)
        vals = np.abs(coef[idx])
        if vals.max() > max_dynamism * vals.min():
            continue
        coef, rhs = coef / big, rhs / big
        rhs -= 1e-9 * max(1.0, abs(rhs))
        if coef @ sol.x >= rhs - 1e-6:
            continue
        cuts.append((idx, coef[idx], GE, rhs))
    return cuts


def solve_milp(
    p: MilpProblem,
    gap_target: float = 0.0,
    node_limit: Optional[int] = None,
    heuristic: Optional[Callable[..., Optional[np.ndarray]]] = None,
    options: Optional[SimplexOptions] = None,
    lazy: Optional[Callable[[np.ndarray], list]] = None,
    brancher: Optional[Callable[[np.ndarray], Optional[tuple]]] = None,
    root_cuts: int = 0,
    branching: str = "reliability",
) -> MilpSolution:
    """Solve ``p`` by best-bound search, branching on the most fractional binary.

    ``heuristic(x, basis)`` receives the root relaxation and its basis and may
    return an integral candidate point; it is accepted as incumbent if
    feasible.

    ``lazy(x)`` is shown every node solution, and every integral point
    before it becomes the incumbent. It returns globally valid rows
    ``(idx, coef, sense, rhs)`` that cut ``x`` off, or an empty list to
    accept it. Cuts are added to the whole tree; open nodes are re-solved
    when popped. With ``lazy`` the heuristic also runs after every separation
    call, with ``basis=None``.

    ``brancher(x)`` may return ``(idx, coef)``, a linear form with integral
    value at every integral point. When its value at ``x`` is fractional the
    node is split on ``floor`` / ``ceil`` of it with node-local rows instead
    of on a single binary. Returning None falls back to the most fractional
    binary.
    """
    if gap_target < 0:
        raise ValueError("gap_target must be nonnegative")
    if branching not in ("reliability", "fractional"):
        raise ValueError(f"unknown branching rule {branching!r}")
    reliable, max_probes = RELIABLE, MAX_PROBES
    base = options or SimplexOptions()
    probe_options = SimplexOptions(**{**base.__dict__, "max_iterations": 200})
    lp = p.lp
    bins = p.binaries
    iters = 0
    nodes = 0

    def adapt(basis, g0, n_local):
        # re-index a basis taken with ``g0`` global rows onto the current
        # layout (global rows, then ``n_local`` node rows); new rows get
        # their slacks as basic
        if basis is None:
            return None
        n, g1 = lp.n_vars, lp.n_rows
        head = np.asarray(basis.head).copy()
        up = np.asarray(basis.at_upper)
        shift = g1 - g0
        if shift:
            head[head >= n + g0] += shift
            up = np.concatenate([up[: n + g0], np.zeros(shift, dtype=bool), up[n + g0:]])
            head = np.concatenate([head, np.arange(n + g0, n + g1)])
        m_have, m_want = len(head), g1 + n_local
        if m_have < m_want:
            head = np.concatenate([head, np.arange(n + m_have, n + m_want)])
            up = np.concatenate([up, np.zeros(m_want - m_have, dtype=bool)])
        return Basis(head, up)

    def node_lp(lo, hi, local):
        if not local:
            return lp.with_bounds(lo, hi)
        return stack(lp, local).with_bounds(lo, hi)

    def solve_node(lo, hi, local, basis, g0):
        nonlocal iters, nodes
        nodes += 1
        sol = solve_lp(node_lp(lo, hi, local), warm_start=adapt(basis, g0, len(local)), options=options)
        iters += sol.iterations
        return sol

    def add_cuts(rows, prefix="lazy"):
        nonlocal lp
        lp = stack(lp, rows, prefix)

    def try_heuristic(x, basis):
        cand = heuristic(x, basis)
        if cand is not None and lp.primal_residual(cand) <= 1e-7 and fractionality(cand).max(initial=0) <= 1e-9:
            offer(cand, float(lp.cost @ cand))

    def fractionality(x):
        v = x[bins]
        return np.abs(v - np.round(v))

    def polish(x, lo, hi, local, basis, g0):
        # fix binaries to their rounded values so they are exactly 0/1
        lo2, hi2 = lo.copy(), hi.copy()
        r = np.round(x[bins])
        lo2[bins] = r
        hi2[bins] = r
        nonlocal iters
        sol = solve_lp(node_lp(lo2, hi2, local), warm_start=adapt(basis, g0, len(local)), options=options)
        iters += sol.iterations
        return sol if sol.status == OPTIMAL else None

    incumbent_x = None
    incumbent = math.inf

    def offer(x, obj):
        nonlocal incumbent, incumbent_x
        if obj < incumbent - 1e-12 * max(1.0, abs(obj)):
            incumbent, incumbent_x = obj, x

    def prune_tol():
        return 1e-9 * max(1.0, abs(incumbent))

    root = solve_node(lp.lo.copy(), lp.hi.copy(), (), None, lp.n_rows)
    if root.status == INFEASIBLE:
        return MilpSolution(status=INFEASIBLE, nodes=nodes, lp_iterations=iters)
    if root.status == UNBOUNDED:
        return MilpSolution(status=UNBOUNDED, nodes=nodes, lp_iterations=iters)

    flat = 0
    for _ in range(root_cuts if bins.size else 0):
        if root.status != OPTIMAL or fractionality(root.x).max() <= INT_TOL:
            break
        rows = gomory_cuts(lp, root, bins)
        if not rows:
            break
        g0 = lp.n_rows
        add_cuts(rows, "gmi")
        new = solve_node(lp.lo.copy(), lp.hi.copy(), (), root.basis, g0)
        if new.status != OPTIMAL:
            root = new
            break
        flat = flat + 1 if new.objective - root.objective <= 1e-7 * max(1.0, abs(root.objective)) else 0
        root = new
        if flat >= 2:
            break
    if root.status == INFEASIBLE:
        return MilpSolution(status=INFEASIBLE, nodes=nodes, lp_iterations=iters)

    if heuristic is not None and bins.size:
        try_heuristic(root.x, root.basis)

    heap: list = []
    counter = 0

    def separate(x) -> bool:
        if lazy is None:
            return False
        cuts = lazy(x)
        if cuts:
            add_cuts(cuts)
        if heuristic is not None:
            try_heuristic(x, None)
        return bool(cuts)

    def consider(sol, lo, hi, local):
        nonlocal counter
        while True:
            if sol.status != OPTIMAL or sol.objective >= incumbent - prune_tol():
                return
            g0 = lp.n_rows
            if separate(sol.x):
                sol = solve_node(lo, hi, local, sol.basis, g0)
                continue
            fr = fractionality(sol.x) if bins.size else np.zeros(0)
            if fr.size and fr.max() > INT_TOL:
                break
            pol = polish(sol.x, lo, hi, local, sol.basis, g0) if fr.size else sol
            if pol is None:
                return
            if not separate(pol.x):
                offer(pol.x, pol.objective)
                return
            sol = solve_node(lo, hi, local, sol.basis, g0)
        heapq.heappush(heap, (sol.objective, counter, lo, hi, local, sol, lp.n_rows))
        counter += 1

    def children(x, lo, hi, local, basis, g0, obj):
        if brancher is not None:
            form = brancher(x)
            if form is not None:
                idx, coef = form
                v = float(np.dot(coef, x[idx]))
                if abs(v - round(v)) > INT_TOL:
                    f = math.floor(v)
                    return -1, [(lo, hi, local + ((idx, coef, LE, f),), None),
                                (lo, hi, local + ((idx, coef, GE, f + 1),), None)]
        fr = fractionality(x)
        if branching == "fractional":
            # most fractional; argmax picks the lowest index on ties
            j = int(bins[int(np.argmax(np.round(fr, 12)))])
            return j, [(*fix(lo, hi, j, v), local, None) for v in (0.0, 1.0)]
        return reliability(x, fr, lo, hi, local, basis, g0, obj)

    def fix(lo, hi, j, v):
        lo_c, hi_c = lo.copy(), hi.copy()
        lo_c[j] = hi_c[j] = v
        return lo_c, hi_c

    # pseudocosts: objective gain per unit change, down / up
    pc_sum = np.zeros((2, lp.n_vars))
    pc_cnt = np.zeros((2, lp.n_vars))

    def record(j, side, gain, dist):
        pc_sum[side, j] += max(gain, 0.0) / dist
        pc_cnt[side, j] += 1

    def pseudo(j, side):
        if pc_cnt[side, j]:
            return pc_sum[side, j] / pc_cnt[side, j]
        seen = pc_cnt[side] > 0
        return pc_sum[side, seen].sum() / pc_cnt[side, seen].sum() if seen.any() else 1.0

    def reliability(x, fr, lo, hi, local, basis, g0, obj):
        # strong-branch unreliable candidates, then pick by the product score;
        # strong-branching children are kept and reused as the real children
        cand = bins[fr > INT_TOL]
        cand = cand[np.argsort(-np.round(fr[fr > INT_TOL], 12), kind="stable")]
        eps = 1e-6 * max(1.0, abs(obj))
        best_j, best_score, kids = -1, -1.0, {}
        probes = 0
        nonlocal iters
        for j in cand:
            f = x[j] - math.floor(x[j])
            if probes < max_probes and min(pc_cnt[0, j], pc_cnt[1, j]) < reliable:
                probes += 1
                res = []
                for side, v in ((0, 0.0), (1, 1.0)):
                    lo_c, hi_c = fix(lo, hi, j, v)
                    try:
                        c = solve_lp(node_lp(lo_c, hi_c, local), warm_start=adapt(basis, g0, len(local)),
                                     options=probe_options)
                    except LpError:
                        c = None
                    if c is not None:
                        iters += c.iterations
                    res.append((lo_c, hi_c, local, c))
                    if c is not None and c.status == OPTIMAL:
                        record(j, side, c.objective - obj, f if side == 0 else 1 - f)
                gains = [math.inf if c is not None and c.status == INFEASIBLE else
                         (c.objective - obj if c is not None and c.status == OPTIMAL else None) for *_, c in res]
                kids[j] = res
                if any(g == math.inf for g in gains):
                    best_j = j
                    break
                d = gains[0] if gains[0] is not None else f * pseudo(j, 0)
                u = gains[1] if gains[1] is not None else (1 - f) * pseudo(j, 1)
            else:
                d, u = f * pseudo(j, 0), (1 - f) * pseudo(j, 1)
            score = max(d, eps) * max(u, eps)
            if score > best_score + 1e-12 * abs(score):
                best_j, best_score = j, score
        if best_j in kids:
            return best_j, kids[best_j]
        return best_j, [(*fix(lo, hi, best_j, v), local, None) for v in (0.0, 1.0)]

    consider(root, lp.lo.copy(), lp.hi.copy(), ())
    status = OPTIMAL
    while heap:
        bound = heap[0][0]
        if bound >= incumbent - prune_tol() or relative_gap(incumbent, bound) <= gap_target and incumbent_x is not None:
            break
        if node_limit is not None and nodes >= node_limit:
            status = NODE_LIMIT
            break
        _, _, lo, hi, local, sol, g0 = heapq.heappop(heap)
        if g0 != lp.n_rows:
            consider(solve_node(lo, hi, local, sol.basis, g0), lo, hi, local)
            continue
        j, kids = children(sol.x, lo, hi, local, sol.basis, g0, sol.objective)
        for side, (lo_c, hi_c, local_c, child) in enumerate(kids):
            if child is None or child.status not in (OPTIMAL, INFEASIBLE):
                child = solve_node(lo_c, hi_c, local_c, sol.basis, g0)
                if j >= 0 and child.status == OPTIMAL:
                    f = sol.x[j] - math.floor(sol.x[j])
                    record(j, side, child.objective - sol.objective, f if side == 0 else 1 - f)
            else:
                nodes += 1
            consider(child, lo_c, hi_c, local_c)

    best_bound = heap[0][0] if heap else incumbent
    if heap and status == OPTIMAL:
        best_bound = min(heap[0][0], incumbent)
    if incumbent_x is None:
        return MilpSolution(status=INFEASIBLE if status == OPTIMAL else status, nodes=nodes, lp_iterations=iters,
                            bound=best_bound)
    gap = relative_gap(incumbent, min(best_bound, incumbent))
    x = incumbent_x.copy()
    x[bins] = np.round(x[bins])
    return MilpSolution(
        status=status,
        x=x,
        objective=incumbent,
        bound=min(best_bound, incumbent),
        gap=gap,
        nodes=nodes,
        lp_iterations=iters,
    )


def export_mps(p: MilpProblem, path) -> None:
    """Write ``p`` in fixed-column MPS with integer markers around binaries.

    Rows and columns get short positional names (``R0000001``,
    ``X0000001``) so every field fits its column; the original names are
    listed in leading comment lines. Numbers are written with ``repr`` so
    that :func:`import_mps` recovers them exactly.
    """
    lp = p.lp
    m, n = lp.n_rows, lp.n_vars
    rname = [f"R{i + 1:07d}" for i in range(m)]
    cname = [f"X{j + 1:07d}" for j in range(n)]
    kind = {LE: "L", GE: "G", EQ: "E"}
    is_bin = np.zeros(n, dtype=bool)
    is_bin[p.binaries] = True
    A = lp.A.tocsc()
    out = []
    for i in range(m):
        if lp.row_names is not None:
            out.append(f"* {rname[i]} {lp.row_names[i]}")
    for j in range(n):
        if lp.var_names is not None:
            out.append(f"* {cname[j]} {lp.var_names[j]}")
    out.append("NAME          EVAGG")
    out.append("ROWS")
    out.append(" N  COST")
    for i in range(m):
        out.append(f" {kind[lp.senses[i]]}  {rname[i]}")
    out.append("COLUMNS")
    in_int = False
    marker = 0
    for j in range(n):
        if is_bin[j] != in_int:
            tag = "INTORG" if is_bin[j] else "INTEND"
            out.append(f"    M{marker:07d}  'MARKER'                 '{tag}'")
            marker += 1
            in_int = bool(is_bin[j])
        entries = []
        if lp.cost[j] != 0.0:
            entries.append(("COST", lp.cost[j]))
        for k in range(A.indptr[j], A.indptr[j + 1]):
            entries.append((rname[A.indices[k]], A.data[k]))
        if not entries:
            entries.append(("COST", 0.0))
        for r, v in entries:
            out.append(f"    {cname[j]:<8}  {r:<8}  {float(v)!r}")
    if in_int:
        out.append(f"    M{marker:07d}  'MARKER'                 'INTEND'")
    out.append("RHS")
    for i in range(m):
        if lp.rhs[i] != 0.0:
            out.append(f"    RHS       {rname[i]:<8}  {float(lp.rhs[i])!r}")
    out.append("BOUNDS")
    for j in range(n):
        lo, hi = lp.lo[j], lp.hi[j]
        c = cname[j]
        if lo == hi:
            out.append(f" FX BND       {c:<8}  {float(lo)!r}")
            continue
        if math.isinf(lo) and math.isinf(hi):
            out.append(f" FR BND       {c}")
            continue
        if math.isinf(lo):
            out.append(f" MI BND       {c}")
        elif lo != 0.0 or is_bin[j]:
            out.append(f" LO BND       {c:<8}  {float(lo)!r}")
        if math.isfinite(hi):
            out.append(f" UP BND       {c:<8}  {float(hi)!r}")
        elif is_bin[j]:
            raise ValueError("binary column without finite upper bound")
    out.append("ENDATA")
    with open(path, "w") as fh:
        fh.write("\n".join(out) + "\n")


def import_mps(path) -> MilpProblem:
    """Read a file written by :func:`export_mps` (or any free-form MPS file
    restricted to N/L/G/E rows, RHS, and LO/UP/FX/FR/MI/BV bounds)."""
    names: dict = {}
    section = None
    rows: list = []
    row_idx: dict = {}
    obj_row = None
    cols: list = []
    col_idx: dict = {}
    entries: list = []
    cost: dict = {}
    rhs: dict = {}
    lo: dict = {}
    hi: dict = {}
    ints: set = set()
    in_int = False
    sense_of = {"L": LE, "G": GE, "E": EQ}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.rstrip("\n")
            if not line.strip():
                continue
            if line.startswith("*"):
                parts = line[1:].split(None, 1)
                if len(parts) == 2:
                    names[parts[0]] = parts[1]
                continue
            tok = line.split()
            if not line[0].isspace():
                section = tok[0]
                if section == "ENDATA":
                    break
                continue
            try:
                if section == "ROWS":
                    if tok[0] == "N":
                        obj_row = obj_row or tok[1]
                        continue
                    row_idx[tok[1]] = len(rows)
                    rows.append((tok[1], sense_of[tok[0]]))
                elif section == "COLUMNS":
                    if len(tok) >= 3 and tok[1] == "'MARKER'":
                        in_int = tok[2] == "'INTORG'"
                        continue
                    c = tok[0]
                    if c not in col_idx:
                        col_idx[c] = len(cols)
                        cols.append(c)
                        if in_int:
                            ints.add(c)
                    for r, v in zip(tok[1::2], tok[2::2]):
                        if r == obj_row:
                            cost[c] = float(v)
                        else:
                            entries.append((row_idx[r], col_idx[c], float(v)))
                elif section == "RHS":
                    for r, v in zip(tok[1::2], tok[2::2]):
                        if r != obj_row:
                            rhs[row_idx[r]] = float(v)
                elif section == "BOUNDS":
                    kind, c = tok[0], tok[2]
                    v = float(tok[3]) if len(tok) > 3 else None
                    if kind == "LO":
                        lo[c] = v
                    elif kind == "UP":
                        hi[c] = v
                    elif kind == "FX":
                        lo[c] = hi[c] = v
                    elif kind == "FR":
                        lo[c], hi[c] = -math.inf, math.inf
                    elif kind == "MI":
                        lo[c] = -math.inf
                    elif kind == "BV":
                        lo[c], hi[c] = 0.0, 1.0
                        ints.add(c)
                    else:
                        raise ValueError(f"unsupported bound type {kind}")
                elif section in ("NAME", "OBJSENSE"):
                    continue
                else:
                    raise ValueError(f"unsupported section {section}")
            except (KeyError, IndexError, ValueError) as exc:
                raise ValueError(f"{path}:{lineno}: cannot parse {line.strip()!r} ({exc})") from exc

    m, n = len(rows), len(cols)
    if entries:
        r_, c_, v_ = zip(*entries)
    else:
        r_, c_, v_ = (), (), ()
    A = sp.csr_matrix((v_, (r_, c_)), shape=(m, n))
    lo_arr = np.array([lo.get(c, 0.0) for c in cols])
    hi_arr = np.array([hi.get(c, 1.0 if c in ints and c not in hi else math.inf) for c in cols])
    lp = LpProblem(
        cost=np.array([cost.get(c, 0.0) for c in cols]),
        A=A,
        senses=np.array([s for _, s in rows]),
        rhs=np.array([rhs.get(i, 0.0) for i in range(m)]),
        lo=lo_arr,
        hi=hi_arr,
        var_names=[names.get(c, c) for c in cols],
        row_names=[names.get(r, r) for r, _ in rows],
    )
    return MilpProblem(lp, np.array([col_idx[c] for c in cols if c in ints], dtype=int))
