"""Linear programming kernel: problem container, model builder and a
bounded-variable revised primal simplex.

Every row ``a_i x (<=|>=|=) b_i`` gets a logical column ``s_i`` so that the
computational form is ``A x + s = b`` with bounds on all columns:

* ``<=`` rows: ``s_i in [0, inf)``
* ``>=`` rows: ``s_i in (-inf, 0]``
* ``=``  rows: ``s_i in [0, 0]``

The slack basis is therefore always a valid starting basis. Phase 1 minimises
the sum of bound infeasibilities of the basic variables (composite method), so
the same loop handles cold starts and warm starts from a previous basis with
changed bounds.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.linalg import qr
from scipy.sparse.linalg import splu

LE, GE, EQ = "<", ">", "="

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"


class LpError(RuntimeError):
    """Raised when the simplex cannot make progress (iteration cap, singular basis)."""


@dataclass
class LpProblem:
    """``min cost @ x`` subject to sparse rows and variable bounds."""

    cost: np.ndarray
    A: sp.csr_matrix
    senses: np.ndarray
    rhs: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    var_names: list = field(default_factory=list)
    row_names: list = field(default_factory=list)

    def __post_init__(self):
        self.cost = np.asarray(self.cost, dtype=float)
        self.rhs = np.asarray(self.rhs, dtype=float)
        self.lo = np.asarray(self.lo, dtype=float)
        self.hi = np.asarray(self.hi, dtype=float)
        self.senses = np.asarray(self.senses, dtype="<U1")
        self.A = sp.csr_matrix(self.A, dtype=float)
        if self.A.shape != (len(self.rhs), len(self.cost)):
            raise ValueError(f"A has shape {self.A.shape}, expected {(len(self.rhs), len(self.cost))}")
        if len(self.lo) != self.n_vars or len(self.hi) != self.n_vars:
            raise ValueError("bound vectors must match the number of variables")
        if len(self.senses) != self.n_rows:
            raise ValueError("one sense per row required")
        if not set(self.senses.tolist()) <= {LE, GE, EQ}:
            raise ValueError(f"unknown row sense in {set(self.senses.tolist())}")
        if np.any(self.lo > self.hi):
            j = int(np.argmax(self.lo > self.hi))
            raise ValueError(f"variable {j} has lo > hi")
        if not np.all(np.isfinite(self.cost)):
            raise ValueError("objective coefficients must be finite")
        if not self.var_names:
            self.var_names = [f"x{j}" for j in range(self.n_vars)]
        if not self.row_names:
            self.row_names = [f"r{i}" for i in range(self.n_rows)]

    @property
    def n_vars(self) -> int:
        return len(self.cost)

    @property
    def n_rows(self) -> int:
        return len(self.rhs)

    def with_bounds(self, lo: np.ndarray, hi: np.ndarray) -> "LpProblem":
        return replace(self, lo=np.asarray(lo, float), hi=np.asarray(hi, float))

    def row_activity(self, x: np.ndarray) -> np.ndarray:
        return self.A @ x

    def primal_residual(self, x: np.ndarray) -> float:
        """Largest violation of rows or bounds at ``x`` (infinity norm)."""
        act = self.A @ x
        viol = np.zeros(self.n_rows)
        le, ge, eq = self.senses == LE, self.senses == GE, self.senses == EQ
        viol[le] = np.maximum(act[le] - self.rhs[le], 0.0)
        viol[ge] = np.maximum(self.rhs[ge] - act[ge], 0.0)
        viol[eq] = np.abs(act[eq] - self.rhs[eq])
        bnd = np.maximum(np.maximum(self.lo - x, x - self.hi), 0.0)
        return float(max(viol.max(initial=0.0), bnd.max(initial=0.0)))


class ModelBuilder:
    """Incremental construction of an :class:`LpProblem`.

    Variables are added in blocks and referenced by integer index; rows are
    added as (indices, coefficients) pairs.
    """

    def __init__(self):
        self._cost: list = []
        self._lo: list = []
        self._hi: list = []
        self.var_names: list = []
        self._rows: list = []
        self._cols: list = []
        self._vals: list = []
        self._senses: list = []
        self._rhs: list = []
        self.row_names: list = []

    @property
    def n_vars(self) -> int:
        return len(self._cost)

    @property
    def n_rows(self) -> int:
        return len(self._rhs)

    def add_vars(self, n: int, lo=0.0, hi=math.inf, cost=0.0, name: str = "x") -> np.ndarray:
        start = self.n_vars
        self._cost.extend(np.broadcast_to(np.asarray(cost, float), (n,)).tolist())
        self._lo.extend(np.broadcast_to(np.asarray(lo, float), (n,)).tolist())
        self._hi.extend(np.broadcast_to(np.asarray(hi, float), (n,)).tolist())
        if n == 1:
            self.var_names.append(name)
        else:
            self.var_names.extend(f"{name}[{k}]" for k in range(n))
        return np.arange(start, start + n)

    def add_var(self, lo=0.0, hi=math.inf, cost=0.0, name: str = "x") -> int:
        return int(self.add_vars(1, lo, hi, cost, name)[0])

    def add_row(self, idx: Sequence[int], coef: Sequence[float], sense: str, rhs: float, name: str = "") -> int:
        i = self.n_rows
        idx = np.asarray(idx, dtype=int).ravel()
        coef = np.broadcast_to(np.asarray(coef, float), idx.shape)
        self._rows.extend([i] * len(idx))
        self._cols.extend(idx.tolist())
        self._vals.extend(coef.tolist())
        self._senses.append(sense)
        self._rhs.append(float(rhs))
        self.row_names.append(name or f"r{i}")
        return i

    def build(self) -> LpProblem:
        A = sp.coo_matrix(
            (self._vals, (self._rows, self._cols)), shape=(self.n_rows, self.n_vars)
        ).tocsr()
        A.sum_duplicates()
        return LpProblem(
            cost=np.array(self._cost),
            A=A,
            senses=np.array(self._senses, dtype="<U1"),
            rhs=np.array(self._rhs),
            lo=np.array(self._lo),
            hi=np.array(self._hi),
            var_names=list(self.var_names),
            row_names=list(self.row_names),
        )


@dataclass
class Basis:
    """Simplex basis snapshot usable as a warm start for a problem of equal shape.

    ``head`` lists the basic column per row; ``at_upper`` flags nonbasic
    columns resting on their upper bound.
    """

    head: np.ndarray
    at_upper: np.ndarray


@dataclass
class LpSolution:
    status: str
    x: Optional[np.ndarray] = None
    duals: Optional[np.ndarray] = None
    reduced_costs: Optional[np.ndarray] = None
    objective: float = math.nan
    dual_objective: float = math.nan
    iterations: int = 0
    basis: Optional[Basis] = None

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


@dataclass
class SimplexOptions:
    feas_tol: float = 1e-9
    opt_tol: float = 1e-9
    pivot_tol: float = 1e-9
    refactor_every: int = 24
    iteration_factor: int = 50
    max_iterations: Optional[int] = None
    degenerate_streak: int = 25
    crash: bool = True
    pricing_chunks: int = 8
    dual: bool = True


def dual_values(sol: LpSolution, row: int) -> float:
    """Dual multiplier of ``row``: >= 0 on >=-rows, <= 0 on <=-rows (min sense)."""
    if not sol.optimal:
        raise ValueError(f"dual values need an optimal solution, status is {sol.status!r}")
    return float(sol.duals[row])


# internal ------------------------------------------------------------------


class _Factor:
    """LU of the basis plus a product-form eta file."""

    def __init__(self, M: sp.csc_matrix, head: np.ndarray):
        self.M = M
        self.m = M.shape[0]
        self.refactor(head)

    def refactor(self, head: np.ndarray, repair: bool = False) -> np.ndarray:
        """Factor ``M[:, head]``. With ``repair`` a singular basis has its
        dependent columns swapped for logicals; the (possibly new) head is
        returned."""
        try:
            self.lu = splu(self.M[:, head].tocsc(), permc_spec="COLAMD", options={"SymmetricMode": False})
        except RuntimeError as exc:
            if not repair:
                raise LpError(f"singular basis: {exc}") from exc
            head = _repair_basis(self.M, head)
            try:
                self.lu = splu(self.M[:, head].tocsc(), permc_spec="COLAMD", options={"SymmetricMode": False})
            except RuntimeError as exc2:
                raise LpError(f"singular basis after repair: {exc2}") from exc2
        self.etas: list = []
        return head

    def ftran(self, a: np.ndarray) -> np.ndarray:
        v = self.lu.solve(a)
        for r, alpha in self.etas:
            vr = v[r] / alpha[r]
            v -= alpha * vr
            v[r] = vr
        return v

    def btran(self, c: np.ndarray) -> np.ndarray:
        w = np.array(c, dtype=float)
        for r, alpha in reversed(self.etas):
            wr = w[r]
            w[r] = (wr - (w @ alpha - wr * alpha[r])) / alpha[r]
        return self.lu.solve(w, trans="T")

    def update(self, r: int, alpha: np.ndarray):
        self.etas.append((r, alpha.copy()))


def _repair_basis(M: sp.csc_matrix, head: np.ndarray, rtol: float = 1e-9) -> np.ndarray:
    """Keep a maximal well-conditioned subset of ``head`` (QR with column
    pivoting) and complete it with logicals of the rows it leaves uncovered."""
    m = M.shape[0]
    n = M.shape[1] - m
    B = M[:, head].toarray()
    Q, R, piv = qr(B, pivoting=True)
    diag = np.abs(np.diag(R))
    r = int((diag > rtol * max(diag[0], 1.0)).sum()) if diag.size else 0
    keep = np.asarray(head)[piv[:r]]
    # logicals whose unit vectors best complete span(Q[:, :r])
    resid = np.eye(m) - Q[:, :r] @ Q[:, :r].T
    _, _, rows = qr(resid, pivoting=True)
    fill = [n + int(i) for i in rows if n + int(i) not in set(keep)][: m - r]
    return np.concatenate([keep, np.array(fill, dtype=int)])


def _initial_nonbasic_value(lo: float, hi: float, upper: bool) -> float:
    if upper and math.isfinite(hi):
        return hi
    if math.isfinite(lo):
        return lo
    if math.isfinite(hi):
        return hi
    return 0.0


def crash_basis(A: sp.csc_matrix, lo: np.ndarray, hi: np.ndarray, eq_rows: np.ndarray) -> np.ndarray:
    """Triangular crash: swap logicals of equality rows for structural columns.

    Columns are tried free first, then one-sided, then boxed (index order
    within a class). A column enters on its largest entry in an equality row
    that no previously accepted column touches, so the basis stays triangular.
    Returns the basic column per row (logicals are ``n + i``).
    """
    m, n = A.shape
    head = np.arange(n, n + m)
    eligible = np.zeros(m, dtype=bool)
    eligible[eq_rows] = True
    touched = np.zeros(m, dtype=bool)
    finite = np.isfinite(lo).astype(int) + np.isfinite(hi).astype(int)
    movable = lo < hi
    order = np.lexsort((np.arange(n), finite))
    indptr, indices, data = A.indptr, A.indices, A.data
    for j in order:
        if not movable[j]:
            continue
        rows = indices[indptr[j]:indptr[j + 1]]
        vals = np.abs(data[indptr[j]:indptr[j + 1]])
        if rows.size == 0:
            continue
        ok = eligible[rows] & ~touched[rows]
        if not ok.any():
            continue
        k = np.flatnonzero(ok)[np.argmax(vals[ok])]
        if vals[k] < 1e-3 * vals.max():
            continue
        i = rows[k]
        head[i] = j
        eligible[i] = False
        touched[rows] = True
    return head


def solve_lp(
    p: LpProblem,
    warm_start: Optional[Basis] = None,
    options: Optional[SimplexOptions] = None,
) -> LpSolution:
    """Solve ``p`` with the bounded revised simplex.

    Pricing is Dantzig's rule; after ``degenerate_streak`` consecutive
    degenerate pivots it switches to Bland's rule until the next step that
    moves the objective, which rules out cycling.
    """
    opt = options or SimplexOptions()
    m, n = p.n_rows, p.n_vars
    N = n + m
    Acsc = p.A.tocsc()
    M = sp.hstack([Acsc, sp.identity(m, format="csc")], format="csc")
    MT = M.T.tocsr()

    lo = np.empty(N)
    hi = np.empty(N)
    lo[:n], hi[:n] = p.lo, p.hi
    lo[n:] = np.where(p.senses == GE, -math.inf, 0.0)
    hi[n:] = np.where(p.senses == LE, math.inf, 0.0)
    cost = np.zeros(N)
    cost[:n] = p.cost

    fixed = lo == hi
    is_basic = np.zeros(N, dtype=bool)
    x = np.zeros(N)

    def cold_start():
        h = crash_basis(Acsc, p.lo, p.hi, np.flatnonzero(p.senses == EQ)) if opt.crash else np.arange(n, N)
        return h, np.zeros(N, dtype=bool)

    if warm_start is not None and len(warm_start.head) == m and len(warm_start.at_upper) == N:
        head = np.array(warm_start.head, dtype=int)
        upper = warm_start.at_upper
    else:
        head, upper = cold_start()

    def place_nonbasics():
        is_basic[:] = False
        is_basic[head] = True
        x[:] = 0.0
        for j in np.flatnonzero(~is_basic):
            x[j] = _initial_nonbasic_value(lo[j], hi[j], bool(upper[j]))

    place_nonbasics()
    try:
        fac = _Factor(M, head)
    except LpError:
        head, upper = np.arange(n, N), np.zeros(N, dtype=bool)
        place_nonbasics()
        fac = _Factor(M, head)

    def recompute_xb():
        xn = x.copy()
        xn[head] = 0.0
        x[head] = fac.ftran(p.rhs - M @ xn)

    def refresh() -> bool:
        # refactor; a repaired basis moves evicted columns to a bound
        new = fac.refactor(head, repair=True)
        changed = not np.array_equal(new, head)
        if changed:
            out = np.setdiff1d(head, new)
            inn = np.setdiff1d(new, head)
            is_basic[out] = False
            is_basic[inn] = True
            for j in out:
                x[j] = _initial_nonbasic_value(lo[j], hi[j], False)
            priceable[out] = ~fixed[out]
            priceable[inn] = False
            head[:] = new
        recompute_xb()
        return changed

    recompute_xb()

    max_iter = opt.max_iterations or opt.iteration_factor * (m + n)
    it = 0
    streak = 0
    bland = False
    ftol, otol, ptol = opt.feas_tol, opt.opt_tol, opt.pivot_tol
    priceable = ~is_basic & ~fixed
    n_chunks = max(1, min(opt.pricing_chunks, N // 2000))
    bounds_ = np.linspace(0, N, n_chunks + 1).astype(int)
    chunks = [slice(int(a), int(b_)) for a, b_ in zip(bounds_[:-1], bounds_[1:])]
    MT_chunks = [MT[sl] for sl in chunks]
    chunk_pos = 0

    def dual_phase():
        # bounded dual simplex from a dual feasible warm basis; returns a
        # solution only for a proven infeasible problem, otherwise leaves a
        # (hopefully) primal feasible basis for the primal loop to verify
        nonlocal it
        nb = ~is_basic & ~fixed
        d = cost - MT @ fac.btran(cost[head])
        at_lo, at_hi = nb & (x == lo), nb & (x == hi)
        wrong = (at_lo & (d < -otol)) | (at_hi & ~at_lo & (d > otol)) | (nb & ~at_lo & ~at_hi & (np.abs(d) > otol))
        flip = wrong & np.isfinite(lo) & np.isfinite(hi)
        if np.any(wrong & ~flip):
            return None
        if flip.any():
            x[flip] = np.where(at_lo[flip], hi[flip], lo[flip])
            recompute_xb()
        budget = it + max_iter // 2
        while it < budget:
            if len(fac.etas) >= opt.refactor_every and refresh():
                return None
            xb = x[head]
            lb, ub = lo[head], hi[head]
            viol = np.maximum(lb - xb, 0.0) + np.maximum(xb - ub, 0.0)
            r = int(np.argmax(viol))
            if viol[r] <= ftol:
                return None
            to_lower = xb[r] < lb[r]
            e = np.zeros(m)
            e[r] = 1.0
            row = MT @ fac.btran(e)
            d = cost - MT @ fac.btran(cost[head])
            nb = ~is_basic & ~fixed
            gain = -row if to_lower else row  # > 0: raising column j repairs row r
            up = nb & (gain > ptol) & (x < hi)
            down = nb & (gain < -ptol) & (x > lo)
            cand = np.flatnonzero(up | down)
            if cand.size == 0:
                if fac.etas:
                    refresh()
                    continue
                return LpSolution(status=INFEASIBLE, iterations=it)
            slack = np.where(up[cand], np.maximum(d[cand], 0.0), np.maximum(-d[cand], 0.0))
            piv = np.abs(row[cand])
            bound_ = ((slack + otol) / piv).min()
            ok = slack / piv <= bound_
            q = int(cand[ok][np.argmax(piv[ok])])
            col = np.zeros(m)
            col[M.indices[M.indptr[q]:M.indptr[q + 1]]] = M.data[M.indptr[q]:M.indptr[q + 1]]
            aq = fac.ftran(col)
            if abs(aq[r] - row[q]) > 1e-7 * max(1.0, abs(aq[r])) or abs(aq[r]) <= ptol:
                if refresh():
                    return None
                continue
            target = lb[r] if to_lower else ub[r]
            step = (xb[r] - target) / aq[r]
            it += 1
            x[head] = xb - step * aq
            x[q] += step
            j_out = head[r]
            x[j_out] = target
            is_basic[j_out] = False
            is_basic[q] = True
            priceable[q] = False
            priceable[j_out] = not fixed[j_out]
            head[r] = q
            fac.update(r, aq)
        return None

    if warm_start is not None and opt.dual:
        out = dual_phase()
        if out is not None:
            return out

    while True:
        if len(fac.etas) >= opt.refactor_every:
            refresh()

        xb = x[head]
        lb, ub = lo[head], hi[head]
        below = xb < lb - ftol
        above = xb > ub + ftol
        phase1 = bool(below.any() or above.any())
        if phase1:
            cb = above.astype(float) - below.astype(float)
            cvec = None
        else:
            cb = cost[head]
            cvec = cost
        y = fac.btran(cb)

        def price(k):
            # reduced costs and Dantzig scores for one column chunk
            sl = chunks[k]
            dk = -(MT_chunks[k] @ y)
            if cvec is not None:
                dk += cvec[sl]
            xs_, hs_, ls_ = x[sl], hi[sl], lo[sl]
            ok = priceable[sl] & (((dk < -otol) & (xs_ < hs_ - ftol)) | ((dk > otol) & (xs_ > ls_ + ftol)))
            return dk, np.where(ok, np.abs(dk), 0.0)

        q = -1
        if bland:
            for k in range(len(chunks)):
                dk, sc = price(k)
                cand = np.flatnonzero(sc)
                if cand.size:
                    q = chunks[k].start + int(cand[0])
                    dq = dk[cand[0]]
                    break
        else:
            for step in range(len(chunks)):
                k = (chunk_pos + step) % len(chunks)
                dk, sc = price(k)
                i = int(np.argmax(sc))
                if sc[i] > 0.0:
                    q = chunks[k].start + i
                    dq = dk[i]
                    chunk_pos = k
                    break
        if q < 0:
            if fac.etas:
                refresh()  # confirm with a fresh factorisation
                continue
            if phase1:
                return LpSolution(status=INFEASIBLE, iterations=it)
            break

        if it >= max_iter:
            raise LpError(f"simplex iteration cap {max_iter} reached")
        it += 1
        direction = 1.0 if dq < 0 else -1.0

        col = np.zeros(m)
        lo_ptr, hi_ptr = M.indptr[q], M.indptr[q + 1]
        col[M.indices[lo_ptr:hi_ptr]] = M.data[lo_ptr:hi_ptr]
        alpha = fac.ftran(col)
        delta = -direction * alpha  # rate of change of basic variables

        theta = hi[q] - lo[q]  # bound flip of the entering column
        leave = -1
        leave_to_upper = False

        nz = np.flatnonzero(np.abs(delta) > ptol)
        dz, xz = delta[nz], xb[nz]
        lz, uz = lb[nz], ub[nz]
        ratios = np.full(nz.size, math.inf)
        target_up = np.zeros(nz.size, dtype=bool)
        dec = dz < 0
        inc = ~dec
        if phase1:
            bz, az = below[nz], above[nz]
            feas = ~bz & ~az
            sel = dec & feas & np.isfinite(lz)
            ratios[sel] = (xz[sel] - lz[sel]) / -dz[sel]
            sel = dec & az
            ratios[sel] = (xz[sel] - uz[sel]) / -dz[sel]
            target_up[sel] = True
            sel = inc & feas & np.isfinite(uz)
            ratios[sel] = (uz[sel] - xz[sel]) / dz[sel]
            target_up[sel] = True
            sel = inc & bz
            ratios[sel] = (lz[sel] - xz[sel]) / dz[sel]
        else:
            sel = dec & np.isfinite(lz)
            ratios[sel] = (xz[sel] - lz[sel]) / -dz[sel]
            sel = inc & np.isfinite(uz)
            ratios[sel] = (uz[sel] - xz[sel]) / dz[sel]
            target_up[sel] = True
        np.maximum(ratios, 0.0, out=ratios)

        rmin = ratios.min() if nz.size else math.inf
        if rmin < theta:
            ties = np.flatnonzero(ratios <= rmin + 1e-12)
            if bland:
                k = int(ties[np.argmin(head[nz[ties]])])
            else:
                k = int(ties[np.argmax(np.abs(dz[ties]))])
            theta = float(ratios[k])
            leave = int(nz[k])
            leave_to_upper = bool(target_up[k])

        if math.isinf(theta):
            if phase1:
                raise LpError("unbounded ray during phase 1 (numerical trouble)")
            return LpSolution(status=UNBOUNDED, iterations=it)

        if theta <= 1e-12:
            streak += 1
            if streak >= opt.degenerate_streak:
                bland = True
        else:
            streak = 0
            bland = False

        x[head[nz]] = xz + theta * dz
        x[q] += direction * theta
        if leave < 0:
            x[q] = hi[q] if direction > 0 else lo[q]
            continue

        j_out = head[leave]
        x[j_out] = hi[j_out] if leave_to_upper else lo[j_out]
        is_basic[j_out] = False
        is_basic[q] = True
        priceable[q] = False
        priceable[j_out] = not fixed[j_out]
        head[leave] = q
        fac.update(leave, alpha)

    y = fac.btran(cost[head])
    d = cost - MT @ y
    d[head] = 0.0
    xs = x[:n].copy()
    obj = float(p.cost @ xs)
    nb_struct = ~is_basic[:n]
    dual_obj = float(p.rhs @ y + d[:n][nb_struct] @ xs[nb_struct])
    at_upper = (~is_basic) & np.isfinite(hi) & (np.abs(x - hi) <= ftol) & (lo != hi)
    return LpSolution(
        status=OPTIMAL,
        x=xs,
        duals=y,
        reduced_costs=d[:n].copy(),
        objective=obj,
        dual_objective=dual_obj,
        iterations=it,
        basis=Basis(head=head.copy(), at_upper=at_upper),
    )
