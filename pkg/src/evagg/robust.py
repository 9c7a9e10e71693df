"""Robust day-ahead model: the adversary picks the availability pattern that
minimises the energy delivered to each vehicle, and the aggregator must still
cover the expected transport demand.

The bilevel problem is solved per vehicle (no constraint couples vehicles)
either as a single-level MILP (duality-based reformulation with big-M
linearisation of ``c * alpha``) or by constraint generation over adversarial
patterns.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .fleet import (
    EvParams,
    ForecastInputs,
    PriceSeries,
    ScheduleSolution,
    TimeGrid,
    UncertaintySet,
    validate_fleet,
)
from .lp import EQ, GE, LE, LpError, ModelBuilder, SimplexOptions, solve_lp
from .milp import MilpProblem, solve_milp

log = logging.getLogger(__name__)

DEFAULT_PENALTY = 1000.0


class EmptyUncertaintySetError(ValueError):
    pass


class SolveError(RuntimeError):
    """Solver failure for one vehicle; ``vehicle`` names it."""

    def __init__(self, vehicle: int, message: str, best=None):
        super().__init__(f"vehicle {vehicle}: {message}")
        self.vehicle = vehicle
        self.best = best


@dataclass
class RobustInstance:
    fleet: Sequence[EvParams]
    grid: TimeGrid
    prices: PriceSeries
    forecasts: Sequence[ForecastInputs]
    uncertainty: Sequence[UncertaintySet]
    penalty_eur_per_kwh: float = DEFAULT_PENALTY

    @property
    def n_vehicles(self) -> int:
        return len(self.fleet)

    def validate(self):
        rep = validate_fleet(self.fleet, self.grid, self.uncertainty, self.forecasts)
        if len(self.prices) != self.grid.n_periods:
            rep.add(None, "price vector length differs from the time grid")
        if self.penalty_eur_per_kwh < 0:
            rep.add(None, "negative penalty")
        if not rep.ok:
            raise ValueError(f"invalid instance:\n{rep}")

    def subset(self, vehicles) -> "RobustInstance":
        vehicles = list(vehicles)
        return RobustInstance(
            fleet=[self.fleet[v] for v in vehicles],
            grid=self.grid,
            prices=self.prices,
            forecasts=[self.forecasts[v] for v in vehicles],
            uncertainty=[self.uncertainty[v] for v in vehicles],
            penalty_eur_per_kwh=self.penalty_eur_per_kwh,
        )


@dataclass
class WorstCaseResult:
    alpha: np.ndarray
    energy_kwh: float
    dual_k: float
    dual_lo: np.ndarray
    dual_hi: np.ndarray

    def dual_objective(self, u: UncertaintySet) -> float:
        return float(u.k_min * self.dual_k + u.alpha_lo @ self.dual_lo + u.alpha_hi @ self.dual_hi)


def _coefficients(c, ev: EvParams, grid: TimeGrid) -> np.ndarray:
    return grid.dt_hours * ev.efficiency * np.asarray(c, dtype=float)


def worst_case_oracle(c, ev: EvParams, grid: TimeGrid, u: UncertaintySet) -> WorstCaseResult:
    """Exact lower-level minimiser by sorting.

    Forced-available periods are always counted; the remaining
    ``max(0, K - #forced)`` periods are the free ones with the smallest
    delivered energy (ties: lowest period first).
    """
    if u.alpha_hi.sum() < u.k_min:
        raise EmptyUncertaintySetError(f"sum(alpha_hi)={u.alpha_hi.sum()} < K={u.k_min}")
    coeff = _coefficients(c, ev, grid)
    lo = u.alpha_lo.astype(int)
    free = np.flatnonzero(u.free)
    m = max(0, u.k_min - int(lo.sum()))
    alpha = lo.copy()
    zeta = 0.0
    if m > 0:
        order = free[np.lexsort((free, coeff[free]))]
        picked = order[:m]
        alpha[picked] = 1
        zeta = float(coeff[picked].max())
    energy = float(coeff @ alpha)

    # dual certificate: zeta + b_lo + b_hi <= coeff, b_lo >= 0, b_hi <= 0
    dual_lo = np.zeros_like(coeff)
    dual_hi = np.zeros_like(coeff)
    forced = u.fixed_one
    dual_lo[forced] = np.maximum(coeff[forced] - zeta, 0.0)
    dual_hi[forced] = np.minimum(coeff[forced] - zeta, 0.0)
    sel_free = u.free & (alpha == 1)
    dual_hi[sel_free] = coeff[sel_free] - zeta
    zero = (u.alpha_hi == 0)
    dual_hi[zero] = np.minimum(coeff[zero] - zeta, 0.0)
    return WorstCaseResult(alpha=alpha, energy_kwh=energy, dual_k=zeta, dual_lo=dual_lo, dual_hi=dual_hi)


def worst_case_lp(c, ev: EvParams, grid: TimeGrid, u: UncertaintySet, options=None) -> WorstCaseResult:
    """Lower level as a linear program (binarity relaxed) solved by the simplex.

    The constraint matrix is totally unimodular, so the returned vertex is
    integral.
    """
    if u.alpha_hi.sum() < u.k_min:
        raise EmptyUncertaintySetError(f"sum(alpha_hi)={u.alpha_hi.sum()} < K={u.k_min}")
    T = grid.n_periods
    coeff = _coefficients(c, ev, grid)
    b = ModelBuilder()
    a = b.add_vars(T, 0.0, math.inf, coeff, "alpha")
    rk = b.add_row(a, 1.0, GE, u.k_min, "card")
    rlo = [b.add_row([a[t]], [1.0], GE, u.alpha_lo[t], f"lo[{t}]") for t in range(T)]
    rhi = [b.add_row([a[t]], [1.0], LE, u.alpha_hi[t], f"hi[{t}]") for t in range(T)]
    sol = solve_lp(b.build(), options=options)
    if not sol.optimal:
        raise LpError(f"worst-case LP status {sol.status}")
    return WorstCaseResult(
        alpha=sol.x[a],
        energy_kwh=float(sol.objective),
        dual_k=float(sol.duals[rk]),
        dual_lo=sol.duals[rlo],
        dual_hi=sol.duals[rhi],
    )


# single-level reformulation ---------------------------------------------------


@dataclass
class VehicleModel:
    """Column index blocks of a per-vehicle model."""

    milp: MilpProblem
    c: np.ndarray
    e: np.ndarray
    s_pos: np.ndarray
    s_neg: np.ndarray
    z: np.ndarray
    alpha: np.ndarray
    beta_lo: np.ndarray
    beta_hi: np.ndarray
    zeta: int
    rows: dict = field(default_factory=dict)


def _add_operation_block(b: ModelBuilder, inst: RobustInstance, v: int, cap=None):
    """Charging, SOC and slack columns plus SOC bounds; shared by all models.

    ``cap`` overrides the per-period charging limit (default: max_charge_kw).
    """
    T, dt = inst.grid.n_periods, inst.grid.dt_hours
    ev = inst.fleet[v]
    lam = inst.prices.eur_per_kwh
    P = inst.penalty_eur_per_kwh
    c = b.add_vars(T, 0.0, ev.max_charge_kw if cap is None else cap, lam * dt, "c")
    e = b.add_vars(T, ev.e_min_kwh, ev.e_max_kwh, 0.0, "e")
    sp_ = b.add_vars(T, 0.0, math.inf, P, "s_plus")
    sn = b.add_vars(T, 0.0, math.inf, P, "s_minus")
    return c, e, sp_, sn


def _add_balance(b: ModelBuilder, inst: RobustInstance, v: int, e, sp_, sn, charge, xi, gain=None):
    """SOC balance e_t = e_{t-1} + dt*eta*charge_t - xi_t + s+ - s-, and e_T = e_0."""
    T, dt = inst.grid.n_periods, inst.grid.dt_hours
    ev = inst.fleet[v]
    k = dt * ev.efficiency
    gain = np.ones(T) if gain is None else gain
    rows = []
    for t in range(T):
        idx = [e[t], charge[t], sp_[t], sn[t]]
        coef = [1.0, -k * gain[t], -1.0, 1.0]
        rhs = -xi[t]
        if t == 0:
            rhs += ev.e_init_kwh
        else:
            idx.append(e[t - 1])
            coef.append(-1.0)
        rows.append(b.add_row(idx, coef, EQ, rhs, f"balance[{t}]"))
    rows.append(b.add_row([e[T - 1]], [1.0], EQ, ev.e_init_kwh, "boundary"))
    return rows


def build_single_level(inst: RobustInstance, v: int, big_m: Optional[float] = None) -> VehicleModel:
    """Single-level MILP of vehicle ``v``.

    Lower-level primal feasibility, dual feasibility and the strong-duality
    equality replace the inner minimisation; ``z = c * alpha`` is linearised
    with ``M = max_charge_kw`` unless ``big_m`` overrides it.
    """
    T, dt = inst.grid.n_periods, inst.grid.dt_hours
    ev = inst.fleet[v]
    u = inst.uncertainty[v]
    xi = inst.forecasts[v].xi_hat_kwh
    k = dt * ev.efficiency
    M = ev.max_charge_kw if big_m is None else big_m

    b = ModelBuilder()
    c, e, sp_, sn = _add_operation_block(b, inst, v)
    z = b.add_vars(T, 0.0, ev.max_charge_kw, 0.0, "z")
    alpha = b.add_vars(T, u.alpha_lo, u.alpha_hi, 0.0, "alpha")
    beta_lo = b.add_vars(T, 0.0, math.inf, 0.0, "beta_lo")
    beta_hi = b.add_vars(T, -math.inf, 0.0, 0.0, "beta_hi")
    zeta = b.add_var(0.0, math.inf, 0.0, "zeta")

    rows = {"balance": _add_balance(b, inst, v, e, sp_, sn, z, xi)}
    dual_idx = np.concatenate([[zeta], beta_lo, beta_hi])
    dual_coef = np.concatenate([[u.k_min], u.alpha_lo, u.alpha_hi]).astype(float)
    rows["demand"] = b.add_row(dual_idx, dual_coef, GE, float(xi.sum()), "robust_demand")
    rows["card"] = b.add_row(alpha, 1.0, GE, u.k_min, "card")
    rows["dual_feas"] = [
        b.add_row([zeta, beta_lo[t], beta_hi[t], c[t]], [1.0, 1.0, 1.0, -k], LE, 0.0, f"dual_feas[{t}]")
        for t in range(T)
    ]
    rows["strong_duality"] = b.add_row(
        np.concatenate([dual_idx, z]), np.concatenate([dual_coef, np.full(T, -k)]), EQ, 0.0, "strong_duality"
    )
    rows["z_le_c"] = [b.add_row([z[t], c[t]], [1.0, -1.0], LE, 0.0, f"z_le_c[{t}]") for t in range(T)]
    rows["c_z_bigm"] = [
        b.add_row([c[t], z[t], alpha[t]], [1.0, -1.0, M], LE, M, f"c_z_bigm[{t}]") for t in range(T)
    ]
    rows["z_bigm"] = [b.add_row([z[t], alpha[t]], [1.0, -M], LE, 0.0, f"z_bigm[{t}]") for t in range(T)]

    return VehicleModel(
        milp=MilpProblem(b.build(), alpha),
        c=c, e=e, s_pos=sp_, s_neg=sn, z=z, alpha=alpha,
        beta_lo=beta_lo, beta_hi=beta_hi, zeta=zeta, rows=rows,
    )


@dataclass
class VehicleResult:
    c: np.ndarray
    z: np.ndarray
    e: np.ndarray
    s_pos: np.ndarray
    s_neg: np.ndarray
    alpha: np.ndarray
    zeta: float
    beta_lo: np.ndarray
    beta_hi: np.ndarray
    objective: float
    nodes: int = 0
    lp_iterations: int = 0
    rounds: int = 0
    cuts: int = 0


def _fixed_alpha_heuristic(model: VehicleModel, inst: RobustInstance, v: int, options):
    """Root heuristic: let the adversary answer the relaxed charging plan,
    fix that pattern and re-optimise the remaining LP."""
    lp = model.milp.lp
    ev, grid, u = inst.fleet[v], inst.grid, inst.uncertainty[v]

    def heuristic(x, basis=None):
        alpha = worst_case_oracle(np.clip(x[model.c], 0, None), ev, grid, u).alpha
        for _ in range(3):
            lo, hi = lp.lo.copy(), lp.hi.copy()
            lo[model.alpha] = hi[model.alpha] = alpha
            sol = solve_lp(lp.with_bounds(lo, hi), warm_start=basis, options=options)
            if not sol.optimal:
                return None
            basis = sol.basis
            nxt = worst_case_oracle(sol.x[model.c], ev, grid, u).alpha
            if np.array_equal(nxt, alpha):
                break
            alpha = nxt
        return sol.x

    return heuristic


def solve_vehicle_milp(inst: RobustInstance, v: int, gap_target: float = 0.0, node_limit=None,
                       options: Optional[SimplexOptions] = None, big_m=None) -> VehicleResult:
    model = build_single_level(inst, v, big_m=big_m)
    res = solve_milp(
        model.milp,
        gap_target=gap_target,
        node_limit=node_limit,
        heuristic=_fixed_alpha_heuristic(model, inst, v, options),
        options=options,
    )
    if res.x is None:
        raise SolveError(v, f"MILP status {res.status}")
    x = res.x
    return VehicleResult(
        c=x[model.c], z=x[model.z], e=x[model.e], s_pos=x[model.s_pos], s_neg=x[model.s_neg],
        alpha=np.round(x[model.alpha]).astype(int), zeta=float(x[model.zeta]),
        beta_lo=x[model.beta_lo], beta_hi=x[model.beta_hi], objective=res.objective,
        nodes=res.nodes, lp_iterations=res.lp_iterations,
    )


def _assemble(inst: RobustInstance, results: list, method: str) -> ScheduleSolution:
    grid = inst.grid

    def stack(name):
        return np.vstack([getattr(r, name) for r in results])

    wc = np.array([
        float(_coefficients(r.z, inst.fleet[v], grid).sum()) for v, r in enumerate(results)
    ])
    return ScheduleSolution(
        charge_kw=stack("c"),
        linear_charge_kw=stack("z"),
        soc_kwh=stack("e"),
        slack_pos_kwh=stack("s_pos"),
        slack_neg_kwh=stack("s_neg"),
        wc_alpha=stack("alpha"),
        wc_energy_kwh=wc,
        dual_k=np.array([r.zeta for r in results]),
        dual_lo=stack("beta_lo"),
        dual_hi=stack("beta_hi"),
        objective_eur=float(sum(r.objective for r in results)),
        method=method,
        stats={
            "nodes": int(sum(r.nodes for r in results)),
            "lp_iterations": int(sum(r.lp_iterations for r in results)),
            "rounds": int(sum(r.rounds for r in results)),
            "cuts": int(sum(r.cuts for r in results)),
        },
    )


def _map_vehicles(fn, n: int, threads: Optional[int] = None) -> list:
    if threads and threads > 1 and n > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, range(n)))
    return [fn(v) for v in range(n)]


def solve_robust(inst: RobustInstance, gap_target: float = 0.0, node_limit=None,
                 options: Optional[SimplexOptions] = None, threads: Optional[int] = None) -> ScheduleSolution:
    """Solve the robust model vehicle by vehicle through the single-level MILP."""
    inst.validate()

    def one(v):
        try:
            return solve_vehicle_milp(inst, v, gap_target, node_limit, options)
        except SolveError:
            raise
        except (LpError, ValueError) as exc:
            raise SolveError(v, str(exc)) from exc

    return _assemble(inst, _map_vehicles(one, inst.n_vehicles, threads), "robust")


# constraint generation --------------------------------------------------------


# fractional master nodes feed the incumbent heuristic only every
# HEUR_EVERY separation calls; integral ones always do
HEUR_EVERY = 10


def solve_vehicle_ccg(inst: RobustInstance, v: int, tol: float = 1e-7, max_rounds: Optional[int] = None,
                      options: Optional[SimplexOptions] = None) -> VehicleResult:
    """Constraint generation for vehicle ``v``.

    The master keeps the linearised coupling ``z = c * alpha`` with a binary
    pattern, but replaces the dual certificate of the lower level by cuts
    ``sum(k*z) <= sum(k*c*alpha_j)`` for adversarial patterns ``alpha_j``.
    The master is solved once, as a branch-and-cut: every node solution is
    shown to the oracle, and when the oracle finds a pattern delivering
    less energy than the node claims, that pattern becomes a cut for the
    whole tree. A round is an integral master point the oracle rejects;
    cuts found at fractional nodes are counted separately. Separating at
    fractional nodes matters: with cuts only at integral points the tree
    explodes. The
    master also selects exactly ``max(0, K - #forced)`` free periods, which
    loses nothing since extra selections carry zero charge.

    Every pattern the oracle returns is evaluated with the fixed-pattern LP.
    Those points are feasible for the bilevel problem, hence for the master,
    and the best one is the incumbent the tree has to beat.
    """
    T, dt = inst.grid.n_periods, inst.grid.dt_hours
    ev, u = inst.fleet[v], inst.uncertainty[v]
    xi = inst.forecasts[v].xi_hat_kwh
    k = dt * ev.efficiency
    M = ev.max_charge_kw
    max_rounds = max_rounds or 2 * T

    b = ModelBuilder()
    c, e, sp_, sn = _add_operation_block(b, inst, v)
    z = b.add_vars(T, 0.0, ev.max_charge_kw, 0.0, "z")
    alpha = b.add_vars(T, u.alpha_lo, u.alpha_hi, 0.0, "alpha")
    _add_balance(b, inst, v, e, sp_, sn, z, xi)
    b.add_row(z, k, GE, float(xi.sum()), "robust_demand")
    b.add_row(alpha, 1.0, GE, u.k_min, "card")
    free = np.flatnonzero(u.free)
    r_free = max(0, u.k_min - int(u.alpha_lo.sum()))
    if free.size:
        b.add_row(alpha[free], 1.0, EQ, r_free, "card_free")
    for t in range(T):
        b.add_row([z[t], c[t]], [1.0, -1.0], LE, 0.0, f"z_le_c[{t}]")
        b.add_row([c[t], z[t], alpha[t]], [1.0, -1.0, M], LE, M, f"c_z_bigm[{t}]")
        b.add_row([z[t], alpha[t]], [1.0, -M], LE, 0.0, f"z_bigm[{t}]")

    best: Optional[VehicleResult] = None
    tried: set = set()
    fixed_cache: dict = {}

    def offer(pattern):
        # bilevel-feasible point from a pattern, kept if it beats the best
        nonlocal best
        key = tuple(int(a) for a in pattern)
        if key in tried:
            return
        tried.add(key)
        r = _fixed_pattern_value(inst, v, np.array(key), options, fixed_cache)
        if r is not None and (best is None or r.objective < best.objective):
            best = r

    def as_master_point(r: VehicleResult, n: int) -> np.ndarray:
        x = np.zeros(n)
        x[c], x[e], x[sp_], x[sn], x[z], x[alpha] = r.c, r.e, r.s_pos, r.s_neg, r.z, r.alpha
        return x

    def pick(order):
        a = u.alpha_lo.copy()
        a[free[order[:r_free]]] = 1
        return a

    calls = 0

    def heuristic(x, basis=None):
        nonlocal calls
        calls += 1
        integral = np.abs(x[alpha] - np.round(x[alpha])).max(initial=0) <= 1e-9
        if not integral and calls % HEUR_EVERY and best is not None:
            return None
        cc = np.clip(x[c], 0, None)
        offer(worst_case_oracle(cc, ev, inst.grid, u).alpha)
        if free.size:
            am = x[alpha][free]
            # a minimiser of cc that breaks price ties towards the master's
            # pattern, and the master's pattern rounded on its own
            offer(pick(np.lexsort((-am, np.round(cc[free], 9)))))
            offer(pick(np.lexsort((np.arange(free.size), -am))))
        return None if best is None else as_master_point(best, len(x))

    rounds = cuts = 0

    def lazy(x):
        # oracle answer to a master node; a better pattern is a cut
        nonlocal rounds, cuts
        wc = worst_case_oracle(x[c], ev, inst.grid, u)
        if wc.energy_kwh >= float(k * x[z].sum()) - tol:
            return []
        cuts += 1
        if np.abs(x[alpha] - np.round(x[alpha])).max(initial=0) <= 1e-9:
            rounds += 1
            if rounds > max_rounds:
                raise SolveError(v, f"constraint generation did not converge in {max_rounds} rounds", best=best)
        offer(wc.alpha)
        sel = np.flatnonzero(wc.alpha)
        return [(np.concatenate([z, c[sel]]), np.concatenate([np.full(T, k), np.full(len(sel), -k)]), LE, 0.0)]

    res = solve_milp(MilpProblem(b.build(), alpha), heuristic=heuristic, options=options, lazy=lazy)
    if res.x is None:
        raise SolveError(v, f"master status {res.status}", best=best)
    x = res.x
    pattern = np.round(x[alpha]).astype(int)
    # a master point accepted by the oracle within tol: replace it by the
    # fixed-pattern LP, which carries the exact lower-level dual certificate
    exact = _fixed_pattern_value(inst, v, pattern, options, fixed_cache)
    if exact is not None and exact.objective <= res.objective + 1e-9 * max(1.0, abs(res.objective)):
        r = exact
    else:
        wc = worst_case_oracle(x[c], ev, inst.grid, u)
        r = VehicleResult(
            c=x[c], z=x[z], e=x[e], s_pos=x[sp_], s_neg=x[sn], alpha=pattern, zeta=wc.dual_k,
            beta_lo=wc.dual_lo, beta_hi=wc.dual_hi, objective=res.objective,
        )
    r.nodes, r.lp_iterations, r.rounds, r.cuts = res.nodes, res.lp_iterations, rounds + 1, cuts
    return r


def _fixed_pattern_value(inst: RobustInstance, v: int, alpha, options,
                         cache: Optional[dict] = None) -> Optional[VehicleResult]:
    """Single-level model with the pattern fixed (an LP). ``cache`` keeps the
    model and the last optimal basis between calls for the same vehicle."""
    cache = {} if cache is None else cache
    if "model" not in cache:
        cache["model"] = build_single_level(inst, v)
    model = cache["model"]
    lp = model.milp.lp
    lo, hi = lp.lo.copy(), lp.hi.copy()
    lo[model.alpha] = hi[model.alpha] = alpha
    sol = solve_lp(lp.with_bounds(lo, hi), warm_start=cache.get("basis"), options=options)
    if not sol.optimal:
        return None
    cache["basis"] = sol.basis
    x = sol.x
    return VehicleResult(
        c=x[model.c], z=x[model.z], e=x[model.e], s_pos=x[model.s_pos], s_neg=x[model.s_neg],
        alpha=np.asarray(alpha, int), zeta=float(x[model.zeta]), beta_lo=x[model.beta_lo],
        beta_hi=x[model.beta_hi], objective=sol.objective,
    )


def solve_robust_ccg(inst: RobustInstance, tol: float = 1e-7, max_rounds: Optional[int] = None,
                     options: Optional[SimplexOptions] = None, threads: Optional[int] = None) -> ScheduleSolution:
    inst.validate()

    def one(v):
        try:
            return solve_vehicle_ccg(inst, v, tol, max_rounds, options)
        except SolveError:
            raise
        except (LpError, ValueError) as exc:
            raise SolveError(v, str(exc)) from exc

    return _assemble(inst, _map_vehicles(one, inst.n_vehicles, threads), "robust-ccg")
