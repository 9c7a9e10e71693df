"""Real-time validation: the aggregate day-ahead purchase is fixed, the day
is revealed, and the purchased power is re-dispatched to the vehicles that
are actually plugged in so as to minimise battery-balance deviations."""
from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from .data import InsufficientHistoryError, build_uncertainty_set, forecast, same_weekday_window
from .deterministic import solve_deterministic
from .fleet import DayRecord, ScheduleSolution
from .lp import EQ, LE, Basis, LpError, ModelBuilder, SimplexOptions, solve_lp
from .robust import RobustInstance, solve_robust

METHODS = ("deterministic", "robust")


@dataclass
class RealtimeOutcome:
    allocation_kw: np.ndarray
    soc_kwh: np.ndarray
    deviation_pos_kwh: np.ndarray
    deviation_neg_kwh: np.ndarray
    d_rt_kwh: float
    penalty_cost_eur: float
    basis: Optional[Basis] = None

    @property
    def vehicle_deviation_kwh(self) -> np.ndarray:
        return (self.deviation_pos_kwh + self.deviation_neg_kwh).sum(axis=1)


@dataclass
class DayMetrics:
    day: int
    method: str
    c_da_eur: float
    p_da_kw: float
    d_rt_kwh: float
    objective_eur: float = math.nan
    seconds: float = 0.0


def simulate_realtime(purchased_kw, realized: DayRecord, inst: RobustInstance,
                      options: Optional[SimplexOptions] = None,
                      warm_start: Optional[Basis] = None) -> RealtimeOutcome:
    """Re-dispatch a fixed purchase against the realised day.

    ``purchased_kw`` is either the aggregate per-period purchase or a
    :class:`ScheduleSolution` (its column sums are used). Unused purchased
    power is curtailed at no cost. ``warm_start`` may be the basis of an
    earlier replay of the same day; only the purchase limits differ, so it
    is usually close to optimal.
    """
    if isinstance(purchased_kw, ScheduleSolution):
        purchased_kw = purchased_kw.purchased_kw
    purchased_kw = np.maximum(np.asarray(purchased_kw, float), 0.0)
    V, T = realized.realized_alpha.shape
    if V != inst.n_vehicles or T != inst.grid.n_periods or len(purchased_kw) != T:
        raise ValueError("dimensions of schedule, realisation and instance differ")
    dt = inst.grid.dt_hours
    P = inst.penalty_eur_per_kwh

    b = ModelBuilder()
    blocks = []
    for v, ev in enumerate(inst.fleet):
        a = b.add_vars(T, 0.0, ev.max_charge_kw * realized.realized_alpha[v], 0.0, f"a{v}")
        e = b.add_vars(T, ev.e_min_kwh, ev.e_max_kwh, 0.0, f"e{v}")
        sp_ = b.add_vars(T, 0.0, math.inf, 1.0, f"s_plus{v}")
        sn = b.add_vars(T, 0.0, math.inf, 1.0, f"s_minus{v}")
        k = dt * ev.efficiency
        xi = realized.realized_xi_kwh[v]
        for t in range(T):
            idx = [e[t], a[t], sp_[t], sn[t]]
            coef = [1.0, -k, -1.0, 1.0]
            rhs = -xi[t]
            if t == 0:
                rhs += ev.e_init_kwh
            else:
                idx.append(e[t - 1])
                coef.append(-1.0)
            b.add_row(idx, coef, EQ, rhs, f"balance[{v},{t}]")
        b.add_row([e[T - 1]], [1.0], EQ, ev.e_init_kwh, f"boundary[{v}]")
        blocks.append((a, e, sp_, sn))
    for t in range(T):
        b.add_row([blk[0][t] for blk in blocks], 1.0, LE, purchased_kw[t], f"purchase[{t}]")
    # objective in kWh; scaling by the penalty happens after the solve
    try:
        sol = solve_lp(b.build(), warm_start=warm_start, options=options)
    except LpError as exc:
        raise LpError(f"real-time LP failed: {exc}") from exc
    if not sol.optimal:
        raise LpError(f"real-time LP status {sol.status}")
    x = sol.x
    alloc = np.vstack([x[blk[0]] for blk in blocks])
    soc = np.vstack([x[blk[1]] for blk in blocks])
    s_pos = np.vstack([x[blk[2]] for blk in blocks])
    s_neg = np.vstack([x[blk[3]] for blk in blocks])
    d_rt = float(s_pos.sum() + s_neg.sum())
    return RealtimeOutcome(alloc, soc, s_pos, s_neg, d_rt, P * d_rt, sol.basis)


def day_ahead_cost(schedule: ScheduleSolution, inst: RobustInstance) -> float:
    return float(schedule.charge_kw.sum(axis=0) @ inst.prices.eur_per_kwh * inst.grid.dt_hours)


def solve_day_ahead(inst: RobustInstance, method: str, **kw) -> ScheduleSolution:
    if method == "robust":
        return solve_robust(inst, **kw)
    if method == "deterministic":
        kw.pop("gap_target", None)
        kw.pop("node_limit", None)
        return solve_deterministic(inst, **kw)
    raise ValueError(f"unknown method {method!r}")


def evaluate_day(inst: RobustInstance, method: str, realized: DayRecord, day: Optional[int] = None,
                 rt_warm_start: Optional[Basis] = None, **solver_kw) -> tuple:
    """Solve day-ahead with ``method`` and replay it against ``realized``.

    Returns ``(DayMetrics, ScheduleSolution, RealtimeOutcome)``.
    """
    t0 = time.perf_counter()
    sched = solve_day_ahead(inst, method, **solver_kw)
    out = simulate_realtime(sched, realized, inst, warm_start=rt_warm_start)
    m = DayMetrics(
        day=realized.date_index if day is None else day,
        method=method,
        c_da_eur=day_ahead_cost(sched, inst),
        p_da_kw=float(sched.charge_kw.sum()),
        d_rt_kwh=out.d_rt_kwh,
        objective_eur=sched.objective_eur,
        seconds=time.perf_counter() - t0,
    )
    return m, sched, out


@dataclass
class MonthConfig:
    lookback: int = 4
    penalty_eur_per_kwh: float = 1000.0
    methods: Sequence[str] = METHODS
    n_days: Optional[int] = 29
    first_day: Optional[int] = None
    gap_target: float = 0.0
    vehicles: Optional[Sequence[int]] = None
    threads: Optional[int] = None


def build_day_instance(history: Sequence[DayRecord], day: DayRecord, fleet, grid, lookback: int,
                       penalty: float, vehicles=None) -> RobustInstance:
    """Forecasts, prices and uncertainty sets for ``day`` from earlier records only."""
    fc, prices = forecast(history, day.weekday, lookback, target_index=day.date_index)
    window = same_weekday_window(history, day.date_index, day.weekday, lookback)
    vehicles = list(range(day.n_vehicles)) if vehicles is None else list(vehicles)
    return RobustInstance(
        fleet=[fleet[v] for v in vehicles],
        grid=grid,
        prices=prices,
        forecasts=[fc[v] for v in vehicles],
        uncertainty=[build_uncertainty_set(window, v) for v in vehicles],
        penalty_eur_per_kwh=penalty,
    )


def restrict_day(day: DayRecord, vehicles) -> DayRecord:
    if vehicles is None:
        return day
    vehicles = list(vehicles)
    return DayRecord(day.date_index, day.weekday, day.realized_alpha[vehicles], day.realized_xi_kwh[vehicles],
                     day.prices)


def evaluation_days(history: Sequence[DayRecord], cfg: MonthConfig) -> list:
    days = sorted(history, key=lambda d: d.date_index)
    eligible = []
    for d in days:
        same = [h for h in days if h.date_index < d.date_index and h.weekday == d.weekday]
        earlier = [h for h in days if h.date_index < d.date_index]
        if len(same) >= cfg.lookback and len(earlier) >= cfg.lookback:
            eligible.append(d)
    if cfg.first_day is not None:
        eligible = [d for d in eligible if d.date_index >= cfg.first_day]
    if cfg.n_days is not None:
        eligible = eligible[:cfg.n_days]
    return eligible


def aggregate(metrics: Sequence[DayMetrics]) -> dict:
    """Monthly summary per method: day-ahead cost and deviation statistics."""
    out = {}
    for method in sorted({m.method for m in metrics}):
        ms = [m for m in metrics if m.method == method]
        d = np.array([m.d_rt_kwh for m in ms])
        out[method] = {
            "days": len(ms),
            "c_da_total_eur": float(sum(m.c_da_eur for m in ms)),
            "p_da_total_kw": float(sum(m.p_da_kw for m in ms)),
            "d_rt_max_kwh": float(d.max()),
            "d_rt_mean_kwh": float(d.mean()),
            "d_rt_min_kwh": float(d.min()),
            "d_rt_total_kwh": float(d.sum()),
        }
    return out


def evaluate_month(history: Sequence[DayRecord], fleet, grid, cfg: Optional[MonthConfig] = None,
                   progress=None, record=None) -> tuple:
    """Rolling evaluation: for each eligible day forecast from the past, solve
    every method, replay against the realisation.

    ``progress(metrics)`` and ``record(metrics, schedule, outcome)`` are
    optional per-day callbacks.

    Returns ``(per_day_metrics, aggregate_dict)``.
    """
    cfg = cfg or MonthConfig()
    days = evaluation_days(history, cfg)
    if not days:
        raise InsufficientHistoryError(
            f"no day has {cfg.lookback} earlier same-weekday days in the history"
        )
    metrics = []
    basis = None  # replays share their shape, so each warm-starts the next
    for day in days:
        inst = build_day_instance(history, day, fleet, grid, cfg.lookback, cfg.penalty_eur_per_kwh, cfg.vehicles)
        realized = restrict_day(day, cfg.vehicles)
        for method in cfg.methods:
            m, sched, out = evaluate_day(inst, method, realized, rt_warm_start=basis, gap_target=cfg.gap_target,
                                         threads=cfg.threads)
            basis = out.basis
            metrics.append(m)
            if record is not None:
                record(m, sched, out)
            if progress is not None:
                progress(m)
    return metrics, aggregate(metrics)


def metrics_rows(metrics: Sequence[DayMetrics]) -> list:
    return [asdict(m) for m in metrics]
