"""Deterministic baseline: expected availability scales the charging cap and
expected consumption drives the SOC balance."""
from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from .fleet import ScheduleSolution
from .lp import LpError, LpProblem, ModelBuilder, SimplexOptions, solve_lp
from .robust import RobustInstance, SolveError, _add_balance, _add_operation_block, _map_vehicles


def build_deterministic(inst: RobustInstance, vehicles: Optional[Sequence[int]] = None):
    """LP over ``c, e, s+, s-`` for the given vehicles (default: all).

    Returns ``(problem, blocks)`` where ``blocks[i]`` holds the column index
    arrays ``(c, e, s_plus, s_minus)`` of the i-th listed vehicle.
    """
    vehicles = range(inst.n_vehicles) if vehicles is None else vehicles
    b = ModelBuilder()
    blocks = []
    for v in vehicles:
        ev, f = inst.fleet[v], inst.forecasts[v]
        c, e, sp_, sn = _add_operation_block(b, inst, v, cap=ev.max_charge_kw * np.asarray(f.alpha_hat))
        _add_balance(b, inst, v, e, sp_, sn, c, f.xi_hat_kwh)
        blocks.append((c, e, sp_, sn))
    return b.build(), blocks


def solve_deterministic(inst: RobustInstance, options: Optional[SimplexOptions] = None,
                        threads: Optional[int] = None) -> ScheduleSolution:
    inst.validate()
    T = inst.grid.n_periods

    def one(v):
        p, [(c, e, sp_, sn)] = build_deterministic(inst, [v])
        try:
            sol = solve_lp(p, options=options)
        except LpError as exc:
            raise SolveError(v, str(exc)) from exc
        if not sol.optimal:
            raise SolveError(v, f"LP status {sol.status}")
        x = sol.x
        return x[c], x[e], x[sp_], x[sn], sol.objective, sol.iterations

    res = _map_vehicles(one, inst.n_vehicles, threads)
    V = inst.n_vehicles
    charge = np.vstack([r[0] for r in res])
    return ScheduleSolution(
        charge_kw=charge,
        linear_charge_kw=charge.copy(),
        soc_kwh=np.vstack([r[1] for r in res]),
        slack_pos_kwh=np.vstack([r[2] for r in res]),
        slack_neg_kwh=np.vstack([r[3] for r in res]),
        wc_alpha=np.zeros((V, T), dtype=int),
        wc_energy_kwh=np.array([f.demand_kwh for f in inst.forecasts]),
        dual_k=np.zeros(V),
        dual_lo=np.zeros((V, T)),
        dual_hi=np.zeros((V, T)),
        objective_eur=float(sum(r[4] for r in res)),
        method="deterministic",
        stats={"lp_iterations": int(sum(r[5] for r in res))},
    )
