"""Seeded self-checks behind ``evagg verify``.

Each suite returns a dict with ``passed``, ``failed`` and a list of
``failures`` (instance seed plus a short reason). Everything here runs on the
package's own solvers; the independent HiGHS-based references live in the
test-suite.
"""
from __future__ import annotations

import itertools
import math
from typing import Optional

import numpy as np

from .fleet import EvParams, ForecastInputs, PriceSeries, TimeGrid, UncertaintySet
from .robust import (
    RobustInstance,
    SolveError,
    _coefficients,
    _fixed_pattern_value,
    solve_vehicle_ccg,
    solve_vehicle_milp,
    worst_case_lp,
    worst_case_oracle,
)


def random_instance(rng: np.random.Generator, T: int, n_vehicles: int = 1) -> RobustInstance:
    """Random instance whose robust demand is always satisfiable."""
    dt = float(rng.choice([0.25, 0.5, 1.0]))
    grid = TimeGrid(T, dt)
    fleet, fc, us = [], [], []
    for _ in range(n_vehicles):
        cmax = float(rng.uniform(2.0, 8.0))
        eta = float(rng.uniform(0.8, 1.0))
        emin, emax = float(rng.uniform(0, 5)), float(rng.uniform(20, 50))
        ev = EvParams(cmax, eta, emin, emax, float(rng.uniform(emin, emax)))
        lo = (rng.random(T) < 0.25).astype(int)
        hi = np.maximum(lo, (rng.random(T) < 0.8).astype(int))
        free = int(((lo == 0) & (hi == 1)).sum())
        K = int(lo.sum() + rng.integers(0, free + 1))
        capacity = dt * eta * cmax * max(K, int(lo.sum()))
        xi = rng.random(T) * (rng.random(T) < 0.6)
        if xi.sum() > 0:
            xi *= capacity * rng.uniform(0.1, 0.95) / xi.sum()
        fleet.append(ev)
        fc.append(ForecastInputs(rng.random(T), xi))
        us.append(UncertaintySet(lo, hi, K))
    prices = PriceSeries(rng.uniform(0.02, 0.2, T))
    return RobustInstance(fleet, grid, prices, fc, us, float(rng.choice([10.0, 1000.0])))


def bilevel_enumeration(inst: RobustInstance, v: int, tol: float = 1e-7):
    """Bilevel optimum of vehicle ``v`` by trying every feasible pattern.

    For a fixed pattern the single-level model is an LP; its optimum counts
    only if the greedy oracle confirms the pattern is a lower-level minimiser
    of the resulting plan. Returns ``(value, pattern)``.
    """
    u, ev = inst.uncertainty[v], inst.fleet[v]
    best, best_a = math.inf, None
    for bits in itertools.product((0, 1), repeat=inst.grid.n_periods):
        a = np.array(bits)
        if not u.contains(a):
            continue
        res = _fixed_pattern_value(inst, v, a, None)
        if res is None:
            continue
        wc = worst_case_oracle(res.c, ev, inst.grid, u)
        if wc.energy_kwh < float(_coefficients(res.c, ev, inst.grid) @ a) - tol:
            continue
        if res.objective < best:
            best, best_a = res.objective, a
    return best, best_a


class _Suite:
    def __init__(self):
        self.passed = 0
        self.failures: list = []

    def check(self, ok: bool, seed, reason: str):
        if ok:
            self.passed += 1
        else:
            self.failures.append({"seed": seed, "reason": reason})

    def report(self) -> dict:
        return {"passed": self.passed, "failed": len(self.failures), "failures": self.failures}


def _close(a: float, b: float, tol: float) -> bool:
    return abs(a - b) <= tol * max(1.0, abs(a), abs(b))


def suite_oracle(seed: int, n: int) -> dict:
    """LP relaxation of the lower level is integral and matches the sort oracle."""
    s = _Suite()
    for i in range(n):
        rng = np.random.default_rng([seed, 1, i])
        T = int(rng.integers(4, 97))
        inst = random_instance(rng, T)
        ev, u = inst.fleet[0], inst.uncertainty[0]
        c = rng.uniform(0, ev.max_charge_kw, T) * (rng.random(T) < 0.7)
        if rng.random() < 0.3:
            c = np.round(c)  # ties
        lp = worst_case_lp(c, ev, inst.grid, u)
        ora = worst_case_oracle(c, ev, inst.grid, u)
        frac = float(np.abs(lp.alpha - np.round(lp.alpha)).max())
        s.check(frac <= 1e-9, i, f"fractional alpha {frac:.3g}")
        s.check(_close(lp.energy_kwh, ora.energy_kwh, 1e-9), i,
                f"lp {lp.energy_kwh!r} != oracle {ora.energy_kwh!r}")
    return s.report()


def _robust_cases(seed: int, n: int, t_max: int):
    for i in range(n):
        rng = np.random.default_rng([seed, 2, i])
        yield i, random_instance(rng, int(rng.integers(2, t_max + 1)))


def suite_bilevel(seed: int, n: int, t_max: int = 6, big_m: Optional[float] = None) -> dict:
    """Single-level MILP optimum equals pattern enumeration."""
    s = _Suite()
    for i, inst in _robust_cases(seed, n, t_max):
        M = None if big_m is None else big_m * inst.fleet[0].max_charge_kw
        ref, _ = bilevel_enumeration(inst, 0)
        try:
            res = solve_vehicle_milp(inst, 0, big_m=M)
        except SolveError as exc:
            s.check(False, i, str(exc))
            continue
        s.check(_close(res.objective, ref, 1e-6), i, f"milp {res.objective!r} != enumeration {ref!r}")
    return s.report()


def suite_internals(seed: int, n: int, t_max: int = 24, big_m: Optional[float] = None) -> dict:
    """Strong duality, integrality and exactness of the linearisation.

    The linearisation check re-solves the LP with the optimal pattern fixed
    and the nominal big-M; a too small M shows up as a worse MILP objective.
    """
    s = _Suite()
    for i, inst in _robust_cases(seed, n, t_max):
        ev, u = inst.fleet[0], inst.uncertainty[0]
        M = None if big_m is None else big_m * ev.max_charge_kw
        try:
            res = solve_vehicle_milp(inst, 0, big_m=M)
        except SolveError as exc:
            s.check(False, i, str(exc))
            continue
        k = _coefficients(1.0, ev, inst.grid)
        primal = float(k * res.z.sum())
        dual = float(u.k_min * res.zeta + u.alpha_lo @ res.beta_lo + u.alpha_hi @ res.beta_hi)
        s.check(abs(primal - dual) <= 1e-6, i, f"strong duality residual {primal - dual:.3g}")
        s.check(np.all(np.isin(res.alpha, (0, 1))), i, "non-binary pattern")
        s.check(float(np.abs(res.z - res.c * res.alpha).max()) <= 1e-9, i, "z differs from c*alpha")
        ref = _fixed_pattern_value(inst, 0, res.alpha, None)
        s.check(ref is not None and _close(res.objective, ref.objective, 1e-6), i,
                f"linearisation: milp {res.objective!r} vs fixed pattern "
                f"{None if ref is None else ref.objective!r}")
    return s.report()


def suite_ccg(seed: int, n: int, t_max: int = 24) -> dict:
    """Constraint generation agrees with the single-level MILP."""
    s = _Suite()
    for i, inst in _robust_cases(seed, n, t_max):
        a = solve_vehicle_milp(inst, 0)
        b = solve_vehicle_ccg(inst, 0)
        s.check(_close(a.objective, b.objective, 1e-6), i, f"milp {a.objective!r} != ccg {b.objective!r}")
    return s.report()


def run_all(seed: int = 0, n_oracle: int = 50, n_bilevel: int = 10, n_internal: int = 20,
            n_ccg: int = 20, big_m: Optional[float] = None) -> dict:
    """Run every suite. ``big_m`` scales the linearisation constant relative
    to the charging limit (1.0 is the nominal value; below 1.0 is a fault)."""
    suites = {
        "oracle_equivalence": suite_oracle(seed, n_oracle),
        "bilevel_enumeration": suite_bilevel(seed, n_bilevel, big_m=big_m),
        "strong_duality_integrality": suite_internals(seed, n_internal, big_m=big_m),
        "ccg_vs_milp": suite_ccg(seed, n_ccg),
    }
    return {
        "seed": seed,
        "big_m_scale": 1.0 if big_m is None else big_m,
        "suites": suites,
        "all_passed": all(r["failed"] == 0 for r in suites.values()),
    }
