"""Domain types for the aggregator: vehicles, time grid, prices, availability
uncertainty and solution containers.

Units throughout: energy kWh, power kW, money EUR, time h.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np


def _frozen(a, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class TimeGrid:
    n_periods: int = 96
    dt_hours: float = 0.25

    def __post_init__(self):
        if int(self.n_periods) != self.n_periods or self.n_periods < 1:
            raise ValueError(f"n_periods must be a positive integer, got {self.n_periods}")
        if not self.dt_hours > 0:
            raise ValueError(f"dt_hours must be positive, got {self.dt_hours}")

    @property
    def horizon_hours(self) -> float:
        return self.n_periods * self.dt_hours


@dataclass(frozen=True)
class EvParams:
    """Technical description of one vehicle (defaults: the 100-EV case study fleet)."""

    max_charge_kw: float = 7.4
    efficiency: float = 0.95
    e_min_kwh: float = 10.0
    e_max_kwh: float = 51.0
    e_init_kwh: Optional[float] = None
    kwh_per_km: float = 0.137

    def __post_init__(self):
        if self.e_init_kwh is None:
            object.__setattr__(self, "e_init_kwh", 0.5 * (self.e_min_kwh + self.e_max_kwh))


@dataclass(frozen=True)
class PriceSeries:
    eur_per_kwh: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "eur_per_kwh", _frozen(self.eur_per_kwh))
        if self.eur_per_kwh.ndim != 1 or not np.all(np.isfinite(self.eur_per_kwh)):
            raise ValueError("prices must be a finite 1-d vector")

    def __len__(self):
        return len(self.eur_per_kwh)


@dataclass(frozen=True)
class UncertaintySet:
    """Availability box ``alpha_lo <= alpha <= alpha_hi`` with ``sum(alpha) >= k_min``."""

    alpha_lo: np.ndarray
    alpha_hi: np.ndarray
    k_min: int = 0

    def __post_init__(self):
        object.__setattr__(self, "alpha_lo", _frozen(self.alpha_lo, int))
        object.__setattr__(self, "alpha_hi", _frozen(self.alpha_hi, int))
        object.__setattr__(self, "k_min", int(self.k_min))

    @property
    def n_periods(self) -> int:
        return len(self.alpha_lo)

    @property
    def fixed_one(self) -> np.ndarray:
        return (self.alpha_lo == 1) & (self.alpha_hi == 1)

    @property
    def free(self) -> np.ndarray:
        return (self.alpha_lo == 0) & (self.alpha_hi == 1)

    def contains(self, alpha) -> bool:
        alpha = np.asarray(alpha)
        return bool(
            np.all((alpha == 0) | (alpha == 1))
            and np.all(self.alpha_lo <= alpha)
            and np.all(alpha <= self.alpha_hi)
            and alpha.sum() >= self.k_min
        )

    @classmethod
    def fixed(cls, alpha) -> "UncertaintySet":
        """Degenerate set containing exactly ``alpha``."""
        alpha = np.asarray(alpha, int)
        return cls(alpha, alpha, int(alpha.sum()))


@dataclass(frozen=True)
class ForecastInputs:
    alpha_hat: np.ndarray
    xi_hat_kwh: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "alpha_hat", _frozen(self.alpha_hat))
        object.__setattr__(self, "xi_hat_kwh", _frozen(self.xi_hat_kwh))

    @property
    def demand_kwh(self) -> float:
        return float(self.xi_hat_kwh.sum())


@dataclass
class ScheduleSolution:
    """Charging plan of the whole fleet; matrices are vehicles x periods."""

    charge_kw: np.ndarray
    linear_charge_kw: np.ndarray
    soc_kwh: np.ndarray
    slack_pos_kwh: np.ndarray
    slack_neg_kwh: np.ndarray
    wc_alpha: np.ndarray
    wc_energy_kwh: np.ndarray
    dual_k: np.ndarray
    dual_lo: np.ndarray
    dual_hi: np.ndarray
    objective_eur: float
    method: str = ""
    stats: dict = field(default_factory=dict)

    @property
    def n_vehicles(self) -> int:
        return self.charge_kw.shape[0]

    @property
    def purchased_kw(self) -> np.ndarray:
        """Aggregate day-ahead purchase per period."""
        return self.charge_kw.sum(axis=0)


@dataclass(frozen=True)
class DayRecord:
    """One realised day: availability and consumption per vehicle and period."""

    date_index: int
    weekday: int
    realized_alpha: np.ndarray
    realized_xi_kwh: np.ndarray
    prices: PriceSeries

    def __post_init__(self):
        object.__setattr__(self, "realized_alpha", _frozen(self.realized_alpha, int))
        object.__setattr__(self, "realized_xi_kwh", _frozen(self.realized_xi_kwh))
        if not 0 <= self.weekday <= 6:
            raise ValueError(f"weekday must be in 0..6, got {self.weekday}")
        if self.realized_alpha.shape != self.realized_xi_kwh.shape:
            raise ValueError("availability and consumption matrices differ in shape")
        if self.realized_alpha.shape[1] != len(self.prices):
            raise ValueError("price vector length does not match the number of periods")
        if np.any((self.realized_xi_kwh > 0) & (self.realized_alpha == 1)):
            v, t = np.argwhere((self.realized_xi_kwh > 0) & (self.realized_alpha == 1))[0]
            raise ValueError(f"vehicle {v} consumes energy while available in period {t + 1}")

    @property
    def n_vehicles(self) -> int:
        return self.realized_alpha.shape[0]


@dataclass
class ValidationReport:
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, vehicle: Optional[int], message: str):
        self.violations.append((vehicle, message))

    def __bool__(self):
        return self.ok

    def __str__(self):
        if self.ok:
            return "pass"
        return "\n".join(f"vehicle {v}: {msg}" if v is not None else msg for v, msg in self.violations)


def validate_fleet(fleet, grid: TimeGrid, sets=None, forecasts=None) -> ValidationReport:
    """Check model preconditions; returns every violation rather than raising."""
    rep = ValidationReport()
    T = grid.n_periods
    if sets is not None and len(sets) != len(fleet):
        rep.add(None, f"{len(fleet)} vehicles but {len(sets)} uncertainty sets")
        return rep
    if forecasts is not None and len(forecasts) != len(fleet):
        rep.add(None, f"{len(fleet)} vehicles but {len(forecasts)} forecasts")
        return rep
    for v, ev in enumerate(fleet):
        if ev.max_charge_kw < 0:
            rep.add(v, "negative maximum charging power")
        if not 0 < ev.efficiency <= 1:
            rep.add(v, "efficiency outside (0, 1]")
        if ev.e_min_kwh < 0 or ev.e_min_kwh > ev.e_max_kwh:
            rep.add(v, "energy bounds inconsistent")
        if ev.e_init_kwh < ev.e_min_kwh:
            rep.add(v, "initial SOC below minimum")
        if ev.e_init_kwh > ev.e_max_kwh:
            rep.add(v, "initial SOC above maximum")
        if ev.kwh_per_km < 0:
            rep.add(v, "negative consumption rate")
        if sets is not None:
            u = sets[v]
            if len(u.alpha_lo) != T or len(u.alpha_hi) != T:
                rep.add(v, "uncertainty set length differs from the time grid")
                continue
            if not (np.isin(u.alpha_lo, (0, 1)).all() and np.isin(u.alpha_hi, (0, 1)).all()):
                rep.add(v, "availability bounds must be binary")
            if np.any(u.alpha_lo > u.alpha_hi):
                rep.add(v, "alpha_lo exceeds alpha_hi")
            if u.k_min < 0:
                rep.add(v, "negative k_min")
            if u.alpha_hi.sum() < u.k_min:
                rep.add(v, "empty uncertainty set")
        if forecasts is not None:
            f = forecasts[v]
            if len(f.alpha_hat) != T or len(f.xi_hat_kwh) != T:
                rep.add(v, "forecast length differs from the time grid")
                continue
            if np.any((f.alpha_hat < 0) | (f.alpha_hat > 1)):
                rep.add(v, "expected availability outside [0, 1]")
            if np.any(f.xi_hat_kwh < 0):
                rep.add(v, "negative expected consumption")
    return rep


def validate_solution(sol: ScheduleSolution, fleet, tol: float = 1e-6) -> ValidationReport:
    """Bounds, dual signs and binarity of a solver result."""
    rep = ValidationReport()
    for v, ev in enumerate(fleet):
        c = sol.charge_kw[v]
        if c.min() < -tol or c.max() > ev.max_charge_kw + tol:
            rep.add(v, "charging power outside [0, max]")
        e = sol.soc_kwh[v]
        if e.min() < ev.e_min_kwh - tol or e.max() > ev.e_max_kwh + tol:
            rep.add(v, "state of charge outside bounds")
        if sol.slack_pos_kwh[v].min() < -tol or sol.slack_neg_kwh[v].min() < -tol:
            rep.add(v, "negative slack")
        a = sol.wc_alpha[v]
        if np.abs(a - np.round(a)).max() > tol or a.min() < -tol or a.max() > 1 + tol:
            rep.add(v, "worst-case availability not binary")
        if sol.dual_k[v] < -tol:
            rep.add(v, "cardinality dual negative")
        if sol.dual_lo[v].min() < -tol:
            rep.add(v, "lower-bound duals negative")
        if sol.dual_hi[v].max() > tol:
            rep.add(v, "upper-bound duals positive")
    return rep
