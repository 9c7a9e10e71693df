"""Driving-pattern history: synthetic generation, CSV persistence, expected
values and uncertainty sets.

A vehicle is available before its first trip of the day and after its last
one; between departure and return it is away (parked or moving) and cannot
charge. Consumption is booked in the periods spent moving.
"""
from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .fleet import DayRecord, EvParams, ForecastInputs, PriceSeries, TimeGrid, UncertaintySet

HISTORY_HEADER = ["day", "weekday", "vehicle", "period", "alpha", "xi_kwh"]
PRICES_HEADER = ["day", "period", "eur_per_kwh"]


class SchemaError(ValueError):
    pass


class InsufficientHistoryError(ValueError):
    pass


@dataclass(frozen=True)
class TripSpec:
    """One trip; periods are 1-based, the vehicle moves in ``[depart, arrive)``."""

    depart_period: int
    arrive_period: int
    distance_km: float

    def __post_init__(self):
        if not 1 <= self.depart_period < self.arrive_period:
            raise ValueError(f"need 1 <= depart < arrive, got {self.depart_period}, {self.arrive_period}")
        if self.distance_km < 0:
            raise ValueError("distance must be nonnegative")


def day_profile(trips: Sequence[TripSpec], ev: EvParams, n_periods: int):
    """Availability and consumption vectors for one vehicle-day."""
    alpha = np.ones(n_periods, dtype=int)
    xi = np.zeros(n_periods)
    if not trips:
        return alpha, xi
    for tr in trips:
        if tr.arrive_period > n_periods + 1:
            raise ValueError("trip ends after the horizon")
    first = min(tr.depart_period for tr in trips)
    last = max(tr.arrive_period for tr in trips)
    alpha[first - 1:last - 1] = 0
    for tr in trips:
        moving = np.arange(tr.depart_period - 1, tr.arrive_period - 1)
        xi[moving] += tr.distance_km * ev.kwh_per_km / len(moving)
    return alpha, xi


@dataclass
class GeneratorConfig:
    """Parameters of the synthetic commuter fleet.

    Periods are 1-based. Each vehicle draws its own habitual departure and
    return periods around the fleet means and its own day-to-day spread from
    ``[spread_min, spread_max]``, so the fleet mixes predictable and erratic
    drivers.
    """

    seed: int = 2018
    n_vehicles: int = 100
    n_days: int = 57
    n_periods: int = 96
    dt_hours: float = 0.25
    start_weekday: int = 0
    depart_mean: float = 31.0
    arrive_mean: float = 73.0
    habit_spread: float = 6.0
    spread_min: float = 0.5
    spread_max: float = 10.0
    distance_log_mean: float = 3.2
    distance_log_sigma: float = 0.45
    distance_day_sigma: float = 0.25
    speed_kmh: float = 40.0
    p_no_trip_weekday: float = 0.05
    p_no_trip_weekend: float = 0.45
    weekend_depart_mean: float = 44.0
    weekend_arrive_mean: float = 64.0
    p_extra_trip: float = 0.2
    price_base: float = 0.055
    price_amplitude: float = 0.018
    price_noise: float = 0.006

    def validate(self):
        T = self.n_periods
        for name in ("depart_mean", "arrive_mean", "weekend_depart_mean", "weekend_arrive_mean"):
            if not 1 <= getattr(self, name) <= T:
                raise ValueError(f"{name} outside [1, {T}]")
        for name in ("p_no_trip_weekday", "p_no_trip_weekend", "p_extra_trip"):
            if not 0 <= getattr(self, name) <= 1:
                raise ValueError(f"{name} must be a probability")
        if self.n_vehicles < 1 or self.n_days < 1 or T < 4:
            raise ValueError("need at least one vehicle, one day and four periods")
        if self.spread_min < 0 or self.spread_max < self.spread_min:
            raise ValueError("spread bounds inconsistent")
        if self.dt_hours <= 0 or self.speed_kmh <= 0:
            raise ValueError("dt_hours and speed_kmh must be positive")
        if not 0 <= self.start_weekday <= 6:
            raise ValueError("start_weekday must be in 0..6")

    @property
    def grid(self) -> TimeGrid:
        return TimeGrid(self.n_periods, self.dt_hours)

    @classmethod
    def from_file(cls, path) -> "GeneratorConfig":
        """Read ``key = value`` lines; ``#`` starts a comment."""
        types = {f.name: f.type for f in fields(cls)}
        kw = {}
        for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise SchemaError(f"{path}:{lineno}: expected key = value")
            key, val = (s.strip() for s in line.split("=", 1))
            if key not in types:
                raise SchemaError(f"{path}:{lineno}: unknown key {key!r}")
            kw[key] = int(val) if types[key] in (int, "int") else float(val)
        cfg = cls(**kw)
        cfg.validate()
        return cfg

    def to_file(self, path):
        lines = [f"{k} = {v}" for k, v in asdict(self).items()]
        Path(path).write_text("\n".join(lines) + "\n")


def _truncated_discrete_normal(rng, mean, sd, lo, hi):
    for _ in range(100):
        x = int(round(rng.normal(mean, sd))) if sd > 0 else int(round(mean))
        if lo <= x <= hi:
            return x
    return int(min(max(round(mean), lo), hi))


def _leg_periods(km, cfg):
    return max(1, math.ceil(km / (cfg.speed_kmh * cfg.dt_hours)))


def _vehicle_day_trips(rng, cfg, habit, weekday) -> list:
    T = cfg.n_periods
    weekend = weekday >= 5
    if rng.random() < (cfg.p_no_trip_weekend if weekend else cfg.p_no_trip_weekday):
        return []
    dep_mean = cfg.weekend_depart_mean if weekend else habit["depart"]
    arr_mean = cfg.weekend_arrive_mean if weekend else habit["arrive"]
    sd = habit["spread"] * (1.5 if weekend else 1.0)
    km = habit["km"] * math.exp(rng.normal(0.0, cfg.distance_day_sigma))
    if weekend:
        km *= 0.6
    leg = km / 2
    dur = _leg_periods(leg, cfg)
    dep = _truncated_discrete_normal(rng, dep_mean, sd, 1, T - 2 * dur - 1)
    arr = _truncated_discrete_normal(rng, arr_mean, sd, dep + 2 * dur, T + 1)
    trips = [TripSpec(dep, dep + dur, leg), TripSpec(arr - dur, arr, leg)]
    if rng.random() < cfg.p_extra_trip and arr - dep > 2 * dur + 4:
        # short errand while away from home
        extra_km = float(rng.uniform(3, 15))
        ed = _leg_periods(extra_km, cfg)
        start = int(rng.integers(dep + dur, max(dep + dur + 1, arr - dur - ed)))
        if start + ed <= arr - dur:
            trips.insert(1, TripSpec(start, start + ed, extra_km))
    return trips


def synthetic_prices(rng, cfg: GeneratorConfig) -> np.ndarray:
    """Day-ahead prices with a night trough and morning/evening peaks (EUR/kWh)."""
    T = cfg.n_periods
    hours = (np.arange(T) + 0.5) * cfg.dt_hours * 24.0 / (T * cfg.dt_hours)
    shape = (
        -0.9 * np.exp(-((hours - 4.0) ** 2) / 6.0)
        + 0.6 * np.exp(-((hours - 9.0) ** 2) / 3.0)
        + 1.0 * np.exp(-((hours - 20.5) ** 2) / 4.0)
        - 0.3 * np.exp(-((hours - 15.0) ** 2) / 4.0)
    )
    level = cfg.price_base + rng.normal(0, cfg.price_noise)
    p = level + cfg.price_amplitude * shape + rng.normal(0, cfg.price_noise / 3, T)
    return np.round(np.maximum(p, 0.001), 6)


def make_fleet(cfg: GeneratorConfig) -> list:
    return [EvParams() for _ in range(cfg.n_vehicles)]


def generate_history(cfg: GeneratorConfig, fleet: Optional[Sequence[EvParams]] = None) -> list:
    """Seeded synthetic history, one :class:`DayRecord` per day."""
    cfg.validate()
    fleet = list(fleet) if fleet is not None else make_fleet(cfg)
    if len(fleet) != cfg.n_vehicles:
        raise ValueError("fleet size differs from n_vehicles")
    rng = np.random.default_rng(cfg.seed)
    habits = []
    for _ in range(cfg.n_vehicles):
        habits.append({
            "depart": cfg.depart_mean + rng.normal(0, cfg.habit_spread / 2),
            "arrive": cfg.arrive_mean + rng.normal(0, cfg.habit_spread),
            "spread": float(rng.uniform(cfg.spread_min, cfg.spread_max)),
            "km": float(math.exp(rng.normal(cfg.distance_log_mean, cfg.distance_log_sigma))),
        })
    T = cfg.n_periods
    days = []
    for d in range(cfg.n_days):
        weekday = (cfg.start_weekday + d) % 7
        alpha = np.ones((cfg.n_vehicles, T), dtype=int)
        xi = np.zeros((cfg.n_vehicles, T))
        for v, ev in enumerate(fleet):
            trips = _vehicle_day_trips(rng, cfg, habits[v], weekday)
            alpha[v], xi[v] = day_profile(trips, ev, T)
        xi = np.round(xi, 9)
        days.append(DayRecord(d, weekday, alpha, xi, PriceSeries(synthetic_prices(rng, cfg))))
    return days


# CSV ---------------------------------------------------------------------------


def save_history_csv(days: Sequence[DayRecord], history_path, prices_path):
    with open(history_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HISTORY_HEADER)
        for rec in days:
            V, T = rec.realized_alpha.shape
            for v in range(V):
                for t in range(T):
                    w.writerow([rec.date_index, rec.weekday, v, t + 1, int(rec.realized_alpha[v, t]),
                                repr(float(rec.realized_xi_kwh[v, t]))])
    with open(prices_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PRICES_HEADER)
        for rec in days:
            for t, p in enumerate(rec.prices.eur_per_kwh):
                w.writerow([rec.date_index, t + 1, repr(float(p))])


def _read_rows(path, header):
    with open(path, newline="", encoding="utf-8") as fh:
        r = csv.reader(fh)
        try:
            got = next(r)
        except StopIteration:
            raise SchemaError(f"{path}: empty file") from None
        if got != header:
            raise SchemaError(f"{path}: header {got} != expected {header}")
        for lineno, row in enumerate(r, 2):
            if not row:
                continue
            if len(row) != len(header):
                raise SchemaError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            yield lineno, row


def load_history_csv(history_path, prices_path) -> list:
    prices: dict = {}
    for lineno, row in _read_rows(prices_path, PRICES_HEADER):
        try:
            day, period, p = int(row[0]), int(row[1]), float(row[2])
        except ValueError as exc:
            raise SchemaError(f"{prices_path}:{lineno}: {exc}") from None
        if period < 1:
            raise SchemaError(f"{prices_path}:{lineno}: periods are 1-based")
        prices.setdefault(day, {})[period] = p

    cells: dict = {}
    weekdays: dict = {}
    for lineno, row in _read_rows(history_path, HISTORY_HEADER):
        try:
            day, wd, v, period, a, x = int(row[0]), int(row[1]), int(row[2]), int(row[3]), int(row[4]), float(row[5])
        except ValueError as exc:
            raise SchemaError(f"{history_path}:{lineno}: {exc}") from None
        if a not in (0, 1):
            raise SchemaError(f"{history_path}:{lineno}: alpha must be 0 or 1")
        if x < 0:
            raise SchemaError(f"{history_path}:{lineno}: negative consumption")
        if x > 0 and a == 1:
            raise SchemaError(f"{history_path}:{lineno}: vehicle consumes energy while available")
        if period < 1 or v < 0:
            raise SchemaError(f"{history_path}:{lineno}: bad vehicle or period index")
        if weekdays.setdefault(day, wd) != wd:
            raise SchemaError(f"{history_path}:{lineno}: weekday changes within day {day}")
        cells.setdefault(day, {})[(v, period)] = (a, x)

    days = []
    shape = None
    for day in sorted(cells):
        c = cells[day]
        V = max(v for v, _ in c) + 1
        T = max(t for _, t in c)
        if len(c) != V * T:
            raise SchemaError(f"day {day}: expected {V * T} vehicle-period rows, got {len(c)}")
        if shape is None:
            shape = (V, T)
        elif shape != (V, T):
            raise SchemaError(f"day {day}: dimensions {(V, T)} differ from {shape}")
        if day not in prices or sorted(prices[day]) != list(range(1, T + 1)):
            raise SchemaError(f"day {day}: prices missing or incomplete")
        alpha = np.zeros((V, T), dtype=int)
        xi = np.zeros((V, T))
        for (v, t), (a, x) in c.items():
            alpha[v, t - 1] = a
            xi[v, t - 1] = x
        lam = np.array([prices[day][t] for t in range(1, T + 1)])
        days.append(DayRecord(day, weekdays[day], alpha, xi, PriceSeries(lam)))
    return days


# forecasting -------------------------------------------------------------------


def same_weekday_window(history: Sequence[DayRecord], target_index: int, weekday: int, lookback: int) -> list:
    prior = [d for d in history if d.date_index < target_index and d.weekday == weekday]
    prior.sort(key=lambda d: d.date_index)
    if len(prior) < lookback:
        raise InsufficientHistoryError(
            f"need {lookback} earlier days with weekday {weekday}, have {len(prior)} (short by {lookback - len(prior)})"
        )
    return prior[-lookback:]


def recent_window(history: Sequence[DayRecord], target_index: int, lookback: int) -> list:
    prior = sorted((d for d in history if d.date_index < target_index), key=lambda d: d.date_index)
    if len(prior) < lookback:
        raise InsufficientHistoryError(
            f"need {lookback} earlier days for prices, have {len(prior)} (short by {lookback - len(prior)})"
        )
    return prior[-lookback:]


def forecast(history: Sequence[DayRecord], target_weekday: int, lookback: int = 4,
             target_index: Optional[int] = None):
    """Expected availability/consumption from the last ``lookback`` days with
    the same weekday, and prices averaged over the last ``lookback`` days.

    Returns ``(forecasts_per_vehicle, PriceSeries)``.
    """
    if lookback < 1:
        raise ValueError("lookback must be positive")
    if target_index is None:
        target_index = max(d.date_index for d in history) + 1
    same = same_weekday_window(history, target_index, target_weekday, lookback)
    recent = recent_window(history, target_index, lookback)
    alpha_hat = np.mean([d.realized_alpha for d in same], axis=0)
    xi_hat = np.mean([d.realized_xi_kwh for d in same], axis=0)
    lam = np.mean([d.prices.eur_per_kwh for d in recent], axis=0)
    fc = [ForecastInputs(alpha_hat[v], xi_hat[v]) for v in range(alpha_hat.shape[0])]
    return fc, PriceSeries(lam)


def build_uncertainty_set(days: Sequence[DayRecord], vehicle: int) -> UncertaintySet:
    """Box from unanimity across the history slice, K from its least-available day."""
    if not days:
        raise InsufficientHistoryError("empty history slice")
    A = np.array([d.realized_alpha[vehicle] for d in days])
    hi = A.max(axis=0)
    lo = A.min(axis=0)
    k = int(A.sum(axis=1).min())
    return UncertaintySet(lo, hi, k)
