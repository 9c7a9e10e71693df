import numpy as np
import pytest

from evagg.data import GeneratorConfig, InsufficientHistoryError, generate_history, make_fleet
from evagg.deterministic import solve_deterministic
from evagg.fleet import DayRecord, EvParams, ForecastInputs, PriceSeries, TimeGrid, UncertaintySet
from evagg.realtime import (
    MonthConfig,
    aggregate,
    build_day_instance,
    day_ahead_cost,
    evaluate_day,
    evaluate_month,
    simulate_realtime,
)
from evagg.robust import RobustInstance, solve_robust

UNIT = EvParams(max_charge_kw=10.0, efficiency=1.0, e_min_kwh=0.0, e_max_kwh=100.0, e_init_kwh=50.0)


def _inst(fleet, T, dt=1.0, prices=None):
    V = len(fleet)
    prices = np.full(T, 0.1) if prices is None else prices
    return RobustInstance(fleet, TimeGrid(T, dt), PriceSeries(prices),
                          [ForecastInputs(np.ones(T), np.zeros(T)) for _ in range(V)],
                          [UncertaintySet(np.zeros(T, int), np.ones(T, int), 0) for _ in range(V)])


def test_reallocation_toy():
    # vehicle 0 is away in period 1 (consumes 1 kWh), vehicle 1 away in period 2 (3 kWh);
    # all 5 kW are bought in period 1 when only vehicle 1 is plugged in
    inst = _inst([UNIT, UNIT], 3)
    realized = DayRecord(0, 0, np.array([[0, 1, 1], [1, 0, 1]]), np.array([[1.0, 0, 0], [0, 3.0, 0]]),
                         PriceSeries(np.full(3, 0.1)))
    out = simulate_realtime(np.array([5.0, 0.0, 0.0]), realized, inst)
    assert out.allocation_kw[0].sum() == pytest.approx(0.0)
    assert out.allocation_kw[1, 0] == pytest.approx(3.0)
    assert out.d_rt_kwh == pytest.approx(1.0)
    assert out.penalty_cost_eur == pytest.approx(1000.0)
    assert out.vehicle_deviation_kwh.tolist() == pytest.approx([1.0, 0.0])


def test_zero_purchase():
    inst = _inst([UNIT, UNIT], 4)
    xi = np.array([[0, 2.0, 0, 0], [0, 0, 1.5, 0]])
    realized = DayRecord(0, 0, (xi == 0).astype(int), xi, PriceSeries(np.full(4, 0.1)))
    out = simulate_realtime(np.zeros(4), realized, inst)
    assert out.d_rt_kwh == pytest.approx(3.5)
    assert np.allclose(out.allocation_kw, 0.0)


def test_dimension_mismatch():
    inst = _inst([UNIT], 4)
    realized = DayRecord(0, 0, np.ones((1, 3), int), np.zeros((1, 3)), PriceSeries(np.full(3, 0.1)))
    with pytest.raises(ValueError):
        simulate_realtime(np.zeros(4), realized, inst)


def _fixed_history(n_weeks=5, V=4, T=24, seed=0):
    """Every same-weekday day is identical, so forecasts are exact."""
    rng = np.random.default_rng(seed)
    patterns = []
    for wd in range(7):
        a = np.ones((V, T), int)
        x = np.zeros((V, T))
        for v in range(V):
            d = int(rng.integers(4, 10))
            r = int(rng.integers(d + 4, T - 2))
            a[v, d:r] = 0
            x[v, d] = x[v, r - 1] = float(rng.uniform(1, 4))
        patterns.append((a, x))
    prices = np.round(0.05 + 0.03 * np.sin(np.arange(T) / 3.0), 6)
    return [DayRecord(i, i % 7, *patterns[i % 7], PriceSeries(prices)) for i in range(7 * n_weeks)]


@pytest.mark.parametrize("method", ["deterministic", "robust"])
def test_perfect_foresight_day_has_no_deviation(method):
    hist = _fixed_history()
    fleet = [EvParams() for _ in range(4)]
    grid = TimeGrid(24, 1.0)
    day = hist[-1]
    inst = build_day_instance(hist, day, fleet, grid, 4, 1000.0)
    assert all(np.array_equal(u.alpha_lo, u.alpha_hi) for u in inst.uncertainty)
    m, sched, out = evaluate_day(inst, method, day)
    assert m.d_rt_kwh <= 1e-6
    assert sched.slack_pos_kwh.sum() + sched.slack_neg_kwh.sum() <= 1e-6


def test_robust_schedule_survives_its_own_worst_case():
    rng = np.random.default_rng(4)
    T, V = 16, 3
    fleet, fc, us = [], [], []
    for _ in range(V):
        lo = (rng.random(T) < 0.3).astype(int)
        hi = np.maximum(lo, (rng.random(T) < 0.7).astype(int))
        xi = np.where(hi == 0, rng.uniform(0.5, 2.0, T), 0.0)
        K = int(lo.sum() + (hi - lo).sum() // 2)
        fleet.append(EvParams(7.4, 0.95, 10.0, 51.0, 30.0))
        fc.append(ForecastInputs(np.full(T, 0.5), xi))
        us.append(UncertaintySet(lo, hi, K))
    inst = RobustInstance(fleet, TimeGrid(T, 0.5), PriceSeries(rng.uniform(0.03, 0.09, T)), fc, us)
    sched = solve_robust(inst)
    assert sched.slack_pos_kwh.sum() + sched.slack_neg_kwh.sum() <= 1e-6
    realized = DayRecord(0, 0, sched.wc_alpha, np.array([f.xi_hat_kwh for f in fc]), inst.prices)
    out = simulate_realtime(sched, realized, inst)
    assert out.d_rt_kwh <= 1e-6


@pytest.fixture(scope="module")
def small_month():
    cfg = GeneratorConfig(n_vehicles=6, n_days=36, seed=11)
    hist = generate_history(cfg)
    rows = []
    metrics, agg = evaluate_month(hist, make_fleet(cfg), cfg.grid, MonthConfig(n_days=5),
                                  record=lambda m, s, o: rows.append((m, s, o)))
    return cfg, hist, metrics, agg, rows


def test_month_emits_both_series(small_month):
    _, _, metrics, agg, _ = small_month
    assert sorted(agg) == ["deterministic", "robust"]
    assert len(metrics) == 10
    assert [m.day for m in metrics[::2]] == [28, 29, 30, 31, 32]


def test_month_aggregate_is_fold_of_days(small_month):
    _, _, metrics, agg, _ = small_month
    for method, a in agg.items():
        d = [m.d_rt_kwh for m in metrics if m.method == method]
        assert a["d_rt_total_kwh"] == pytest.approx(sum(d), rel=1e-12)
        assert a["d_rt_max_kwh"] == max(d) and a["d_rt_min_kwh"] == min(d)
        assert a["c_da_total_eur"] == pytest.approx(sum(m.c_da_eur for m in metrics if m.method == method))
    assert aggregate(metrics) == agg


def test_metrics_recomputed_from_matrices(small_month):
    cfg, hist, _, _, rows = small_month
    for m, sched, out in rows:
        day = hist[m.day]
        inst = build_day_instance(hist, day, make_fleet(cfg), cfg.grid, 4, 1000.0)
        c = sched.charge_kw
        lam = inst.prices.eur_per_kwh
        c_da = sum(c[v, t] * lam[t] * cfg.dt_hours for v in range(c.shape[0]) for t in range(c.shape[1]))
        assert m.c_da_eur == pytest.approx(c_da, rel=1e-9, abs=1e-12)
        assert m.p_da_kw == pytest.approx(c.sum(), rel=1e-12)
        assert m.d_rt_kwh == pytest.approx(out.deviation_pos_kwh.sum() + out.deviation_neg_kwh.sum(), abs=1e-9)
        assert day_ahead_cost(sched, inst) == pytest.approx(m.c_da_eur)
        # purchase cap and availability
        assert np.all(out.allocation_kw >= -1e-9)
        assert np.all(out.allocation_kw.sum(axis=0) <= sched.purchased_kw + 1e-7)
        assert np.all(out.allocation_kw[day.realized_alpha == 0] <= 1e-9)


def test_warm_started_replays_match_cold(small_month):
    cfg, hist, _, _, rows = small_month
    for m, sched, out in rows[:4]:
        day = hist[m.day]
        inst = build_day_instance(hist, day, make_fleet(cfg), cfg.grid, 4, 1000.0)
        cold = simulate_realtime(sched, day, inst)
        assert cold.d_rt_kwh == pytest.approx(out.d_rt_kwh, abs=1e-7)


def test_month_needs_history():
    cfg = GeneratorConfig(n_vehicles=2, n_days=20, seed=1)
    hist = generate_history(cfg)
    with pytest.raises(InsufficientHistoryError):
        evaluate_month(hist, make_fleet(cfg), cfg.grid, MonthConfig())


def test_zero_demand_day():
    T = 8
    inst = _inst([UNIT], T, dt=0.25)
    realized = DayRecord(0, 0, np.ones((1, T), int), np.zeros((1, T)), PriceSeries(np.full(T, 0.1)))
    for method in ("deterministic", "robust"):
        m, _, _ = evaluate_day(inst, method, realized)
        assert (m.c_da_eur, m.p_da_kw, m.d_rt_kwh) == pytest.approx((0.0, 0.0, 0.0))
