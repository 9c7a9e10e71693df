"""Backtest a synthetic month with both day-ahead methods and print the totals.

    python3 scripts/run_month.py --vehicles 100 --days 29 --out month_out
"""
import argparse
import json
import time
from pathlib import Path

from evagg.data import GeneratorConfig, generate_history, make_fleet
from evagg.realtime import MonthConfig, evaluate_month


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--vehicles", type=int, default=100)
    ap.add_argument("--days", type=int, default=29)
    ap.add_argument("--lookback", type=int, default=4)
    ap.add_argument("--penalty", type=float, default=1000.0)
    ap.add_argument("--seed", type=int, default=2018)
    ap.add_argument("--out", type=Path)
    args = ap.parse_args()

    cfg = GeneratorConfig(n_vehicles=args.vehicles, seed=args.seed)
    hist = generate_history(cfg)
    month = MonthConfig(lookback=args.lookback, n_days=args.days, penalty_eur_per_kwh=args.penalty)

    def progress(m):
        print(f"day {m.day:3d} {m.method:13s} C_DA {m.c_da_eur:8.2f} EUR  D_RT {m.d_rt_kwh:7.2f} kWh"
              f"  {m.seconds:5.1f} s", flush=True)

    t = time.perf_counter()
    _, agg = evaluate_month(hist, make_fleet(cfg), cfg.grid, month, progress=progress)
    secs = time.perf_counter() - t

    print()
    print(f"{'method':15s} {'C_DA [EUR]':>11s} {'P_DA [kW]':>11s} {'D_RT [kWh]':>11s}")
    for method, a in agg.items():
        print(f"{method:15s} {a['c_da_total_eur']:11.2f} {a['p_da_total_kw']:11.1f} {a['d_rt_total_kwh']:11.2f}")
    do, ro = agg["deterministic"]["d_rt_total_kwh"], agg["robust"]["d_rt_total_kwh"]
    if do > 0:
        print(f"deviation reduction {100 * (1 - ro / do):.1f} %")
    print(f"{secs:.0f} s")
    if args.out:
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / "aggregate.json").write_text(json.dumps(agg, indent=2, sort_keys=True) + "\n")


if __name__ == "__main__":
    main()
