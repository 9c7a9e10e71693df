"""``evagg`` command line: generate | solve | month | verify."""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .data import (
    GeneratorConfig,
    InsufficientHistoryError,
    SchemaError,
    generate_history,
    load_history_csv,
    make_fleet,
    save_history_csv,
)
from .lp import LpError
from .milp import MilpProblem, export_mps
from .realtime import METHODS, MonthConfig, build_day_instance, day_ahead_cost, evaluate_month, solve_day_ahead
from .robust import SolveError, build_single_level
from .deterministic import build_deterministic

SCHEDULE_HEADER = ["vehicle", "period", "c_kw", "z_kw", "e_kwh", "s_plus", "s_minus", "alpha_wc"]
METRICS_HEADER = ["day", "method", "c_da_eur", "p_da_kw", "d_rt_kwh"]


@dataclass
class RunConfig:
    subcommand: str
    out: Path
    config: Optional[Path] = None
    data: Optional[Path] = None
    method: str = "both"
    seed: Optional[int] = None
    lookback: int = 4
    penalty: float = 1000.0
    gap: float = 0.0
    dump_mps: Optional[Path] = None
    day: Optional[int] = None
    days: Optional[int] = 29
    vehicles: Optional[list] = None
    n_checks: int = 20
    big_m_scale: Optional[float] = None
    threads: Optional[int] = field(default=None)

    def __post_init__(self):
        if self.method not in ("robust", "deterministic", "both"):
            raise ValueError(f"method must be robust, deterministic or both, not {self.method!r}")
        if self.lookback < 1:
            raise ValueError("lookback must be positive")
        if self.penalty < 0 or self.gap < 0:
            raise ValueError("penalty and gap must be nonnegative")
        if self.vehicles is not None and not self.vehicles:
            raise ValueError("vehicle filter selects nothing")

    @property
    def methods(self) -> tuple:
        return METHODS if self.method == "both" else (self.method,)


def parse_vehicles(text: Optional[str]) -> Optional[list]:
    """``"0-4,9"`` -> ``[0, 1, 2, 3, 4, 9]``."""
    if text is None:
        return None
    out = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part:
            a, b = part.split("-", 1)
            out.extend(range(int(a), int(b) + 1))
        else:
            out.append(int(part))
    return sorted(set(out))


def _fmt(x) -> str:
    return repr(float(x))


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _write_json(path: Path, obj):
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _generator_config(rc: RunConfig) -> GeneratorConfig:
    cfg = GeneratorConfig.from_file(rc.config) if rc.config else GeneratorConfig()
    if rc.seed is not None:
        cfg.seed = rc.seed
    cfg.validate()
    return cfg


def _history(rc: RunConfig, cfg: GeneratorConfig):
    if rc.data is not None:
        hist = load_history_csv(rc.data / "history.csv", rc.data / "prices.csv")
        V, T = hist[0].realized_alpha.shape
        if V != cfg.n_vehicles or T != cfg.n_periods:
            raise SchemaError(f"history has {V} vehicles x {T} periods, config expects "
                              f"{cfg.n_vehicles} x {cfg.n_periods}")
        return hist
    return generate_history(cfg)


def _check_vehicles(rc: RunConfig, n: int):
    if rc.vehicles is not None and max(rc.vehicles) >= n:
        raise ValueError(f"vehicle filter refers to vehicle {max(rc.vehicles)} but the fleet has {n}")


def cmd_generate(rc: RunConfig) -> int:
    cfg = _generator_config(rc)
    days = generate_history(cfg)
    rc.out.mkdir(parents=True, exist_ok=True)
    save_history_csv(days, rc.out / "history.csv", rc.out / "prices.csv")
    cfg.to_file(rc.out / "generator.cfg")
    print(f"wrote {len(days)} days x {cfg.n_vehicles} vehicles to {rc.out}")
    return 0


def _dump_mps(rc: RunConfig, inst):
    rc.dump_mps.mkdir(parents=True, exist_ok=True)
    for v in range(inst.n_vehicles):
        if "robust" in rc.methods:
            export_mps(build_single_level(inst, v).milp, rc.dump_mps / f"robust_v{v:03d}.mps")
        if "deterministic" in rc.methods:
            lp, _ = build_deterministic(inst, [v])
            export_mps(MilpProblem(lp, np.zeros(0, dtype=int)), rc.dump_mps / f"deterministic_v{v:03d}.mps")


def cmd_solve(rc: RunConfig) -> int:
    cfg = _generator_config(rc)
    hist = _history(rc, cfg)
    _check_vehicles(rc, cfg.n_vehicles)
    by_index = {d.date_index: d for d in hist}
    day_index = rc.day if rc.day is not None else max(by_index)
    if day_index not in by_index:
        raise ValueError(f"day {day_index} not in the history")
    day = by_index[day_index]
    fleet = make_fleet(cfg)
    inst = build_day_instance(hist, day, fleet, cfg.grid, rc.lookback, rc.penalty, rc.vehicles)
    names = rc.vehicles if rc.vehicles is not None else list(range(inst.n_vehicles))
    rc.out.mkdir(parents=True, exist_ok=True)
    if rc.dump_mps is not None:
        _dump_mps(rc, inst)
    summary = {"day": day_index, "weekday": day.weekday, "vehicles": len(names), "methods": {}}
    for method in rc.methods:
        kw = {"threads": rc.threads}
        if method == "robust":
            kw["gap_target"] = rc.gap
        sched = solve_day_ahead(inst, method, **kw)
        rows = []
        for i, v in enumerate(names):
            for t in range(inst.grid.n_periods):
                rows.append([v, t + 1, _fmt(sched.charge_kw[i, t]), _fmt(sched.linear_charge_kw[i, t]),
                             _fmt(sched.soc_kwh[i, t]), _fmt(sched.slack_pos_kwh[i, t]),
                             _fmt(sched.slack_neg_kwh[i, t]), int(sched.wc_alpha[i, t])])
        _write_csv(rc.out / f"schedule_{method}.csv", SCHEDULE_HEADER, rows)
        summary["methods"][method] = {
            "objective_eur": float(sched.objective_eur),
            "c_da_eur": day_ahead_cost(sched, inst),
            "p_da_kw": float(sched.charge_kw.sum()),
            "slack_kwh": float(sched.slack_pos_kwh.sum() + sched.slack_neg_kwh.sum()),
            "worst_case_energy_kwh": float(sched.wc_energy_kwh.sum()),
        }
        print(f"{method}: objective {sched.objective_eur:.4f} EUR")
    _write_json(rc.out / "summary.json", summary)
    return 0


def cmd_month(rc: RunConfig) -> int:
    cfg = _generator_config(rc)
    hist = _history(rc, cfg)
    _check_vehicles(rc, cfg.n_vehicles)
    mc = MonthConfig(lookback=rc.lookback, penalty_eur_per_kwh=rc.penalty, methods=rc.methods,
                     n_days=rc.days, gap_target=rc.gap, vehicles=rc.vehicles, threads=rc.threads)
    profiles = []

    def record(m, sched, out):
        alloc = out.allocation_kw.sum(axis=0)
        for t, p in enumerate(sched.purchased_kw):
            profiles.append([m.day, m.method, t + 1, _fmt(p), _fmt(alloc[t])])

    def progress(m):
        print(f"day {m.day} {m.method}: C_DA {m.c_da_eur:.3f} EUR  D_RT {m.d_rt_kwh:.3f} kWh", flush=True)

    metrics, agg = evaluate_month(hist, make_fleet(cfg), cfg.grid, mc, progress=progress, record=record)
    rc.out.mkdir(parents=True, exist_ok=True)
    _write_csv(rc.out / "metrics.csv", METRICS_HEADER,
               [[m.day, m.method, _fmt(m.c_da_eur), _fmt(m.p_da_kw), _fmt(m.d_rt_kwh)] for m in metrics])
    _write_csv(rc.out / "purchase_profiles.csv", ["day", "method", "period", "purchased_kw", "allocated_kw"],
               profiles)
    _write_json(rc.out / "aggregate.json", agg)
    for method, a in agg.items():
        print(f"{method}: C_DA {a['c_da_total_eur']:.2f} EUR, D_RT total {a['d_rt_total_kwh']:.2f} kWh")
    return 0


def cmd_verify(rc: RunConfig) -> int:
    from .verify import run_all

    n = rc.n_checks
    seed = 0 if rc.seed is None else rc.seed
    report = run_all(seed=seed, n_oracle=max(n, 1) * 2, n_bilevel=max(1, n // 2), n_internal=n, n_ccg=n,
                     big_m=rc.big_m_scale)
    text = json.dumps(report, indent=2, sort_keys=True)
    print(text)
    rc.out.mkdir(parents=True, exist_ok=True)
    (rc.out / "verify.json").write_text(text + "\n", encoding="utf-8")
    return 0 if report["all_passed"] else 1


COMMANDS = {"generate": cmd_generate, "solve": cmd_solve, "month": cmd_month, "verify": cmd_verify}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="evagg", description="Robust day-ahead charging for an EV aggregator.")
    ap.add_argument("subcommand", choices=sorted(COMMANDS))
    ap.add_argument("--config", type=Path, help="generator config (key = value lines)")
    ap.add_argument("--data", type=Path, help="directory with history.csv and prices.csv "
                                              "(default: generate from the config)")
    ap.add_argument("--method", default="both", choices=["robust", "deterministic", "both"])
    ap.add_argument("--seed", type=int)
    ap.add_argument("--lookback", type=int, default=4)
    ap.add_argument("--penalty", type=float, default=1000.0, help="EUR per kWh of deviation")
    ap.add_argument("--gap", type=float, default=0.0, help="relative MILP gap target")
    ap.add_argument("--dump-mps", type=Path, help="write per-vehicle models in MPS format here")
    ap.add_argument("--out", type=Path, default=Path("out"))
    ap.add_argument("--day", type=int, help="day index for solve (default: last day)")
    ap.add_argument("--days", type=int, default=29, help="evaluated days for month")
    ap.add_argument("--vehicles", help="vehicle filter, e.g. 0-9,15")
    ap.add_argument("--checks", type=int, default=20, help="instances per verify suite")
    ap.add_argument("--big-m-scale", type=float, help="verify with big-M scaled by this factor (fault injection)")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    threads = os.environ.get("EVAGG_THREADS")
    try:
        rc = RunConfig(
            subcommand=args.subcommand, out=args.out, config=args.config, data=args.data, method=args.method,
            seed=args.seed, lookback=args.lookback, penalty=args.penalty, gap=args.gap, dump_mps=args.dump_mps,
            day=args.day, days=args.days, vehicles=parse_vehicles(args.vehicles), n_checks=args.checks,
            big_m_scale=args.big_m_scale, threads=int(threads) if threads else None,
        )
        return COMMANDS[rc.subcommand](rc)
    except (ValueError, SchemaError, InsufficientHistoryError, SolveError, LpError, OSError) as exc:
        print(f"evagg: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
