"""Solve one synthetic day per vehicle with the single-level MILP and with CCG.

Prints objective, nodes, simplex iterations and wall time for each route.

    python3 scripts/compare_methods.py --vehicles 10 --day 28
"""
import argparse
import time

from evagg.data import GeneratorConfig, generate_history, make_fleet
from evagg.realtime import build_day_instance
from evagg.robust import solve_vehicle_ccg, solve_vehicle_milp


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--vehicles", type=int, default=10)
    ap.add_argument("--day", type=int, default=28)
    ap.add_argument("--lookback", type=int, default=4)
    ap.add_argument("--seed", type=int, default=4242)
    args = ap.parse_args()

    cfg = GeneratorConfig(n_vehicles=args.vehicles, seed=args.seed)
    hist = generate_history(cfg)
    inst = build_day_instance(hist, hist[args.day], make_fleet(cfg), cfg.grid, args.lookback, 1000.0)

    print(f"{'v':>3s} {'milp obj':>12s} {'nodes':>6s} {'iters':>7s} {'s':>6s}   "
          f"{'ccg obj':>12s} {'rounds':>6s} {'cuts':>5s} {'nodes':>6s} {'iters':>7s} {'s':>6s}")
    tot = [0.0, 0.0, 0, 0]
    for v in range(inst.n_vehicles):
        t = time.perf_counter()
        a = solve_vehicle_milp(inst, v)
        ta = time.perf_counter() - t
        t = time.perf_counter()
        b = solve_vehicle_ccg(inst, v)
        tb = time.perf_counter() - t
        tot = [tot[0] + ta, tot[1] + tb, tot[2] + a.lp_iterations, tot[3] + b.lp_iterations]
        print(f"{v:3d} {a.objective:12.6f} {a.nodes:6d} {a.lp_iterations:7d} {ta:6.2f}   "
              f"{b.objective:12.6f} {b.rounds:6d} {b.cuts:5d} {b.nodes:6d} {b.lp_iterations:7d} {tb:6.2f}")
    print(f"total  milp {tot[0]:.1f} s / {tot[2]} iterations   ccg {tot[1]:.1f} s / {tot[3]} iterations")


if __name__ == "__main__":
    main()
