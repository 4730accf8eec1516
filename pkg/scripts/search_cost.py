"""Candidate vectors scored by TS- and FS-aided ARFA, with their rates.

    python scripts/search_cost.py --trials 20 --workers 8
"""

import argparse
import logging

from cfhbf.config import ScenarioConfig
from cfhbf.experiments import ExperimentPlan, run_plan, summarize


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--L", type=int, default=40)
    p.add_argument("--rho", type=float, default=50.0)
    p.add_argument("--seed", type=int, default=2021)
    p.add_argument("--workers", type=int, default=1)
    args = p.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")

    cfg = ScenarioConfig(L=args.L, trials=args.trials, master_seed=args.seed)
    plan = ExperimentPlan(scenario=cfg, schemes=("chbf-fixed-N", "ts-carfa", "fs-carfa"),
                          sweep_var="rho", sweep_values=(args.rho,))
    rows = {r["scheme"]: r for r in summarize(run_plan(plan, workers=args.workers))}
    for name in ("ts-carfa", "fs-carfa"):
        r = rows[name]
        print(f"{name:<9} candidates {r['candidates_examined_mean']:8.1f} +- {r['candidates_examined_stderr']:.1f}"
              f"   rate loss {r['loss_pct']:.2f}%")
    print(f"FS/TS candidate ratio {rows['fs-carfa']['fs_over_ts']:.4f}")


if __name__ == "__main__":
    main()
