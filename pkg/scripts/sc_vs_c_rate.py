"""Rate of local-CSI SC-HBF and beam steering relative to C-HBF over rho.

Uses L=40, K=8, Nt=4, Nr=32, N=4 by default; every scheme sees the same
channel draw in each trial.

    python scripts/sc_vs_c_rate.py --trials 50 --workers 8
"""

import argparse
import logging

from cfhbf.config import ScenarioConfig
from cfhbf.experiments import ExperimentPlan, run_plan, summarize


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--trials", type=int, default=50)
    p.add_argument("--Nr", type=int, default=32)
    p.add_argument("--N", type=int, default=4)
    p.add_argument("--rho", default="0,10,20,30,40,50")
    p.add_argument("--seed", type=int, default=2021)
    p.add_argument("--workers", type=int, default=1)
    args = p.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")

    cfg = ScenarioConfig(L=40, K=8, Nt=4, Nr=args.Nr, N=args.N, nbar=min(2, args.N),
                         trials=args.trials, master_seed=args.seed)
    plan = ExperimentPlan(scenario=cfg, schemes=("chbf-fixed-N", "schbf", "beam-steering"),
                          sweep_var="rho", sweep_values=tuple(float(v) for v in args.rho.split(",")))
    rows = summarize(run_plan(plan, workers=args.workers))
    ref = {r["sweep_value"]: r["rate_mean"] for r in rows if r["scheme"] == "chbf-fixed-N"}
    print(f"{'rho dBm':>8} {'scheme':<14} {'rate':>9} {'/ C-HBF':>8}")
    for r in rows:
        print(f"{r['sweep_value']:>8g} {r['scheme']:<14} {r['rate_mean']:>9.2f} "
              f"{r['rate_mean'] / ref[r['sweep_value']]:>8.4f}")


if __name__ == "__main__":
    main()
