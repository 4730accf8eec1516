"""Print per-scheme means, rate loss and EE gain from a ``simulate`` CSV.

    python scripts/summarize_results.py results/rate_vs_power.csv
"""

import argparse
import math

from cfhbf.experiments import read_csv, summarize


def format_table(rows) -> str:
    head = f"{'value':>8} {'scheme':<16} {'rate':>9} {'+-':>6} {'power W':>9} {'EE':>9} {'loss %':>7} {'EE gain %':>9} {'cands':>8}"
    lines = [head, "-" * len(head)]
    for r in rows:
        loss = "" if math.isnan(r["loss_pct"]) else f"{r['loss_pct']:.2f}"
        gain = "" if math.isnan(r["ee_gain_pct"]) else f"{r['ee_gain_pct']:.1f}"
        lines.append(f"{r['sweep_value']:>8g} {r['scheme']:<16} {r['rate_mean']:>9.2f} {r['rate_stderr']:>6.2f} "
                     f"{r['power_mw_mean'] / 1000:>9.2f} {r['ee_mean']:>9.3f} {loss:>7} {gain:>9} "
                     f"{r['candidates_examined_mean']:>8.0f}")
    return "\n".join(lines)


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("csv")
    args = p.parse_args()
    print(format_table(summarize(read_csv(args.csv))))


if __name__ == "__main__":
    main()
