"""Print the heavy-traffic trend table for a sweep config (default: the acceptance one).

Usage: python3 scripts/trend_table.py [configs/acceptance_trends.json] [--workers N]
"""

import argparse
import json

from srpt_ht.harness import ExperimentConfig, run_ensemble


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("config", nargs="?", default="configs/acceptance_trends.json")
    ap.add_argument("--workers", type=int, default=None)
    args = ap.parse_args()
    with open(args.config) as fh:
        cfg = ExperimentConfig.from_json(json.load(fh))
    rep = run_ensemble(cfg, workers=args.workers)
    names = [n for n in rep.per_r[0]["functionals"]]
    print(f"{'functional':<20}" + "".join(f"{'r=' + format(r, 'g'):>22}" for r in cfg.r_list))
    for name in names:
        cells = []
        for r in cfg.r_list:
            st = rep.stat(r, name, "median"), rep.stat(r, name, "mean")
            cells.append(f"{st[0]:>10.4g} / {st[1]:<9.4g}")
        print(f"{name:<20}" + "".join(f"{c:>22}" for c in cells))
    print("(median / mean)")
    for label, t in rep.trends.items():
        print(f"{'PASS' if t['pass'] else 'FAIL'}  {label:<24} {t['values']}")


if __name__ == "__main__":
    main()
