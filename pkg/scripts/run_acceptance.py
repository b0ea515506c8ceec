"""Run acceptance criteria 1-10 and print one verdict line per part.

Usage: python3 scripts/run_acceptance.py [--workers N] [--json out.json]
Exits 1 if any part fails.
"""

import argparse
import json
import sys

from srpt_ht.acceptance import run_all


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--json", default=None, help="also write the verdicts here")
    args = ap.parse_args()
    verdicts = run_all(args.workers)
    for v in verdicts:
        print(f"{v.line()}  ({v.seconds:.1f} s)")
    failed = [v.key for v in verdicts if not v.passed]
    print(f"{len(verdicts) - len(failed)}/{len(verdicts)} parts pass" + (f"; failing: {', '.join(failed)}" if failed else ""))
    if args.json:
        rows = [{"key": v.key, "title": v.title, "passed": v.passed, "detail": v.detail} for v in verdicts]
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=2)
            fh.write("\n")
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
