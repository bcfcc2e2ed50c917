"""Run the acceptance criteria, print one line per criterion, optionally write the JSON report.

    python scripts/run_acceptance.py [--criteria 1,2,7] [--out report.json]
"""

from __future__ import annotations

import argparse
import sys

from fracsrc import io
from fracsrc.acceptance import report, run_all


def main() -> int:
    p = argparse.ArgumentParser()
    p.add_argument("--criteria", help="comma-separated subset")
    p.add_argument("--out")
    p.add_argument("-v", "--verbose", action="store_true", help="print every check and the info block")
    args = p.parse_args()
    numbers = None if not args.criteria else [int(s) for s in args.criteria.split(",")]
    results = run_all(numbers)
    for r in results:
        print(r.line())
        if args.verbose:
            for c in r.checks:
                print(f"    {'ok ' if c.passed else 'BAD'} {c.name}: {c.value:.6g} {c.relation} {c.limit:g}")
            for k, v in r.info.items():
                print(f"    info {k}: {v}")
    if args.out:
        io.write_text(args.out, io.dumps(report(results)))
    return 0 if all(r.passed for r in results) else 1


if __name__ == "__main__":
    sys.exit(main())
