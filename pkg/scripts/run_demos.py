#!/usr/bin/env python3
"""Run the four worked demonstration cases and print their reports."""

import sys
import time

from csalin.verify import run_example


def main() -> int:
    failures = 0
    t0 = time.time()
    for case_id in (1, 2, 3, 4):
        report = run_example(case_id)
        print(report.render())
        print()
        if not report.passed:
            failures += 1
    print(f"total runtime: {time.time() - t0:.1f}s, failures: {failures}")
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
