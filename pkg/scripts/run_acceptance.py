"""Run the acceptance suite and print one PASS/FAIL line per criterion.

    python scripts/run_acceptance.py            # all twelve criteria
    python scripts/run_acceptance.py --fast     # skip the two long partition-sum runs
"""
import argparse
import sys
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parents[1]


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--fast", action="store_true", help="deselect criteria marked slow")
    args = ap.parse_args()
    argv = [str(ROOT / "tests" / "test_acceptance.py"), "-q", "-p", "no:cacheprovider"]
    if args.fast:
        argv += ["-m", "not slow"]
    return pytest.main(argv)


if __name__ == "__main__":
    sys.exit(main())
