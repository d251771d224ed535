"""Acceptance suite: every shipped criterion config must pass within its time limit.

Run with pytest (a summary section lists one line per criterion) or directly with
``python tests/test_acceptance.py``.
"""

import json
import pathlib
import sys
import time

import pytest

from hardyscope.cli import run_config
from hardyscope.config import validate_config

CRITERIA = pathlib.Path(__file__).resolve().parents[1] / "criteria"

# (number, config stem, runtime limit in seconds, title)
TABLE = [
    (1, "01_homomorphism", 5, "calculus homomorphism suite"),
    (2, "02_engines", 60, "engine agreement"),
    (3, "03_resolvent", 30, "resolvent off-diagonal bound"),
    (4, "04_band", 30, "band-limited off-diagonal bound"),
    (5, "05_calderon", 10, "Calderon partner"),
    (6, "06_reproduce", 60, "reproducing formula"),
    (7, "07_quadratic", 10, "quadratic identity"),
    (8, "08_division", 10, "division and multiplication by powers"),
    (9, "09_composed", 120, "composed and two-parameter bounds"),
    (10, "10_tent", 60, "tent atomic decomposition"),
    (11, "11_hardy", 60, "Hardy atoms"),
    (12, "12_bridge", 30, "BD bridge"),
    (13, "13_semigroup", 60, "Davies-Gaffney and ultracontractivity"),
]


def run_criterion(stem: str):
    cfg = json.loads((CRITERIA / f"{stem}.json").read_text(encoding="utf-8"))
    validate_config(cfg)
    t0 = time.perf_counter()
    report, outcomes = run_config(cfg, workers=1)
    return report, outcomes, time.perf_counter() - t0


def _line(num, title, ok, elapsed, limit, why=""):
    status = "PASS" if ok else "FAIL"
    tail = f" ({why})" if why else ""
    return f"{status} criterion {num:2d} {title}: {elapsed:.2f} s of {limit} s{tail}"


@pytest.mark.slow
@pytest.mark.parametrize("num,stem,limit,title", TABLE, ids=[row[1] for row in TABLE])
def test_criterion(num, stem, limit, title):
    from conftest import ACCEPTANCE_LINES

    report, outcomes, elapsed = run_criterion(stem)
    failing = [f"{o.id}: {o.failing[0] if o.failing else o.error}" for o in outcomes if not o.passed]
    why = "; ".join(failing) if failing else ("over time limit" if elapsed >= limit else "")
    ok = report["passed"] and elapsed < limit
    line = _line(num, title, ok, elapsed, limit, why[:200])
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert report["passed"], failing
    assert elapsed < limit


def main() -> int:
    bad = 0
    for num, stem, limit, title in TABLE:
        report, outcomes, elapsed = run_criterion(stem)
        ok = report["passed"] and elapsed < limit
        bad += not ok
        print(_line(num, title, ok, elapsed, limit), flush=True)
    return 1 if bad else 0


if __name__ == "__main__":
    sys.exit(main())
