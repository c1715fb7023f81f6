#!/usr/bin/env python3
"""
proxBoost CLI - property suites, oracle calibration and Monte-Carlo tail-probability runs.

Usage:
    python proxboost.py verify --quick
    python proxboost.py calibrate --oracle sgd --replications 1000
    python proxboost.py run --config configs/boost_alg.cfg --seed 7 --out output/boost_alg
    python proxboost.py sweep --config configs/boost_alg.cfg --vary p=0.05,0.1,0.2
"""

from src.harness.cli import main

if __name__ == "__main__":
    raise SystemExit(main())
