#!/usr/bin/env python3
"""Reproduce both worked examples and write their reports next to this file.

Usage: python scripts/reproduce_examples.py [outdir]
"""
import sys
from pathlib import Path

from epinet.cli import main

out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("example_reports")
rc = 0
for name in ("community", "powerlaw"):
    print(f"=== {name} ===")
    rc |= main(["example", name, "--out", str(out / name)])
sys.exit(rc)
