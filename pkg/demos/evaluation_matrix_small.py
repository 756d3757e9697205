"""
A small evaluation matrix
=========================

The full matrix (2 estimators x 3 scenarios x 3 trials x 20 seeds) is what
the acceptance suite runs. This demo runs the particle filter alone with a
handful of seeds to show the shape of the report.
"""

from afar_twin.harness.config import parse_config
from afar_twin.harness.report import run_matrix

cfg = parse_config("""
[matrix]
estimators = ["PF"]
n_seeds = 3
""")
report = run_matrix(cfg)
for c in report.cells:
    print(f"{c.estimator:3s} scenario {c.scenario} trial {c.trial}: "
          f"median {c.median_error_m:6.1f} m (IQR {c.iqr_m:5.1f} m)")
for ch in report.checks:
    print(("pass " if ch.passed else "fail ") + ch.name + ": " + ch.detail)
