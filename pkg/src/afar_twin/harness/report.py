"""Matrix aggregation (median and IQR per cell) and the ordering checks."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .config import Config
from .experiment import TrialResult, run_all

CSV_HEADER = "estimator,scenario,trial,median_error_m,iqr_m,n_seeds"


@dataclass(frozen=True)
class Cell:
    estimator: str
    scenario: int
    trial: int
    median_error_m: float
    iqr_m: float
    n_seeds: int


@dataclass(frozen=True)
class Check:
    name: str
    description: str
    passed: bool
    detail: str
    required: bool = True


@dataclass
class MatrixReport:
    cells: list
    checks: list
    results: list = field(default_factory=list)

    def cell(self, estimator: str, scenario: int, trial: int) -> Cell | None:
        for c in self.cells:
            if (c.estimator, c.scenario, c.trial) == (estimator, scenario, trial):
                return c
        return None

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks if c.required)

    def to_json(self) -> dict:
        return {"cells": [asdict(c) for c in self.cells],
                "checks": [asdict(c) for c in self.checks],
                "all_required_passed": self.passed}


def summarize(results, estimators, scenarios, trials) -> list:
    groups: dict = {}
    for r in results:
        groups.setdefault((r.estimator, r.scenario, r.trial), []).append(r.error_m)
    cells = []
    for e in estimators:
        for s in scenarios:
            for t in trials:
                errs = np.asarray(groups.get((e, s, t), []), dtype=float)
                if errs.size:
                    q1, med, q3 = np.percentile(errs, [25, 50, 75])
                else:
                    q1 = med = q3 = float("nan")
                cells.append(Cell(e, s, t, float(med), float(q3 - q1), int(errs.size)))
    return cells


def check_orderings(cells) -> list:
    """Orderings A, B, C (required) and the Scenario-1 <= Scenario-2 sanity check.

    Checks whose cells are absent from the matrix are skipped.
    """
    med = {(c.estimator, c.scenario, c.trial): c.median_error_m for c in cells}
    checks = []

    def add(name, desc, pairs, strict=True):
        if any(k not in med for pair in pairs for k in pair):
            return
        op = "<" if strict else "<="
        ok = all(med[a] < med[b] if strict else med[a] <= med[b] for a, b in pairs)
        detail = "; ".join(f"{a}={med[a]:.1f} {op} {b}={med[b]:.1f}" for a, b in pairs)
        checks.append(Check(name, desc, bool(ok), detail, required=strict))

    for est in ("PF", "FingerCNN"):
        for t in (1, 2, 3):
            add(f"A/{est}/T{t}", f"{est} trial {t}: scenario 3 median < scenario 2",
                [((est, 3, t), (est, 2, t))])
    add("B", "scenario 2 trial 3: FingerCNN median > PF median",
        [(("PF", 2, 3), ("FingerCNN", 2, 3))])
    add("C", "FingerCNN scenario 2: trials 1 and 2 median < trial 3",
        [(("FingerCNN", 2, 1), ("FingerCNN", 2, 3)), (("FingerCNN", 2, 2), ("FingerCNN", 2, 3))])
    for est in ("PF", "FingerCNN"):
        for t in (1, 2, 3):
            add(f"S1<=S2/{est}/T{t}", f"{est} trial {t}: scenario 1 median <= scenario 2",
                [((est, 1, t), (est, 2, t))], strict=False)
    return checks


def build_report(results, cfg: Config) -> MatrixReport:
    m = cfg.matrix
    cells = summarize(results, m.estimators, m.scenarios, m.trials)
    return MatrixReport(cells, check_orderings(cells), list(results))


def run_matrix(cfg: Config) -> MatrixReport:
    return build_report(run_all(cfg), cfg)


def write_report(report: MatrixReport, out_dir) -> dict:
    """matrix.csv, matrix.json, per-run results.csv (all deterministic) and timings.csv."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    lines = [CSV_HEADER]
    for c in report.cells:
        lines.append(f"{c.estimator},{c.scenario},{c.trial},{c.median_error_m!r},{c.iqr_m!r},"
                     f"{c.n_seeds}")
    paths = {"matrix_csv": out / "matrix.csv", "matrix_json": out / "matrix.json",
             "results_csv": out / "results.csv", "timings_csv": out / "timings.csv"}
    paths["matrix_csv"].write_text("\n".join(lines) + "\n")
    paths["matrix_json"].write_text(json.dumps(report.to_json(), indent=2) + "\n")
    rows = ["estimator,scenario,trial,seed_index,seed,error_m,est_east_m,est_north_m"]
    times = ["estimator,scenario,trial,seed_index,runtime_s"]
    for r in report.results:
        rows.append(f"{r.estimator},{r.scenario},{r.trial},{r.seed_index},{r.seed},"
                    f"{r.error_m!r},{r.est_east_m!r},{r.est_north_m!r}")
        times.append(f"{r.estimator},{r.scenario},{r.trial},{r.seed_index},{r.runtime_s:.4f}")
    paths["results_csv"].write_text("\n".join(rows) + "\n")
    paths["timings_csv"].write_text("\n".join(times) + "\n")
    return paths


def read_results(path) -> list:
    out = []
    for line in Path(path).read_text().splitlines()[1:]:
        e, s, t, k, seed, err, ee, en = line.split(",")
        out.append(TrialResult(e, int(s), int(t), int(k), int(seed), float(err), float(ee),
                               float(en), float("nan")))
    return out
