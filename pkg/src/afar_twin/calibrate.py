"""Twin tuning: fit a log-distance channel to measured logs and fold it back in.

The regression is ordinary least squares of RSSI on ``-10 log10(d)`` with
``d`` the 3-D UAV-to-transmitter distance, pooled across logs. Residuals give
the shadowing spread and the 0.1st-percentile fade depth.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from .channel import Z_P999, ChannelParams, FadeModel, LogDistanceModel
from .geo import GeoPosition, to_enu
from .measurement import MeasurementLog

MIN_SAMPLES = 50


@dataclass(frozen=True)
class CalibrationReport:
    offset_db: float           # fitted RSSI (dBm) at 1 m
    exponent_n: float
    sigma_db: float
    fade_depth_p999_db: float  # positive depth below the fitted mean
    n_samples: int
    r_squared: float

    def __post_init__(self):
        if not 1.5 <= self.exponent_n <= 6.0:
            raise ValueError(f"fitted exponent {self.exponent_n:.3f} outside [1.5, 6]")
        if self.sigma_db < 0:
            raise ValueError("sigma_db must be >= 0")
        if self.n_samples < MIN_SAMPLES:
            raise ValueError(f"need >= {MIN_SAMPLES} samples")

    def mean_rssi_dbm(self, d):
        return self.offset_db - 10.0 * self.exponent_n * np.log10(d)


def _distances(log: MeasurementLog, ugv: GeoPosition) -> np.ndarray:
    frame = log.meta.frame
    tx = to_enu(frame, ugv).as_array()
    return np.sqrt(np.sum((log.enu(frame) - tx) ** 2, axis=1))


def fit_log_distance(logs, ugv_truth) -> CalibrationReport:
    if isinstance(logs, MeasurementLog):
        logs, ugv_truth = [logs], [ugv_truth]
    if len(logs) != len(ugv_truth):
        raise ValueError("need one truth position per log")
    d = np.concatenate([_distances(lg, u) for lg, u in zip(logs, ugv_truth)])
    y = np.concatenate([lg.rssi_dbm for lg in logs])
    if len(y) < MIN_SAMPLES:
        raise ValueError(f"insufficient samples: {len(y)} < {MIN_SAMPLES}")
    if np.any(d <= 1.0):
        raise ValueError("all distances must exceed 1 m")
    if d.max() <= 1.05 * d.min():
        raise ValueError("degenerate distance spread: slope unidentifiable")

    x = -10.0 * np.log10(d)
    A = np.column_stack([np.ones_like(x), x])
    (offset, n), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - (offset + n * x)
    ss_res = float(resid @ resid)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return CalibrationReport(
        offset_db=float(offset),
        exponent_n=float(n),
        sigma_db=math.sqrt(ss_res / (len(y) - 2)),
        fade_depth_p999_db=float(max(-np.quantile(resid, 0.001), 0.0)),
        n_samples=int(len(y)),
        r_squared=float(r2),
    )


def apply(report: CalibrationReport, params: ChannelParams) -> ChannelParams:
    """Return `params` with the fitted mean and fading; the input is untouched.

    The deep-fade process is sized to the fitted 0.1st-percentile depth but
    never allowed more variance than the residuals show; white shadowing
    makes up the remainder, so the total spread equals `sigma_db`.
    """
    depth = min(report.fade_depth_p999_db, 80.0, Z_P999 * report.sigma_db)
    deep_sigma = depth / Z_P999
    shadow = math.sqrt(max(report.sigma_db ** 2 - deep_sigma ** 2, 0.0))
    fade = FadeModel(shadow, depth, params.fade.spatial_rate_per_m)
    override = LogDistanceModel(report.offset_db - params.tx_power_dbm, report.exponent_n)
    return params.with_(override=override, fade=fade)


def residual_trace(log: MeasurementLog, report: CalibrationReport, ugv_truth: GeoPosition,
                   path=None) -> np.ndarray:
    """Per-sample measured-minus-fitted residuals; optionally written as CSV."""
    d = _distances(log, ugv_truth)
    fitted = report.mean_rssi_dbm(d)
    resid = log.rssi_dbm - fitted
    if path is not None:
        lines = ["t_s,distance_m,rssi_dbm,fitted_dbm,residual_db"]
        for row in zip(log.t_s, d, log.rssi_dbm, fitted, resid):
            lines.append(",".join(repr(float(v)) for v in row))
        Path(path).write_text("\n".join(lines) + "\n")
    return resid


def write_report(report: CalibrationReport, path) -> None:
    Path(path).write_text("".join(f"{k}={v!r}\n" for k, v in asdict(report).items()))


def read_report(path) -> CalibrationReport:
    types = {f.name: f.type for f in fields(CalibrationReport)}
    vals = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep or key not in types:
            raise ValueError(f"{path}:{lineno}: unexpected line {line!r}")
        vals[key] = int(value) if key == "n_samples" else float(value)
    missing = set(types) - set(vals)
    if missing:
        raise ValueError(f"{path}: missing keys {sorted(missing)}")
    return CalibrationReport(**vals)
