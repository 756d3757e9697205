"""Particle-filter localisation of a static RF source from UAV RSSI.

Each measurement runs predict (roughening jitter) -> update (Gaussian
likelihood of the RSSI deviation under the mean channel) -> systematic
resampling when the effective sample size drops below a threshold.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .channel import ChannelParams, mean_rssi_dbm_array
from .geo import EnuPosition, LocalFrame, Rect
from .measurement import MeasurementLog

log = logging.getLogger(__name__)

UNDERFLOW = 1e-300


@dataclass(frozen=True)
class PfConfig:
    search_area: Rect
    n_particles: int = 1000
    meas_sigma_db: float = 6.0
    roughening_sigma_m: float = 2.0
    ess_threshold: float = 0.5
    ugv_height_m: float = 1.5

    def __post_init__(self):
        if self.n_particles < 100:
            raise ValueError("n_particles must be >= 100")
        if self.meas_sigma_db <= 0:
            raise ValueError("meas_sigma_db must be > 0")
        if not 0 < self.ess_threshold <= 1:
            raise ValueError("ess_threshold must be in (0, 1]")
        if self.roughening_sigma_m < 0:
            raise ValueError("roughening_sigma_m must be >= 0")


@dataclass
class PfState:
    particles: np.ndarray   # (N, 3) ENU, up fixed at the UGV antenna height
    weights: np.ndarray     # (N,)
    rng: np.random.Generator
    step_count: int = 0
    underflow_resets: int = 0

    @property
    def n(self) -> int:
        return len(self.weights)


def init_uniform(cfg: PfConfig, seed) -> PfState:
    a = cfg.search_area
    rng = np.random.default_rng(seed)
    n = cfg.n_particles
    east = rng.uniform(a.east_min, a.east_max, n)
    north = rng.uniform(a.north_min, a.north_max, n)
    parts = np.column_stack([east, north, np.full(n, cfg.ugv_height_m)])
    return PfState(parts, np.full(n, 1.0 / n), rng)


def predict(state: PfState, cfg: PfConfig) -> PfState:
    if cfg.roughening_sigma_m == 0:
        return replace(state)
    a = cfg.search_area
    p = state.particles.copy()
    p[:, :2] += state.rng.normal(0.0, cfg.roughening_sigma_m, size=(state.n, 2))
    np.clip(p[:, 0], a.east_min, a.east_max, out=p[:, 0])
    np.clip(p[:, 1], a.north_min, a.north_max, out=p[:, 1])
    return replace(state, particles=p)


def likelihood(z: float, z_hat: np.ndarray, sigma_db: float) -> np.ndarray:
    return np.exp(-((z - z_hat) ** 2) / (2.0 * sigma_db ** 2))


def update(state: PfState, uav_pos, z: float, params: ChannelParams, cfg: PfConfig) -> PfState:
    uav = uav_pos.as_array() if isinstance(uav_pos, EnuPosition) else np.asarray(uav_pos, float)
    z_hat = mean_rssi_dbm_array(state.particles, uav, params)
    w = state.weights * likelihood(z, z_hat, cfg.meas_sigma_db)
    total = w.sum()
    resets = state.underflow_resets
    if not total >= UNDERFLOW:
        log.debug("step %d: all likelihoods underflowed, weights reset", state.step_count)
        w = np.full(state.n, 1.0 / state.n)
        resets += 1
    else:
        w = w / total
    return replace(state, weights=w, step_count=state.step_count + 1, underflow_resets=resets)


def effective_sample_size(state_or_weights) -> float:
    w = state_or_weights.weights if isinstance(state_or_weights, PfState) else state_or_weights
    return float(1.0 / np.sum(np.asarray(w) ** 2))


def systematic_indices(weights: np.ndarray, u: float) -> np.ndarray:
    """Ancestor indices for offset `u` in [0, 1/N)."""
    n = len(weights)
    cdf = np.cumsum(weights)
    cdf /= cdf[-1]
    cdf[-1] = 1.0
    points = u + np.arange(n) / n
    return np.minimum(np.searchsorted(cdf, points, side="right"), n - 1)


def resample_systematic(state: PfState) -> PfState:
    u = state.rng.uniform(0.0, 1.0 / state.n)
    idx = systematic_indices(state.weights, u)
    return replace(state, particles=state.particles[idx].copy(),
                   weights=np.full(state.n, 1.0 / state.n))


def estimate(state: PfState) -> EnuPosition:
    return EnuPosition.from_array(state.weights @ state.particles)


@dataclass
class PfDiagnostics:
    ess: np.ndarray
    est_east: np.ndarray
    est_north: np.ndarray
    error_m: np.ndarray
    resampled: np.ndarray
    underflow_resets: int = 0

    @property
    def n_resamples(self) -> int:
        return int(self.resampled.sum())

    def write_csv(self, path) -> None:
        lines = ["step,ess,est_east,est_north,error_m"]
        for k, row in enumerate(zip(self.ess, self.est_east, self.est_north, self.error_m)):
            lines.append(f"{k}," + ",".join(repr(float(v)) for v in row))
        Path(path).write_text("\n".join(lines) + "\n")


def run(log_: MeasurementLog, params: ChannelParams, cfg: PfConfig, seed,
        frame: LocalFrame | None = None, truth: EnuPosition | None = None):
    """Filter a whole log; returns (final estimate, diagnostics)."""
    uav = log_.enu(frame)
    z = log_.rssi_dbm
    n = len(z)
    ess = np.empty(n)
    est = np.empty((n, 2))
    resampled = np.zeros(n, dtype=bool)
    state = init_uniform(cfg, seed)
    for k in range(n):
        state = predict(state, cfg)
        state = update(state, uav[k], z[k], params, cfg)
        e = state.weights @ state.particles
        est[k] = e[:2]
        ess[k] = effective_sample_size(state)
        if ess[k] < cfg.ess_threshold * state.n:
            state = resample_systematic(state)
            resampled[k] = True
    if truth is not None:
        err = np.hypot(est[:, 0] - truth.east_m, est[:, 1] - truth.north_m)
    else:
        err = np.full(n, np.nan)
    final = EnuPosition(float(est[-1, 0]), float(est[-1, 1]), cfg.ugv_height_m)
    return final, PfDiagnostics(ess, est[:, 0], est[:, 1], err, resampled,
                                state.underflow_resets)
