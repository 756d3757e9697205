"""Scenario x trial x estimator evaluation.

Scenario 1 develops and tests in the twin; Scenario 2 develops in the twin
and tests in the real-world surrogate; Scenario 3 additionally calibrates
the twin from surrogate logs (placed at random, disjoint seeds) before
developing.

Seeds derive from ``numpy.random.SeedSequence([root_seed, purpose, ...])``.
Test logs and PF streams depend on (trial, seed index) but not on the
scenario, so Scenarios 2 and 3 see identical test logs (common random
numbers). Trained models are cached per (development environment, seed index).
"""
from __future__ import annotations

import logging
import time
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .. import calibrate, pf
from ..channel import ChannelParams
from ..fingerprint import (AoiGrid, CnnModel, centroid_enu, predict_class, rasterize,
                           simulate_dataset, train)
from ..geo import EnuPosition, GeoPosition, ground_distance, to_enu, to_geo
from ..measurement import MeasurementLog, generate_log, read_csv
from ..vehicle import Trajectory, load_waypoints, plan_lawnmower
from .config import Config

log = logging.getLogger(__name__)

# seed purposes
TEST_LOG, PF_RUN, CNN_DATA, CNN_INIT, CALIB = 1, 2, 3, 4, 5
ENV_CODE = {"DT": 0, "CAL": 1}


def derive_seed(root: int, *keys: int) -> int:
    return int(np.random.SeedSequence([root, *keys]).generate_state(1)[0])


@dataclass(frozen=True)
class EnvironmentSpec:
    tag: str                 # "DT" or "RW-surrogate"
    channel: ChannelParams


@dataclass(frozen=True)
class ScenarioSpec:
    id: int
    develop_env: EnvironmentSpec
    test_env: EnvironmentSpec
    calibrated: bool


@dataclass(frozen=True)
class TrialSpec:
    id: int
    ugv_truth: GeoPosition
    in_flight_area: bool
    log_file: str = ""


@dataclass(frozen=True)
class TrialResult:
    estimator: str
    scenario: int
    trial: int
    seed_index: int
    seed: int
    error_m: float
    est_east_m: float
    est_north_m: float
    runtime_s: float


def scenarios(cfg: Config) -> dict:
    dt = EnvironmentSpec("DT", cfg.dt)
    rw = EnvironmentSpec("RW-surrogate", cfg.rw_channel)
    return {1: ScenarioSpec(1, dt, dt, False),
            2: ScenarioSpec(2, dt, rw, False),
            3: ScenarioSpec(3, dt, rw, True)}


def trials(cfg: Config) -> dict:
    out = {}
    for tid, t in cfg.trials.items():
        geo = to_geo(cfg.frame, EnuPosition(t.east_m, t.north_m, cfg.field.ugv_height_m))
        out[tid] = TrialSpec(tid, geo, cfg.flight_area.contains(t.east_m, t.north_m), t.log_file)
    return out


def mission(cfg: Config) -> Trajectory:
    m = cfg.mission
    if m.waypoint_file:
        return load_waypoints(m.waypoint_file, cfg.frame)
    return plan_lawnmower(cfg.flight_area, m.altitude_m, m.lane_spacing_m, m.speed_mps, cfg.frame)


def grid_of(cfg: Config) -> AoiGrid:
    return AoiGrid(cfg.aoi, cfg.cnn.rows, cfg.cnn.cols)


class Runner:
    """Holds per-seed caches (calibrations, trained models) for one config."""

    def __init__(self, cfg: Config):
        self.cfg = cfg
        self.traj = mission(cfg)
        self.grid = grid_of(cfg)
        self.scenarios = scenarios(cfg)
        self.trials = trials(cfg)
        self._calib: dict = {}
        self._models: dict = {}
        self.train_metrics: dict = {}

    @property
    def root(self) -> int:
        return self.cfg.matrix.root_seed

    # environments -------------------------------------------------------
    def calibration(self, k: int):
        """Fit on surrogate logs from random transmitter spots; cached per seed index."""
        if k not in self._calib:
            cfg = self.cfg
            rng = np.random.default_rng(derive_seed(self.root, CALIB, k))
            a = cfg.aoi
            rw = self.scenarios[2].test_env.channel
            logs, truths = [], []
            for j in range(cfg.calibration.n_logs):
                p = EnuPosition(rng.uniform(a.east_min, a.east_max),
                                rng.uniform(a.north_min, a.north_max), cfg.field.ugv_height_m)
                g = to_geo(cfg.frame, p)
                logs.append(generate_log(self.traj, g, rw, cfg.mission.rate_hz,
                                         derive_seed(self.root, CALIB, k, j + 1), "RW-surrogate"))
                truths.append(g)
            report = calibrate.fit_log_distance(logs, truths)
            self._calib[k] = (report, calibrate.apply(report, cfg.dt))
        return self._calib[k]

    def develop_channel(self, scenario: int, k: int) -> tuple[ChannelParams, float]:
        """(channel model, PF measurement sigma) used for development."""
        sc = self.scenarios[scenario]
        if sc.calibrated:
            report, params = self.calibration(k)
            return params, report.sigma_db
        return sc.develop_env.channel, self.cfg.pf.meas_sigma_db

    def test_log(self, scenario: int, trial: int, k: int) -> MeasurementLog:
        t = self.trials[trial]
        if t.log_file and self.scenarios[scenario].test_env.tag == "RW-surrogate":
            return read_csv(t.log_file)
        env = self.scenarios[scenario].test_env
        seed = derive_seed(self.root, TEST_LOG, trial, k, 0 if env.tag == "DT" else 1)
        return generate_log(self.traj, t.ugv_truth, env.channel, self.cfg.mission.rate_hz,
                            seed, env.tag)

    # Finger-CNN --------------------------------------------------------
    def model(self, scenario: int, k: int) -> CnnModel:
        env = "CAL" if self.scenarios[scenario].calibrated else "DT"
        key = (env, k)
        if key not in self._models:
            cfg = self.cfg
            channel, _ = self.develop_channel(scenario, k)
            data, _ = simulate_dataset(
                self.traj, self.grid, channel, cfg.cnn.n_logs,
                derive_seed(self.root, CNN_DATA, ENV_CODE[env], k), cfg.flight_area,
                cfg.mission.rate_hz, cfg.field.ugv_height_m, cfg.cnn.image_size,
                cfg.cnn.image_size)
            tcfg = cfg.train_config(derive_seed(self.root, CNN_INIT, ENV_CODE[env], k))
            model, metrics = train(data, self.grid, tcfg)
            self._models[key] = model
            self.train_metrics[key] = metrics
        return self._models[key]

    # estimators --------------------------------------------------------
    def localize(self, estimator: str, scenario: int, trial: int, k: int) -> TrialResult:
        cfg = self.cfg
        t0 = time.perf_counter()
        lg = self.test_log(scenario, trial, k)
        truth = to_enu(cfg.frame, self.trials[trial].ugv_truth)
        if estimator == "PF":
            channel, sigma = self.develop_channel(scenario, k)
            seed = derive_seed(self.root, PF_RUN, trial, k)
            est, _ = pf.run(lg, channel, cfg.pf_config(sigma), seed, cfg.frame, truth)
        elif estimator == "FingerCNN":
            model = self.model(scenario, k)
            img = rasterize(lg, cfg.flight_area, cfg.cnn.image_size, cfg.cnn.image_size,
                            frame=cfg.frame).network_input()
            est = centroid_enu(self.grid, predict_class(model, img.astype(np.float64)),
                               cfg.field.ugv_height_m)
            seed = derive_seed(self.root, CNN_INIT, ENV_CODE["CAL" if scenario == 3 else "DT"], k)
        else:
            raise ValueError(f"unknown estimator {estimator!r}")
        return TrialResult(estimator, scenario, trial, k, seed, ground_distance(truth, est),
                           est.east_m, est.north_m, time.perf_counter() - t0)


def run_trial(estimator: str, scenario: int, trial: int, seeds, cfg: Config | None = None,
              runner: Runner | None = None) -> list:
    """One result per seed index; a failing seed is logged and skipped."""
    runner = runner or Runner(cfg or Config())
    out = []
    for k in seeds:
        try:
            out.append(runner.localize(estimator, scenario, trial, k))
        except Exception:  # keep partial results
            log.exception("%s scenario %d trial %d seed %d failed", estimator, scenario, trial, k)
    return out


def _seed_block(args):
    cfg, k = args
    runner = Runner(cfg)
    m = cfg.matrix
    res = []
    for est in m.estimators:
        for s in m.scenarios:
            for t in m.trials:
                res.extend(run_trial(est, s, t, [k], runner=runner))
    return res


def run_all(cfg: Config) -> list:
    """Every (estimator, scenario, trial, seed) result, in deterministic order."""
    m = cfg.matrix
    jobs = [(cfg, k) for k in range(m.n_seeds)]
    if m.jobs > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(m.jobs) as ex:
            blocks = list(ex.map(_seed_block, jobs))
    else:
        blocks = [_seed_block(j) for j in jobs]
    results = [r for b in blocks for r in b]
    order = {(e, s, t): i for i, (e, s, t) in enumerate(
        (e, s, t) for e in m.estimators for s in m.scenarios for t in m.trials)}
    return sorted(results, key=lambda r: (order[(r.estimator, r.scenario, r.trial)], r.seed_index))
