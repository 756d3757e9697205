"""Acceptance criteria 1-8. Each test prints one PASS/FAIL line, repeated in the summary."""
import contextlib
import math
import time
from pathlib import Path

import numpy as np
import pytest

from afar_twin import calibrate, pf
from afar_twin.channel import (AntennaPattern, ChannelParams, FadeModel, LogDistanceModel,
                               friis_gain_db, mean_rssi_dbm_array, sample_path_rssi_dbm,
                               two_ray_gain_db_array)
from afar_twin.fingerprint import AoiGrid, CnnModel, Dataset, TrainConfig, lr_schedule, nn, train
from afar_twin.fingerprint.model import PARAM_NAMES, loss_and_grads
from afar_twin.geo import EnuPosition, GeoPosition, LocalFrame, Rect, to_geo
from afar_twin.harness.cli import main
from afar_twin.harness.config import parse_config
from afar_twin.harness.experiment import mission
from afar_twin.harness.report import run_matrix, write_report
from afar_twin.measurement import generate_log
from afar_twin.vehicle import plan_lawnmower

from test_fingerprint import conv_oracle, numeric_grad, pool_oracle, rel_err
from test_harness import FAST


@contextlib.contextmanager
def criterion(acceptance, n, text):
    detail = {"msg": ""}
    t0 = time.perf_counter()
    try:
        yield detail
    except Exception as e:
        line = f"{text}: {detail['msg']} ({type(e).__name__}: {e})".replace("\n", " ")
        acceptance[n] = (False, line)
        print(f"criterion {n}: FAIL  {line}")
        raise
    dt = time.perf_counter() - t0
    line = f"{text}: {detail['msg']} [{dt:.1f} s]"
    acceptance[n] = (True, line)
    print(f"criterion {n}: PASS  {line}")


# 1 ------------------------------------------------------------------------------
def test_c1_two_ray_sanity(acceptance):
    with criterion(acceptance, 1, "two-ray reduces to Friis; far-field slope -40 dB/dec") as d:
        t0 = time.perf_counter()
        iso = AntennaPattern.isotropic()
        rng = np.random.default_rng(1)
        n = 10_000
        tx = np.column_stack([rng.uniform(-500, 500, (n, 2)), rng.uniform(0.5, 50, n)])
        rx = np.column_stack([rng.uniform(-500, 500, (n, 2)), rng.uniform(0.5, 120, n)])
        params = ChannelParams(tx_pattern=iso, rx_pattern=iso, reflection_coeff=0j)
        worst = 0.0
        for a, b in zip(tx, rx):
            g = two_ray_gain_db_array(a, b[None, :], params)[0]
            worst = max(worst, abs(g - friis_gain_db(float(np.linalg.norm(a - b)),
                                                     params.carrier_hz)))
        h = 10.0
        lam = 299792458.0 / params.carrier_hz
        d_b = 4 * h * h / lam
        dist = np.logspace(np.log10(10 * d_b), np.log10(100 * d_b), 200)
        far = np.column_stack([dist, np.zeros_like(dist), np.full_like(dist, h)])
        gain = two_ray_gain_db_array(np.array([0.0, 0.0, h]), far,
                                     params.with_(reflection_coeff=-1 + 0j))
        slope = np.polyfit(np.log10(dist), gain, 1)[0]
        dt = time.perf_counter() - t0
        d["msg"] = f"max |2ray-Friis| {worst:.1e} dB, slope {slope:.2f} dB/dec"
        assert worst < 1e-9
        assert abs(slope + 40.0) <= 1.0
        assert dt < 5.0


# 2 ------------------------------------------------------------------------------
def test_c2_deep_fade_depth(acceptance):
    with criterion(acceptance, 2, "DeepFade(60): min of 1e5 draws >= 50 dB below mean") as d:
        t0 = time.perf_counter()
        params = ChannelParams(fade=FadeModel.deep(60.0))
        tx = np.array([0.0, 0.0, 1.5])
        n = 100_000
        path = np.column_stack([np.linspace(0, 5000, n), np.full(n, 20.0), np.full(n, 30.0)])
        x = sample_path_rssi_dbm(tx, path, params, np.random.default_rng(5))
        depth = -np.min(x - mean_rssi_dbm_array(tx, path, params))
        dt = time.perf_counter() - t0
        d["msg"] = f"deepest fade {depth:.1f} dB"
        assert depth >= 50.0
        assert dt < 10.0


# 3 ------------------------------------------------------------------------------
def test_c3_particle_filter_oracle(acceptance):
    with criterion(acceptance, 3, "PF matched noiseless, 20 seeds; weights; systematic bounds") as d:
        t0 = time.perf_counter()
        cfg = parse_config("")
        traj = mission(cfg)
        params = cfg.dt.with_(fade=FadeModel())
        pcfg = cfg.pf_config()
        rng = np.random.default_rng(2024)
        errors, worst_sum = [], 0.0
        for s in range(20):
            truth = EnuPosition(*rng.uniform(-200, 200, 2), cfg.field.ugv_height_m)
            lg = generate_log(traj, to_geo(cfg.frame, truth), params, cfg.mission.rate_hz, seed=s)
            if s < 2:
                # step the filter by hand and check the weights after every update
                uav, st = lg.enu(cfg.frame), pf.init_uniform(pcfg, 1000 + s)
                for k in range(len(lg)):
                    st = pf.update(pf.predict(st, pcfg), uav[k], lg.rssi_dbm[k], params, pcfg)
                    worst_sum = max(worst_sum, abs(st.weights.sum() - 1.0))
                    assert np.all(st.weights >= 0)
                    if pf.effective_sample_size(st) < pcfg.ess_threshold * st.n:
                        st = pf.resample_systematic(st)
                        worst_sum = max(worst_sum, abs(st.weights.sum() - 1.0))
            est, _ = pf.run(lg, params, pcfg, seed=1000 + s, frame=cfg.frame)
            errors.append(math.hypot(est.east_m - truth.east_m, est.north_m - truth.north_m))
        diag = math.hypot(cfg.aoi.width, cfg.aoi.height)
        med = float(np.median(errors))
        bad = 0
        for _ in range(1000):
            n = int(rng.integers(2, 500))
            w = rng.dirichlet(np.full(n, rng.uniform(0.05, 2.0)))
            c = np.bincount(pf.systematic_indices(w, rng.uniform(0, 1 / n)), minlength=n)
            bad += int(c.sum() != n or np.any(c < np.floor(n * w - 1e-9))
                       or np.any(c > np.ceil(n * w + 1e-9)))
        dt = time.perf_counter() - t0
        d["msg"] = (f"median error {med:.1f} m vs {0.05 * diag:.1f} m, "
                    f"max |sum w - 1| {worst_sum:.1e}, {bad} bound violations")
        assert med < 0.05 * diag
        assert worst_sum < 1e-12
        assert bad == 0
        assert dt < 120.0


# 4 ------------------------------------------------------------------------------
def test_c4_cnn_numerics(acceptance):
    with criterion(acceptance, 4, "CNN gradients, conv/pool oracles, 30-sample overfit") as d:
        t0 = time.perf_counter()
        rng = np.random.default_rng(4)
        model = CnnModel.init(4, in_channels=2, height=16, width=16, channels=(3, 4, 5), seed=1)
        imgs = rng.normal(size=(2, 2, 16, 16))
        labels = np.array([1, 3])
        _, grads = loss_and_grads(model, imgs, labels)
        worst_grad = max(
            rel_err(grads[k], numeric_grad(lambda: loss_and_grads(model, imgs, labels)[0],
                                           model.params[k]))
            for k in PARAM_NAMES)
        x = rng.normal(size=(3, 12, 12))
        k = rng.normal(size=(4, 3, 3, 3))
        b = rng.normal(size=4)
        conv_err = np.max(np.abs(nn.conv2d(x, k, b) - conv_oracle(x, k, b)))
        y = rng.normal(size=(3, 12, 12))
        pooled, idx = nn.maxpool2(y)
        ref, ref_idx = pool_oracle(y)
        pool_err = np.max(np.abs(pooled - ref))
        data = Dataset(rng.normal(size=(30, 2, 8, 8)), np.arange(30) % 3)
        cfg = TrainConfig(epochs=500, decay_factor=1.0, weight_decay=0.0,
                          split=(1.0, 0.0, 0.0), seed=1)
        _, m = train(data, AoiGrid(Rect(0, 0, 30, 10), 1, 3), cfg)
        dt = time.perf_counter() - t0
        d["msg"] = (f"grad rel err {worst_grad:.1e}, conv {conv_err:.1e}, pool {pool_err:.1e}, "
                    f"overfit train acc {m['train_acc']:.2f}")
        assert worst_grad < 1e-4
        assert conv_err <= 1e-12 and pool_err <= 1e-12
        np.testing.assert_array_equal(idx, ref_idx)
        assert m["train_acc"] == 1.0
        assert dt < 180.0


# 5 ------------------------------------------------------------------------------
def test_c5_training_recipe(acceptance):
    with criterion(acceptance, 5, "training recipe echo and lr midpoint") as d:
        cfg = TrainConfig()
        rng = np.random.default_rng(0)
        data = Dataset(rng.normal(size=(40, 2, 8, 8)), np.arange(40) % 4)
        _, m = train(data, AoiGrid(Rect(0, 0, 100, 100), 2, 2), TrainConfig(epochs=3, seed=0))
        mid = lr_schedule(TrainConfig(epochs=201), 100)
        d["msg"] = (f"epochs {cfg.epochs}, lr0 {cfg.lr0:g}, end lr "
                    f"{lr_schedule(cfg, cfg.epochs - 1):g}, wd {m['weight_decay']:g}, "
                    f"split {m['split']}, midpoint {mid:.6e}")
        assert (cfg.epochs, cfg.lr0, cfg.weight_decay) == (200, 1e-3, 1e-3)
        assert lr_schedule(cfg, cfg.epochs - 1) == pytest.approx(1e-4, abs=1e-15)
        assert (m["lr0"], m["weight_decay"], m["split"]) == (1e-3, 1e-3, [0.70, 0.15, 0.15])
        assert m["lr_final"] == pytest.approx(1e-4, abs=1e-15)
        # 3.162e-4 is the four-digit rounding of 10**-3.5
        assert mid == pytest.approx(10 ** -3.5, abs=1e-9)
        assert float(f"{mid:.3e}") == 3.162e-4


# 6 ------------------------------------------------------------------------------
def test_c6_calibration_recovery(acceptance):
    with criterion(acceptance, 6, "generate-then-fit log-distance (-40, 3.0, 6)") as d:
        t0 = time.perf_counter()
        frame = LocalFrame(GeoPosition(35.7275, -78.696, 0.0))
        # enough range and samples that the slope's standard error is ~0.015
        traj = plan_lawnmower(Rect(-100, -100, 100, 100), 30.0, 10.0, 5.0, frame)
        base = ChannelParams()
        params = base.with_(override=LogDistanceModel(-40.0 - base.tx_power_dbm, 3.0),
                            fade=FadeModel(6.0))
        truths = [to_geo(frame, EnuPosition(e, n, 1.5))
                  for e, n in [(0, 0), (15, -10), (-20, 5), (10, 20),
                               (-40, 40), (40, -40), (35, 35), (-35, -35)]]
        logs = [generate_log(traj, t, params, 5.0, 100 + i) for i, t in enumerate(truths)]
        rep = calibrate.fit_log_distance(logs, truths)
        dt = time.perf_counter() - t0
        d["msg"] = f"n {rep.exponent_n:.3f}, sigma {rep.sigma_db:.2f} dB from {rep.n_samples} samples"
        assert 2.95 <= rep.exponent_n <= 3.05
        assert 5.4 <= rep.sigma_db <= 6.6
        assert dt < 30.0


# 7 ------------------------------------------------------------------------------
def test_c7_scenario_orderings(acceptance, tmp_path):
    with criterion(acceptance, 7, "orderings on the default 20-seed matrix") as d:
        t0 = time.perf_counter()
        cfg = parse_config("")
        assert cfg.matrix.n_seeds == 20
        report = run_matrix(cfg)
        out = Path(__file__).resolve().parent.parent / "acceptance_matrix"
        write_report(report, out)
        dt = time.perf_counter() - t0
        for c in report.cells:
            print(f"  {c.estimator:9s} S{c.scenario} T{c.trial}: median {c.median_error_m:7.1f} m"
                  f"  IQR {c.iqr_m:6.1f} m  n={c.n_seeds}")
        failed = [c.name for c in report.checks if c.required and not c.passed]
        for c in report.checks:
            print(f"  {'ok  ' if c.passed else 'FAIL'} {c.name}: {c.detail}")
        d["msg"] = (f"{sum(c.passed for c in report.checks if c.required)}/"
                    f"{sum(c.required for c in report.checks)} required checks pass, "
                    f"{dt / 60:.1f} min on {cfg.matrix.jobs or 1} worker(s)")
        assert all(c.n_seeds == 20 for c in report.cells)
        assert not failed, failed


# 8 ------------------------------------------------------------------------------
def snapshot(out, names):
    return {n: (out / n).read_bytes() for n in names}


def test_c8_cli_determinism(acceptance, tmp_path):
    with criterion(acceptance, 8, "CLI reruns are byte-identical") as d:
        cfg_path = tmp_path / "fast.toml"
        cfg_path.write_text(FAST + "estimators = ['PF']\nscenarios = [1, 2]\ntrials = [1]\n")
        out = tmp_path / "out"
        common = ["--config", str(cfg_path), "--seed", "11", "--out-dir", str(out)]
        log = str(out / "log.csv")
        rw_logs = []
        runs = {
            "simulate": (["simulate", "--trial", "2"], ["log.csv"]),
            "train": (["train", "--export-dataset"],
                      ["model.fcnn", "model.json", "dataset.csv", "dataset/00000.npy"]),
            "localize": (["localize", "--log", log, "--diagnostics"],
                         ["estimate.json", "pf_diagnostics.csv"]),
            "eval": (["eval", "--estimate", str(out / "estimate.json")], ["eval.json"]),
            "calibrate": (None, ["calibration.txt", "residuals_0.csv", "residuals_1.csv"]),
            "matrix": (["matrix"], ["matrix.csv", "matrix.json", "results.csv"]),
        }
        checked = []
        for name, (argv, files) in runs.items():
            if name == "calibrate":
                # two surrogate logs with known transmitters feed the fit
                argv = ["calibrate"]
                for t in (1, 3):
                    p = out / f"rw{t}.csv"
                    assert main(["simulate", "--trial", str(t), "--env", "RW", "--output", str(p)]
                                + common) == 0
                    rw_logs.append(p)
                from afar_twin.measurement import read_csv
                for p in rw_logs:
                    m = read_csv(p).meta.extra
                    argv += ["--log", str(p), "--truth",
                             f"{m['ugv_lat']},{m['ugv_lon']},{m['ugv_alt']}"]
            assert main(argv + common) == 0, name
            first = snapshot(out, files + [f"{name}.manifest.json"])
            assert main(argv + common) == 0, name
            second = snapshot(out, files + [f"{name}.manifest.json"])
            diff = [k for k in first if first[k] != second[k]]
            assert not diff, (name, diff)
            checked.append(name)
        d["msg"] = "identical outputs and manifests for " + ", ".join(checked)
