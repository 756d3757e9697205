"""Command-line entry point: ``afar-twin <subcommand> [--config c.toml] [--seed N] [--out-dir D]``.

Subcommands
    simulate   write one flight log for a trial transmitter
    train      simulate a fingerprint dataset and train a Finger-CNN
    localize   run PF or Finger-CNN on a log, write estimate.json
    eval       recompute the horizontal error of an estimate from its log
    calibrate  fit a log-distance model to logs with known transmitters
    matrix     the full scenario x trial x estimator evaluation

Every run writes ``<subcommand>.manifest.json`` (config hash, seed,
arguments, versions; no timestamps) into the output directory.
"""
from __future__ import annotations

import argparse
import json
import logging
import platform
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .. import __version__, calibrate, pf
from ..fingerprint import (AoiGrid, centroid_enu, load_model, predict_class, rasterize,
                           save_model, simulate_dataset, train)
from ..geo import EnuPosition, GeoPosition, Rect, ground_distance, to_enu, to_geo
from ..measurement import LogFormatError, generate_log, read_csv, write_csv
from .config import Config, ConfigError, load_config
from .experiment import CNN_DATA, CNN_INIT, derive_seed, grid_of, mission
from .report import run_matrix, write_report

log = logging.getLogger("afar_twin")


def _geo_arg(text: str) -> GeoPosition:
    try:
        lat, lon, alt = (float(v) for v in text.split(","))
        return GeoPosition(lat, lon, alt)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected lat,lon,alt: {exc}") from None


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=str) + "\n")


def _manifest(args, cfg: Config, outputs: list) -> Path:
    out = Path(args.out_dir)
    skip = {"config", "out_dir", "seed", "command", "check_failed"}
    info = {
        "subcommand": args.command,
        "seed": args.seed,
        "config_path": args.config,
        "config_sha256": cfg.digest,
        "args": {k: v for k, v in sorted(vars(args).items()) if k not in skip},
        "outputs": sorted(str(Path(p).relative_to(out)) if Path(p).is_relative_to(out) else str(p)
                          for p in outputs),
        "versions": {"afar_twin": __version__, "numpy": np.__version__,
                     "python": platform.python_version()},
    }
    path = out / f"{args.command}.manifest.json"
    _write_json(path, info)
    return path


def _truth_of(lg) -> GeoPosition | None:
    x = lg.meta.extra
    if all(k in x for k in ("ugv_lat", "ugv_lon", "ugv_alt")):
        return GeoPosition(float(x["ugv_lat"]), float(x["ugv_lon"]), float(x["ugv_alt"]))
    return None


# subcommands -------------------------------------------------------------
def cmd_simulate(args, cfg: Config) -> list:
    if args.ugv is not None:
        ugv, trial = args.ugv, ""
    else:
        t = cfg.trials[args.trial]
        ugv = to_geo(cfg.frame, EnuPosition(t.east_m, t.north_m, cfg.field.ugv_height_m))
        trial = args.trial
    params, tag = (cfg.dt, "DT") if args.env == "DT" else (cfg.rw_channel, "RW-surrogate")
    lg = generate_log(mission(cfg), ugv, params, cfg.mission.rate_hz, args.seed, tag)
    lg.meta.extra.update(ugv_lat=ugv.lat_deg, ugv_lon=ugv.lon_deg, ugv_alt=ugv.alt_m)
    if trial:
        lg.meta.extra["trial"] = trial
    path = Path(args.out_dir) / args.output
    write_csv(lg, path)
    print(f"wrote {path} ({len(lg)} samples, env {tag})")
    return [path]


def _develop_channel(cfg: Config, report_path):
    if report_path is None:
        return cfg.dt, cfg.pf.meas_sigma_db
    report = calibrate.read_report(report_path)
    return calibrate.apply(report, cfg.dt), report.sigma_db


def cmd_train(args, cfg: Config) -> list:
    out = Path(args.out_dir)
    grid = grid_of(cfg)
    channel, _ = _develop_channel(cfg, args.calibration)
    size = cfg.cnn.image_size
    data, _ = simulate_dataset(mission(cfg), grid, channel, args.n_logs or cfg.cnn.n_logs,
                               derive_seed(args.seed, CNN_DATA), cfg.flight_area,
                               cfg.mission.rate_hz, cfg.field.ugv_height_m, size, size)
    tcfg = cfg.train_config(derive_seed(args.seed, CNN_INIT))
    if args.epochs:
        tcfg = replace(tcfg, epochs=args.epochs)
    model, metrics = train(data, grid, tcfg)
    model_path = out / args.output
    save_model(model, model_path)
    side = model_path.with_suffix(".json")
    _write_json(side, {
        "grid": {"bounds": list(cfg.field.aoi), "rows": grid.rows, "cols": grid.cols},
        "flight_area": list(cfg.field.flight_area),
        "image_size": size,
        "ugv_height_m": cfg.field.ugv_height_m,
        "channel_id": channel.channel_id,
        "metrics": metrics,
    })
    outputs = [model_path, side]
    if args.export_dataset:
        img_dir = out / "dataset"
        img_dir.mkdir(exist_ok=True)
        rows = ["image_path,label"]
        for i, (img, lab) in enumerate(zip(data.images, data.labels)):
            name = f"dataset/{i:05d}.npy"
            np.save(out / name, img)
            rows.append(f"{name},{int(lab)}")
        (out / "dataset.csv").write_text("\n".join(rows) + "\n")
        outputs.append(out / "dataset.csv")
    print(f"wrote {model_path}: val acc {metrics['best_val_acc']:.3f}, "
          f"test acc {metrics['test_acc']:.3f}")
    return outputs


def cmd_localize(args, cfg: Config) -> list:
    out = Path(args.out_dir)
    lg = read_csv(args.log)
    frame = lg.meta.frame
    truth_geo = _truth_of(lg)
    truth = to_enu(frame, truth_geo) if truth_geo is not None else None
    outputs = []
    if args.estimator == "PF":
        channel, sigma = _develop_channel(cfg, args.calibration)
        pcfg = cfg.pf_config(sigma)
        est, diag = pf.run(lg, channel, pcfg, args.seed, frame, truth)
        if args.diagnostics:
            p = out / "pf_diagnostics.csv"
            diag.write_csv(p)
            outputs.append(p)
        extra = {"n_resamples": diag.n_resamples, "underflow_resets": diag.underflow_resets}
    else:
        if args.model is None:
            raise ValueError("FingerCNN needs --model (see the train subcommand)")
        side = json.loads(Path(args.model).with_suffix(".json").read_text())
        g = side["grid"]
        grid = AoiGrid(Rect(*g["bounds"]), g["rows"], g["cols"])
        size = side["image_size"]
        model = load_model(args.model)
        img = rasterize(lg, Rect(*side["flight_area"]), size, size, frame=frame).network_input()
        cls = predict_class(model, img)
        est = centroid_enu(grid, cls, side["ugv_height_m"])
        extra = {"class": cls}
    geo = to_geo(frame, est)
    result = {
        "estimator": args.estimator,
        "log": str(args.log),
        "est_east_m": est.east_m, "est_north_m": est.north_m,
        "est_lat_deg": geo.lat_deg, "est_lon_deg": geo.lon_deg, "est_alt_m": geo.alt_m,
        "error_m": ground_distance(truth, est) if truth is not None else None,
        **extra,
    }
    path = out / args.output
    _write_json(path, result)
    msg = f", error {result['error_m']:.1f} m" if truth is not None else ""
    print(f"{args.estimator} estimate ({est.east_m:.1f}, {est.north_m:.1f}) m{msg}")
    return [path] + outputs


def cmd_eval(args, cfg: Config) -> list:
    est = json.loads(Path(args.estimate).read_text())
    lg = read_csv(args.log or est["log"])
    truth_geo = args.truth or _truth_of(lg)
    if truth_geo is None:
        raise ValueError("log carries no transmitter truth; pass --truth lat,lon,alt")
    frame = lg.meta.frame
    estimate = to_enu(frame, GeoPosition(est["est_lat_deg"], est["est_lon_deg"], est["est_alt_m"]))
    err = ground_distance(to_enu(frame, truth_geo), estimate)
    recorded = est.get("error_m")
    match = recorded is None or abs(err - recorded) <= 1e-6
    path = Path(args.out_dir) / args.output
    _write_json(path, {"estimator": est["estimator"], "error_m": err, "recorded_error_m": recorded,
                       "matches_recorded": match})
    print(f"error {err:.3f} m" + ("" if recorded is None else f" (recorded {recorded:.3f} m)"))
    if not match:
        raise RuntimeError("recomputed error differs from the recorded one")
    return [path]


def cmd_calibrate(args, cfg: Config) -> list:
    if len(args.log) != len(args.truth):
        raise ValueError(f"{len(args.log)} --log but {len(args.truth)} --truth values")
    logs = [read_csv(p) for p in args.log]
    report = calibrate.fit_log_distance(logs, args.truth)
    out = Path(args.out_dir)
    path = out / args.output
    calibrate.write_report(report, path)
    outputs = [path]
    for i, (lg, truth) in enumerate(zip(logs, args.truth)):
        p = out / f"residuals_{i}.csv"
        calibrate.residual_trace(lg, report, truth, p)
        outputs.append(p)
    print(f"n = {report.exponent_n:.3f}, offset = {report.offset_db:.2f} dB, "
          f"sigma = {report.sigma_db:.2f} dB, R^2 = {report.r_squared:.3f}")
    return outputs


def cmd_matrix(args, cfg: Config) -> list:
    m = replace(cfg.matrix, root_seed=args.seed,
                n_seeds=args.n_seeds or cfg.matrix.n_seeds, jobs=args.jobs or cfg.matrix.jobs)
    cfg = replace(cfg, matrix=m)
    report = run_matrix(cfg)
    paths = write_report(report, args.out_dir)
    for c in report.cells:
        print(f"{c.estimator:9s} S{c.scenario} T{c.trial}  median {c.median_error_m:7.1f} m  "
              f"IQR {c.iqr_m:7.1f} m  n={c.n_seeds}")
    for ch in report.checks:
        tag = "PASS" if ch.passed else ("FAIL" if ch.required else "warn")
        print(f"{tag} {ch.name}: {ch.detail}")
    args.check_failed = args.check and not report.passed
    return list(paths.values())


COMMANDS = {"simulate": cmd_simulate, "train": cmd_train, "localize": cmd_localize,
            "eval": cmd_eval, "calibrate": cmd_calibrate, "matrix": cmd_matrix}


def build_parser() -> argparse.ArgumentParser:
    # global flags are accepted before or after the subcommand
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="root seed (default 0)")
    common.add_argument("--config", default=argparse.SUPPRESS, help="TOML config file")
    common.add_argument("--out-dir", default=argparse.SUPPRESS, help="output directory (default out)")

    p = argparse.ArgumentParser(prog="afar-twin", parents=[common],
                                description="Digital-twin RF source localization experiments.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", parents=[common], help="write a flight log")
    s.add_argument("--trial", type=int, choices=(1, 2, 3), default=1)
    s.add_argument("--env", choices=("DT", "RW"), default="DT")
    s.add_argument("--ugv", type=_geo_arg, help="transmitter lat,lon,alt (overrides --trial)")
    s.add_argument("--output", default="log.csv")

    s = sub.add_parser("train", parents=[common], help="train a Finger-CNN")
    s.add_argument("--calibration", help="calibration report; trains on the calibrated twin")
    s.add_argument("--n-logs", type=int, help="dataset size (default from config)")
    s.add_argument("--epochs", type=int, help="override cnn.epochs")
    s.add_argument("--export-dataset", action="store_true",
                   help="also write dataset.csv and the .npy images")
    s.add_argument("--output", default="model.fcnn")

    s = sub.add_parser("localize", parents=[common], help="estimate the transmitter position")
    s.add_argument("--log", required=True)
    s.add_argument("--estimator", choices=("PF", "FingerCNN"), default="PF")
    s.add_argument("--model", help="Finger-CNN model file")
    s.add_argument("--calibration", help="calibration report for the PF channel model")
    s.add_argument("--diagnostics", action="store_true", help="write pf_diagnostics.csv")
    s.add_argument("--output", default="estimate.json")

    s = sub.add_parser("eval", parents=[common], help="recompute an estimate's error")
    s.add_argument("--estimate", required=True)
    s.add_argument("--log", help="log file (default: the one named in the estimate)")
    s.add_argument("--truth", type=_geo_arg, help="lat,lon,alt when the log carries none")
    s.add_argument("--output", default="eval.json")

    s = sub.add_parser("calibrate", parents=[common], help="fit a log-distance model")
    s.add_argument("--log", action="append", required=True)
    s.add_argument("--truth", type=_geo_arg, action="append", required=True)
    s.add_argument("--output", default="calibration.txt")

    s = sub.add_parser("matrix", parents=[common], help="run the evaluation matrix")
    s.add_argument("--check", action="store_true", help="exit 1 if an ordering check fails")
    s.add_argument("--n-seeds", type=int, help="override matrix.n_seeds")
    s.add_argument("--jobs", type=int, help="worker processes (default from config)")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    args.seed = getattr(args, "seed", 0)
    args.config = getattr(args, "config", None)
    args.out_dir = getattr(args, "out_dir", "out")
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        Path(args.out_dir).mkdir(parents=True, exist_ok=True)
        outputs = COMMANDS[args.command](args, cfg)
        _manifest(args, cfg, outputs)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (LogFormatError, ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 1 if getattr(args, "check_failed", False) else 0


if __name__ == "__main__":
    sys.exit(main())
