"""Experiment configuration: TOML file -> typed, validated dataclasses.

Every key is optional; the dataclasses below hold the defaults.
Unknown sections or keys and wrong types are reported with their dotted
field name; TOML syntax errors carry the parser's line and column.
"""
from __future__ import annotations

import hashlib
import dataclasses
from dataclasses import dataclass, fields, replace
from pathlib import Path

try:
    import tomllib as tomli
except ModuleNotFoundError:  # Python 3.10
    import tomli

from ..channel import ChannelParams, FadeModel
from ..geo import GeoPosition, LocalFrame, Rect
from ..pf import PfConfig
from ..fingerprint.train import TrainConfig


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class FieldConfig:
    origin_lat: float = 35.7275
    origin_lon: float = -78.6960
    aoi: tuple = (-200.0, -200.0, 200.0, 200.0)
    flight_area: tuple = (-150.0, -150.0, 150.0, 150.0)
    ugv_height_m: float = 1.5


@dataclass(frozen=True)
class MissionConfig:
    altitude_m: float = 30.0
    lane_spacing_m: float = 40.0
    speed_mps: float = 5.0
    rate_hz: float = 2.0
    waypoint_file: str = ""


@dataclass(frozen=True)
class TrialConfig:
    east_m: float
    north_m: float
    log_file: str = ""


@dataclass(frozen=True)
class RwConfig:
    """The real-world surrogate, as a perturbation of the twin channel."""
    excess_exponent_delta: float = 0.5
    sigma_delta_db: float = 4.0
    max_depth_db: float = 60.0
    spatial_rate_per_m: float = 0.1


@dataclass(frozen=True)
class PfSection:
    n_particles: int = 1000
    meas_sigma_db: float = 6.0
    roughening_sigma_m: float = 2.0
    ess_threshold: float = 0.5


@dataclass(frozen=True)
class CnnSection:
    rows: int = 4
    cols: int = 4
    image_size: int = 16
    n_logs: int = 400
    epochs: int = 200
    lr0: float = 1e-3
    decay_factor: float = 0.1
    weight_decay: float = 1e-3
    batch_size: int = 32
    optimizer: str = "adamw"
    channels: tuple = (8, 16, 32)
    kernel: int = 3
    dtype: str = "float32"


@dataclass(frozen=True)
class CalibrationSection:
    n_logs: int = 24


@dataclass(frozen=True)
class MatrixSection:
    estimators: tuple = ("PF", "FingerCNN")
    scenarios: tuple = (1, 2, 3)
    trials: tuple = (1, 2, 3)
    n_seeds: int = 20
    root_seed: int = 0
    jobs: int = 1


DEFAULT_TRIALS = {
    1: TrialConfig(-55.0, 60.0),
    2: TrialConfig(70.0, -45.0),
    3: TrialConfig(180.0, 35.0),
}


@dataclass(frozen=True)
class Config:
    field: FieldConfig = FieldConfig()
    mission: MissionConfig = MissionConfig()
    trials: dict = dataclasses.field(default_factory=lambda: dict(DEFAULT_TRIALS))
    dt: ChannelParams = ChannelParams(fade=FadeModel.lognormal(2.0))
    rw: RwConfig = RwConfig()
    pf: PfSection = PfSection()
    cnn: CnnSection = CnnSection()
    calibration: CalibrationSection = CalibrationSection()
    matrix: MatrixSection = MatrixSection()
    source_text: str = ""

    # derived geometry -------------------------------------------------
    @property
    def frame(self) -> LocalFrame:
        return LocalFrame(GeoPosition(self.field.origin_lat, self.field.origin_lon, 0.0))

    @property
    def aoi(self) -> Rect:
        return Rect(*self.field.aoi)

    @property
    def flight_area(self) -> Rect:
        return Rect(*self.field.flight_area)

    @property
    def rw_channel(self) -> ChannelParams:
        f = self.dt.fade
        fade = FadeModel(f.sigma_db + self.rw.sigma_delta_db, self.rw.max_depth_db,
                         self.rw.spatial_rate_per_m)
        return self.dt.with_(excess_exponent=self.dt.excess_exponent + self.rw.excess_exponent_delta,
                             fade=fade)

    def pf_config(self, meas_sigma_db: float | None = None) -> PfConfig:
        p = self.pf
        return PfConfig(self.aoi, p.n_particles,
                        p.meas_sigma_db if meas_sigma_db is None else meas_sigma_db,
                        p.roughening_sigma_m, p.ess_threshold, self.field.ugv_height_m)

    def train_config(self, seed: int) -> TrainConfig:
        c = self.cnn
        return TrainConfig(c.epochs, c.lr0, c.decay_factor, c.weight_decay, c.batch_size,
                           (0.70, 0.15, 0.15), seed, c.optimizer, tuple(c.channels), c.kernel,
                           c.dtype)

    @property
    def digest(self) -> str:
        return hashlib.sha256(self.source_text.encode()).hexdigest()


_SECTIONS = {"field": FieldConfig, "mission": MissionConfig, "rw": RwConfig, "pf": PfSection,
             "cnn": CnnSection, "calibration": CalibrationSection, "matrix": MatrixSection}


def _coerce(name: str, default, value):
    if isinstance(default, bool):
        ok = isinstance(value, bool)
    elif isinstance(default, int):
        ok = isinstance(value, int) and not isinstance(value, bool)
    elif isinstance(default, float):
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
        value = float(value) if ok else value
    elif isinstance(default, str):
        ok = isinstance(value, str)
    elif isinstance(default, tuple):
        ok = isinstance(value, list)
        if ok and default and all(isinstance(v, float) for v in default):
            ok = all(isinstance(v, (int, float)) for v in value)
            value = [float(v) for v in value] if ok else value
        value = tuple(value) if ok else value
    else:
        ok = True
    if not ok:
        raise ConfigError(f"{name}: expected {type(default).__name__}, got {value!r}")
    return value


def _section(cls, name: str, table: dict):
    if not isinstance(table, dict):
        raise ConfigError(f"{name}: expected a table")
    defaults = None if cls is TrialConfig else cls()
    names = {f.name for f in fields(cls)}
    kw = {}
    for key, value in table.items():
        if key not in names:
            raise ConfigError(f"{name}.{key}: unknown key")
        default = getattr(defaults, key) if defaults is not None else 0.0
        kw[key] = _coerce(f"{name}.{key}", default, value)
    try:
        return cls(**kw) if defaults is None else replace(defaults, **kw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name}: {exc}") from None


def _flatten(d: dict, prefix: str = "") -> dict:
    out = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flatten(v, key + "."))
        else:
            out[key] = v
    return out


def parse_config(text: str, origin: str = "<config>") -> Config:
    try:
        raw = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"{origin}: {exc}") from None
    kw = {"source_text": text}
    trials = dict(DEFAULT_TRIALS)
    for name, table in raw.items():
        if name in _SECTIONS:
            kw[name] = _section(_SECTIONS[name], name, table)
        elif name == "dt":
            try:
                base = ChannelParams(fade=FadeModel.lognormal(2.0)).to_dict()
                base.update(_flatten(table))
                kw["dt"] = ChannelParams.from_dict(base)
            except (KeyError, ValueError, TypeError) as exc:
                raise ConfigError(f"dt: {exc}") from None
        elif name.startswith("trial") and name[5:] in ("1", "2", "3"):
            tid = int(name[5:])
            merged = {"east_m": trials[tid].east_m, "north_m": trials[tid].north_m, **table}
            trials[tid] = _section(TrialConfig, name, merged)
        else:
            raise ConfigError(f"{origin}: unknown section [{name}]")
    kw["trials"] = trials
    cfg = Config(**kw)
    _validate(cfg)
    return cfg


def _validate(cfg: Config) -> None:
    try:
        aoi, flight = cfg.aoi, cfg.flight_area
    except ValueError as exc:
        raise ConfigError(f"field: {exc}") from None
    for tid, t in cfg.trials.items():
        if not aoi.contains(t.east_m, t.north_m):
            raise ConfigError(f"trial{tid}: position outside field.aoi")
    m = cfg.matrix
    if not set(m.estimators) <= {"PF", "FingerCNN"}:
        raise ConfigError(f"matrix.estimators: unknown estimator in {m.estimators}")
    if not set(m.scenarios) <= {1, 2, 3}:
        raise ConfigError("matrix.scenarios: must be drawn from 1, 2, 3")
    if not set(m.trials) <= set(cfg.trials):
        raise ConfigError("matrix.trials: must be drawn from 1, 2, 3")
    if m.n_seeds < 1:
        raise ConfigError("matrix.n_seeds: must be >= 1")
    c = cfg.cnn
    if c.image_size % 8 or c.image_size < 8:
        raise ConfigError("cnn.image_size: must be a multiple of 8")
    if c.n_logs < 10 * c.rows * c.cols:
        raise ConfigError("cnn.n_logs: need at least 10 logs per class")
    if c.optimizer not in ("sgd", "adamw"):
        raise ConfigError("cnn.optimizer: must be 'sgd' or 'adamw'")


def load_config(path=None) -> Config:
    if path is None:
        return parse_config("")
    p = Path(path)
    return parse_config(p.read_text(), str(p))
