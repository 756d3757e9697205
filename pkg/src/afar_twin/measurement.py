"""Flight logs: (time, UAV position, RSSI) rows and their CSV format.

CSV layout::

    #frame_origin_lat=35.7275
    #frame_origin_lon=-78.696
    #env_tag=DT
    #seed=7
    #channel_id=3f2a...
    t_s,lat_deg,lon_deg,alt_m,rssi_dbm
    0.0,35.72615,-78.69765,30.0,-71.25
    ...

Floats are written with ``repr`` so a write/read cycle is lossless.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .channel import NOISE_FLOOR_DBM, RSSI_CEILING_DBM, ChannelParams, sample_path_rssi_dbm
from .geo import GeoPosition, LocalFrame, geo_arrays, enu_arrays, to_enu
from .vehicle import Trajectory, sample_positions_array

HEADER = "t_s,lat_deg,lon_deg,alt_m,rssi_dbm"
ENV_TAGS = ("DT", "RW-surrogate", "external")


class LogFormatError(ValueError):
    pass


@dataclass(frozen=True)
class RssiSample:
    t_s: float
    pos: GeoPosition
    rssi_dbm: float


@dataclass
class LogMeta:
    frame_origin_lat: float
    frame_origin_lon: float
    env_tag: str = "DT"
    seed: int | None = None
    channel_id: str = ""
    extra: dict = field(default_factory=dict)

    @property
    def frame(self) -> LocalFrame:
        alt = float(self.extra.get("frame_origin_alt", 0.0))
        return LocalFrame(GeoPosition(self.frame_origin_lat, self.frame_origin_lon, alt))


@dataclass
class MeasurementLog:
    """Column-stored log; `samples` gives the row view."""
    meta: LogMeta
    t_s: np.ndarray
    lat_deg: np.ndarray
    lon_deg: np.ndarray
    alt_m: np.ndarray
    rssi_dbm: np.ndarray

    def __post_init__(self):
        cols = [np.asarray(c, dtype=float) for c in
                (self.t_s, self.lat_deg, self.lon_deg, self.alt_m, self.rssi_dbm)]
        self.t_s, self.lat_deg, self.lon_deg, self.alt_m, self.rssi_dbm = cols
        if len({len(c) for c in cols}) != 1:
            raise ValueError("log columns differ in length")
        if len(self.t_s) == 0:
            raise ValueError("empty log")
        if np.any(np.diff(self.t_s) < 0):
            raise ValueError("log times must be non-decreasing")
        if self.meta.env_tag not in ENV_TAGS:
            raise ValueError(f"env_tag must be one of {ENV_TAGS}")

    def __len__(self):
        return len(self.t_s)

    @property
    def samples(self) -> list:
        return [RssiSample(float(t), GeoPosition(float(a), float(o), float(h)), float(r))
                for t, a, o, h, r in zip(self.t_s, self.lat_deg, self.lon_deg, self.alt_m,
                                         self.rssi_dbm)]

    @classmethod
    def from_samples(cls, meta: LogMeta, samples) -> "MeasurementLog":
        rows = [(s.t_s, s.pos.lat_deg, s.pos.lon_deg, s.pos.alt_m, s.rssi_dbm) for s in samples]
        cols = np.array(rows, dtype=float).reshape(-1, 5).T
        return cls(meta, *cols)

    def enu(self, frame: LocalFrame | None = None) -> np.ndarray:
        """UAV positions as an (n, 3) ENU array."""
        return enu_arrays(frame or self.meta.frame, self.lat_deg, self.lon_deg, self.alt_m)

    def equals(self, other: "MeasurementLog") -> bool:
        return (self.meta == other.meta and all(
            np.array_equal(getattr(self, c), getattr(other, c))
            for c in ("t_s", "lat_deg", "lon_deg", "alt_m", "rssi_dbm")))


def generate_log(traj: Trajectory, ugv: GeoPosition, params: ChannelParams,
                 rate_hz: float = 2.0, seed: int = 0, env_tag: str = "DT") -> MeasurementLog:
    rng = np.random.default_rng(seed)
    frame = traj.frame
    t, xyz = sample_positions_array(traj, rate_hz)
    tx = to_enu(frame, ugv).as_array()
    rssi = sample_path_rssi_dbm(tx, xyz, params, rng)
    lat, lon, alt = geo_arrays(frame, xyz)
    o = frame.origin
    meta = LogMeta(o.lat_deg, o.lon_deg, env_tag, seed, params.channel_id)
    if o.alt_m:
        meta.extra["frame_origin_alt"] = o.alt_m
    return MeasurementLog(meta, t, lat, lon, alt, rssi)


def write_csv(log: MeasurementLog, path) -> None:
    m = log.meta
    lines = [f"#frame_origin_lat={m.frame_origin_lat!r}",
             f"#frame_origin_lon={m.frame_origin_lon!r}",
             f"#env_tag={m.env_tag}",
             f"#seed={'' if m.seed is None else m.seed}",
             f"#channel_id={m.channel_id}"]
    lines += [f"#{k}={v!r}" if isinstance(v, float) else f"#{k}={v}"
              for k, v in sorted(m.extra.items())]
    lines.append(HEADER)
    for row in zip(log.t_s, log.lat_deg, log.lon_deg, log.alt_m, log.rssi_dbm):
        lines.append(",".join(repr(float(v)) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def read_csv(path) -> MeasurementLog:
    meta: dict = {}
    rows = []
    header_seen = False
    last_t = -np.inf
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            if header_seen:
                continue
            key, sep, value = line[1:].partition("=")
            if not sep:
                continue
            meta[key.strip()] = value.strip()
            continue
        if not header_seen:
            if line.replace(" ", "") != HEADER:
                raise LogFormatError(f"{path}:{lineno}: expected header {HEADER!r}")
            header_seen = True
            continue
        parts = line.split(",")
        if len(parts) != 5:
            raise LogFormatError(f"{path}:{lineno}: expected 5 fields, got {len(parts)}")
        try:
            vals = [float(p) for p in parts]
        except ValueError:
            raise LogFormatError(f"{path}:{lineno}: malformed number in {line!r}") from None
        if not np.all(np.isfinite(vals)):
            raise LogFormatError(f"{path}:{lineno}: non-finite value")
        if vals[0] < last_t:
            raise LogFormatError(f"{path}:{lineno}: time goes backwards ({vals[0]} < {last_t})")
        if not NOISE_FLOOR_DBM <= vals[4] <= RSSI_CEILING_DBM:
            raise LogFormatError(f"{path}:{lineno}: rssi {vals[4]} outside "
                                 f"[{NOISE_FLOOR_DBM}, {RSSI_CEILING_DBM}] dBm")
        try:
            GeoPosition(vals[1], vals[2], vals[3])
        except ValueError as exc:
            raise LogFormatError(f"{path}:{lineno}: {exc}") from None
        last_t = vals[0]
        rows.append(vals)
    if not header_seen:
        raise LogFormatError(f"{path}: missing header")
    if not rows:
        raise LogFormatError(f"{path}: empty log")
    try:
        lat0 = float(meta.pop("frame_origin_lat"))
        lon0 = float(meta.pop("frame_origin_lon"))
    except KeyError as exc:
        raise LogFormatError(f"{path}: missing metadata {exc}") from None
    seed = meta.pop("seed", "")
    extra = {}
    for k, v in meta.items():
        if k in ("env_tag", "channel_id"):
            continue
        try:
            extra[k] = float(v)
        except ValueError:
            extra[k] = v
    lm = LogMeta(lat0, lon0, meta.get("env_tag", "external"),
                 int(seed) if seed != "" else None, meta.get("channel_id", ""), extra)
    cols = np.array(rows).T
    return MeasurementLog(lm, *cols)
