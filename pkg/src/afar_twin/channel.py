"""Two-ray ground-reflection channel with antenna patterns and fading.

Gains are returned in dB. Array variants (``*_array``) broadcast over any
number of transmitter/receiver positions given as ``(..., 3)`` ENU arrays;
the scalar functions wrap them for single `EnuPosition` pairs.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .geo import EnuPosition

log = logging.getLogger(__name__)

SPEED_OF_LIGHT = 299_792_458.0
GAIN_FLOOR_DB = -400.0
NOISE_FLOOR_DBM = -120.0
RSSI_CEILING_DBM = 30.0
# z-score of the 0.1st percentile of a standard normal
Z_P999 = 3.090232306167813


@dataclass(frozen=True)
class AntennaPattern:
    """Elevation-only gain table, linearly interpolated."""
    angles_deg: tuple
    gains_dbi: tuple

    def __post_init__(self):
        a = np.asarray(self.angles_deg, dtype=float)
        g = np.asarray(self.gains_dbi, dtype=float)
        if a.shape != g.shape or a.ndim != 1 or len(a) < 2:
            raise ValueError("pattern needs matching 1-D angle and gain tables")
        if np.any(np.diff(a) <= 0):
            raise ValueError("pattern angles must be strictly increasing")
        if a[0] != -90.0 or a[-1] != 90.0:
            raise ValueError("pattern must cover [-90, 90] degrees")
        if not np.all(np.isfinite(g)):
            raise ValueError("pattern gains must be finite")
        object.__setattr__(self, "angles_deg", tuple(float(x) for x in a))
        object.__setattr__(self, "gains_dbi", tuple(float(x) for x in g))

    @classmethod
    def isotropic(cls) -> "AntennaPattern":
        return cls((-90.0, 90.0), (0.0, 0.0))

    @classmethod
    def dipole(cls, floor_dbi: float = -10.0, step_deg: float = 10.0) -> "AntennaPattern":
        """Half-wave vertical dipole, tabulated every `step_deg` and floored."""
        ang = np.arange(-90.0, 90.0 + step_deg / 2, step_deg)
        th = np.radians(ang)
        with np.errstate(divide="ignore", invalid="ignore"):
            amp = np.abs(np.cos(0.5 * np.pi * np.sin(th)) / np.cos(th))
            g = 2.15 + 20.0 * np.log10(amp)
        g = np.where(np.isfinite(g), g, floor_dbi)
        return cls(tuple(ang), tuple(np.maximum(g, floor_dbi)))

    def to_str(self) -> str:
        return ";".join(f"{a!r}:{g!r}" for a, g in zip(self.angles_deg, self.gains_dbi))

    @classmethod
    def from_str(cls, s: str) -> "AntennaPattern":
        s = s.strip()
        if s == "isotropic":
            return cls.isotropic()
        if s == "dipole":
            return cls.dipole()
        pairs = [p.split(":") for p in s.split(";") if p.strip()]
        return cls(tuple(float(a) for a, _ in pairs), tuple(float(g) for _, g in pairs))


@dataclass(frozen=True)
class FadeModel:
    """Additive dB fading.

    `sigma_db` is white log-normal shadowing. `max_depth_db` enables the
    deep-fade process: Gaussian with std ``max_depth_db / 3.09`` so its
    0.1st percentile sits at ``-max_depth_db``, smoothed along the flight path
    with correlation length ``1 / spatial_rate_per_m``. Both may be active.
    """
    sigma_db: float = 0.0
    max_depth_db: float = 0.0
    spatial_rate_per_m: float = 0.1

    def __post_init__(self):
        if self.sigma_db < 0:
            raise ValueError("sigma_db must be >= 0")
        if not 0 <= self.max_depth_db <= 80:
            raise ValueError("max_depth_db must be in [0, 80]")
        if self.spatial_rate_per_m <= 0:
            raise ValueError("spatial_rate_per_m must be > 0")

    @classmethod
    def none(cls) -> "FadeModel":
        return cls()

    @classmethod
    def lognormal(cls, sigma_db: float) -> "FadeModel":
        return cls(sigma_db=sigma_db)

    @classmethod
    def deep(cls, max_depth_db: float, spatial_rate_per_m: float = 0.1) -> "FadeModel":
        return cls(max_depth_db=max_depth_db, spatial_rate_per_m=spatial_rate_per_m)

    @property
    def variant(self) -> str:
        parts = []
        if self.sigma_db > 0:
            parts.append("lognormal")
        if self.max_depth_db > 0:
            parts.append("deepfade")
        return "+".join(parts) or "none"

    @property
    def deep_sigma_db(self) -> float:
        return self.max_depth_db / Z_P999

    @property
    def total_sigma_db(self) -> float:
        return math.hypot(self.sigma_db, self.deep_sigma_db)


@dataclass(frozen=True)
class LogDistanceModel:
    offset_db: float
    exponent_n: float

    def __post_init__(self):
        if not 1.5 <= self.exponent_n <= 6.0:
            raise ValueError(f"path-loss exponent out of [1.5, 6]: {self.exponent_n}")


@dataclass(frozen=True)
class ChannelParams:
    carrier_hz: float = 3.32e9
    tx_power_dbm: float = 30.0
    tx_pattern: AntennaPattern = field(default_factory=AntennaPattern.dipole)
    rx_pattern: AntennaPattern = field(default_factory=AntennaPattern.dipole)
    reflection_coeff: complex = -0.9 + 0j
    fade: FadeModel = field(default_factory=FadeModel)
    override: LogDistanceModel | None = None
    # extra loss of 10*excess_exponent dB per decade on top of the two-ray mean
    excess_exponent: float = 0.0

    def __post_init__(self):
        if not self.carrier_hz > 0:
            raise ValueError("carrier_hz must be > 0")
        if abs(self.reflection_coeff) > 1.0 + 1e-12:
            raise ValueError("|reflection_coeff| must be <= 1")

    @property
    def wavelength_m(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_hz

    def with_(self, **kw) -> "ChannelParams":
        return replace(self, **kw)

    def to_dict(self) -> dict:
        d = {
            "carrier_hz": self.carrier_hz,
            "tx_power_dbm": self.tx_power_dbm,
            "reflection_coeff_re": self.reflection_coeff.real,
            "reflection_coeff_im": self.reflection_coeff.imag,
            "excess_exponent": self.excess_exponent,
            "tx_pattern": self.tx_pattern.to_str(),
            "rx_pattern": self.rx_pattern.to_str(),
            "fade.variant": self.fade.variant,
            "fade.sigma_db": self.fade.sigma_db,
            "fade.max_depth_db": self.fade.max_depth_db,
            "fade.spatial_rate_per_m": self.fade.spatial_rate_per_m,
        }
        if self.override is not None:
            d["override.offset_db"] = self.override.offset_db
            d["override.exponent_n"] = self.override.exponent_n
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ChannelParams":
        known = {"carrier_hz", "tx_power_dbm", "reflection_coeff_re", "reflection_coeff_im",
                 "excess_exponent", "tx_pattern", "rx_pattern", "fade.variant", "fade.sigma_db",
                 "fade.max_depth_db", "fade.spatial_rate_per_m", "override.offset_db",
                 "override.exponent_n"}
        unknown = set(d) - known
        if unknown:
            raise KeyError(f"unknown channel keys: {sorted(unknown)}")
        base = cls()
        variant = d.get("fade.variant")
        sigma = float(d.get("fade.sigma_db", 0.0))
        depth = float(d.get("fade.max_depth_db", 0.0))
        if variant is not None:
            if variant not in ("none", "lognormal", "deepfade", "lognormal+deepfade"):
                raise ValueError(f"unknown fade.variant {variant!r}")
            if "lognormal" not in variant:
                sigma = 0.0
            if "deepfade" not in variant:
                depth = 0.0
        fade = FadeModel(sigma, depth, float(d.get("fade.spatial_rate_per_m",
                                                   base.fade.spatial_rate_per_m)))
        override = None
        if "override.offset_db" in d or "override.exponent_n" in d:
            override = LogDistanceModel(float(d["override.offset_db"]),
                                        float(d["override.exponent_n"]))
        kw = {}
        if "tx_pattern" in d:
            kw["tx_pattern"] = AntennaPattern.from_str(str(d["tx_pattern"]))
        if "rx_pattern" in d:
            kw["rx_pattern"] = AntennaPattern.from_str(str(d["rx_pattern"]))
        return cls(
            carrier_hz=float(d.get("carrier_hz", base.carrier_hz)),
            tx_power_dbm=float(d.get("tx_power_dbm", base.tx_power_dbm)),
            reflection_coeff=complex(float(d.get("reflection_coeff_re", base.reflection_coeff.real)),
                                     float(d.get("reflection_coeff_im", base.reflection_coeff.imag))),
            fade=fade, override=override,
            excess_exponent=float(d.get("excess_exponent", 0.0)), **kw)

    @property
    def channel_id(self) -> str:
        import hashlib
        text = ";".join(f"{k}={v!r}" for k, v in sorted(self.to_dict().items()))
        return hashlib.sha256(text.encode()).hexdigest()[:12]


def friis_gain_db(d, carrier_hz: float):
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0):
        raise ValueError("distance must be > 0")
    lam = SPEED_OF_LIGHT / carrier_hz
    out = -20.0 * np.log10(4.0 * np.pi * d / lam)
    return float(out) if out.ndim == 0 else out


def antenna_gain_db(pattern: AntennaPattern, elevation_deg):
    e = np.asarray(elevation_deg, dtype=float)
    if np.any((e < -90.0) | (e > 90.0)):
        log.warning("elevation outside [-90, 90] clamped")
        e = np.clip(e, -90.0, 90.0)
    out = np.interp(e, pattern.angles_deg, pattern.gains_dbi)
    return float(out) if out.ndim == 0 else out


def _as_xyz(p) -> np.ndarray:
    return p.as_array() if isinstance(p, EnuPosition) else np.asarray(p, dtype=float)


def two_ray_gain_db_array(tx, rx, params: ChannelParams) -> np.ndarray:
    tx = _as_xyz(tx)
    rx = _as_xyz(rx)
    ht, hr = tx[..., 2], rx[..., 2]
    if np.any(ht <= 0) or np.any(hr <= 0):
        raise ValueError("two-ray geometry needs antenna heights > 0")
    g = np.hypot(rx[..., 0] - tx[..., 0], rx[..., 1] - tx[..., 1])
    d_los = np.hypot(g, hr - ht)
    d_ref = np.hypot(g, hr + ht)
    lam = params.wavelength_m

    elev_los = np.degrees(np.arctan2(hr - ht, g))
    elev_ref = -np.degrees(np.arctan2(hr + ht, g))
    amp_los = 10.0 ** ((antenna_gain_db(params.tx_pattern, elev_los)
                        + antenna_gain_db(params.rx_pattern, -elev_los)) / 20.0)
    amp_ref = 10.0 ** ((antenna_gain_db(params.tx_pattern, elev_ref)
                        + antenna_gain_db(params.rx_pattern, elev_ref)) / 20.0)

    phase = 2.0 * np.pi * (d_ref - d_los) / lam
    field_ = amp_los / d_los + params.reflection_coeff * amp_ref * np.exp(-1j * phase) / d_ref
    mag = (lam / (4.0 * np.pi)) * np.abs(field_)
    with np.errstate(divide="ignore"):
        gain = 20.0 * np.log10(mag)
    return np.maximum(gain, GAIN_FLOOR_DB)


def two_ray_gain_db(tx: EnuPosition, rx: EnuPosition, params: ChannelParams) -> float:
    return float(two_ray_gain_db_array(tx, rx, params))


def mean_rssi_dbm_array(tx, rx, params: ChannelParams) -> np.ndarray:
    tx = _as_xyz(tx)
    rx = _as_xyz(rx)
    if params.override is not None:
        d = np.sqrt(np.sum((rx - tx) ** 2, axis=-1))
        if np.any(d <= 0):
            raise ValueError("distance must be > 0")
        ov = params.override
        return params.tx_power_dbm + ov.offset_db - 10.0 * ov.exponent_n * np.log10(d)
    out = params.tx_power_dbm + two_ray_gain_db_array(tx, rx, params)
    if params.excess_exponent:
        d = np.sqrt(np.sum((rx - tx) ** 2, axis=-1))
        out = out - 10.0 * params.excess_exponent * np.log10(d)
    return out


def mean_rssi_dbm(tx: EnuPosition, rx: EnuPosition, params: ChannelParams) -> float:
    return float(mean_rssi_dbm_array(tx, rx, params))


def _clamp(rssi):
    return np.clip(rssi, NOISE_FLOOR_DBM, RSSI_CEILING_DBM)


def sample_rssi_dbm(tx: EnuPosition, rx: EnuPosition, params: ChannelParams,
                    rng: np.random.Generator) -> float:
    """One independent draw; no spatial memory between calls."""
    mean = mean_rssi_dbm(tx, rx, params)
    f = params.fade
    if f.variant == "none":
        return float(_clamp(mean))
    x = mean
    if f.sigma_db > 0:
        x += f.sigma_db * rng.standard_normal()
    if f.max_depth_db > 0:
        x += f.deep_sigma_db * rng.standard_normal()
    return float(_clamp(x))


def correlated_fade_db(path_xyz, fade: FadeModel, rng: np.random.Generator) -> np.ndarray:
    """Deep-fade draws along a path: stationary first-order recursive smoothing.

    ``x[k] = rho_k x[k-1] + sqrt(1 - rho_k^2) sigma e[k]``, with
    ``rho_k = exp(-rate * step_k)`` for the distance moved between samples, so
    every sample keeps marginal std ``sigma``.
    """
    path = np.asarray(path_xyz, dtype=float)
    n = len(path)
    sigma = fade.deep_sigma_db
    e = rng.standard_normal(n)
    if n == 0 or sigma == 0:
        return np.zeros(n)
    step = np.zeros(n)
    step[1:] = np.sqrt(np.sum(np.diff(path, axis=0) ** 2, axis=1))
    rho = np.exp(-fade.spatial_rate_per_m * step)
    innov = np.sqrt(1.0 - rho ** 2)
    x = np.empty(n)
    x[0] = e[0]
    prev = e[0]
    for k in range(1, n):
        prev = rho[k] * prev + innov[k] * e[k]
        x[k] = prev
    return sigma * x


def sample_path_rssi_dbm(tx, rx_path, params: ChannelParams,
                         rng: np.random.Generator) -> np.ndarray:
    """RSSI along a receiver path with spatially correlated deep fades."""
    rx_path = np.asarray(rx_path, dtype=float)
    mean = mean_rssi_dbm_array(tx, rx_path, params)
    f = params.fade
    if f.variant == "none":
        return _clamp(mean)
    x = mean.copy()
    # fixed draw order: white shadowing first, then the deep-fade innovations
    if f.sigma_db > 0:
        x += f.sigma_db * rng.standard_normal(len(rx_path))
    if f.max_depth_db > 0:
        x += correlated_fade_db(rx_path, f, rng)
    return _clamp(x)
