"""Point-mass UAV kinematics along waypoint polylines.

Position is a pure function of elapsed mission time, so stepping is exact
under any partition of the time axis (two 1 s steps equal one 2 s step).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .geo import EnuPosition, GeoPosition, LocalFrame, Rect, to_enu, to_geo

_T_EPS = 1e-9


@dataclass(frozen=True)
class Waypoint:
    pos: GeoPosition
    speed_mps: float = 5.0

    def __post_init__(self):
        if not 0 < self.speed_mps <= 30:
            raise ValueError(f"speed must be in (0, 30] m/s, got {self.speed_mps}")


@dataclass(frozen=True)
class VehicleState:
    t_s: float
    pos: EnuPosition
    segment_index: int
    done: bool = False


@dataclass
class Trajectory:
    waypoints: list
    frame: LocalFrame
    loop: bool = False
    _xyz: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if len(self.waypoints) < 2:
            raise ValueError("trajectory needs at least 2 waypoints")
        xyz = np.array([to_enu(self.frame, w.pos).as_array() for w in self.waypoints])
        speeds = [w.speed_mps for w in self.waypoints]
        if self.loop and np.any(xyz[-1] != xyz[0]):
            xyz = np.vstack([xyz, xyz[:1]])
            speeds = speeds + speeds[:1]
        seg = np.diff(xyz, axis=0)
        lengths = np.sqrt(np.sum(seg ** 2, axis=1))
        if np.any(lengths == 0):
            raise ValueError("consecutive waypoints must be distinct")
        self._xyz = xyz
        self._len = lengths
        # a segment is flown at the speed commanded at its start waypoint
        self._speed = np.asarray(speeds[:-1], dtype=float)
        dur = lengths / self._speed
        self._t = np.concatenate([[0.0], np.cumsum(dur)])
        self._s = np.concatenate([[0.0], np.cumsum(lengths)])

    @property
    def enu(self) -> np.ndarray:
        return self._xyz

    @property
    def length_m(self) -> float:
        return float(self._s[-1])

    @property
    def duration_s(self) -> float:
        return float(self._t[-1])

    def _locate(self, t: np.ndarray):
        """Segment index and in-segment time for (already wrapped) times."""
        i = np.clip(np.searchsorted(self._t, t, side="right") - 1, 0, len(self._len) - 1)
        return i, t - self._t[i]

    def _wrap(self, t):
        t = np.asarray(t, dtype=float)
        if self.loop:
            return np.mod(t, self.duration_s)
        return np.minimum(t, self.duration_s)

    def position_at(self, t) -> np.ndarray:
        """ENU position(s) at mission time(s) `t`; shape (..., 3)."""
        tw = self._wrap(t)
        i, dt = self._locate(tw)
        frac = np.clip(dt * self._speed[i] / self._len[i], 0.0, 1.0)
        a, b = self._xyz[i], self._xyz[i + 1]
        return a + frac[..., None] * (b - a)

    def arc_length_at(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        laps = np.floor(t / self.duration_s) if self.loop else 0.0
        tw = self._wrap(t)
        i, dt = self._locate(tw)
        return laps * self.length_m + self._s[i] + np.minimum(dt * self._speed[i], self._len[i])


def initial_state(traj: Trajectory) -> VehicleState:
    return VehicleState(0.0, EnuPosition.from_array(traj.enu[0]), 0, False)


def state_at(traj: Trajectory, t_s: float) -> VehicleState:
    p = traj.position_at(t_s)
    seg, _ = traj._locate(traj._wrap(t_s))
    done = (not traj.loop) and t_s >= traj.duration_s - _T_EPS
    return VehicleState(t_s, EnuPosition.from_array(p), int(seg), bool(done))


def step(state: VehicleState, traj: Trajectory, dt_s: float) -> VehicleState:
    if dt_s <= 0:
        raise ValueError("dt must be > 0")
    return state_at(traj, state.t_s + dt_s)


def sample_times(traj: Trajectory, rate_hz: float) -> np.ndarray:
    if rate_hz <= 0:
        raise ValueError("rate must be > 0")
    n = int(math.floor(traj.duration_s * rate_hz + 1e-9)) + 1
    return np.arange(n) / rate_hz


def sample_positions(traj: Trajectory, rate_hz: float) -> list:
    """[(t_s, EnuPosition)] at uniform 1/rate spacing over one pass of the path."""
    t = sample_times(traj, rate_hz)
    xyz = traj.position_at(t)
    return [(float(ti), EnuPosition.from_array(p)) for ti, p in zip(t, xyz)]


def sample_positions_array(traj: Trajectory, rate_hz: float) -> tuple[np.ndarray, np.ndarray]:
    t = sample_times(traj, rate_hz)
    return t, traj.position_at(t)


def plan_lawnmower(area: Rect, altitude_m: float, lane_spacing_m: float, speed_mps: float,
                   frame: LocalFrame) -> Trajectory:
    """Boustrophedon sweep of `area`, lanes parallel to its longer side."""
    if lane_spacing_m <= 0 or altitude_m <= 0:
        raise ValueError("lane spacing and altitude must be > 0")
    along_east = area.width >= area.height
    if along_east:
        lo, hi, a0, a1 = area.north_min, area.north_max, area.east_min, area.east_max
    else:
        lo, hi, a0, a1 = area.east_min, area.east_max, area.north_min, area.north_max
    extent = hi - lo
    if lane_spacing_m > extent:
        lanes = np.array([0.5 * (lo + hi)])
    else:
        lanes = np.linspace(lo, hi, math.ceil(extent / lane_spacing_m - 1e-9) + 1)

    pts = []
    for k, c in enumerate(lanes):
        ends = (a0, a1) if k % 2 == 0 else (a1, a0)
        for a in ends:
            pts.append((a, c) if along_east else (c, a))
    wps = [Waypoint(to_geo(frame, EnuPosition(e, n, altitude_m)), speed_mps) for e, n in pts]
    return Trajectory(wps, frame)


def load_waypoints(path, frame: LocalFrame | None = None, loop: bool = False) -> Trajectory:
    """Read `lat lon alt speed` rows; `#` starts a comment.

    Without a `frame`, the first waypoint projected to the ground is the origin.
    """
    wps = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 4:
            raise ValueError(f"{path}:{lineno}: expected 'lat lon alt speed', got {line!r}")
        try:
            lat, lon, alt, speed = map(float, parts)
            wps.append(Waypoint(GeoPosition(lat, lon, alt), speed))
        except ValueError as exc:
            raise ValueError(f"{path}:{lineno}: {exc}") from None
    if not wps:
        raise ValueError(f"{path}: no waypoints")
    if frame is None:
        p0 = wps[0].pos
        frame = LocalFrame(GeoPosition(p0.lat_deg, p0.lon_deg, 0.0))
    return Trajectory(wps, frame, loop)


def write_waypoints(traj: Trajectory, path) -> None:
    lines = ["# lat lon alt speed"]
    for w in traj.waypoints:
        lines.append(f"{w.pos.lat_deg!r} {w.pos.lon_deg!r} {w.pos.alt_m!r} {w.speed_mps!r}")
    Path(path).write_text("\n".join(lines) + "\n")
