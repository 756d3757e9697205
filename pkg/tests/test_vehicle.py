import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from afar_twin.geo import EnuPosition, GeoPosition, LocalFrame, Rect, to_geo
from afar_twin.vehicle import (Trajectory, Waypoint, initial_state, load_waypoints,
                               plan_lawnmower, sample_positions, sample_times, step,
                               write_waypoints)

FRAME = LocalFrame(GeoPosition(35.7275, -78.696, 0.0))


def straight(length=100.0, speed=5.0, bend=None):
    pts = [(0, 0), (length, 0)] + ([bend] if bend else [])
    return Trajectory([Waypoint(to_geo(FRAME, EnuPosition(e, n, 30.0)), speed) for e, n in pts],
                      FRAME)


def polyline_length(xyz):
    return float(np.sum(np.linalg.norm(np.diff(xyz, axis=0), axis=1)))


def test_lawnmower_lane_count():
    traj = plan_lawnmower(Rect(0, 0, 100, 100), 30, 50, 5, FRAME)
    assert len(traj.waypoints) == 6


def test_lawnmower_constant_altitude():
    traj = plan_lawnmower(Rect(-150, -150, 150, 150), 30, 40, 5, FRAME)
    assert all(w.pos.alt_m == pytest.approx(30.0) for w in traj.waypoints)
    assert np.allclose(traj.enu[:, 2], 30.0)


def test_lawnmower_path_length():
    traj = plan_lawnmower(Rect(0, 0, 100, 100), 30, 25, 5, FRAME)
    assert polyline_length(traj.enu) == pytest.approx(600.0, abs=1e-6)
    assert traj.length_m == pytest.approx(600.0, abs=1e-6)


def test_lawnmower_lanes_follow_longer_side():
    traj = plan_lawnmower(Rect(0, 0, 50, 200), 30, 20, 5, FRAME)
    xyz = traj.enu
    # first leg runs north-south along the 200 m side
    assert abs(xyz[1, 1] - xyz[0, 1]) == pytest.approx(200.0, abs=1e-6)
    assert abs(xyz[1, 0] - xyz[0, 0]) < 1e-6


def test_lawnmower_wide_spacing_gives_center_lane():
    traj = plan_lawnmower(Rect(0, 0, 100, 40), 30, 60, 5, FRAME)
    assert len(traj.waypoints) == 2
    assert np.allclose(traj.enu[:, 1], 20.0)


def test_step_on_straight_segment():
    traj = straight()
    s = step(initial_state(traj), traj, 2.0)
    assert s.pos.east_m == pytest.approx(10.0, abs=1e-9)
    assert not s.done


def test_step_across_corner():
    traj = straight(100.0, 5.0, bend=(100, 50))
    s = step(initial_state(traj), traj, 24.0)     # 120 m of arc: 100 east, then 20 north
    assert s.segment_index == 1
    assert s.pos.east_m == pytest.approx(100.0, abs=1e-6)
    assert s.pos.north_m == pytest.approx(20.0, abs=1e-6)
    assert traj.arc_length_at(24.0) == pytest.approx(5.0 * 24.0, abs=1e-6)


def test_done_after_full_duration():
    traj = straight(100.0, 5.0, bend=(100, 50))
    s = step(initial_state(traj), traj, traj.length_m / 5.0)
    assert s.done
    assert s.pos.north_m == pytest.approx(50.0, abs=1e-6)
    s = step(s, traj, 10.0)
    assert s.done and s.pos.north_m == pytest.approx(50.0, abs=1e-6)


def test_step_rejects_nonpositive_dt():
    traj = straight()
    with pytest.raises(ValueError):
        step(initial_state(traj), traj, 0.0)


def test_partition_independence_is_exact():
    traj = plan_lawnmower(Rect(0, 0, 100, 100), 30, 25, 5, FRAME)
    one = step(initial_state(traj), traj, 2.0)
    two = step(step(initial_state(traj), traj, 1.0), traj, 1.0)
    assert one == two


def test_sample_positions_count_and_spacing():
    traj = plan_lawnmower(Rect(0, 0, 100, 100), 30, 25, 5, FRAME)
    samples = sample_positions(traj, 1.0)
    assert len(samples) == math.floor(traj.duration_s * 1.0) + 1 == 121
    t0, p0 = samples[0]
    assert t0 == 0.0
    assert p0.as_array() == pytest.approx(traj.enu[0])
    d = np.linalg.norm(samples[2][1].as_array() - samples[1][1].as_array())
    assert d == pytest.approx(5.0, abs=1e-9)


def test_sample_rate_validated():
    with pytest.raises(ValueError):
        sample_times(straight(), 0.0)


def test_trajectory_validation():
    p = to_geo(FRAME, EnuPosition(0, 0, 30))
    with pytest.raises(ValueError):
        Trajectory([Waypoint(p)], FRAME)
    with pytest.raises(ValueError):
        Trajectory([Waypoint(p), Waypoint(p)], FRAME)
    with pytest.raises(ValueError):
        Waypoint(p, 31.0)


def test_loop_wraps_around():
    traj = Trajectory(straight(100.0, 5.0, bend=(100, 50)).waypoints, FRAME, loop=True)
    period = traj.duration_s
    s = step(initial_state(traj), traj, period + 2.0)
    assert not s.done
    assert s.pos.east_m == pytest.approx(10.0, abs=1e-6)


def test_waypoint_file_round_trip(tmp_path):
    traj = plan_lawnmower(Rect(0, 0, 100, 60), 25, 30, 4, FRAME)
    f = tmp_path / "wp.txt"
    write_waypoints(traj, f)
    back = load_waypoints(f, FRAME)
    assert [w.pos for w in back.waypoints] == [w.pos for w in traj.waypoints]
    assert back.length_m == pytest.approx(traj.length_m)


def test_waypoint_file_errors(tmp_path):
    f = tmp_path / "bad.txt"
    f.write_text("# header\n35.0 -78.0 30 5\n35.001 -78.0 30\n")
    with pytest.raises(ValueError, match=":3:"):
        load_waypoints(f)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.01, 400.0))
def test_arc_length_matches_speed_times_time(t):
    traj = plan_lawnmower(Rect(0, 0, 120, 80), 30, 20, 4.0, FRAME)
    t = min(t, traj.duration_s)
    assert traj.arc_length_at(t) == pytest.approx(4.0 * t, abs=1e-6)
    pts = np.vstack([traj.enu[:1], traj.position_at(np.linspace(0, t, 2000))])
    # sampled polyline can only cut corners, never exceed the arc length
    assert polyline_length(pts) <= 4.0 * t + 1e-6
