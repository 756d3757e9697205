import numpy as np
import pytest

from afar_twin.channel import ChannelParams, FadeModel, mean_rssi_dbm_array
from afar_twin.geo import EnuPosition, GeoPosition, LocalFrame, to_enu, to_geo
from afar_twin.measurement import (LogFormatError, LogMeta, MeasurementLog, generate_log,
                                   read_csv, write_csv)
from afar_twin.vehicle import Trajectory, Waypoint

FRAME = LocalFrame(GeoPosition(35.7275, -78.696, 0.0))


def straight(length=600.0, speed=5.0, alt=30.0):
    wps = [Waypoint(to_geo(FRAME, EnuPosition(0, 0, alt)), speed),
           Waypoint(to_geo(FRAME, EnuPosition(length, 0, alt)), speed)]
    return Trajectory(wps, FRAME)


UGV = to_geo(FRAME, EnuPosition(120.0, 80.0, 1.5))


def test_sample_count_for_600m_at_5mps_1hz():
    lg = generate_log(straight(), UGV, ChannelParams(), rate_hz=1.0, seed=1)
    assert len(lg) == 121
    assert lg.t_s[0] == 0.0 and lg.t_s[-1] == pytest.approx(120.0)


def test_no_fading_rows_equal_mean_rssi():
    params = ChannelParams()
    lg = generate_log(straight(), UGV, params, rate_hz=2.0, seed=3)
    mean = mean_rssi_dbm_array(to_enu(FRAME, UGV).as_array(), lg.enu(FRAME), params)
    np.testing.assert_allclose(lg.rssi_dbm, np.clip(mean, -120, 30), atol=1e-9)


def test_same_seed_gives_byte_identical_csv(tmp_path):
    params = ChannelParams(fade=FadeModel(4.0, 60.0))
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    write_csv(generate_log(straight(), UGV, params, seed=11), a)
    write_csv(generate_log(straight(), UGV, params, seed=11), b)
    assert a.read_bytes() == b.read_bytes()
    c = tmp_path / "c.csv"
    write_csv(generate_log(straight(), UGV, params, seed=12), c)
    assert a.read_bytes() != c.read_bytes()


def test_rssi_never_below_floor():
    params = ChannelParams(fade=FadeModel(10.0, 80.0))
    lg = generate_log(straight(2000.0), UGV, params, seed=5)
    assert lg.rssi_dbm.min() >= -120.0
    assert lg.rssi_dbm.max() <= 30.0


def test_csv_round_trip_is_exact(tmp_path):
    lg = generate_log(straight(), UGV, ChannelParams(fade=FadeModel(6.0)), seed=2, env_tag="DT")
    lg.meta.extra["ugv_lat"] = UGV.lat_deg
    p = tmp_path / "log.csv"
    write_csv(lg, p)
    back = read_csv(p)
    assert back.equals(lg)
    assert back.meta.seed == 2 and back.meta.env_tag == "DT"
    assert back.meta.extra["ugv_lat"] == UGV.lat_deg


def test_csv_layout(tmp_path):
    lg = generate_log(straight(), UGV, ChannelParams(), seed=7)
    p = tmp_path / "log.csv"
    write_csv(lg, p)
    lines = p.read_text().splitlines()
    meta = [ln for ln in lines if ln.startswith("#")]
    assert [m.split("=")[0] for m in meta] == ["#frame_origin_lat", "#frame_origin_lon",
                                               "#env_tag", "#seed", "#channel_id"]
    assert lines[len(meta)] == "t_s,lat_deg,lon_deg,alt_m,rssi_dbm"
    assert len(lines) == len(meta) + 1 + len(lg)


def test_header_only_is_empty_log(tmp_path):
    p = tmp_path / "e.csv"
    p.write_text("#frame_origin_lat=35.0\n#frame_origin_lon=-78.0\nt_s,lat_deg,lon_deg,alt_m,rssi_dbm\n")
    with pytest.raises(LogFormatError, match="empty log"):
        read_csv(p)


def test_backwards_time_names_line(tmp_path):
    p = tmp_path / "s.csv"
    p.write_text("#frame_origin_lat=35.0\n#frame_origin_lon=-78.0\n"
                 "t_s,lat_deg,lon_deg,alt_m,rssi_dbm\n"
                 "0.0,35.0,-78.0,30.0,-70.0\n"
                 "1.0,35.0,-78.0,30.0,-71.0\n"
                 "0.5,35.0,-78.0,30.0,-72.0\n"
                 "0.2,35.0,-78.0,30.0,-72.0\n")
    with pytest.raises(LogFormatError, match=r"s\.csv:6: time goes backwards"):
        read_csv(p)


@pytest.mark.parametrize("row, msg", [
    ("0.0,35.0,-78.0,30.0", "expected 5 fields"),
    ("0.0,35.0,abc,30.0,-70", "malformed number"),
    ("0.0,35.0,-78.0,30.0,-150", "outside"),
    ("0.0,95.0,-78.0,30.0,-70", "lat"),
])
def test_malformed_rows_report_line(tmp_path, row, msg):
    p = tmp_path / "bad.csv"
    p.write_text("#frame_origin_lat=35.0\n#frame_origin_lon=-78.0\n"
                 "t_s,lat_deg,lon_deg,alt_m,rssi_dbm\n" + row + "\n")
    with pytest.raises(LogFormatError, match=msg) as exc:
        read_csv(p)
    assert "bad.csv:4" in str(exc.value)


def test_log_invariants():
    meta = LogMeta(35.0, -78.0)
    with pytest.raises(ValueError):
        MeasurementLog(meta, [], [], [], [], [])
    with pytest.raises(ValueError):
        MeasurementLog(meta, [1.0, 0.0], [35, 35], [-78, -78], [30, 30], [-70, -70])
    with pytest.raises(ValueError):
        MeasurementLog(LogMeta(35.0, -78.0, "lab"), [0.0], [35], [-78], [30], [-70])


def test_samples_view_matches_columns():
    lg = generate_log(straight(100.0), UGV, ChannelParams(), seed=0)
    s = lg.samples
    assert len(s) == len(lg)
    assert s[3].rssi_dbm == lg.rssi_dbm[3] and s[3].pos.lat_deg == lg.lat_deg[3]
    assert MeasurementLog.from_samples(lg.meta, s).equals(lg)
