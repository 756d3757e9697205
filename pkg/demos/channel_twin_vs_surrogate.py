"""
Two-ray channel: twin versus real-world surrogate
=================================================

The twin predicts received power with a two-ray (direct plus ground
reflection) model and mild log-normal shadowing. The real-world surrogate
adds a steeper distance dependence and correlated deep fades. Here we fly
one survey lane over a ground transmitter and compare the two.
"""

import numpy as np

from afar_twin.channel import ChannelParams, FadeModel, friis_gain_db, two_ray_gain_db_array
from afar_twin.geo import EnuPosition, GeoPosition, LocalFrame
from afar_twin.harness.config import Config

frame = LocalFrame(GeoPosition(35.7275, -78.696, 0.0))
cfg = Config()
dt, rw = cfg.dt, cfg.rw_channel
print("twin fading:", dt.fade.variant, " surrogate fading:", rw.fade.variant)

# %%
# Far from the transmitter the ground reflection cancels the direct ray and
# the two-ray gain falls at 40 dB per decade instead of Friis' 20.
iso = ChannelParams(reflection_coeff=-1 + 0j).with_(
    tx_pattern=ChannelParams().tx_pattern.isotropic(), rx_pattern=ChannelParams().rx_pattern.isotropic())
d = np.array([1e3, 1e4])
tx = np.array([0.0, 0.0, 1.5])
rx = np.column_stack([d, np.zeros(2), np.full(2, 2.0)])
g = two_ray_gain_db_array(tx, rx, iso)
print("two-ray slope  %.2f dB/decade" % (g[1] - g[0]))
print("Friis slope    %.2f dB/decade" % (friis_gain_db(1e4, iso.carrier_hz) - friis_gain_db(1e3, iso.carrier_hz)))

# %%
# One lane at 30 m altitude, 2 m sample spacing.
from afar_twin.channel import sample_path_rssi_dbm

path = np.column_stack([np.arange(-150, 150, 2.0), np.full(150, 20.0), np.full(150, 30.0)])
ugv = np.array([-55.0, 60.0, 1.5])
rng = np.random.default_rng(0)
twin = sample_path_rssi_dbm(ugv, path, dt, rng)
real = sample_path_rssi_dbm(ugv, path, rw, rng)
for k in range(0, 150, 15):
    print(f"east {path[k, 0]:7.1f} m   twin {twin[k]:7.1f} dBm   surrogate {real[k]:7.1f} dBm")

# %%
# The surrogate is weaker on average and far more spread out.
print("mean offset  %.1f dB" % np.mean(real - twin))
print("spread       twin %.1f dB, surrogate %.1f dB" % (np.std(twin - np.mean(twin)), np.std(real - twin)))
