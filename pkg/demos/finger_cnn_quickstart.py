"""
Finger-CNN in a few minutes
===========================

Each flight log becomes a two-channel image over the flight area: mean RSSI
per pixel and a visit mask. A small CNN classifies the image into one of
the 4 x 4 area-of-interest cells; the cell centre is the position estimate.

This demo trains briefly on a small simulated set so it runs quickly; the
evaluation harness uses 400 logs and 200 epochs.
"""

import numpy as np

from afar_twin.fingerprint import (centroid_enu, predict_class, rasterize, simulate_dataset,
                                   train)
from afar_twin.geo import EnuPosition, ground_distance, to_geo
from afar_twin.harness.config import Config
from afar_twin.harness.experiment import grid_of, mission
from afar_twin.measurement import generate_log

cfg = Config()
traj, grid = mission(cfg), grid_of(cfg)
size = cfg.cnn.image_size

data, tx = simulate_dataset(traj, grid, cfg.dt, 240, seed=0, flight_area=cfg.flight_area,
                            height=size, width=size)
print("dataset", data.images.shape, "labels per class", np.bincount(data.labels, minlength=16))

# %%
model, metrics = train(data, grid, cfg.train_config(seed=1).__class__(epochs=40, seed=1))
print("best epoch %d, val acc %.2f, test acc %.2f"
      % (metrics["best_epoch"], metrics["best_val_acc"], metrics["test_acc"]))

# %%
# Localise a fresh transmitter.
truth = EnuPosition(70.0, -45.0, 1.5)
log = generate_log(traj, to_geo(cfg.frame, truth), cfg.dt, cfg.mission.rate_hz, seed=99)
img = rasterize(log, cfg.flight_area, size, size, frame=cfg.frame)
cls = predict_class(model, img.network_input())
est = centroid_enu(grid, cls, 1.5)
print("class %d -> (%.0f, %.0f), error %.1f m" % (cls, est.east_m, est.north_m,
                                                  ground_distance(truth, est)))
