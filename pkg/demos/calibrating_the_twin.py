"""
Calibrating the twin from surrogate logs
========================================

Logs gathered in the (surrogate) real world, with known transmitter
positions, are pooled and fitted with a log-distance model. The fit replaces
the twin's mean channel and its fading statistics; the particle filter then
also adopts the fitted residual spread as its measurement noise.
"""

import numpy as np

from afar_twin import calibrate, pf
from afar_twin.geo import EnuPosition, to_geo
from afar_twin.harness.config import Config
from afar_twin.harness.experiment import mission
from afar_twin.measurement import generate_log

cfg = Config()
traj = mission(cfg)
rng = np.random.default_rng(0)

logs, truths = [], []
for j in range(24):
    p = EnuPosition(rng.uniform(-200, 200), rng.uniform(-200, 200), 1.5)
    truths.append(to_geo(cfg.frame, p))
    logs.append(generate_log(traj, truths[-1], cfg.rw_channel, 2.0, seed=100 + j,
                             env_tag="RW-surrogate"))

report = calibrate.fit_log_distance(logs, truths)
print("surrogate n = %.2f  sigma = %4.1f dB  0.1%% fade depth = %.1f dB"
      % (report.exponent_n, report.sigma_db, report.fade_depth_p999_db))

# %%
# Localise a transmitter with the raw twin and with the calibrated one.
calibrated = calibrate.apply(report, cfg.dt)
truth = EnuPosition(180.0, 35.0, 1.5)
test = generate_log(traj, to_geo(cfg.frame, truth), cfg.rw_channel, 2.0, seed=7,
                    env_tag="RW-surrogate")
for name, params, sigma in (("twin", cfg.dt, cfg.pf.meas_sigma_db),
                            ("calibrated", calibrated, report.sigma_db)):
    errs = [pf.run(test, params, cfg.pf_config(sigma), seed=s, frame=cfg.frame,
                   truth=truth)[1].error_m[-1] for s in range(5)]
    print("%-10s median error over 5 filter seeds: %.1f m" % (name, np.median(errs)))
