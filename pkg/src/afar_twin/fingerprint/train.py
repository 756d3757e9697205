"""Dataset simulation, the training loop, and the learning-rate schedule."""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from ..channel import ChannelParams, sample_path_rssi_dbm
from ..geo import Rect
from ..vehicle import Trajectory, sample_positions_array
from .model import PARAM_NAMES, CnnModel, forward, loss_and_grads
from .raster import AoiGrid, labels_of, rasterize_xy

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 200
    lr0: float = 1e-3
    decay_factor: float = 0.1
    weight_decay: float = 1e-3
    batch_size: int = 32
    split: tuple = (0.70, 0.15, 0.15)
    seed: int = 0
    optimizer: str = "adamw"
    channels: tuple = (8, 16, 32)
    kernel: int = 3
    dtype: str = "float64"

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if abs(sum(self.split) - 1.0) > 1e-9 or min(self.split) < 0:
            raise ValueError("split must be non-negative and sum to 1")
        if self.optimizer not in ("sgd", "adamw"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


def lr_schedule(cfg: TrainConfig, epoch: int) -> float:
    """Continuous exponential decay from lr0 to lr0 * decay_factor at the last epoch."""
    if cfg.epochs == 1:
        return cfg.lr0
    return cfg.lr0 * cfg.decay_factor ** (epoch / (cfg.epochs - 1))


@dataclass
class Dataset:
    images: np.ndarray   # (M, C, H, W) network inputs
    labels: np.ndarray   # (M,) int

    def __post_init__(self):
        self.images = np.asarray(self.images)
        self.labels = np.asarray(self.labels, dtype=int)
        if len(self.images) != len(self.labels):
            raise ValueError("images and labels differ in length")

    def __len__(self):
        return len(self.labels)

    @classmethod
    def from_pairs(cls, pairs) -> "Dataset":
        imgs, labs = zip(*pairs)
        arr = [im.network_input() if hasattr(im, "network_input") else np.asarray(im) for im in imgs]
        if len({a.shape for a in arr}) != 1:
            raise ValueError("images must share one shape")
        return cls(np.stack(arr), np.array(labs))


def simulate_dataset(traj: Trajectory, grid: AoiGrid, params: ChannelParams, n: int, seed,
                     flight_area: Rect, rate_hz: float = 2.0, ugv_height_m: float = 1.5,
                     height: int = 32, width: int = 32, fill_dbm: float = -120.0):
    """Logs for `n` uniformly placed transmitters, rasterised and labelled.

    Returns (Dataset, transmitter ENU positions).
    """
    rng = np.random.default_rng(seed)
    b = grid.bounds
    _, path = sample_positions_array(traj, rate_hz)
    tx = np.column_stack([rng.uniform(b.east_min, b.east_max, n),
                          rng.uniform(b.north_min, b.north_max, n),
                          np.full(n, ugv_height_m)])
    imgs = np.empty((n, 2, height, width))
    for i in range(n):
        rssi = sample_path_rssi_dbm(tx[i], path, params, rng)
        imgs[i] = rasterize_xy(path, rssi, flight_area, height, width, fill_dbm).network_input()
    return Dataset(imgs, labels_of(grid, tx)), tx


def split_indices(n: int, cfg: TrainConfig):
    perm = np.random.default_rng(cfg.seed).permutation(n)
    n_train = int(round(cfg.split[0] * n))
    n_val = int(round(cfg.split[1] * n))
    return perm[:n_train], perm[n_train:n_train + n_val], perm[n_train + n_val:]


def accuracy(model: CnnModel, images, labels, batch: int = 256) -> float:
    if len(labels) == 0:
        return float("nan")
    pred = np.concatenate([np.argmax(forward(model, images[i:i + batch]), axis=1)
                           for i in range(0, len(labels), batch)])
    return float(np.mean(pred == labels))


class _AdamW:
    def __init__(self, params, b1=0.9, b2=0.999, eps=1e-8):
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.b1, self.b2, self.eps, self.t = b1, b2, eps, 0

    def step(self, params, grads, lr, wd):
        self.t += 1
        c1 = 1 - self.b1 ** self.t
        c2 = 1 - self.b2 ** self.t
        for k in PARAM_NAMES:
            g = grads[k]
            self.m[k] = self.b1 * self.m[k] + (1 - self.b1) * g
            self.v[k] = self.b2 * self.v[k] + (1 - self.b2) * g * g
            upd = (self.m[k] / c1) / (np.sqrt(self.v[k] / c2) + self.eps)
            params[k] -= lr * (upd + wd * params[k])


def train(dataset: Dataset, grid: AoiGrid, cfg: TrainConfig = TrainConfig(),
          min_per_class: int = 10):
    """Seeded 70/15/15 split, mini-batch training, best-validation checkpoint.

    Returns (model, metrics).
    """
    n_classes = grid.n_classes
    if len(dataset) < min_per_class * n_classes:
        raise ValueError(f"dataset too small: {len(dataset)} < {min_per_class} x {n_classes} classes")
    if np.any((dataset.labels < 0) | (dataset.labels >= n_classes)):
        raise ValueError("labels outside [0, C)")
    dtype = np.dtype(cfg.dtype)
    x = dataset.images.astype(dtype)
    y = dataset.labels
    tr, va, te = split_indices(len(y), cfg)
    _, c, h, w = x.shape
    model = CnnModel.init(n_classes, c, h, w, cfg.channels, cfg.kernel, seed=cfg.seed).astype(dtype)
    rng = np.random.default_rng([cfg.seed, 1])
    opt = _AdamW(model.params) if cfg.optimizer == "adamw" else None

    best, best_acc, best_epoch = model.copy(), -1.0, -1
    train_loss, val_acc, lrs = [], [], []
    for epoch in range(cfg.epochs):
        lr = lr_schedule(cfg, epoch)
        order = tr[rng.permutation(len(tr))]
        total = 0.0
        for i in range(0, len(order), cfg.batch_size):
            idx = order[i:i + cfg.batch_size]
            loss, grads = loss_and_grads(model, x[idx], y[idx])
            total += loss * len(idx)
            if opt is not None:
                opt.step(model.params, grads, lr, cfg.weight_decay)
            else:
                for k in PARAM_NAMES:
                    model.params[k] -= lr * (grads[k] + cfg.weight_decay * model.params[k])
        train_loss.append(total / len(tr))
        lrs.append(lr)
        acc = accuracy(model, x[va], y[va]) if len(va) else accuracy(model, x[tr], y[tr])
        val_acc.append(acc)
        if acc > best_acc:
            best, best_acc, best_epoch = model.copy(), acc, epoch
    metrics = {
        **{k: v for k, v in asdict(cfg).items() if k not in ("channels",)},
        "channels": list(cfg.channels),
        "split": list(cfg.split),
        "lr_final": lrs[-1],
        "n_train": len(tr), "n_val": len(va), "n_test": len(te),
        "train_loss": train_loss,
        "val_acc": val_acc,
        "best_epoch": best_epoch,
        "best_val_acc": best_acc,
        "train_acc": accuracy(best, x[tr], y[tr]),
        "test_acc": accuracy(best, x[te], y[te]),
    }
    return best.astype(np.float64), metrics
