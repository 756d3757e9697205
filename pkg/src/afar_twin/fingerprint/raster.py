"""AoI cell grid and flight-log rasterisation."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..channel import NOISE_FLOOR_DBM
from ..geo import EnuPosition, GeoPosition, LocalFrame, Rect, to_geo
from ..measurement import MeasurementLog


@dataclass(frozen=True)
class AoiGrid:
    """`rows` x `cols` equal cells over `bounds`, numbered row-major from the SW corner."""
    bounds: Rect
    rows: int
    cols: int

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValueError("grid needs at least one row and one column")

    @property
    def n_classes(self) -> int:
        return self.rows * self.cols

    @property
    def cell_size(self) -> tuple[float, float]:
        return self.bounds.width / self.cols, self.bounds.height / self.rows

    @property
    def cell_half_diagonal(self) -> float:
        w, h = self.cell_size
        return 0.5 * float(np.hypot(w, h))


def label_of(grid: AoiGrid, pos) -> int:
    """Cell index of a position; cells are half-open except on the max edges."""
    e, n = (pos.east_m, pos.north_m) if isinstance(pos, EnuPosition) else (pos[0], pos[1])
    b = grid.bounds
    if not b.contains(e, n):
        raise ValueError(f"position ({e}, {n}) outside the AoI")
    w, h = grid.cell_size
    col = min(int((e - b.east_min) // w), grid.cols - 1)
    row = min(int((n - b.north_min) // h), grid.rows - 1)
    return row * grid.cols + col


def labels_of(grid: AoiGrid, xy: np.ndarray) -> np.ndarray:
    b = grid.bounds
    w, h = grid.cell_size
    col = np.minimum(((xy[:, 0] - b.east_min) // w).astype(int), grid.cols - 1)
    row = np.minimum(((xy[:, 1] - b.north_min) // h).astype(int), grid.rows - 1)
    return row * grid.cols + col


def centroid_enu(grid: AoiGrid, cls: int, up_m: float = 0.0) -> EnuPosition:
    if not 0 <= cls < grid.n_classes:
        raise ValueError(f"class {cls} not in [0, {grid.n_classes})")
    row, col = divmod(int(cls), grid.cols)
    w, h = grid.cell_size
    b = grid.bounds
    return EnuPosition(b.east_min + (col + 0.5) * w, b.north_min + (row + 0.5) * h, up_m)


def centroid_of(grid: AoiGrid, cls: int, frame: LocalFrame, up_m: float = 0.0) -> GeoPosition:
    return to_geo(frame, centroid_enu(grid, cls, up_m))


@dataclass
class FingerprintImage:
    """channel 0: mean RSSI per pixel (fill where unvisited); channel 1: count / max count."""
    data: np.ndarray      # (2, H, W)
    fill_dbm: float = NOISE_FLOOR_DBM

    @property
    def visited(self) -> np.ndarray:
        return self.data[1] > 0

    def network_input(self) -> np.ndarray:
        """Channel 0 standardised over visited pixels; fill pixels get the same affine map."""
        out = self.data.copy()
        vals = self.data[0][self.visited]
        mu = vals.mean()
        sd = vals.std()
        if sd == 0:
            out[0] = np.where(self.visited, 0.0, self.fill_dbm - mu)
        else:
            out[0] = (self.data[0] - mu) / sd
        return out


def rasterize_xy(xy: np.ndarray, rssi: np.ndarray, area: Rect, height: int = 32,
                 width: int = 32, fill_dbm: float = NOISE_FLOOR_DBM) -> FingerprintImage:
    if height < 8 or width < 8:
        raise ValueError("image must be at least 8x8")
    if len(rssi) == 0:
        raise ValueError("empty log")
    pw, ph = area.width / width, area.height / height
    col = np.floor((xy[:, 0] - area.east_min) / pw).astype(int)
    row = np.floor((xy[:, 1] - area.north_min) / ph).astype(int)
    # samples on the max edges belong to the last pixel
    col = np.where(col == width, width - 1, col)
    row = np.where(row == height, height - 1, row)
    keep = (col >= 0) & (col < width) & (row >= 0) & (row < height)
    flat = row[keep] * width + col[keep]
    count = np.bincount(flat, minlength=height * width).astype(float)
    total = np.bincount(flat, weights=rssi[keep], minlength=height * width)
    mean = np.full(height * width, float(fill_dbm))
    hit = count > 0
    mean[hit] = total[hit] / count[hit]
    norm = count / count.max() if count.max() > 0 else count
    return FingerprintImage(np.stack([mean.reshape(height, width), norm.reshape(height, width)]),
                            float(fill_dbm))


def rasterize(log: MeasurementLog, flight_area: Rect, height: int = 32, width: int = 32,
              fill_dbm: float = NOISE_FLOOR_DBM, frame: LocalFrame | None = None) -> FingerprintImage:
    return rasterize_xy(log.enu(frame), log.rssi_dbm, flight_area, height, width, fill_dbm)
