"""Finger-CNN localiser: RSSI images classified into area-of-interest cells."""
from .model import CnnModel, forward, load_model, predict_class, predict_proba, save_model
from .raster import (AoiGrid, FingerprintImage, centroid_enu, centroid_of, label_of, labels_of,
                     rasterize, rasterize_xy)
from .train import Dataset, TrainConfig, lr_schedule, simulate_dataset, train

__all__ = [
    "AoiGrid", "CnnModel", "Dataset", "FingerprintImage", "TrainConfig", "centroid_enu",
    "centroid_of", "forward", "label_of", "labels_of", "load_model", "lr_schedule",
    "predict_class", "predict_proba", "rasterize", "rasterize_xy", "save_model",
    "simulate_dataset", "train",
]
