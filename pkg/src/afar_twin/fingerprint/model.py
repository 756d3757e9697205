"""The Finger-CNN: three conv/ReLU/max-pool stages, flatten, dense softmax."""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import nn

PARAM_NAMES = ("conv1_w", "conv1_b", "conv2_w", "conv2_b", "conv3_w", "conv3_b",
               "dense_w", "dense_b")
MAGIC = b"FCNNv001"


@dataclass
class CnnModel:
    params: dict   # name -> ndarray, in PARAM_NAMES order

    @classmethod
    def init(cls, n_classes: int, in_channels: int = 2, height: int = 32, width: int = 32,
             channels=(8, 16, 32), kernel: int = 3, seed=0) -> "CnnModel":
        if height % 8 or width % 8:
            raise ValueError("image size must be divisible by 8")
        rng = np.random.default_rng(seed)
        p = {}
        c_in = in_channels
        for i, c_out in enumerate(channels, 1):
            fan_in = c_in * kernel * kernel
            p[f"conv{i}_w"] = rng.normal(0.0, np.sqrt(2.0 / fan_in), (c_out, c_in, kernel, kernel))
            p[f"conv{i}_b"] = np.zeros(c_out)
            c_in = c_out
        d = c_in * (height // 8) * (width // 8)
        p["dense_w"] = rng.normal(0.0, np.sqrt(1.0 / d), (n_classes, d))
        p["dense_b"] = np.zeros(n_classes)
        return cls(p)

    @property
    def n_classes(self) -> int:
        return self.params["dense_w"].shape[0]

    @property
    def in_channels(self) -> int:
        return self.params["conv1_w"].shape[1]

    def copy(self) -> "CnnModel":
        return CnnModel({k: v.copy() for k, v in self.params.items()})

    def astype(self, dtype) -> "CnnModel":
        return CnnModel({k: v.astype(dtype) for k, v in self.params.items()})


def forward(model: CnnModel, images, return_cache: bool = False):
    """Logits for a (N, C, H, W) batch (or one (C, H, W) image)."""
    x = np.asarray(images)
    single = x.ndim == 3
    if single:
        x = x[None]
    p = model.params
    if x.shape[1] != model.in_channels:
        raise ValueError(f"image has {x.shape[1]} channels, model expects {model.in_channels}")
    cache = []
    for i in (1, 2, 3):
        a = nn.conv2d(x, p[f"conv{i}_w"], p[f"conv{i}_b"])
        r = nn.relu(a)
        pooled, idx = nn.maxpool2(r)
        cache.append((x, a, idx))
        x = pooled
    feat_shape = x.shape
    flat = x.reshape(len(x), -1)
    if flat.shape[1] != p["dense_w"].shape[1]:
        raise ValueError(f"flattened size {flat.shape[1]} does not match dense layer "
                         f"{p['dense_w'].shape[1]}")
    logits = flat @ p["dense_w"].T + p["dense_b"]
    if single:
        logits = logits[0]
    if return_cache:
        return logits, (cache, flat, feat_shape)
    return logits


def backward(model: CnnModel, cache, dlogits) -> dict:
    convs, flat, feat_shape = cache
    p = model.params
    dlogits = np.atleast_2d(dlogits)
    g = {"dense_w": dlogits.T @ flat, "dense_b": dlogits.sum(axis=0)}
    dx = (dlogits @ p["dense_w"]).reshape(feat_shape)
    for i in (3, 2, 1):
        x_in, a, idx = convs[i - 1]
        dr = nn.maxpool2_grad(dx, idx)
        da = dr * (a > 0)
        dx, g[f"conv{i}_w"], g[f"conv{i}_b"] = nn.conv2d_grad(x_in, p[f"conv{i}_w"], da,
                                                                need_input_grad=i > 1)
    return {k: g[k] for k in PARAM_NAMES}


def loss_and_grads(model: CnnModel, images, labels):
    logits, cache = forward(model, images, return_cache=True)
    loss, dlogits = nn.softmax_xent(logits, labels)
    return loss, backward(model, cache, dlogits)


def predict_proba(model: CnnModel, images) -> np.ndarray:
    return nn.softmax(forward(model, images))


def predict_class(model: CnnModel, images):
    # np.argmax returns the first maximum: lowest index wins ties
    out = np.argmax(forward(model, images), axis=-1)
    return int(out) if np.ndim(out) == 0 else out


def save_model(model: CnnModel, path) -> None:
    """Magic, uint32 tensor count, per-tensor (uint32 ndim, uint32 dims...),
    then all parameters as little-endian float64 in declaration order."""
    tensors = [np.asarray(model.params[k], dtype="<f8") for k in PARAM_NAMES]
    head = [MAGIC, struct.pack("<I", len(tensors))]
    for t in tensors:
        head.append(struct.pack("<I", t.ndim) + struct.pack(f"<{t.ndim}I", *t.shape))
    body = b"".join(np.ascontiguousarray(t).tobytes() for t in tensors)
    Path(path).write_bytes(b"".join(head) + body)


def load_model(path) -> CnnModel:
    buf = Path(path).read_bytes()
    if buf[:len(MAGIC)] != MAGIC:
        raise ValueError(f"{path}: not a Finger-CNN model file")
    off = len(MAGIC)
    (count,) = struct.unpack_from("<I", buf, off)
    off += 4
    if count != len(PARAM_NAMES):
        raise ValueError(f"{path}: expected {len(PARAM_NAMES)} tensors, found {count}")
    shapes = []
    for _ in range(count):
        (ndim,) = struct.unpack_from("<I", buf, off)
        off += 4
        shapes.append(struct.unpack_from(f"<{ndim}I", buf, off))
        off += 4 * ndim
    params = {}
    for name, shape in zip(PARAM_NAMES, shapes):
        size = int(np.prod(shape))
        params[name] = np.frombuffer(buf, dtype="<f8", count=size, offset=off).reshape(shape).copy()
        off += 8 * size
    if off != len(buf):
        raise ValueError(f"{path}: trailing bytes after parameters")
    return CnnModel(params)
