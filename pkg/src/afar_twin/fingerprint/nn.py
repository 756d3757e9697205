"""Minimal NumPy tensor ops with exact gradients.

Tensors are plain ``ndarray`` in NCHW layout. Convolutions are
cross-correlations, stride 1, zero-padded to preserve spatial size.
"""
from __future__ import annotations

import numpy as np


def _batched(x):
    x = np.asarray(x)
    return (x[None], True) if x.ndim == 3 else (x, False)


def _im2col(x: np.ndarray, k: int) -> np.ndarray:
    """(N, C, H, W) -> (C*k*k, N*H*W) patch matrix, row order (c, i, j)."""
    n, c, h, w = x.shape
    p = k // 2
    xp = np.pad(x, ((0, 0), (0, 0), (p, p), (p, p)))
    cols = np.empty((c, k, k, n, h, w), dtype=x.dtype)
    for i in range(k):
        for j in range(k):
            cols[:, i, j] = xp[:, :, i:i + h, j:j + w].transpose(1, 0, 2, 3)
    return cols.reshape(c * k * k, n * h * w)


def conv2d(x, kernels, bias=None) -> np.ndarray:
    """(N, C, H, W) * (F, C, k, k) -> (N, F, H, W); a 3-D input gives a 3-D output."""
    x, single = _batched(x)
    kernels = np.asarray(kernels)
    f, c, k, k2 = kernels.shape
    if k != k2 or k % 2 == 0:
        raise ValueError("kernels must be square with odd size")
    if x.shape[1] != c:
        raise ValueError(f"input has {x.shape[1]} channels, kernels expect {c}")
    n, _, h, w = x.shape
    out = kernels.reshape(f, -1) @ _im2col(x, k)
    if bias is not None:
        out += np.asarray(bias).reshape(f, 1)
    out = out.reshape(f, n, h, w).transpose(1, 0, 2, 3)
    return out[0] if single else np.ascontiguousarray(out)


def conv2d_grad(x, kernels, dout, need_input_grad: bool = True):
    """Gradients of `conv2d` w.r.t. (input, kernels, bias).

    The input gradient is None when `need_input_grad` is false.
    """
    x, single = _batched(x)
    dout, _ = _batched(dout)
    kernels = np.asarray(kernels)
    f, c, k, _ = kernels.shape
    dflat = dout.transpose(1, 0, 2, 3).reshape(f, -1)
    dk = (dflat @ _im2col(x, k).T).reshape(kernels.shape)
    db = dflat.sum(axis=1)
    if not need_input_grad:
        return None, dk, db
    # input gradient is a correlation with the 180-degree rotated, channel-swapped kernel
    dx = conv2d(dout, kernels[:, :, ::-1, ::-1].transpose(1, 0, 2, 3))
    return (dx[0] if single else dx), dk, db


def _windows(x):
    return (x[:, :, 0::2, 0::2], x[:, :, 0::2, 1::2], x[:, :, 1::2, 0::2], x[:, :, 1::2, 1::2])


def maxpool2(x):
    """2x2 stride-2 max pool; returns (out, argmax in 0..3 within each window).

    Window positions are numbered row-major, so ties go to the lowest flat index.
    """
    x, single = _batched(x)
    if x.shape[2] % 2 or x.shape[3] % 2:
        raise ValueError("maxpool2 needs even spatial dims")
    stacked = np.stack(_windows(x))
    idx = stacked.argmax(axis=0)
    out = np.take_along_axis(stacked, idx[None], axis=0)[0]
    return (out[0], idx[0]) if single else (out, idx)


def maxpool2_grad(dout, idx):
    dout, single = _batched(dout)
    idx = idx[None] if single else idx
    n, c, h2, w2 = dout.shape
    dx = np.zeros((n, c, 2 * h2, 2 * w2), dtype=dout.dtype)
    for pos, view in enumerate(_windows(dx)):
        view[...] = np.where(idx == pos, dout, 0)
    return dx[0] if single else dx


def relu(x):
    return np.maximum(x, 0)


def softmax(logits) -> np.ndarray:
    z = np.asarray(logits, dtype=float)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_xent(logits, label):
    """Mean cross-entropy and its gradient w.r.t. the logits.

    Accepts a single logit vector with an int label, or a (B, C) batch with
    a label array.
    """
    logits = np.asarray(logits, dtype=float)
    single = logits.ndim == 1
    z = logits[None] if single else logits
    lab = np.atleast_1d(np.asarray(label))
    shifted = z - z.max(axis=1, keepdims=True)
    logsum = np.log(np.exp(shifted).sum(axis=1))
    rows = np.arange(len(z))
    loss = float(np.mean(logsum - shifted[rows, lab]))
    grad = np.exp(shifted - logsum[:, None])
    grad[rows, lab] -= 1.0
    grad /= len(z)
    return loss, (grad[0] if single else grad)
