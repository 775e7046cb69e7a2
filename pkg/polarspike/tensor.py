"""
Dense tensors and the forward passes of the non-activation layers.

A tensor is a float32 numpy array in row-major order. Images are channels-first:
[C, H, W] for one sample, [N, C, H, W] for a batch. Dot products accumulate in
float64 and are rounded back to float32 once.

None of the functions here modify their inputs.
"""
from typing import TYPE_CHECKING, Iterable, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import DimensionError, NumericError

if TYPE_CHECKING:
    from .layers import AvgPool2d, BatchNorm, Conv2d  # noqa: F401

Tensor = np.ndarray
DTYPE = np.float32
ACC_DTYPE = np.float64


def make_rng(seed: int) -> np.random.Generator:
    """
    Returns the project's random generator: numpy's PCG64 seeded with `seed`.
    PCG64 produces the same stream on every platform, so every artifact derived
    from a seed is reproducible.
    """
    return np.random.Generator(np.random.PCG64(seed))


def as_tensor(values: Union[Tensor, Iterable, float]) -> Tensor:
    """Copies `values` into a new float32 tensor."""
    return np.array(values, dtype=DTYPE)


def check_finite(x: Tensor, what: str = "tensor") -> None:
    if not np.all(np.isfinite(x)):
        raise NumericError(f"{what} contains non-finite values")


def linear_forward(weight: Tensor, bias: Tensor, x: Tensor) -> Tensor:
    """
    y = W x + b for a single sample x of shape [in], or row-wise for a batch
    of shape [N, in].
    """
    if weight.ndim != 2:
        raise DimensionError(f"linear weight must be 2-D, got shape {weight.shape}")
    out_features, in_features = weight.shape
    if bias.shape != (out_features,):
        raise DimensionError(
            f"linear bias shape {bias.shape} doesn't match {out_features} outputs")
    if x.ndim not in (1, 2) or x.shape[-1] != in_features:
        raise DimensionError(
            f"linear input shape {x.shape} doesn't match {in_features} inputs")

    y = x.astype(ACC_DTYPE) @ weight.astype(ACC_DTYPE).T + bias.astype(ACC_DTYPE)
    return y.astype(DTYPE)


def _as_image_batch(x: Tensor, what: str) -> Tensor:
    if x.ndim == 3:
        return x[np.newaxis]
    if x.ndim == 4:
        return x
    raise DimensionError(f"{what} expects [C, H, W] or [N, C, H, W], got {x.shape}")


def conv2d_forward(spec: 'Conv2d', x: Tensor) -> Tensor:
    """
    2-D cross-correlation with bias, zero padding and a square stride.
    Output spatial size is floor((H + 2*pad - kh) / stride) + 1.
    """
    batch = _as_image_batch(x, "conv2d")
    out_channels, in_channels, kh, kw = spec.weight.shape
    if batch.shape[1] != in_channels:
        raise DimensionError(
            f"conv2d input has {batch.shape[1]} channels, kernel expects {in_channels}")

    pad = spec.padding
    if pad:
        batch = np.pad(batch, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    if kh > batch.shape[2] or kw > batch.shape[3]:
        raise DimensionError(
            f"kernel {kh}x{kw} is larger than padded input "
            f"{batch.shape[2]}x{batch.shape[3]}")

    windows = sliding_window_view(batch, (kh, kw), axis=(2, 3))
    windows = windows[:, :, ::spec.stride, ::spec.stride]
    y = np.einsum(
        'nchwij,ocij->nohw',
        windows.astype(ACC_DTYPE),
        spec.weight.astype(ACC_DTYPE),
    )
    y += spec.bias.astype(ACC_DTYPE)[np.newaxis, :, np.newaxis, np.newaxis]
    y = y.astype(DTYPE)
    return y if x.ndim == 4 else y[0]


def channel_axis(x: Tensor) -> int:
    """Feature vectors ([C] or [N, C]) carry channels last, images on axis -3."""
    return -1 if x.ndim <= 2 else -3


def batchnorm_forward(spec: 'BatchNorm', x: Tensor) -> Tensor:
    """Inference-mode batch normalization with frozen running statistics."""
    axis = channel_axis(x)
    channels = spec.gamma.shape[0]
    if x.shape[axis] != channels:
        raise DimensionError(
            f"batchnorm input has {x.shape[axis]} channels, parameters have {channels}")

    denom = spec.running_var.astype(ACC_DTYPE) + spec.eps
    if np.any(denom <= 0):
        raise NumericError("batchnorm running_var + eps must be positive")

    bshape = [1] * x.ndim
    bshape[axis] = channels
    scale = (spec.gamma.astype(ACC_DTYPE) / np.sqrt(denom)).reshape(bshape)
    mean = spec.running_mean.astype(ACC_DTYPE).reshape(bshape)
    shift = spec.beta.astype(ACC_DTYPE).reshape(bshape)

    y = (x.astype(ACC_DTYPE) - mean) * scale + shift
    return y.astype(DTYPE)


def avgpool2d_forward(spec: 'AvgPool2d', x: Tensor) -> Tensor:
    """Non-overlapping average pooling; the window must tile the input exactly."""
    batch = _as_image_batch(x, "avgpool2d")
    w = spec.window
    if w < 1:
        raise DimensionError("avgpool2d window is empty")
    n, c, h, width = batch.shape
    if h % w or width % w:
        raise DimensionError(f"avgpool2d window {w} doesn't divide {h}x{width}")

    y = batch.astype(ACC_DTYPE).reshape(n, c, h // w, w, width // w, w).mean(axis=(3, 5))
    y = y.astype(DTYPE)
    return y if x.ndim == 4 else y[0]


def flatten(x: Tensor, start_axis: int = 0) -> Tensor:
    """
    Flattens every axis from `start_axis` on, preserving row-major order.
    Use start_axis=1 to keep a leading batch axis.
    """
    return x.reshape(x.shape[:start_axis] + (-1,))
