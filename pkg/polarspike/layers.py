"""
Layer specifications of the ANN side: linear, conv2d, batchnorm, pqa, avgpool2d
and flatten. Each spec validates its own parameters and knows its forward pass.

`forward` always takes a batch (leading axis N).
"""
from dataclasses import dataclass
from typing import ClassVar, Union

import numpy as np

from . import tensor
from .errors import DimensionError, NumericError
from .quant import QuantParams, pqa_forward
from .tensor import Tensor


@dataclass(eq=False)
class Linear:
    weight: Tensor
    bias: Tensor

    kind: ClassVar[str] = 'linear'

    @property
    def out_features(self) -> int:
        return self.weight.shape[0]

    @property
    def in_features(self) -> int:
        return self.weight.shape[1]

    def validate(self) -> None:
        if self.weight.ndim != 2:
            raise DimensionError(f"weight must be [out, in], got {self.weight.shape}")
        if self.bias.shape != (self.out_features,):
            raise DimensionError(
                f"bias shape {self.bias.shape} doesn't match {self.out_features} outputs")

    def forward(self, x: Tensor) -> Tensor:
        return tensor.linear_forward(self.weight, self.bias, x)


@dataclass(eq=False)
class Conv2d:
    weight: Tensor
    bias: Tensor
    stride: int = 1
    padding: int = 0

    kind: ClassVar[str] = 'conv2d'

    @property
    def out_features(self) -> int:
        return self.weight.shape[0]

    def validate(self) -> None:
        if self.weight.ndim != 4:
            raise DimensionError(
                f"weight must be [out, in, kh, kw], got {self.weight.shape}")
        if self.bias.shape != (self.out_features,):
            raise DimensionError(
                f"bias shape {self.bias.shape} doesn't match "
                f"{self.out_features} output channels")
        if self.stride < 1:
            raise DimensionError(f"stride must be >= 1, got {self.stride}")
        if self.padding < 0:
            raise DimensionError(f"padding must be >= 0, got {self.padding}")

    def forward(self, x: Tensor) -> Tensor:
        return tensor.conv2d_forward(self, x)


@dataclass(eq=False)
class BatchNorm:
    gamma: Tensor
    beta: Tensor
    running_mean: Tensor
    running_var: Tensor
    eps: float = 1e-5

    kind: ClassVar[str] = 'batchnorm'

    @property
    def num_features(self) -> int:
        return self.gamma.shape[0]

    def validate(self) -> None:
        for name in ('beta', 'running_mean', 'running_var'):
            if getattr(self, name).shape != self.gamma.shape:
                raise DimensionError(
                    f"{name} shape {getattr(self, name).shape} doesn't match "
                    f"gamma shape {self.gamma.shape}")
        if np.any(self.running_var < 0):
            raise NumericError("running_var must be non-negative")
        if self.eps < 0:
            raise NumericError(f"eps must be non-negative, got {self.eps}")

    def forward(self, x: Tensor) -> Tensor:
        return tensor.batchnorm_forward(self, x)


@dataclass(eq=False)
class Pqa:
    quant: QuantParams

    kind: ClassVar[str] = 'pqa'

    def __post_init__(self) -> None:
        self.quant.validate()

    def validate(self) -> None:
        self.quant.validate()

    def forward(self, x: Tensor) -> Tensor:
        return pqa_forward(self.quant, x)


@dataclass(eq=False)
class AvgPool2d:
    window: int
    stride: int = 0

    kind: ClassVar[str] = 'avgpool2d'

    def __post_init__(self) -> None:
        if not self.stride:
            self.stride = self.window

    def validate(self) -> None:
        if self.window < 1:
            raise DimensionError("avgpool2d window is empty")
        if self.stride != self.window:
            raise DimensionError(
                f"only non-overlapping pooling is supported "
                f"(window {self.window}, stride {self.stride})")

    def forward(self, x: Tensor) -> Tensor:
        return tensor.avgpool2d_forward(self, x)


@dataclass(eq=False)
class Flatten:
    kind: ClassVar[str] = 'flatten'

    def validate(self) -> None:
        pass

    def forward(self, x: Tensor) -> Tensor:
        return tensor.flatten(x, start_axis=1)


LayerSpec = Union[Linear, Conv2d, BatchNorm, Pqa, AvgPool2d, Flatten]

WEIGHT_KINDS = (Linear, Conv2d)
PASSTHROUGH_KINDS = (AvgPool2d, Flatten)


def same_arrays(a: Tensor, b: Tensor) -> bool:
    """Bitwise equality of two tensors, shape and dtype included."""
    return a.shape == b.shape and a.dtype == b.dtype and a.tobytes() == b.tobytes()
