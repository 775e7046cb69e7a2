"""
Network containers: the quantization-aware ANN and the converted SNN.
"""
from dataclasses import dataclass, field, replace
from typing import List, Optional, Tuple, Union

import numpy as np

from . import tensor
from .errors import StructureError
from .layers import (WEIGHT_KINDS, AvgPool2d, BatchNorm, Conv2d, Flatten, LayerSpec,
                     Linear, Pqa)
from .neuron import AifParams
from .quant import lattice_index
from .tensor import DTYPE, Tensor


@dataclass
class AnnTrace:
    """
    What the ANN computed for a batch, per PQA layer in network order:
    the weighted input z reaching the activation, the lattice indices and the
    activation outputs y.
    """
    currents: List[Tensor] = field(default_factory=list)
    indices: List[np.ndarray] = field(default_factory=list)
    outputs: List[Tensor] = field(default_factory=list)
    head_output: Optional[Tensor] = None


@dataclass(eq=False)
class AnnModel:
    layers: List[LayerSpec]

    def validate(self) -> None:
        if not self.layers:
            raise StructureError("model has no layers")
        for layer in self.layers:
            layer.validate()
        if not isinstance(self.layers[-1], Linear):
            raise StructureError(
                f"the last layer must be a linear classifier head, "
                f"got {self.layers[-1].kind}")

    @property
    def pqa_layers(self) -> List[Pqa]:
        return [layer for layer in self.layers if isinstance(layer, Pqa)]

    @property
    def has_batchnorm(self) -> bool:
        return any(isinstance(layer, BatchNorm) for layer in self.layers)

    def forward(self, x: Tensor) -> Tensor:
        """Runs a batch through the network and returns the head output."""
        for layer in self.layers:
            x = layer.forward(x)
        return x

    def trace(self, x: Tensor) -> AnnTrace:
        result = AnnTrace()
        for layer in self.layers:
            if isinstance(layer, Pqa):
                k = lattice_index(layer.quant, x)
                result.currents.append(x)
                result.indices.append(k)
                x = (k * layer.quant.step).astype(DTYPE)
                result.outputs.append(x)
            else:
                x = layer.forward(x)
        result.head_output = x
        return result

    def predict(self, x: Tensor) -> np.ndarray:
        return np.argmax(self.forward(x), axis=-1)


@dataclass(eq=False)
class SnnLayer:
    """
    A weight layer of the SNN with the AIF population it drives.
    The classifier head has no AIF parameters: it integrates without firing.
    """
    kind: str
    weight: Tensor
    bias: Tensor
    stride: int = 1
    padding: int = 0
    aif: Optional[AifParams] = None

    @property
    def is_head(self) -> bool:
        return self.aif is None

    def validate(self) -> None:
        if self.kind == 'linear':
            Linear(self.weight, self.bias).validate()
        elif self.kind == 'conv2d':
            Conv2d(self.weight, self.bias, self.stride, self.padding).validate()
        else:
            raise StructureError(f"unknown SNN layer kind {self.kind!r}")
        if self.aif is not None:
            self.aif.validate()

    def synaptic_current(self, x: Tensor) -> Tensor:
        if self.kind == 'linear':
            return tensor.linear_forward(self.weight, self.bias, x)
        return tensor.conv2d_forward(self, x)


SnnStage = Union[SnnLayer, AvgPool2d, Flatten]


@dataclass(eq=False)
class SnnModel:
    layers: List[SnnStage]

    def validate(self) -> None:
        weight_layers = [layer for layer in self.layers if isinstance(layer, SnnLayer)]
        if not weight_layers:
            raise StructureError("SNN has no weight layers")
        if not isinstance(self.layers[-1], SnnLayer) or not self.layers[-1].is_head:
            raise StructureError("the last SNN layer must be a non-firing head")
        for i, layer in enumerate(self.layers):
            if isinstance(layer, SnnLayer) and layer.is_head and layer is not self.layers[-1]:
                raise StructureError(f"layer {i} has no AIF parameters but isn't the head")
            layer.validate()

    @property
    def spiking_layers(self) -> List[Tuple[int, SnnLayer]]:
        """(position, layer) of every firing layer, in network order."""
        return [
            (i, layer)
            for i, layer in enumerate(self.layers)
            if isinstance(layer, SnnLayer) and not layer.is_head
        ]

    def with_v_init(self, v_init: float) -> 'SnnModel':
        """A copy whose every AIF population starts at `v_init`."""
        layers = []
        for layer in self.layers:
            if isinstance(layer, SnnLayer) and layer.aif is not None:
                layer = replace(layer, aif=replace(layer.aif, v_init=float(v_init)))
            layers.append(layer)
        return SnnModel(layers)


Model = Union[AnnModel, SnnModel]


def is_weight_layer(layer: LayerSpec) -> bool:
    return isinstance(layer, WEIGHT_KINDS)
