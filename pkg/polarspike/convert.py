"""
ANN -> SNN conversion: fold batch normalization, transfer PQA parameters to
AIF neurons, scale weights and check T=1 equivalence.
"""
import logging
from dataclasses import dataclass
from typing import Callable, List, Optional

import numpy as np

from .errors import DimensionError, NumericError, StructureError
from .layers import PASSTHROUGH_KINDS, BatchNorm, Conv2d, Linear, Pqa
from .network import AnnModel, SnnLayer, SnnModel, SnnStage, is_weight_layer
from .neuron import AifParams
from .quant import QuantParams
from .simulate import run_snn
from .tensor import ACC_DTYPE, DTYPE, Tensor

logger = logging.getLogger('polarspike.convert')


def fold_batchnorm(model: AnnModel) -> AnnModel:
    """
    Returns a copy of `model` in which every batchnorm is absorbed into the
    linear/conv2d layer right before it:

        W' = (gamma / sqrt(var + eps)) * W        (per output row / channel)
        b' = gamma * (b - mean) / sqrt(var + eps) + beta
    """
    layers = []
    for i, layer in enumerate(model.layers):
        if not isinstance(layer, BatchNorm):
            layers.append(layer)
            continue

        prev = layers[-1] if layers else None
        if not is_weight_layer(prev):
            raise StructureError(
                f"batchnorm at position {i} has no linear/conv2d layer to fold into")
        if layer.num_features != prev.out_features:
            raise DimensionError(
                f"batchnorm at position {i} has {layer.num_features} features, "
                f"preceding layer has {prev.out_features} outputs")

        denominator = layer.running_var.astype(ACC_DTYPE) + layer.eps
        if np.any(denominator <= 0):
            raise NumericError(f"batchnorm at position {i} has var + eps <= 0")
        scale = layer.gamma.astype(ACC_DTYPE) / np.sqrt(denominator)
        wshape = (-1,) + (1,) * (prev.weight.ndim - 1)
        weight = (prev.weight.astype(ACC_DTYPE) * scale.reshape(wshape)).astype(DTYPE)
        bias = ((prev.bias.astype(ACC_DTYPE) - layer.running_mean) * scale
                + layer.beta).astype(DTYPE)

        if isinstance(prev, Conv2d):
            layers[-1] = Conv2d(weight, bias, prev.stride, prev.padding)
        else:
            layers[-1] = Linear(weight, bias)

    return AnnModel(layers)


def transfer_pqa_to_aif(q: QuantParams) -> AifParams:
    """
    theta_snn = theta / L, c_neg = alpha * L, c_pos = beta * L,
    v_init = theta_snn / 2.
    """
    q.validate()
    theta_snn = q.step
    return AifParams(
        theta_snn=theta_snn,
        c_neg=q.k_neg,
        c_pos=q.k_pos,
        v_init=theta_snn / 2,
    )


def transfer_qa_to_if(q: QuantParams) -> AifParams:
    """
    Baseline integrate-and-fire neuron for the same PQA layer: threshold
    theta, at most one positive spike per timestep, v_init = theta / 2.
    Over L timesteps its rate approximates the L-level QA activation.
    """
    q.validate()
    return AifParams(theta_snn=q.theta, c_neg=0, c_pos=1, v_init=q.theta / 2)


def convert_model(
            model: AnnModel,
            transfer: Callable[[QuantParams], AifParams] = transfer_pqa_to_aif,
        ) -> SnnModel:
    """
    Converts a quantization-aware ANN into an SNN. `transfer` turns every
    PQA layer into the parameters of its firing neurons.

    Each weight layer is scaled by the threshold of the layer that sends it
    spikes, since y = theta_snn * s upstream: W_snn = W * theta_snn(previous).
    The first weight layer gets the analog input and stays unscaled. Biases
    are unscaled and injected every timestep.
    """
    model.validate()
    folded = fold_batchnorm(model)
    layers = folded.layers

    snn_layers: List[SnnStage] = []
    input_scale: Optional[float] = None
    i = 0
    while i < len(layers):
        layer = layers[i]

        if isinstance(layer, PASSTHROUGH_KINDS):
            snn_layers.append(layer)
            i += 1
            continue
        if isinstance(layer, Pqa):
            raise StructureError(
                f"pqa at position {i} isn't preceded by a linear/conv2d layer")

        weight = layer.weight
        if input_scale is not None:
            weight = (weight.astype(ACC_DTYPE) * input_scale).astype(DTYPE)

        is_last = i == len(layers) - 1
        next_layer = None if is_last else layers[i + 1]
        if is_last:
            aif = None
            i += 1
        elif isinstance(next_layer, Pqa):
            aif = transfer(next_layer.quant)
            input_scale = aif.theta_snn
            i += 2
        else:
            raise StructureError(
                f"{layer.kind} at position {i} must be followed by a pqa activation, "
                f"got {next_layer.kind}")

        snn_layers.append(SnnLayer(
            kind=layer.kind,
            weight=weight,
            bias=layer.bias.copy(),
            stride=getattr(layer, 'stride', 1),
            padding=getattr(layer, 'padding', 0),
            aif=aif,
        ))

    snn = SnnModel(snn_layers)
    snn.validate()
    logger.info(
        "Converted %s ANN layers into %s SNN stages (%s firing)",
        len(model.layers), len(snn.layers), len(snn.spiking_layers))
    return snn


def convert_baseline(model: AnnModel) -> SnnModel:
    """Converts `model` into a binary-spike IF network, see transfer_qa_to_if."""
    return convert_model(model, transfer=transfer_qa_to_if)


@dataclass
class EquivalenceReport:
    max_abs_diff: float
    argmax_agreement: float
    index_mismatches: int
    n_samples: int

    def as_dict(self) -> dict:
        return {
            'max_abs_diff': self.max_abs_diff,
            'argmax_agreement': self.argmax_agreement,
            'index_mismatches': self.index_mismatches,
            'n_samples': self.n_samples,
        }


def verify_equivalence(
            ann: AnnModel,
            snn: SnnModel,
            inputs: Tensor,
            v_init: Optional[float] = None,
        ) -> EquivalenceReport:
    """
    Runs the (BN-folded) ANN and the SNN for one timestep on a batch and
    compares head outputs and, per neuron, spike counts against PQA lattice
    indices. `v_init` overrides every initial membrane potential, which is how
    the negative control is run.
    """
    folded = fold_batchnorm(ann)
    trace = folded.trace(inputs)
    if v_init is not None:
        snn = snn.with_v_init(v_init)
    report = run_snn(snn, inputs, 1)

    if len(report.spikes) != len(trace.indices):
        raise StructureError(
            f"SNN has {len(report.spikes)} firing layers, "
            f"ANN has {len(trace.indices)} PQA layers")
    if report.head_output.shape != trace.head_output.shape:
        raise DimensionError(
            f"SNN head output {report.head_output.shape} doesn't match "
            f"ANN head output {trace.head_output.shape}")

    mismatches = 0
    for spikes, indices in zip(report.spikes, trace.indices):
        if spikes[0].shape != indices.shape:
            raise DimensionError(
                f"SNN layer shape {spikes[0].shape} doesn't match "
                f"ANN activation shape {indices.shape}")
        mismatches += int(np.count_nonzero(spikes[0] != indices))

    diff = np.abs(
        report.head_output.astype(ACC_DTYPE) - trace.head_output.astype(ACC_DTYPE))
    agreement = np.mean(
        np.argmax(report.head_output, axis=-1) == np.argmax(trace.head_output, axis=-1))

    result = EquivalenceReport(
        max_abs_diff=float(diff.max()) if diff.size else 0.0,
        argmax_agreement=float(agreement),
        index_mismatches=mismatches,
        n_samples=int(inputs.shape[0]),
    )
    logger.info(
        "T=1 equivalence on %s samples: max_abs_diff=%g, argmax_agreement=%.4f, "
        "index_mismatches=%s",
        result.n_samples, result.max_abs_diff, result.argmax_agreement,
        result.index_mismatches)
    return result
