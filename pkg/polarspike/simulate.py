"""
Multi-timestep simulation of converted SNNs and the conversion-error analysis
built on it.

The same analog input is injected into the first layer at every timestep and
layers update strictly feed-forward within a timestep, so layer l sees the
spikes layer l-1 emitted in the same step.
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from .errors import ConfigError, DimensionError, StructureError
from .network import AnnModel, SnnLayer, SnnModel
from .neuron import AifParams, aif_init, aif_step
from .tensor import ACC_DTYPE, DTYPE, Tensor, check_finite

logger = logging.getLogger('polarspike.simulate')

DELTA_BUCKETS = ('delta_minus1', 'delta_0', 'delta_plus1', 'delta_other')


def average_psp(theta_snn: float, spikes: np.ndarray) -> Tensor:
    """phi(T) = theta_snn * sum_t s(t) / T for a [T, ...] spike record."""
    T = spikes.shape[0]
    return (theta_snn * spikes.sum(axis=0, dtype=ACC_DTYPE) / T).astype(DTYPE)


@dataclass
class RunReport:
    """
    The record of one simulation over a batch of N samples.

    spikes[l] is the [T, N, ...] integer spike record of the l-th firing layer,
    psp[l] its average post-synaptic potential. head_output is the head's
    membrane potential averaged over T.
    """
    T: int
    spikes: List[np.ndarray]
    thresholds: List[float]
    psp: List[Tensor]
    head_output: Tensor
    total_spike_events: int
    currents: Optional[List[np.ndarray]] = None

    @property
    def labels(self) -> List[str]:
        return [f"N{i + 1}" for i in range(len(self.spikes))]

    @property
    def n_samples(self) -> int:
        return self.head_output.shape[0]

    def recompute_psp(self) -> List[Tensor]:
        return [
            average_psp(theta, spikes)
            for theta, spikes in zip(self.thresholds, self.spikes)
        ]


def run_snn(
            model: SnnModel,
            inputs: Tensor,
            T: int,
            record_currents: bool = False,
        ) -> RunReport:
    """
    Simulates `model` for T timesteps on a batch `inputs` ([N, ...]).
    With record_currents, the synaptic current o(t) reaching every firing
    layer is kept in the report.
    """
    if T < 1:
        raise ConfigError(f"number of timesteps must be >= 1, got {T}")
    check_finite(inputs, "input")
    model.validate()

    firing = [i for i, _ in model.spiking_layers]
    states = {}
    spikes: Dict[int, List[np.ndarray]] = {i: [] for i in firing}
    currents: Dict[int, List[np.ndarray]] = {i: [] for i in firing}
    head_acc = None

    for _ in range(T):
        x = inputs
        for i, stage in enumerate(model.layers):
            if not isinstance(stage, SnnLayer):
                x = stage.forward(x)
                continue

            o = stage.synaptic_current(x)
            if stage.is_head:
                head_acc = o.astype(ACC_DTYPE) if head_acc is None else head_acc + o
                x = o
                continue

            if i not in states:
                states[i] = aif_init(stage.aif, o.shape)
            s, _ = aif_step(stage.aif, states[i], o)
            spikes[i].append(s)
            if record_currents:
                currents[i].append(o)
            x = s.astype(DTYPE)

    check_finite(head_acc, "head potential")
    records = [np.stack(spikes[i]) for i in firing]
    thresholds = [model.layers[i].aif.theta_snn for i in firing]
    return RunReport(
        T=T,
        spikes=records,
        thresholds=thresholds,
        psp=[average_psp(theta, s) for theta, s in zip(thresholds, records)],
        head_output=(head_acc / T).astype(DTYPE),
        total_spike_events=int(sum(np.abs(s).sum(dtype=np.int64) for s in records)),
        currents=[np.stack(currents[i]) for i in firing] if record_currents else None,
    )


def decode_prediction(report: RunReport) -> np.ndarray:
    """
    Class index of every sample: argmax of the averaged head potential, ties
    going to the lowest index.
    """
    if report.head_output.size == 0:
        raise DimensionError("head output is empty")
    return np.argmax(report.head_output, axis=-1)


def drive_constant(aif: AifParams, current: Tensor, T: int) -> np.ndarray:
    """Spike record [T, ...] of a fresh AIF population under a constant current."""
    state = aif_init(aif, current.shape)
    return np.stack([aif_step(aif, state, current)[0] for _ in range(T)])


def unclipped_mask(aif: AifParams, current: Tensor) -> np.ndarray:
    """
    Neurons whose constant input keeps every firing step inside
    [c_neg, c_pos], where the residual stays in [0, theta_snn).
    """
    u = np.asarray(current, dtype=ACC_DTYPE) / aif.theta_snn
    return (u >= aif.c_neg) & (u <= aif.c_pos)


def _check_pair(ann: AnnModel, snn: SnnModel) -> None:
    pqa_layers = ann.pqa_layers
    firing = snn.spiking_layers
    if len(pqa_layers) != len(firing):
        raise StructureError(
            f"ANN has {len(pqa_layers)} PQA layers but SNN has {len(firing)} firing layers")
    for n, (pqa, (_, layer)) in enumerate(zip(pqa_layers, firing)):
        q, aif = pqa.quant, layer.aif
        if (q.step, q.k_neg, q.k_pos) != (aif.theta_snn, aif.c_neg, aif.c_pos):
            raise StructureError(
                f"firing layer {n + 1} wasn't converted from the matching PQA layer")


def layer_error(
            ann: AnnModel,
            snn: SnnModel,
            inputs: Tensor,
            T: int,
            shared_inputs: bool = True,
        ) -> List[np.ndarray]:
    """
    Err = phi(T) - y per neuron and firing layer, with y the ANN's PQA output.

    With shared inputs (the default) every SNN layer is driven by the ANN's
    own weighted input z as a constant current, so both sides see the same
    input. Otherwise the whole SNN runs freely and layer l receives the
    spikes its SNN predecessor actually emitted.
    """
    _check_pair(ann, snn)
    trace = ann.trace(inputs)

    if shared_inputs:
        psp = [
            average_psp(layer.aif.theta_snn, drive_constant(layer.aif, z, T))
            for (_, layer), z in zip(snn.spiking_layers, trace.currents)
        ]
    else:
        psp = run_snn(snn, inputs, T).psp

    return [
        p.astype(ACC_DTYPE) - y.astype(ACC_DTYPE)
        for p, y in zip(psp, trace.outputs)
    ]


@dataclass
class DeltaStats:
    """
    Per-neuron spike-count deviations from the first timestep,
    deltas[l][i] = s(i) - s(1), for every firing layer l.
    """
    T: int
    deltas: List[np.ndarray]
    histogram: Dict[str, int] = field(default_factory=dict)
    layer_histograms: List[Dict[str, int]] = field(default_factory=list)
    mean_delta: float = 0.0

    def neuron_mean_delta(self, layer: int) -> np.ndarray:
        """(1/T) * sum_i Delta_i of every neuron of one layer."""
        return self.deltas[layer].mean(axis=0, dtype=ACC_DTYPE)


def _histogram(deltas: np.ndarray) -> Dict[str, int]:
    minus = int(np.count_nonzero(deltas == -1))
    zero = int(np.count_nonzero(deltas == 0))
    plus = int(np.count_nonzero(deltas == 1))
    return dict(zip(DELTA_BUCKETS, (minus, zero, plus, deltas.size - minus - zero - plus)))


def _delta_stats(
            model: SnnModel,
            inputs: Tensor,
            T: int,
            constant_input: bool,
        ) -> DeltaStats:
    if constant_input:
        first = run_snn(model, inputs, 1, record_currents=True)
        records = [
            drive_constant(layer.aif, o[0], T)
            for (_, layer), o in zip(model.spiking_layers, first.currents)
        ]
    else:
        records = run_snn(model, inputs, T).spikes

    deltas = [s - s[:1] for s in records]
    layer_histograms = [_histogram(d) for d in deltas]
    histogram = {
        bucket: sum(h[bucket] for h in layer_histograms) for bucket in DELTA_BUCKETS
    }
    neuron_means = np.concatenate([d.mean(axis=0, dtype=ACC_DTYPE).ravel() for d in deltas])

    if histogram['delta_other']:
        logger.warning(
            "%s spike-count deviations fall outside {-1, 0, +1} (clipped regime)",
            histogram['delta_other'])

    return DeltaStats(
        T=T,
        deltas=deltas,
        histogram=histogram,
        layer_histograms=layer_histograms,
        mean_delta=float(neuron_means.mean()) if neuron_means.size else 0.0,
    )


def delta_statistics(
            model: SnnModel,
            inputs: Tensor,
            T: int,
            constant_input: bool = True,
        ) -> DeltaStats:
    """
    Delta_i statistics over T >= 2 timesteps.

    With constant_input (the default) every firing layer is driven by the
    constant current it received in the first timestep, the regime in which
    Delta_i is bounded to {-1, 0, +1} when nothing clips. Otherwise the deltas
    come from a free network run.
    """
    if T < 2:
        raise ConfigError(f"delta statistics need T >= 2, got {T}")
    return _delta_stats(model, inputs, T, constant_input)


def error_sweep(
            ann: AnnModel,
            snn: SnnModel,
            inputs: Tensor,
            timesteps: Sequence[int],
        ) -> List[dict]:
    """
    One row per (T, firing layer): mean |Err| and the Delta_i histogram.
    """
    rows = []
    for T in timesteps:
        errors = layer_error(ann, snn, inputs, T)
        stats = _delta_stats(snn, inputs, T, constant_input=True)
        for n, (err, hist) in enumerate(zip(errors, stats.layer_histograms)):
            row = {'T': T, 'layer': f"N{n + 1}", 'mean_abs_err': float(np.abs(err).mean())}
            row.update(hist)
            rows.append(row)
        logger.debug("Error sweep T=%s done", T)
    return rows
