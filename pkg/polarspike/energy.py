"""
Spike counting and the per-spike power model.

An AIF output of +n or -n in one timestep counts as n spike events. With N
events over T timesteps of eta seconds, each costing xi joules, the average
power is P = N / (T * eta) * xi.
"""
import logging
from dataclasses import dataclass, field
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from .errors import ConfigError, DimensionError
from .network import SnnModel
from .simulate import RunReport, decode_prediction, run_snn
from .tensor import Tensor

logger = logging.getLogger('polarspike.energy')

# 45 nm figures: 1 ms per timestep, 0.9 pJ per spike.
DEFAULT_ETA = 1e-3
DEFAULT_XI = 0.9e-12


class PublishedPowerRow(NamedTuple):
    dataset: str
    method: str
    T: int
    spikes_1e8: float
    power_w: float


# VGG-16 comparison rows; N is given in units of 1e8 spikes.
PUBLISHED_POWER_ROWS = (
    PublishedPowerRow('CIFAR-10', 'QCFS', 1, 3.08, 0.278),
    PublishedPowerRow('CIFAR-10', 'Ours', 1, 0.61, 0.055),
    PublishedPowerRow('CIFAR-10', 'QCFS', 2, 6.44, 0.290),
    PublishedPowerRow('CIFAR-10', 'Ours', 2, 1.23, 0.055),
    PublishedPowerRow('CIFAR-100', 'QCFS', 1, 3.38, 0.305),
    PublishedPowerRow('CIFAR-100', 'Ours', 1, 0.58, 0.052),
    PublishedPowerRow('CIFAR-100', 'QCFS', 2, 7.36, 0.331),
    PublishedPowerRow('CIFAR-100', 'Ours', 2, 1.16, 0.052),
)


@dataclass
class EnergyReport:
    N: int
    T: int
    eta: float
    xi: float
    P: float
    per_layer_counts: List[int] = field(default_factory=list)
    labels: List[str] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            'N': self.N,
            'T': self.T,
            'eta': self.eta,
            'xi': self.xi,
            'P': self.P,
            'per_layer_counts': list(self.per_layer_counts),
            'labels': list(self.labels),
        }


def count_spikes(report: RunReport) -> Tuple[List[int], int]:
    """Per-layer sums of |spike count| over neurons, samples and timesteps, and N."""
    counts = [int(np.abs(s).sum(dtype=np.int64)) for s in report.spikes]
    return counts, sum(counts)


def power(N: float, T: int, eta: float = DEFAULT_ETA, xi: float = DEFAULT_XI) -> float:
    if T < 1:
        raise ConfigError(f"T must be >= 1, got {T}")
    if eta <= 0:
        raise ConfigError(f"timestep duration eta must be > 0, got {eta}")
    return N / (T * eta) * xi


def power_ratio(reference: float, ours: float) -> float:
    """How many times less power `ours` draws than `reference`."""
    return reference / ours


def energy_from_counts(
            per_layer_counts: Sequence[int],
            T: int,
            eta: float = DEFAULT_ETA,
            xi: float = DEFAULT_XI,
            labels: Optional[Sequence[str]] = None,
        ) -> EnergyReport:
    counts = [int(c) for c in per_layer_counts]
    N = sum(counts)
    return EnergyReport(
        N=N,
        T=T,
        eta=eta,
        xi=xi,
        P=power(N, T, eta, xi),
        per_layer_counts=counts,
        labels=list(labels) if labels else [f"N{i + 1}" for i in range(len(counts))],
    )


def energy_report(
            report: RunReport,
            eta: float = DEFAULT_ETA,
            xi: float = DEFAULT_XI,
        ) -> EnergyReport:
    counts, _ = count_spikes(report)
    return energy_from_counts(counts, report.T, eta, xi, labels=report.labels)


def layerwise_spike_report(
            report: RunReport,
            baseline: Optional[RunReport] = None,
        ) -> List[dict]:
    """
    One {layer_label, spike_count} row per firing layer, in network order.
    Given the run of a baseline conversion of the same model, rows also carry
    its baseline_spike_count.
    """
    counts, _ = count_spikes(report)
    rows = [
        {'layer_label': label, 'spike_count': count}
        for label, count in zip(report.labels, counts)
    ]
    if baseline is None:
        return rows

    baseline_counts, _ = count_spikes(baseline)
    if len(baseline_counts) != len(counts):
        raise DimensionError(
            f"baseline run has {len(baseline_counts)} firing layers, expected {len(counts)}")
    for row, count in zip(rows, baseline_counts):
        row['baseline_spike_count'] = count
    return rows


def compare_with_baseline(
            model: SnnModel,
            baseline: SnnModel,
            inputs: Tensor,
            timesteps_list: Sequence[int],
            labels: Optional[np.ndarray] = None,
            eta: float = DEFAULT_ETA,
            xi: float = DEFAULT_XI,
        ) -> List[dict]:
    """
    Runs both networks on the same inputs for every T and returns one
    {method, T, N, P, accuracy} row per network and T, polar rows first.
    accuracy is None without labels.
    """
    rows = []
    for T in timesteps_list:
        for method, snn in (('polar', model), ('baseline', baseline)):
            report = run_snn(snn, inputs, T)
            energy = energy_report(report, eta, xi)
            accuracy = None
            if labels is not None:
                accuracy = float(np.mean(decode_prediction(report) == labels))
            rows.append({
                'method': method, 'T': T, 'N': energy.N, 'P': energy.P, 'accuracy': accuracy,
            })
            logger.info("%s network at T=%s: N=%s, P=%.4g W", method, T, energy.N, energy.P)
    return rows
