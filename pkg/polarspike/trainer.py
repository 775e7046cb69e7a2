"""
Quantization-aware training of small MLPs on synthetic 2-D data.

The network is [linear -> batchnorm -> pqa] * len(hidden) -> linear head,
trained with softmax cross-entropy and mini-batch SGD with momentum.
Gradients go through PQA straight-through (see quant.pqa_backward_ste), and
the PQA thresholds are learned from the saturated elements. Training runs in
float64; the exported model is float32 with frozen batchnorm statistics.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Tuple

import numpy as np

from .errors import ConfigError, TrainingError
from .layers import BatchNorm, Linear, Pqa
from .network import AnnModel, Model, SnnModel
from .quant import QuantParams, lattice_index, pqa_backward_ste
from .simulate import decode_prediction, run_snn
from .tensor import DTYPE, make_rng

logger = logging.getLogger('polarspike.trainer')

DATASET_KINDS = ('gaussians', 'spiral')

# Smallest threshold a training step may leave behind.
MIN_THETA = 1e-6


@dataclass(eq=False)
class SyntheticDataset:
    points: np.ndarray
    labels: np.ndarray
    seed: int
    kind: str
    num_classes: int = 2

    def __len__(self) -> int:
        return self.labels.shape[0]

    def split(self, test_fraction: float) -> Tuple['SyntheticDataset', 'SyntheticDataset']:
        """Train/test split; the points are already shuffled, so the tail is the test part."""
        if not 0 < test_fraction < 1:
            raise ConfigError(f"test fraction must lie in (0, 1), got {test_fraction}")
        n_test = max(1, int(round(len(self) * test_fraction)))
        cut = len(self) - n_test
        return (
            SyntheticDataset(self.points[:cut], self.labels[:cut], self.seed, self.kind,
                             self.num_classes),
            SyntheticDataset(self.points[cut:], self.labels[cut:], self.seed, self.kind,
                             self.num_classes),
        )


def gen_synthetic_dataset(
            kind: str,
            n: int,
            seed: int,
            num_classes: int = 2,
        ) -> SyntheticDataset:
    """
    gaussians: unit-variance clusters centred on a circle of radius 2, which
    for two classes puts them at (2, 0) and (-2, 0).
    spiral: interleaved noisy spiral arms, one per class.

    Labels are balanced within one and the samples are shuffled.
    """
    if kind not in DATASET_KINDS:
        raise ConfigError(f"unknown dataset kind {kind!r}, expected one of {DATASET_KINDS}")
    if num_classes < 2:
        raise ConfigError(f"need at least 2 classes, got {num_classes}")
    if n < 2 * num_classes:
        raise ConfigError(f"need at least {2 * num_classes} samples, got {n}")

    rng = make_rng(seed)
    labels = np.arange(n) % num_classes
    offset = 2 * np.pi * labels / num_classes

    if kind == 'gaussians':
        centers = 2 * np.stack([np.cos(offset), np.sin(offset)], axis=1)
        points = centers + rng.standard_normal((n, 2))
    else:
        t = rng.uniform(0.05, 1, n)
        angle = 3 * np.pi * t + offset + rng.normal(0, 0.15, n)
        points = 2 * t[:, None] * np.stack([np.cos(angle), np.sin(angle)], axis=1)

    order = rng.permutation(n)
    return SyntheticDataset(
        points=points[order].astype(DTYPE),
        labels=labels[order].astype(np.int64),
        seed=seed,
        kind=kind,
        num_classes=num_classes,
    )


@dataclass
class TrainConfig:
    epochs: int = 50
    batch_size: int = 32
    learning_rate: float = 0.05
    momentum: float = 0.9
    seed: int = 42
    hidden: Tuple[int, ...] = (8,)
    # One entry per hidden layer; a single entry is shared by all of them.
    quant: Tuple[QuantParams, ...] = field(
        default_factory=lambda: (QuantParams(8, 8.0, -0.25, 1.0),))
    bn_momentum: float = 0.1
    bn_eps: float = 1e-5
    learn_theta: bool = True

    def layer_quant(self, i: int) -> QuantParams:
        return self.quant[0] if len(self.quant) == 1 else self.quant[i]

    def validate(self) -> None:
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        # Batchnorm needs the statistics of at least two samples.
        if self.batch_size < 2:
            raise ConfigError(f"batch size must be >= 2, got {self.batch_size}")
        if not self.learning_rate > 0:
            raise ConfigError(f"learning rate must be > 0, got {self.learning_rate}")
        if not 0 <= self.momentum < 1:
            raise ConfigError(f"momentum must lie in [0, 1), got {self.momentum}")
        if not 0 < self.bn_momentum <= 1:
            raise ConfigError(f"batchnorm momentum must lie in (0, 1], got {self.bn_momentum}")
        if any(width < 1 for width in self.hidden):
            raise ConfigError(f"hidden widths must be >= 1, got {self.hidden}")
        if self.hidden and len(self.quant) not in (1, len(self.hidden)):
            raise ConfigError(
                f"got {len(self.quant)} quantizer settings for {len(self.hidden)} hidden layers")
        for q in self.quant:
            q.validate()

    @classmethod
    def from_config(cls, config, **overrides) -> 'TrainConfig':
        levels, theta, alpha, beta = config.TRAIN_QUANT
        values = dict(
            epochs=config.TRAIN_EPOCHS,
            batch_size=config.TRAIN_BATCH_SIZE,
            learning_rate=config.TRAIN_LEARNING_RATE,
            momentum=config.TRAIN_MOMENTUM,
            seed=config.DEFAULT_SEED,
            hidden=tuple(config.TRAIN_HIDDEN),
            quant=(QuantParams(int(levels), float(theta), float(alpha), float(beta)),),
            bn_momentum=config.BN_MOMENTUM,
        )
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)


class _Trainee:
    """Float64 parameters, momentum buffers and batchnorm statistics of the MLP."""

    def __init__(self, cfg: TrainConfig, in_features: int, num_classes: int,
                 rng: np.random.Generator):
        self.cfg = cfg
        self.params: Dict[str, np.ndarray] = {}
        self.running: Dict[str, np.ndarray] = {}
        self.quant = [cfg.layer_quant(i) for i in range(len(cfg.hidden))]

        width = in_features
        for i, out in enumerate(cfg.hidden):
            self.params[f'w{i}'] = rng.normal(0, math.sqrt(2 / width), (out, width))
            self.params[f'b{i}'] = np.zeros(out)
            self.params[f'gamma{i}'] = np.ones(out)
            self.params[f'beta{i}'] = np.zeros(out)
            self.params[f'theta{i}'] = np.array(self.quant[i].theta)
            self.running[f'mean{i}'] = np.zeros(out)
            self.running[f'var{i}'] = np.ones(out)
            width = out
        self.params['w_head'] = rng.normal(0, math.sqrt(1 / width), (num_classes, width))
        self.params['b_head'] = np.zeros(num_classes)
        self.velocity = {name: np.zeros_like(p) for name, p in self.params.items()}

    def _quant(self, i: int) -> QuantParams:
        return self.quant[i].with_theta(float(self.params[f'theta{i}']))

    def step(self, x: np.ndarray, labels: np.ndarray) -> float:
        """One forward/backward pass and SGD update on a mini-batch. Returns the loss."""
        n = x.shape[0]
        m = self.cfg.bn_momentum
        caches = []

        h = x
        for i in range(len(self.quant)):
            a = h @ self.params[f'w{i}'].T + self.params[f'b{i}']
            mean = a.mean(axis=0)
            var = a.var(axis=0)
            inv_std = 1 / np.sqrt(var + self.cfg.bn_eps)
            xhat = (a - mean) * inv_std
            z = self.params[f'gamma{i}'] * xhat + self.params[f'beta{i}']
            q = self._quant(i)
            y = lattice_index(q, z) * q.step
            caches.append((h, xhat, inv_std, z, q))
            self.running[f'mean{i}'] = (1 - m) * self.running[f'mean{i}'] + m * mean
            self.running[f'var{i}'] = (1 - m) * self.running[f'var{i}'] + m * var
            h = y

        logits = h @ self.params['w_head'].T + self.params['b_head']
        logits = logits - logits.max(axis=1, keepdims=True)
        log_probs = logits - np.log(np.exp(logits).sum(axis=1, keepdims=True))
        loss = float(-log_probs[np.arange(n), labels].mean())
        if not math.isfinite(loss):
            raise TrainingError("training diverged: loss is not finite")

        grads = {}
        d_logits = np.exp(log_probs)
        d_logits[np.arange(n), labels] -= 1
        d_logits /= n
        grads['w_head'] = d_logits.T @ h
        grads['b_head'] = d_logits.sum(axis=0)
        d_h = d_logits @ self.params['w_head']

        for i in reversed(range(len(self.quant))):
            h_in, xhat, inv_std, z, q = caches[i]
            d_z, d_theta = pqa_backward_ste(q, z, d_h)
            grads[f'theta{i}'] = np.array(d_theta if self.cfg.learn_theta else 0.0)
            grads[f'gamma{i}'] = (d_z * xhat).sum(axis=0)
            grads[f'beta{i}'] = d_z.sum(axis=0)
            d_xhat = d_z * self.params[f'gamma{i}']
            d_a = inv_std / n * (
                n * d_xhat - d_xhat.sum(axis=0) - xhat * (d_xhat * xhat).sum(axis=0))
            grads[f'w{i}'] = d_a.T @ h_in
            grads[f'b{i}'] = d_a.sum(axis=0)
            d_h = d_a @ self.params[f'w{i}']

        for name, grad in grads.items():
            v = self.velocity[name]
            v *= self.cfg.momentum
            v -= self.cfg.learning_rate * grad
            self.params[name] += v
        for i in range(len(self.quant)):
            self.params[f'theta{i}'] = np.maximum(self.params[f'theta{i}'], MIN_THETA)

        return loss

    def export(self) -> AnnModel:
        layers = []
        for i in range(len(self.quant)):
            layers.append(Linear(
                self.params[f'w{i}'].astype(DTYPE), self.params[f'b{i}'].astype(DTYPE)))
            layers.append(BatchNorm(
                gamma=self.params[f'gamma{i}'].astype(DTYPE),
                beta=self.params[f'beta{i}'].astype(DTYPE),
                running_mean=self.running[f'mean{i}'].astype(DTYPE),
                running_var=self.running[f'var{i}'].astype(DTYPE),
                eps=self.cfg.bn_eps,
            ))
            layers.append(Pqa(self._quant(i)))
        layers.append(Linear(
            self.params['w_head'].astype(DTYPE), self.params['b_head'].astype(DTYPE)))
        return AnnModel(layers)


def _batches(order: np.ndarray, batch_size: int) -> List[np.ndarray]:
    """Splits a permutation into mini-batches; a trailing single sample joins the one before."""
    batches = [order[start:start + batch_size] for start in range(0, len(order), batch_size)]
    if len(batches) > 1 and batches[-1].size < 2:
        batches[-2:] = [np.concatenate(batches[-2:])]
    return batches


def train_ann(cfg: TrainConfig, data: SyntheticDataset) -> AnnModel:
    cfg.validate()
    if len(data) < 2:
        raise ConfigError(f"need at least 2 training samples, got {len(data)}")

    rng = make_rng(cfg.seed)
    trainee = _Trainee(cfg, data.points.shape[1], data.num_classes, rng)
    x = data.points.astype(np.float64)

    loss = float('nan')
    for epoch in range(cfg.epochs):
        order = rng.permutation(len(data))
        losses = []
        for batch in _batches(order, cfg.batch_size):
            losses.append(trainee.step(x[batch], data.labels[batch]))
        loss = float(np.mean(losses)) if losses else loss
        logger.debug("Epoch %s/%s: loss %.4f", epoch + 1, cfg.epochs, loss)

    model = trainee.export()
    model.validate()
    logger.info(
        "Trained %s-layer MLP on %s %s samples, final loss %.4f",
        len(cfg.hidden) + 1, len(data), data.kind, loss)
    return model


def predict(model: Model, points: np.ndarray, T: int = 1) -> np.ndarray:
    if isinstance(model, SnnModel):
        return decode_prediction(run_snn(model, points, T))
    return model.predict(points)


def eval_accuracy(model: Model, data: SyntheticDataset, T: int = 1) -> float:
    """
    Fraction of samples whose argmax prediction equals the label. SNNs are run
    for T timesteps and decoded from the averaged head potential.
    """
    if len(data) == 0:
        return 0.0
    return float(np.mean(predict(model, data.points, T) == data.labels))
