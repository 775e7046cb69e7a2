"""
The Polarity Quantized Activation (PQA), the clipped floor-based QA baseline and
the straight-through gradient used to train through them.

PQA maps x to theta * clip(round(x * L / theta) / L, alpha, beta). The rounding
is round-half-up, computed as floor((x + step / 2) / step) with step = theta / L.
That is literally the first firing step of an AIF neuron whose membrane starts at
half its threshold, which makes T=1 conversion exact rather than approximate.
"""
from dataclasses import dataclass, replace
from typing import Tuple

import numpy as np

from .errors import QuantParamsError
from .tensor import ACC_DTYPE, DTYPE, Tensor

# alpha * L and beta * L must be integers within this tolerance.
INTEGRALITY_TOLERANCE = 1e-9


@dataclass(frozen=True)
class QuantParams:
    """
    PQA hyperparameters of one layer.

    levels: L, number of positive lattice steps per threshold.
    theta: the learnable quantization threshold.
    alpha, beta: lower and upper clip bounds as fractions of theta.
    """
    levels: int
    theta: float
    alpha: float
    beta: float

    @property
    def step(self) -> float:
        """Lattice spacing theta / L."""
        return self.theta / self.levels

    @property
    def k_neg(self) -> int:
        return int(round(self.alpha * self.levels))

    @property
    def k_pos(self) -> int:
        return int(round(self.beta * self.levels))

    def validate(self, closed_alpha: bool = False) -> None:
        validate_quant_params(self, closed_alpha=closed_alpha)

    def with_theta(self, theta: float) -> 'QuantParams':
        return replace(self, theta=float(theta))


def validate_quant_params(q: QuantParams, closed_alpha: bool = False) -> None:
    """
    Raises QuantParamsError naming the first violated constraint.

    The activation requires -1 < alpha. The entropy sweeps also visit the closed
    endpoint alpha = -1, which they request with closed_alpha=True.
    """
    if isinstance(q.levels, bool) or not isinstance(q.levels, (int, np.integer)):
        raise QuantParamsError("levels_integer", f"L must be an integer, got {q.levels!r}")
    if q.levels < 1:
        raise QuantParamsError("levels_positive", f"L must be >= 1, got {q.levels}")
    if not np.isfinite(q.theta) or q.theta <= 0:
        raise QuantParamsError("theta_positive", f"theta must be > 0, got {q.theta}")

    alpha_ok = -1 <= q.alpha <= 0 if closed_alpha else -1 < q.alpha <= 0
    if not alpha_ok:
        raise QuantParamsError(
            "alpha_range", f"alpha must lie in (-1, 0], got {q.alpha}")
    if not 0 < q.beta <= 1:
        raise QuantParamsError(
            "beta_range", f"beta must lie in (0, 1], got {q.beta}")

    for name, value in (("alpha", q.alpha), ("beta", q.beta)):
        scaled = value * q.levels
        if abs(scaled - round(scaled)) > INTEGRALITY_TOLERANCE:
            raise QuantParamsError(
                f"{name}_integral",
                f"{name} * L must be an integer, got {scaled:g}")


def lattice_index(q: QuantParams, x: Tensor) -> np.ndarray:
    """
    Returns the clipped lattice index k of every element, as float64 integers
    in [alpha * L, beta * L].
    """
    step = q.step
    u = np.asarray(x, dtype=ACC_DTYPE)
    k = np.floor((u + step / 2) / step)
    return np.clip(k, q.k_neg, q.k_pos)


def pqa_forward(q: QuantParams, x: Tensor) -> Tensor:
    """Expects params that passed QuantParams.validate(), see layers.Pqa."""
    return (lattice_index(q, x) * q.step).astype(DTYPE)


def qa_forward(q: QuantParams, x: Tensor) -> Tensor:
    """
    The traditional quantized activation theta * clip(floor(x * L / theta) / L, 0, 1).
    alpha and beta of `q` are ignored.
    """
    step = q.step
    k = np.clip(np.floor(np.asarray(x, dtype=ACC_DTYPE) / step), 0, q.levels)
    return (k * step).astype(DTYPE)


def pqa_backward_ste(
            q: QuantParams,
            x: Tensor,
            upstream_grad: Tensor,
        ) -> Tuple[Tensor, float]:
    """
    Straight-through gradient of pqa_forward.

    Rounding passes gradients unchanged, the clip gates them: grad_x is the
    upstream gradient where alpha*theta <= x <= beta*theta and zero elsewhere.
    Saturated elements contribute upstream * alpha (below) or upstream * beta
    (above) to the gradient of theta.
    """
    x = np.asarray(x)
    upstream_grad = np.asarray(upstream_grad)
    if x.shape != upstream_grad.shape:
        raise ValueError(
            f"gradient shape {upstream_grad.shape} doesn't match input {x.shape}")

    low = q.alpha * q.theta
    high = q.beta * q.theta
    below = x < low
    above = x > high

    grad_x = np.where(below | above, 0, upstream_grad).astype(upstream_grad.dtype)
    theta_factor = np.where(below, q.alpha, np.where(above, q.beta, 0.0))
    grad_theta = float(np.sum(upstream_grad.astype(ACC_DTYPE) * theta_factor))
    return grad_x, grad_theta
