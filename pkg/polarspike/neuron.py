"""
The Augmented Integrate-and-Fire (AIF) neuron.

Per timestep:
    m = v + o                                    (integrate)
    s = clip(floor(m / theta_snn), c_neg, c_pos) (fire a signed spike count)
    v = m - theta_snn * s                        (soft reset)

No leak, no refractory period. Membrane potentials are kept in float64.
"""
from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np

from .errors import DimensionError, QuantParamsError
from .tensor import ACC_DTYPE, Tensor, check_finite

SPIKE_DTYPE = np.int32


@dataclass(frozen=True)
class AifParams:
    theta_snn: float
    c_neg: int
    c_pos: int
    v_init: float

    def validate(self) -> None:
        if not np.isfinite(self.theta_snn) or self.theta_snn <= 0:
            raise QuantParamsError(
                "theta_snn_positive", f"theta_snn must be > 0, got {self.theta_snn}")
        if not self.c_neg <= 0 < self.c_pos:
            raise QuantParamsError(
                "spike_bounds",
                f"need c_neg <= 0 < c_pos, got c_neg={self.c_neg}, c_pos={self.c_pos}")
        if not np.isfinite(self.v_init):
            raise QuantParamsError("v_init_finite", "v_init must be finite")


@dataclass
class AifState:
    """Membrane potentials v of a population. Owned by a single run."""
    v: np.ndarray


def aif_init(params: AifParams, n: Union[int, Tuple[int, ...]]) -> AifState:
    """Returns a state of `n` neurons (or a population of shape `n`) at v_init."""
    shape = (n,) if isinstance(n, (int, np.integer)) else tuple(n)
    if not shape or any(d < 1 for d in shape):
        raise DimensionError(f"neuron population must be non-empty, got {n!r}")
    return AifState(v=np.full(shape, params.v_init, dtype=ACC_DTYPE))


def aif_step(
            params: AifParams,
            state: AifState,
            input_current: Tensor,
        ) -> Tuple[np.ndarray, AifState]:
    """
    Advances `state` by one timestep in place and returns the emitted spike
    counts together with the state.
    """
    if input_current.shape != state.v.shape:
        raise DimensionError(
            f"input current shape {input_current.shape} doesn't match "
            f"state shape {state.v.shape}")
    check_finite(input_current, "input current")

    m = state.v + np.asarray(input_current, dtype=ACC_DTYPE)
    s = np.clip(np.floor(m / params.theta_snn), params.c_neg, params.c_pos)
    state.v = m - params.theta_snn * s
    return s.astype(SPIKE_DTYPE), state


def aif_reset(params: AifParams, state: AifState) -> AifState:
    state.v = np.full(state.v.shape, params.v_init, dtype=ACC_DTYPE)
    return state
