"""
Information entropy of quantized activations under a standard-normal input.

All entropies are in nats unless a `base` is given. 0 * ln 0 is taken as 0.

Two forms of the PQA entropy are available:

* ``printed``: H1 + H2 + H3, the lower tail mass below (k_neg - 1/2) * theta / L,
  one term per lattice cell k_neg..k_pos, and the upper tail mass above
  (k_pos - 1/2) * theta / L. The top cell is counted twice, so the masses
  add up to 1 + p(k_pos).
* ``merged``: the actual output distribution of PQA, tails lumped into the
  boundary cells, one term per output value. Its masses add up to exactly 1.
"""
import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Dict, Iterator, Tuple

import numpy as np
from scipy.special import entr, ndtr

from .errors import ConfigError
from .quant import QuantParams, lattice_index

logger = logging.getLogger('polarspike.entropy')

FORMULAS = ('printed', 'merged')

PUBLISHED_RELU_RATIO = 0.69

RELU_RATIO_NOTE = (
    "The closed form 0.5*ln2 + 0.25*ln(2*pi) + 0.25 evaluates to {value:.5f} nats, "
    "a ratio of {ratio:.4f} to the normal entropy; the published text states "
    "approximately {published:.2f}. The formula's value is reported.")


def std_normal_cdf(x):
    """Phi(x), the standard normal CDF. Accepts scalars and arrays."""
    return ndtr(x)


def interval_mass(a, b) -> np.ndarray:
    """
    P(a <= X < b) for X ~ N(0, 1), taken from the upper tail when a >= 0 so
    that tiny masses far from the origin don't cancel out.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    return np.where(a >= 0, ndtr(-a) - ndtr(-b), ndtr(b) - ndtr(a))


def _in_base(nats: float, base: float) -> float:
    return nats if base == math.e else nats / math.log(base)


def entropy_bn(base: float = math.e) -> float:
    """Differential entropy of N(0, 1): 0.5 * ln(2 * pi * e)."""
    return _in_base(0.5 * math.log(2 * math.pi * math.e), base)


@dataclass(frozen=True)
class ReluEntropy:
    nats: float
    ratio: float
    atom_term: float
    note: str


def entropy_relu() -> ReluEntropy:
    """
    Mixed entropy of ReLU(X), X ~ N(0, 1): the 0.5 point mass at zero plus the
    half-normal density, evaluated as the closed form is written.
    """
    atom = 0.5 * math.log(2)
    nats = atom + 0.25 * math.log(2 * math.pi) + 0.25
    ratio = nats / entropy_bn()
    note = RELU_RATIO_NOTE.format(value=nats, ratio=ratio, published=PUBLISHED_RELU_RATIO)
    logger.warning(note)
    return ReluEntropy(nats=nats, ratio=ratio, atom_term=atom, note=note)


def pqa_printed_masses(q: QuantParams) -> Tuple[float, np.ndarray, float]:
    """Lower tail, per-cell masses p(k_neg..k_pos) and upper tail of the printed form."""
    q.validate(closed_alpha=True)
    s = q.step
    k = np.arange(q.k_neg, q.k_pos + 1, dtype=np.float64)
    lower = float(ndtr((q.k_neg - 0.5) * s))
    cells = interval_mass((k - 0.5) * s, (k + 0.5) * s)
    upper = float(ndtr(-(q.k_pos - 0.5) * s))
    return lower, cells, upper


def pqa_distribution(q: QuantParams) -> Tuple[np.ndarray, np.ndarray]:
    """Lattice indices k_neg..k_pos and the probability PQA outputs each of them."""
    q.validate(closed_alpha=True)
    s = q.step
    k = np.arange(q.k_neg, q.k_pos + 1, dtype=np.float64)
    lo = (k - 0.5) * s
    hi = (k + 0.5) * s
    lo[0] = -np.inf
    hi[-1] = np.inf
    return k.astype(np.int64), interval_mass(lo, hi)


def pqa_entropy_terms(q: QuantParams) -> Tuple[float, float, float]:
    """(H1, H2, H3) of the printed form, in nats."""
    lower, cells, upper = pqa_printed_masses(q)
    return float(entr(lower)), float(entr(cells).sum()), float(entr(upper))


def entropy_pqa(
            q: QuantParams,
            formula: str = 'printed',
            base: float = math.e,
        ) -> float:
    if formula == 'printed':
        nats = sum(pqa_entropy_terms(q))
    elif formula == 'merged':
        _, probs = pqa_distribution(q)
        nats = float(entr(probs).sum())
    else:
        raise ConfigError(f"unknown entropy formula {formula!r}, expected one of {FORMULAS}")
    return _in_base(nats, base)


def qa_distribution(q: QuantParams) -> np.ndarray:
    """Probabilities of the QA outputs theta * k / L for k = 0..L."""
    q.validate(closed_alpha=True)
    s = q.step
    k = np.arange(q.levels + 1, dtype=np.float64)
    lo = k * s
    hi = (k + 1) * s
    lo[0] = -np.inf
    hi[-1] = np.inf
    return interval_mass(lo, hi)


def entropy_qa(q: QuantParams, base: float = math.e) -> float:
    """Entropy of the floor-based QA output; alpha and beta are ignored."""
    return _in_base(float(entr(qa_distribution(q)).sum()), base)


def entropy_qa_max(levels: int, base: float = math.e) -> float:
    """ln(L + 1), reached when all L + 1 QA outputs are equally likely."""
    return _in_base(math.log(levels + 1), base)


def plugin_entropy(samples: np.ndarray) -> float:
    """Plug-in (empirical frequency) entropy of discrete samples, in nats."""
    _, counts = np.unique(samples, return_counts=True)
    return float(entr(counts / samples.size).sum())


def monte_carlo_pqa_entropy(q: QuantParams, n: int, rng: np.random.Generator) -> float:
    return plugin_entropy(lattice_index(q, rng.standard_normal(n)))


def monte_carlo_bn_entropy(n: int, rng: np.random.Generator, bins: int = 400) -> float:
    """Histogram estimate of the differential entropy of N(0, 1) samples."""
    x = rng.standard_normal(n)
    counts, edges = np.histogram(x, bins=bins)
    p = counts / n
    return float(entr(p).sum() + np.sum(p * np.log(np.diff(edges))))


class Regime(str, Enum):
    LOSS = 'loss'
    NEAR_LOSSLESS = 'near_lossless'
    DISTORTION = 'distortion'


def classify_ratio(ratio: float, tau: float = 0.02) -> Regime:
    if ratio < 1 - tau:
        return Regime.LOSS
    if ratio > 1 + tau:
        return Regime.DISTORTION
    return Regime.NEAR_LOSSLESS


def regime_classify(q: QuantParams, tau: float = 0.02, formula: str = 'printed') -> Regime:
    return classify_ratio(entropy_pqa(q, formula) / entropy_bn(), tau)


@dataclass
class EntropyGrid:
    """
    R = H_PQA / H_BN over alpha in {-1, -1 + 1/L, ..., 0} (rows) and
    beta in {1/L, ..., 1} (columns).
    """
    levels: int
    theta: float
    formula: str
    alpha_values: np.ndarray
    beta_values: np.ndarray
    ratios: np.ndarray

    def quant_params(self, alpha: float, beta: float) -> QuantParams:
        return QuantParams(self.levels, self.theta, float(alpha), float(beta))

    def cells(self) -> Iterator[Tuple[float, float, float]]:
        """(alpha, beta, R) in row-major order: alpha ascending, then beta ascending."""
        for i, alpha in enumerate(self.alpha_values):
            for j, beta in enumerate(self.beta_values):
                yield float(alpha), float(beta), float(self.ratios[i, j])

    def best_cell(self) -> Tuple[float, float, float]:
        """The cell whose R is closest to 1."""
        return min(self.cells(), key=lambda cell: abs(cell[2] - 1))

    def max_cell(self) -> Tuple[float, float, float]:
        return max(self.cells(), key=lambda cell: cell[2])

    def as_dict(self) -> dict:
        return {
            'L': self.levels,
            'theta': self.theta,
            'formula': self.formula,
            'alpha_values': [float(a) for a in self.alpha_values],
            'beta_values': [float(b) for b in self.beta_values],
            'ratios': [[float(r) for r in row] for row in self.ratios],
        }

    def heatmap_pixels(self, cell_size: int = 16) -> np.ndarray:
        """
        RGB image of R - 1: blue for loss, white for lossless, red for
        distortion. beta grows upwards, alpha to the right.
        """
        d = np.clip(self.ratios.T[::-1] - 1, -1, 1)
        fade = 255 * (1 - np.abs(d))
        red = np.where(d < 0, fade, 255)
        green = fade
        blue = np.where(d > 0, fade, 255)
        rgb = np.stack([red, green, blue], axis=-1).round().astype(np.uint8)
        return rgb.repeat(cell_size, axis=0).repeat(cell_size, axis=1)

    def render_ppm(self, path: str, cell_size: int = 16) -> None:
        """Writes the heatmap as a binary portable pixel map (P6)."""
        pixels = self.heatmap_pixels(cell_size)
        height, width, _ = pixels.shape
        with open(path, 'wb') as f:
            f.write(f"P6\n{width} {height}\n255\n".encode('ascii'))
            f.write(pixels.tobytes())


def entropy_ratio_grid(
            levels: int,
            theta: float,
            formula: str = 'printed',
            stride: int = 1,
        ) -> EntropyGrid:
    """
    Evaluates R on the 1/L lattice of (alpha, beta). A stride m > 1 keeps every
    m-th lattice value, counted from alpha = 0 and beta = m / L.
    """
    if levels < 1:
        raise ConfigError(f"L must be >= 1, got {levels}")
    if not (math.isfinite(theta) and theta > 0):
        raise ConfigError(f"theta must be finite and > 0, got {theta}")
    if formula not in FORMULAS:
        raise ConfigError(f"unknown entropy formula {formula!r}, expected one of {FORMULAS}")
    if not 1 <= stride <= levels:
        raise ConfigError(f"grid stride must lie in [1, L], got {stride}")

    alpha_values = -np.arange(0, levels + 1, stride)[::-1] / levels
    beta_values = np.arange(stride, levels + 1, stride) / levels
    h_bn = entropy_bn()
    ratios = np.array([
        [
            entropy_pqa(QuantParams(levels, float(theta), float(a), float(b)), formula) / h_bn
            for b in beta_values
        ]
        for a in alpha_values
    ])
    logger.info(
        "Entropy grid L=%s theta=%s (%s): %s cells, max R=%.4f",
        levels, theta, formula, ratios.size, ratios.max())
    return EntropyGrid(levels, float(theta), formula, alpha_values, beta_values, ratios)


def regime_counts(grid: EntropyGrid, tau: float = 0.02) -> Dict[str, int]:
    """Number of grid cells in each regime."""
    found = [classify_ratio(r, tau) for _, _, r in grid.cells()]
    return {regime.value: found.count(regime) for regime in Regime}
