import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from polarspike import entropy
from polarspike.entropy import Regime
from polarspike.errors import ConfigError, QuantParamsError
from polarspike.quant import QuantParams
from polarspike.tensor import make_rng

from .utils import random_quant

H_BN = 1.4189385


def test_entropy_bn():
    assert entropy.entropy_bn() == pytest.approx(H_BN, abs=1e-7)
    assert entropy.entropy_bn(base=2) == pytest.approx(H_BN / math.log(2), abs=1e-7)


def test_std_normal_cdf():
    assert entropy.std_normal_cdf(1.0) == pytest.approx(0.8413447, abs=1e-7)
    assert entropy.std_normal_cdf(0.0) == 0.5


def test_interval_mass_far_tail():
    # 1 - Phi(8) would cancel to zero in double precision.
    mass = entropy.interval_mass(8.0, 9.0)

    assert 0 < mass < 1e-14
    assert mass == pytest.approx(entropy.std_normal_cdf(-8.0) - entropy.std_normal_cdf(-9.0))


def test_entropy_relu_formula_value():
    result = entropy.entropy_relu()

    assert result.nats == pytest.approx(1.05604, abs=1e-5)
    assert result.ratio == pytest.approx(0.7442, abs=1e-4)
    assert result.atom_term == pytest.approx(0.5 * math.log(2))
    assert '0.69' in result.note


def test_printed_entropy_near_lossless_cell():
    q = QuantParams(8, 8.0, 0.0, 1 / 8)

    H = entropy.entropy_pqa(q)

    assert H == pytest.approx(1.4368, abs=1e-3)
    assert H / H_BN == pytest.approx(1.0126, abs=1e-3)
    assert entropy.regime_classify(q) is Regime.NEAR_LOSSLESS


def test_merged_entropy_of_the_same_cell():
    q = QuantParams(8, 8.0, 0.0, 1 / 8)

    assert entropy.entropy_pqa(q, 'merged') / H_BN == pytest.approx(0.4356, abs=1e-3)


def test_printed_terms_add_up():
    q = QuantParams(8, 1.0, -0.5, 0.75)

    H1, H2, H3 = entropy.pqa_entropy_terms(q)

    assert entropy.entropy_pqa(q) == pytest.approx(H1 + H2 + H3)
    assert min(H1, H2, H3) >= 0


def test_printed_masses_count_the_top_cell_twice():
    q = QuantParams(8, 8.0, -0.25, 1.0)

    lower, cells, upper = entropy.pqa_printed_masses(q)

    assert len(cells) == q.k_pos - q.k_neg + 1
    assert lower + cells.sum() + upper == pytest.approx(1 + cells[-1])


def test_merged_distribution_sums_to_one():
    q = QuantParams(8, 8.0, -0.25, 1.0)

    k, probs = entropy.pqa_distribution(q)

    np.testing.assert_array_equal(k, np.arange(-2, 9))
    assert probs.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.all(probs >= 0)


def test_symmetric_clip_tends_to_a_fair_coin():
    q = QuantParams(8, 1e-5, -0.5, 1.0)

    assert entropy.entropy_pqa(q) == pytest.approx(math.log(2), abs=1e-3)
    assert entropy.entropy_pqa(q, base=2) == pytest.approx(1.0, abs=2e-3)


def test_degenerate_single_level():
    q = QuantParams(1, 100.0, -1.0, 1.0)

    assert entropy.entropy_pqa(q) < 1e-4


def test_unknown_formula():
    with pytest.raises(ConfigError):
        entropy.entropy_pqa(QuantParams(1, 1.0, 0.0, 1.0), formula='other')


def test_entropy_accepts_closed_alpha_only():
    entropy.entropy_pqa(QuantParams(4, 1.0, -1.0, 1.0))
    with pytest.raises(QuantParamsError):
        entropy.entropy_pqa(QuantParams(4, 1.0, -1.25, 1.0))


def test_qa_distribution_and_entropy():
    q = QuantParams(8, 8.0, 0.0, 1.0)

    probs = entropy.qa_distribution(q)

    assert len(probs) == 9
    assert probs.sum() == pytest.approx(1.0, abs=1e-12)
    assert probs[0] == pytest.approx(entropy.std_normal_cdf(1.0))
    assert 0 < entropy.entropy_qa(q) < entropy.entropy_qa_max(8)
    assert entropy.entropy_qa_max(8) == pytest.approx(math.log(9))


def test_pqa_beats_qa_on_fine_lattices():
    q = QuantParams(8, 1.0, -0.5, 1.0)

    assert entropy.entropy_pqa(q, 'merged') > entropy.entropy_qa(q)


def test_plugin_entropy():
    assert entropy.plugin_entropy(np.array([1, 1, 2, 2])) == pytest.approx(math.log(2))
    assert entropy.plugin_entropy(np.zeros(10)) == 0


def test_monte_carlo_matches_merged_closed_form():
    q = QuantParams(8, 8.0, -0.25, 1.0)

    estimate = entropy.monte_carlo_pqa_entropy(q, 200_000, make_rng(3))

    assert estimate == pytest.approx(entropy.entropy_pqa(q, 'merged'), abs=0.01)


def test_monte_carlo_bn_entropy():
    assert entropy.monte_carlo_bn_entropy(200_000, make_rng(5)) == pytest.approx(H_BN, abs=0.02)


@pytest.mark.parametrize('ratio, regime', [
    (0.5, Regime.LOSS),
    (0.97, Regime.LOSS),
    (0.99, Regime.NEAR_LOSSLESS),
    (1.0, Regime.NEAR_LOSSLESS),
    (1.015, Regime.NEAR_LOSSLESS),
    (1.05, Regime.DISTORTION),
])
def test_classify_ratio(ratio, regime):
    assert entropy.classify_ratio(ratio) is regime


def test_grid_axes():
    grid = entropy.entropy_ratio_grid(8, 8.0)

    np.testing.assert_allclose(grid.alpha_values, np.arange(-8, 1) / 8)
    np.testing.assert_allclose(grid.beta_values, np.arange(1, 9) / 8)
    assert grid.ratios.shape == (9, 8)
    cells = list(grid.cells())
    assert len(cells) == 72
    assert cells[0][:2] == (-1.0, 0.125)
    assert cells[-1][:2] == (0.0, 1.0)


def test_grid_reference_cells():
    grid = entropy.entropy_ratio_grid(8, 8.0)
    lookup = {(a, b): r for a, b, r in grid.cells()}

    assert lookup[(0.0, 0.125)] == pytest.approx(1.0126, abs=1e-3)
    assert lookup[(-1.0, 1.0)] == pytest.approx(1.0284, abs=1e-3)
    assert grid.max_cell()[2] == grid.ratios.max()
    # The printed upper tail re-counts the top cell, which peaks at the narrowest beta.
    # Alphas below -1/2 only add tail cells of negligible mass.
    alpha, beta, ratio = grid.max_cell()
    assert beta == 0.125
    assert alpha <= -0.5
    assert ratio == pytest.approx(1.141, abs=2e-3)
    assert lookup[(-1.0, 0.125)] == pytest.approx(ratio, abs=1e-9)
    assert abs(grid.best_cell()[2] - 1) <= abs(lookup[(0.0, 0.125)] - 1)


def test_grid_stride():
    grid = entropy.entropy_ratio_grid(8, 8.0, stride=2)

    np.testing.assert_allclose(grid.alpha_values, [-1, -0.75, -0.5, -0.25, 0])
    np.testing.assert_allclose(grid.beta_values, [0.25, 0.5, 0.75, 1])


@pytest.mark.parametrize('kwargs', [
    dict(levels=0, theta=1.0),
    dict(levels=4, theta=0.0),
    dict(levels=4, theta=float('inf')),
    dict(levels=4, theta=1.0, formula='other'),
    dict(levels=4, theta=1.0, stride=5),
])
def test_grid_rejects_bad_arguments(kwargs):
    with pytest.raises(ConfigError):
        entropy.entropy_ratio_grid(**kwargs)


def test_grid_as_dict_and_regime_counts():
    grid = entropy.entropy_ratio_grid(4, 4.0, formula='merged')

    document = grid.as_dict()
    counts = entropy.regime_counts(grid)

    assert document['L'] == 4
    assert document['formula'] == 'merged'
    assert len(document['ratios']) == 5
    assert len(document['ratios'][0]) == 4
    assert sum(counts.values()) == 20
    assert set(counts) == {'loss', 'near_lossless', 'distortion'}


def test_heatmap_colors():
    grid = entropy.EntropyGrid(
        levels=1, theta=1.0, formula='printed',
        alpha_values=np.array([-1.0, 0.0]), beta_values=np.array([1.0]),
        ratios=np.array([[0.0], [2.0]]))

    pixels = grid.heatmap_pixels(cell_size=1)

    assert pixels.shape == (1, 2, 3)
    assert tuple(pixels[0, 0]) == (0, 0, 255)
    assert tuple(pixels[0, 1]) == (255, 0, 0)


def test_render_ppm(tmp_path):
    grid = entropy.entropy_ratio_grid(2, 2.0)
    path = tmp_path / 'grid.ppm'

    grid.render_ppm(str(path), cell_size=4)

    data = path.read_bytes()
    header = b"P6\n12 8\n255\n"
    assert data.startswith(header)
    assert len(data) == len(header) + 8 * 12 * 3


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_wider_clip_range_never_loses_entropy(seed):
    rng = make_rng(seed)
    narrow = random_quant(rng, theta=float(rng.uniform(0.1, 20)))
    k_neg = int(rng.integers(-narrow.levels + 1, narrow.k_neg + 1))
    k_pos = int(rng.integers(narrow.k_pos, narrow.levels + 1))
    wide = QuantParams(narrow.levels, narrow.theta, k_neg / narrow.levels, k_pos / narrow.levels)

    assert entropy.entropy_pqa(wide, 'merged') >= entropy.entropy_pqa(narrow, 'merged') - 1e-12
    # QA keeps only the non-negative half of the lattice.
    one_sided = QuantParams(narrow.levels, narrow.theta, 0.0, 1.0)
    full = QuantParams(narrow.levels, narrow.theta, -1.0, 1.0)
    assert entropy.entropy_qa(one_sided) <= entropy.entropy_qa_max(narrow.levels)
    assert entropy.entropy_pqa(full, 'merged') >= entropy.entropy_pqa(one_sided, 'merged')


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from(entropy.FORMULAS))
def test_ratio_does_not_depend_on_log_base(seed, formula):
    rng = make_rng(seed)
    q = random_quant(rng, theta=float(rng.uniform(0.05, 30)))

    nats = entropy.entropy_pqa(q, formula) / entropy.entropy_bn()
    bits = entropy.entropy_pqa(q, formula, base=2) / entropy.entropy_bn(base=2)

    assert bits == pytest.approx(nats, rel=1e-12)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_monte_carlo_matches_merged_closed_form_for_random_params(seed):
    rng = make_rng(seed)
    q = random_quant(rng, theta=float(rng.uniform(0.1, 20)))

    estimate = entropy.monte_carlo_pqa_entropy(q, 200_000, rng)

    assert estimate == pytest.approx(entropy.entropy_pqa(q, 'merged'), abs=0.02)
