import numpy as np
import pytest

from config import TestConfig
from polarspike.convert import convert_model, verify_equivalence
from polarspike.errors import ConfigError, QuantParamsError
from polarspike.layers import BatchNorm, Linear, Pqa
from polarspike.quant import QuantParams
from polarspike.trainer import (TrainConfig, eval_accuracy, gen_synthetic_dataset, predict,
                                train_ann)


def test_dataset_is_balanced_and_reproducible():
    a = gen_synthetic_dataset('gaussians', 100, seed=3)
    b = gen_synthetic_dataset('gaussians', 100, seed=3)

    assert len(a) == 100
    assert a.points.shape == (100, 2)
    assert a.points.dtype == np.float32
    assert np.bincount(a.labels).tolist() == [50, 50]
    np.testing.assert_array_equal(a.points, b.points)
    np.testing.assert_array_equal(a.labels, b.labels)


def test_dataset_depends_on_seed():
    a = gen_synthetic_dataset('spiral', 60, seed=1, num_classes=3)
    b = gen_synthetic_dataset('spiral', 60, seed=2, num_classes=3)

    assert np.bincount(a.labels).tolist() == [20, 20, 20]
    assert not np.array_equal(a.points, b.points)


def test_gaussian_clusters_sit_on_both_sides():
    data = gen_synthetic_dataset('gaussians', 2000, seed=0)

    assert data.points[data.labels == 0, 0].mean() == pytest.approx(2, abs=0.15)
    assert data.points[data.labels == 1, 0].mean() == pytest.approx(-2, abs=0.15)


@pytest.mark.parametrize('kind, n, num_classes', [
    ('moons', 100, 2),
    ('gaussians', 100, 1),
    ('gaussians', 3, 2),
])
def test_dataset_rejects_bad_arguments(kind, n, num_classes):
    with pytest.raises(ConfigError):
        gen_synthetic_dataset(kind, n, seed=0, num_classes=num_classes)


def test_split():
    data = gen_synthetic_dataset('gaussians', 100, seed=0)

    train, test = data.split(0.25)

    assert (len(train), len(test)) == (75, 25)
    np.testing.assert_array_equal(test.points, data.points[75:])
    with pytest.raises(ConfigError):
        data.split(1.0)


def test_train_config_from_config_keeps_overrides():
    cfg = TrainConfig.from_config(TestConfig(), epochs=3, hidden=None)

    assert cfg.epochs == 3
    assert cfg.hidden == tuple(TestConfig.TRAIN_HIDDEN)
    assert cfg.quant == (QuantParams(8, 8.0, -0.25, 1.0),)


@pytest.mark.parametrize('kwargs', [
    dict(epochs=0),
    dict(batch_size=0),
    dict(batch_size=1),
    dict(learning_rate=0.0),
    dict(momentum=1.0),
    dict(hidden=(0,)),
    dict(hidden=(4, 4, 4), quant=(QuantParams(8, 8.0, 0.0, 1.0),) * 2),
])
def test_train_config_validation(kwargs):
    with pytest.raises(ConfigError):
        TrainConfig(**kwargs).validate()


def test_train_config_checks_quantizers():
    with pytest.raises(QuantParamsError):
        TrainConfig(quant=(QuantParams(8, 8.0, -1.0, 1.0),)).validate()


def test_trained_model_layout():
    data = gen_synthetic_dataset('gaussians', 200, seed=1)

    model = train_ann(TrainConfig(epochs=2, hidden=(6, 4)), data)

    assert [type(layer) for layer in model.layers] == [
        Linear, BatchNorm, Pqa, Linear, BatchNorm, Pqa, Linear]
    assert model.layers[0].weight.shape == (6, 2)
    assert model.layers[-1].weight.shape == (2, 4)
    for layer in model.layers:
        if isinstance(layer, Linear):
            assert layer.weight.dtype == np.float32
    for pqa in model.pqa_layers:
        assert pqa.quant.levels == 8
        assert pqa.quant.theta > 0


def test_training_is_deterministic():
    data = gen_synthetic_dataset('gaussians', 200, seed=1)
    cfg = TrainConfig(epochs=3, seed=9)

    a = train_ann(cfg, data)
    b = train_ann(cfg, data)

    for la, lb in zip(a.layers, b.layers):
        if isinstance(la, Linear):
            np.testing.assert_array_equal(la.weight, lb.weight)
    assert a.pqa_layers[0].quant == b.pqa_layers[0].quant


def test_training_learns_gaussians():
    data = gen_synthetic_dataset('gaussians', 800, seed=42)
    train, test = data.split(0.25)

    model = train_ann(TrainConfig(epochs=20, seed=42), train)

    assert eval_accuracy(model, test) >= 0.9


def test_thresholds_can_stay_fixed():
    data = gen_synthetic_dataset('gaussians', 200, seed=1)

    model = train_ann(TrainConfig(epochs=2, learn_theta=False), data)

    assert model.pqa_layers[0].quant.theta == 8.0


def test_converted_model_predicts_like_the_ann():
    data = gen_synthetic_dataset('gaussians', 400, seed=5)
    model = train_ann(TrainConfig(epochs=5, seed=5), data)
    snn = convert_model(model)

    report = verify_equivalence(model, snn, data.points)

    assert report.index_mismatches == 0
    assert report.max_abs_diff <= 1e-4
    np.testing.assert_array_equal(predict(snn, data.points), predict(model, data.points))


def test_eval_accuracy_of_empty_data():
    data = gen_synthetic_dataset('gaussians', 10, seed=0)
    empty = type(data)(data.points[:0], data.labels[:0], 0, 'gaussians')

    assert eval_accuracy(convert_model(train_ann(TrainConfig(epochs=1), data)), empty) == 0.0


def test_smallest_batches_still_train():
    data = gen_synthetic_dataset('gaussians', 9, seed=2)

    model = train_ann(TrainConfig(epochs=1, batch_size=2), data)

    assert np.any(model.layers[1].running_mean != 0)


def test_training_needs_two_samples():
    data = gen_synthetic_dataset('gaussians', 4, seed=0)
    single = type(data)(data.points[:1], data.labels[:1], 0, 'gaussians')

    with pytest.raises(ConfigError):
        train_ann(TrainConfig(epochs=1), single)
