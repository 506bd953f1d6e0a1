import csv

import numpy as np
import pytest

from vocorate.config import RunConfig
from vocorate.errors import NumericError, ValidationError
from vocorate.mlp import flatten_params
from vocorate.synthetic import SyntheticDataset, build_dataset
from vocorate.training import LOG_COLUMNS, prepare_inputs, train, write_training_log

SMALL = dict(count=12, n_patches=8, dim=4)


def small_config(**overrides):
    base = dict(seed=3, steps=40, batch_size=8, n_patches=8, dim=4, count=12)
    base.update(overrides)
    return RunConfig(**base)


@pytest.fixture(scope="module")
def dataset():
    return build_dataset(12, seed=3, n_patches=8, dim=4)


def test_prepare_inputs_shapes_and_calibration(dataset):
    config = small_config()
    features, targets, gamma_a = prepare_inputs(dataset, config)
    assert len(features) == len(dataset) == targets.shape[0]
    assert all(f.assembled.shape == (2 * 4 + 2,) for f in features)
    assert gamma_a > 0
    assert np.all(targets >= 0) and np.all(targets <= 1)


def test_prepare_inputs_respects_fixed_gamma(dataset):
    _, targets_auto, gamma_auto = prepare_inputs(dataset, small_config())
    _, targets_one, gamma_one = prepare_inputs(dataset, small_config(gamma_a=1.0))
    assert gamma_one == 1.0
    assert gamma_auto != 1.0
    assert targets_auto.max() > targets_one.max()


def test_empty_dataset_rejected():
    with pytest.raises(ValidationError):
        prepare_inputs(SyntheticDataset(scenes=[]), small_config())


def test_training_is_deterministic(dataset):
    config = small_config()
    a = train(dataset, config)
    b = train(dataset, config)
    np.testing.assert_array_equal(flatten_params(a.params), flatten_params(b.params))
    assert a.log_rows == b.log_rows


def test_training_reduces_total_loss(dataset):
    result = train(dataset, small_config(steps=150))
    first = np.mean([row[3] for row in result.log_rows[:10]])
    last = np.mean([row[3] for row in result.log_rows[-10:]])
    assert last < first


def test_numeric_failure_reports_step(dataset, monkeypatch):
    def explode(*args, **kwargs):
        raise NumericError("non-finite loss at sample 2")

    monkeypatch.setattr("vocorate.training.joint_loss_and_gradients", explode)
    with pytest.raises(NumericError, match="step 0"):
        train(dataset, small_config())


def test_log_roundtrip(tmp_path, dataset):
    result = train(dataset, small_config(steps=5))
    path = tmp_path / "log.csv"
    write_training_log(result.log_rows, path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == list(LOG_COLUMNS)
    assert len(rows) == 1 + 5
    assert int(rows[1][0]) == 0
    assert float(rows[1][1]) == pytest.approx(result.log_rows[0][1], rel=1e-9)
