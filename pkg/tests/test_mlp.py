import math

import numpy as np
import pytest

from vocorate.errors import FormatError, NumericError, ValidationError
from vocorate.gradcheck import finite_difference_gradient, relative_error
from vocorate.mlp import (
    MlpParams,
    adam_update,
    flatten_gradients,
    flatten_params,
    init_params,
    load_checkpoint,
    mlp_backward,
    mlp_forward,
    optimizer_step,
    save_checkpoint,
    set_flat_params,
)
from vocorate.rng import RngState


def straight_line_forward(params, x):
    """Independent re-evaluation with pure-python loops; no numpy shortcuts."""
    h = list(x)
    n_layers = len(params.weights)
    for l in range(n_layers):
        w, b = params.weights[l], params.biases[l]
        out = []
        for i in range(w.shape[0]):
            acc = float(b[i])
            for j in range(w.shape[1]):
                acc += float(w[i, j]) * h[j]
            out.append(acc)
        if l < n_layers - 1:
            out = [math.tanh(v) for v in out]
        h = out
    return np.asarray(h)


def single_layer(weight, bias):
    return MlpParams(weights=[np.asarray(weight, dtype=float)],
                     biases=[np.asarray(bias, dtype=float)])


class TestForward:
    def test_zero_params_map_to_zero(self):
        params = init_params(4, 3, 3, 2, RngState(0))
        for w in params.weights:
            w[...] = 0.0
        out, _ = mlp_forward(params, np.ones(4))
        np.testing.assert_array_equal(out, np.zeros(2))

    def test_identity_single_layer(self):
        params = single_layer(np.eye(3), np.zeros(3))
        v = np.array([0.5, -1.25, 3.0])
        out, _ = mlp_forward(params, v)
        np.testing.assert_array_equal(out, v)

    def test_matches_independent_straight_line_evaluation(self):
        rng = RngState(11)
        for trial in range(10):
            params = init_params(6, 5, 4, 3, rng.derive(trial))
            x = rng.normal(size=6)
            out, _ = mlp_forward(params, x)
            np.testing.assert_allclose(out, straight_line_forward(params, x), rtol=1e-12)

    def test_dimension_mismatch_rejected(self):
        params = init_params(4, 3, 3, 2, RngState(0))
        with pytest.raises(ValidationError):
            mlp_forward(params, np.ones(5))


class TestBackward:
    def test_zero_output_gradient_gives_zero_gradients(self):
        params = init_params(4, 3, 3, 2, RngState(3))
        _, cache = mlp_forward(params, np.ones(4))
        grads = mlp_backward(params, cache, np.zeros(2))
        assert not flatten_gradients(grads).any()
        assert not grads.input.any()

    def test_single_linear_layer_weight_gradient_is_input(self):
        # loss = output[0] of out = W x, so d loss / d W[0, j] = x_j
        params = single_layer(np.zeros((2, 3)), np.zeros(2))
        x = np.array([1.5, -2.0, 0.25])
        _, cache = mlp_forward(params, x)
        grads = mlp_backward(params, cache, np.array([1.0, 0.0]))
        np.testing.assert_array_equal(grads.weights[0][0], x)
        np.testing.assert_array_equal(grads.weights[0][1], np.zeros(3))

    def test_matches_finite_differences(self):
        rng = RngState(5)
        worst = 0.0
        for trial in range(20):
            params = init_params(5, 6, 5, 3, rng.derive(trial))
            x = rng.normal(size=5)
            w = rng.normal(size=3)
            _, cache = mlp_forward(params, x)
            analytic = flatten_gradients(mlp_backward(params, cache, w))
            probe = params.copy()

            def f(flat):
                set_flat_params(probe, flat)
                out, _ = mlp_forward(probe, x)
                return float(w @ out)

            numeric = finite_difference_gradient(f, flatten_params(params), step=1e-5)
            worst = max(worst, relative_error(analytic, numeric))
        assert worst < 1e-6

    def test_input_gradient_matches_finite_differences(self):
        params = init_params(5, 6, 5, 3, RngState(9))
        x = RngState(10).normal(size=5)
        w = np.array([0.3, -1.0, 2.0])
        _, cache = mlp_forward(params, x)
        analytic = mlp_backward(params, cache, w).input
        numeric = finite_difference_gradient(
            lambda v: float(w @ mlp_forward(params, v)[0]), x, step=1e-5)
        assert relative_error(analytic, numeric) < 1e-6

    def test_mismatched_cache_rejected(self):
        params_a = init_params(4, 3, 3, 2, RngState(0))
        params_b = init_params(4, 5, 5, 2, RngState(1))
        _, cache = mlp_forward(params_a, np.ones(4))
        with pytest.raises(ValidationError):
            mlp_backward(params_b, cache, np.zeros(2))


class TestOptimizer:
    def test_zero_gradients_leave_params_unchanged(self):
        params = init_params(4, 3, 3, 2, RngState(2))
        before = flatten_params(params).copy()
        grads = mlp_backward(params, mlp_forward(params, np.ones(4))[1], np.zeros(2))
        optimizer_step(params, grads, learning_rate=1e-3, step_index=0)
        np.testing.assert_array_equal(flatten_params(params), before)

    def test_constant_positive_gradient_decreases_scalar(self):
        p = np.array([1.0])
        m, v = np.zeros(1), np.zeros(1)
        history = [p[0]]
        for t in range(50):
            adam_update(p, np.array([0.7]), m, v, t, learning_rate=1e-2)
            history.append(p[0])
        assert all(b < a for a, b in zip(history, history[1:]))

    def test_nan_gradient_identifies_parameter_path(self):
        params = init_params(4, 3, 3, 2, RngState(2))
        grads = mlp_backward(params, mlp_forward(params, np.ones(4))[1], np.ones(2))
        grads.biases[1][0] = np.nan
        with pytest.raises(NumericError, match=r"biases\[1\]"):
            optimizer_step(params, grads, learning_rate=1e-3, step_index=0)

    def test_bad_learning_rate_rejected(self):
        params = init_params(4, 3, 3, 2, RngState(2))
        grads = mlp_backward(params, mlp_forward(params, np.ones(4))[1], np.ones(2))
        with pytest.raises(ValidationError):
            optimizer_step(params, grads, learning_rate=0.0, step_index=0)

    def test_hundred_steps_bit_identical_across_runs(self):
        def run():
            params = init_params(4, 3, 3, 2, RngState(21))
            data = RngState(22)
            for t in range(100):
                x = data.normal(size=4)
                out, cache = mlp_forward(params, x)
                grads = mlp_backward(params, cache, out)  # grad of 0.5*||out||^2
                optimizer_step(params, grads, learning_rate=1e-3, step_index=t)
            return flatten_params(params)

        np.testing.assert_array_equal(run(), run())


class TestCheckpoint:
    def test_roundtrip_is_exact(self, tmp_path):
        params = init_params(6, 4, 5, 3, RngState(8))
        path = tmp_path / "net.avck"
        save_checkpoint(params, path)
        loaded = load_checkpoint(path)
        assert loaded.dims == params.dims
        np.testing.assert_array_equal(flatten_params(loaded), flatten_params(params))

    def test_truncated_file_reports_offset(self, tmp_path):
        params = init_params(6, 4, 5, 3, RngState(8))
        path = tmp_path / "net.avck"
        save_checkpoint(params, path)
        blob = path.read_bytes()
        path.write_bytes(blob[:len(blob) // 2])
        with pytest.raises(FormatError, match="truncated"):
            load_checkpoint(path)

    def test_unknown_version_rejected(self, tmp_path):
        params = init_params(6, 4, 5, 3, RngState(8))
        path = tmp_path / "net.avck"
        save_checkpoint(params, path)
        blob = bytearray(path.read_bytes())
        blob[4] = ord("2")
        path.write_bytes(bytes(blob))
        with pytest.raises(FormatError, match="version"):
            load_checkpoint(path)

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "net.avck"
        path.write_bytes(b"NOPE!" + b"\x00" * 64)
        with pytest.raises(FormatError, match="magic"):
            load_checkpoint(path)


def test_init_is_deterministic_and_finite():
    a = init_params(10, 64, 64, 3, RngState(7))
    b = init_params(10, 64, 64, 3, RngState(7))
    np.testing.assert_array_equal(flatten_params(a), flatten_params(b))
    assert np.all(np.isfinite(flatten_params(a)))
    # Glorot bound for the first layer
    bound = np.sqrt(6.0 / (10 + 64))
    assert np.max(np.abs(a.weights[0])) <= bound
    assert not a.biases[0].any()
