import numpy as np
import pytest

from beacon_amc.errors import FileChecksumError, FileFormatError, FileTruncatedError
from beacon_amc.nnet import (
    Adam,
    Conv1d,
    Dense,
    Dropout,
    SGD,
    bce,
    cross_entropy,
    gradcheck_conv1d,
    gradcheck_dense,
    load_params,
    relu,
    save_params,
    sigmoid,
    softmax,
)


class TestDense:
    def test_identity_weights(self):
        layer = Dense(4, 4, dtype=np.float64)
        layer.weight[...] = np.eye(4)
        x = np.random.default_rng(0).standard_normal((3, 4))
        np.testing.assert_array_equal(layer.forward(x), x)

    def test_zero_input_gives_biases(self):
        layer = Dense(5, 3, rng=np.random.default_rng(1), dtype=np.float64)
        layer.bias[...] = [1.0, -2.0, 0.5]
        out = layer.forward(np.zeros((2, 5)))
        np.testing.assert_array_equal(out, np.tile(layer.bias, (2, 1)))

    def test_dimension_mismatch(self):
        layer = Dense(4, 3)
        with pytest.raises(ValueError):
            layer.forward(np.zeros((2, 5)))

    def test_gradients_match_finite_differences(self):
        report = gradcheck_dense(4, 3, seed=11)
        assert report.max_rel_err < 1e-3


class TestConv1d:
    def test_delta_kernel_is_identity(self):
        layer = Conv1d(1, 1, 7, dtype=np.float64)
        layer.weight[0, 0, 3] = 1.0
        x = np.random.default_rng(2).standard_normal((2, 1, 20))
        np.testing.assert_allclose(layer.forward(x), x)

    def test_strided_output_length(self):
        layer = Conv1d(2, 4, 7, stride=2, pad=3)
        assert layer.out_len(128) == 64
        x = np.zeros((1, 2, 128), dtype=np.float32)
        assert layer.forward(x).shape == (1, 4, 64)

    def test_even_kernel_same_padding_rejected(self):
        with pytest.raises(ValueError):
            Conv1d(1, 1, 4)

    def test_channel_mismatch(self):
        layer = Conv1d(2, 4, 5)
        with pytest.raises(ValueError):
            layer.forward(np.zeros((1, 3, 16)))

    @pytest.mark.parametrize("stride", [1, 2])
    def test_gradients_match_finite_differences(self, stride):
        report = gradcheck_conv1d(2, 4, 7, 18, stride=stride, seed=5)
        assert report.max_rel_err < 1e-3

    def test_matches_numpy_correlate(self):
        rng = np.random.default_rng(8)
        layer = Conv1d(1, 1, 5, pad=2, rng=rng, dtype=np.float64)
        x = rng.standard_normal((1, 1, 30))
        manual = np.correlate(np.pad(x[0, 0], 2), layer.weight[0, 0], mode="valid") + layer.bias[0]
        np.testing.assert_allclose(layer.forward(x)[0, 0], manual)


class TestActivations:
    def test_softmax_zeros_is_uniform(self):
        np.testing.assert_allclose(softmax(np.zeros(10)), np.full(10, 0.1))

    def test_softmax_shift_invariance(self):
        rng = np.random.default_rng(3)
        z = rng.standard_normal((50, 10))
        np.testing.assert_allclose(softmax(z), softmax(z + 123.456), atol=1e-12)

    def test_softmax_on_simplex(self):
        rng = np.random.default_rng(4)
        z = rng.standard_normal((1000, 10)) * 20
        p = softmax(z)
        np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-9)
        assert p.min() > 0

    def test_sigmoid_midpoint_and_range(self):
        assert sigmoid(0.0) == 0.5
        x = np.linspace(-30, 30, 1001)
        s = sigmoid(x)
        assert np.all((s > 0) & (s < 1))
        assert np.all(np.diff(s) >= 0)

    def test_relu(self):
        np.testing.assert_array_equal(relu(np.array([-1.0, 0.0, 2.0])), [0.0, 0.0, 2.0])


class TestLosses:
    def test_bce_half_is_ln2(self):
        np.testing.assert_allclose(bce(0.5, 1), np.log(2.0), rtol=1e-12)

    def test_bce_decreasing_in_score_for_positive_label(self):
        s = np.linspace(0.01, 0.99, 99)
        losses = bce(s, np.ones_like(s))
        assert np.all(np.diff(losses) < 0)

    def test_cross_entropy_uniform(self):
        np.testing.assert_allclose(cross_entropy(np.full(10, 0.1), 3), np.log(10.0), rtol=1e-12)

    def test_clamping_keeps_losses_finite(self):
        assert np.isfinite(bce(0.0, 1))
        assert np.isfinite(bce(1.0, 0))
        assert np.isfinite(cross_entropy(np.eye(10)[0], 5))


class TestOptimizers:
    def test_sgd_step(self):
        p = {"w": np.array([1.0])}
        SGD(0.1).step(p, {"w": np.array([1.0])})
        np.testing.assert_allclose(p["w"], [0.9])

    def test_sgd_zero_gradient_no_change(self):
        p = {"w": np.array([1.0, -2.0])}
        SGD(0.5).step(p, {"w": np.zeros(2)})
        np.testing.assert_array_equal(p["w"], [1.0, -2.0])

    def test_adam_first_step_closed_form(self):
        # m_hat = g, v_hat = g^2 => step = lr * g / (|g| + eps)
        lr, eps = 1e-3, 1e-8
        p = {"w": np.array([1.0])}
        Adam(lr, eps=eps).step(p, {"w": np.array([1.0])})
        expected = 1.0 - lr * 1.0 / (1.0 + eps)
        np.testing.assert_allclose(p["w"], [expected], rtol=1e-15)

    def test_shape_mismatch_raises(self):
        with pytest.raises(ValueError):
            Adam(1e-3).step({"w": np.zeros(3)}, {"w": np.zeros(4)})


class TestDropout:
    def test_inference_identity(self):
        d = Dropout(0.5)
        x = np.random.default_rng(0).standard_normal((4, 8))
        np.testing.assert_array_equal(d.forward(x, training=False), x)

    def test_training_scales_kept_units(self):
        d = Dropout(0.25)
        rng = np.random.default_rng(1)
        x = np.ones((2000, 10))
        out = d.forward(x, rng=rng, training=True)
        kept = out[out != 0]
        np.testing.assert_allclose(kept, 1.0 / 0.75)
        assert abs(out.mean() - 1.0) < 0.02

    def test_invalid_rate(self):
        with pytest.raises(ValueError):
            Dropout(1.0)


class TestCheckpoint:
    def _params(self):
        rng = np.random.default_rng(7)
        return {
            "a.weight": rng.standard_normal((3, 4)).astype(np.float32),
            "a.bias": rng.standard_normal(3).astype(np.float32),
            "scalarish": rng.standard_normal(1).astype(np.float32),
        }

    def test_roundtrip_bit_exact(self, tmp_path):
        params = self._params()
        path = tmp_path / "m.ck"
        save_params(path, params)
        loaded = load_params(path)
        assert set(loaded) == set(params)
        for name in params:
            np.testing.assert_array_equal(loaded[name], params[name])

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "m.ck"
        save_params(path, self._params())
        raw = bytearray(path.read_bytes())
        raw[0] ^= 0xFF
        path.write_bytes(bytes(raw))
        with pytest.raises(FileFormatError):
            load_params(path)

    def test_truncated(self, tmp_path):
        path = tmp_path / "m.ck"
        save_params(path, self._params())
        raw = path.read_bytes()
        path.write_bytes(raw[:20])
        with pytest.raises(FileTruncatedError):
            load_params(path)

    def test_checksum_mismatch(self, tmp_path):
        path = tmp_path / "m.ck"
        save_params(path, self._params())
        raw = bytearray(path.read_bytes())
        raw[-5] ^= 0x01  # last payload byte, just before the CRC trailer
        path.write_bytes(bytes(raw))
        with pytest.raises(FileChecksumError):
            load_params(path)
