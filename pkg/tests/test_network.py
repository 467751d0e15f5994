"""Unit oracles for every network primitive plus a fully hand-traced forward."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from newsvane.embeddings import EmbeddingTable
from newsvane.network import (
    ModelConfig,
    ModelParameters,
    apply_dropout,
    backward,
    conv_forward,
    dense_forward,
    forward,
    init_parameters,
    loss_binary,
    loss_categorical,
    maxpool,
    relu,
    sample_loss,
    sigmoid,
    softmax3,
)
from newsvane.text import EncodedHeadline


class TestRelu:
    def test_values(self):
        assert relu(-2.0) == 0.0
        assert relu(0.0) == 0.0
        assert relu(3.5) == 3.5

    def test_vectorized(self):
        np.testing.assert_array_equal(relu(np.array([-1.0, 0.0, 2.0])), [0.0, 0.0, 2.0])


class TestConvForward:
    def test_hand_oracle(self):
        # p=1, m=3, X=[1,2,3], filter [1,1], bias 0, h=2 -> [1+2, 2+3]
        out = conv_forward(np.array([1.0, 2.0, 3.0]), np.array([1.0, 1.0]), 0.0, h=2)
        assert out.tolist() == [3.0, 5.0]

    def test_relu_clamps(self):
        out = conv_forward(np.array([1.0, 2.0, 3.0]), np.zeros(2), -1.0, h=2)
        assert out.tolist() == [0.0, 0.0]

    def test_filter_as_wide_as_sentence(self):
        out = conv_forward(np.array([1.0, 2.0, 3.0]), np.array([1.0, 1.0, 1.0]), 0.5, h=3)
        assert out.tolist() == [6.5]

    def test_word_alignment_with_p2(self):
        # m=3, p=2: windows are word-aligned, not element-aligned
        x = np.array([1.0, 10.0, 2.0, 20.0, 3.0, 30.0])
        filt = np.array([1.0, 0.0, 1.0, 0.0])
        out = conv_forward(x, filt, 0.0, h=2)
        assert out.tolist() == [3.0, 5.0]

    def test_length_property(self):
        rng = np.random.default_rng(0)
        for m, p, h in [(4, 1, 2), (7, 3, 2), (9, 2, 5), (6, 4, 6)]:
            out = conv_forward(rng.normal(size=m * p), rng.normal(size=h * p), 0.1, h=h)
            assert out.shape == (m - h + 1,)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            conv_forward(np.ones(5), np.ones(4), 0.0, h=2)  # 5 not divisible by p=2


def _naive_pool(c, w):
    out, pos = [], []
    for start in range(0, len(c), w):
        window = list(c[start : start + w])
        best = max(window)
        out.append(best)
        pos.append(start + window.index(best))
    return out, pos


class TestMaxpool:
    def test_even_windows(self):
        pooled, pos = maxpool(np.array([3.0, 5.0, 1.0, 4.0]), 2)
        assert pooled.tolist() == [5.0, 4.0]
        assert pos.tolist() == [1, 3]

    def test_partial_final_window(self):
        pooled, pos = maxpool(np.array([3.0, 5.0, 1.0]), 2)
        assert pooled.tolist() == [5.0, 1.0]
        assert pos.tolist() == [1, 2]

    def test_single_element(self):
        pooled, _ = maxpool(np.array([7.0]), 2)
        assert pooled.tolist() == [7.0]

    def test_tie_takes_leftmost(self):
        _, pos = maxpool(np.array([2.0, 2.0, 1.0, 5.0, 5.0]), 2)
        assert pos.tolist() == [0, 3, 4]

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            maxpool(np.array([]), 2)

    @given(
        st.lists(st.floats(min_value=-100, max_value=100), min_size=1, max_size=40),
        st.integers(min_value=1, max_value=6),
    )
    @settings(max_examples=200, deadline=None)
    def test_matches_naive(self, values, w):
        pooled, pos = maxpool(np.array(values), w)
        expected_vals, expected_pos = _naive_pool(values, w)
        assert pooled.tolist() == expected_vals
        assert pos.tolist() == expected_pos
        assert len(pooled) == math.ceil(len(values) / w)


class TestDenseForward:
    def test_identity_relu(self):
        out = dense_forward(np.array([-1.0, 2.0]), np.eye(2), np.zeros(2), "relu")
        assert out.tolist() == [0.0, 2.0]

    def test_zero_input_gives_activated_bias(self):
        out = dense_forward(np.zeros(3), np.ones((2, 3)), np.array([-0.5, 0.5]), "relu")
        assert out.tolist() == [0.0, 0.5]

    def test_hand_oracle_no_activation(self):
        out = dense_forward(np.array([1.0, 2.0]), np.array([[1.0, 1.0]]), np.array([0.5]), "none")
        assert out.tolist() == [3.5]

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            dense_forward(np.ones(3), np.ones((2, 2)), np.zeros(2), "relu")


class TestDropout:
    def test_rate_zero_train_is_identity(self):
        v = np.array([1.0, -2.0, 3.0])
        out, mask = apply_dropout(v, 0.0, "train", np.random.default_rng(0))
        assert out.tolist() == v.tolist()
        assert mask.tolist() == [1.0, 1.0, 1.0]

    def test_test_mode_scales(self):
        out, mask = apply_dropout(np.array([2.0, 4.0]), 0.5, "test")
        assert out.tolist() == [1.0, 2.0]
        assert mask is None

    def test_zeroed_fraction(self):
        rng = np.random.default_rng(7)
        out, mask = apply_dropout(np.ones(10_000), 0.5, "train", rng)
        zeroed = 1.0 - mask.mean()
        assert 0.47 <= zeroed <= 0.53
        np.testing.assert_array_equal(out, mask)

    def test_deterministic_per_stream(self):
        a, _ = apply_dropout(np.ones(100), 0.3, "train", np.random.default_rng(5))
        b, _ = apply_dropout(np.ones(100), 0.3, "train", np.random.default_rng(5))
        assert a.tolist() == b.tolist()


class TestSigmoid:
    def test_zero(self):
        assert sigmoid(0.0) == 0.5

    def test_symmetry(self):
        for z in (-3.7, -0.2, 1.1, 8.0):
            assert sigmoid(z) == pytest.approx(1.0 - sigmoid(-z), abs=1e-15)

    def test_saturation_no_overflow(self):
        assert sigmoid(40.0) == pytest.approx(1.0, abs=1e-15)
        assert sigmoid(-745.0) >= 0.0
        assert sigmoid(1e4) == 1.0


class TestSoftmax3:
    def test_uniform(self):
        np.testing.assert_allclose(softmax3(np.zeros(3)), [1 / 3] * 3, atol=1e-15)

    def test_hand_oracle(self):
        e = math.e
        np.testing.assert_allclose(
            softmax3(np.array([1.0, 1.0, 0.0])),
            [e / (2 * e + 1), e / (2 * e + 1), 1 / (2 * e + 1)],
            atol=1e-15,
        )

    def test_shift_invariance_and_sum(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            z = rng.normal(size=3) * 10
            s = softmax3(z)
            assert abs(s.sum() - 1.0) < 1e-12
            np.testing.assert_allclose(s, softmax3(z + 123.456), atol=1e-12)


class TestLosses:
    def test_binary_values(self):
        assert loss_binary(0.5, 1) == pytest.approx(math.log(2.0), abs=1e-12)
        assert loss_binary(1.0 - 1e-12, 1) == pytest.approx(0.0, abs=1e-6)
        assert loss_binary(0.9, 0) == pytest.approx(-math.log(0.1), abs=1e-12)

    def test_binary_clamped_no_infinity(self):
        assert math.isfinite(loss_binary(0.0, 1))
        assert math.isfinite(loss_binary(1.0, 0))

    def test_categorical_values(self):
        uniform = np.full(3, 1 / 3)
        for cls in range(3):
            onehot = np.eye(3)[cls]
            assert loss_categorical(uniform, onehot) == pytest.approx(math.log(3.0), abs=1e-12)
        assert loss_categorical(np.array([0.0, 1.0, 0.0]), np.eye(3)[1]) == pytest.approx(0.0, abs=1e-6)
        assert loss_categorical(np.array([0.7, 0.2, 0.1]), np.eye(3)[1]) == pytest.approx(
            -math.log(0.2), abs=1e-12
        )


def _toy_setup():
    """Hand-traced instance: p=1, m=3, one width h=2, four filters."""
    config = ModelConfig(
        p=1, m=3, filter_widths=(2,), filters_per_width=4,
        hidden_sizes=(3, 2), dropout_rate=0.0, pool_w=2, head="binary",
    )
    table = EmbeddingTable(
        matrix=np.array([[0.0], [2.0], [-1.0]]), mode="non_static", p=1
    )
    enc = EncodedHeadline(indices=np.array([1, 2, 1]), true_len=3)
    params = ModelParameters(
        filters={2: np.array([[1.0, 0.5], [-1.0, 1.0], [0.0, 1.0], [1.0, 1.0]])},
        filter_biases={2: np.array([0.0, 0.5, -0.5, 0.0])},
        w1=np.array([[1.0, 0.0, 0.0, 0.0], [0.0, 0.5, -1.0, 0.0], [0.0, 0.0, 1.0, -2.0]]),
        b1=np.array([0.0, 0.25, 0.0]),
        w2=np.array([[1.0, 1.0, 1.0], [0.5, -1.0, 0.0]]),
        b2=np.array([0.0, -0.25]),
        w_out=np.array([[0.5, 1.0]]),
        b_out=np.array([-0.6]),
    )
    return config, table, enc, params


class TestForward:
    def test_zero_everything_gives_half(self):
        config = ModelConfig(
            p=2, m=4, filter_widths=(2,), filters_per_width=4,
            hidden_sizes=(3, 2), dropout_rate=0.0, head="binary",
        )
        table = EmbeddingTable(matrix=np.zeros((3, 2)), mode="self_learnt", p=2)
        enc = EncodedHeadline(indices=np.zeros(4, dtype=np.int64), true_len=0)
        params = init_parameters(config, np.random.default_rng(0))
        for name, arr in params.tensors():
            arr[:] = 0.0
        output, cache = forward(enc, table, params, config, mode="test")
        assert output == 0.5
        assert cache is None

    def test_hand_traced_values(self):
        config, table, enc, params = _toy_setup()
        output, cache = forward(enc, table, params, config, mode="train")
        assert cache.x.tolist() == [2.0, -1.0, 2.0]
        np.testing.assert_array_equal(
            cache.conv_post[2], [[1.5, 0.0, 0.0, 1.0], [0.0, 3.5, 1.5, 1.0]]
        )
        assert cache.pool_argmax[2].tolist() == [[0, 1, 1, 0]]
        assert cache.z.tolist() == [1.5, 3.5, 1.5, 1.0]
        assert cache.act1.tolist() == [1.5, 0.5, 0.0]
        assert cache.act2.tolist() == [2.0, 0.0]
        assert cache.logits.tolist() == [0.4]
        assert output == pytest.approx(1.0 / (1.0 + math.exp(-0.4)), abs=1e-15)

    def test_test_mode_is_pure(self):
        config, table, enc, params = _toy_setup()
        a, _ = forward(enc, table, params, config, mode="test")
        b, _ = forward(enc, table, params, config, mode="test")
        assert a == b

    def test_dropout_scaling_applies_in_test_mode(self):
        import dataclasses

        config, table, enc, params = _toy_setup()
        dropped_cfg = dataclasses.replace(config, dropout_rate=0.5)
        base, _ = forward(enc, table, params, config, mode="test")
        scaled, _ = forward(enc, table, params, dropped_cfg, mode="test")
        # scaling shrinks both hidden activations: logit moves toward b_out
        assert scaled != base

    def test_multiclass_head_probabilities(self):
        config, table, enc, params = _toy_setup()
        import dataclasses

        config3 = dataclasses.replace(config, head="multiclass3")
        params3 = ModelParameters(
            filters=params.filters, filter_biases=params.filter_biases,
            w1=params.w1, b1=params.b1, w2=params.w2, b2=params.b2,
            w_out=np.array([[0.5, 1.0], [0.0, 0.0], [-0.5, 2.0]]),
            b_out=np.array([-0.6, 0.0, 0.1]),
        )
        output, _ = forward(enc, table, params3, config3, mode="test")
        np.testing.assert_allclose(output, softmax3(np.array([0.4, 0.0, -0.9])), atol=1e-15)
        assert output.sum() == pytest.approx(1.0, abs=1e-12)


class TestShapes:
    def test_map_and_z_lengths(self):
        config = ModelConfig(
            p=3, m=11, filter_widths=(2, 4, 5), filters_per_width=3,
            hidden_sizes=(8, 4), dropout_rate=0.0, pool_w=2,
        )
        table = EmbeddingTable(
            matrix=np.random.default_rng(0).normal(size=(6, 3)), mode="self_learnt", p=3
        )
        enc = EncodedHeadline(indices=np.array([1, 2, 3, 4, 5, 1, 2, 0, 0, 0, 0]), true_len=7)
        params = init_parameters(config, np.random.default_rng(1))
        _, cache = forward(enc, table, params, config, mode="train")
        for h in config.filter_widths:
            assert cache.conv_post[h].shape == (11 - h + 1, 3)
            assert cache.pool_argmax[h].shape == (math.ceil((11 - h + 1) / 2), 3)
        expected_z = sum(3 * math.ceil((11 - h + 1) / 2) for h in config.filter_widths)
        assert cache.z.shape == (expected_z,)
        assert config.z_len == expected_z

    def test_config_validation(self):
        with pytest.raises(ValueError):
            ModelConfig(p=2, m=3, filter_widths=(4,), filters_per_width=1, hidden_sizes=(2, 1))
        with pytest.raises(ValueError):
            ModelConfig(p=2, m=6, filter_widths=(2,), filters_per_width=1, hidden_sizes=(9, 1))
        with pytest.raises(ValueError):
            ModelConfig(p=2, m=6, filter_widths=(2, 2), filters_per_width=1, hidden_sizes=(2, 1))
        with pytest.raises(ValueError):
            ModelConfig(p=2, m=6, filter_widths=(2,), filters_per_width=2, hidden_sizes=(2, 2))


class TestBackwardContracts:
    def test_static_mode_embedding_block_zero(self):
        config, table, enc, params = _toy_setup()
        static_table = EmbeddingTable(matrix=table.matrix.copy(), mode="static", p=1)
        _, cache = forward(enc, static_table, params, config, mode="train")
        grads = backward(cache, 1, params, config, static_table)
        assert not grads.embeddings.any()

    def test_padding_row_gradient_always_zero(self):
        config, table, enc, params = _toy_setup()
        _, cache = forward(enc, table, params, config, mode="train")
        grads = backward(cache, 0, params, config, table)
        assert not grads.embeddings[0].any()
        assert grads.embeddings[1:].any()  # trainable rows do receive gradient

    def test_zero_loss_sample_has_vanishing_gradients(self):
        config, table, enc, params = _toy_setup()
        params.b_out[:] = 40.0  # saturate sigmoid at ~1 for target y=1
        output, cache = forward(enc, table, params, config, mode="train")
        assert sample_loss(output, 1, config.head) < 1e-6
        grads = backward(cache, 1, params, config, table)
        worst = max(np.abs(arr).max() for _, arr in grads.params.tensors())
        assert worst < 1e-12

    def test_backward_requires_cache(self):
        config, table, enc, params = _toy_setup()
        with pytest.raises(ValueError):
            backward(None, 1, params, config, table)
