import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ngdkit.data import one_hot
from ngdkit.errors import ShapeError, UnsupportedNetworkError
from ngdkit.layers import BN_EPS, Conv2D, Dense, Flatten, MaxPool
from ngdkit.nn import (
    NetworkParams,
    NetworkSpec,
    basis_grid,
    cross_entropy,
    forward_hidden,
    head_features,
    init_params,
    logits,
    loss_sum_from_logits,
    predict_classes,
    softmax,
)
from ngdkit.rng import substream


def identity_dense_spec(width, n_classes=3, **kw):
    return NetworkSpec(layers=(Dense(width, "identity"),), n_classes=n_classes,
                       input_shape=(width,), **kw)


def identity_params(spec):
    params = init_params(spec, 0)
    params.xi[0].trainable["weight"] = np.eye(spec.input_shape[0])
    params.xi[0].trainable["bias"] = np.zeros(spec.input_shape[0])
    return params


class TestSoftmax:
    def test_uniform_on_zero_logits(self):
        p = softmax(np.zeros(5))
        assert np.allclose(p, 0.2, rtol=0, atol=1e-15)

    def test_hand_case_negative_convention(self):
        # p0 = e^0 / (e^0 + e^{-ln 3}) = 3/4 under the negated exponent
        p = softmax(np.array([0.0, math.log(3.0)]))
        assert np.allclose(p, [0.75, 0.25], atol=1e-14)

    def test_standard_convention_mirrors_paper(self):
        z = substream(0, "sm").standard_normal(6)
        assert np.allclose(softmax(z, "paper"), softmax(-z, "standard"), atol=1e-15)

    @given(st.integers(0, 10_000), st.integers(2, 8),
           st.floats(-50, 50), st.sampled_from(["paper", "standard"]))
    @settings(max_examples=60, deadline=None)
    def test_properties(self, seed, c, shift, sign):
        z = 10.0 * substream(seed, "sm-prop").standard_normal(c)
        p = softmax(z, sign)
        assert (p > 0).all()
        assert abs(p.sum() - 1.0) <= 1e-12
        assert np.allclose(p, softmax(z + shift, sign), atol=1e-12)

    def test_batched_rows(self):
        z = substream(1, "sm").standard_normal((4, 3))
        p = softmax(z)
        assert p.shape == (4, 3)
        assert np.allclose(p.sum(axis=1), 1.0, atol=1e-12)


class TestCrossEntropy:
    def test_perfect_prediction(self):
        assert cross_entropy(np.array([0.0, 1.0, 0.0]), np.array([0, 1, 0])) == 0.0

    def test_uniform_five_classes(self):
        p = np.full(5, 0.2)
        y = one_hot(np.array([3]), 5)[0]
        assert cross_entropy(p, y) == pytest.approx(math.log(5.0), abs=1e-12)

    def test_quarter_probability(self):
        p = np.array([0.25, 0.5, 0.25])
        assert cross_entropy(p, np.array([1, 0, 0])) == pytest.approx(
            math.log(4.0), abs=1e-12
        )

    def test_loss_sum_matches_composition(self):
        rng = substream(2, "ce")
        z = rng.standard_normal((6, 4))
        y = one_hot(rng.integers(0, 4, 6), 4)
        direct = sum(
            cross_entropy(softmax(z[i]), y[i]) for i in range(6)
        )
        assert loss_sum_from_logits(z, y) == pytest.approx(direct, rel=1e-12)


class TestLogits:
    def test_identity_head(self):
        phi = substream(3, "lg").standard_normal((5, 4))
        assert np.array_equal(logits(phi, np.eye(4)), phi)

    def test_zero_head(self):
        phi = substream(4, "lg").standard_normal((5, 4))
        assert np.array_equal(logits(phi, np.zeros((3, 4))), np.zeros((5, 3)))

    def test_hand_case(self):
        out = logits(np.array([[1.0, 2.0]]),
                     np.array([[1.0, 0.0], [0.0, 3.0], [-1.0, 1.0]]))
        assert np.array_equal(out, [[1.0, 6.0, 1.0]])

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            logits(np.ones((2, 3)), np.ones((4, 5)))


class TestForwardHidden:
    def test_identity_network_passes_input_through(self):
        spec = identity_dense_spec(3)
        params = identity_params(spec)
        x = substream(5, "fw").standard_normal((7, 3))
        trace = forward_hidden(spec, params.xi, x, "infer")
        assert np.allclose(trace.phi, x, atol=0)

    def test_zero_weight_tanh_gives_zero(self):
        spec = NetworkSpec(layers=(Dense(4, "tanh"),), n_classes=2, input_shape=(3,))
        params = init_params(spec, 0)
        params.xi[0].trainable["weight"][:] = 0.0
        x = substream(6, "fw").standard_normal((5, 3))
        trace = forward_hidden(spec, params.xi, x, "infer")
        assert np.array_equal(trace.phi, np.zeros((5, 4)))

    def test_input_shape_mismatch_names_layer(self):
        spec = identity_dense_spec(3)
        with pytest.raises(ShapeError, match="layer 0"):
            forward_hidden(spec, identity_params(spec).xi, np.ones((2, 4)))

    def test_conv_after_dense_rejected_with_layer_index(self):
        with pytest.raises(ShapeError, match="layer 1"):
            NetworkSpec(layers=(Dense(4), Conv2D(2)), n_classes=2, input_shape=(3,))

    def test_batchnorm_train_statistics(self):
        spec = NetworkSpec(layers=(Dense(6, "identity", batchnorm=True),),
                           n_classes=2, input_shape=(4,))
        params = init_params(spec, 3)
        # variance well above BN_EPS so the epsilon damping stays below 1e-6
        x = substream(7, "bn").standard_normal((32, 4)) * 40.0 + 1.5
        trace = forward_hidden(spec, params.xi, x, "train")
        # gamma=1, beta=0 at init, so phi is the normalized pre-activation
        mu = trace.phi.mean(axis=0)
        var = trace.phi.var(axis=0)
        assert np.abs(mu).max() <= 1e-10
        assert np.abs(var - 1.0).max() <= 1e-6

    def test_batchnorm_epsilon_damping_is_exact(self):
        spec = NetworkSpec(layers=(Dense(3, "identity", batchnorm=True),),
                           n_classes=2, input_shape=(3,))
        params = identity_params(spec)
        x = substream(18, "bn3").standard_normal((64, 3))
        pre_var = x.var(axis=0)
        out_var = forward_hidden(spec, params.xi, x, "train").phi.var(axis=0)
        assert np.allclose(out_var, pre_var / (pre_var + BN_EPS), rtol=1e-12)

    def test_infer_mode_batch_size_independent(self):
        spec = NetworkSpec(
            layers=(Dense(5, "tanh", batchnorm=True), Dense(3, "tanh")),
            n_classes=2, input_shape=(2,),
        )
        params = init_params(spec, 1)
        x = substream(8, "bn2").standard_normal((10, 2))
        # advance the running statistics once
        forward_hidden(spec, params.xi, x, "train")
        full = forward_hidden(spec, params.xi, x, "infer").phi
        single = np.vstack([
            forward_hidden(spec, params.xi, x[i : i + 1], "infer").phi
            for i in range(10)
        ])
        assert np.allclose(full, single, atol=0)

    def test_conv_pool_flatten_shapes(self):
        spec = NetworkSpec(
            layers=(Conv2D(8), MaxPool(2), Conv2D(16), MaxPool(2), Conv2D(16),
                    Flatten(), Dense(64, "relu"), Dense(10, "relu")),
            n_classes=10, input_shape=(32, 32, 3),
        )
        assert spec.layer_shapes() == (
            (30, 30, 8), (15, 15, 8), (13, 13, 16), (6, 6, 16), (4, 4, 16),
            (256,), (64,), (10,),
        )
        params = init_params(spec, 0)
        x = substream(9, "conv").random((3, 32, 32, 3))
        trace = forward_hidden(spec, params.xi, x, "infer")
        assert trace.phi.shape == (3, 10)
        assert np.isfinite(trace.phi).all()


class TestPredictClasses:
    def test_zero_head_all_ties_resolve_to_class_zero(self):
        spec = identity_dense_spec(3, n_classes=4)
        params = identity_params(spec)
        params.w = np.zeros((4, 3))
        preds = predict_classes(spec, params, substream(10, "pc").standard_normal((6, 3)))
        assert np.array_equal(preds, np.zeros(6, dtype=np.int64))

    def test_most_negative_logit_wins_under_paper_convention(self):
        spec = identity_dense_spec(4, n_classes=5)
        params = identity_params(spec)
        # head row 3 maps to logit -10, all other rows to +1
        params.w = np.ones((5, 4))
        params.w[3] = -10.0
        x = np.full((2, 4), 0.25)
        assert np.array_equal(predict_classes(spec, params, x), [3, 3])

    def test_class_row_permutation_permutes_predictions(self):
        spec = identity_dense_spec(3, n_classes=4)
        params = identity_params(spec)
        params.w = substream(11, "pc").standard_normal((4, 3))
        x = substream(12, "pc").standard_normal((20, 3))
        base = predict_classes(spec, params, x)
        perm = np.array([2, 0, 3, 1])
        permuted = NetworkParams(w=params.w[perm], xi=params.xi)
        got = predict_classes(spec, permuted, x)
        # row i of the permuted head is row perm[i] of the original, so the
        # winning index maps through the inverse permutation
        assert np.array_equal(got, np.argsort(perm)[base])

    def test_shared_shift_of_logits_preserves_predictions(self):
        spec = identity_dense_spec(3, n_classes=4, augment_constant_basis=True)
        params = init_params(spec, 0)
        params.xi[0].trainable["weight"] = np.eye(3)
        w = substream(13, "pc").standard_normal((4, 4))
        params.w = w
        x = substream(14, "pc").standard_normal((15, 3))
        base = predict_classes(spec, params, x)
        # shifting every class's constant column by the same amount shifts all
        # logits per sample equally: softmax shift invariance at argmax level
        shifted = w.copy()
        shifted[:, -1] += 7.5
        params.w = shifted
        assert np.array_equal(predict_classes(spec, params, x), base)


class TestBasisGrid:
    def test_identity_network_reproduces_grid(self):
        spec = NetworkSpec(layers=(Dense(2, "identity"),), n_classes=2,
                           input_shape=(2,))
        params = identity_params(spec)
        grid = substream(15, "bg").random((50, 2))
        assert np.allclose(basis_grid(spec, params.xi, grid), grid, atol=0)

    def test_zero_network_gives_zero_matrix(self):
        spec = NetworkSpec(layers=(Dense(4, "tanh"),), n_classes=2, input_shape=(2,))
        params = init_params(spec, 0)
        params.xi[0].trainable["weight"][:] = 0.0
        grid = substream(16, "bg").random((10, 2))
        assert np.array_equal(basis_grid(spec, params.xi, grid), np.zeros((10, 4)))

    def test_row_count_matches_grid_size(self):
        spec = NetworkSpec(layers=(Dense(6, "tanh"),), n_classes=5, input_shape=(2,))
        params = init_params(spec, 0)
        axis = np.linspace(0, 1, 64)
        xx, yy = np.meshgrid(axis, axis)
        grid = np.column_stack([xx.ravel(), yy.ravel()])
        assert basis_grid(spec, params.xi, grid).shape == (4096, 6)

    def test_non_2d_network_unsupported(self):
        spec = NetworkSpec(layers=(Dense(4, "tanh"),), n_classes=2, input_shape=(3,))
        with pytest.raises(UnsupportedNetworkError):
            basis_grid(spec, init_params(spec, 0).xi, np.zeros((5, 2)))


def test_seed0_peaks_network_golden_probe():
    """Frozen forward value for the seed-0 peaks network at a fixed probe.

    Golden vector captured once from this build after its reverse-mode
    gradients passed the finite-difference oracles; guards silent changes to
    initialization, batch-norm inference, or the tanh stack.
    """
    from ngdkit.config import config_from_dict, preset
    from ngdkit.runner import build_network_spec

    spec = build_network_spec(config_from_dict(preset("peaks")))
    params = init_params(spec, 0)
    phi = forward_hidden(spec, params.xi, np.array([[0.25, 0.75]]), "infer").phi
    golden = np.array([
        -0.28048565691077515, -0.11972505528403816, -0.1455647544867932,
        -0.11940076222443347, 0.147936157838027, -0.2510540513699803,
    ])
    assert np.allclose(phi[0], golden, rtol=0, atol=1e-15)


class TestAugmentedBasis:
    def test_constant_column_appended(self):
        spec = identity_dense_spec(3, augment_constant_basis=True)
        assert spec.n_basis == 4
        params = identity_params(spec)
        x = substream(17, "aug").standard_normal((6, 3))
        trace = forward_hidden(spec, params.xi, x, "infer")
        feats = head_features(spec, trace.phi)
        assert feats.shape == (6, 4)
        assert np.array_equal(feats[:, -1], np.ones(6))
