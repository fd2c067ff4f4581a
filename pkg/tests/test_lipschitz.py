import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from advworkbench import autodiff as ad
from advworkbench import lipschitz as lip
from advworkbench.model import Dense, Flatten, Network, init_params
from helpers import linear_net, tiny_net


def svd_norm(m):
    return np.linalg.svd(m, compute_uv=False)[0]


def test_dense_identity():
    assert lip.dense_operator_norm(np.eye(3)) == pytest.approx(1.0, rel=1e-12)


def test_dense_diagonal():
    assert lip.dense_operator_norm(np.diag([3.0, 1.0])) == pytest.approx(3.0, rel=1e-12)


def test_dense_seeded_8x5_matches_svd():
    m = np.random.default_rng(8).standard_normal((8, 5))
    res = lip.dense_operator_norm(m, full=True)
    assert res.converged and res.residual < 1e-9
    assert abs(res.value - svd_norm(m)) / svd_norm(m) < 1e-9


def test_dense_zero_matrix():
    assert lip.dense_operator_norm(np.zeros((4, 3))) == 0.0


def test_dense_rejects_bad_input():
    with pytest.raises(ValueError, match="2-d"):
        lip.dense_operator_norm(np.ones(3))
    with pytest.raises(ValueError, match="non-finite"):
        lip.dense_operator_norm(np.array([[np.nan, 1.0]]))


def test_dense_nonconvergence_flagged():
    # nearly repeated top singular values converge slowly
    m = np.diag([1.0, 1.0 - 1e-9, 0.5])
    res = lip.dense_operator_norm(m, max_iter=5, full=True)
    assert not res.converged and res.iterations == 5
    assert res.value <= 1.0 + 1e-12


@given(st.integers(0, 2**31), st.integers(1, 64), st.integers(1, 64))
@settings(max_examples=50, deadline=None)
def test_power_iteration_matches_svd(seed, rows, cols):
    m = np.random.default_rng(seed).standard_normal((rows, cols))
    assert abs(lip.dense_operator_norm(m) - svd_norm(m)) / svd_norm(m) < 1e-9


@given(st.integers(0, 2**31), st.floats(-5, 5).filter(lambda s: abs(s) > 1e-3))
@settings(max_examples=50, deadline=None)
def test_norms_absolutely_homogeneous(seed, s):
    rng = np.random.default_rng(seed)
    m = rng.standard_normal((6, 4))
    k = rng.standard_normal((2, 2, 3, 3))
    assert lip.dense_operator_norm(s * m) == pytest.approx(abs(s) * lip.dense_operator_norm(m), rel=1e-9)
    assert lip.conv_operator_norm_dft(s * k, 6, 6) == pytest.approx(abs(s) * lip.conv_operator_norm_dft(k, 6, 6),
                                                                     rel=1e-12)


def test_dft_single_pixel_kernel():
    assert lip.conv_operator_norm_dft(np.full((1, 1, 1, 1), -2.5), 4, 4) == pytest.approx(2.5, rel=1e-14)


def test_dft_averaging_kernel():
    assert lip.conv_operator_norm_dft(np.full((1, 1, 3, 3), 1 / 9), 5, 7) == pytest.approx(1.0, rel=1e-14)


def test_dft_seeded_kernel_matches_materialised():
    k = np.random.default_rng(0).standard_normal((2, 2, 3, 3))
    m = lip.materialize_conv_matrix(k, 6, 6, "circular")
    assert m.shape == (72, 72)
    assert abs(lip.conv_operator_norm_dft(k, 6, 6) - svd_norm(m)) / svd_norm(m) < 1e-9


@given(st.integers(0, 2**31), st.sampled_from([1, 3]), st.integers(1, 3), st.integers(1, 3),
       st.integers(3, 8), st.integers(3, 8))
@settings(max_examples=60, deadline=None)
def test_dft_matches_materialised_circular(seed, k, cin, cout, H, W):
    kernel = np.random.default_rng(seed).standard_normal((cout, cin, k, k))
    exact = svd_norm(lip.materialize_conv_matrix(kernel, H, W, "circular"))
    assert abs(lip.conv_operator_norm_dft(kernel, H, W) - exact) / exact < 1e-9


def test_dft_rejects_stride_and_small_input():
    k = np.ones((1, 1, 3, 3))
    with pytest.raises(ValueError, match="stride"):
        lip.conv_operator_norm_dft(k, 6, 6, stride=2)
    with pytest.raises(ValueError, match="smaller than kernel"):
        lip.conv_operator_norm_dft(k, 2, 6)


def test_materialise_identity_kernel():
    k = np.zeros((2, 2, 1, 1))
    k[0, 0] = k[1, 1] = 1.0
    assert np.array_equal(lip.materialize_conv_matrix(k, 3, 4), np.eye(24))


@pytest.mark.parametrize("padding", ["zero", "circular"])
def test_materialise_linearity_probe(padding):
    rng = np.random.default_rng(1)
    k = rng.standard_normal((3, 2, 3, 3))
    m = lip.materialize_conv_matrix(k, 5, 6, padding)
    for _ in range(20):
        x = rng.standard_normal((1, 5, 6, 2))
        np.testing.assert_allclose(m @ x.ravel(), ad.conv2d(x, k, padding).data.ravel(), rtol=0, atol=1e-12)


def test_materialise_paddings_differ_only_on_boundary():
    k = np.random.default_rng(2).standard_normal((1, 1, 3, 3))
    H = W = 6
    diff = np.any(lip.materialize_conv_matrix(k, H, W, "zero") != lip.materialize_conv_matrix(k, H, W, "circular"),
                  axis=1).reshape(H, W)
    interior = np.zeros((H, W), dtype=bool)
    interior[1:-1, 1:-1] = True
    assert not np.any(diff[interior]) and np.all(diff[~interior])


def test_materialise_size_guard():
    with pytest.raises(ValueError, match="columns"):
        lip.materialize_conv_matrix(np.ones((1, 2, 3, 3)), 64, 64)


@pytest.mark.parametrize("padding", ["zero", "circular"])
def test_exact_norm_matrix_free_path_agrees(padding, monkeypatch):
    k = np.random.default_rng(3).standard_normal((2, 2, 3, 3))
    direct = lip.conv_operator_norm_exact(k, 6, 6, padding)
    monkeypatch.setattr(lip, "MAX_MATERIALIZED_COLUMNS", 10)
    assert lip.conv_operator_norm_exact(k, 6, 6, padding) == pytest.approx(direct, rel=1e-8)


def test_zero_padding_norm_not_above_circular():
    # zero padding restricts the circular operator to a subspace-like truncation
    k = np.abs(np.random.default_rng(4).standard_normal((2, 1, 3, 3)))
    assert lip.conv_operator_norm_exact(k, 6, 6, "zero") <= lip.conv_operator_norm_dft(k, 6, 6) + 1e-12


def test_single_dense_network_bound():
    w = np.random.default_rng(5).standard_normal((4, 3))
    rows = lip.network_lipschitz_bounds(linear_net(w))
    dense = [r for r in rows if r.kind == "dense"]
    assert len(dense) == 1
    assert rows[-1].cumulative == pytest.approx(svd_norm(w), rel=1e-9)


def test_relu_leaves_bound_unchanged():
    layers = (Flatten(), Dense(5, relu=True), Dense(3, relu=False))
    net = Network(layers, init_params(layers, (1, 4, 1), 0), "softmax", "cross-entropy", (1, 4, 1), 3)
    rows = lip.network_lipschitz_bounds(net)
    relu = next(i for i, r in enumerate(rows) if r.kind == "relu")
    assert rows[relu].norm == 1.0 and rows[relu].cumulative == rows[relu - 1].cumulative


@pytest.mark.parametrize("variant", ["o-softmax-ce", "r-tanh-mse"])
def test_cumulative_is_product(variant):
    rows = lip.network_lipschitz_bounds(tiny_net(variant, seed=1))
    assert rows[-1].cumulative == pytest.approx(np.prod([r.norm for r in rows]), rel=1e-12)
    assert [r.kind for r in rows] == ["conv", "relu", "maxpool", "flatten", "dense", "relu", "dense",
                                      tiny_net(variant).head]
    assert all(r.norm >= 0 for r in rows)


def test_exact_rows_do_not_enter_product():
    net = tiny_net(seed=1)
    plain = lip.network_lipschitz_bounds(net)
    both = lip.network_lipschitz_bounds(net, include_exact=True)
    exact = [r for r in both if r.method == "exact-svd-oracle"]
    assert len(exact) == 1 and exact[0].kind == "conv-zero-padding"
    assert both[-1].cumulative == plain[-1].cumulative
    H, W, _ = net.input_shape
    assert exact[0].norm == pytest.approx(svd_norm(lip.materialize_conv_matrix(net.params[0]["w"], H, W, "zero")),
                                          rel=1e-12)


def test_bounds_reproducible_and_emitted():
    rows = lip.network_lipschitz_bounds(tiny_net(seed=2))
    assert rows == lip.network_lipschitz_bounds(tiny_net(seed=2))
    text = lip.bounds_to_csv(rows)
    header, first = text.splitlines()[:2]
    assert header == "layer,kind,method,norm,cumulative"
    assert first.startswith("0,conv,dft,")
    back = json.loads(lip.bounds_to_json(rows))
    assert [lip.LayerBoundReport(**r) for r in back] == rows


def test_compare_conv_bounds_ratio():
    a = lip.network_lipschitz_bounds(tiny_net(seed=2))
    b = lip.network_lipschitz_bounds(tiny_net(seed=3))
    table = lip.compare_conv_bounds(a, b, "ce", "mse")
    assert len(table) == 1
    assert table[0]["ratio"] == pytest.approx(table[0]["mse"] / table[0]["ce"])
