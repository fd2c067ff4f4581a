"""Layer operator norms and cumulative upper Lipschitz bounds.

Dense layers use power iteration on W^T W. Convolutions use the 2-d DFT
method: for stride-1 circular convolution on an H x W grid, the singular
values are those of the C_out x C_in matrices of transformed kernel
coefficients at each of the H*W frequencies. For the zero padding the
networks actually use, the exact norm is also computed from the
materialized operator when it is small enough.
"""

import csv
import io
import json
from dataclasses import asdict, dataclass

import numpy as np

from . import autodiff as ad
from .model import ConvBlock, Dense, Flatten

MAX_MATERIALIZED_COLUMNS = 4096


@dataclass(frozen=True)
class PowerIterationResult:
    value: float
    iterations: int
    residual: float
    converged: bool

    def __float__(self):
        return self.value


@dataclass(frozen=True)
class LayerBoundReport:
    layer: int
    kind: str
    method: str
    norm: float
    cumulative: float


def power_iteration(matvec, rmatvec, n, tol=1e-9, max_iter=10_000, seed=0):
    """Largest singular value of a linear map given ``A v`` and ``A^T u``.

    Iterates v <- A^T A v / ||.|| and stops once the eigen-residual
    ||A^T A v - lambda v|| / lambda drops below ``tol``.
    """
    v = np.random.default_rng(seed).standard_normal(n)
    v /= np.linalg.norm(v)
    lam = 0.0
    residual = np.inf
    for it in range(1, max_iter + 1):
        w = rmatvec(matvec(v))
        lam = float(v @ w)
        if lam <= 0.0:
            return PowerIterationResult(0.0, it, 0.0, True)
        residual = float(np.linalg.norm(w - lam * v)) / lam
        v = w / np.linalg.norm(w)
        if residual < tol:
            break
    # Rayleigh quotient at the final iterate
    Av = matvec(v)
    sigma = float(np.linalg.norm(Av))
    return PowerIterationResult(sigma, it, residual, residual < tol)


def dense_operator_norm(weight, tol=1e-9, max_iter=10_000, seed=0, full=False):
    """Largest singular value of a 2-d weight matrix by power iteration on W^T W.

    Returns a float, or the full :class:`PowerIterationResult` with ``full=True``.
    """
    W = np.asarray(weight, dtype=np.float64)
    if W.ndim != 2:
        raise ValueError(f"expected a 2-d matrix, got shape {W.shape}")
    if not np.all(np.isfinite(W)):
        raise ValueError("weight matrix contains non-finite values")
    if not np.any(W):
        res = PowerIterationResult(0.0, 0, 0.0, True)
    else:
        res = power_iteration(lambda v: W @ v, lambda u: W.T @ u, W.shape[1], tol, max_iter, seed)
    return res if full else res.value


def conv_transfer_matrices(kernel, H, W):
    """(H, W, C_out, C_in) complex DFT coefficients of each zero-padded kernel slice."""
    K = np.asarray(kernel, dtype=np.float64)
    if K.ndim != 4 or K.shape[2] != K.shape[3]:
        raise ValueError(f"kernel must be (C_out, C_in, k, k), got {K.shape}")
    k = K.shape[2]
    if H < k or W < k:
        raise ValueError(f"input {H}x{W} smaller than kernel {k}x{k}")
    coeffs = np.fft.fft2(K, s=(H, W), axes=(2, 3))
    return coeffs.transpose(2, 3, 0, 1)


def conv_operator_norm_dft(kernel, H, W, stride=1):
    """Exact operator norm of the stride-1 circular convolution on an H x W input."""
    if stride != 1:
        raise ValueError("only stride-1 convolutions are supported")
    sv = np.linalg.svd(conv_transfer_matrices(kernel, H, W), compute_uv=False)
    return float(sv.max())


def materialize_conv_matrix(kernel, H, W, padding="circular"):
    """Explicit (H*W*C_out, H*W*C_in) matrix of conv2d on flattened NHWC inputs."""
    K = np.asarray(kernel, dtype=np.float64)
    cout, cin = K.shape[:2]
    n = H * W * cin
    if n > MAX_MATERIALIZED_COLUMNS:
        raise ValueError(f"materialized operator would have {n} columns (limit {MAX_MATERIALIZED_COLUMNS})")
    basis = np.eye(n).reshape(n, H, W, cin)
    out = ad.conv2d(basis, K, padding).data.reshape(n, H * W * cout)
    return out.T.copy()


def _conv_linear_map(kernel, H, W, padding):
    K = np.asarray(kernel, dtype=np.float64)
    cout, cin = K.shape[:2]
    flipped = K.transpose(1, 0, 2, 3)[:, :, ::-1, ::-1]

    def matvec(v):
        return ad.conv2d(v.reshape(1, H, W, cin), K, padding).data.ravel()

    def rmatvec(u):
        # adjoint of zero/circular 'same' correlation is correlation with the flipped, transposed kernel
        return ad.conv2d(u.reshape(1, H, W, cout), flipped, padding).data.ravel()

    return matvec, rmatvec, H * W * cin


def conv_operator_norm_exact(kernel, H, W, padding="zero", tol=1e-9):
    """Operator norm of the actual conv2d map.

    Uses a full SVD of the materialized matrix when it fits, otherwise
    matrix-free power iteration with conv2d and its adjoint.
    """
    K = np.asarray(kernel, dtype=np.float64)
    if H * W * K.shape[1] <= MAX_MATERIALIZED_COLUMNS:
        return float(np.linalg.svd(materialize_conv_matrix(K, H, W, padding), compute_uv=False)[0])
    matvec, rmatvec, n = _conv_linear_map(K, H, W, padding)
    return power_iteration(matvec, rmatvec, n, tol=tol).value


def network_lipschitz_bounds(network, include_exact=False, seed=0):
    """Per-layer operator norms and the cumulative product Lambda^l = ||theta^l|| Lambda^(l-1).

    Rows are produced for every layer stage: conv (DFT norm), relu, max-pool,
    flatten, dense (power iteration) and the output head; activations,
    pooling, flatten and the head enter with factor 1. With
    ``include_exact=True`` each conv row is followed by an informational row
    (kind ``conv-<padding>-padding``) holding the exact norm for the
    network's own padding; it does not enter the product. ``seed`` picks the
    power-iteration start vectors.
    """
    rows = []
    cumulative = 1.0
    H, W, _ = network.input_shape
    idx = 0

    def add(kind, method, norm, counts=True):
        nonlocal cumulative, idx
        if counts:
            cumulative *= norm
        rows.append(LayerBoundReport(idx, kind, method, float(norm), float(cumulative)))
        idx += 1

    for layer, p in zip(network.layers, network.params):
        if isinstance(layer, ConvBlock):
            add("conv", "dft", conv_operator_norm_dft(p["w"], H, W))
            if include_exact:
                add(f"conv-{layer.padding}-padding", "exact-svd-oracle",
                    conv_operator_norm_exact(p["w"], H, W, layer.padding), counts=False)
            add("relu", "identity", 1.0)
            if layer.pool:
                add("maxpool", "identity", 1.0)
                H, W = H // 2, W // 2
        elif isinstance(layer, Flatten):
            add("flatten", "identity", 1.0)
        elif isinstance(layer, Dense):
            add("dense", "power-iteration", dense_operator_norm(p["w"].T, seed=seed))
            if layer.relu:
                add("relu", "identity", 1.0)
    add(network.head, "identity", 1.0)
    return rows


def conv_bounds(rows):
    """The DFT-method conv rows, in order."""
    return [r for r in rows if r.kind == "conv" and r.method == "dft"]


COLUMNS = ("layer", "kind", "method", "norm", "cumulative")


def bounds_to_csv(rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for r in rows:
        w.writerow([r.layer, r.kind, r.method, f"{r.norm:.6f}", f"{r.cumulative:.6f}"])
    return buf.getvalue()


def bounds_to_json(rows):
    return json.dumps([asdict(r) for r in rows], indent=2, sort_keys=True) + "\n"


def compare_conv_bounds(rows_a, rows_b, name_a="a", name_b="b"):
    """Per-conv-layer table of two models' bounds and their ratio b / a."""
    out = []
    for i, (ra, rb) in enumerate(zip(conv_bounds(rows_a), conv_bounds(rows_b))):
        out.append({"conv_layer": i, name_a: ra.norm, name_b: rb.norm, "ratio": rb.norm / ra.norm})
    return out


def comparison_to_csv(table):
    """CSV for :func:`compare_conv_bounds` output (6-decimal values)."""
    if not table:
        raise ValueError("nothing to compare: no conv layers")
    names = list(table[0])
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(names)
    for row in table:
        w.writerow([row[k] if k == "conv_layer" else f"{row[k]:.6f}" for k in names])
    return buf.getvalue()
