"""Small CNN classifiers with softmax or tanh heads, their losses and decoding rules.

Three variants are supported:

``o-softmax-ce``   one-hot targets, softmax outputs, cross-entropy
``o-softmax-mse``  one-hot targets, softmax outputs, mean-squared error
``r-tanh-mse``     random codeword targets, tanh outputs, mean-squared error

Images are float64 arrays of shape (N, H, W, C) with pixels in [0, 1].
"""

from dataclasses import dataclass, field, replace

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .codebook import Codebook, generate_codebook

HEADS = ("softmax", "tanh")
LOSSES = ("cross-entropy", "mse")
VARIANTS = {
    "o-softmax-ce": ("softmax", "cross-entropy"),
    "o-softmax-mse": ("softmax", "mse"),
    "r-tanh-mse": ("tanh", "mse"),
}
PROB_FLOOR = 1e-12
EVAL_BATCH = 250


@dataclass(frozen=True)
class ConvBlock:
    """k x k conv (stride 1, same size) followed by relu and optional 2x2 max-pool."""

    out_channels: int
    kernel: int = 3
    padding: str = "zero"
    pool: bool = True


@dataclass(frozen=True)
class Flatten:
    pass


@dataclass(frozen=True)
class Dense:
    units: int
    relu: bool = True


def layer_to_dict(layer):
    if isinstance(layer, ConvBlock):
        return {"type": "conv", "out_channels": layer.out_channels, "kernel": layer.kernel,
                "padding": layer.padding, "pool": layer.pool}
    if isinstance(layer, Flatten):
        return {"type": "flatten"}
    if isinstance(layer, Dense):
        return {"type": "dense", "units": layer.units, "relu": layer.relu}
    raise TypeError(f"unknown layer {layer!r}")


def layer_from_dict(d):
    kind = d["type"]
    if kind == "conv":
        return ConvBlock(d["out_channels"], d["kernel"], d["padding"], d["pool"])
    if kind == "flatten":
        return Flatten()
    if kind == "dense":
        return Dense(d["units"], d["relu"])
    raise ValueError(f"unknown layer type {kind!r}")


def desk_layers(output_dim):
    """The fixed small CNN shared by all three variants."""
    return (ConvBlock(16), ConvBlock(32), Flatten(), Dense(128), Dense(output_dim, relu=False))


def _param_shapes(layers, input_shape):
    H, W, C = input_shape
    shapes = []
    flat = None
    for layer in layers:
        if isinstance(layer, ConvBlock):
            if flat is not None:
                raise ValueError("conv layer after flatten")
            k = layer.kernel
            shapes.append({"w": (layer.out_channels, C, k, k), "b": (layer.out_channels,)})
            C = layer.out_channels
            if layer.pool:
                H, W = H // 2, W // 2
        elif isinstance(layer, Flatten):
            flat = H * W * C
            shapes.append({})
        elif isinstance(layer, Dense):
            if flat is None:
                raise ValueError("dense layer before flatten")
            shapes.append({"w": (flat, layer.units), "b": (layer.units,)})
            flat = layer.units
        else:
            raise TypeError(f"unknown layer {layer!r}")
    return shapes


@dataclass(eq=False)
class Network:
    """Layer specs, per-layer parameters, output head and training loss.

    ``params`` holds one dict per layer (``{"w", "b"}`` for conv and dense
    layers, empty for flatten). ``codebook`` is required for tanh heads.
    """

    layers: tuple
    params: list
    head: str
    loss_kind: str
    input_shape: tuple
    n_classes: int
    codebook: Codebook = None
    variant: str = None
    seeds: dict = field(default_factory=dict)

    def __post_init__(self):
        self.layers = tuple(self.layers)
        self.input_shape = tuple(int(s) for s in self.input_shape)
        errors = []
        if self.head not in HEADS:
            errors.append(f"unknown head {self.head!r}")
        if self.loss_kind not in LOSSES:
            errors.append(f"unknown loss kind {self.loss_kind!r}")
        if self.head == "tanh" and self.loss_kind != "mse":
            errors.append("tanh heads must be trained with mse")
        if not self.layers or not isinstance(self.layers[-1], Dense) or self.layers[-1].relu:
            errors.append("the last layer must be a dense layer without relu")
        if self.head == "tanh":
            if self.codebook is None:
                errors.append("tanh heads need a codebook")
            elif self.codebook.n_classes != self.n_classes:
                errors.append("codebook size does not match n_classes")
        expected_dim = self.n_classes if self.head == "softmax" else (
            self.codebook.d if self.codebook is not None else None)
        if self.layers and isinstance(self.layers[-1], Dense) and expected_dim is not None \
                and self.layers[-1].units != expected_dim:
            errors.append(f"output layer width {self.layers[-1].units} != output_dim {expected_dim}")
        if errors:
            raise ValueError("invalid network: " + "; ".join(errors))
        shapes = _param_shapes(self.layers, self.input_shape)
        if len(shapes) != len(self.params):
            raise ValueError("params do not match layers")
        for i, (want, got) in enumerate(zip(shapes, self.params)):
            if set(want) != set(got) or any(tuple(got[k].shape) != want[k] for k in want):
                raise ValueError(f"layer {i}: parameter shapes do not match the layer spec")

    @property
    def output_dim(self):
        return self.layers[-1].units

    def copy(self):
        return replace(self, params=[{k: v.copy() for k, v in p.items()} for p in self.params],
                       seeds=dict(self.seeds))


def init_params(layers, input_shape, seed):
    """Fan-in scaled uniform weights (limit sqrt(6 / fan_in)), zero biases."""
    rng = np.random.default_rng(seed)
    params = []
    for shapes in _param_shapes(layers, input_shape):
        p = {}
        if shapes:
            wshape = shapes["w"]
            fan_in = int(np.prod(wshape[1:])) if len(wshape) == 4 else wshape[0]
            limit = np.sqrt(6.0 / fan_in)
            p["w"] = rng.uniform(-limit, limit, size=wshape)
            p["b"] = np.zeros(shapes["b"])
        params.append(p)
    return params


def build_network(variant, input_shape=(28, 28, 1), n_classes=10, d=128, seed=0,
                  codebook_seed=7, layers=None):
    """Fresh network for one of :data:`VARIANTS` with seeded weights."""
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; expected one of {sorted(VARIANTS)}")
    head, loss_kind = VARIANTS[variant]
    codebook = generate_codebook(codebook_seed, n_classes, d) if head == "tanh" else None
    output_dim = d if head == "tanh" else n_classes
    layers = tuple(layers) if layers is not None else desk_layers(output_dim)
    seeds = {"init": int(seed)}
    if codebook is not None:
        seeds["codebook"] = int(codebook_seed)
    return Network(layers, init_params(layers, input_shape, seed), head, loss_kind,
                   input_shape, n_classes, codebook, variant, seeds)


def representations(network, codebook=None):
    """(n_classes, output_dim) matrix of class target representations."""
    if network.head == "tanh":
        cb = codebook if codebook is not None else network.codebook
        if cb is None:
            raise ValueError("a codebook is required for tanh heads")
        return cb.codewords
    return np.eye(network.n_classes)


def encode_target(label, network, codebook=None):
    """One-hot vector for softmax heads, codeword row for tanh heads (vectorised over labels)."""
    labels = np.asarray(label)
    if np.any(labels < 0) or np.any(labels >= network.n_classes):
        raise ValueError(f"label out of range [0, {network.n_classes})")
    return representations(network, codebook)[labels].copy()


def _check_batch(network, x):
    shape = getattr(x, "shape", None)
    if shape is None or len(shape) != 4 or tuple(shape[1:]) != network.input_shape:
        raise ad.ShapeError(f"forward: expected batch of shape (N, {', '.join(map(str, network.input_shape))}),"
                            f" got {shape}")


def graph(network, x, params=None):
    """Build the forward computation; returns ``(logits, outputs)`` Tensors.

    ``params`` may hold Tensors (e.g. watched for training); by default the
    network's own arrays are used as constants.
    """
    x = x if isinstance(x, Tensor) else Tensor(x)
    _check_batch(network, x)
    if params is None:
        params = [{k: Tensor(v) for k, v in p.items()} for p in network.params]
    h = x
    for layer, p in zip(network.layers, params):
        if isinstance(layer, ConvBlock):
            h = ad.relu(ad.add_bias(ad.conv2d(h, p["w"], layer.padding), p["b"]))
            if layer.pool:
                h = ad.maxpool2x2(h)
        elif isinstance(layer, Flatten):
            h = ad.reshape(h, (h.shape[0], -1))
        else:
            h = ad.add_bias(ad.matmul(h, p["w"]), p["b"])
            if layer.relu:
                h = ad.relu(h)
    logits = h
    outputs = ad.softmax(logits) if network.head == "softmax" else ad.tanh(logits)
    return logits, outputs


def forward(network, batch):
    """Head outputs, shape (N, output_dim)."""
    return graph(network, batch)[1].numpy()


def logits(network, batch):
    """Pre-head activations, shape (N, output_dim)."""
    return graph(network, batch)[0].numpy()


def loss(outputs, targets, loss_kind):
    """Batch-mean loss as a scalar Tensor.

    cross-entropy: mean over the batch of -sum_k t_k log(clamp(p_k, 1e-12, 1))
    mse: mean over batch and coordinates of (o_k - t_k)^2
    """
    outputs = outputs if isinstance(outputs, Tensor) else Tensor(outputs)
    targets = targets if isinstance(targets, Tensor) else Tensor(targets)
    if outputs.shape != targets.shape:
        raise ad.ShapeError(f"loss: shape mismatch {outputs.shape} vs {targets.shape}")
    if loss_kind == "mse":
        return ad.mean(ad.square(ad.sub(outputs, targets)))
    if loss_kind == "cross-entropy":
        logp = ad.log(ad.clip(outputs, PROB_FLOOR, 1.0))
        return ad.scale(ad.sum(ad.mul(targets, logp)), -1.0 / outputs.shape[0])
    raise ValueError(f"unknown loss kind {loss_kind!r}")


def class_distances(outputs, reps):
    """Euclidean distances between each output row and each representation, (N, n_classes)."""
    outputs = np.atleast_2d(np.asarray(outputs, dtype=np.float64))
    diff = outputs[:, None, :] - np.asarray(reps)[None, :, :]
    return np.sqrt((diff * diff).sum(axis=-1))


def decode_prediction(outputs, network, codebook=None):
    """Class labels for a batch of outputs (a single row gives a single label).

    softmax + cross-entropy decodes by argmax; MSE-trained heads decode to the
    class whose target representation is nearest in euclidean distance.
    Ties go to the lowest class index.
    """
    arr = np.asarray(outputs, dtype=np.float64)
    single = arr.ndim == 1
    arr = np.atleast_2d(arr)
    if network.head == "softmax" and network.loss_kind == "cross-entropy":
        labels = arr.argmax(axis=1)
    else:
        labels = class_distances(arr, representations(network, codebook)).argmin(axis=1)
    return int(labels[0]) if single else labels


def predict(network, images, batch_size=EVAL_BATCH):
    """Decoded labels for a stack of images, evaluated in fixed-size chunks."""
    out = [decode_prediction(forward(network, images[i:i + batch_size]), network)
           for i in range(0, len(images), batch_size)]
    return np.concatenate(out) if out else np.zeros(0, dtype=int)


def accuracy(network, images, labels, batch_size=EVAL_BATCH):
    return float(np.mean(predict(network, images, batch_size) == np.asarray(labels)))
