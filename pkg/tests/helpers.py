"""Small networks and datasets shared by the unit tests."""

import numpy as np

from advworkbench.codebook import Codebook, generate_codebook
from advworkbench.data import Dataset
from advworkbench.model import VARIANTS, ConvBlock, Dense, Flatten, Network, init_params


def tiny_net(variant="o-softmax-ce", seed=0, d=6, n_classes=4):
    head, loss_kind = VARIANTS[variant]
    out = d if head == "tanh" else n_classes
    layers = (ConvBlock(3), Flatten(), Dense(8), Dense(out, relu=False))
    cb = generate_codebook(3, n_classes, d) if head == "tanh" else None
    return Network(layers, init_params(layers, (6, 6, 1), seed), head, loss_kind, (6, 6, 1), n_classes, cb,
                   variant, {"init": seed})


def zero_net(variant="o-softmax-ce"):
    net = tiny_net(variant)
    return Network(net.layers, [{k: np.zeros_like(v) for k, v in p.items()} for p in net.params], net.head,
                   net.loss_kind, net.input_shape, net.n_classes, net.codebook, variant)


def linear_net(weight, head="softmax", loss_kind="cross-entropy", codewords=None):
    """Flatten + one affine layer on a (1, n_pixels, 1) input."""
    weight = np.asarray(weight, dtype=np.float64)
    n_in, n_out = weight.shape
    cb = None
    n_classes = n_out
    if codewords is not None:
        cb = Codebook(np.asarray(codewords, dtype=np.float64), seed=0)
        n_classes = cb.n_classes
    layers = (Flatten(), Dense(n_out, relu=False))
    params = [{}, {"w": weight, "b": np.zeros(n_out)}]
    return Network(layers, params, head, loss_kind, (1, n_in, 1), n_classes, cb)


def toy_dataset(n=64, seed=0):
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, 4, n)
    images = rng.uniform(0, 0.2, (n, 6, 6, 1))
    for i, lab in enumerate(labels):  # class = which quadrant is bright
        r, c = divmod(int(lab), 2)
        images[i, 3 * r:3 * r + 3, 3 * c:3 * c + 3, 0] += 0.7
    return Dataset(images, labels, "train", n_classes=4)
