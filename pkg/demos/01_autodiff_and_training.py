"""Tape autodiff, then a quick model of each variant.

Run from the repository root:  python3 demos/01_autodiff_and_training.py
Takes about a minute (2000 training images, one epoch per variant).
"""

import numpy as np

from advworkbench import autodiff as ad
from advworkbench.autodiff import Tape, Tensor, backward, finite_difference_check
from advworkbench.data import load_mnist, subsample
from advworkbench.model import VARIANTS, accuracy, build_network
from advworkbench.training import TrainConfig, train

# a tiny function and its gradient
x = Tensor(np.array([0.5, -1.0, 2.0]))
with Tape() as tape:
    tape.watch(x)
    y = ad.sum(ad.tanh(ad.square(x)))
print("d/dx sum tanh(x^2) =", backward(tape, y)[x])
print("matches 2x(1 - tanh(x^2)^2):", 2 * x.data * (1 - np.tanh(x.data ** 2) ** 2))

# the same check the test suite runs, on a conv + pool stack
img = Tensor(np.random.default_rng(0).uniform(size=(1, 6, 6, 2)))
kernel = Tensor(np.random.default_rng(1).standard_normal((3, 2, 3, 3)))
err = finite_difference_check(lambda t: ad.sum(ad.maxpool2x2(ad.relu(ad.conv2d(t, kernel)))), img, step=1e-7)
print(f"conv/relu/pool gradient vs central differences: max rel err {err:.1e}")

train_set = subsample(load_mnist("data/mnist", "train"), 2000, 11)
test_set = subsample(load_mnist("data/mnist", "test"), 500, 12)
for variant in VARIANTS:
    net = build_network(variant)
    net, history = train(net, train_set, TrainConfig(epochs=1), test_set)
    print(f"{variant:14s} head={net.head:7s} loss={net.loss_kind:13s} "
          f"test accuracy {accuracy(net, test_set.images, test_set.labels):.3f}")

# the codeword variant decodes to the nearest codeword; the codebook is seeded
print("codebook shape", net.codebook.codewords.shape, "seed", net.seeds["codebook"])
