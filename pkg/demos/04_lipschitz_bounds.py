"""Layer operator norms and cumulative Lipschitz bounds.

Run from the repository root:  python3 demos/04_lipschitz_bounds.py
"""

import numpy as np

from advworkbench import lipschitz as lip
from advworkbench.data import load_mnist, subsample
from advworkbench.model import build_network
from advworkbench.training import TrainConfig, train

# the DFT norm of a circular convolution equals the SVD of the full operator
kernel = np.random.default_rng(0).standard_normal((3, 2, 3, 3))
dft = lip.conv_operator_norm_dft(kernel, 8, 8)
svd = np.linalg.svd(lip.materialize_conv_matrix(kernel, 8, 8, "circular"), compute_uv=False)[0]
print(f"conv norm: dft {dft:.10f}  svd {svd:.10f}")
print(f"zero padding (what the models use): {lip.conv_operator_norm_exact(kernel, 8, 8):.10f}")

train_set = subsample(load_mnist("data/mnist", "train"), 3000, 11)
bounds = {}
for variant in ("o-softmax-ce", "o-softmax-mse"):
    net, _ = train(build_network(variant), train_set, TrainConfig(epochs=2))
    bounds[variant] = lip.network_lipschitz_bounds(net)
    print(f"\n{variant}")
    print(lip.bounds_to_csv(bounds[variant]), end="")

print("\nconv layers, mse / ce:")
print(lip.comparison_to_csv(lip.compare_conv_bounds(bounds["o-softmax-ce"], bounds["o-softmax-mse"],
                                                    "o-softmax-ce", "o-softmax-mse")), end="")
