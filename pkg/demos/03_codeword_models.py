"""Attacking a tanh/codeword model: naive CW margin vs the distance-based margin.

A CW attacker that treats the tanh outputs like logits optimises the wrong
margin; the modified attack measures distances to the codewords instead.

Run from the repository root:  python3 demos/03_codeword_models.py
"""

from advworkbench.attacks import AttackConfig, AttackError, check_compatible, run_attack
from advworkbench.data import load_mnist, sample_targets, subsample
from advworkbench.model import build_network
from advworkbench.training import TrainConfig, train

train_set = subsample(load_mnist("data/mnist", "train"), 3000, 11)
test = subsample(load_mnist("data/mnist", "test"), 30, 21)
net, _ = train(build_network("r-tanh-mse"), train_set, TrainConfig(epochs=2))
targets = sample_targets(test.labels, 10, 3)

try:
    check_compatible(net, AttackConfig("cwl2", 1.0, targeted=True))
except AttackError as err:
    print("plain cwl2 refused:", err)

for c in (AttackConfig("cwl2", 1.0, targeted=True, naive=True, max_iterations=300),
          AttackConfig("modified_cwl2", 1.0, targeted=True, max_iterations=300)):
    out = run_attack(net, test.images, targets, c)
    name = c.kind + (" (naive)" if c.naive else "")
    print(f"{name:16s} targeted success {out.success.mean():.3f}, mean l2 {out.l2.mean():.3f}")
