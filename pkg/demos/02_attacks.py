"""Every attack against a freshly trained softmax/cross-entropy model.

Run from the repository root:  python3 demos/02_attacks.py
Takes a few minutes; the search attacks (lbfgs, cwl2) dominate.
"""

import numpy as np

from advworkbench.attacks import AttackConfig, run_attack
from advworkbench.data import load_mnist, sample_targets, subsample
from advworkbench.model import build_network
from advworkbench.training import TrainConfig, train

train_set = subsample(load_mnist("data/mnist", "train"), 3000, 11)
test = subsample(load_mnist("data/mnist", "test"), 40, 21)
net, _ = train(build_network("o-softmax-ce"), train_set, TrainConfig(epochs=2))
targets = sample_targets(test.labels, 10, 3)

untargeted = [AttackConfig("fgsm", 0.1), AttackConfig("bim", 0.1), AttackConfig("mim", 0.1),
              AttackConfig("madry", 0.1), AttackConfig("deepfool", 20)]
targeted = [AttackConfig("bim", 0.2, targeted=True), AttackConfig("lbfgs", 1.0, targeted=True, max_iterations=200),
            AttackConfig("cwl2", 1.0, targeted=True, max_iterations=200)]

print(f"{'attack':10s} {'mode':10s} {'value':>6s} {'success':>8s} {'mean l2':>8s} {'mean linf':>9s}")
for c in untargeted + targeted:
    labels = targets if c.targeted else test.labels
    out = run_attack(net, test.images, labels, c)
    print(f"{c.kind:10s} {c.mode:10s} {c.value:6g} {out.success.mean():8.3f} {out.l2.mean():8.3f} "
          f"{out.linf.mean():9.3f}")

# l-inf attacks stay inside their ball and the [0, 1] box
out = run_attack(net, test.images, test.labels, AttackConfig("madry", 0.05))
print("madry 0.05 max |delta|:", np.abs(out.x_adv - test.images).max(), " range:", out.x_adv.min(), out.x_adv.max())
