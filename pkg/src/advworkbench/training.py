"""Minibatch training for :class:`~advworkbench.model.Network`."""

import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tape, Tensor
from .model import accuracy, encode_target, graph, loss

log = logging.getLogger(__name__)

OPTIMIZERS = ("sgd", "sgd-momentum", "adam")


class TrainingDiverged(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 5
    batch_size: int = 64
    learning_rate: float = 1e-3
    optimizer: str = "adam"
    init_seed: int = 0
    shuffle_seed: int = 1
    momentum: float = 0.9

    def __post_init__(self):
        errors = self.validate()
        if errors:
            raise ValueError("invalid train config: " + "; ".join(errors))

    def validate(self):
        errors = []
        if self.epochs < 0:
            errors.append("epochs must be >= 0")
        if self.batch_size < 1:
            errors.append("batch_size must be positive")
        if not self.learning_rate > 0:
            errors.append("learning_rate must be positive")
        if self.optimizer not in OPTIMIZERS:
            errors.append(f"optimizer must be one of {OPTIMIZERS}")
        if self.init_seed < 0 or self.shuffle_seed < 0:
            errors.append("seeds must be non-negative")
        return errors

    def to_dict(self):
        return asdict(self)


@dataclass
class History:
    epochs: list = field(default_factory=list)
    batch_losses: list = field(default_factory=list)

    @property
    def final_test_accuracy(self):
        return self.epochs[-1]["test_accuracy"] if self.epochs else None

    def to_dict(self):
        return {"epochs": self.epochs, "batch_losses": self.batch_losses}


class _Adam:
    def __init__(self, params, lr, b1=0.9, b2=0.999, eps=1e-8):
        self.lr, self.b1, self.b2, self.eps = lr, b1, b2, eps
        self.m = [{k: np.zeros_like(v) for k, v in p.items()} for p in params]
        self.v = [{k: np.zeros_like(v) for k, v in p.items()} for p in params]
        self.t = 0

    def step(self, params, grads):
        self.t += 1
        c1 = 1 - self.b1 ** self.t
        c2 = 1 - self.b2 ** self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            for k in p:
                m[k] = self.b1 * m[k] + (1 - self.b1) * g[k]
                v[k] = self.b2 * v[k] + (1 - self.b2) * g[k] ** 2
                p[k] = p[k] - self.lr * (m[k] / c1) / (np.sqrt(v[k] / c2) + self.eps)


class _SGD:
    def __init__(self, params, lr, momentum=0.0):
        self.lr, self.mu = lr, momentum
        self.vel = [{k: np.zeros_like(v) for k, v in p.items()} for p in params]

    def step(self, params, grads):
        for p, g, vel in zip(params, grads, self.vel):
            for k in p:
                vel[k] = self.mu * vel[k] - self.lr * g[k]
                p[k] = p[k] + vel[k]


def _make_optimizer(config, params):
    if config.optimizer == "adam":
        return _Adam(params, config.learning_rate)
    if config.optimizer == "sgd-momentum":
        return _SGD(params, config.learning_rate, config.momentum)
    return _SGD(params, config.learning_rate)


def loss_and_grads(network, params, images, targets):
    """Batch loss and parameter gradients at ``params``."""
    tparams = [{k: Tensor(v) for k, v in p.items()} for p in params]
    with Tape() as tape:
        for p in tparams:
            for t in p.values():
                tape.watch(t)
        _, out = graph(network, images, tparams)
        value = loss(out, targets, network.loss_kind)
    g = ad.backward(tape, value)
    return float(value.data), [{k: g[t] for k, t in p.items()} for p in tparams]


def train(network, dataset, config, test_set=None):
    """Train a copy of ``network``; returns ``(trained_network, history)``.

    ``dataset`` and ``test_set`` need ``images`` and ``labels`` attributes.
    The minibatch order is drawn from ``config.shuffle_seed``; the result is
    deterministic given the network's initial weights and the config.
    """
    labels = np.asarray(dataset.labels)
    if np.any(labels < 0) or np.any(labels >= network.n_classes):
        raise ValueError(f"dataset labels must lie in [0, {network.n_classes})")
    net = network.copy()
    history = History()
    if config.epochs == 0:
        return net, history
    params = net.params
    opt = _make_optimizer(config, params)
    rng = np.random.default_rng(config.shuffle_seed)
    images = dataset.images
    n = len(labels)
    targets_all = encode_target(labels, net)
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        losses = []
        for b, start in enumerate(range(0, n, config.batch_size)):
            idx = order[start:start + config.batch_size]
            value, grads = loss_and_grads(net, params, images[idx], targets_all[idx])
            if not np.isfinite(value) or any(not np.all(np.isfinite(g[k])) for g in grads for k in g):
                raise TrainingDiverged(f"loss became non-finite at epoch {epoch}, batch {b}")
            opt.step(params, grads)
            losses.append(value)
        history.batch_losses.extend(losses)
        record = {"epoch": epoch, "train_loss": float(np.mean(losses))}
        if test_set is not None:
            record["test_accuracy"] = accuracy(net, test_set.images, test_set.labels)
        history.epochs.append(record)
        log.info("epoch %d: %s", epoch, record)
    net.seeds = {**net.seeds, "shuffle": int(config.shuffle_seed)}
    return net, history
