"""Adversarial attacks against :class:`~advworkbench.model.Network` models.

Every attack is batched: ``x`` is an (N, H, W, C) array in [0, 1] and
``labels`` holds the true classes (untargeted mode) or the target classes
(targeted mode). Each call returns an :class:`AttackOutcome` whose
``success`` flags come from re-decoding the returned images.

Gradient-sign attacks differentiate the loss the model was trained with
(cross-entropy for CE models, MSE against the class representation for MSE
models). The optimisation attacks (lbfgs, cwl2, modified_cwl2) share one
binary search over their constant and track the smallest successful l2
distortion per image.
"""

from dataclasses import dataclass, field, fields, replace

import numpy as np

from . import autodiff as ad
from .autodiff import Tape, Tensor
from .model import PROB_FLOOR, class_distances, decode_prediction, encode_target, graph, loss, representations

KINDS = ("fgsm", "bim", "mim", "madry", "deepfool", "lbfgs", "cwl2", "modified_cwl2")
EPS_FAMILY = ("fgsm", "bim", "mim", "madry")
SEARCH_FAMILY = ("lbfgs", "cwl2", "modified_cwl2")

PARAM_NAME = {"fgsm": "eps", "bim": "eps", "mim": "eps", "madry": "eps",
              "deepfool": "max_iter", "lbfgs": "c", "cwl2": "c", "modified_cwl2": "c"}

# swept values per attack
DEFAULT_GRIDS = {
    "fgsm": (0.01, 0.05, 0.1, 0.2),
    "bim": (0.01, 0.05, 0.1, 0.2),
    "mim": (0.01, 0.05, 0.1, 0.2),
    "madry": (0.02, 0.04, 0.08, 0.1),
    "deepfool": (10, 20, 30, 40),
    "lbfgs": (0.01, 0.1, 1, 10),
    "cwl2": (0.01, 0.1, 1, 10),
    "modified_cwl2": (0.01, 0.1, 1, 10),
}

# added to |f_k - f_true| so each step ends just past the linearised boundary instead of on it
DEEPFOOL_NUDGE = 1e-4

_ITER_DEFAULTS = {"bim": (0.05, 10), "mim": (0.06, 10), "madry": (0.01, 40)}

TANH_INPUT_LIMIT = 0.999999
BIG_CONST = 1e10
L1_FLOOR = 1e-12


class AttackError(ValueError):
    pass


@dataclass(frozen=True)
class AttackConfig:
    """One attack at one swept value.

    ``value`` is epsilon for the gradient-sign family, the initial constant c
    for lbfgs / cwl2 / modified_cwl2 and the maximum iteration count m for
    deepfool. ``eps_iter`` and ``nb_iter`` default per attack when left None.
    ``naive`` lets cwl2 run against a codeword head by treating its pre-tanh
    outputs as logits over output coordinates (a baseline, not a sound attack).
    """

    kind: str
    value: float
    targeted: bool = False
    eps_iter: float = None
    nb_iter: int = None
    momentum: float = 1.0
    binary_search_steps: int = 5
    max_iterations: int = 1000
    learning_rate: float = 1e-2
    nb_candidate: int = 10
    overshoot: float = 0.02
    seed: int = 0
    naive: bool = False
    box: tuple = (0.0, 1.0)

    def __post_init__(self):
        if self.kind in _ITER_DEFAULTS:
            step, n = _ITER_DEFAULTS[self.kind]
            if self.eps_iter is None:
                object.__setattr__(self, "eps_iter", step)
            if self.nb_iter is None:
                object.__setattr__(self, "nb_iter", n)
        errors = self.validate()
        if errors:
            raise AttackError("invalid attack config: " + "; ".join(errors))

    def validate(self):
        errors = []
        if self.kind not in KINDS:
            return [f"unknown attack kind {self.kind!r}; expected one of {KINDS}"]
        if self.kind == "deepfool" and self.targeted:
            errors.append("deepfool is untargeted only")
        if self.kind == "lbfgs" and not self.targeted:
            errors.append("lbfgs is targeted only")
        if not np.isfinite(self.value) or self.value < 0:
            errors.append(f"{PARAM_NAME[self.kind]} must be a finite value >= 0")
        if self.kind == "deepfool" and self.value != int(self.value):
            errors.append("deepfool max_iter must be an integer")
        if self.kind in ("bim", "mim", "madry"):
            if self.eps_iter < 0:
                errors.append("eps_iter must be >= 0")
            if self.nb_iter < 0:
                errors.append("nb_iter must be >= 0")
        if self.momentum < 0:
            errors.append("momentum must be >= 0")
        if self.binary_search_steps < 1:
            errors.append("binary_search_steps must be >= 1")
        if self.max_iterations < 0:
            errors.append("max_iterations must be >= 0")
        if not self.learning_rate > 0:
            errors.append("learning_rate must be positive")
        if self.nb_candidate < 2:
            errors.append("nb_candidate must be >= 2")
        if self.overshoot < 0:
            errors.append("overshoot must be >= 0")
        if not self.box[0] < self.box[1]:
            errors.append("box must satisfy lo < hi")
        if self.naive and self.kind != "cwl2":
            errors.append("naive mode only applies to cwl2")
        return errors

    @property
    def param_name(self):
        return PARAM_NAME[self.kind]

    @property
    def mode(self):
        return "targeted" if self.targeted else "untargeted"

    def to_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if "box" in d:
            d["box"] = tuple(d["box"])
        return cls(**d)

    def with_value(self, value):
        return replace(self, value=value)


@dataclass
class AttackOutcome:
    x_adv: np.ndarray
    success: np.ndarray
    l2: np.ndarray
    linf: np.ndarray
    iterations: np.ndarray
    predictions: np.ndarray
    extra: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.success)


def check_compatible(network, config):
    """Raise :class:`AttackError` when ``config`` cannot run against ``network``."""
    if config.kind == "cwl2" and network.head == "tanh" and not config.naive:
        raise AttackError("cwl2 reads softmax logits and does not apply to a codeword (tanh) head; "
                          "use modified_cwl2, or naive=True for the naive baseline")
    if config.kind == "cwl2" and config.naive and network.head != "tanh":
        raise AttackError("naive cwl2 is only meaningful on a codeword (tanh) head")


def clip_box(x_adv, x, eps=None, box=(0.0, 1.0)):
    """Clamp into the l-inf ball of radius ``eps`` around ``x`` intersected with ``box``."""
    out = np.asarray(x_adv, dtype=np.float64)
    if eps is not None:
        if eps < 0:
            raise ValueError("eps must be >= 0")
        out = np.clip(out, x - eps, x + eps)
    return np.clip(out, box[0], box[1])


def _as_batch(network, x, labels):
    x = np.asarray(x, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if x.ndim == len(network.input_shape):
        x = x[None]
        labels = labels.reshape(1)
    if len(labels) != len(x):
        raise ValueError(f"{len(x)} images but {len(labels)} labels")
    if np.any(labels < 0) or np.any(labels >= network.n_classes):
        raise ValueError(f"labels must lie in [0, {network.n_classes})")
    return x, labels


def _decode(network, outputs):
    return np.asarray(decode_prediction(outputs, network)).reshape(-1)


def _predict(network, x):
    return _decode(network, graph(network, x)[1].data) if len(x) else np.zeros(0, dtype=np.int64)


def _goal(pred, labels, targeted):
    return pred == labels if targeted else pred != labels


def _finish(network, x, x_adv, labels, targeted, iterations, extra=None):
    pred = _predict(network, x_adv)
    delta = (x_adv - x).reshape(len(x), -1)
    return AttackOutcome(
        x_adv=x_adv,
        success=_goal(pred, labels, targeted),
        l2=np.sqrt((delta * delta).sum(axis=1)),
        linf=np.abs(delta).max(axis=1) if delta.shape[1] else np.zeros(len(x)),
        iterations=np.asarray(iterations, dtype=np.int64),
        predictions=pred,
        extra=extra or {},
    )


def _input_vjp(network, x, cotangent, use_logits=False):
    """Forward ``x`` and pull a cotangent on the outputs back to the input.

    ``cotangent(logits, outputs)`` returns ``(cot, aux)`` where ``cot`` has
    the shape of the chosen tensor. Returns ``(logits, outputs, grad, aux)``.
    """
    xt = Tensor(x)
    with Tape() as tape:
        tape.watch(xt)
        z, out = graph(network, xt)
        cot, aux = cotangent(z.data, out.data)
        s = ad.sum(ad.mul(z if use_logits else out, Tensor(cot)))
    grad = ad.backward(tape, s)[xt]
    return z.data, out.data, grad, aux


# -- gradient-sign family ----------------------------------------------------


def attack_gradient(network, x, target_repr):
    """Gradient wrt ``x`` of the per-image training loss against ``target_repr``, summed over the batch.

    Cross-entropy for CE-trained models, MSE for MSE-trained models.
    """
    x = np.asarray(x, dtype=np.float64)
    xt = Tensor(x)
    with Tape() as tape:
        tape.watch(xt)
        _, out = graph(network, xt)
        J = loss(out, target_repr, network.loss_kind)
    return ad.backward(tape, J)[xt] * len(x)


def _sign_step_direction(config):
    # untargeted: ascend the true-label loss; targeted: descend the target-label loss
    return -1.0 if config.targeted else 1.0


def fgsm(network, x, labels, config):
    x, labels = _as_batch(network, x, labels)
    eps = float(config.value)
    g = attack_gradient(network, x, encode_target(labels, network))
    x_adv = clip_box(x + _sign_step_direction(config) * eps * np.sign(g), x, eps, config.box)
    return _finish(network, x, x_adv, labels, config.targeted, np.ones(len(x)))


def _iterate(network, x, start, labels, config, momentum=None):
    eps = float(config.value)
    direction = _sign_step_direction(config)
    target = encode_target(labels, network)
    x_adv = start
    velocity = np.zeros_like(x)
    for _ in range(config.nb_iter):
        g = attack_gradient(network, x_adv, target)
        if momentum is not None:
            l1 = np.abs(g).reshape(len(x), -1).sum(axis=1).reshape((-1,) + (1,) * (x.ndim - 1))
            g = np.where(l1 < L1_FLOOR, g, g / np.maximum(l1, L1_FLOOR))
            velocity = momentum * velocity + g
            g = velocity
        x_adv = clip_box(x_adv + direction * config.eps_iter * np.sign(g), x, eps, config.box)
    return x_adv, velocity


def bim(network, x, labels, config):
    x, labels = _as_batch(network, x, labels)
    x_adv, _ = _iterate(network, x, x, labels, config)
    return _finish(network, x, x_adv, labels, config.targeted, np.full(len(x), config.nb_iter))


def mim(network, x, labels, config):
    x, labels = _as_batch(network, x, labels)
    x_adv, velocity = _iterate(network, x, x, labels, config, momentum=config.momentum)
    return _finish(network, x, x_adv, labels, config.targeted, np.full(len(x), config.nb_iter),
                   {"velocity": velocity})


def madry(network, x, labels, config, keys=None):
    """PGD from a uniform random start; image ``i`` draws its noise from ``(seed, keys[i])``."""
    x, labels = _as_batch(network, x, labels)
    eps = float(config.value)
    keys = np.arange(len(x)) if keys is None else np.asarray(keys)
    noise = np.stack([np.random.default_rng([config.seed, int(k)]).uniform(-eps, eps, size=x.shape[1:])
                      for k in keys]) if len(x) else np.zeros_like(x)
    start = clip_box(x + noise, x, eps, config.box)
    x_adv, _ = _iterate(network, x, start, labels, config)
    return _finish(network, x, x_adv, labels, config.targeted, np.full(len(x), config.nb_iter))


# -- deepfool ------------------------------------------------------------------


def class_scores(network, logits_, outputs):
    """Per-class scores for deepfool: logits for softmax heads, -||z - c_k||^2 for codeword heads."""
    if network.head == "softmax":
        return logits_
    return -class_distances(outputs, representations(network)) ** 2


def _score_gradients(network, x, classes):
    """Scores at ``x`` and input gradients of the scores of ``classes`` (N, K) -> (N, K, *x.shape[1:])."""
    n, k = classes.shape
    rep = np.repeat(x, k, axis=0)
    flat = classes.reshape(-1)
    reps = representations(network)

    def cot(z, out):
        if network.head == "softmax":
            c = np.zeros_like(z)
            c[np.arange(len(flat)), flat] = 1.0
            return c, None
        # d/do of -||o - c_k||^2
        return -2.0 * (out - reps[flat]), None

    z, out, grad, _ = _input_vjp(network, rep, cot, use_logits=network.head == "softmax")
    scores = class_scores(network, z, out)[np.arange(len(flat)), flat].reshape(n, k)
    return scores, grad.reshape((n, k) + x.shape[1:])


def deepfool(network, x, labels, config):
    """Iterative linearisation towards the closest of the top ``nb_candidate`` class boundaries.

    Stops per image on a label flip or after ``config.value`` iterations. The
    returned image is ``clip(x + (1 + overshoot) * r_total)``.
    """
    x, labels = _as_batch(network, x, labels)
    max_iter = int(config.value)
    n = len(x)
    z0, out0 = (t.data for t in graph(network, x))
    scores0 = class_scores(network, z0, out0)
    n_cand = min(config.nb_candidate, network.n_classes)
    masked = scores0.copy()
    masked[np.arange(n), labels] = -np.inf
    others = np.argsort(-masked, axis=1, kind="stable")[:, :n_cand - 1]
    classes = np.concatenate([labels[:, None], others], axis=1)

    r_tot = np.zeros_like(x)
    x_adv = x.copy()
    iters = np.zeros(n, dtype=np.int64)
    active = _decode(network, out0) == labels
    stuck = np.zeros(n, dtype=bool)
    for _ in range(max_iter):
        idx = np.flatnonzero(active)
        if len(idx) == 0:
            break
        scores, grads = _score_gradients(network, x_adv[idx], classes[idx])
        w = grads[:, 1:] - grads[:, :1]
        f = scores[:, 1:] - scores[:, :1]
        wnorm = np.sqrt((w.reshape(len(idx), n_cand - 1, -1) ** 2).sum(axis=2))
        with np.errstate(divide="ignore", invalid="ignore"):
            pert = np.where(wnorm > 0, (np.abs(f) + DEEPFOOL_NUDGE) / wnorm, np.inf)
        best = np.argmin(pert, axis=1)
        rows = np.arange(len(idx))
        ok = np.isfinite(pert[rows, best])
        step = np.zeros_like(x[idx])
        bw, bn = w[rows, best], wnorm[rows, best]
        step[ok] = (pert[rows, best][ok] / bn[ok]).reshape((-1,) + (1,) * (x.ndim - 1)) * bw[ok]
        r_tot[idx] += step
        iters[idx[ok]] += 1
        stuck[idx[~ok]] = True
        x_adv[idx] = clip_box(x[idx] + (1 + config.overshoot) * r_tot[idx], x[idx], None, config.box)
        active[idx] = ok & (_predict(network, x_adv[idx]) == labels[idx])
    return _finish(network, x, x_adv, labels, False, iters, {"skipped": stuck})


# -- binary-search family --------------------------------------------------------


def cw_objective(network, z, labels, targeted):
    """Margin term of the CW attack on logits ``z`` and its gradient wrt ``z``.

    targeted: max(max_{i != t} z_i - z_t, 0); untargeted: max(z_y - max_{i != y} z_i, 0).
    """
    n = len(z)
    rows = np.arange(n)
    other = z.copy()
    other[rows, labels] = -np.inf
    j = np.argmax(other, axis=1)
    margin = z[rows, j] - z[rows, labels]
    sign = 1.0 if targeted else -1.0
    f = np.maximum(sign * margin, 0.0)
    grad = np.zeros_like(z)
    on = f > 0
    grad[rows[on], j[on]] += sign
    grad[rows[on], labels[on]] -= sign
    return f, grad


def modified_cw_objective(outputs, reps, labels, targeted):
    """Distance-margin term on ``outputs`` and its gradient wrt them.

    ``outputs`` are the tanh outputs of a codeword head, or the logits of a softmax head.

    targeted: max(D_t - min_{i != t} D_i, 0); untargeted: max(min_{i != y} D_i - D_y, 0),
    where D_k is the euclidean distance from the output to representation k.
    """
    n = len(outputs)
    rows = np.arange(n)
    D = class_distances(outputs, reps)
    other = D.copy()
    other[rows, labels] = np.inf
    j = np.argmin(other, axis=1)
    margin = D[rows, labels] - D[rows, j]
    sign = 1.0 if targeted else -1.0
    f = np.maximum(sign * margin, 0.0)

    def unit(k):
        diff = outputs - reps[k]
        d = D[rows, k][:, None]
        return np.where(d > 0, diff / np.where(d > 0, d, 1.0), 0.0)

    grad = sign * (unit(labels) - unit(j))
    grad[f <= 0] = 0.0
    return f, grad


def _loss_cotangent(network, outputs, target_repr):
    """Per-image training loss and its gradient wrt the head outputs."""
    if network.loss_kind == "mse":
        diff = outputs - target_repr
        return (diff * diff).mean(axis=1), 2.0 * diff / outputs.shape[1]
    p = np.clip(outputs, PROB_FLOOR, 1.0)
    inside = (outputs >= PROB_FLOOR) & (outputs <= 1.0)
    return -(target_repr * np.log(p)).sum(axis=1), np.where(inside, -target_repr / p, 0.0)


def _margin_term(network, config, labels):
    """Returns ``fn(z, out) -> (f, dF/d(chosen tensor))`` and whether the chosen tensor is the logits."""
    if config.kind == "cwl2":
        return (lambda z, out: cw_objective(network, z, labels, config.targeted)), True
    if config.kind == "modified_cwl2":
        reps = representations(network)
        if network.head == "softmax":
            # distances from the pre-softmax logits to the one-hot targets; the nearest one-hot is the
            # argmax, and the probabilities would saturate
            return (lambda z, out: modified_cw_objective(z, reps, labels, config.targeted)), True
        return (lambda z, out: modified_cw_objective(out, reps, labels, config.targeted)), False
    target = encode_target(labels, network)
    return (lambda z, out: _loss_cotangent(network, out, target)), False


def _search_gradient(network, config, x, x_adv, labels, const):
    """Objective ||x_adv - x||^2 + const * term, its gradient wrt ``x_adv``, the term and head outputs."""
    term, use_logits = _margin_term(network, config, labels)

    def cot(z, out):
        f, df = term(z, out)
        return const[:, None] * df, f

    _, out, g_term, f = _input_vjp(network, x_adv, cot, use_logits)
    delta = x_adv - x
    l2sq = (delta * delta).reshape(len(x), -1).sum(axis=1)
    grad = 2.0 * delta + g_term
    return l2sq + const * f, grad, f, l2sq, out


def search_objective(network, config, x, x_adv, labels, const):
    """Per-image objective and its gradient wrt ``x_adv`` (exposed for gradient checks)."""
    x, labels = _as_batch(network, x, labels)
    const = np.broadcast_to(np.asarray(const, dtype=np.float64), (len(x),)).copy()
    obj, grad, *_ = _search_gradient(network, config, x, np.asarray(x_adv, dtype=np.float64), labels, const)
    return obj, grad


def margin_value(network, config, x_adv, labels):
    """The attack's margin term f at ``x_adv`` (cwl2 / modified_cwl2)."""
    x_adv, labels = _as_batch(network, x_adv, labels)
    term, _ = _margin_term(network, config, labels)
    z, out = (t.data for t in graph(network, x_adv))
    return term(z, out)[0]


class _Adam:
    def __init__(self, shape, lr, b1=0.9, b2=0.999, eps=1e-8):
        self.lr, self.b1, self.b2, self.eps = lr, b1, b2, eps
        self.m = np.zeros(shape)
        self.v = np.zeros(shape)
        self.t = np.zeros(shape[0])

    def step(self, idx, param, grad):
        self.t[idx] += 1
        t = self.t[idx].reshape((-1,) + (1,) * (grad.ndim - 1))
        self.m[idx] = self.b1 * self.m[idx] + (1 - self.b1) * grad
        self.v[idx] = self.b2 * self.v[idx] + (1 - self.b2) * grad * grad
        mhat = self.m[idx] / (1 - self.b1 ** t)
        vhat = self.v[idx] / (1 - self.b2 ** t)
        return param - self.lr * mhat / (np.sqrt(vhat) + self.eps)


def _binary_search_attack(network, x, labels, config):
    """Shared optimiser for lbfgs (box-projected Adam on x) and the CW pair (Adam on tanh-space w)."""
    x, labels = _as_batch(network, x, labels)
    check_compatible(network, config)
    n = len(x)
    shape = (-1,) + (1,) * (x.ndim - 1)
    lo, hi = config.box
    tanh_space = config.kind != "lbfgs"

    done = _goal(_predict(network, x), labels, config.targeted)
    lower = np.zeros(n)
    upper = np.full(n, BIG_CONST)
    const = np.full(n, float(config.value))
    best_l2 = np.full(n, np.inf)
    best = x.copy()
    last = x.copy()
    iters = np.zeros(n, dtype=np.int64)
    todo = np.flatnonzero(~done)
    abort_every = max(config.max_iterations // 10, 1)

    if tanh_space:
        w0 = np.arctanh(((x - lo) / (hi - lo) * 2 - 1) * TANH_INPUT_LIMIT)

        def to_image(w):
            return (np.tanh(w) + 1) / 2 * (hi - lo) + lo

    for _ in range(config.binary_search_steps):
        if len(todo) == 0:
            break
        param = (w0[todo] if tanh_space else x[todo]).copy()
        opt = _Adam(param.shape, config.learning_rate)
        found = np.zeros(len(todo), dtype=bool)
        prev = np.full(len(todo), np.inf)
        active = np.arange(len(todo))
        for it in range(config.max_iterations):
            if len(active) == 0:
                break
            img_idx = todo[active]
            cur = to_image(param[active]) if tanh_space else param[active]
            obj, grad, _, l2sq, out = _search_gradient(network, config, x[img_idx], cur, labels[img_idx],
                                                      const[img_idx])
            hit = _goal(_decode(network, out), labels[img_idx], config.targeted)
            better = hit & (l2sq < best_l2[img_idx])
            best_l2[img_idx[better]] = l2sq[better]
            best[img_idx[better]] = cur[better]
            found[active[hit]] = True
            last[img_idx] = cur
            if it % abort_every == 0:
                stall = obj > prev[active] * 0.9999
                prev[active] = obj
                if np.any(stall):
                    keep = ~stall
                    active, cur, grad, img_idx = active[keep], cur[keep], grad[keep], img_idx[keep]
                    if len(active) == 0:
                        break
            if tanh_space:
                grad = grad * (1 - np.tanh(param[active]) ** 2) / 2 * (hi - lo)
            param[active] = opt.step(active, param[active], grad)
            if not tanh_space:
                param[active] = np.clip(param[active], lo, hi)
            iters[img_idx] += 1
        # image at the final parameter of this step
        final = to_image(param) if tanh_space else param
        last[todo] = final
        ok = found
        upper[todo[ok]] = np.minimum(upper[todo[ok]], const[todo[ok]])
        lower[todo[~ok]] = np.maximum(lower[todo[~ok]], const[todo[~ok]])
        known = upper[todo] < BIG_CONST / 10
        const[todo] = np.where(known, (lower[todo] + upper[todo]) / 2, const[todo] * 10)

    succeeded = np.isfinite(best_l2)
    x_adv = np.where(succeeded.reshape(shape), best, last)
    x_adv[done] = x[done]
    return _finish(network, x, x_adv, labels, config.targeted, iters, {"const": const})


def lbfgs_attack(network, x, labels, config):
    """Targeted: minimise ||x_adv - x||^2 + c * J_target(x_adv) over the box, searching c."""
    if not config.targeted:
        raise AttackError("lbfgs is targeted only")
    return _binary_search_attack(network, x, labels, config)


def cwl2(network, x, labels, config):
    """CW l2 attack on logits with the tanh change of variables."""
    return _binary_search_attack(network, x, labels, config)


def modified_cwl2(network, x, labels, config):
    """CW-style attack whose margin compares euclidean distances to class representations."""
    return _binary_search_attack(network, x, labels, config)


_DISPATCH = {"fgsm": fgsm, "bim": bim, "mim": mim, "deepfool": deepfool,
             "lbfgs": lbfgs_attack, "cwl2": cwl2, "modified_cwl2": modified_cwl2}


def run_attack(network, x, labels, config, keys=None):
    """Dispatch on ``config.kind``. ``keys`` seed madry's per-image noise (default: positions)."""
    check_compatible(network, config)
    if config.kind == "madry":
        return madry(network, x, labels, config, keys)
    return _DISPATCH[config.kind](network, x, labels, config)
