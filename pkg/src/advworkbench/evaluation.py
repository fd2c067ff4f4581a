"""Experiment orchestration: white-box and transfer evaluations, reports, image dumps.

Attacks run over fixed chunks of :data:`CHUNK` images so that results do not
depend on how many worker processes are used.
"""

import csv
import io
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields

import numpy as np

from .attacks import AttackOutcome, check_compatible, run_attack
from .model import accuracy, predict

log = logging.getLogger(__name__)

CHUNK = 100
METRICS = ("accuracy", "success_rate", "mean_l2", "mean_linf")
_NUMERIC_ERRORS = (ArithmeticError, np.linalg.LinAlgError)


@dataclass(frozen=True)
class ReportRow:
    variant: str
    setting: str  # white-box | black-box
    source: str  # model the adversarial examples were generated on
    attack: str
    mode: str  # untargeted | targeted | clean
    param: str
    value: float
    metric: str
    metric_value: float
    n: int
    seeds: str

    def sort_key(self):
        return (self.variant, self.setting, self.source, self.attack, self.mode, self.param, self.value,
                METRICS.index(self.metric) if self.metric in METRICS else len(METRICS), self.metric)


COLUMNS = tuple(f.name for f in fields(ReportRow))


def sort_rows(rows):
    return sorted(rows, key=ReportRow.sort_key)


def _chunks(n):
    return [(s, min(s + CHUNK, n)) for s in range(0, n, CHUNK)]


def _attack_chunk(args):
    network, x, labels, config, keys = args
    try:
        return run_attack(network, x, labels, config, keys=keys), 0
    except _NUMERIC_ERRORS as err:
        # count as unsuccessful: the clean image is returned unchanged
        log.warning("attack %s failed on a chunk of %d images: %s", config.kind, len(x), err)
        return run_attack(network, x, labels, config.with_value(0.0), keys=keys) \
            if config.kind in ("fgsm", "bim", "mim", "madry") else None, len(x)


def generate(network, config, images, labels, jobs=1):
    """Run ``config`` over ``images`` chunk by chunk; returns one concatenated :class:`AttackOutcome`.

    Image ``i`` is keyed by its position, which seeds madry's noise.
    """
    check_compatible(network, config)
    images = np.asarray(images, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    tasks = [(network, images[a:b], labels[a:b], config, np.arange(a, b)) for a, b in _chunks(len(images))]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_attack_chunk, tasks))
    else:
        results = [_attack_chunk(t) for t in tasks]
    parts, failed = [], 0
    for (net, x, y, _, _), (out, n_failed) in zip(tasks, results):
        failed += n_failed
        if out is None:
            out = _unchanged(net, x, y, config.targeted)
        parts.append(out)
    return AttackOutcome(
        x_adv=np.concatenate([p.x_adv for p in parts]),
        success=np.concatenate([p.success for p in parts]),
        l2=np.concatenate([p.l2 for p in parts]),
        linf=np.concatenate([p.linf for p in parts]),
        iterations=np.concatenate([p.iterations for p in parts]),
        predictions=np.concatenate([p.predictions for p in parts]),
        extra={"failed": failed},
    )


def _unchanged(network, x, labels, targeted):
    from .attacks import _finish
    return _finish(network, x, x.copy(), labels, targeted, np.zeros(len(x)))


def _seeds(config, dataset, target_seed=None):
    parts = [f"attack={config.seed}"]
    if target_seed is not None:
        parts.append(f"targets={target_seed}")
    if getattr(dataset, "fingerprint", ""):
        parts.append(f"data={dataset.fingerprint[:12]}")
    return ";".join(parts)


def _rows(variant, setting, source, config, outcome, correct_or_hit, seeds):
    n = len(correct_or_hit)
    if n == 0:
        raise ValueError("cannot report on an empty sample")
    attack = config.kind + ("-naive" if config.naive else "")
    base = dict(variant=variant, setting=setting, source=source, attack=attack, mode=config.mode,
                param=config.param_name, value=float(config.value), n=n, seeds=seeds)
    head = "success_rate" if config.targeted else "accuracy"
    return [
        ReportRow(metric=head, metric_value=float(np.mean(correct_or_hit)), **base),
        ReportRow(metric="mean_l2", metric_value=float(np.mean(outcome.l2)), **base),
        ReportRow(metric="mean_linf", metric_value=float(np.mean(outcome.linf)), **base),
    ]


def _name(network):
    return network.variant or "model"


def clean_accuracy_row(network, dataset):
    """Clean accuracy, computed exactly as during training."""
    acc = accuracy(network, dataset.images, dataset.labels)
    return ReportRow(_name(network), "white-box", _name(network), "none", "clean", "-", 0.0, "accuracy",
                     float(acc), len(dataset), _seeds_clean(dataset))


def _seeds_clean(dataset):
    return f"data={dataset.fingerprint[:12]}" if getattr(dataset, "fingerprint", "") else ""


def evaluate_untargeted(network, config, dataset, jobs=1, return_outcome=False):
    """Accuracy under an untargeted attack (fraction still decoded as the true label) plus distortions."""
    if config.targeted:
        raise ValueError("evaluate_untargeted needs an untargeted config")
    out = generate(network, config, dataset.images, dataset.labels, jobs)
    rows = _rows(_name(network), "white-box", _name(network), config, out,
                 out.predictions == dataset.labels, _seeds(config, dataset))
    return (rows, out) if return_outcome else rows


def evaluate_targeted(network, config, dataset, targets, target_seed=None, jobs=1, return_outcome=False):
    """Success rate (fraction decoded as the sampled target) plus distortions."""
    if not config.targeted:
        raise ValueError("evaluate_targeted needs a targeted config")
    targets = np.asarray(targets, dtype=np.int64)
    if len(targets) != len(dataset):
        raise ValueError(f"{len(targets)} targets for {len(dataset)} images")
    out = generate(network, config, dataset.images, targets, jobs)
    rows = _rows(_name(network), "white-box", _name(network), config, out, out.predictions == targets,
                 _seeds(config, dataset, target_seed))
    return (rows, out) if return_outcome else rows


def transfer_attack_eval(source, target, config, dataset, targets=None, target_seed=None, jobs=1,
                         return_outcome=False):
    """Craft adversarial examples on ``source`` and measure them on ``target``."""
    rows, outs = transfer_to_many(source, [target], config, dataset, targets, target_seed, jobs)
    return (rows, outs[0]) if return_outcome else rows


def transfer_to_many(source, models, config, dataset, targets=None, target_seed=None, jobs=1):
    """One batch of adversarial examples from ``source``, scored on every model in ``models``.

    Returns the report rows and one :class:`AttackOutcome` per model.
    """
    for m in models:
        if tuple(source.input_shape) != tuple(m.input_shape):
            raise ValueError(f"input shapes differ: {source.input_shape} vs {m.input_shape}")
    if config.targeted and targets is None:
        raise ValueError("targeted transfer needs target labels")
    labels = dataset.labels if not config.targeted else np.asarray(targets, dtype=np.int64)
    out = generate(source, config, dataset.images, labels, jobs)
    rows, outs = [], []
    for target in models:
        pred = predict(target, out.x_adv)
        hit = pred == labels
        measured = AttackOutcome(out.x_adv, hit if config.targeted else ~hit, out.l2, out.linf, out.iterations,
                                 pred)
        setting = "white-box" if target is source else "black-box"
        rows += _rows(_name(target), setting, _name(source), config, measured, hit,
                      _seeds(config, dataset, target_seed))
        outs.append(measured)
    return rows, outs


# -- reports -------------------------------------------------------------------------


def _fmt(row):
    d = asdict(row)
    d["value"] = f"{row.value:g}"
    d["metric_value"] = f"{row.metric_value:.6f}"
    return [d[c] for c in COLUMNS]


def report_to_csv(rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for r in sort_rows(rows):
        w.writerow(_fmt(r))
    return buf.getvalue()


def report_to_json(rows):
    return json.dumps([asdict(r) for r in sort_rows(rows)], indent=2) + "\n"


def emit_report(rows, fmt, path):
    """Write ``rows`` as csv or json (canonically sorted)."""
    if not rows:
        raise ValueError("report is empty")
    if fmt not in ("csv", "json"):
        raise ValueError(f"unknown report format {fmt!r}")
    text = report_to_csv(rows) if fmt == "csv" else report_to_json(rows)
    with open(path, "w", newline="") as f:
        f.write(text)
    return path


def load_report_json(path):
    with open(path) as f:
        return [ReportRow(**d) for d in json.load(f)]


def load_report_csv(path):
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        return [ReportRow(variant=d["variant"], setting=d["setting"], source=d["source"], attack=d["attack"],
                          mode=d["mode"], param=d["param"], value=float(d["value"]), metric=d["metric"],
                          metric_value=float(d["metric_value"]), n=int(d["n"]), seeds=d["seeds"])
                for d in reader]


def load_report(path):
    return load_report_json(path) if path.endswith(".json") else load_report_csv(path)


def merge_reports(reports):
    """Union of several row lists; identical duplicates collapse, conflicting duplicates raise."""
    seen = {}
    for rows in reports:
        for r in rows:
            key = r.sort_key() + (r.n, r.seeds)
            if key in seen and seen[key].metric_value != r.metric_value:
                raise ValueError(f"conflicting values for {key}")
            seen[key] = r
    return sort_rows(seen.values())


def find(rows, **match):
    """Rows whose fields equal every keyword given."""
    return [r for r in rows if all(getattr(r, k) == v for k, v in match.items())]


def metric(rows, **match):
    """The single metric value matching ``match``."""
    hits = find(rows, **match)
    if len(hits) != 1:
        raise KeyError(f"{len(hits)} rows match {match}")
    return hits[0].metric_value


# -- images --------------------------------------------------------------------------


def to_pixels(image):
    return np.round(255 * np.clip(np.asarray(image, dtype=np.float64), 0, 1)).astype(np.uint8)


def encode_netpbm(image):
    """Binary PGM for (H, W) / (H, W, 1) images, PPM for (H, W, 3)."""
    img = np.asarray(image)
    if img.ndim == 3 and img.shape[2] == 1:
        img = img[..., 0]
    if img.ndim == 2:
        magic = b"P5"
    elif img.ndim == 3 and img.shape[2] == 3:
        magic = b"P6"
    else:
        raise ValueError(f"cannot encode image of shape {img.shape}")
    pixels = to_pixels(img)
    header = magic + f"\n{pixels.shape[1]} {pixels.shape[0]}\n255\n".encode()
    return header + pixels.tobytes()


def decode_netpbm(blob):
    """Inverse of :func:`encode_netpbm`; returns uint8 pixels."""
    magic, dims, maxval, rest = blob.split(b"\n", 3)
    w, h = (int(v) for v in dims.split())
    if maxval != b"255" or magic not in (b"P5", b"P6"):
        raise ValueError("unsupported netpbm file")
    shape = (h, w) if magic == b"P5" else (h, w, 3)
    return np.frombuffer(rest, dtype=np.uint8).reshape(shape)


def image_grid(images, cols, pad=1, fill=1.0):
    images = np.asarray(images, dtype=np.float64)
    n, H, W, C = images.shape
    rows = -(-n // cols)
    grid = np.full((rows * (H + pad) + pad, cols * (W + pad) + pad, C), fill)
    for i in range(n):
        r, c = divmod(i, cols)
        grid[pad + r * (H + pad):pad + r * (H + pad) + H, pad + c * (W + pad):pad + c * (W + pad) + W] = images[i]
    return grid


def dump_images(clean, adversarial, path, cols=8, pad=1):
    """Write a grid alternating rows of clean and adversarial images (PGM for 1 channel, PPM for 3)."""
    clean = np.asarray(clean)
    adversarial = np.asarray(adversarial)
    if clean.shape != adversarial.shape:
        raise ValueError("clean and adversarial batches differ in shape")
    tiles = []
    for start in range(0, len(clean), cols):
        block = slice(start, start + cols)
        for part in (clean[block], adversarial[block]):
            if len(part) < cols:
                part = np.concatenate([part, np.ones((cols - len(part),) + part.shape[1:])])
            tiles.append(part)
    grid = image_grid(np.concatenate(tiles), cols, pad)
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "wb") as f:
        f.write(encode_netpbm(grid))
    return path
