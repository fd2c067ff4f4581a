"""Experiment configuration files (YAML) and their validation.

A config describes one model variant, where the data lives, how to train it
and which attack grids to sweep. Validation collects every problem before
reporting, so a broken file is fixed in one round trip.

Example::

    variant: r-tanh-mse
    d: 128
    dataset: {dir: data/mnist, train_size: 10000, test_size: 2000, eval_size: 500, search_eval_size: 200}
    train: {epochs: 5, batch_size: 64, learning_rate: 0.001, optimizer: adam}
    seeds: {init: 0, shuffle: 1, codebook: 7, train_sample: 11, test_sample: 12,
            eval_sample: 21, targets: 3, attack: 0}
    attacks:
      - {kind: fgsm, mode: untargeted, values: [0.01, 0.05, 0.1, 0.2]}
      - {kind: modified_cwl2, mode: targeted, values: [1.0], options: {max_iterations: 1000}}
    out: runs/tanh
"""

import os
from dataclasses import dataclass, field, fields, replace

import yaml

from .attacks import DEFAULT_GRIDS, KINDS, AttackConfig, AttackError
from .model import VARIANTS
from .training import OPTIMIZERS, TrainConfig


class ConfigError(ValueError):
    """Raised with every validation problem found, one per line."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("invalid config:\n  " + "\n  ".join(self.errors))


SEED_KEYS = ("init", "shuffle", "codebook", "train_sample", "test_sample", "eval_sample", "targets", "attack")
DEFAULT_SEEDS = {"init": 0, "shuffle": 1, "codebook": 7, "train_sample": 11, "test_sample": 12,
                 "eval_sample": 21, "targets": 3, "attack": 0}
DATASET_KEYS = ("dir", "train_size", "test_size", "eval_size", "search_eval_size")
TRAIN_KEYS = ("epochs", "batch_size", "learning_rate", "optimizer", "momentum")
_OPTION_NAMES = {f.name for f in fields(AttackConfig)} - {"kind", "value", "targeted", "seed"}


@dataclass
class AttackSweep:
    kind: str
    targeted: bool
    values: tuple
    options: dict = field(default_factory=dict)

    @property
    def mode(self):
        return "targeted" if self.targeted else "untargeted"

    def configs(self, seed):
        return [AttackConfig(self.kind, float(v), targeted=self.targeted, seed=seed, **self.options)
                for v in self.values]


@dataclass
class ExperimentConfig:
    variant: str = "o-softmax-ce"
    d: int = 128
    dataset_dir: str = "data/mnist"
    train_size: int = 10000
    test_size: int = 2000
    eval_size: int = 500
    search_eval_size: int = 200
    train: TrainConfig = field(default_factory=TrainConfig)
    seeds: dict = field(default_factory=lambda: dict(DEFAULT_SEEDS))
    attacks: list = field(default_factory=list)
    out: str = "runs"

    def train_config(self):
        return replace(self.train, init_seed=self.seeds["init"], shuffle_seed=self.seeds["shuffle"])

    def with_seed_override(self, seed):
        """Every seed in the seeds block replaced by ``seed``."""
        return replace(self, seeds={k: int(seed) for k in self.seeds})


def _unknown(section, given, allowed, errors):
    for key in sorted(set(given) - set(allowed)):
        errors.append(f"{section}: unknown key {key!r}")


def _int(value, name, errors, minimum=0):
    if isinstance(value, bool) or not isinstance(value, int) or value < minimum:
        errors.append(f"{name} must be an integer >= {minimum}, got {value!r}")
        return False
    return True


def _parse_attacks(items, errors):
    sweeps = []
    if not isinstance(items, list):
        errors.append("attacks must be a list")
        return sweeps
    for i, item in enumerate(items):
        where = f"attacks[{i}]"
        if not isinstance(item, dict):
            errors.append(f"{where} must be a mapping")
            continue
        _unknown(where, item, ("kind", "mode", "values", "options"), errors)
        kind = item.get("kind")
        if kind not in KINDS:
            errors.append(f"{where}.kind must be one of {list(KINDS)}, got {kind!r}")
            continue
        mode = item.get("mode", "untargeted")
        if mode not in ("targeted", "untargeted"):
            errors.append(f"{where}.mode must be targeted or untargeted, got {mode!r}")
            continue
        values = item.get("values", list(DEFAULT_GRIDS[kind]))
        if not isinstance(values, list) or not values:
            errors.append(f"{where}.values must be a non-empty list")
            continue
        options = item.get("options", {}) or {}
        if not isinstance(options, dict):
            errors.append(f"{where}.options must be a mapping")
            continue
        bad = sorted(set(options) - _OPTION_NAMES)
        if bad:
            errors.append(f"{where}.options: unknown option(s) {bad}")
            continue
        if "box" in options:
            options = {**options, "box": tuple(options["box"])}
        sweep = AttackSweep(kind, mode == "targeted", tuple(values), options)
        for v in values:
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                errors.append(f"{where}: value {v!r} is not a number")
                continue
            try:
                AttackConfig(kind, float(v), targeted=sweep.targeted, **options)
            except (AttackError, TypeError) as err:
                errors.append(f"{where} value {v!r}: {err}")
        sweeps.append(sweep)
    return sweeps


def parse_config(doc, base_dir=".", check_paths=True):
    """Build an :class:`ExperimentConfig` from a mapping, or raise :class:`ConfigError` listing all problems."""
    errors = []
    if doc is None:
        doc = {}
    if not isinstance(doc, dict):
        raise ConfigError(["config must be a mapping at top level"])
    _unknown("config", doc, ("variant", "d", "dataset", "train", "seeds", "attacks", "out"), errors)
    cfg = ExperimentConfig()

    variant = doc.get("variant", cfg.variant)
    if variant not in VARIANTS:
        errors.append(f"variant must be one of {sorted(VARIANTS)}, got {variant!r}")
    else:
        cfg.variant = variant
    d = doc.get("d", cfg.d)
    if _int(d, "d", errors, 1):
        cfg.d = d

    data = doc.get("dataset", {}) or {}
    if not isinstance(data, dict):
        errors.append("dataset must be a mapping")
        data = {}
    _unknown("dataset", data, DATASET_KEYS, errors)
    cfg.dataset_dir = str(data.get("dir", cfg.dataset_dir))
    if not os.path.isabs(cfg.dataset_dir):
        cfg.dataset_dir = os.path.normpath(os.path.join(base_dir, cfg.dataset_dir))
    for key in DATASET_KEYS[1:]:
        if key in data and _int(data[key], f"dataset.{key}", errors, 1):
            setattr(cfg, key, data[key])

    train = doc.get("train", {}) or {}
    if not isinstance(train, dict):
        errors.append("train must be a mapping")
        train = {}
    _unknown("train", train, TRAIN_KEYS, errors)
    if "optimizer" in train and train["optimizer"] not in OPTIMIZERS:
        errors.append(f"train.optimizer must be one of {list(OPTIMIZERS)}, got {train['optimizer']!r}")
    else:
        try:
            cfg.train = TrainConfig(**{k: v for k, v in train.items() if k in TRAIN_KEYS})
        except (ValueError, TypeError) as err:
            errors.append(f"train: {err}")

    seeds = doc.get("seeds", {}) or {}
    if not isinstance(seeds, dict):
        errors.append("seeds must be a mapping")
        seeds = {}
    _unknown("seeds", seeds, SEED_KEYS, errors)
    for key in SEED_KEYS:
        if key in seeds and _int(seeds[key], f"seeds.{key}", errors, 0):
            cfg.seeds[key] = seeds[key]

    cfg.attacks = _parse_attacks(doc.get("attacks", []) or [], errors)
    if cfg.variant in VARIANTS and VARIANTS[cfg.variant][0] == "tanh":
        for i, s in enumerate(cfg.attacks):
            if s.kind == "cwl2" and not s.options.get("naive", False):
                errors.append(f"attacks[{i}]: cwl2 is not defined for the tanh codeword head; "
                              "use modified_cwl2 (or options: {naive: true} for the baseline)")

    cfg.out = str(doc.get("out", cfg.out))
    if not os.path.isabs(cfg.out):
        cfg.out = os.path.normpath(os.path.join(base_dir, cfg.out))

    if check_paths and not os.path.isdir(cfg.dataset_dir):
        errors.append(f"dataset.dir {cfg.dataset_dir!r} does not exist")
    if errors:
        raise ConfigError(errors)
    return cfg


def load_config(path, check_paths=True):
    """Read and validate a YAML experiment config. Relative paths resolve against the file's directory."""
    try:
        with open(path) as f:
            doc = yaml.safe_load(f)
    except OSError as err:
        raise ConfigError([f"cannot read config {path!r}: {err.strerror}"]) from err
    except yaml.YAMLError as err:
        raise ConfigError([f"config {path!r} is not valid YAML: {err}"]) from err
    return parse_config(doc, base_dir=os.path.dirname(os.path.abspath(path)), check_paths=check_paths)
