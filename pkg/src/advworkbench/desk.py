"""The desk-scale MNIST experiment behind the acceptance suite.

:func:`run_desk` trains the three variants on a 10k/2k MNIST subset and runs
the attacks, transfers and Lipschitz bounds the acceptance checks read. Every
result lands in ``out_dir`` as canonically sorted reports, so two runs with the
same seeds can be compared byte for byte.

Files written::

    <variant>.ckpt, <variant>.history.json   trained models
    training.json                            clean accuracies and sample fingerprints
    report.csv / report.json                 every attack and transfer row
    <variant>-lipschitz.csv                  per-layer bounds
    conv-bound-comparison.csv                o-softmax-mse / o-softmax-ce conv bounds
    timings.json                             CPU seconds per stage (not reproducible, kept apart)
"""

import csv
import json
import logging
import os
import time
from dataclasses import dataclass, field

from . import evaluation as ev
from . import lipschitz as lip
from .attacks import AttackConfig
from .checkpoint import save_checkpoint
from .cli import evaluation_samples, train_model, write_text
from .config import ExperimentConfig
from .data import sample_targets
from .model import VARIANTS
from .training import TrainConfig

log = logging.getLogger(__name__)

CE, SOFT_MSE, TANH = "o-softmax-ce", "o-softmax-mse", "r-tanh-mse"
REPORT_FILES = ("report.csv", "report.json", "training.json", "conv-bound-comparison.csv") + tuple(
    f"{v}-lipschitz.csv" for v in VARIANTS)


@dataclass
class DeskResult:
    out_dir: str
    rows: list
    clean: dict  # variant -> clean test accuracy on the 2k training-time test subset
    train_seconds: dict
    bounds: dict  # variant -> list of LayerBoundReport
    comparison: list
    timings: dict = field(default_factory=dict)

    def metric(self, **match):
        return ev.metric(self.rows, **match)


def desk_config(variant, dataset_dir, epochs=5):
    return ExperimentConfig(variant=variant, dataset_dir=dataset_dir, train=TrainConfig(epochs=epochs))


def _untargeted(variant_nets, cfgs, sample):
    rows = []
    for net in variant_nets:
        for c in cfgs:
            rows += ev.evaluate_untargeted(net, c, sample)
    return rows


def run_desk(dataset_dir, out_dir, epochs=5, jobs=1):
    """Run the whole desk experiment; returns a :class:`DeskResult`."""
    os.makedirs(out_dir, exist_ok=True)
    nets, clean, seconds, timings = {}, {}, {}, {}
    for variant in VARIANTS:
        t0 = time.process_time()
        net, history, extra = train_model(desk_config(variant, dataset_dir, epochs))
        seconds[variant] = time.process_time() - t0
        net.variant = variant
        nets[variant] = net
        clean[variant] = history.final_test_accuracy
        save_checkpoint(net, os.path.join(out_dir, f"{variant}.ckpt"), extra)
        write_text(os.path.join(out_dir, f"{variant}.history.json"),
                   json.dumps(history.to_dict(), indent=2, sort_keys=True) + "\n")
        log.info("trained %s: clean accuracy %.4f in %.0f s", variant, clean[variant], seconds[variant])

    base = desk_config(CE, dataset_dir, epochs)
    main, search = evaluation_samples(base)
    targets_main = sample_targets(main.labels, main.n_classes, base.seeds["targets"])
    targets_search = sample_targets(search.labels, search.n_classes, base.seeds["targets"])
    seed = base.seeds["attack"]
    rows = []

    def timed(name, fn):
        t0 = time.process_time()
        out = fn()
        timings[name] = time.process_time() - t0
        log.info("%s done in %.0f s", name, timings[name])
        return out

    all_nets = [nets[v] for v in VARIANTS]
    rows += timed("untargeted", lambda: _untargeted(
        all_nets, [AttackConfig("madry", 0.1, seed=seed), AttackConfig("fgsm", 0.2, seed=seed),
                   AttackConfig("fgsm", 0.1, seed=seed), AttackConfig("mim", 0.01, seed=seed)], main))
    for net in all_nets:
        rows += timed(f"bim-targeted-{net.variant}", lambda: ev.evaluate_targeted(
            net, AttackConfig("bim", 0.2, targeted=True, seed=seed), main, targets_main, base.seeds["targets"]))

    search_runs = [(CE, AttackConfig("cwl2", 1.0, targeted=True, seed=seed)),
                   (CE, AttackConfig("modified_cwl2", 1.0, targeted=True, seed=seed)),
                   (TANH, AttackConfig("modified_cwl2", 1.0, targeted=True, seed=seed)),
                   (TANH, AttackConfig("cwl2", 1.0, targeted=True, seed=seed, naive=True))]
    for variant, c in search_runs:
        rows += timed(f"{c.kind}{'-naive' if c.naive else ''}-{variant}", lambda: ev.evaluate_targeted(
            nets[variant], c, search, targets_search, base.seeds["targets"], jobs))

    transfer_cfgs = [AttackConfig("mim", 0.01, seed=seed), AttackConfig("fgsm", 0.1, seed=seed)]
    for c in transfer_cfgs:
        rows += timed(f"transfer-{c.kind}", lambda: ev.transfer_to_many(
            nets[CE], [nets[SOFT_MSE], nets[TANH]], c, main, jobs=jobs)[0])

    for ds in (main, search):
        rows += [ev.clean_accuracy_row(n, ds) for n in all_nets]
    rows = ev.merge_reports([rows])
    for fmt in ("csv", "json"):
        ev.emit_report(rows, fmt, os.path.join(out_dir, f"report.{fmt}"))

    bounds = {v: lip.network_lipschitz_bounds(nets[v]) for v in VARIANTS}
    for v, b in bounds.items():
        write_text(os.path.join(out_dir, f"{v}-lipschitz.csv"), lip.bounds_to_csv(b))
    comparison = lip.compare_conv_bounds(bounds[CE], bounds[SOFT_MSE], CE, SOFT_MSE)
    write_text(os.path.join(out_dir, "conv-bound-comparison.csv"), lip.comparison_to_csv(comparison))

    summary = {"epochs": epochs, "clean_accuracy": clean,
               "eval_sample": main.fingerprint, "search_sample": search.fingerprint}
    write_text(os.path.join(out_dir, "training.json"), json.dumps(summary, indent=2, sort_keys=True) + "\n")
    write_text(os.path.join(out_dir, "timings.json"),
               json.dumps({"train": seconds, "stages": timings}, indent=2, sort_keys=True) + "\n")
    return DeskResult(out_dir, rows, clean, seconds, bounds, comparison, timings)


def load_desk(out_dir):
    """Rebuild a :class:`DeskResult` from the files of an earlier :func:`run_desk`."""
    rows = ev.load_report_json(os.path.join(out_dir, "report.json"))
    with open(os.path.join(out_dir, "training.json")) as f:
        clean = json.load(f)["clean_accuracy"]
    with open(os.path.join(out_dir, "timings.json")) as f:
        timings = json.load(f)
    bounds = {}
    for v in VARIANTS:
        with open(os.path.join(out_dir, f"{v}-lipschitz.csv"), newline="") as f:
            bounds[v] = [lip.LayerBoundReport(int(r["layer"]), r["kind"], r["method"], float(r["norm"]),
                                              float(r["cumulative"])) for r in csv.DictReader(f)]
    with open(os.path.join(out_dir, "conv-bound-comparison.csv"), newline="") as f:
        comparison = [{k: int(v) if k == "conv_layer" else float(v) for k, v in r.items()} for r in csv.DictReader(f)]
    return DeskResult(out_dir, rows, clean, timings["train"], bounds, comparison, timings["stages"])


def is_complete(out_dir):
    return all(os.path.exists(os.path.join(out_dir, name)) for name in REPORT_FILES + ("timings.json",))
