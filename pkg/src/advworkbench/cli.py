"""Command line entry point: ``advworkbench {train,attack,transfer,lipschitz,report-merge}``.

Exit codes: 0 on success, 2 for configuration errors (all problems are
listed at once), 3 for failures while running.
"""

import argparse
import json
import logging
import os
import sys


from . import evaluation as ev
from . import lipschitz as lip
from .attacks import SEARCH_FAMILY, AttackError, check_compatible
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .config import ConfigError, ExperimentConfig, load_config
from .data import IDXError, load_mnist, sample_targets, subsample
from .model import build_network
from .runtime import tune_allocator
from .training import TrainingDiverged, train

log = logging.getLogger("advworkbench")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3
DUMP_COUNT = 16


# -- shared steps --------------------------------------------------------------------


def training_data(cfg):
    train_set = subsample(load_mnist(cfg.dataset_dir, "train"), cfg.train_size, cfg.seeds["train_sample"])
    test_set = subsample(load_mnist(cfg.dataset_dir, "test"), cfg.test_size, cfg.seeds["test_sample"])
    return train_set, test_set


def evaluation_samples(cfg):
    """The seeded evaluation subsamples: (general sample, smaller sample for the search attacks)."""
    test = load_mnist(cfg.dataset_dir, "test")
    main = subsample(test, cfg.eval_size, cfg.seeds["eval_sample"])
    search = subsample(test, cfg.search_eval_size, cfg.seeds["eval_sample"])
    for ds in (main, search):
        for w in ds.warnings:
            log.warning("evaluation sample: %s", w)
    return main, search


def train_model(cfg):
    """Train the configured variant; returns (network, history, checkpoint extra metadata)."""
    train_set, test_set = training_data(cfg)
    net = build_network(cfg.variant, input_shape=train_set.input_shape, n_classes=train_set.n_classes, d=cfg.d,
                        seed=cfg.seeds["init"], codebook_seed=cfg.seeds["codebook"])
    net, history = train(net, train_set, cfg.train_config(), test_set)
    extra = {"train_config": cfg.train_config().to_dict(), "train_data": train_set.fingerprint,
             "test_data": test_set.fingerprint, "test_accuracy": history.final_test_accuracy}
    return net, history, extra


def _grid(cfg):
    configs = [c for sweep in cfg.attacks for c in sweep.configs(cfg.seeds["attack"])]
    if not configs:
        raise ConfigError(["attack grid is empty; add entries under 'attacks'"])
    return configs


def _check_grid(configs, networks):
    errors = []
    for c in configs:
        for net in networks:
            try:
                check_compatible(net, c)
            except AttackError as err:
                errors.append(f"{c.kind} ({c.mode}) on {net.variant}: {err}")
    if errors:
        raise ConfigError(sorted(set(errors)))


def _sample_for(config, main, search):
    return search if config.kind in SEARCH_FAMILY else main


def _targets(ds, cfg):
    return sample_targets(ds.labels, ds.n_classes, cfg.seeds["targets"])


def _dump(dump_dir, name, config, clean, adversarial):
    if dump_dir is None:
        return
    path = os.path.join(dump_dir, f"{name}-{config.kind}-{config.mode}-{config.value:g}.pgm")
    if clean.shape[-1] == 3:
        path = path[:-4] + ".ppm"
    ev.dump_images(clean[:DUMP_COUNT], adversarial[:DUMP_COUNT], path)


def attack_rows(cfg, network, jobs=1, dump_dir=None, samples=None):
    """White-box report rows for every grid point, plus clean-accuracy rows for the samples used."""
    configs = _grid(cfg)
    _check_grid(configs, [network])
    main, search = samples or evaluation_samples(cfg)
    rows, used = [], set()
    for c in configs:
        ds = _sample_for(c, main, search)
        used.add(id(ds))
        if c.targeted:
            r, out = ev.evaluate_targeted(network, c, ds, _targets(ds, cfg), cfg.seeds["targets"], jobs,
                                          return_outcome=True)
        else:
            r, out = ev.evaluate_untargeted(network, c, ds, jobs, return_outcome=True)
        log.info("%s %s %s=%g: %s=%.4f", c.kind, c.mode, c.param_name, c.value, r[0].metric, r[0].metric_value)
        _dump(dump_dir, network.variant, c, ds.images, out.x_adv)
        rows += r
    for ds in (main, search):
        if id(ds) in used:
            rows.append(ev.clean_accuracy_row(network, ds))
    return ev.merge_reports([rows])


def transfer_rows(cfg, source, targets, jobs=1, dump_dir=None, samples=None):
    """Adversarial examples crafted on ``source``, measured on each of ``targets``."""
    configs = _grid(cfg)
    _check_grid(configs, [source])
    main, search = samples or evaluation_samples(cfg)
    rows = []
    for c in configs:
        ds = _sample_for(c, main, search)
        labels = _targets(ds, cfg) if c.targeted else None
        r, outs = ev.transfer_to_many(source, targets, c, ds, labels, cfg.seeds["targets"] if c.targeted else None,
                                      jobs)
        _dump(dump_dir, f"{source.variant}-transfer", c, ds.images, outs[0].x_adv)
        rows += r
    return ev.merge_reports([rows])


def write_report(rows, out_dir, stem, fmt):
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    for f in (("csv", "json") if fmt == "both" else (fmt,)):
        paths.append(ev.emit_report(rows, f, os.path.join(out_dir, f"{stem}.{f}")))
    return paths


def write_text(path, text):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", newline="") as f:
        f.write(text)
    return path


# -- commands ------------------------------------------------------------------------


def _experiment(args, need_config=True):
    if args.config is None:
        if need_config:
            raise ConfigError(["--config is required for this command"])
        cfg = ExperimentConfig()
    else:
        cfg = load_config(args.config, check_paths=args.dataset_dir is None)
    if args.dataset_dir is not None:
        if not os.path.isdir(args.dataset_dir):
            raise ConfigError([f"--dataset-dir {args.dataset_dir!r} does not exist"])
        cfg.dataset_dir = args.dataset_dir
    if args.seed_override is not None:
        cfg = cfg.with_seed_override(args.seed_override)
    if args.out is not None:
        cfg.out = args.out
    return cfg


def _load(path):
    if path is None:
        raise ConfigError(["--checkpoint is required for this command"])
    if not os.path.exists(path):
        raise ConfigError([f"checkpoint {path!r} does not exist"])
    return load_checkpoint(path)


def cmd_train(args):
    cfg = _experiment(args)
    net, history, extra = train_model(cfg)
    os.makedirs(cfg.out, exist_ok=True)
    ckpt = os.path.join(cfg.out, f"{cfg.variant}.ckpt")
    save_checkpoint(net, ckpt, extra)
    write_text(os.path.join(cfg.out, f"{cfg.variant}.history.json"),
               json.dumps(history.to_dict(), indent=2, sort_keys=True) + "\n")
    print(f"wrote {ckpt} (test accuracy {history.final_test_accuracy:.4f})")


def cmd_attack(args):
    cfg = _experiment(args)
    net = _load(args.checkpoint)
    rows = attack_rows(cfg, net, args.jobs, args.dump_images)
    for p in write_report(rows, cfg.out, f"{net.variant}-attack", args.format):
        print(f"wrote {p}")


def cmd_transfer(args):
    cfg = _experiment(args)
    source = _load(args.checkpoint)
    if not args.target_checkpoint:
        raise ConfigError(["--target-checkpoint is required for transfer"])
    targets = [source if os.path.abspath(p) == os.path.abspath(args.checkpoint) else _load(p)
               for p in args.target_checkpoint]
    rows = transfer_rows(cfg, source, targets, args.jobs, args.dump_images)
    for p in write_report(rows, cfg.out, f"{source.variant}-transfer", args.format):
        print(f"wrote {p}")


def cmd_lipschitz(args):
    paths = args.checkpoint_list or []
    if not paths:
        raise ConfigError(["--checkpoint is required for lipschitz"])
    if len(paths) > 2:
        raise ConfigError(["lipschitz takes one checkpoint, or two to compare"])
    seed = args.seed_override or 0
    out = args.out or "."
    tables = []
    for path in paths:
        net = _load(path)
        rows = lip.network_lipschitz_bounds(net, include_exact=args.exact, seed=seed)
        name = net.variant or os.path.splitext(os.path.basename(path))[0]
        tables.append((name, rows))
        for fmt in (("csv", "json") if args.format == "both" else (args.format,)):
            text = lip.bounds_to_csv(rows) if fmt == "csv" else lip.bounds_to_json(rows)
            print(f"wrote {write_text(os.path.join(out, f'{name}-lipschitz.{fmt}'), text)}")
    if len(tables) == 2:
        (a, rows_a), (b, rows_b) = tables
        if a == b:
            a, b = f"{a}_1", f"{b}_2"
        table = lip.compare_conv_bounds(rows_a, rows_b, a, b)
        print(f"wrote {write_text(os.path.join(out, 'conv-bound-comparison.csv'), lip.comparison_to_csv(table))}")


def cmd_report_merge(args):
    if not args.reports:
        raise ConfigError(["report-merge needs at least one input report"])
    missing = [p for p in args.reports if not os.path.exists(p)]
    if missing:
        raise ConfigError([f"report {p!r} does not exist" for p in missing])
    merged = ev.merge_reports([ev.load_report(p) for p in args.reports])
    out = args.out or "merged.csv"
    fmt = "json" if out.endswith(".json") else "csv"
    os.makedirs(os.path.dirname(os.path.abspath(out)), exist_ok=True)
    print(f"wrote {ev.emit_report(merged, fmt, out)} ({len(merged)} rows)")


COMMANDS = {"train": cmd_train, "attack": cmd_attack, "transfer": cmd_transfer, "lipschitz": cmd_lipschitz,
            "report-merge": cmd_report_merge}


def build_parser():
    parser = argparse.ArgumentParser(prog="advworkbench", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config=True):
        if config:
            p.add_argument("--config", help="YAML experiment config")
            p.add_argument("--dataset-dir", help="directory with the MNIST IDX files (overrides the config)")
        p.add_argument("--out", help="output directory (report-merge: output file)")
        p.add_argument("--seed-override", type=int, help="replace every seed with this value")
        p.add_argument("--jobs", type=int, default=1, help="worker processes for attacks (1 = serial)")
        p.add_argument("--format", choices=("csv", "json", "both"), default="both")

    p = sub.add_parser("train", help="train one model variant and write a checkpoint")
    common(p)
    for name, helptext in (("attack", "white-box attack sweep against one checkpoint"),
                           ("transfer", "craft on one checkpoint, measure on others")):
        p = sub.add_parser(name, help=helptext)
        common(p)
        p.add_argument("--checkpoint", help="model to attack (transfer: the source model)")
        p.add_argument("--dump-images", metavar="DIR", help="write clean/adversarial PGM grids here")
        if name == "transfer":
            p.add_argument("--target-checkpoint", nargs="+", help="models the examples are measured on")
    p = sub.add_parser("lipschitz", help="per-layer Lipschitz upper bounds (two checkpoints: comparison)")
    common(p, config=False)
    p.add_argument("--checkpoint", dest="checkpoint_list", nargs="+")
    p.add_argument("--exact", action="store_true", help="add exact zero-padding conv norms as oracle rows")
    p = sub.add_parser("report-merge", help="merge several csv/json reports into one")
    common(p, config=False)
    p.add_argument("reports", nargs="*")
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "jobs", 1) < 1:
        print("error: --jobs must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    tune_allocator()
    try:
        COMMANDS[args.command](args)
    except ConfigError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except (CheckpointError, IDXError, TrainingDiverged, OSError, ValueError, ArithmeticError) as err:
        print(f"error: {type(err).__name__}: {err}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
