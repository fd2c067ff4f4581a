import numpy as np
import pytest

from advworkbench import evaluation as ev
from advworkbench.attacks import AttackConfig
from advworkbench.data import Dataset, sample_targets
from advworkbench.model import decode_prediction, forward
from advworkbench.training import TrainConfig, train
from helpers import tiny_net, toy_dataset


@pytest.fixture(scope="module")
def trained():
    ds = toy_dataset(n=160, seed=0)
    test = toy_dataset(n=120, seed=1)
    test.fingerprint = "toytest"
    nets = {}
    for variant in ("o-softmax-ce", "o-softmax-mse", "r-tanh-mse"):
        net, hist = train(tiny_net(variant, seed=1), ds, TrainConfig(epochs=10, batch_size=16, learning_rate=0.01),
                          test)
        net.variant = variant
        nets[variant] = (net, hist)
    return nets, test


def test_eps_zero_equals_clean(trained):
    nets, test = trained
    net, _ = nets["o-softmax-ce"]
    rows = ev.evaluate_untargeted(net, AttackConfig("fgsm", 0.0), test)
    assert ev.metric(rows, metric="accuracy") == ev.clean_accuracy_row(net, test).metric_value


def test_clean_accuracy_matches_training_history(trained):
    nets, test = trained
    for net, hist in nets.values():
        assert ev.clean_accuracy_row(net, test).metric_value == hist.final_test_accuracy


def test_fgsm_accuracy_non_increasing(trained):
    nets, test = trained
    net, _ = nets["o-softmax-ce"]
    accs = [ev.metric(ev.evaluate_untargeted(net, AttackConfig("fgsm", e), test), metric="accuracy")
            for e in (0.0, 0.05, 0.1, 0.2, 0.4)]
    assert all(b <= a + 0.02 for a, b in zip(accs, accs[1:]))
    assert accs[-1] < accs[0]


def test_rows_shape_and_ranges(trained):
    nets, test = trained
    net, _ = nets["r-tanh-mse"]
    rows = ev.evaluate_untargeted(net, AttackConfig("bim", 0.1), test)
    assert [r.metric for r in rows] == ["accuracy", "mean_l2", "mean_linf"]
    assert all(r.n == len(test) for r in rows)
    assert 0 <= rows[0].metric_value <= 1
    assert rows[2].metric_value <= 0.1 + 1e-12


def test_targeted_success_complements_failures(trained):
    nets, test = trained
    net, _ = nets["o-softmax-mse"]
    targets = sample_targets(test.labels, 4, 3)
    rows, out = ev.evaluate_targeted(net, AttackConfig("bim", 0.2, targeted=True), test, targets, 3,
                                     return_outcome=True)
    rate = ev.metric(rows, metric="success_rate")
    miss = np.mean(np.asarray(decode_prediction(forward(net, out.x_adv), net)) != targets)
    assert rate + miss == pytest.approx(1.0, abs=1e-12)


def test_targets_equal_predictions_full_success(trained):
    nets, test = trained
    net, _ = nets["o-softmax-ce"]
    pred = np.asarray(decode_prediction(forward(net, test.images), net))
    for kind in ("cwl2", "modified_cwl2", "lbfgs"):
        rows = ev.evaluate_targeted(net, AttackConfig(kind, 1.0, targeted=True, max_iterations=10), test, pred)
        assert ev.metric(rows, metric="success_rate") == 1.0
        assert ev.metric(rows, metric="mean_l2") == 0.0


def test_transfer_to_self_equals_white_box(trained):
    nets, test = trained
    net, _ = nets["o-softmax-ce"]
    cfg = AttackConfig("mim", 0.1)
    white = ev.evaluate_untargeted(net, cfg, test)
    self_transfer = ev.transfer_attack_eval(net, net, cfg, test)
    assert [r.metric_value for r in white] == [r.metric_value for r in self_transfer]
    assert self_transfer[0].setting == "white-box"


def test_transfer_marks_black_box(trained):
    nets, test = trained
    src, _ = nets["o-softmax-ce"]
    dst, _ = nets["r-tanh-mse"]
    rows = ev.transfer_attack_eval(src, dst, AttackConfig("fgsm", 0.1), test)
    assert rows[0].setting == "black-box" and rows[0].source == "o-softmax-ce" and rows[0].variant == "r-tanh-mse"


def test_transfer_shape_mismatch(trained):
    nets, test = trained
    net, _ = nets["o-softmax-ce"]
    other = tiny_net()
    other.input_shape = (5, 5, 1)
    with pytest.raises(ValueError, match="input shapes"):
        ev.transfer_attack_eval(net, other, AttackConfig("fgsm", 0.1), test)


def test_chunking_and_jobs_do_not_change_results(trained, monkeypatch):
    nets, test = trained
    net, _ = nets["o-softmax-mse"]
    cfg = AttackConfig("madry", 0.1, nb_iter=5, seed=3)
    serial = ev.evaluate_untargeted(net, cfg, test)
    parallel = ev.evaluate_untargeted(net, cfg, test, jobs=2)
    assert serial == parallel


def test_numeric_failure_counted_not_fatal(trained, monkeypatch):
    nets, test = trained
    net, _ = nets["o-softmax-ce"]
    real = ev.run_attack

    def flaky(network, x, labels, config, keys=None):
        if config.value > 0 and keys[0] == 100:
            raise FloatingPointError("overflow")
        return real(network, x, labels, config, keys)

    monkeypatch.setattr(ev, "run_attack", flaky)
    out = ev.generate(net, AttackConfig("fgsm", 0.3), test.images, test.labels)
    assert out.extra["failed"] == 20
    assert np.array_equal(out.x_adv[100:], test.images[100:])
    assert len(out) == len(test)


def test_report_csv_and_json_roundtrip(trained, tmp_path):
    nets, test = trained
    net, _ = nets["o-softmax-ce"]
    rows = ev.evaluate_untargeted(net, AttackConfig("fgsm", 0.1), test) + [ev.clean_accuracy_row(net, test)]
    ev.emit_report(rows, "json", tmp_path / "r.json")
    assert ev.load_report_json(tmp_path / "r.json") == ev.sort_rows(rows)
    ev.emit_report(rows, "csv", tmp_path / "r.csv")
    text = (tmp_path / "r.csv").read_text()
    assert text.splitlines()[0] == ",".join(ev.COLUMNS)
    for line in text.splitlines()[1:]:
        assert len(line.split(",")[ev.COLUMNS.index("metric_value")].split(".")[1]) == 6
    back = ev.load_report_csv(str(tmp_path / "r.csv"))
    assert [(r.metric, round(r.metric_value, 6)) for r in back] == \
        [(r.metric, round(r.metric_value, 6)) for r in ev.sort_rows(rows)]


def test_emit_report_rejects_empty(tmp_path):
    with pytest.raises(ValueError, match="empty"):
        ev.emit_report([], "csv", tmp_path / "x.csv")


def test_report_sort_is_canonical(trained):
    nets, test = trained
    net, _ = nets["o-softmax-ce"]
    rows = ev.evaluate_untargeted(net, AttackConfig("fgsm", 0.1), test)
    assert ev.report_to_csv(rows) == ev.report_to_csv(rows[::-1])


def test_merge_reports(trained):
    nets, test = trained
    net, _ = nets["o-softmax-ce"]
    a = ev.evaluate_untargeted(net, AttackConfig("fgsm", 0.1), test)
    b = ev.evaluate_untargeted(net, AttackConfig("fgsm", 0.2), test)
    merged = ev.merge_reports([a, b, a])
    assert len(merged) == 6
    bad = [ev.ReportRow(**{**a[0].__dict__, "metric_value": 0.123})]
    with pytest.raises(ValueError, match="conflicting"):
        ev.merge_reports([a, bad])


def test_pgm_zero_image():
    blob = ev.encode_netpbm(np.zeros((3, 4, 1)))
    assert blob.startswith(b"P5\n4 3\n255\n")
    assert blob.endswith(bytes(12))
    np.testing.assert_array_equal(ev.decode_netpbm(blob), np.zeros((3, 4)))


def test_ppm_rgb_roundtrip():
    img = np.random.default_rng(0).random((2, 3, 3))
    px = ev.decode_netpbm(ev.encode_netpbm(img))
    assert px.shape == (2, 3, 3)
    np.testing.assert_array_equal(px, np.round(255 * img).astype(np.uint8))


def test_dump_grid_max_pixel_change(trained, tmp_path):
    nets, test = trained
    net, _ = nets["o-softmax-ce"]
    # pixels on the 1/255 lattice away from the box edges, so every +-eps move is visible
    x = np.round(np.random.default_rng(0).uniform(0.2, 0.8, (8, 6, 6, 1)) * 255) / 255
    data = Dataset(x, test.labels[:8], n_classes=4)
    _, out = ev.evaluate_untargeted(net, AttackConfig("mim", 0.1), data, return_outcome=True)
    path = ev.dump_images(x, out.x_adv, tmp_path / "grid.pgm", cols=4)
    grid = ev.decode_netpbm(path.read_bytes()).astype(int)
    assert grid.shape == (4 * 7 + 1, 4 * 7 + 1)
    clean_rows = np.concatenate([grid[1 + 14 * r:7 + 14 * r] for r in range(2)])
    adv_rows = np.concatenate([grid[8 + 14 * r:14 + 14 * r] for r in range(2)])
    assert np.abs(clean_rows - adv_rows).max() == round(255 * 0.1)
