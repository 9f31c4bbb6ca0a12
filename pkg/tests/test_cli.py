import csv
import io

import pytest

from genlab import bounds as B
from genlab import cli
from genlab.errors import HardAssertionError
from genlab.experiments import parse_config

FAST = """\
n = 4
N = 64
test_samples = 200
epochs = 3
repeats = 2
widths = 4,8
fractions = 0.5,1.0
width = 8
attack_restarts = 1
attack_steps = 5
attack_samples = 100
eps_grid = 0.0,0.05
candidates = 500
"""


@pytest.fixture
def conf(tmp_path):
    p = tmp_path / "run.conf"
    p.write_text(FAST)
    return p


def run(capsys, *argv):
    code = cli.main(list(argv))
    return code, capsys.readouterr()


def test_bounds_csv(capsys):
    code, out = run(capsys, "bounds", "--csv")
    assert code == 0
    table = dict(list(csv.reader(io.StringIO(out.out)))[1:])
    assert float(table["sine_sample_threshold"]) == B.sine_sample_threshold(8, 0.05)
    assert float(table["pattern_count_bound"]) == B.pattern_count_bound(8, 512)
    assert "th1.raw" in table and "robust.clamped" in table


def test_bounds_table_matches_module():
    cfg = parse_config("width = 40")
    rows = dict(cli.bounds_table(cfg))
    rep = B.th1_lower_bound(B.Th1Inputs(8, 2, 1.0, 40, 512, 0.05, 1.0, 1.0))
    assert rows["th1.raw"] == rep.raw


@pytest.mark.parametrize("sub,files", [("sweep-width", True), ("sweep-data", True),
                                       ("robust-demo", True), ("bounds", False)])
def test_subcommands(sub, files, conf, tmp_path, capsys):
    out = tmp_path / "out"
    code, _ = run(capsys, sub, "--config", str(conf), "--out", str(out), "--seed", "3")
    assert code == 0
    assert (out / "results.csv").exists() == files
    if files:
        assert "base_seed = 3" in (out / "manifest.txt").read_text()


def test_badloss(tmp_path, conf, capsys):
    conf.write_text(FAST + "distribution = two_point\nloss = neg_margin\n")
    code, out = run(capsys, "badloss-demo", "--config", str(conf), "--out", str(tmp_path))
    assert code == 0
    assert "constructed_accuracy" in out.out


def test_rerun_identical(conf, tmp_path, capsys):
    for d in ("a", "b"):
        run(capsys, "sweep-width", "--config", str(conf), "--out", str(tmp_path / d))
    assert (tmp_path / "a/results.csv").read_bytes() == (tmp_path / "b/results.csv").read_bytes()


def test_contract_error_exit_1(tmp_path, capsys):
    bad = tmp_path / "bad.conf"
    bad.write_text("repeats = 0\n")
    code, out = run(capsys, "sweep-width", "--config", str(bad))
    assert code == 1 and "repeats" in out.err


def test_missing_config_exit_1(tmp_path, capsys):
    code, _ = run(capsys, "bounds", "--config", str(tmp_path / "nope.conf"))
    assert code == 1


def test_mnist_without_paths(capsys):
    code, out = run(capsys, "mnist")
    assert code == 1 and "mnist" in out.err


def test_hard_assertion_exit_2(monkeypatch, capsys):
    def boom(cfg):
        raise HardAssertionError("cap exceeded")

    monkeypatch.setattr(cli, "run_sweep_width", boom)
    code, out = run(capsys, "sweep-width")
    assert code == 2 and "cap exceeded" in out.err


def test_usage_error_exit_1(capsys):
    assert cli.main(["frobnicate"]) == 1
    assert cli.main(["--help"]) == 0
