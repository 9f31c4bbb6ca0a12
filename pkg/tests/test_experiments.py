import math

import numpy as np
import pytest

from genlab.bounds import RobBoundInputs, robustness_upper_bound
from genlab.data import DistributionSpec, make_rng, sample_dataset
from genlab.errors import ContractError
from genlab.experiments import (
    ROW_FIELDS,
    Experiment,
    ExperimentConfig,
    ResultRow,
    badloss_net,
    config_lines,
    emit_outputs,
    expresser_for,
    parse_config,
    run_badloss_demo,
    run_robust_demo,
    run_sweep_data,
    run_sweep_width,
    summarize,
    write_csv,
)

SMALL = dict(n=4, N=64, test_samples=500, epochs=5, repeats=3)


def small(**kw):
    return ExperimentConfig(**{**SMALL, **kw})


class TestConfig:
    def test_parse(self):
        cfg = parse_config("""
            experiment = sweep-data   # comment
            widths = 8, 16
            fractions = 0.25,0.5,1.0
            learning_rate = 0.2
            record_wall_time = yes
        """)
        assert cfg.experiment is Experiment.SWEEP_DATA
        assert cfg.widths == (8, 16) and cfg.fractions == (0.25, 0.5, 1.0)
        assert cfg.learning_rate == 0.2 and cfg.record_wall_time

    def test_overrides_win(self):
        assert parse_config("base_seed = 3", base_seed=9).base_seed == 9
        assert parse_config("base_seed = 3", base_seed=None).base_seed == 3

    def test_round_trip(self):
        cfg = small(widths=(4, 8), experiment=Experiment.SWEEP_DATA)
        assert parse_config("\n".join(config_lines(cfg))) == cfg

    @pytest.mark.parametrize("text", ["bogus = 1", "widths", "repeats = 0", "widths = ",
                                      "N = many"])
    def test_rejects(self, text):
        with pytest.raises(ContractError):
            parse_config(text)


class TestExpressers:
    @pytest.mark.parametrize("spec", [DistributionSpec.blob_pair(8, 0.05, 0.3),
                                      DistributionSpec.blob_pair(3, 0.2, 0.1),
                                      DistributionSpec.two_point(5),
                                      DistributionSpec.parity_diagonal(6)],
                             ids=["blob8", "blob3", "two_point", "parity"])
    def test_confidence_holds(self, spec):
        net, W0, conf = expresser_for(spec)
        assert net.width == W0 and net.box_constrained()
        ds = sample_dataset(spec, 2000, make_rng(0))
        assert np.min(ds.y * net.forward(ds.X)) >= conf - 1e-12

    def test_outlier_has_none(self):
        assert expresser_for(DistributionSpec.outlier_mix(4, 0.5)) == (None, None, None)


class TestSweeps:
    def test_width_cardinality(self):
        rows = run_sweep_width(small(widths=(8, 16, 32)))
        assert len(rows) == 9
        assert [r.run_id for r in rows] == list(range(9))
        assert [r.width for r in rows] == [8] * 3 + [16] * 3 + [32] * 3

    def test_data_cardinality(self):
        rows = run_sweep_data(small(fractions=(0.25, 0.5, 1.0), repeats=4, width=8,
                                    experiment=Experiment.SWEEP_DATA))
        assert len(rows) == 12
        assert sorted({r.n_train for r in rows}) == [16, 32, 64]

    def test_row_invariants(self):
        rows = run_sweep_width(small(widths=(4, 8), repeats=2))
        for r in rows:
            for acc in (r.train_acc, r.test_acc):
                assert 0 <= acc <= 1
            assert r.q_hat >= 0
            assert 0 <= r.bound_clamped <= 1
            assert r.wall_time is None

    def test_byte_identical_rerun(self, tmp_path):
        cfg = small(widths=(4, 8), repeats=2)
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        write_csv(run_sweep_width(cfg), a)
        write_csv(run_sweep_width(cfg), b)
        assert a.read_bytes() == b.read_bytes()

    def test_seed_matters(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        write_csv(run_sweep_width(small(widths=(8,), repeats=1)), a)
        write_csv(run_sweep_width(small(widths=(8,), repeats=1, base_seed=5)), b)
        assert a.read_bytes() != b.read_bytes()

    def test_parallel_matches_serial(self, tmp_path):
        cfg = small(widths=(4, 8), repeats=2)
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        write_csv(run_sweep_width(cfg), a)
        write_csv(run_sweep_width(ExperimentConfig(**{**cfg.__dict__, "workers": 2})), b)
        assert a.read_bytes() == b.read_bytes()


class TestSummary:
    def _rows(self, accs):
        return [ResultRow(i, 0, "sweep_width", w, 10, test_acc=a)
                for i, (w, a) in enumerate(accs)]

    def test_monotone(self):
        s = summarize(self._rows([(4, 0.5), (8, 0.7), (16, 0.8), (32, 0.85)]), "width")
        assert s.spearman == pytest.approx(1.0)
        assert s.saturated

    def test_flat(self):
        s = summarize(self._rows([(4, 0.5), (8, 0.5)]), "width")
        assert math.isnan(s.spearman) and not s.saturated


class TestOutputs:
    def test_header_only(self, tmp_path):
        emit_outputs([], tmp_path)
        lines = (tmp_path / "results.csv").read_bytes().split(b"\r\n")
        assert lines == [",".join(ROW_FIELDS).encode(), b""]

    def test_nine_rows(self, tmp_path):
        rows = [ResultRow(i, i, "sweep_width", 4, 10, 0.1, 1.0, 0.5, 0.01) for i in range(9)]
        emit_outputs(rows, tmp_path, small())
        text = (tmp_path / "results.csv").read_bytes().decode()
        assert len(text.splitlines()) == 10
        assert text.splitlines()[1] == "0,0,sweep_width,4,10,0.1,1.0,0.5,0.01,,,,,"
        manifest = (tmp_path / "manifest.txt").read_text()
        assert "seeds = 0,1,2,3,4,5,6,7,8" in manifest and "widths = 4,8,16" in manifest
        assert "plot" in (tmp_path / "plot.gp").read_text()

    def test_quoting(self, tmp_path):
        write_csv([ResultRow(0, 0, 'a,"b"', 1, 1)], tmp_path / "q.csv")
        assert '"a,""b"""' in (tmp_path / "q.csv").read_text()

    def test_unwritable(self, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("x")
        with pytest.raises(OSError):
            emit_outputs([], blocker / "sub")


class TestRobustDemo:
    @pytest.fixture(scope="class")
    @staticmethod
    def report():
        cfg = small(experiment=Experiment.ROBUST_DEMO, width=8, eps_grid=(0.0, 0.02, 0.1, 0.3),
                    attack_restarts=2, attack_steps=10, attack_samples=200)
        return cfg, run_robust_demo(cfg)

    def test_eps_zero_is_clean(self, report):
        cfg, rep = report
        assert rep.robust_acc[0] == rep.clean_acc
        assert rep.rows[0].test_acc == rep.clean_acc
        assert rep.bounds[0] is None and rep.c1[0] is None

    def test_monotone(self, report):
        _, rep = report
        assert all(a >= b for a, b in zip(rep.robust_acc, rep.robust_acc[1:]))

    def test_bound_recomputed(self, report):
        cfg, rep = report
        spec = cfg.distribution_spec()
        _, W0, _ = expresser_for(spec)
        for c1, b in zip(rep.c1[1:], rep.bounds[1:]):
            again = robustness_upper_bound(RobBoundInputs(spec.n, W0, max(cfg.width, W0 + 1),
                                                          cfg.N, rep.c0, c1, cfg.delta, 1.0))
            assert abs(again.raw - b.raw) <= 1e-12 * max(1.0, abs(b.raw))
            assert again.clamped == b.clamped


class TestBadloss:
    def test_atom_values(self):
        F = badloss_net(3, 5)
        assert F.forward(np.zeros((1, 3)))[0] == 6.0
        assert F.forward(np.ones((1, 3)))[0] == 5 * 4 + 1

    @pytest.mark.parametrize("n,W", [(2, 3), (4, 8)])
    def test_demo(self, n, W):
        cfg = ExperimentConfig(experiment=Experiment.BADLOSS_DEMO, distribution="two_point",
                               loss="neg_margin", n=n, width=W, N=40, repeats=2, epochs=5,
                               candidates=2000)
        rep = run_badloss_demo(cfg)
        assert rep.constructed_risk == pytest.approx(-W * n / 2)
        assert rep.constructed_risk <= rep.best_candidate_risk
        assert rep.constructed_risk <= min(rep.trained_risks)
        assert rep.accuracy == 0.5

    def test_needs_two_point(self):
        with pytest.raises(ContractError):
            run_badloss_demo(small())
