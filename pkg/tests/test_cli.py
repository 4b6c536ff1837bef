"""Command-line surface: exit codes, determinism, report round-trips."""

import numpy as np
import pytest

from legs.cli import main
from legs.report import parse_report


@pytest.fixture
def synth_dir(tmp_path):
    out = tmp_path / "SYNTH"
    assert main(["synth", "--out", str(out), "--n", "12", "--seed", "3"]) == 0
    return out


class TestCheck:
    def test_random_graph_passes(self, capsys):
        code = main(["check", "--graph", "random:n=18", "--scales", "1,2,4,8",
                     "--trials", "25", "--seed", "1"])
        out = capsys.readouterr().out
        assert code == 0
        assert out.count("[PASS]") == 3

    def test_edge_list_file(self, tmp_path, capsys):
        p = tmp_path / "g.txt"
        p.write_text("6\n0 1\n1 2\n2 3\n3 4\n4 5\n0 5\n1 4\n")
        code = main(["check", "--graph", str(p), "--scales", "1,3", "--trials", "10"])
        assert code == 0
        assert capsys.readouterr().out.count("[PASS]") == 3


class TestSynthCommand:
    def test_files_written(self, synth_dir):
        for suffix in ("A", "graph_indicator", "graph_labels"):
            assert (synth_dir / f"SYNTH_{suffix}.txt").is_file()

    def test_deterministic(self, tmp_path):
        a = tmp_path / "A"
        b = tmp_path / "B"
        main(["synth", "--out", str(a), "--n", "8", "--seed", "5"])
        main(["synth", "--out", str(b), "--n", "8", "--seed", "5"])
        assert (a / "A_A.txt").read_bytes() == (b / "B_A.txt").read_bytes()

    def test_odd_count_rejected(self, tmp_path):
        with pytest.raises(SystemExit):
            main(["synth", "--out", str(tmp_path / "odd"), "--n", "7"])


class TestFeaturesCommand:
    def test_export_and_determinism(self, synth_dir, tmp_path, capsys):
        out_a = tmp_path / "a.csv"
        out_b = tmp_path / "b.csv"
        args = ["features", "--data", str(synth_dir), "--J", "3", "--m", "8",
                "--q", "1,2", "--fixed"]
        assert main(args + ["--out", str(out_a)]) == 0
        assert main(args + ["--out", str(out_b)]) == 0
        assert out_a.read_bytes() == out_b.read_bytes()
        assert out_a.read_text().startswith("graph_id,label,")

    def test_soft_and_fixed_differ(self, synth_dir, tmp_path):
        soft = tmp_path / "soft.csv"
        hard = tmp_path / "hard.csv"
        base = ["features", "--data", str(synth_dir), "--J", "3", "--m", "8"]
        main(base + ["--out", str(soft)])
        main(base + ["--fixed", "--out", str(hard)])
        assert soft.read_bytes() != hard.read_bytes()


class TestTrainCommand:
    def test_report_round_trip(self, synth_dir, tmp_path, capsys):
        report_path = tmp_path / "run.report"
        code = main(["train", "--data", str(synth_dir), "--head", "fcn", "--mode", "fixed",
                     "--folds", "2", "--epochs", "5", "--seed", "2",
                     "--report", str(report_path)])
        assert code == 0
        report = parse_report(report_path)
        assert report.metric == "accuracy"
        assert len(report.per_fold) == 2
        assert report.config["dataset"] == "SYNTH"
        assert 0.0 <= report.mean <= 1.0
        assert report.mean == pytest.approx(
            float(np.mean([r["metric"] for r in report.per_fold]))
        )

    def test_identical_invocations_identical_reports_except_wallclock(self, synth_dir, tmp_path):
        paths = [tmp_path / "r1", tmp_path / "r2"]
        for p in paths:
            main(["train", "--data", str(synth_dir), "--head", "rbf", "--mode", "fixed",
                  "--folds", "2", "--epochs", "4", "--seed", "9", "--report", str(p)])
        a, b = (parse_report(p) for p in paths)
        assert a.per_fold == b.per_fold
        assert a.mean == b.mean and a.std == b.std
        assert a.config == b.config


class TestGradcheckCommand:
    def test_exit_zero_and_prints_error(self, capsys):
        code = main(["gradcheck", "--seed", "0"])
        out = capsys.readouterr().out
        assert code == 0
        assert "max relative error" in out
