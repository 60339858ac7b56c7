import json
import os

import pytest

from robustmoments import Update, write_stream
from robustmoments.cli import main
from robustmoments.driver import ExperimentSpec, parse_length, run_batch, run_sweep

BASE = [
    "--p", "1", "--n", "1024", "--alpha", "0.5", "--delta", "0.2",
    "--T", "10", "--k-scale", "1e-4", "--sketch-scale", "0.3",
    "--stable-rows", "33", "--seed", "5",
]


class TestParseLength:
    def test_forms(self):
        assert parse_length("12345") == 12345
        assert parse_length("10^4") == 10000
        assert parse_length(" 2^10 ") == 1024

    def test_bad(self):
        with pytest.raises(ValueError):
            parse_length("ten")


class TestRunCommand:
    def test_writes_transcripts_and_summary(self, tmp_path, capsys):
        out = tmp_path / "results"
        code = main(["run", *BASE, "--m", "200", "--adversary", "flip",
                     "--runs", "3", "--out", str(out)])
        assert code == 0
        files = sorted(p.name for p in out.iterdir())
        assert files == ["run_000.csv", "run_001.csv", "run_002.csv", "summary.csv"]
        summary = (out / "summary.csv").read_text().splitlines()
        assert summary[0] == "run,all_correct,first_failure,max_words,wall_time,status"
        assert len(summary) == 4
        assert "all_correct in 3/3" in capsys.readouterr().out

    def test_deterministic_transcripts(self, tmp_path):
        outs = []
        for tag in ("x", "y"):
            out = tmp_path / tag
            assert main(["run", *BASE, "--m", "150", "--adversary", "random",
                         "--runs", "2", "--out", str(out)]) == 0
            outs.append((out / "run_001.csv").read_bytes())
        assert outs[0] == outs[1]

    def test_malformed_flag_exits_two(self):
        with pytest.raises(SystemExit) as exc:
            main(["run", "--p", "1", "--bogus-flag", "7"])
        assert exc.value.code == 2

    def test_missing_required_exits_two(self, capsys):
        assert main(["run", "--m", "100"]) == 2
        assert "missing required settings" in capsys.readouterr().err

    def test_bad_values_exit_two(self, tmp_path):
        assert main(["run", *BASE[:-2], "--seed", "5", "--m", "100",
                     "--alpha", "2.0", "--out", str(tmp_path)]) == 2

    def test_config_file_with_flag_override(self, tmp_path, capsys):
        config = tmp_path / "spec.json"
        config.write_text(json.dumps({
            "p": 1, "n": 1024, "alpha": 0.5, "delta": 0.2, "threshold": 10,
            "k_scale": 1e-4, "sketch_scale": 0.3, "stable_rows": 33,
            "runs": 1, "adversary": "flip", "m": 100,
        }))
        out = tmp_path / "o"
        code = main(["run", "--config", str(config), "--m", "120",
                     "--runs", "2", "--out", str(out)])
        assert code == 0
        rows = (out / "run_000.csv").read_text().splitlines()
        assert len(rows) == 121  # the flag m=120 beats the config m=100

    def test_unknown_config_key_rejected(self, tmp_path, capsys):
        config = tmp_path / "spec.json"
        config.write_text(json.dumps({"p": 1, "frobnicate": 3}))
        assert main(["run", "--config", str(config), "--m", "100"]) == 2
        assert "unknown config keys" in capsys.readouterr().err

    def test_stream_file_replay(self, tmp_path):
        stream = tmp_path / "updates.txt"
        write_stream(stream, [Update(1, 1), Update(2, 1), Update(1, -1)])
        out = tmp_path / "o"
        code = main(["run", *BASE, "--m", "100", "--adversary", "replay",
                     "--stream-file", str(stream), "--runs", "1", "--out", str(out)])
        assert code == 0
        rows = (out / "run_000.csv").read_text().splitlines()
        assert len(rows) == 4  # header + the three replayed updates

    def test_env_var_default_outdir(self, tmp_path, monkeypatch, capsys):
        monkeypatch.setenv("ROBUSTMOMENTS_OUT", str(tmp_path / "envout"))
        monkeypatch.chdir(tmp_path)
        code = main(["run", *BASE, "--m", "50", "--adversary", "flip", "--runs", "1"])
        assert code == 0
        assert (tmp_path / "envout" / "summary.csv").exists()


class TestSweepCommand:
    def test_single_point_degenerates_to_run(self, tmp_path, capsys):
        out = tmp_path / "sweep"
        code = main(["sweep", *BASE, "--m", "200", "--adversary", "oscillator",
                     "--runs", "1", "--out", str(out)])
        assert code == 0
        text = (out / "sweep.csv").read_text().splitlines()
        assert text[0] == "m,threshold,max_words,all_correct_runs,runs"
        assert len([r for r in text if not r.startswith("#")]) == 2
        assert "loglog_slope=nan" in capsys.readouterr().out

    def test_multi_point_slope(self, tmp_path, capsys):
        out = tmp_path / "sweep"
        code = main(["sweep", *BASE, "--m", "200,400", "--adversary", "flip",
                     "--runs", "1", "--out", str(out)])
        assert code == 0
        printed = capsys.readouterr().out
        assert "loglog_slope=" in printed
        body = (out / "sweep.csv").read_text()
        assert "# loglog_slope," in body


class TestDriverSpec:
    def test_invalid_specs_rejected(self):
        with pytest.raises(Exception):
            ExperimentSpec(p=1, n=10, m=10, alpha=0.5, delta=0.2, algorithm="nope")
        with pytest.raises(Exception):
            ExperimentSpec(p=1, n=10, m=10, alpha=0.5, delta=0.2, adversary="nope")
        with pytest.raises(Exception):
            ExperimentSpec(p=1, n=10, m=10, alpha=0.5, delta=0.2, adversary="replay")

    def test_parallel_workers_match_serial(self, tmp_path):
        spec = ExperimentSpec(
            p=1.0, n=1024, m=150, alpha=0.5, delta=0.2, adversary="random",
            threshold=10, seed=5, runs=2, k_scale=1e-4, sketch_scale=0.3,
            stable_rows=33,
        )
        serial = run_batch(spec)
        parallel = run_batch(
            ExperimentSpec(**{**spec.__dict__, "workers": 2})
        )
        assert [s.max_words for s in serial] == [s.max_words for s in parallel]
        assert [s.all_correct for s in serial] == [s.all_correct for s in parallel]

    def test_sweep_points(self):
        spec = ExperimentSpec(
            p=1.0, n=1024, m=100, alpha=0.5, delta=0.2, adversary="flip",
            threshold=10, seed=5, runs=1, k_scale=1e-4, sketch_scale=0.3,
            stable_rows=33,
        )
        points, slope = run_sweep(spec, [100, 200])
        assert [pt.m for pt in points] == [100, 200]
        assert slope == slope  # defined for two points
