import json
import os

import pytest

from blendlab.cli import main


def read(path):
    with open(path, "rb") as fh:
        return fh.read()


class TestRun:
    def test_writes_episodes_and_metrics(self, tmp_path, capsys):
        out = tmp_path / "run"
        code = main(
            [
                "run",
                "--scenario",
                "open",
                "--method",
                "ltb,lb",
                "--seeds",
                "0..1",
                "--out",
                str(out),
                "--search-budget",
                "150",
            ]
        )
        assert code == 0
        names = sorted(os.listdir(out))
        assert "metrics.csv" in names
        assert sum(n.endswith(".jsonl") for n in names) == 4
        header = read(out / "metrics.csv").decode().splitlines()[0]
        assert header.startswith("scenario,method,seed,steps,reached_goal,collision")

    def test_byte_identical_reruns(self, tmp_path):
        args = [
            "run",
            "--scenario",
            "open",
            "--method",
            "ltb",
            "--seeds",
            "0,1",
            "--search-budget",
            "150",
        ]
        a, b = tmp_path / "a", tmp_path / "b"
        assert main(args + ["--out", str(a)]) == 0
        assert main(args + ["--out", str(b)]) == 0
        assert read(a / "metrics.csv") == read(b / "metrics.csv")

    def test_parallel_jobs_match_sequential(self, tmp_path):
        args = [
            "run",
            "--scenario",
            "open",
            "--method",
            "ltb",
            "--seeds",
            "0,1",
            "--search-budget",
            "150",
        ]
        seq, par = tmp_path / "seq", tmp_path / "par"
        assert main(args + ["--out", str(seq)]) == 0
        assert main(args + ["--out", str(par), "--jobs", "2"]) == 0
        assert read(seq / "metrics.csv") == read(par / "metrics.csv")
        for name in ("episode_open_ltb_seed0.jsonl", "episode_open_ltb_seed1.jsonl"):
            assert read(seq / name) == read(par / name)

    def test_unknown_method_lists_valid(self, capsys):
        assert main(["run", "--scenario", "open", "--method", "bogus"]) == 1
        err = capsys.readouterr().err
        assert "lb, ltb, ltbo, ctb, psc" in err

    def test_unknown_scenario(self, capsys):
        assert main(["run", "--scenario", "nowhere"]) == 1
        assert "built-ins" in capsys.readouterr().err

    def test_passthrough_collision_recorded(self, tmp_path):
        out = tmp_path / "fig3"
        code = main(
            [
                "run",
                "--scenario",
                "fig3",
                "--method",
                "lb",
                "--kh",
                "1.0",
                "--seeds",
                "0",
                "--out",
                str(out),
            ]
        )
        assert code == 0
        rows = read(out / "metrics.csv").decode().splitlines()
        assert rows[1].split(",")[5] == "true"  # collision column

    def test_config_file_with_flag_override(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(
            json.dumps(
                {
                    "scenario": "open",
                    "methods": ["ltb"],
                    "seeds": [0],
                    "out": str(tmp_path / "from_config"),
                    "search_budget": 150,
                }
            )
        )
        out = tmp_path / "override"
        assert main(["run", "--config", str(cfg), "--out", str(out)]) == 0
        assert (out / "metrics.csv").exists()

    def test_env_seed_default(self, tmp_path, monkeypatch):
        monkeypatch.setenv("BLENDLAB_SEED", "5")
        out = tmp_path / "env"
        assert (
            main(
                [
                    "run",
                    "--scenario",
                    "open",
                    "--method",
                    "ltb",
                    "--out",
                    str(out),
                    "--search-budget",
                    "150",
                ]
            )
            == 0
        )
        rows = read(out / "metrics.csv").decode().splitlines()
        assert rows[1].split(",")[2] == "5"


class TestCheck:
    def test_lemma1_exit_zero(self, capsys):
        assert main(["check", "lemma1"]) == 0
        out = capsys.readouterr().out
        assert "PASS lemma1/controls-differ" in out

    def test_unknown_suite(self, capsys):
        assert main(["check", "t9"]) == 1
        assert "valid suites" in capsys.readouterr().err


class TestServe:
    def test_unknown_scenario(self, capsys):
        assert main(["serve", "--scenario", "nowhere", "--port", "0"]) == 1

    def test_unknown_method(self, capsys):
        assert main(["serve", "--method", "bogus", "--port", "0"]) == 1


class TestReport:
    def test_renders_figures(self, tmp_path):
        out = tmp_path / "run"
        main(
            [
                "run",
                "--scenario",
                "open",
                "--method",
                "ltb",
                "--seeds",
                "0",
                "--out",
                str(out),
                "--search-budget",
                "150",
            ]
        )
        render_dir = tmp_path / "figs"
        assert main(["report", str(out), "--out", str(render_dir)]) == 0
        pngs = [n for n in os.listdir(render_dir) if n.endswith(".png")]
        assert "comparison.png" in pngs
        assert any(n.startswith("episode_open_ltb") for n in pngs)
        assert all((render_dir / n).stat().st_size > 0 for n in pngs)

    def test_missing_directory(self, capsys):
        assert main(["report", "/nonexistent/dir"]) == 1
