"""CLI lifecycle on a tiny synthetic task."""

import json

import pytest

from featacq.cli import load_config, main

TINY = {
    "data": {
        "synthetic": {
            "n_features": 4,
            "informative": [1, 2],
            "weights": [5.0, -4.0],
            "n_samples": 300,
            "n_free": 1,
            "costs": [1.0, 2.0, 1.0],
        }
    },
    "guesser": {"hidden": [16], "epochs": 8},
    "env": {"budget": 3.0},
    "agent": {"episodes": 40, "hidden": [16]},
    "eval": {"n_boot": 30, "policy": "random"},
}


@pytest.fixture
def workdir(tmp_path):
    import yaml

    cfg_path = tmp_path / "config.yaml"
    cfg = dict(TINY)
    cfg["workdir"] = str(tmp_path / "run")
    cfg["seed"] = 5
    cfg_path.write_text(yaml.safe_dump(cfg))
    return tmp_path, cfg_path


def run(cfg_path, command, *extra):
    assert main([command, "-c", str(cfg_path), *extra]) == 0


class TestConfig:
    def test_defaults_merge(self, workdir):
        _, cfg_path = workdir
        cfg = load_config(cfg_path)
        assert cfg["guesser"]["epochs"] == 8
        assert cfg["guesser"]["lr"] == 3e-3  # default survives partial override

    def test_dotted_overrides(self, workdir):
        _, cfg_path = workdir
        cfg = load_config(cfg_path, ["env.budget=9.5", "eval.policy=reveal_all"])
        assert cfg["env"]["budget"] == 9.5
        assert cfg["eval"]["policy"] == "reveal_all"

    def test_bad_override_rejected(self):
        with pytest.raises(SystemExit):
            load_config(None, ["notkeyvalue"])


class TestPipeline:
    def test_full_lifecycle(self, workdir, capsys):
        tmp_path, cfg_path = workdir
        run(cfg_path, "gen-data")
        summary = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
        assert summary["records"] == 300
        assert (tmp_path / "run" / "schema.json").exists()
        assert (tmp_path / "run" / "records.jsonl").exists()

        run(cfg_path, "train-guesser")
        summary = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
        assert summary["epochs"] == 8
        assert (tmp_path / "run" / "guesser.ckpt").exists()
        log_lines = (tmp_path / "run" / "guesser_log.jsonl").read_text().strip().splitlines()
        assert len(log_lines) == 8
        assert {"epoch", "loss", "val_acc", "p_adv"} <= set(json.loads(log_lines[0]))

        run(cfg_path, "train-agent")
        summary = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
        assert summary["episodes"] == 40
        assert (tmp_path / "run" / "agent.ckpt").exists()

        run(cfg_path, "evaluate", "--set", "eval.policy=agent")
        summary = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
        assert 0.0 <= summary["accuracy"] <= 1.0
        assert summary["mean_cost"] <= 3.0
        report = json.loads((tmp_path / "run" / "report.json").read_text())
        assert report["aggregates"]["accuracy"] == summary["accuracy"]

        run(cfg_path, "oracle")
        summary = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
        assert 0.0 <= summary["mean_prob_correct"] <= 1.0

    def test_evaluate_table_format(self, workdir, capsys):
        tmp_path, cfg_path = workdir
        run(cfg_path, "gen-data")
        run(cfg_path, "train-guesser")
        run(cfg_path, "evaluate", "--set", "eval.format=table", "--set", "eval.policy=reveal_all")
        capsys.readouterr()
        table = (tmp_path / "run" / "report.csv").read_text().splitlines()
        assert table[0].startswith("id,")
        assert len(table) > 1

    def test_sweep_budget_rows(self, workdir, capsys):
        tmp_path, cfg_path = workdir
        run(cfg_path, "gen-data")
        run(cfg_path, "train-guesser")
        run(
            cfg_path,
            "sweep-budget",
            "--set",
            "sweep.budgets=[1.0, 4.0]",
            "--set",
            "sweep.episodes=30",
            "--set",
            "sweep.n_boot=20",
        )
        summary = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
        assert [r["budget"] for r in summary["rows"]] == [1.0, 4.0]
        assert all(r["mean_cost"] <= r["budget"] for r in summary["rows"])
