"""Training loop behavior, checkpoints, and the command-line interface."""

import json
import math

import numpy as np
import pytest

from hypent import cli, data, engine
from hypent.engine import RunConfig
from hypent.errors import ConfigError


@pytest.fixture(scope="module")
def tiny_numbers():
    split, _ = data.gen_numbers(train_n=300, val_n=80, test_n=80, seed=5)
    return split


@pytest.fixture(scope="module")
def tiny_adjnoun():
    split, _ = data.gen_adjnoun(vocab_size=40, train_n=60, val_n=40, test_n=40, seed=5)
    return split


class TestTraining:
    def test_zero_epochs_yields_initial_checkpoint(self, tiny_numbers):
        cfg = RunConfig(model="LMS", dim=4, epochs=0, seed=1)
        result = engine.train(cfg, tiny_numbers)
        assert result.state.best_epoch == 0
        record = result.log[1]
        assert record["epoch"] == 0
        assert 0.3 < record["test_accuracy"] < 0.7  # near chance
        # embeddings still at the tiny init scale
        assert np.abs(result.state.embeddings).max() <= 0.001

    def test_determinism_identical_logs(self, tiny_numbers):
        cfg = RunConfig(model="LMS_FFNN", dim=4, epochs=2, seed=11, lr=0.01)
        log1 = engine.train(cfg, tiny_numbers).log
        log2 = engine.train(cfg, tiny_numbers).log
        assert json.dumps(log1, sort_keys=True) == json.dumps(log2, sort_keys=True)

    def test_different_seeds_differ(self, tiny_numbers):
        cfg1 = RunConfig(model="LMS_FFNN", dim=4, epochs=1, seed=11, lr=0.01)
        cfg2 = RunConfig(model="LMS_FFNN", dim=4, epochs=1, seed=12, lr=0.01)
        log1 = engine.train(cfg1, tiny_numbers).log
        log2 = engine.train(cfg2, tiny_numbers).log
        assert json.dumps(log1) != json.dumps(log2)

    def test_margin_checkpoint_stores_threshold(self, tiny_adjnoun):
        cfg = RunConfig(model="RMS", dim=3, epochs=2, seed=2)
        result = engine.train(cfg, tiny_adjnoun)
        assert result.state.threshold is not None
        assert math.isfinite(result.state.threshold)

    def test_ffnn_parameters_update_embeddings_project(self, tiny_numbers):
        cfg = RunConfig(model="LMS_FFNN", dim=4, epochs=1, seed=3, lr=0.01)
        result = engine.train(cfg, tiny_numbers)
        state = result.state
        space = state.space
        for row in state.embeddings:
            assert space.contains(row)
        assert result.log[-1]["ball_violations"] == 0

    def test_tree_model_rejects_chain_data(self, tiny_numbers):
        cfg = RunConfig(model="MS", dim=4, epochs=1, seed=3)
        with pytest.raises(ConfigError):
            engine.train(cfg, tiny_numbers)

    def test_invalid_combinations_rejected_before_training(self, tiny_numbers):
        with pytest.raises(ConfigError):
            RunConfig(model="MS", classes=3).validated()
        with pytest.raises(ConfigError):
            RunConfig(model="EA_FFNN", curvature=1.0).validated()
        with pytest.raises(ConfigError):
            RunConfig(model="LMS_FFNN", curvature=0.0, features="u,v,mdiff").validated()
        with pytest.raises(ConfigError):
            RunConfig(model="LMS_FFNN", lr=-1.0).validated()

    def test_disentangle_pretraining_runs(self, tiny_adjnoun):
        cfg = RunConfig(model="LMS_FFNN", dim=3, epochs=2, seed=4, lr=0.01,
                        disentangle_epochs=1, disentangle_negatives=3)
        result = engine.train(cfg, tiny_adjnoun)
        assert len([r for r in result.log if "epoch" in r]) == 3


class TestCheckpointRoundTrip:
    def test_save_load_save_byte_identical(self, tiny_numbers, tmp_path):
        cfg = RunConfig(model="LMS_FFNN", dim=4, epochs=1, seed=7, lr=0.01)
        result = engine.train(cfg, tiny_numbers)
        p1 = tmp_path / "a.json"
        p2 = tmp_path / "b.json"
        engine.save_checkpoint(p1, result.state)
        engine.save_checkpoint(p2, engine.load_checkpoint(p1))
        assert p1.read_bytes() == p2.read_bytes()

    def test_margin_round_trip(self, tiny_adjnoun, tmp_path):
        cfg = RunConfig(model="LMS", dim=3, epochs=1, seed=7)
        result = engine.train(cfg, tiny_adjnoun)
        p1 = tmp_path / "a.json"
        p2 = tmp_path / "b.json"
        engine.save_checkpoint(p1, result.state)
        engine.save_checkpoint(p2, engine.load_checkpoint(p1))
        assert p1.read_bytes() == p2.read_bytes()

    def test_version_check(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{"format_version": 99}', encoding="utf-8")
        with pytest.raises(ConfigError):
            engine.load_checkpoint(path)


class TestEvalReproducibility:
    def test_eval_reproduces_best_epoch_metrics(self, tiny_numbers):
        cfg = RunConfig(model="LMS_FFNN", dim=4, epochs=3, seed=8, lr=0.01)
        result = engine.train(cfg, tiny_numbers)
        best = next(r for r in result.log
                    if r.get("epoch") == result.state.best_epoch)
        report, _ = engine.evaluate_split(result.state, tiny_numbers.test,
                                          threshold=result.state.threshold)
        assert report.accuracy == best["test_accuracy"]

    def test_margin_eval_reproduces_logged_metrics(self, tiny_adjnoun):
        cfg = RunConfig(model="LMS", dim=3, epochs=3, seed=8)
        result = engine.train(cfg, tiny_adjnoun)
        best = next(r for r in result.log
                    if r.get("epoch") == result.state.best_epoch)
        report, _ = engine.evaluate_split(result.state, tiny_adjnoun.test,
                                          threshold=result.state.threshold)
        assert report.accuracy == best["test_accuracy"]

    def test_train_accuracy_at_least_test_on_converged_toy(self, tiny_adjnoun):
        cfg = RunConfig(model="LMS", dim=3, epochs=10, seed=8, lr=0.05)
        result = engine.train(cfg, tiny_adjnoun)
        train_report, _ = engine.evaluate_split(result.state, tiny_adjnoun.train,
                                                threshold=result.state.threshold)
        test_report, _ = engine.evaluate_split(result.state, tiny_adjnoun.test,
                                               threshold=result.state.threshold)
        assert train_report.accuracy >= test_report.accuracy - 0.05


class TestCli:
    def run(self, *argv):
        return cli.main(list(argv))

    def test_generate_train_eval_norms_pipeline(self, tmp_path, capsys):
        datadir = tmp_path / "numbers"
        assert self.run("gen-numbers", "--train-n", "200", "--val-n", "60",
                        "--test-n", "60", "--seed", "3", "--out", str(datadir)) == 0
        ckpt = tmp_path / "model.json"
        assert self.run(
            "train", "--model", "LMS_FFNN", "--dim", "4", "--epochs", "1",
            "--lr", "0.01", "--seed", "1",
            "--train", str(datadir / "train.tsv"),
            "--val", str(datadir / "validation.tsv"),
            "--test", str(datadir / "test.tsv"),
            "--out", str(ckpt),
        ) == 0
        out = capsys.readouterr().out
        summary = json.loads(out.splitlines()[-1])
        assert summary["checkpoint"] == str(ckpt)
        log_path = tmp_path / "model.json.log.jsonl"
        assert log_path.exists()
        records = [json.loads(line) for line in log_path.read_text().splitlines()]
        assert records[0]["config"]["model"] == "LMS_FFNN"
        assert records[-1]["epoch"] == 1

        assert self.run("eval", "--checkpoint", str(ckpt),
                        "--test", str(datadir / "test.tsv")) == 0
        report = json.loads(capsys.readouterr().out.splitlines()[-1])
        assert report["accuracy"] == summary["test_accuracy"]

        csv_path = tmp_path / "norms.csv"
        assert self.run("norms", "--checkpoint", str(ckpt), "--bins", "10",
                        "--out", str(csv_path)) == 0
        lines = csv_path.read_text().splitlines()
        assert lines[0] == "bin_edge,count"
        assert sum(int(line.split(",")[1]) for line in lines[1:]) == 11

    def test_config_file_supplies_flags_and_cli_overrides(self, tmp_path, capsys):
        datadir = tmp_path / "numbers"
        self.run("gen-numbers", "--train-n", "100", "--val-n", "40",
                 "--test-n", "40", "--seed", "3", "--out", str(datadir))
        config = tmp_path / "run.conf"
        config.write_text(
            "model=LMS\ndim=4\nepochs=2\nlr=0.05\nseed=9\n"
            f"train={datadir / 'train.tsv'}\n"
            f"val={datadir / 'validation.tsv'}\n"
            f"test={datadir / 'test.tsv'}\n"
            f"out={tmp_path / 'conf.json'}\n",
            encoding="utf-8",
        )
        assert self.run("train", "--config", str(config), "--epochs", "1") == 0
        capsys.readouterr()
        state = engine.load_checkpoint(tmp_path / "conf.json")
        assert state.config.epochs == 1  # flag overrode the file
        assert state.config.model == "LMS"

    def test_usage_error_exit_code(self, capsys):
        assert self.run("train", "--model", "NOPE") == 1
        assert self.run("bogus-command") == 1
        assert self.run("train", "--model", "MS", "--classes", "3") == 1
        capsys.readouterr()

    def test_eval_dim_mismatch(self, tmp_path, capsys):
        datadir = tmp_path / "numbers"
        self.run("gen-numbers", "--train-n", "100", "--val-n", "40",
                 "--test-n", "40", "--seed", "3", "--out", str(datadir))
        ckpt = tmp_path / "m.json"
        self.run("train", "--model", "LMS", "--dim", "3", "--epochs", "0",
                 "--train", str(datadir / "train.tsv"),
                 "--val", str(datadir / "validation.tsv"),
                 "--test", str(datadir / "test.tsv"), "--out", str(ckpt))
        capsys.readouterr()
        assert self.run("eval", "--checkpoint", str(ckpt), "--test",
                        str(datadir / "test.tsv"), "--dim", "7") == 1
        capsys.readouterr()

    def test_eval_empty_file_errors(self, tmp_path, capsys):
        datadir = tmp_path / "numbers"
        self.run("gen-numbers", "--train-n", "100", "--val-n", "40",
                 "--test-n", "40", "--seed", "3", "--out", str(datadir))
        ckpt = tmp_path / "m.json"
        self.run("train", "--model", "LMS", "--dim", "3", "--epochs", "0",
                 "--train", str(datadir / "train.tsv"),
                 "--val", str(datadir / "validation.tsv"),
                 "--test", str(datadir / "test.tsv"), "--out", str(ckpt))
        empty = tmp_path / "empty.tsv"
        empty.write_text("", encoding="utf-8")
        capsys.readouterr()
        assert self.run("eval", "--checkpoint", str(ckpt), "--test", str(empty)) == 1
        capsys.readouterr()

    def test_gradcheck_passes(self, capsys):
        assert self.run("gradcheck", "--trials", "10", "--seed", "0") == 0
        report = json.loads(capsys.readouterr().out)
        assert report["passed"] is True
        assert report["max_relative_error"] < 1e-4

    def test_gradcheck_corrupt_hook_fails(self, capsys, monkeypatch):
        monkeypatch.setenv("HYPENT_GRADCHECK_CORRUPT", "1")
        assert self.run("gradcheck", "--trials", "4", "--seed", "0") == 2
        report = json.loads(capsys.readouterr().out)
        assert report["passed"] is False

    def test_determinism_same_seed_same_logs(self, tmp_path):
        datadir = tmp_path / "numbers"
        self.run("gen-numbers", "--train-n", "100", "--val-n", "40",
                 "--test-n", "40", "--seed", "3", "--out", str(datadir))
        logs = []
        for name in ("a", "b"):
            ckpt = tmp_path / f"{name}.json"
            self.run("train", "--model", "LMS_FFNN", "--dim", "3", "--epochs", "2",
                     "--lr", "0.01", "--seed", "5",
                     "--train", str(datadir / "train.tsv"),
                     "--val", str(datadir / "validation.tsv"),
                     "--test", str(datadir / "test.tsv"), "--out", str(ckpt))
            logs.append((tmp_path / f"{name}.json.log.jsonl").read_bytes())
        assert logs[0] == logs[1]
        assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
