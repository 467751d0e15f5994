"""CLI subcommand tests, run in-process through main()."""

import json

import numpy as np
import pytest

from newsvane import cli
from newsvane.checkpoint import load_checkpoint
from newsvane.corpus import load_headlines, load_prices
from newsvane.embeddings import load_pretrained, nearest_neighbors
from newsvane.pipeline import prepare_dataset


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """Synthetic corpus, config file and a trained checkpoint."""
    root = tmp_path_factory.mktemp("cli")
    data = root / "data"
    out = root / "out"
    assert cli.main([
        "synth", "--seed", "11", "--n-assets", "2", "--n-days", "60",
        "--headlines-per-day", "4", "--signal-strength", "1.0", "--out-dir", str(data),
    ]) == 0
    config = {
        "paths": {
            "headlines": str(data / "headlines.csv"),
            "prices": str(data / "prices.csv"),
            "out_dir": str(out),
        },
        "portfolio": ["SYN0", "SYN1"],
        "model": {
            "p": 8, "filter_widths": [2, 3], "filters_per_width": 2,
            "hidden_sizes": [8, 4], "dropout_rate": 0.1, "head": "binary",
            "embedding_mode": "self_learnt",
        },
        "training": {"epochs": 10, "batch_size": 16, "seed": 11},
        "strategy": {"threshold": 0.5},
    }
    config_path = root / "config.json"
    config_path.write_text(json.dumps(config, indent=2))
    assert cli.main(["train", "--config", str(config_path)]) == 0
    return root, config_path, data, out, config


class TestSynth:
    def test_row_counts(self, workspace):
        _, _, data, _, _ = workspace
        headlines = load_headlines(data / "headlines.csv")
        prices = load_prices(data / "prices.csv")
        assert len(headlines) == 2 * 60 * 4
        assert len(prices) == 2 * 61

    def test_same_seed_identical_files(self, workspace, tmp_path):
        root, _, data, _, _ = workspace
        assert cli.main([
            "synth", "--seed", "11", "--n-assets", "2", "--n-days", "60",
            "--headlines-per-day", "4", "--signal-strength", "1.0",
            "--out-dir", str(tmp_path / "again"),
        ]) == 0
        assert (tmp_path / "again" / "headlines.csv").read_bytes() == (data / "headlines.csv").read_bytes()
        assert (tmp_path / "again" / "prices.csv").read_bytes() == (data / "prices.csv").read_bytes()

    def test_zero_days_usage_error(self, tmp_path):
        assert cli.main(["synth", "--n-days", "0", "--out-dir", str(tmp_path)]) == 2


class TestPrepare:
    def test_artifacts_written(self, workspace, tmp_path):
        _, config_path, _, _, _ = workspace
        assert cli.main(["prepare", "--config", str(config_path),
                         "--out-dir", str(tmp_path)]) == 0
        assert (tmp_path / "vocab.tsv").exists()
        split = json.loads((tmp_path / "split.json").read_text())
        assert split["train_ids"] and split["test_ids"]
        assert not set(split["train_ids"]) & set(split["test_ids"])
        assert (tmp_path / "samples.csv").read_text().count("\n") == (
            len(split["train_ids"]) + len(split["test_ids"]) + 1
        )


class TestTrain:
    def test_outputs_exist(self, workspace):
        _, _, _, out, _ = workspace
        for name in ("checkpoint.json", "metrics.json", "trace.csv"):
            assert (out / name).exists()
        metrics = json.loads((out / "metrics.json").read_text())
        assert metrics["accuracy"] > 0.9  # full-signal corpus is easy

    def test_missing_pretrained_path_rejected(self, workspace, tmp_path):
        root, _, data, _, config = workspace
        bad = dict(config)
        bad["model"] = dict(config["model"], embedding_mode="non_static")
        bad_path = tmp_path / "bad.json"
        bad_path.write_text(json.dumps(bad))
        assert cli.main(["train", "--config", str(bad_path)]) == 2

    def test_missing_seed_rejected(self, workspace, tmp_path):
        root, _, data, _, config = workspace
        bad = dict(config)
        bad["training"] = {"epochs": 1, "batch_size": 16}
        bad_path = tmp_path / "bad.json"
        bad_path.write_text(json.dumps(bad))
        assert cli.main(["train", "--config", str(bad_path)]) == 2

    def test_static_checkpoint_keeps_initial_embeddings(self, workspace, tmp_path):
        root, _, data, _, config = workspace
        headlines = load_headlines(data / "headlines.csv")
        prices = load_prices(data / "prices.csv")
        prepared = prepare_dataset(headlines, prices, {"SYN0", "SYN1"})
        rng = np.random.default_rng(0)
        vecs = tmp_path / "vecs.txt"
        tokens = list(prepared.vocab.word_to_index)
        lines = [f"{len(tokens)} 8"] + [
            t + " " + " ".join(f"{x:.6f}" for x in rng.normal(0, 0.2, 8)) for t in tokens
        ]
        vecs.write_text("\n".join(lines) + "\n")

        cfg = dict(config)
        cfg["paths"] = dict(config["paths"], pretrained=str(vecs), out_dir=str(tmp_path / "out"))
        cfg["model"] = dict(config["model"], embedding_mode="static")
        cfg_path = tmp_path / "static.json"
        cfg_path.write_text(json.dumps(cfg))
        assert cli.main(["train", "--config", str(cfg_path)]) == 0

        ckpt = load_checkpoint(tmp_path / "out" / "checkpoint.json")
        from newsvane.seeding import derive_seed

        initial = load_pretrained(
            prepared.vocab, vecs, "static", seed=derive_seed(11, "embeddings"), expected_p=8
        )
        assert ckpt.table.matrix.tobytes() == initial.matrix.tobytes()


class TestEvaluate:
    def test_metrics_written(self, workspace, tmp_path):
        root, config_path, _, out, _ = workspace
        assert cli.main([
            "evaluate", "--config", str(config_path),
            "--checkpoint", str(out / "checkpoint.json"), "--out-dir", str(tmp_path),
        ]) == 0
        metrics = json.loads((tmp_path / "metrics.json").read_text())
        assert set(metrics) >= {"accuracy", "precision", "recall", "f1"}


class TestBacktest:
    def test_report_written(self, workspace):
        root, config_path, _, out, _ = workspace
        assert cli.main(["backtest", "--config", str(config_path), "--sweep"]) == 0
        report = json.loads((out / "report.json").read_text())
        assert report["n_trades"] > 0
        assert report["final_over_initial_pct"] == pytest.approx(
            report["total_return_pct"] + 100.0
        )
        sweep = (out / "sweep.csv").read_text().splitlines()
        assert sweep[0] == "t,pp,atp,total_return,n_trades"
        assert len(sweep) == 42  # 0.50..0.90 step 0.01 plus header

    def test_head_mismatch_rejected(self, workspace, tmp_path):
        root, _, data, out, config = workspace
        bad = dict(config)
        bad["strategy"] = {"threshold": 0.5, "head": "multiclass3"}
        bad_path = tmp_path / "bad.json"
        bad_path.write_text(json.dumps(bad))
        assert cli.main([
            "backtest", "--config", str(bad_path),
            "--checkpoint", str(out / "checkpoint.json"),
        ]) == 2

    def test_predictions_csv_input_matches_module_oracle(self, workspace, tmp_path):
        import datetime as dt

        from newsvane import backtest as bt
        from newsvane.corpus import load_prices as _load

        root, config_path, data, _, _ = workspace
        preds = tmp_path / "preds.csv"
        preds.write_text(
            "asset,date,p0\nSYN0,2015-01-05,0.9\nSYN0,2015-01-06,0.2\nSYN1,2015-01-05,0.8\n"
        )
        assert cli.main([
            "backtest", "--config", str(config_path), "--predictions", str(preds),
            "--out-dir", str(tmp_path),
        ]) == 0
        report = json.loads((tmp_path / "report.json").read_text())
        assert report["n_trades"] == 2  # the 0.2 day stays out

        prices = _load(data / "prices.csv")
        day_preds = bt.aggregate_daily([
            (0, "SYN0", dt.date(2015, 1, 5), 0.9),
            (1, "SYN0", dt.date(2015, 1, 6), 0.2),
            (2, "SYN1", dt.date(2015, 1, 5), 0.8),
        ])
        decisions = [(dp.asset, dp.date, bt.decide_binary(dp, 0.5)) for dp in day_preds]
        expected = bt.simulate(decisions, prices)
        assert report["total_return_pct"] == expected.total_return_pct
        assert report["pp_pct"] == expected.pp_pct
        assert report["atp_pct"] == expected.atp_pct

    def test_sweep_subcommand(self, workspace, tmp_path):
        root, config_path, _, out, _ = workspace
        assert cli.main([
            "sweep", "--config", str(config_path),
            "--checkpoint", str(out / "checkpoint.json"), "--out-dir", str(tmp_path),
        ]) == 0
        assert (tmp_path / "sweep.csv").exists()

    def test_vocab_hash_mismatch_rejected(self, workspace, tmp_path):
        # a checkpoint trained on different data cannot score this config's data
        root, config_path, data, out, config = workspace
        other_data = tmp_path / "other"
        assert cli.main([
            "synth", "--seed", "99", "--n-assets", "2", "--n-days", "60",
            "--headlines-per-day", "4", "--signal-strength", "1.0",
            "--out-dir", str(other_data),
        ]) == 0
        cfg = dict(config)
        cfg["paths"] = dict(
            config["paths"],
            headlines=str(other_data / "headlines.csv"),
            prices=str(other_data / "prices.csv"),
            out_dir=str(tmp_path / "out"),
        )
        cfg_path = tmp_path / "other.json"
        cfg_path.write_text(json.dumps(cfg))
        assert cli.main([
            "backtest", "--config", str(cfg_path),
            "--checkpoint", str(out / "checkpoint.json"),
        ]) == 2


class TestGradcheckCommand:
    def test_pass_exit_zero(self, capsys):
        assert cli.main(["gradcheck", "--seed", "0", "--configs", "5"]) == 0
        assert "PASS" in capsys.readouterr().out

    def test_perturbed_exit_one(self, capsys):
        assert cli.main(["gradcheck", "--seed", "0", "--configs", "3",
                         "--perturb", "0.01"]) == 1
        assert "FAIL" in capsys.readouterr().out

    def test_fixed_seed_identical_report(self, capsys):
        cli.main(["gradcheck", "--seed", "4", "--configs", "3"])
        first = capsys.readouterr().out
        cli.main(["gradcheck", "--seed", "4", "--configs", "3"])
        second = capsys.readouterr().out
        # per-config error lines identical; only the timing line may differ
        strip = lambda text: [l for l in text.splitlines() if l.startswith("config")]
        assert strip(first) == strip(second)


class TestNeighborsCommand:
    def test_matches_brute_force(self, workspace, capsys):
        _, _, _, out, _ = workspace
        ckpt = load_checkpoint(out / "checkpoint.json")
        token = next(iter(ckpt.vocab.word_to_index))
        assert cli.main([
            "neighbors", "--checkpoint", str(out / "checkpoint.json"), token, "-k", "1",
        ]) == 0
        line = capsys.readouterr().out.strip().splitlines()[0]
        expected = nearest_neighbors(token, 1, ckpt.table, ckpt.vocab)[0]
        assert line.split("\t")[0] == expected[0]

    def test_k_larger_than_vocab(self, workspace, capsys):
        _, _, _, out, _ = workspace
        ckpt = load_checkpoint(out / "checkpoint.json")
        token = next(iter(ckpt.vocab.word_to_index))
        assert cli.main([
            "neighbors", "--checkpoint", str(out / "checkpoint.json"), token, "-k", "100000",
        ]) == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert len(lines) == ckpt.vocab.size - 1

    def test_padding_token_rejected(self, workspace):
        _, _, _, out, _ = workspace
        assert cli.main([
            "neighbors", "--checkpoint", str(out / "checkpoint.json"), "<pad>",
        ]) == 2

    def test_unknown_token_rejected(self, workspace):
        _, _, _, out, _ = workspace
        assert cli.main([
            "neighbors", "--checkpoint", str(out / "checkpoint.json"), "zzzznotthere",
        ]) == 2


class TestUsageErrors:
    def test_missing_config_flag(self, capsys):
        with pytest.raises(SystemExit) as exc:
            cli.main(["train"])
        assert exc.value.code == 2

    def test_unknown_subcommand(self):
        with pytest.raises(SystemExit) as exc:
            cli.main(["frobnicate"])
        assert exc.value.code == 2
