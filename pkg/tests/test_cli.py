import numpy as np
import pandas as pd
import pytest
import yaml

from covcast.cli import (
    RunConfig,
    UsageError,
    load_config,
    main,
    model_param_columns,
    parse_model,
    rank_strategies,
    run_grid,
)
from covcast.estimators import EstimatorKind, EstimatorSpec
from covcast.forecasters import ForecasterSpec


def dataset_args(data_dir):
    return [
        "--prices", str(data_dir / "prices.csv"),
        "--caps", str(data_dir / "caps.csv"),
        "--classes", str(data_dir / "classes.csv"),
    ]


def small_config(data_dir, out_dir, models=("Sample", "Ewma"), windows=(30,), rebalances=(60,)):
    return RunConfig(
        prices=data_dir / "prices.csv",
        caps=data_dir / "caps.csv",
        classes=data_dir / "classes.csv",
        windows=list(windows),
        rebalances=list(rebalances),
        models=[parse_model(m) for m in models],
        seed=7,
        out=out_dir,
        n_stock=3,
        n_crypto=3,
    )


class TestParseModel:
    def test_classical_kinds(self):
        spec = parse_model("Sample")
        assert isinstance(spec, EstimatorSpec)
        assert spec.kind == EstimatorKind.SAMPLE

    def test_classical_with_params(self):
        spec = parse_model("Ewma:decay=0.9")
        assert spec.decay == 0.9
        semi = parse_model({"kind": "SemiCov", "threshold": 0.01})
        assert semi.threshold == 0.01

    def test_lstm_hidden_sizes(self):
        spec = parse_model("Lstm:hidden=10|5,seq_len=20,batch_size=16")
        assert isinstance(spec, ForecasterSpec)
        assert spec.hidden == (10, 5)
        assert spec.seq_len == 20

    def test_prob_single_int_expands_to_twin_layers(self):
        spec = parse_model({"kind": "GpVar", "hidden": 15, "copula": False})
        assert spec.hidden == (15, 15)
        assert spec.copula is False

    def test_unknown_kind_rejected(self):
        with pytest.raises(UsageError):
            parse_model("Garch")

    def test_unknown_parameter_rejected(self):
        with pytest.raises(UsageError):
            parse_model("Sample:bogus=1")

    def test_param_columns(self):
        lstm = parse_model("Lstm:hidden=5|10,seq_len=15,batch_size=8")
        cols = model_param_columns(lstm)
        assert cols["Cells"] == "[5, 10]"
        assert cols["Length"] == 15
        assert cols["Scaling"] is None
        gp = parse_model({"kind": "GpVar", "hidden": 10})
        cols = model_param_columns(gp)
        assert cols["Cells"] == "10"
        assert cols["Copula"] is True
        assert model_param_columns(parse_model("Sample"))["Cells"] is None


class TestSynthCommand:
    def test_writes_loadable_dataset(self, tmp_path):
        code = main(["synth", "--out", str(tmp_path / "d"), "--seed", "3", "--days", "200"])
        assert code == 0
        prices = pd.read_csv(tmp_path / "d" / "prices.csv")
        caps = pd.read_csv(tmp_path / "d" / "caps.csv")
        classes = pd.read_csv(tmp_path / "d" / "classes.csv")
        assert len(prices) == 200 and len(caps) == 200
        assert set(classes["class"]) == {"stock", "crypto"}
        # stocks have weekend gaps, cryptos none
        stock = classes[classes["class"] == "stock"]["ticker"].iloc[0]
        crypto = classes[classes["class"] == "crypto"]["ticker"].iloc[0]
        assert prices[stock].isna().any()
        assert not prices[crypto].isna().any()


class TestGridAndSummary:
    def test_single_cell_summary(self, synth_dataset_dir, tmp_path):
        cfg = small_config(synth_dataset_dir, tmp_path / "out", models=("Sample",))
        summary = run_grid(cfg)
        assert len(summary) == 1
        assert summary["Status"].iloc[0] == "ok"
        run_dir = tmp_path / "out" / "runs" / summary["Run Id"].iloc[0]
        for name in ("equity.csv", "trades.csv", "metrics.csv"):
            assert (run_dir / name).exists()

    def test_counting_contract(self, synth_dataset_dir, tmp_path):
        cfg = small_config(
            synth_dataset_dir, tmp_path / "out",
            models=("Sample", "Ewma"), windows=(30, 60), rebalances=(60, 90),
        )
        summary = run_grid(cfg)
        assert len(summary) == 8
        agg = pd.read_csv(tmp_path / "out" / "aggregate.csv")
        # one Classical group per (window, rebalance), two metrics each
        assert len(agg) == 8
        assert set(agg["Metric"]) == {"aRC", "IR"}

    def test_failed_runs_recorded_not_dropped(self, synth_dataset_dir, tmp_path):
        cfg = small_config(synth_dataset_dir, tmp_path / "out", windows=(30, 700))
        summary = run_grid(cfg)
        assert len(summary) == 4
        failed = summary[summary["Window"] == 700]
        assert (failed["Status"] == "failed").all()
        assert failed["Error"].notna().all()
        agg = pd.read_csv(tmp_path / "out" / "aggregate.csv")
        assert (agg["Window"] != 700).all()

    def test_aggregate_matches_independent_oracle(self, synth_dataset_dir, tmp_path):
        cfg = small_config(
            synth_dataset_dir, tmp_path / "out",
            models=("Sample", "SemiCov", "ShrinkConstCorr"), rebalances=(60, 90),
        )
        run_grid(cfg)
        summary = pd.read_csv(tmp_path / "out" / "summary.csv")
        agg = pd.read_csv(tmp_path / "out" / "aggregate.csv")
        for _, row in agg.iterrows():
            group = summary[
                (summary["Window"] == row["Window"])
                & (summary["Rebalancing"] == row["Rebalancing"])
                & (summary["Covariance Model"] == row["Covariance Model"])
                & (summary["Status"] == "ok")
            ]
            values = group[row["Metric"]].astype(float).to_numpy()
            assert row["N"] == len(values)
            assert row["Mean"] == pytest.approx(values.mean(), abs=1e-12)
            assert row["Max"] == pytest.approx(values.max(), abs=1e-12)
            assert row["50%"] == pytest.approx(np.percentile(values, 50), abs=1e-12)

    def test_grid_rerun_byte_identical(self, synth_dataset_dir, tmp_path):
        cfg_a = small_config(synth_dataset_dir, tmp_path / "a", models=("Sample", "OracleApprox"))
        cfg_b = small_config(synth_dataset_dir, tmp_path / "b", models=("Sample", "OracleApprox"))
        run_grid(cfg_a)
        run_grid(cfg_b)
        assert (tmp_path / "a" / "summary.csv").read_bytes() == (
            tmp_path / "b" / "summary.csv"
        ).read_bytes()

    def test_parallel_jobs_match_sequential(self, synth_dataset_dir, tmp_path):
        cfg_seq = small_config(synth_dataset_dir, tmp_path / "seq")
        cfg_par = small_config(synth_dataset_dir, tmp_path / "par")
        cfg_par.jobs = 2
        run_grid(cfg_seq)
        run_grid(cfg_par)
        assert (tmp_path / "seq" / "summary.csv").read_bytes() == (
            tmp_path / "par" / "summary.csv"
        ).read_bytes()

    def test_undefined_metrics_serialize_as_empty_cells(self, tmp_path):
        from covcast.cli import SUMMARY_COLUMNS

        row = {c: None for c in SUMMARY_COLUMNS}
        row.update({"Run Id": "000_x", "Status": "ok", "aRC": 0.0, "IR": None})
        frame = pd.DataFrame([row], columns=SUMMARY_COLUMNS)
        path = tmp_path / "s.csv"
        frame.to_csv(path, index=False)
        text = path.read_text().splitlines()[1]
        assert ",0.0,," in text  # aRC printed, IR empty, never inf
        assert "inf" not in text


class TestRank:
    def make_summary(self):
        rows = []
        for i, (arc, ir) in enumerate([(0.3, 1.0), (0.1, 0.5), (0.1, 0.9), (-0.2, -0.3)]):
            rows.append(
                {
                    "Run Id": f"{i:03d}_x", "Status": "ok", "Window": 30,
                    "Rebalancing": 60, "Covariance Model": "Classical",
                    "Model": "Sample", "Seed": 1,
                    "aRC": arc, "aSD": 0.2, "MD": 0.1, "MLD": 0.5,
                    "IR": ir, "IR2": 0.1, "IR3": 0.01,
                    "Batch Size": None, "Length": None, "Cells": None,
                    "Scaling": None, "Copula": None, "Low Rank": None, "Error": None,
                }
            )
        return pd.DataFrame(rows)

    def test_top_and_bottom_ordering(self):
        ranked = rank_strategies(self.make_summary(), k=3)
        top = ranked[ranked["Strategy Rank"] == "Top"]
        assert top["aRC"].iloc[0] == 0.3
        # aRC tie at 0.1 broken by higher IR first
        assert top["IR"].tolist() == [1.0, 0.9, 0.5]
        bottom = ranked[ranked["Strategy Rank"] == "Bottom"]
        assert bottom["aRC"].iloc[-1] == -0.2

    def test_group_of_three_appears_in_both_lists(self):
        summary = self.make_summary().iloc[:3]
        ranked = rank_strategies(summary, k=3)
        assert len(ranked[ranked["Strategy Rank"] == "Top"]) == 3
        assert len(ranked[ranked["Strategy Rank"] == "Bottom"]) == 3

    def test_full_ties_break_by_run_id(self):
        summary = self.make_summary()
        summary.loc[:, ["aRC", "IR"]] = 0.1  # everything ties
        ranked = rank_strategies(summary, k=2)
        top = ranked[ranked["Strategy Rank"] == "Top"]
        assert top["Run Id"].tolist() == ["000_x", "001_x"]

    def test_rank_command(self, synth_dataset_dir, tmp_path):
        cfg = small_config(synth_dataset_dir, tmp_path / "out")
        run_grid(cfg)
        code = main(["rank", "--out", str(tmp_path / "out"), "-k", "2"])
        assert code == 0
        ranked = pd.read_csv(tmp_path / "out" / "ranked.csv")
        assert "Strategy Rank" in ranked.columns


class TestBacktestCommand:
    def test_single_run_artifacts(self, synth_dataset_dir, tmp_path):
        code = main(
            ["backtest", *dataset_args(synth_dataset_dir),
             "--window", "30", "--rebalance", "60", "--estimator", "Ewma",
             "--seed", "5", "--out", str(tmp_path / "res"),
             "--config", str(make_universe_config(tmp_path))]
        )
        assert code == 0
        runs = list((tmp_path / "res" / "runs").iterdir())
        assert len(runs) == 1
        equity = pd.read_csv(runs[0] / "equity.csv")
        assert list(equity.columns) == ["date", "value"]
        assert (equity["value"] > 0).all()


def make_universe_config(tmp_path, **extra):
    cfg = {"universe": {"n_stock": 3, "n_crypto": 3}, **extra}
    path = tmp_path / "cfg.yaml"
    path.write_text(yaml.safe_dump(cfg))
    return path


class TestConfigAndExitCodes:
    def test_flag_overrides_file(self, synth_dataset_dir, tmp_path):
        path = make_universe_config(
            tmp_path,
            data={
                "prices": str(synth_dataset_dir / "prices.csv"),
                "caps": str(synth_dataset_dir / "caps.csv"),
                "classes": str(synth_dataset_dir / "classes.csv"),
            },
            seed=1,
            grid={"windows": [30], "rebalances": [60], "models": [{"kind": "Sample"}]},
        )
        cfg = load_config(path, {"seed": 42, "out": str(tmp_path / "o")})
        assert cfg.seed == 42
        assert cfg.windows == [30]
        assert cfg.n_stock == 3
        # absent flag (argparse None) must fall back to the file value
        cfg2 = load_config(path, {"seed": None, "out": str(tmp_path / "o")})
        assert cfg2.seed == 1

    def test_usage_error_exit_1(self):
        assert main(["grid"]) == 1  # no data paths anywhere

    def test_data_error_exit_2(self, tmp_path):
        code = main(
            ["backtest", "--prices", str(tmp_path / "missing.csv"),
             "--caps", str(tmp_path / "m2.csv"), "--classes", str(tmp_path / "m3.csv")]
        )
        assert code == 2

    def test_run_failure_exit_3(self, synth_dataset_dir, tmp_path):
        # window larger than the panel: the single run cannot start
        code = main(
            ["backtest", *dataset_args(synth_dataset_dir),
             "--window", "700", "--rebalance", "60",
             "--out", str(tmp_path / "res"),
             "--config", str(make_universe_config(tmp_path))]
        )
        assert code == 3

    def test_unknown_subcommand_exit_1(self):
        assert main(["frobnicate"]) == 1
