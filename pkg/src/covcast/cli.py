"""Command-line interface: single backtests, parameter grids, rank tables.

Subcommands:
  backtest  run one strategy and write equity/trades/metrics CSVs
  grid      run every (window, rebalance, model) cell, write per-run
            artifacts plus summary.csv and aggregate.csv
  rank      top-k / bottom-k table per (window, rebalance, model family)
  synth     emit the synthetic test dataset (prices, caps, classes)

Configuration comes from an optional YAML file (key/value with nested
lists); command-line flags override file values. Exit codes: 0 ok,
1 usage error, 2 data error, 3 run failure.
"""
from __future__ import annotations

import argparse
import sys
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np
import pandas as pd
import yaml

from .backtest import BacktestReport, StrategySpec, run_backtest
from .errors import (
    CovcastError,
    DataError,
    IndefiniteMatrixError,
    InsufficientAssetsError,
    InsufficientHistoryError,
    OptimizationError,
    TrainingDivergedError,
)
from .estimators import EstimatorKind, EstimatorSpec
from .forecasters import ForecasterSpec
from .market_data import load_cap_panel, load_class_map, load_price_panel
from .synth import write_synthetic_dataset

CLASSICAL_KINDS = {k.value for k in EstimatorKind}
NEURAL_KINDS = {"Lstm", "DeepVar", "GpVar", "Persistence"}

SUMMARY_COLUMNS = [
    "Run Id", "Status", "Window", "Rebalancing", "Covariance Model", "Model",
    "Seed", "aRC", "aSD", "MD", "MLD", "IR", "IR2", "IR3",
    "Batch Size", "Length", "Cells", "Scaling", "Copula", "Low Rank", "Error",
]
RANK_COLUMNS = [
    "Window", "Rebalancing", "Covariance Model", "Strategy Rank",
    "aRC", "aSD", "MD", "MLD", "IR", "IR2", "IR3",
    "Batch Size", "Length", "Cells", "Scaling", "Copula", "Low Rank", "Run Id",
]


class UsageError(Exception):
    pass


# per-cell failures recorded as Status=failed; data/I-O errors abort the grid
RUN_FAILURES = (
    InsufficientHistoryError,
    InsufficientAssetsError,
    OptimizationError,
    TrainingDivergedError,
    IndefiniteMatrixError,
    np.linalg.LinAlgError,
    FloatingPointError,
)


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would sys.exit(2); we want code 1
        raise UsageError(message)


def parse_model(text_or_dict: Union[str, dict]) -> Union[EstimatorSpec, ForecasterSpec]:
    """Build a model spec from ``Kind[:key=value,...]`` or a config dict.

    ``hidden`` accepts a list in YAML or ``|``-separated sizes on the
    command line (``Lstm:hidden=10|10``). A single int for the
    probabilistic models means two equal layers.
    """
    if isinstance(text_or_dict, str):
        kind, _, rest = text_or_dict.partition(":")
        params: dict = {}
        for item in filter(None, rest.split(",")):
            key, _, value = item.partition("=")
            params[key.strip()] = value.strip()
    else:
        params = dict(text_or_dict)
        kind = params.pop("kind", None)
        if kind is None:
            raise UsageError(f"model entry missing 'kind': {text_or_dict!r}")
    kind = str(kind).strip()

    def coerce(key, value, into):
        try:
            if into is bool and isinstance(value, str):
                return value.lower() in ("1", "true", "yes")
            return into(value)
        except (TypeError, ValueError) as exc:
            raise UsageError(f"bad value for {key}: {value!r}") from exc

    if kind in CLASSICAL_KINDS:
        kwargs = {}
        for key, into in (("decay", float), ("threshold", float), ("shrink_delta", float)):
            if key in params:
                kwargs[key] = coerce(key, params.pop(key), into)
        params.pop("window", None)  # the strategy window always wins
        if params:
            raise UsageError(f"unknown parameters for {kind}: {sorted(params)}")
        return EstimatorSpec(kind=EstimatorKind(kind), window=30, **kwargs)

    if kind not in NEURAL_KINDS:
        raise UsageError(f"unknown model kind {kind!r}")
    kwargs = {}
    if "hidden" in params:
        raw = params.pop("hidden")
        if isinstance(raw, str):
            sizes = tuple(int(p) for p in raw.split("|"))
        elif isinstance(raw, (list, tuple)):
            sizes = tuple(int(p) for p in raw)
        else:
            sizes = (int(raw),)
        if len(sizes) == 1 and kind in ("DeepVar", "GpVar"):
            sizes = (sizes[0], sizes[0])
        kwargs["hidden"] = sizes
    for key, into in (
        ("seq_len", int), ("batch_size", int), ("epochs", int),
        ("learning_rate", float), ("rank", int), ("mc_samples", int),
        ("scaling", bool), ("copula", bool), ("low_rank", bool),
    ):
        if key in params:
            kwargs[key] = coerce(key, params.pop(key), into)
    if params:
        raise UsageError(f"unknown parameters for {kind}: {sorted(params)}")
    if kind in ("DeepVar", "GpVar") and "hidden" not in kwargs:
        kwargs["hidden"] = (10, 10)
    return ForecasterSpec(kind=kind, **kwargs)


def model_label(model: Union[EstimatorSpec, ForecasterSpec]) -> str:
    if isinstance(model, EstimatorSpec):
        return model.kind.value
    return model.kind


def model_param_columns(model: Union[EstimatorSpec, ForecasterSpec]) -> dict:
    """The appendix-style parameter columns; blanks where not applicable."""
    cols = {"Batch Size": None, "Length": None, "Cells": None,
            "Scaling": None, "Copula": None, "Low Rank": None}
    if isinstance(model, ForecasterSpec) and model.kind != "Persistence":
        cols["Batch Size"] = model.batch_size
        cols["Length"] = model.seq_len
        if model.kind == "Lstm":
            cols["Cells"] = str(list(model.hidden))
        else:
            cols["Cells"] = str(model.hidden[0])
            cols["Scaling"] = model.scaling
            if model.kind == "GpVar":
                cols["Copula"] = model.copula
                cols["Low Rank"] = model.low_rank
    return cols


@dataclass
class RunConfig:
    """Grid definition plus data paths and execution knobs."""

    prices: Path
    caps: Path
    classes: Path
    windows: list[int] = field(default_factory=lambda: [30, 60, 90, 120])
    rebalances: list[int] = field(default_factory=lambda: [30, 60, 90, 120])
    models: list = field(
        default_factory=lambda: [
            EstimatorSpec(kind=k, window=30) for k in EstimatorKind
        ]
    )
    seed: int = 0
    out: Path = Path("results")
    jobs: int = 1
    n_stock: int = 10
    n_crypto: int = 10
    initial_capital: float = 100_000.0
    commission: float = 0.005

    def cells(self) -> list[dict]:
        """Deterministic grid enumeration: window, rebalance, model."""
        out = []
        index = 0
        for window in self.windows:
            for rebalance in self.rebalances:
                for model in self.models:
                    out.append(
                        {
                            "index": index,
                            "run_id": f"{index:03d}_w{window}_r{rebalance}_{model_label(model)}",
                            "window": window,
                            "rebalance": rebalance,
                            "model": model,
                        }
                    )
                    index += 1
        return out


def load_config(path, overrides: dict) -> RunConfig:
    raw: dict = {}
    if path is not None:
        with open(path) as handle:
            raw = yaml.safe_load(handle) or {}
    data = raw.get("data", {})
    merged = {
        "prices": overrides.get("prices") or data.get("prices"),
        "caps": overrides.get("caps") or data.get("caps"),
        "classes": overrides.get("classes") or data.get("classes"),
    }
    for key in merged:
        if merged[key] is None:
            raise UsageError(f"missing required data path: {key}")
        merged[key] = Path(merged[key])
    grid = raw.get("grid", {})
    windows = overrides.get("windows") or grid.get("windows") or [30, 60, 90, 120]
    rebalances = overrides.get("rebalances") or grid.get("rebalances") or [30, 60, 90, 120]
    if "models" in overrides and overrides["models"]:
        models = [parse_model(m) for m in overrides["models"]]
    elif grid.get("models"):
        models = [parse_model(m) for m in grid["models"]]
    else:
        models = [EstimatorSpec(kind=k, window=30) for k in EstimatorKind]
    universe = raw.get("universe", {})
    seed = overrides.get("seed")
    if seed is None:
        seed = raw.get("seed", 0)
    return RunConfig(
        prices=merged["prices"],
        caps=merged["caps"],
        classes=merged["classes"],
        windows=[int(w) for w in windows],
        rebalances=[int(r) for r in rebalances],
        models=models,
        seed=int(seed),
        out=Path(overrides.get("out") or raw.get("out") or "results"),
        jobs=int(overrides.get("jobs") or raw.get("jobs") or 1),
        n_stock=int(universe.get("n_stock", 10)),
        n_crypto=int(universe.get("n_crypto", 10)),
        initial_capital=float(raw.get("initial_capital", 100_000.0)),
        commission=float(raw.get("commission", 0.005)),
    )


def _load_market(cfg: RunConfig):
    class_map = load_class_map(cfg.classes)
    panel = load_price_panel(cfg.prices, class_map)
    caps = load_cap_panel(cfg.caps)
    return panel, caps


def _write_report(report: BacktestReport, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    equity = report.equity.rename("value")
    equity.index.name = "date"
    equity.to_csv(out_dir / "equity.csv", date_format="%Y-%m-%d")
    trades = pd.DataFrame(
        [
            {
                "date": t.date.strftime("%Y-%m-%d"),
                "asset": t.asset,
                "delta_shares": t.delta_shares,
                "price": t.price,
                "commission": t.commission,
            }
            for t in report.trades
        ]
    )
    trades.to_csv(out_dir / "trades.csv", index=False)
    row = {**report.metrics.as_row(), **model_param_columns(report.spec.model)}
    pd.DataFrame([row]).to_csv(out_dir / "metrics.csv", index=False)
    if report.validation is not None:
        frame = report.validation.copy()
        frame["rebalance_date"] = frame["rebalance_date"].dt.strftime("%Y-%m-%d")
        frame.to_csv(out_dir / "validation.csv", index=False)


def execute_cell(cfg: RunConfig, cell: dict) -> dict:
    """Run one grid cell; classify expected failures as status=failed."""
    model = cell["model"]
    seed = int(np.random.SeedSequence([cfg.seed, cell["index"]]).generate_state(1)[0])
    row = {
        "Run Id": cell["run_id"],
        "Status": "ok",
        "Window": cell["window"],
        "Rebalancing": cell["rebalance"],
        "Covariance Model": model.family,
        "Model": model_label(model),
        "Seed": seed,
        "Error": None,
        **{k: None for k in ("aRC", "aSD", "MD", "MLD", "IR", "IR2", "IR3")},
        **model_param_columns(model),
    }
    try:
        panel, caps = _load_market(cfg)
        spec = StrategySpec(
            window=cell["window"],
            rebalance=cell["rebalance"],
            model=model,
            initial_capital=cfg.initial_capital,
            commission=cfg.commission,
            n_stock=cfg.n_stock,
            n_crypto=cfg.n_crypto,
            seed=seed,
        )
        report = run_backtest(panel, caps, spec)
    except RUN_FAILURES as exc:
        row["Status"] = "failed"
        row["Error"] = f"{type(exc).__name__}: {exc}"
        return row
    _write_report(report, cfg.out / "runs" / cell["run_id"])
    row.update({k: v for k, v in report.metrics.as_row().items()})
    return row


def _aggregate(summary: pd.DataFrame) -> pd.DataFrame:
    """Mean/std/min/quartiles/max of aRC and IR per parameter group."""
    ok = summary[summary["Status"] == "ok"]
    rows = []
    group_cols = ["Window", "Rebalancing", "Covariance Model"]
    for (window, reb, family), group in ok.groupby(group_cols, sort=True):
        for metric in ("aRC", "IR"):
            values = group[metric].astype(float).dropna().to_numpy()
            row = {
                "Window": window, "Rebalancing": reb, "Covariance Model": family,
                "Metric": metric, "N": len(values),
            }
            if len(values):
                row.update(
                    {
                        "Mean": float(np.mean(values)),
                        "Std. Dev": float(np.std(values, ddof=1)) if len(values) > 1 else 0.0,
                        "Min": float(np.min(values)),
                        "25%": float(np.percentile(values, 25)),
                        "50%": float(np.percentile(values, 50)),
                        "75%": float(np.percentile(values, 75)),
                        "Max": float(np.max(values)),
                    }
                )
            rows.append(row)
    columns = ["Window", "Rebalancing", "Covariance Model", "Metric",
               "Mean", "Std. Dev", "Min", "25%", "50%", "75%", "Max", "N"]
    return pd.DataFrame(rows, columns=columns)


def run_grid(cfg: RunConfig) -> pd.DataFrame:
    """Execute every cell and write summary.csv plus aggregate.csv."""
    cells = cfg.cells()
    if not cells:
        raise UsageError("the grid is empty")
    if cfg.jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            rows = list(pool.map(execute_cell, [cfg] * len(cells), cells))
    else:
        rows = [execute_cell(cfg, cell) for cell in cells]
    rows.sort(key=lambda r: r["Run Id"])
    summary = pd.DataFrame(rows, columns=SUMMARY_COLUMNS)
    cfg.out.mkdir(parents=True, exist_ok=True)
    summary.to_csv(cfg.out / "summary.csv", index=False)
    _aggregate(summary).to_csv(cfg.out / "aggregate.csv", index=False)
    return summary


def rank_strategies(summary: pd.DataFrame, k: int = 3) -> pd.DataFrame:
    """Best-k and worst-k rows per (window, rebalance, family) by aRC.

    Ties break by IR, then run id, so reruns order identically.
    """
    ok = summary[summary["Status"] == "ok"].copy()
    ordered_groups = []
    group_cols = ["Window", "Rebalancing", "Covariance Model"]
    for _, group in ok.groupby(group_cols, sort=True):
        ranked = group.sort_values(
            by=["aRC", "IR", "Run Id"], ascending=[False, False, True]
        )
        top = ranked.head(k).copy()
        top["Strategy Rank"] = "Top"
        bottom = ranked.tail(k).copy()
        bottom["Strategy Rank"] = "Bottom"
        ordered_groups.extend([top, bottom])
    if not ordered_groups:
        return pd.DataFrame(columns=RANK_COLUMNS)
    result = pd.concat(ordered_groups, ignore_index=True)
    return result[RANK_COLUMNS]


def _add_common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--prices", help="wide close-price CSV")
    parser.add_argument("--caps", help="wide market-cap CSV")
    parser.add_argument("--classes", help="ticker,class CSV")
    parser.add_argument("--seed", type=int, help="master seed")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--config", help="YAML config file")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="covcast", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_bt = sub.add_parser("backtest", help="run a single strategy")
    _add_common_flags(p_bt)
    p_bt.add_argument("--window", type=int, help="observation window in days")
    p_bt.add_argument("--rebalance", type=int, help="rebalancing period in days")
    p_bt.add_argument("--estimator", help="model spec, e.g. Sample or Lstm:hidden=5")

    p_grid = sub.add_parser("grid", help="run the full parameter grid")
    _add_common_flags(p_grid)
    p_grid.add_argument("--window", type=int, action="append", dest="windows")
    p_grid.add_argument("--rebalance", type=int, action="append", dest="rebalances")
    p_grid.add_argument("--estimator", action="append", dest="models")
    p_grid.add_argument("--jobs", type=int, help="parallel workers")

    p_rank = sub.add_parser("rank", help="top/bottom strategies per group")
    p_rank.add_argument("--summary", help="summary.csv from a grid run")
    p_rank.add_argument("--out", help="directory containing summary.csv")
    p_rank.add_argument("-k", type=int, default=3)

    p_synth = sub.add_parser("synth", help="emit the synthetic test dataset")
    p_synth.add_argument("--out", default="synth_data")
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.add_argument("--days", type=int, default=600)
    p_synth.add_argument("--stocks", type=int, default=3)
    p_synth.add_argument("--cryptos", type=int, default=3)
    return parser


def _cmd_backtest(args) -> int:
    overrides = {
        "prices": args.prices, "caps": args.caps, "classes": args.classes,
        "seed": args.seed, "out": args.out,
        "windows": [args.window] if args.window else None,
        "rebalances": [args.rebalance] if args.rebalance else None,
        "models": [args.estimator] if args.estimator else None,
    }
    cfg = load_config(args.config, overrides)
    cell = cfg.cells()[0]
    row = execute_cell(cfg, cell)
    if row["Status"] != "ok":
        print(f"run failed: {row['Error']}", file=sys.stderr)
        return 3
    printable = {k: row[k] for k in ("aRC", "aSD", "MD", "MLD", "IR", "IR2", "IR3")}
    print(f"run {row['Run Id']} ok: {printable}")
    print(f"artifacts in {cfg.out / 'runs' / cell['run_id']}")
    return 0


def _cmd_grid(args) -> int:
    overrides = {
        "prices": args.prices, "caps": args.caps, "classes": args.classes,
        "seed": args.seed, "out": args.out, "jobs": args.jobs,
        "windows": args.windows, "rebalances": args.rebalances,
        "models": args.models,
    }
    cfg = load_config(args.config, overrides)
    summary = run_grid(cfg)
    n_ok = int((summary["Status"] == "ok").sum())
    print(f"{len(summary)} runs, {n_ok} ok; summary in {cfg.out / 'summary.csv'}")
    return 0


def _cmd_rank(args) -> int:
    if args.summary:
        path = Path(args.summary)
    elif args.out:
        path = Path(args.out) / "summary.csv"
    else:
        raise UsageError("rank needs --summary or --out")
    if not path.exists():
        raise DataError(f"summary file not found: {path}")
    summary = pd.read_csv(path)
    ranked = rank_strategies(summary, k=args.k)
    out_path = path.parent / "ranked.csv"
    ranked.to_csv(out_path, index=False)
    print(ranked.to_string(index=False))
    print(f"written to {out_path}")
    return 0


def _cmd_synth(args) -> int:
    paths = write_synthetic_dataset(
        args.out, n_stock=args.stocks, n_crypto=args.cryptos,
        n_days=args.days, seed=args.seed,
    )
    print("wrote " + ", ".join(str(p) for p in paths.values()))
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        handler = {
            "backtest": _cmd_backtest,
            "grid": _cmd_grid,
            "rank": _cmd_rank,
            "synth": _cmd_synth,
        }[args.command]
        return handler(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (DataError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except (CovcastError, OSError) as exc:
        print(f"run failure: {exc}", file=sys.stderr)
        return 3
    except Exception:
        traceback.print_exc()
        return 3


if __name__ == "__main__":
    sys.exit(main())
