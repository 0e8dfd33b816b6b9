"""Config-driven benchmark runner and report emitter.

An experiment is one (model, data, training) triple described by a validated
config (unknown keys rejected). Running it executes the full pipeline:
generate/load data, scale on training rows only, window, split
chronologically, train a one-step model, evaluate on the test split, then
walk anchored iterative forecasts across the test segment at each configured
horizon. A matrix run executes many experiments (optionally in parallel),
joins LSTM-vs-KAN rows per (regime, horizon) cell into a ratio column, and
renders CSV / markdown / gnuplot reports plus a mean-runtime comparison.

All randomness flows from explicit seeds; rerunning a config yields a
byte-identical canonical serialization (wall-clock fields excluded).
"""

import dataclasses
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .bspline import SplineSpec
from .data import (
    CLOSE,
    COLUMNS,
    MinMaxScaler,
    WindowedDataset,
    chrono_split,
    clean,
    gen_synthetic,
    load_csv,
    make_regime,
    make_windows,
    scaler_fit,
)
from .forecast import iterative_forecast_batch
from .kan import kan_init
from .lstm import lstm_init
from .metrics import rmse
from .numcore import make_rng
from .optim import TrainConfig, TrainingDiverged, train

# Cap on total predicted steps (anchors × horizon) per horizon evaluation;
# anchors are subsampled evenly when the test segment would exceed it.
ANCHOR_BUDGET = 20000

FEATURE_MODES = {"ohlcv": tuple(range(len(COLUMNS))), "close_only": (CLOSE,)}


# --------------------------------------------------------------------------
# Configuration


@dataclass(frozen=True)
class LstmParams:
    layers: int = 2
    units: int = 10
    head_activation: str = "linear"

    def __post_init__(self):
        if self.layers < 1 or self.units < 1:
            raise ValueError("layers and units must be >= 1")


@dataclass(frozen=True)
class KanParams:
    grid_size: int = 3
    degree: int = 2
    hidden: int = 8  # width of the single hidden layer; 0 = direct [in, 1]

    def __post_init__(self):
        if self.hidden < 0:
            raise ValueError("hidden must be >= 0")


@dataclass(frozen=True)
class DataConfig:
    source: str = "synthetic"  # "synthetic" | "csv"
    regime: str = "normal"
    days: int = 1250
    data_seed: int = 0
    drift: float | None = None
    volatility: float | None = None
    csv_path: str | None = None
    feature_mode: str = "ohlcv"  # "ohlcv" | "close_only"

    def __post_init__(self):
        if self.source not in ("synthetic", "csv"):
            raise ValueError(f"unknown data source {self.source!r}")
        if self.feature_mode not in FEATURE_MODES:
            raise ValueError(f"unknown feature_mode {self.feature_mode!r}")
        if self.source == "csv" and not self.csv_path:
            raise ValueError("csv source requires csv_path")


@dataclass(frozen=True)
class ExperimentConfig:
    model: str  # "kan" | "lstm"
    name: str = ""
    lstm: LstmParams | None = None
    kan: KanParams | None = None
    data: DataConfig = DataConfig()
    lookback: int = 20
    horizons: tuple = (1,)
    train_frac: float = 0.8
    train: TrainConfig = None
    seed: int = 0

    def __post_init__(self):
        if self.model not in ("kan", "lstm"):
            raise ValueError(f"unknown model {self.model!r}")
        if self.train is None:
            object.__setattr__(
                self,
                "train",
                TrainConfig(optimizer="lbfgs" if self.model == "kan" else "adam"),
            )
        object.__setattr__(self, "horizons", tuple(int(h) for h in self.horizons))

    @property
    def label(self) -> str:
        if self.name:
            return self.name
        if self.model == "lstm":
            p = self.lstm or LstmParams()
            return f"lstm-{p.layers}x{p.units}-{p.head_activation}"
        p = self.kan or KanParams()
        return f"kan-g{p.grid_size}k{p.degree}h{p.hidden}"


def _strict_build(cls, d, ctx: str):
    if not isinstance(d, dict):
        raise ValueError(f"{ctx} must be a JSON object")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(d) - names)
    if unknown:
        raise ValueError(f"unknown {ctx} keys: {unknown}")
    return cls(**d)


def config_from_dict(d: dict) -> ExperimentConfig:
    """Build a config from parsed JSON, rejecting unknown keys at every level."""
    if not isinstance(d, dict):
        raise ValueError("experiment config must be a JSON object")
    d = dict(d)
    nested = {}
    if d.get("lstm") is not None:
        nested["lstm"] = _strict_build(LstmParams, d.pop("lstm"), "lstm")
    if d.get("kan") is not None:
        nested["kan"] = _strict_build(KanParams, d.pop("kan"), "kan")
    if d.get("data") is not None:
        nested["data"] = _strict_build(DataConfig, d.pop("data"), "data")
    if d.get("train") is not None:
        nested["train"] = _strict_build(TrainConfig, d.pop("train"), "train")
    for key in ("lstm", "kan", "data", "train"):
        d.pop(key, None)  # explicit nulls
    cfg = _strict_build(ExperimentConfig, d, "experiment")
    cfg = dataclasses.replace(cfg, **nested)
    validate_config(cfg)
    return cfg


def config_to_dict(config: ExperimentConfig) -> dict:
    d = dataclasses.asdict(config)
    d["horizons"] = list(config.horizons)
    return d


def validate_config(config: ExperimentConfig) -> None:
    """Reject infeasible configs before any computation."""
    if config.lookback < 1:
        raise ValueError("lookback must be >= 1")
    if not 0.0 < config.train_frac < 1.0:
        raise ValueError(f"train_frac must be in (0, 1), got {config.train_frac}")
    if not config.horizons or any(h < 1 for h in config.horizons):
        raise ValueError(f"horizons must be nonempty positive ints, got {config.horizons}")
    if config.model == "lstm" and config.kan is not None and config.lstm is None:
        raise ValueError("model is lstm but only kan params were given")
    if config.model == "kan" and config.lstm is not None and config.kan is None:
        raise ValueError("model is kan but only lstm params were given")
    if config.data.source == "synthetic":
        h_max = max(config.horizons)
        if config.data.days < config.lookback + h_max + 10:
            raise ValueError(
                f"days={config.data.days} too short: need >= lookback + max horizon + 10 "
                f"= {config.lookback + h_max + 10}"
            )
        n_samples = config.data.days - config.lookback
        n_test = n_samples - math.floor(config.train_frac * n_samples)
        if n_test < h_max:
            raise ValueError(
                f"test segment of {n_test} samples cannot anchor horizon {h_max}; "
                f"increase days or lower train_frac"
            )


# --------------------------------------------------------------------------
# Pipeline


@dataclass
class PreparedData:
    scaled: np.ndarray  # (N, F) scaled selected features
    scaler: MinMaxScaler
    target_col: int  # close column within the selected features
    n_train: int  # number of one-step training samples
    train: WindowedDataset
    test: WindowedDataset
    lookback: int


def load_series(dc: DataConfig):
    if dc.source == "synthetic":
        regime = make_regime(dc.regime, dc.days, dc.data_seed, dc.drift, dc.volatility)
        return gen_synthetic(regime)
    series, _ = clean(load_csv(dc.csv_path))
    return series


def prepare(config: ExperimentConfig) -> PreparedData:
    """Scale on training rows only, then window and split chronologically.

    One-step training samples 0..n_train-1 touch exactly the first
    n_train + lookback rows, so the scaler fits on those rows and nothing
    later — no test information leaks into the scaling.
    """
    series = load_series(config.data)
    cols = FEATURE_MODES[config.data.feature_mode]
    raw = series.values[:, cols]
    target_col = cols.index(CLOSE)
    lookback = config.lookback
    n_samples = raw.shape[0] - lookback
    if n_samples < 2:
        raise ValueError(
            f"series of {raw.shape[0]} rows too short for lookback {lookback}"
        )
    n_train = math.floor(config.train_frac * n_samples)
    scaler = scaler_fit(raw[: n_train + lookback])
    scaled = scaler.transform(raw)
    windows = make_windows(scaled, lookback, 1, target_col)
    train_ds, test_ds = chrono_split(windows, config.train_frac)
    return PreparedData(scaled, scaler, target_col, n_train, train_ds, test_ds, lookback)


def build_model(config: ExperimentConfig, n_features: int, rng):
    if config.model == "kan":
        p = config.kan or KanParams()
        in_dim = config.lookback * n_features
        dims = [in_dim, p.hidden, 1] if p.hidden > 0 else [in_dim, 1]
        return kan_init(dims, SplineSpec(p.grid_size, p.degree), rng)
    p = config.lstm or LstmParams()
    return lstm_init(n_features, p.units, p.layers, rng, p.head_activation)


def model_train_inputs(model_kind: str, ds: WindowedDataset) -> np.ndarray:
    """Windows in the shape each model family trains on."""
    if model_kind == "kan":
        return ds.inputs.reshape(len(ds), -1)
    return ds.inputs


# --------------------------------------------------------------------------
# Experiment execution


@dataclass
class HorizonSummary:
    horizon: int
    n_anchors: int
    rmse: float  # scaled RMSE of the H-step-ahead prediction across anchors
    sample_pred: list  # first anchor's full trace, for plotting
    sample_actual: list


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    train_rmse: float
    test_rmse: float
    wall_seconds: float
    epochs_run: int
    horizons: list
    version: str
    failure: str | None = None


def _artifact_version() -> str:
    import kanbench

    return f"kanbench-{kanbench.__version__}"


def _horizon_eval(model, prepared: PreparedData, horizon: int) -> HorizonSummary:
    """Anchored walk-forward: iterative forecasts from test windows.

    Anchors are window start rows j with the full horizon inside the series;
    when anchors × horizon would exceed ANCHOR_BUDGET they are thinned evenly.
    The summary RMSE compares only the final (H-step-ahead) prediction of
    each anchor against truth, which is what a per-horizon table row means.
    """
    scaled = prepared.scaled
    lookback = prepared.lookback
    n_rows = scaled.shape[0]
    first = prepared.n_train
    last = n_rows - lookback - horizon  # inclusive
    if last < first:
        return HorizonSummary(horizon, 0, float("nan"), [], [])
    anchors = np.arange(first, last + 1)
    n_max = max(1, ANCHOR_BUDGET // horizon)
    if anchors.size > n_max:
        keep = np.unique(np.round(np.linspace(0, anchors.size - 1, n_max)).astype(int))
        anchors = anchors[keep]

    seed_windows = np.stack([scaled[j : j + lookback] for j in anchors])
    preds = iterative_forecast_batch(
        model, seed_windows, horizon, close_col=prepared.target_col
    )
    steps = np.arange(1, horizon + 1)
    actual = scaled[(anchors[:, None] + lookback + steps[None, :] - 1), prepared.target_col]
    final_rmse = rmse(actual[:, -1], preds[:, -1])
    return HorizonSummary(
        horizon,
        int(anchors.size),
        final_rmse,
        [float(v) for v in preds[0]],
        [float(v) for v in actual[0]],
    )


def _failure_result(config: ExperimentConfig, message: str) -> ExperimentResult:
    return ExperimentResult(
        config=config,
        train_rmse=float("nan"),
        test_rmse=float("nan"),
        wall_seconds=0.0,
        epochs_run=0,
        horizons=[],
        version=_artifact_version(),
        failure=message,
    )


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    """Full pipeline for one config; training failures become failure records."""
    validate_config(config)
    prepared = prepare(config)
    rng = make_rng(config.seed)
    model = build_model(config, prepared.scaled.shape[1], rng)
    x_train = model_train_inputs(config.model, prepared.train)
    x_test = model_train_inputs(config.model, prepared.test)
    try:
        report = train(model, x_train, prepared.train.targets, config.train)
        test_rmse = rmse(prepared.test.targets, model.predict_window_batch(x_test))
        horizons = [_horizon_eval(model, prepared, h) for h in config.horizons]
    except (TrainingDiverged, RuntimeError, ValueError) as err:
        return _failure_result(config, str(err))
    return ExperimentResult(
        config=config,
        train_rmse=report.final_rmse,
        test_rmse=test_rmse,
        wall_seconds=report.wall_seconds,
        epochs_run=report.epochs_run,
        horizons=horizons,
        version=_artifact_version(),
    )


def run_matrix(configs, parallelism: int = 1):
    """Run every config (up to `parallelism` at once), in config order.

    Per-experiment failures are captured as failure records; the matrix
    always completes.
    """
    configs = list(configs)
    if not configs:
        raise ValueError("no experiments in matrix")
    if parallelism < 1:
        raise ValueError("parallelism must be >= 1")
    for c in configs:
        validate_config(c)

    def safe(config):
        try:
            return run_experiment(config)
        except Exception as err:  # captured per row; the matrix completes
            return _failure_result(config, f"{type(err).__name__}: {err}")

    if parallelism == 1:
        return [safe(c) for c in configs]
    with ThreadPoolExecutor(max_workers=parallelism) as pool:
        return list(pool.map(safe, configs))


# --------------------------------------------------------------------------
# Result serialization


def result_to_dict(result: ExperimentResult, include_wall: bool = True) -> dict:
    d = {
        "config": config_to_dict(result.config),
        "train_rmse": result.train_rmse,
        "test_rmse": result.test_rmse,
        "epochs_run": result.epochs_run,
        "horizons": [dataclasses.asdict(h) for h in result.horizons],
        "version": result.version,
        "failure": result.failure,
    }
    if include_wall:
        d["wall_seconds"] = result.wall_seconds
    return d


def result_canonical_json(result: ExperimentResult) -> str:
    """Deterministic serialization: wall-clock excluded, keys sorted."""
    return json.dumps(result_to_dict(result, include_wall=False), sort_keys=True)


def result_from_dict(d: dict) -> ExperimentResult:
    return ExperimentResult(
        config=config_from_dict(d["config"]),
        train_rmse=d["train_rmse"],
        test_rmse=d["test_rmse"],
        wall_seconds=d.get("wall_seconds", 0.0),
        epochs_run=d["epochs_run"],
        horizons=[HorizonSummary(**h) for h in d["horizons"]],
        version=d["version"],
        failure=d.get("failure"),
    )


def save_results(results, path) -> None:
    payload = {"results": [result_to_dict(r) for r in results]}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)


def load_results(path):
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    return [result_from_dict(d) for d in payload["results"]]


# --------------------------------------------------------------------------
# Comparison table and reports


CSV_REPORT_HEADER = "model,config,regime,horizon,train_rmse,test_rmse,wall_seconds,ratio"


@dataclass
class ComparisonRow:
    model: str
    config_label: str
    regime: str
    horizon: int
    train_rmse: float
    test_rmse: float
    wall_seconds: float
    ratio: float | None  # best-KAN / best-LSTM test RMSE in this cell


def _regime_of(config: ExperimentConfig) -> str:
    return config.data.regime if config.data.source == "synthetic" else "csv"


def comparison_table(results, best_only: bool = False):
    """One row per (experiment, horizon), with the Table-3-style ratio column.

    The ratio for a (regime, horizon) cell is best-KAN / best-LSTM test RMSE
    (values above 1 favor the LSTM); it is empty while either side is missing.
    With best_only=True only each cell's best row per model family is kept —
    note this selects on test RMSE and is therefore optimistic.
    """
    rows = []
    for res in results:
        regime = _regime_of(res.config)
        for summary in res.horizons:
            rows.append(
                ComparisonRow(
                    model=res.config.model,
                    config_label=res.config.label,
                    regime=regime,
                    horizon=summary.horizon,
                    train_rmse=res.train_rmse,
                    test_rmse=summary.rmse,
                    wall_seconds=res.wall_seconds,
                    ratio=None,
                )
            )

    def cell(row):
        return (row.regime, row.horizon)

    best = {}  # (regime, horizon, model) -> best finite test rmse
    for row in rows:
        if math.isfinite(row.test_rmse):
            key = cell(row) + (row.model,)
            if key not in best or row.test_rmse < best[key]:
                best[key] = row.test_rmse
    for row in rows:
        kan_best = best.get(cell(row) + ("kan",))
        lstm_best = best.get(cell(row) + ("lstm",))
        if kan_best is not None and lstm_best is not None and lstm_best > 0:
            row.ratio = kan_best / lstm_best

    if best_only:
        chosen = {}
        for row in rows:
            key = cell(row) + (row.model,)
            old = chosen.get(key)
            if old is None or (
                math.isfinite(row.test_rmse)
                and not (math.isfinite(old.test_rmse) and old.test_rmse <= row.test_rmse)
            ):
                chosen[key] = row
        rows = list(chosen.values())

    regime_order = {}
    for row in rows:
        regime_order.setdefault(row.regime, len(regime_order))
    rows.sort(key=lambda r: (regime_order[r.regime], r.horizon, r.model, r.config_label))
    return rows


def runtime_summary(results) -> dict:
    """Mean training wall-clock per model family, plus the LSTM/KAN ratio."""
    out = {}
    for kind in ("kan", "lstm"):
        secs = [r.wall_seconds for r in results if r.config.model == kind and not r.failure]
        out[kind] = {
            "mean_wall_seconds": float(np.mean(secs)) if secs else float("nan"),
            "n_experiments": len(secs),
        }
    kan_mean = out["kan"]["mean_wall_seconds"]
    lstm_mean = out["lstm"]["mean_wall_seconds"]
    ratio = float("nan")
    if out["kan"]["n_experiments"] and out["lstm"]["n_experiments"] and kan_mean > 0:
        ratio = lstm_mean / kan_mean
    out["lstm_over_kan_ratio"] = ratio
    return out


def _fmt(value, places: int = 4) -> str:
    if value is None:
        return ""
    return f"{value:.{places}f}"


def emit_report(results, fmt: str, out_dir, best_only: bool = False):
    """Render results to files; returns the list of written paths."""
    if not results:
        raise ValueError("no results to report")
    if fmt not in ("csv", "markdown-table", "gnuplot-data"):
        raise ValueError(f"unknown report format {fmt!r}")
    os.makedirs(out_dir, exist_ok=True)
    rows = comparison_table(results, best_only=best_only)
    runtime = runtime_summary(results)
    written = []

    if fmt == "csv":
        path = os.path.join(out_dir, "results.csv")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(CSV_REPORT_HEADER + "\n")
            for r in rows:
                fh.write(
                    ",".join(
                        [
                            r.model,
                            r.config_label,
                            r.regime,
                            str(r.horizon),
                            _fmt(r.train_rmse),
                            _fmt(r.test_rmse),
                            _fmt(r.wall_seconds),
                            _fmt(r.ratio),
                        ]
                    )
                    + "\n"
                )
        written.append(path)
        rt_path = os.path.join(out_dir, "runtime.csv")
        with open(rt_path, "w", encoding="utf-8") as fh:
            fh.write("model,mean_wall_seconds,n_experiments\n")
            for kind in ("kan", "lstm"):
                fh.write(
                    f"{kind},{_fmt(runtime[kind]['mean_wall_seconds'])},"
                    f"{runtime[kind]['n_experiments']}\n"
                )
            fh.write(f"lstm_over_kan_ratio,{_fmt(runtime['lstm_over_kan_ratio'])},\n")
        written.append(rt_path)

    elif fmt == "markdown-table":
        path = os.path.join(out_dir, "results.md")
        cols = CSV_REPORT_HEADER.split(",")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("| " + " | ".join(cols) + " |\n")
            fh.write("|" + "---|" * len(cols) + "\n")
            for r in rows:
                fh.write(
                    "| "
                    + " | ".join(
                        [
                            r.model,
                            r.config_label,
                            r.regime,
                            str(r.horizon),
                            _fmt(r.train_rmse),
                            _fmt(r.test_rmse),
                            _fmt(r.wall_seconds),
                            _fmt(r.ratio),
                        ]
                    )
                    + " |\n"
                )
            fh.write("\nMean training runtime: ")
            fh.write(
                f"KAN {_fmt(runtime['kan']['mean_wall_seconds'])} s, "
                f"LSTM {_fmt(runtime['lstm']['mean_wall_seconds'])} s "
                f"(LSTM/KAN ratio {_fmt(runtime['lstm_over_kan_ratio'], 2)})\n"
            )
        written.append(path)

    else:  # gnuplot-data
        for i, res in enumerate(results):
            for summary in res.horizons:
                if not summary.sample_pred:
                    continue
                name = (
                    f"trace_{i:03d}_{res.config.model}_{_regime_of(res.config)}"
                    f"_h{summary.horizon}.dat"
                )
                path = os.path.join(out_dir, name)
                with open(path, "w", encoding="utf-8") as fh:
                    fh.write("# step actual predicted\n")
                    for s, (a, p) in enumerate(
                        zip(summary.sample_actual, summary.sample_pred), start=1
                    ):
                        fh.write(f"{s} {repr(float(a))} {repr(float(p))}\n")
                written.append(path)

    return written
