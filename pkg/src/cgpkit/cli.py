"""Experiment runner: desk-scale reproductions with machine-readable output.

Every run writes ``results.json`` plus CSV tables into the output
directory; all files embed the config hash and every CSV row is tagged
with the method it belongs to, so downstream figure scripts can refuse
mismatched inputs. Wall times live only in ``timing.csv`` so that
``results.json`` is byte-identical across repeated runs of one config.

Exit codes: 0 ok, 2 config error, 3 numeric error, 4 I/O error.

Sweeps vary exactly one axis. A sweepable field is one of
``segmentation.size``, ``segmentation.count``, ``inducing_count`` or
``n_train``; giving a list for exactly one of them defines the axis.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import hashlib
import json
import math
import os
import sys
import tempfile
import time

import numpy as np

from .analysis import excess_mse_closed_form, excess_mse_monte_carlo, info_gap
from .datagen import (
    ExperimentConfig,
    SimulatedSeries,
    TimeSeries,
    ingest_csv,
    back_transform,
    segment_bounds,
    simulate_gp_series,
    simulate_grf,
    split_segments,
)
from .errors import (
    CgpError,
    ConfigError,
    EmptySeries,
    InvalidInput,
    ParseError,
)
from .exact import DataSegment, fisher_information, gp_posterior, ml_estimate, param_names
from .kernels import Hyperparams, KernelSpec, MeanSpec, as_points
from .recursive import cgp_run, fused_theta, fusion_init, fusion_update
from .sparse import fitc_posterior, place_uniform

EXPERIMENTS = ("learn-fusion", "timeseries", "grf", "excess-mse", "info-gap", "csv-predict")
SWEEPABLE = ("/segmentation/size", "/segmentation/count", "/inducing_count", "/n_train")
SCHEMA_VERSION = 1


# ---------------------------------------------------------------------------
# Config plumbing.

def config_hash(cfg: dict) -> str:
    canonical = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()[:16]


def _jsonify(obj):
    if isinstance(obj, dict):
        return {k: _jsonify(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonify(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonify(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


def atomic_write_text(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_rows_csv(path: str, header: list, rows: list) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_csv_cell(v) for v in row))
    atomic_write_text(path, "\n".join(lines) + "\n")


def _csv_cell(v) -> str:
    if isinstance(v, str):
        if any(ch in v for ch in ',"\n'):
            return '"' + v.replace('"', '""') + '"'
        return v
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _expect(cfg: dict, key: str, kinds, pointer: str, required=True, default=None):
    if key not in cfg:
        if required:
            raise ConfigError(f"{pointer}/{key}", "missing required field")
        return default
    value = cfg[key]
    if kinds is not None and not isinstance(value, kinds):
        raise ConfigError(f"{pointer}/{key}", f"expected {kinds}, got {type(value).__name__}")
    if isinstance(value, bool) and kinds is int:
        raise ConfigError(f"{pointer}/{key}", "expected integer, got bool")
    return value


def load_config(path: str) -> dict:
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError("/", f"not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("/", "top level must be an object")
    if cfg.get("schema") != SCHEMA_VERSION:
        raise ConfigError("/schema", f"must be {SCHEMA_VERSION}")
    name = _expect(cfg, "experiment", str, "")
    if name not in EXPERIMENTS:
        raise ConfigError("/experiment", f"unknown experiment {name!r}; valid: {EXPERIMENTS}")
    _expect(cfg, "seed", int, "")
    return cfg


def _kernel_from(cfg: dict, pointer: str = "/kernel") -> KernelSpec:
    block = _expect(cfg, "kernel", dict, "")
    try:
        return KernelSpec.from_config(block)
    except InvalidInput as exc:
        raise ConfigError(pointer, str(exc)) from exc


def _mean_from(cfg: dict) -> MeanSpec:
    block = cfg.get("mean", {"family": "Zero"})
    if not isinstance(block, dict):
        raise ConfigError("/mean", "must be an object")
    try:
        return MeanSpec.from_config(block)
    except InvalidInput as exc:
        raise ConfigError("/mean", str(exc)) from exc


def _segmentation_from(cfg: dict, required=True) -> dict:
    seg = _expect(cfg, "segmentation", dict, "", required=required,
                  default={"count": 1})
    keys = set(seg)
    if keys not in ({"count"}, {"size"}):
        raise ConfigError("/segmentation", "must contain exactly one of 'count' or 'size'")
    (key, value), = seg.items()
    if not isinstance(value, int) or isinstance(value, bool) or value < 1:
        raise ConfigError(f"/segmentation/{key}", "must be a positive integer")
    return dict(seg)


def _timed(reps: int, fn):
    """Run ``fn`` ``reps`` times; return (first result, median seconds)."""
    result = None
    times = []
    for i in range(max(reps, 1)):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
        if i == 0:
            result = out
    return result, float(np.median(times))


def _rmse(pred: np.ndarray, actual: np.ndarray) -> float:
    return float(np.sqrt(np.mean((np.asarray(pred) - np.asarray(actual)) ** 2)))


# ---------------------------------------------------------------------------
# Experiment implementations. Each returns (results dict, files dict).

def _series_from_config(cfg: dict, spec, mean) -> SimulatedSeries:
    n_train = _expect(cfg, "n_train", int, "")
    n_test = _expect(cfg, "n_test", int, "", required=False, default=0)
    spacing = float(cfg.get("spacing", 1.0))
    return simulate_gp_series(ExperimentConfig(
        kernel=spec, mean=mean, n_train=n_train, n_test=n_test,
        segmentation=_segmentation_from(cfg, required=False),
        seed=int(cfg["seed"]), spacing=spacing,
    ))


def _posterior_tables(tag: str, chash: str, xt: np.ndarray, beliefs: dict):
    pred_rows, var_rows, cov_rows = [], [], []
    coords = [f"x{i+1}" for i in range(xt.shape[1])] if xt.shape[1] > 1 else ["x"]
    for method, belief in beliefs.items():
        var = belief.variances()
        for i in range(belief.dim):
            cells = [method, chash, i, *xt[i].tolist(), float(belief.mean[i]), float(var[i])]
            pred_rows.append(cells)
            var_rows.append([method, chash, i, float(var[i])])
        for r in range(belief.dim):
            for c in range(belief.dim):
                cov_rows.append([method, chash, r, c, float(belief.cov[r, c])])
    header = ["method", "config_hash", "index", *coords, "mean", "variance"]
    return {
        "predictions.csv": (header, pred_rows),
        "variance.csv": (["method", "config_hash", "index", "variance"], var_rows),
        "covariance.csv": (["method", "config_hash", "row", "col", "value"], cov_rows),
    }


def _run_timeseries(cfg: dict, chash: str):
    spec = _kernel_from(cfg)
    if spec.input_dim != 1:
        raise ConfigError("/kernel/family", "timeseries requires a 1-D kernel")
    mean = _mean_from(cfg)
    segmentation = _segmentation_from(cfg)
    inducing_count = _expect(cfg, "inducing_count", int, "", required=False, default=0)
    methods = cfg.get("methods", ["GP", "CGP", "SGP"] if inducing_count else ["GP", "CGP"])
    reps = int(cfg.get("timing_reps", 3))
    sim = _series_from_config(cfg, spec, mean)
    if sim.test_t.size == 0:
        raise ConfigError("/n_test", "timeseries requires test points")
    train = sim.train
    xt = as_points(sim.test_t, 1)
    segments = split_segments(train.X, train.y, segmentation)

    beliefs, timing_rows, metrics = {}, [], {}
    snapshot = None
    for method in methods:
        if method == "GP":
            belief, seconds = _timed(reps, lambda: gp_posterior(None, spec, mean, train, xt))
        elif method == "CGP":
            (state, _), seconds = _timed(reps, lambda: cgp_run(segments, spec, mean, xt))
            belief = state.current
            snapshot = state.to_snapshot()
        elif method == "SGP":
            if inducing_count < 1:
                raise ConfigError("/inducing_count", "SGP requires inducing_count >= 1")
            inducing = place_uniform((float(train.X.min()), float(train.X.max())),
                                     inducing_count)
            belief, seconds = _timed(
                reps, lambda: fitc_posterior(spec, mean, train, inducing, xt)
            )
        else:
            raise ConfigError("/methods", f"unknown method {method!r}")
        beliefs[method] = belief
        timing_rows.append([method, chash, reps, seconds])
        metrics[method] = {
            "rmse": _rmse(belief.mean, sim.test_y),
            "mean_variance": float(np.mean(belief.variances())),
        }

    files = _posterior_tables("timeseries", chash, xt, beliefs)
    if snapshot is not None:
        files["cgp_state.json"] = snapshot  # checkpoint for resuming the fold
    files["timing.csv"] = (["method", "config_hash", "reps", "seconds"], timing_rows)
    files["actuals.csv"] = (
        ["method", "config_hash", "index", "x", "value"],
        [["actual", chash, i, float(t), float(v)]
         for i, (t, v) in enumerate(zip(sim.test_t, sim.test_y))],
    )
    if "SGP" in beliefs:
        inducing = place_uniform((float(train.X.min()), float(train.X.max())),
                                 inducing_count)
        files["inducing.csv"] = (
            ["method", "config_hash", "index", "x"],
            [["SGP", chash, i, float(u)] for i, u in enumerate(inducing.U_X[:, 0])],
        )
    return {"metrics": metrics}, files


def _run_learn_fusion(cfg: dict, chash: str):
    spec = _kernel_from(cfg)
    mean = MeanSpec()
    sizes = _expect(cfg, "segment_sizes", list, "")
    if not sizes or not all(isinstance(s, int) and s > 1 for s in sizes):
        raise ConfigError("/segment_sizes", "must be a nonempty list of integers > 1")
    reps = int(cfg.get("timing_reps", 1))
    sim = _series_from_config(cfg, spec, mean)
    train = sim.train
    init = Hyperparams(np.zeros(spec.params.values.size), spec.params.names, 0.0)

    names = param_names(spec, mean)
    natural_names = [n[4:] if n.startswith("log_") else n for n in names]
    files, timing_rows, finals = {}, [], {}
    for n_k in sizes:
        def fuse():
            rows = []
            fs = fusion_init(names)
            for sl in segment_bounds(train.n, {"size": n_k}):
                segment = DataSegment(train.X[sl], train.y[sl])
                fit = ml_estimate(spec, mean, segment, init)
                fim = fisher_information(spec, mean, segment, fit.theta, fit.mean)
                fs = fusion_update(fs, fit.theta, fim)
                theta, _ = fused_theta(fs)
                fused_nat = list(theta.natural().values()) + [theta.noise_var]
                rows.append(["CGP", chash, n_k, fs.k, *map(float, fused_nat)])
            return rows, fs
        (rows, fs), seconds = _timed(reps, fuse)
        header = ["method", "config_hash", "n_k", "k", *natural_names[:-1], "noise_var"]
        files[f"fusion_nk{n_k}.csv"] = (header, rows)
        timing_rows.append([f"CGP-fusion-nk{n_k}", chash, reps, seconds])
        theta, _ = fused_theta(fs)
        finals[str(n_k)] = {
            "segments": fs.k,
            "fused": {k: float(v) for k, v in theta.natural().items()},
            "fused_noise_var": theta.noise_var,
        }
    files["timing.csv"] = (["method", "config_hash", "reps", "seconds"], timing_rows)
    return {"metrics": {"fusion": finals}}, files


def _run_grf(cfg: dict, chash: str):
    grid = _expect(cfg, "grid", list, "")
    if len(grid) != 2 or not all(isinstance(g, int) and g >= 2 for g in grid):
        raise ConfigError("/grid", "must be [rows, cols] with integers >= 2")
    alpha = float(_expect(cfg, "alpha", (int, float), ""))
    theta1 = float(_expect(cfg, "theta1", (int, float), ""))
    theta2 = float(_expect(cfg, "theta2", (int, float), ""))
    noise_var = float(cfg.get("noise_var", 1e-4))
    segmentation = _segmentation_from(cfg)
    inducing_count = _expect(cfg, "inducing_count", int, "", required=False, default=0)
    methods = cfg.get("methods", ["GP", "CGP", "SGP"] if inducing_count else ["GP", "CGP"])
    reps = int(cfg.get("timing_reps", 3))

    sample = simulate_grf((grid[0], grid[1]), alpha, theta1, theta2, int(cfg["seed"]),
                          noise_var=noise_var)
    spec = KernelSpec.from_natural(
        "SE2D-ARD",
        {"amplitude": alpha, "lengthscale_x1": theta1, "lengthscale_x2": theta2},
        noise_var,
    )
    mean = MeanSpec()
    train = sample.train
    xt = sample.test_X
    segments = split_segments(train.X, train.y, segmentation)

    beliefs, timing_rows, metrics = {}, [], {}
    inducing = None
    for method in methods:
        if method == "GP":
            belief, seconds = _timed(reps, lambda: gp_posterior(None, spec, mean, train, xt))
        elif method == "CGP":
            (state, _), seconds = _timed(reps, lambda: cgp_run(segments, spec, mean, xt))
            belief = state.current
        elif method == "SGP":
            if inducing_count < 1:
                raise ConfigError("/inducing_count", "SGP requires inducing_count >= 1")
            bounds = ((float(train.X[:, 0].min()), float(train.X[:, 0].max())),
                      (float(train.X[:, 1].min()), float(train.X[:, 1].max())))
            inducing = place_uniform(bounds, inducing_count)
            belief, seconds = _timed(
                reps, lambda: fitc_posterior(spec, mean, train, inducing, xt)
            )
        else:
            raise ConfigError("/methods", f"unknown method {method!r}")
        beliefs[method] = belief
        timing_rows.append([method, chash, reps, seconds])
        metrics[method] = {
            "rmse": _rmse(belief.mean, sample.test_y),
            "mean_variance": float(np.mean(belief.variances())),
        }

    files = _posterior_tables("grf", chash, xt, beliefs)
    # the full covariance tables get large on grids; keep variance + field
    del files["covariance.csv"]
    field_rows = [
        ["field", chash, float(x1), float(x2), float(v), int(m)]
        for (x1, x2), v, m in zip(sample.X, sample.values, sample.test_mask)
    ]
    files["field.csv"] = (["method", "config_hash", "x1", "x2", "value", "is_test"],
                          field_rows)
    if inducing is not None:
        files["inducing.csv"] = (
            ["method", "config_hash", "index", "x1", "x2"],
            [["SGP", chash, i, float(u1), float(u2)]
             for i, (u1, u2) in enumerate(inducing.U_X)],
        )
    files["timing.csv"] = (["method", "config_hash", "reps", "seconds"], timing_rows)
    return {"metrics": metrics}, files


def _run_excess_mse(cfg: dict, chash: str):
    spec = _kernel_from(cfg)
    mean = MeanSpec()
    max_points = int(cfg.get("max_test_points", 64))
    reps = int(cfg.get("timing_reps", 1))
    if spec.input_dim == 1:
        sim = _series_from_config(cfg, spec, mean)
        train_X = sim.train.X
        n_test = max(int(cfg.get("n_test", 0)), 2)
        test_pts = as_points(
            np.linspace(float(train_X.min()), float(train_X.max()), n_test), 1
        )
    else:
        grid = _expect(cfg, "grid", list, "")
        sample = simulate_grf((grid[0], grid[1]),
                              spec.params.natural()["amplitude"],
                              spec.params.natural()["lengthscale_x1"],
                              spec.params.natural()["lengthscale_x2"],
                              int(cfg["seed"]), noise_var=spec.params.noise_var)
        train_X = sample.train.X
        test_pts = sample.test_X
    if test_pts.shape[0] > max_points:
        idx = np.linspace(0, test_pts.shape[0] - 1, max_points).round().astype(int)
        test_pts = test_pts[np.unique(idx)]
    half = train_X.shape[0] // 2
    seg1, seg2 = train_X[:half], train_X[half:]

    def compute():
        rows = []
        for pt in test_pts:
            report = excess_mse_closed_form(spec, mean, seg1, seg2, pt.reshape(1, -1))
            x = float(pt[0])
            y = float(pt[1]) if pt.size > 1 else 0.0
            rows.append(["CGP", chash, x, y, report.closed_form])
        return rows
    rows, seconds = _timed(reps, compute)
    files = {
        "excess_grid.csv": (["method", "config_hash", "x", "y", "value"], rows),
        "timing.csv": (["method", "config_hash", "reps", "seconds"],
                       [["CGP-excess", chash, reps, seconds]]),
    }
    results = {"metrics": {"n_test_points": len(rows),
                           "max_excess": float(max(r[4] for r in rows)),
                           "mean_excess": float(np.mean([r[4] for r in rows]))}}
    mc = cfg.get("mc_check")
    if mc is not None:
        n_draws = int(mc.get("n_draws", 20000))
        n_points = min(int(mc.get("points", 3)), len(test_pts))
        checks = []
        for pt in test_pts[:n_points]:
            report = excess_mse_closed_form(spec, mean, seg1, seg2, pt.reshape(1, -1))
            est, se = excess_mse_monte_carlo(spec, mean, seg1, seg2, pt.reshape(1, -1),
                                             n_draws, int(cfg["seed"]))
            checks.append({"x": float(pt[0]), "closed_form": report.closed_form,
                           "monte_carlo": est, "se": se})
        results["metrics"]["mc_check"] = checks
    return results, files


def _run_info_gap(cfg: dict, chash: str):
    spec = _kernel_from(cfg)
    mean = _mean_from(cfg)
    segmentation = _segmentation_from(cfg)
    sim = _series_from_config(cfg, spec, mean)
    xt = as_points(sim.test_t, 1)
    if xt.shape[0] == 0:
        raise ConfigError("/n_test", "info-gap requires test points")
    bounds = segment_bounds(sim.train.n, segmentation)
    if len(bounds) < 2:
        raise ConfigError("/segmentation", "info-gap requires at least two segments")
    segments_X = [sim.train.X[sl] for sl in bounds]
    report = info_gap(spec, mean, segments_X, xt)
    train = sim.train
    gp_belief = gp_posterior(None, spec, mean, train, xt)
    segments = [DataSegment(sim.train.X[sl], sim.train.y[sl]) for sl in bounds]
    state, _ = cgp_run(segments, spec, mean, xt)
    metrics = {
        "info": report.to_json(),
        "mean_gp_variance": float(np.mean(gp_belief.variances())),
        "mean_cgp_variance": float(np.mean(state.current.variances())),
    }
    rows = [["segments", chash, i, float(v)] for i, v in enumerate(report.mi_segments)]
    files = {
        "mi_segments.csv": (["method", "config_hash", "segment", "mi"], rows),
        "timing.csv": (["method", "config_hash", "reps", "seconds"], []),
    }
    return {"metrics": metrics}, files


def _synthesize_lognormal(cfg: dict, spec, out_dir: str, chash: str) -> TimeSeries:
    synth = cfg.get("synthetic", {})
    n = int(synth.get("n", 1056))
    sim = simulate_gp_series(ExperimentConfig(
        kernel=spec, mean=MeanSpec("Linear", 0.0, float(synth.get("log_level", 3.0))),
        n_train=n, n_test=0, segmentation={"count": 1},
        seed=int(cfg["seed"]), spacing=1.0,
    ))
    raw = TimeSeries(sim.series.t, np.exp(sim.series.y))
    path = os.path.join(out_dir, "synthetic_input.csv")
    from .datagen import write_csv, write_sidecar

    write_csv(raw, path, "t", "value")
    write_sidecar(path + ".json", {"config_hash": chash, "seed": cfg["seed"], "n": n})
    return raw


def _run_csv_predict(cfg: dict, chash: str, out_dir: str):
    spec = _kernel_from(cfg)
    if spec.input_dim != 1:
        raise ConfigError("/kernel/family", "csv-predict requires a 1-D kernel")
    mean = _mean_from(cfg)
    transform = cfg.get("transform", "Log")
    if transform != "Log":
        raise ConfigError("/transform", "only the Log transform is supported")
    segmentation = _segmentation_from(cfg)
    n_predict = _expect(cfg, "n_predict", int, "")
    reps = int(cfg.get("timing_reps", 3))
    dropped = 0
    if "input" in cfg:
        series, dropped = ingest_csv(cfg["input"], cfg.get("timestamp_column", "t"),
                                     cfg.get("value_column", "value"), transform)
    else:
        raw = _synthesize_lognormal(cfg, spec, out_dir, chash)
        series = TimeSeries(raw.t, np.log(raw.y), transform="Log")
    if series.n <= n_predict + 1:
        raise ConfigError("/n_predict", f"series has only {series.n} usable rows")
    n_train = series.n - n_predict
    train = DataSegment(series.t[:n_train], series.y[:n_train])
    xt = as_points(series.t[n_train:], 1)
    actual_raw = np.exp(series.y[n_train:])

    if cfg.get("learn", False):
        init = Hyperparams(np.zeros(spec.params.values.size), spec.params.names, 0.0)
        fs = fusion_init(param_names(spec, MeanSpec()))
        for sl in segment_bounds(train.n, segmentation):
            segment = DataSegment(train.X[sl], train.y[sl])
            fit = ml_estimate(spec, MeanSpec(), segment, init)
            fim = fisher_information(spec, MeanSpec(), segment, fit.theta, fit.mean)
            fs = fusion_update(fs, fit.theta, fim)
        theta, _ = fused_theta(fs)
        spec = spec.with_params(theta)

    segments = split_segments(train.X, train.y, segmentation)
    (state, _), seconds = _timed(reps, lambda: cgp_run(segments, spec, mean, xt))
    belief = state.current
    median, lo, hi = back_transform(belief, "Log")
    rows = [
        ["CGP", chash, float(t), float(m), float(a), float(b_), float(act)]
        for t, m, a, b_, act in zip(series.t[n_train:], median, lo, hi, actual_raw)
    ]
    files = {
        "predictions.csv": (
            ["method", "config_hash", "t", "median", "lower95", "upper95", "actual"],
            rows,
        ),
        "timing.csv": (["method", "config_hash", "reps", "seconds"],
                       [["CGP", chash, reps, seconds]]),
    }
    metrics = {
        "CGP": {"rmse": _rmse(median, actual_raw)},
        "dropped_rows": dropped,
        "n_train": n_train,
        "n_predict": n_predict,
        "learned_kernel": spec.to_config(),
    }
    return {"metrics": metrics}, files


# ---------------------------------------------------------------------------
# Entry points.

def run_experiment(name: str, config_path: str, out_dir: str, seed=None) -> dict:
    """Run one experiment; writes results.json and CSV tables into out_dir."""
    cfg = load_config(config_path)
    if cfg["experiment"] != name:
        raise ConfigError("/experiment", f"config is for {cfg['experiment']!r}, not {name!r}")
    if seed is not None:
        cfg["seed"] = int(seed)
    chash = config_hash(cfg)
    os.makedirs(out_dir, exist_ok=True)
    if name == "timeseries":
        results, files = _run_timeseries(cfg, chash)
    elif name == "learn-fusion":
        results, files = _run_learn_fusion(cfg, chash)
    elif name == "grf":
        results, files = _run_grf(cfg, chash)
    elif name == "excess-mse":
        results, files = _run_excess_mse(cfg, chash)
    elif name == "info-gap":
        results, files = _run_info_gap(cfg, chash)
    elif name == "csv-predict":
        results, files = _run_csv_predict(cfg, chash, out_dir)
    else:
        raise ConfigError("/experiment", f"unknown experiment {name!r}")
    payload = {
        "schema": SCHEMA_VERSION,
        "experiment": name,
        "config_hash": chash,
        "seed": cfg["seed"],
        "config": cfg,
        **_jsonify(results),
    }
    for fname, content in files.items():
        if fname.endswith(".json"):
            atomic_write_text(
                os.path.join(out_dir, fname),
                json.dumps({"config_hash": chash, **content}, sort_keys=True) + "\n",
            )
        else:
            header, rows = content
            write_rows_csv(os.path.join(out_dir, fname), header, rows)
    atomic_write_text(
        os.path.join(out_dir, "results.json"),
        json.dumps(payload, indent=2, sort_keys=True) + "\n",
    )
    return payload


def _find_axis(cfg: dict):
    axes = []
    for pointer in SWEEPABLE:
        parts = [p for p in pointer.split("/") if p]
        node = cfg
        for part in parts[:-1]:
            node = node.get(part, {}) if isinstance(node, dict) else {}
        if isinstance(node, dict) and isinstance(node.get(parts[-1]), list):
            axes.append((pointer, parts, node.get(parts[-1])))
    if not axes:
        raise ConfigError("/", f"no sweep axis found; one of {SWEEPABLE} must be a list")
    if len(axes) > 1:
        raise ConfigError("/", f"multiple sweep axes: {[a[0] for a in axes]}")
    pointer, parts, values = axes[0]
    if not values:
        raise ConfigError(pointer, "sweep axis must be a nonempty list")
    return pointer, parts, values


def _set_pointer(cfg: dict, parts: list, value):
    node = cfg
    for part in parts[:-1]:
        node = node[part]
    node[parts[-1]] = value


def _max_workers() -> int:
    env = os.environ.get("CGPKIT_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


def sweep(config_path: str, out_dir: str) -> list:
    """Run one experiment per value of the single list-valued axis.

    Writes per-point outputs to ``out_dir/point_###`` and an aggregated
    ``sweep.csv`` with one row per (axis value, method), ordered by axis
    index then method name regardless of worker scheduling.
    """
    base = load_config(config_path)
    pointer, parts, values = _find_axis(base)
    os.makedirs(out_dir, exist_ok=True)

    def run_point(i_value):
        i, value = i_value
        cfg = json.loads(json.dumps(base))
        _set_pointer(cfg, parts, value)
        point_dir = os.path.join(out_dir, f"point_{i:03d}")
        os.makedirs(point_dir, exist_ok=True)
        cfg_path = os.path.join(point_dir, "config.json")
        atomic_write_text(cfg_path, json.dumps(cfg, indent=2, sort_keys=True) + "\n")
        payload = run_experiment(cfg["experiment"], cfg_path, point_dir)
        timings = {}
        timing_path = os.path.join(point_dir, "timing.csv")
        with open(timing_path) as fh:
            header = fh.readline().strip().split(",")
            for line in fh:
                cells = line.strip().split(",")
                row = dict(zip(header, cells))
                timings[row["method"]] = float(row["seconds"])
        return i, value, payload, timings

    rows = []
    with concurrent.futures.ThreadPoolExecutor(max_workers=_max_workers()) as pool:
        for i, value, payload, timings in pool.map(run_point, enumerate(values)):
            metrics = payload.get("metrics", {})
            for method in sorted(metrics):
                entry = metrics[method]
                if not isinstance(entry, dict) or "rmse" not in entry:
                    continue
                rows.append([
                    pointer, value, method, float(entry["rmse"]),
                    timings.get(method, timings.get(f"{method}-fusion", math.nan)),
                    payload["config_hash"],
                ])
    write_rows_csv(
        os.path.join(out_dir, "sweep.csv"),
        ["axis", "axis_value", "method", "rmse", "runtime_seconds", "config_hash"],
        rows,
    )
    return rows


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="cgpkit", description="Composite-GP experiment runner"
    )
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run one experiment")
    p_run.add_argument("name", choices=EXPERIMENTS)
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--out", required=True)
    p_run.add_argument("--seed", type=int, default=None)
    p_sweep = sub.add_parser("sweep", help="run a one-axis sweep")
    p_sweep.add_argument("--config", required=True)
    p_sweep.add_argument("--out", required=True)
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            run_experiment(args.name, args.config, args.out, seed=args.seed)
        else:
            sweep(args.config, args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (ParseError, EmptySeries, OSError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 4
    except CgpError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
