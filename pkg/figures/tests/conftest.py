import json
import os
import subprocess
import sys

import pytest

FIGURES_DIR = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
if FIGURES_DIR not in sys.path:
    sys.path.insert(0, FIGURES_DIR)

PERIODIC_KERNEL = {
    "family": "PeriodicPlusSE",
    "params": {"periodic_amplitude": 1.0, "period": 32.0, "periodic_lengthscale": 1.0,
               "se_amplitude": 1.0, "se_lengthscale": 8.0},
    "noise_var": 0.01,
}

# Pinned desk-scale CLI runs that produce the figure fixtures.
FIXTURE_CONFIGS = {
    "fusion": {
        "schema": 1, "experiment": "learn-fusion", "seed": 0,
        "kernel": {"family": "SquaredExponential",
                   "params": {"amplitude": 1.0, "lengthscale": 2.0},
                   "noise_var": 0.04},
        "n_train": 300, "n_test": 0, "segment_sizes": [100, 150],
    },
    "timeseries": {
        "schema": 1, "experiment": "timeseries", "seed": 3,
        "kernel": PERIODIC_KERNEL,
        "mean": {"family": "Linear", "a": 0.001, "b": 0.0},
        "n_train": 128, "n_test": 16,
        "segmentation": {"count": 4}, "inducing_count": 9, "timing_reps": 1,
    },
    "grf": {
        "schema": 1, "experiment": "grf", "seed": 1,
        "grid": [12, 12], "alpha": 1.0, "theta1": 4.0, "theta2": 4.0,
        "noise_var": 0.0001, "segmentation": {"count": 3},
        "inducing_count": 9, "timing_reps": 1,
    },
    "excess": {
        "schema": 1, "experiment": "excess-mse", "seed": 0,
        "kernel": {"family": "SquaredExponential",
                   "params": {"amplitude": 1.0, "lengthscale": 2.0},
                   "noise_var": 0.05},
        "n_train": 16, "n_test": 8, "max_test_points": 8,
    },
}

SWEEP_CONFIG = {
    "schema": 1, "experiment": "timeseries", "seed": 3,
    "kernel": PERIODIC_KERNEL,
    "mean": {"family": "Linear", "a": 0.001, "b": 0.0},
    "n_train": 96, "n_test": 8,
    "segmentation": {"size": [32, 48]}, "inducing_count": 0,
    "methods": ["GP", "CGP"], "timing_reps": 1,
}


@pytest.fixture(scope="session")
def fixture_runs(tmp_path_factory):
    """Run the primary CLI once per experiment; figures read only its files."""
    root = tmp_path_factory.mktemp("fixtures")
    dirs = {}
    for name, cfg in FIXTURE_CONFIGS.items():
        cfg_path = root / f"{name}.json"
        cfg_path.write_text(json.dumps(cfg))
        out_dir = root / name
        proc = subprocess.run(
            [sys.executable, "-m", "cgpkit.cli", "run", cfg["experiment"],
             "--config", str(cfg_path), "--out", str(out_dir)],
            capture_output=True,
        )
        assert proc.returncode == 0, proc.stderr.decode()
        dirs[name] = str(out_dir)
    sweep_cfg = root / "sweep.json"
    sweep_cfg.write_text(json.dumps(SWEEP_CONFIG))
    sweep_out = root / "sweep"
    proc = subprocess.run(
        [sys.executable, "-m", "cgpkit.cli", "sweep",
         "--config", str(sweep_cfg), "--out", str(sweep_out)],
        capture_output=True,
    )
    assert proc.returncode == 0, proc.stderr.decode()
    dirs["sweep"] = str(sweep_out)
    return dirs
