"""Synthetic data generation and CSV ingestion.

Series and random-field draws come straight from the model prior via a
jittered Cholesky of the full Gram matrix, which is exact and feasible at
desk scale (a few thousand points); no spectral embedding tricks. The CSV
pipeline handles the skewed-measurement case by an optional log transform
with non-positive rows dropped and counted.
"""

from __future__ import annotations

import csv
import datetime
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptySeries, InvalidInput, InvalidTransform, ParseError
from .exact import DataSegment, GaussianBelief
from .kernels import KernelSpec, MeanSpec, cov_matrix, mean_vector
from .psd import cholesky_jittered
from .rng import make_rng


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a synthetic run needs; the seed is mandatory."""

    kernel: KernelSpec
    mean: MeanSpec
    n_train: int
    n_test: int
    segmentation: dict
    seed: int
    inducing_count: int = 0
    spacing: float = 1.0
    paths: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.seed is None:
            raise InvalidInput("a seed is mandatory")
        if self.n_train < 1 or self.n_test < 0:
            raise InvalidInput("n_train must be >= 1 and n_test >= 0")
        keys = set(self.segmentation)
        if keys not in ({"count"}, {"size"}):
            raise InvalidInput("segmentation must be {'count': K} or {'size': N_k}")


def segment_bounds(n: int, segmentation: dict) -> list:
    """Contiguous segment slices; the last segment may be short."""
    if "count" in segmentation:
        k = int(segmentation["count"])
        if not 1 <= k <= n:
            raise InvalidInput(f"segment count {k} out of range for {n} points")
        edges = np.linspace(0, n, k + 1).round().astype(int)
    else:
        size = int(segmentation["size"])
        if size < 1:
            raise InvalidInput(f"segment size must be positive, got {size}")
        edges = np.arange(0, n + size, size)
        edges[-1] = min(edges[-1], n)
        edges = np.unique(edges)
    return [slice(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:])]


def split_segments(x: np.ndarray, y: np.ndarray, segmentation: dict) -> list:
    return [DataSegment(x[sl], y[sl]) for sl in segment_bounds(len(y), segmentation)]


@dataclass(frozen=True)
class TimeSeries:
    """Observations indexed by strictly increasing timestamps."""

    t: np.ndarray
    y: np.ndarray
    transform: str = "None"

    def __post_init__(self):
        t = np.atleast_1d(np.asarray(self.t, dtype=float))
        y = np.atleast_1d(np.asarray(self.y, dtype=float))
        if t.size != y.size or t.size == 0:
            raise InvalidInput(f"series needs matching nonempty t/y, got {t.size}/{y.size}")
        if np.any(np.diff(t) <= 0):
            raise InvalidInput("timestamps must be strictly increasing")
        if self.transform not in ("None", "Log"):
            raise InvalidTransform(f"unknown transform {self.transform!r}")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.t.size


@dataclass(frozen=True)
class SimulatedSeries:
    """One joint draw from the model, already split for prediction."""

    series: TimeSeries
    latent: np.ndarray
    n_train: int

    @property
    def train(self) -> DataSegment:
        return DataSegment(self.series.t[: self.n_train], self.series.y[: self.n_train])

    @property
    def test_t(self) -> np.ndarray:
        return self.series.t[self.n_train:]

    @property
    def test_y(self) -> np.ndarray:
        return self.series.y[self.n_train:]


def simulate_gp_series(config: ExperimentConfig) -> SimulatedSeries:
    """Draw one series from the GP prior plus i.i.d. observation noise."""
    n = config.n_train + config.n_test
    t = np.arange(n, dtype=float) * config.spacing
    pts = t.reshape(-1, 1)
    k = cov_matrix(config.kernel, pts)
    lower, _ = cholesky_jittered(k)
    rng = make_rng(config.seed)
    latent = mean_vector(config.mean, pts) + lower @ rng.standard_normal(n)
    noise_sd = math.sqrt(config.kernel.params.noise_var)
    y = latent + noise_sd * rng.standard_normal(n)
    return SimulatedSeries(series=TimeSeries(t, y), latent=latent, n_train=config.n_train)


@dataclass(frozen=True)
class GrfSample:
    """A random-field draw on a grid with a held-out rectangular block."""

    shape: tuple
    X: np.ndarray          # (rows*cols, 2) grid coordinates, row-major
    values: np.ndarray     # latent field values
    y: np.ndarray          # field plus observation noise
    test_mask: np.ndarray  # True on the held-out block

    @property
    def train(self) -> DataSegment:
        keep = ~self.test_mask
        return DataSegment(self.X[keep], self.y[keep])

    @property
    def test_X(self) -> np.ndarray:
        return self.X[self.test_mask]

    @property
    def test_y(self) -> np.ndarray:
        return self.y[self.test_mask]


def grf_test_mask(shape: tuple) -> np.ndarray:
    """Centered axis-aligned block of rows/4 x cols/2 cells (512 on 64x64)."""
    rows, cols = shape
    br = max(rows // 4, 1)
    bc = max(cols // 2, 1)
    r0 = (rows - br) // 2
    c0 = (cols - bc) // 2
    mask = np.zeros(shape, dtype=bool)
    mask[r0:r0 + br, c0:c0 + bc] = True
    return mask.ravel()


def simulate_grf(grid: tuple, alpha: float, theta1: float, theta2: float,
                 seed: int, noise_var: float = 1e-4) -> GrfSample:
    """One 2-D field draw on a row-major grid of up to 64x64 cells."""
    rows, cols = int(grid[0]), int(grid[1])
    if rows < 1 or cols < 1 or rows * cols > 64 * 64:
        raise InvalidInput(f"grid {grid} outside the supported range (<= 64x64)")
    spec = KernelSpec.from_natural(
        "SE2D-ARD",
        {"amplitude": alpha, "lengthscale_x1": theta1, "lengthscale_x2": theta2},
        noise_var,
    )
    g1, g2 = np.meshgrid(np.arange(rows, dtype=float), np.arange(cols, dtype=float),
                         indexing="ij")
    x = np.column_stack([g1.ravel(), g2.ravel()])
    k = cov_matrix(spec, x)
    lower, _ = cholesky_jittered(k)
    rng = make_rng(seed)
    values = lower @ rng.standard_normal(rows * cols)
    y = values + math.sqrt(noise_var) * rng.standard_normal(rows * cols)
    return GrfSample(shape=(rows, cols), X=x, values=values, y=y,
                     test_mask=grf_test_mask((rows, cols)))


# ---------------------------------------------------------------------------
# CSV ingestion, export, and the log-transform pipeline.

def _parse_timestamp(token: str, line_no: int) -> float:
    token = token.strip()
    try:
        return float(token)
    except ValueError:
        pass
    try:
        dt = datetime.datetime.fromisoformat(token)
    except ValueError as exc:
        raise ParseError(f"unparseable timestamp {token!r}", line=line_no) from exc
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=datetime.timezone.utc)
    return dt.timestamp() / 3600.0  # fractional hours


def ingest_csv(path, timestamp_column: str, value_column: str,
               transform: str = "None"):
    """Read an ordered series from a headered CSV file.

    Returns ``(series, dropped)`` where ``dropped`` counts rows removed for
    missing values, or for non-positive values under the Log transform.
    ISO-8601 timestamps are converted to hours; numeric timestamps pass
    through unchanged.
    """
    if transform not in ("None", "Log"):
        raise InvalidTransform(f"unknown transform {transform!r}")
    rows = []
    dropped = 0
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ParseError("missing header row", line=1)
        for col in (timestamp_column, value_column):
            if col not in reader.fieldnames:
                raise ParseError(f"missing column {col!r} in header", line=1)
        for line_no, row in enumerate(reader, start=2):
            t_tok = row.get(timestamp_column)
            v_tok = row.get(value_column)
            if t_tok is None or v_tok is None or t_tok.strip() == "" or v_tok.strip() == "":
                dropped += 1
                continue
            t = _parse_timestamp(t_tok, line_no)
            try:
                v = float(v_tok)
            except ValueError as exc:
                raise ParseError(f"unparseable value {v_tok!r}", line=line_no) from exc
            if math.isnan(v):
                dropped += 1
                continue
            if transform == "Log" and v <= 0:
                dropped += 1
                continue
            rows.append((t, v))
    if not rows:
        raise EmptySeries(f"no usable rows in {path}")
    rows.sort(key=lambda r: r[0])
    t = np.array([r[0] for r in rows])
    v = np.array([r[1] for r in rows])
    if np.any(np.diff(t) <= 0):
        raise ParseError("duplicate timestamps after sorting")
    if transform == "Log":
        v = np.log(v)
    return TimeSeries(t, v, transform=transform), dropped


def _format_number(x: float) -> str:
    if float(x).is_integer() and abs(x) < 1e15:
        return str(int(x))
    return format(float(x), ".12g")


def write_csv(series: TimeSeries, path, timestamp_column: str = "t",
              value_column: str = "value") -> None:
    """Write a series back out; values under Log are exponentiated first."""
    y = np.exp(series.y) if series.transform == "Log" else series.y
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([timestamp_column, value_column])
        for t, v in zip(series.t, y):
            writer.writerow([_format_number(t), _format_number(v)])


def write_sidecar(path, config: dict) -> None:
    """Record the generating config and seed next to a dataset."""
    with open(path, "w") as fh:
        json.dump(config, fh, indent=2, sort_keys=True)
        fh.write("\n")


def back_transform(belief: GaussianBelief, transform: str):
    """Per-point median and central 95% interval on the original scale.

    Only the Log transform is supported: the posterior is log-normal, so
    the median is exp(mean) and the interval endpoints are
    exp(mean +/- 1.96 sd).
    """
    if transform != "Log":
        raise InvalidTransform(f"back_transform requires Log, got {transform!r}")
    sd = np.sqrt(np.maximum(belief.variances(), 0.0))
    median = np.exp(belief.mean)
    lo = np.exp(belief.mean - 1.96 * sd)
    hi = np.exp(belief.mean + 1.96 * sd)
    return median, lo, hi
