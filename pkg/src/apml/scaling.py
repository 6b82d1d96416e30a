"""Synthetic clouds and nnz / memory scaling sweeps."""

from __future__ import annotations

import csv
import io
import tracemalloc
from dataclasses import asdict, dataclass, field

import numpy as np

from .memory import memory_estimate
from .sparse import sparse_apml_loss
from .types import ApmlConfig, PointCloud, default_config

DISTRIBUTIONS = ("unit_cube_uniform", "gaussian_pair")
CSV_HEADER = ["n", "trial", "seed", "nnz", "plan_bytes", "aux_bytes",
              "dense_bytes", "reduction_ratio", "loss"]


def generate_pair(n: int, d: int = 3, seed: int = 0, dist: str = "unit_cube_uniform",
                  m: int | None = None, noise: float = 0.01) -> tuple[PointCloud, PointCloud]:
    """Seeded ``(X, Y)`` pair.

    ``unit_cube_uniform`` draws both clouds independently in ``[0, 1)^d``.
    ``gaussian_pair`` draws ``X`` from a standard normal and sets
    ``Y = X + noise * N(0, 1)`` (requires ``m == n``).
    """
    m = n if m is None else m
    if n < 1 or m < 1 or d < 1:
        raise ValueError("n, m and d must be positive")
    rng = np.random.default_rng(seed)
    if dist == "unit_cube_uniform":
        x = rng.random((n, d))
        y = rng.random((m, d))
    elif dist == "gaussian_pair":
        if m != n:
            raise ValueError("gaussian_pair needs m == n")
        x = rng.standard_normal((n, d))
        y = x + noise * rng.standard_normal((n, d))
    else:
        raise ValueError(f"unknown distribution {dist!r}; expected one of {DISTRIBUTIONS}")
    return PointCloud(x), PointCloud(y)


def generate_cloud(n: int, d: int = 3, seed: int = 0,
                   dist: str = "unit_cube_uniform") -> PointCloud:
    """Single seeded cloud; for ``gaussian_pair`` this is the ``X`` side."""
    return generate_pair(n, d, seed, dist)[0]


def trial_seed(seed: int, n: int, trial: int) -> int:
    return int(np.random.SeedSequence([seed, n, trial]).generate_state(1)[0])


@dataclass
class TrialRecord:
    n: int
    trial: int
    seed: int
    nnz: int
    plan_bytes: int
    aux_bytes: int
    dense_bytes: int
    reduction_ratio: float
    loss: float


@dataclass
class ScalingRecord:
    n: int
    trials: int
    nnz_mean: float
    nnz_std: float
    sparse_bytes_mean: float
    dense_bytes: int
    seed: int
    reduction_ratio: float
    peak_traced_bytes: int | None = None
    rows: list = field(default_factory=list, repr=False)


def run_trial(n: int, trial: int, seed: int, cfg: ApmlConfig, d: int = 3,
              dist: str = "unit_cube_uniform") -> TrialRecord:
    s = trial_seed(seed, n, trial)
    x, y = generate_pair(n, d, s, dist)
    res = sparse_apml_loss(x, y, cfg)
    est = memory_estimate(res.nnz, n, n)
    return TrialRecord(n, trial, s, res.nnz, est.sparse_plan_bytes, est.sparse_aux_bytes,
                       est.dense_bytes, est.reduction_ratio, res.loss)


def nnz_scaling_sweep(n_values, trials: int = 50, cfg: ApmlConfig | None = None,
                      seed: int = 0, d: int = 3, dist: str = "unit_cube_uniform",
                      measure_memory: bool = False, progress=None) -> list[ScalingRecord]:
    """nnz and modeled memory per point count, ``M = N``, over seeded trials.

    ``measure_memory`` records the tracemalloc peak of each trial. It sees
    NumPy allocations only (kernel scratch is invisible to it) and is
    reported for reference, not used by any check.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    cfg = cfg or default_config()
    records = []
    for n in n_values:
        rows = []
        peak = 0
        for t in range(trials):
            if measure_memory:
                tracemalloc.start()
            rows.append(run_trial(n, t, seed, cfg, d, dist))
            if measure_memory:
                peak = max(peak, tracemalloc.get_traced_memory()[1])
                tracemalloc.stop()
            if progress:
                progress(rows[-1])
        nnz = np.array([r.nnz for r in rows], dtype=np.float64)
        sparse = np.array([r.plan_bytes + r.aux_bytes for r in rows], dtype=np.float64)
        nnz_mean = float(nnz.mean())
        est = memory_estimate(int(round(nnz_mean)), n, n)
        records.append(ScalingRecord(
            n=n, trials=trials, nnz_mean=nnz_mean, nnz_std=float(nnz.std()),
            sparse_bytes_mean=float(sparse.mean()), dense_bytes=est.dense_bytes,
            seed=seed, reduction_ratio=1.0 - float(sparse.mean()) / est.dense_bytes,
            peak_traced_bytes=peak if measure_memory else None, rows=rows))
    return records


def loglog_slope(records) -> float:
    """Least-squares slope of ``log(nnz_mean)`` against ``log(n)``."""
    n = np.array([r.n for r in records], dtype=np.float64)
    nnz = np.array([r.nnz_mean for r in records])
    return float(np.polyfit(np.log(n), np.log(nnz), 1)[0])


def records_to_csv(records, fh=None) -> str | None:
    """Write one CSV row per trial; returns the text when ``fh`` is None."""
    out = io.StringIO() if fh is None else fh
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for rec in records:
        for row in rec.rows:
            vals = asdict(row)
            writer.writerow([repr(vals[k]) if isinstance(vals[k], float) else vals[k]
                             for k in CSV_HEADER])
    return out.getvalue() if fh is None else None


def read_csv(fh) -> list[TrialRecord]:
    reader = csv.DictReader(fh)
    if reader.fieldnames != CSV_HEADER:
        raise ValueError(f"unexpected CSV header {reader.fieldnames}")
    out = []
    for row in reader:
        out.append(TrialRecord(
            n=int(row["n"]), trial=int(row["trial"]), seed=int(row["seed"]),
            nnz=int(row["nnz"]), plan_bytes=int(row["plan_bytes"]),
            aux_bytes=int(row["aux_bytes"]), dense_bytes=int(row["dense_bytes"]),
            reduction_ratio=float(row["reduction_ratio"]), loss=float(row["loss"])))
    return out
