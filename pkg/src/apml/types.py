"""Domain types and configuration shared by the dense and sparse backends."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np


class ApmlError(ValueError):
    """Base class for input and configuration errors."""


class DimensionMismatch(ApmlError):
    pass


class NonFiniteInput(ApmlError):
    pass


class EmptyCloud(ApmlError):
    pass


class InvalidConfig(ApmlError):
    pass


class InvalidPlan(ApmlError):
    pass


class TauTooLarge(ApmlError):
    pass


class KeyOverflow(ApmlError):
    pass


class BatchShapeMismatch(ApmlError):
    pass


class StabilityMode(str, Enum):
    UNIFORM_FALLBACK = "uniform_fallback"
    GAP_CLAMP = "gap_clamp"


class GradMode(str, Enum):
    FULL = "full"
    PLAN_DETACHED = "plan_detached"


class Reduction(str, Enum):
    SUM = "sum"
    MEAN_OVER_BATCH = "mean_over_batch"


@dataclass(frozen=True)
class PointCloud:
    """An ordered set of ``n`` points in ``d`` dimensions (float64)."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.array(self.points, dtype=np.float64, copy=True)
        if pts.ndim == 1:
            pts = pts.reshape(1, -1) if pts.size else pts.reshape(0, 0)
        if pts.ndim != 2:
            raise DimensionMismatch(f"points must be 2-D, got shape {pts.shape}")
        if pts.shape[0] == 0:
            raise EmptyCloud("point cloud has no points")
        if pts.shape[1] == 0:
            raise DimensionMismatch("points must have at least one coordinate")
        if not np.all(np.isfinite(pts)):
            raise NonFiniteInput("point cloud contains NaN or Inf")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return self.n


def as_cloud(x) -> PointCloud:
    return x if isinstance(x, PointCloud) else PointCloud(x)


@dataclass(frozen=True)
class ApmlConfig:
    """Scalar hyperparameters of the matching loss.

    ``p_min``, ``delta``, ``eps_g`` and ``eps_dist`` are library defaults
    rather than published values; ``tau``, ``l_iter`` and ``eps_stab``
    follow the published CUDA settings.
    """

    p_min: float = 0.9
    delta: float = 1e-6
    eps_g: float = 1e-8
    tau: float = 1e-8
    l_iter: int = 10
    eps_stab: float = 1e-8
    eps_dist: float = 1e-8
    stability_mode: StabilityMode = StabilityMode.GAP_CLAMP
    grad_mode: GradMode = GradMode.FULL
    reduction: Reduction = Reduction.SUM

    def __post_init__(self):
        object.__setattr__(self, "stability_mode", StabilityMode(self.stability_mode))
        object.__setattr__(self, "grad_mode", GradMode(self.grad_mode))
        object.__setattr__(self, "reduction", Reduction(self.reduction))
        if not 0.0 < self.p_min < 1.0:
            raise InvalidConfig(f"p_min must lie in (0, 1), got {self.p_min}")
        if not self.delta > 0:
            raise InvalidConfig(f"delta must be > 0, got {self.delta}")
        if not self.eps_g > 0:
            raise InvalidConfig(f"eps_g must be > 0, got {self.eps_g}")
        if not self.tau >= 0:
            raise InvalidConfig(f"tau must be >= 0, got {self.tau}")
        if int(self.l_iter) != self.l_iter or self.l_iter < 0:
            raise InvalidConfig(f"l_iter must be a non-negative integer, got {self.l_iter}")
        object.__setattr__(self, "l_iter", int(self.l_iter))
        if not self.eps_stab > 0:
            raise InvalidConfig(f"eps_stab must be > 0, got {self.eps_stab}")
        if not self.eps_dist > 0:
            raise InvalidConfig(f"eps_dist must be > 0, got {self.eps_dist}")

    def with_(self, **changes) -> "ApmlConfig":
        return replace(self, **changes)


def default_config() -> ApmlConfig:
    return ApmlConfig()


@dataclass(frozen=True)
class CooPlan:
    """Sparse transport plan stored as parallel ``(rows, cols, vals)`` arrays."""

    rows: np.ndarray
    cols: np.ndarray
    vals: np.ndarray
    n: int
    m: int

    def __post_init__(self):
        rows = np.asarray(self.rows)
        cols = np.asarray(self.cols)
        vals = np.asarray(self.vals, dtype=np.float64)
        if not (rows.ndim == cols.ndim == vals.ndim == 1):
            raise InvalidPlan("rows, cols and vals must be 1-D")
        if not (len(rows) == len(cols) == len(vals)):
            raise InvalidPlan(
                f"length mismatch: rows={len(rows)} cols={len(cols)} vals={len(vals)}"
            )
        if self.n < 1 or self.m < 1:
            raise InvalidPlan(f"plan shape must be positive, got ({self.n}, {self.m})")
        if len(rows):
            if rows.min() < 0 or rows.max() >= self.n:
                raise InvalidPlan("row index out of range")
            if cols.min() < 0 or cols.max() >= self.m:
                raise InvalidPlan("column index out of range")
            if not np.all(np.isfinite(vals)) or vals.min() < 0:
                raise InvalidPlan("values must be finite and non-negative")
        rows = rows.astype(np.int32)
        cols = cols.astype(np.int32)
        for a in (rows, cols, vals):
            a.setflags(write=False)
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "cols", cols)
        object.__setattr__(self, "vals", vals)

    @property
    def nnz(self) -> int:
        return len(self.vals)

    @property
    def shape(self) -> tuple[int, int]:
        return self.n, self.m

    def keys(self) -> np.ndarray:
        return self.rows.astype(np.uint64) * np.uint64(self.m) + self.cols.astype(np.uint64)

    def is_canonical(self) -> bool:
        """True when keys are strictly increasing (sorted, no duplicates)."""
        k = self.keys()
        return bool(np.all(k[1:] > k[:-1]))

    def with_vals(self, vals: np.ndarray) -> "CooPlan":
        return CooPlan(self.rows, self.cols, vals, self.n, self.m)

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.n, self.m))
        np.add.at(out, (self.rows, self.cols), self.vals)
        return out

    def row_sums(self) -> np.ndarray:
        return np.bincount(self.rows, weights=self.vals, minlength=self.n)

    def col_sums(self) -> np.ndarray:
        return np.bincount(self.cols, weights=self.vals, minlength=self.m)


@dataclass
class LossResult:
    loss: float
    nnz: int = 0
    clamp_count: int = 0
    bytes_plan: int = 0
    bytes_peak_estimate: int = 0
    extras: dict = field(default_factory=dict)


def validate_pair(x, y) -> tuple[PointCloud, PointCloud]:
    """Check that two clouds can be matched and return them as ``PointCloud``.

    Cardinalities may differ; the dimension must agree.
    """
    x = as_cloud(x)
    y = as_cloud(y)
    if x.d != y.d:
        raise DimensionMismatch(f"dimension mismatch: x has d={x.d}, y has d={y.d}")
    return x, y
