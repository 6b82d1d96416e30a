"""Sparse APML on COO support.

Pipeline for one pair of clouds:

1. build a row-direction and a column-direction COO stream, each in two
   passes (count kept entries, exclusive prefix sum, rescan and write);
2. merge both streams by 64-bit key ``i * M + j``, averaging duplicates;
3. run Sinkhorn scaling on the merged support;
4. sum ``v_t * ||x_i - y_j||`` over the stored pairs.

No ``N x M`` array is allocated at any stage.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .dense import temperature_numerator
from .memory import memory_estimate
from .types import (
    ApmlConfig,
    BatchShapeMismatch,
    CooPlan,
    KeyOverflow,
    LossResult,
    PointCloud,
    Reduction,
    StabilityMode,
    TauTooLarge,
    default_config,
    validate_pair,
)

_MAX_INDEX = 2**31 - 1
_MAX_KEY = 2**63


@dataclass(frozen=True)
class DirectionalCoo:
    """Softmax plan for one direction, normalized over each line's kept support.

    For ``direction == "row"`` a line is a row ``i`` of the plan, otherwise a
    column ``j``. The per-line arrays (``c_min``, ``temp``, ``argmin``,
    ``second_argmin``, ``degenerate``) are indexed by line and are kept for
    the backward pass.
    """

    plan: CooPlan
    direction: str
    clamped: int
    c_min: np.ndarray = field(repr=False, default=None)
    temp: np.ndarray = field(repr=False, default=None)
    argmin: np.ndarray = field(repr=False, default=None)
    second_argmin: np.ndarray = field(repr=False, default=None)
    degenerate: np.ndarray = field(repr=False, default=None)

    def line_index(self) -> np.ndarray:
        return self.plan.rows if self.direction == "row" else self.plan.cols

    def other_index(self) -> np.ndarray:
        return self.plan.cols if self.direction == "row" else self.plan.rows

    def line_sums(self) -> np.ndarray:
        return self.plan.row_sums() if self.direction == "row" else self.plan.col_sums()


def _check_sizes(n: int, m: int):
    if n > _MAX_INDEX or m > _MAX_INDEX:
        raise KeyOverflow(f"cloud sizes ({n}, {m}) exceed 32-bit indices")
    if n * m >= _MAX_KEY:
        raise KeyOverflow(f"key space n*m = {n * m} exceeds 64 bits")


def exclusive_scan(counts: np.ndarray) -> np.ndarray:
    """Exclusive prefix sum with the grand total appended (length ``len(counts) + 1``)."""
    offsets = np.zeros(len(counts) + 1, dtype=np.int64)
    np.cumsum(counts, out=offsets[1:])
    return offsets


def build_directional_coo(x, y, direction: str = "row",
                          cfg: ApmlConfig | None = None) -> DirectionalCoo:
    """Adaptive softmax along one direction, thresholded at ``cfg.tau``.

    Each line keeps the entries whose unnormalized similarity
    ``exp(-T (C_ij - C_min))`` is at least ``tau`` and is renormalized over
    them. The argmin has similarity 1, so every line keeps at least one entry.
    """
    cfg = cfg or default_config()
    x, y = validate_pair(x, y)
    if cfg.tau > 1.0:
        raise TauTooLarge(f"tau={cfg.tau} > 1 would prune the argmin of every line")
    _check_sizes(x.n, y.n)
    if direction == "row":
        a, b = x.points, y.points
    elif direction == "col":
        a, b = y.points, x.points
    else:
        raise ValueError(f"direction must be 'row' or 'col', got {direction!r}")
    k = b.shape[0]
    uniform = cfg.stability_mode is StabilityMode.UNIFORM_FALLBACK
    log_num = float(temperature_numerator(k, cfg.p_min)) if k > 1 else 0.0
    log_inv_tau = -np.log(cfg.tau) if cfg.tau > 0 else np.inf

    c_min, c_min_sq, temp, j1, j2, count, degenerate = _kernels.scan_lines(
        a, b, log_num, cfg.delta, cfg.eps_g, log_inv_tau, uniform)
    offsets = exclusive_scan(count)
    line_idx, other_idx, vals = _kernels.write_lines(
        a, b, c_min, c_min_sq, temp, offsets, degenerate, log_inv_tau, uniform)

    if direction == "row":
        plan = CooPlan(line_idx, other_idx, vals, x.n, y.n)
    else:
        plan = CooPlan(other_idx, line_idx, vals, x.n, y.n)
    return DirectionalCoo(plan, direction, int(degenerate.sum()),
                          c_min, temp, j1, j2, degenerate)


def _merge_keys(row_plan: CooPlan, col_plan: CooPlan):
    keys = np.concatenate([row_plan.keys(), col_plan.keys()])
    order = np.argsort(keys, kind="stable")
    sorted_keys = keys[order]
    is_new = np.empty(len(keys), dtype=bool)
    is_new[:1] = True
    np.not_equal(sorted_keys[1:], sorted_keys[:-1], out=is_new[1:])
    starts = np.flatnonzero(is_new)
    inverse = np.empty(len(keys), dtype=np.int64)
    inverse[order] = np.cumsum(is_new) - 1
    return sorted_keys[starts], order, starts, inverse


def symmetrize(row_coo, col_coo, return_inverse: bool = False):
    """Union of both supports with value ``(v_row + v_col) / 2``.

    An entry present in only one stream is halved, which matches the dense
    average ``(P_row + P_col) / 2``. The result is sorted by key with no
    duplicates. With ``return_inverse`` the map from each concatenated
    stream entry to its merged position is also returned.
    """
    row_plan = getattr(row_coo, "plan", row_coo)
    col_plan = getattr(col_coo, "plan", col_coo)
    if row_plan.shape != col_plan.shape:
        raise ValueError(f"shape mismatch: {row_plan.shape} vs {col_plan.shape}")
    n, m = row_plan.shape
    _check_sizes(n, m)
    merged_keys, order, starts, inverse = _merge_keys(row_plan, col_plan)
    vals = np.concatenate([row_plan.vals, col_plan.vals])[order]
    merged_vals = 0.5 * np.add.reduceat(vals, starts) if len(vals) else vals
    m64 = np.uint64(m)
    plan = CooPlan((merged_keys // m64).astype(np.int64),
                   (merged_keys % m64).astype(np.int64),
                   merged_vals, n, m)
    return (plan, inverse) if return_inverse else plan


def _scale_step(rows, cols, v, n, m, eps_stab):
    col_den = np.bincount(cols, weights=v, minlength=m) + eps_stab
    half = v / col_den[cols]
    row_den = np.bincount(rows, weights=half, minlength=n) + eps_stab
    return half, half / row_den[rows], col_den, row_den


def sparse_sinkhorn(plan: CooPlan, l_iter: int, eps_stab: float,
                    history: bool = False):
    """Column-then-row scaling on the stored support, ``l_iter`` times.

    Sums are accumulated into length-``M`` and length-``N`` buffers in
    storage order, so the result does not depend on the thread count.
    """
    rows = plan.rows.astype(np.intp)
    cols = plan.cols.astype(np.intp)
    v = plan.vals
    steps = []
    for _ in range(l_iter):
        half, new, col_den, row_den = _scale_step(rows, cols, v, plan.n, plan.m, eps_stab)
        if history:
            steps.append((v, half, col_den, row_den))
        v = new
    out = plan.with_vals(v)
    return (out, steps) if history else out


def pair_distances(x: PointCloud, y: PointCloud, rows, cols) -> np.ndarray:
    diff = x.points[rows] - y.points[cols]
    return np.sqrt(np.sum(diff * diff, axis=1))


@dataclass
class SparseTrace:
    """Everything the forward pass produced; consumed by :mod:`apml.gradients`."""

    x: PointCloud
    y: PointCloud
    cfg: ApmlConfig
    row: DirectionalCoo
    col: DirectionalCoo
    p0: CooPlan
    inverse: np.ndarray
    steps: list
    plan: CooPlan
    dists: np.ndarray
    loss: float


def sparse_forward(x, y, cfg: ApmlConfig | None = None, keep_history: bool = False) -> SparseTrace:
    cfg = cfg or default_config()
    x, y = validate_pair(x, y)
    row = build_directional_coo(x, y, "row", cfg)
    col = build_directional_coo(x, y, "col", cfg)
    p0, inverse = symmetrize(row, col, return_inverse=True)
    result = sparse_sinkhorn(p0, cfg.l_iter, cfg.eps_stab, history=keep_history)
    plan, steps = result if keep_history else (result, [])
    dists = pair_distances(x, y, plan.rows, plan.cols)
    loss = float(np.sum(plan.vals * dists))
    return SparseTrace(x, y, cfg, row, col, p0, inverse, steps, plan, dists, loss)


def _result_from_trace(tr: SparseTrace) -> LossResult:
    est = memory_estimate(tr.plan.nnz, tr.x.n, tr.y.n)
    return LossResult(
        loss=tr.loss,
        nnz=tr.plan.nnz,
        clamp_count=tr.row.clamped + tr.col.clamped,
        bytes_plan=est.sparse_plan_bytes,
        bytes_peak_estimate=est.sparse_bytes,
        extras={"plan": tr.plan, "dense_bytes": est.dense_bytes,
                "aux_bytes": est.sparse_aux_bytes,
                "reduction_ratio": est.reduction_ratio},
    )


def sparse_apml_loss(x, y, cfg: ApmlConfig | None = None) -> LossResult:
    """APML loss evaluated only on the thresholded COO support."""
    return _result_from_trace(sparse_forward(x, y, cfg))


def apml_loss_batch(xs, ys, cfg: ApmlConfig | None = None) -> LossResult:
    """Loss over ``B`` independent pairs, combined per ``cfg.reduction``.

    ``bytes_peak_estimate`` assumes all pairs are resident at once, i.e. the
    largest per-pair estimate times ``B``.
    """
    cfg = cfg or default_config()
    xs, ys = list(xs), list(ys)
    if len(xs) != len(ys) or not xs:
        raise BatchShapeMismatch(f"batch sizes differ or are empty: {len(xs)} vs {len(ys)}")
    results = [sparse_apml_loss(x, y, cfg) for x, y in zip(xs, ys)]
    losses = np.array([r.loss for r in results])
    total = float(np.sum(losses))
    if cfg.reduction is Reduction.MEAN_OVER_BATCH:
        total /= len(results)
    return LossResult(
        loss=total,
        nnz=sum(r.nnz for r in results),
        clamp_count=sum(r.clamp_count for r in results),
        bytes_plan=sum(r.bytes_plan for r in results),
        bytes_peak_estimate=max(r.bytes_peak_estimate for r in results) * len(results),
        extras={"losses": losses},
    )
