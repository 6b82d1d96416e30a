"""Gradients of the sparse APML loss with respect to both point clouds.

Two modes:

* ``plan_detached`` holds the transport weights fixed and differentiates
  only the weighted distance sum.
* ``full`` additionally differentiates the weights: Sinkhorn scalings,
  duplicate averaging, per-line normalization, the adaptive temperature
  (through the gap) and the minimum shift. Argmin / second-argmin choices
  and the pruning mask are frozen at their forward values.

The backward pass is written by hand over the same COO arrays the forward
pass produced; no dense ``N x M`` intermediate is created.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .sparse import (
    DirectionalCoo,
    SparseTrace,
    _result_from_trace,
    pair_distances,
    sparse_apml_loss,
    sparse_forward,
)
from .types import (
    ApmlConfig,
    CooPlan,
    GradMode,
    LossResult,
    StabilityMode,
    default_config,
    validate_pair,
)


@dataclass
class GradPair:
    dx: np.ndarray
    dy: np.ndarray

    def flat(self) -> np.ndarray:
        return np.concatenate([self.dx.ravel(), self.dy.ravel()])


def _segment_sum(index, weights, length):
    return np.bincount(index, weights=weights, minlength=length)


def _scatter_pairs(x, y, rows, cols, gd, eps_dist) -> GradPair:
    """Turn per-pair distance cotangents into point gradients.

    Uses ``(x_i - y_j) / (||x_i - y_j|| + eps_dist)`` for the distance
    derivative, so coincident points contribute zero.
    """
    diff = x.points[rows] - y.points[cols]
    dist = np.sqrt(np.sum(diff * diff, axis=1))
    w = (gd / (dist + eps_dist))[:, None] * diff
    dx = np.empty_like(x.points)
    dy = np.empty_like(y.points)
    for c in range(x.d):
        dx[:, c] = _segment_sum(rows, w[:, c], x.n)
        dy[:, c] = -_segment_sum(cols, w[:, c], y.n)
    return GradPair(dx, dy)


def grad_plan_detached(x, y, plan: CooPlan, cfg: ApmlConfig | None = None) -> GradPair:
    """Gradient of ``sum_t v_t ||x_i - y_j||`` with the weights ``v`` held fixed."""
    cfg = cfg or default_config()
    x, y = validate_pair(x, y)
    rows = plan.rows.astype(np.intp)
    cols = plan.cols.astype(np.intp)
    return _scatter_pairs(x, y, rows, cols, plan.vals, cfg.eps_dist)


def _sinkhorn_backward(plan: CooPlan, steps, g):
    rows = plan.rows.astype(np.intp)
    cols = plan.cols.astype(np.intp)
    for v_in, half, col_den, row_den in reversed(steps):
        out = half / row_den[rows]
        g_half = (g - _segment_sum(rows, g * out, plan.n)[rows]) / row_den[rows]
        g = (g_half - _segment_sum(cols, g_half * half, plan.m)[cols]) / col_den[cols]
    return g


def _softmax_backward(x, y, dcoo: DirectionalCoo, g, cfg: ApmlConfig):
    """Distance cotangents ``(rows, cols, gd)`` for one directional softmax."""
    line = dcoo.line_index().astype(np.intp)
    other = dcoo.other_index().astype(np.intp)
    n_lines = len(dcoo.c_min)
    k = dcoo.plan.m if dcoo.direction == "row" else dcoo.plan.n
    if k == 1:
        return []
    p = dcoo.plan.vals
    # degenerate lines are uniform (constant) or have a clamped, constant gap
    if cfg.stability_mode is StabilityMode.UNIFORM_FALLBACK:
        active = ~dcoo.degenerate
    else:
        active = np.ones(n_lines, dtype=bool)

    if dcoo.direction == "row":
        rows, cols = line, other
    else:
        rows, cols = other, line
    d = pair_distances(x, y, rows, cols)
    temp = dcoo.temp[line]
    u = d - dcoo.c_min[line]
    centered = g - _segment_sum(line, g * p, n_lines)[line]
    gu = np.where(active[line], -temp * p * centered, 0.0)
    g_temp = _segment_sum(line, np.where(active[line], -u * p * centered, 0.0), n_lines)

    # argmin distance enters through the shift of every kept entry
    g_min = -_segment_sum(line, gu, n_lines)

    idx = np.arange(n_lines)
    first = dcoo.argmin.astype(np.intp)
    second = dcoo.second_argmin.astype(np.intp)
    if dcoo.direction == "row":
        d2 = pair_distances(x, y, idx, second)
    else:
        d2 = pair_distances(x, y, second, idx)
    gap = d2 - dcoo.c_min + cfg.delta
    free_gap = active & ~dcoo.degenerate
    g_gap = np.where(free_gap, -g_temp * dcoo.temp / np.where(free_gap, gap, 1.0), 0.0)
    g_first = g_min - g_gap

    if dcoo.direction == "row":
        extra_rows = np.concatenate([idx, idx])
        extra_cols = np.concatenate([first, second])
    else:
        extra_rows = np.concatenate([first, second])
        extra_cols = np.concatenate([idx, idx])
    return [(rows, cols, gu), (extra_rows, extra_cols, np.concatenate([g_first, g_gap]))]


def backward(tr: SparseTrace) -> GradPair:
    """Full reverse pass over a trace produced with ``keep_history=True``."""
    cfg = tr.cfg
    x, y = tr.x, tr.y
    plan = tr.plan
    pieces = [(plan.rows.astype(np.intp), plan.cols.astype(np.intp), plan.vals)]

    g = _sinkhorn_backward(tr.p0, tr.steps, tr.dists)
    g_stream = 0.5 * g[tr.inverse]
    n_row = tr.row.plan.nnz
    pieces += _softmax_backward(x, y, tr.row, g_stream[:n_row], cfg)
    pieces += _softmax_backward(x, y, tr.col, g_stream[n_row:], cfg)

    rows = np.concatenate([r for r, _, _ in pieces])
    cols = np.concatenate([c for _, c, _ in pieces])
    gd = np.concatenate([v for _, _, v in pieces])
    return _scatter_pairs(x, y, rows, cols, gd, cfg.eps_dist)


def grad_full(x, y, cfg: ApmlConfig | None = None) -> tuple[LossResult, GradPair]:
    """Loss and gradient; honours ``cfg.grad_mode``."""
    cfg = cfg or default_config()
    detached = cfg.grad_mode is GradMode.PLAN_DETACHED
    tr = sparse_forward(x, y, cfg, keep_history=not detached)
    if detached:
        grads = grad_plan_detached(tr.x, tr.y, tr.plan, cfg)
    else:
        grads = backward(tr)
    return _result_from_trace(tr), grads


def _structure(x, y, cfg):
    tr = sparse_forward(x, y, cfg)
    return (tr.row.argmin.tobytes(), tr.row.second_argmin.tobytes(),
            tr.col.argmin.tobytes(), tr.col.second_argmin.tobytes(),
            tr.plan.keys().tobytes())


def finite_difference_oracle(x, y, cfg: ApmlConfig | None = None, h: float = 1e-5,
                             return_kinks: bool = False):
    """Central differences of :func:`sparse_apml_loss` in every coordinate.

    With ``return_kinks`` also returns a boolean ``GradPair``-shaped mask that
    marks coordinates whose stencil ``[-h, +h]`` changes a min/second-min
    selection or the pruned support; the loss is only piecewise smooth there.
    """
    cfg = cfg or default_config()
    x, y = validate_pair(x, y)
    if not h > 0:
        raise ValueError("h must be positive")
    base = _structure(x, y, cfg) if return_kinks else None
    out = []
    kinks = []
    for which in (0, 1):
        pts = (x, y)[which].points
        g = np.zeros_like(pts)
        kink = np.zeros(pts.shape, dtype=bool)
        for i in range(pts.shape[0]):
            for c in range(pts.shape[1]):
                vals = []
                for sign in (1.0, -1.0):
                    moved = pts.copy()
                    moved[i, c] += sign * h
                    xa, ya = (moved, y.points) if which == 0 else (x.points, moved)
                    vals.append(sparse_apml_loss(xa, ya, cfg).loss)
                    if return_kinks and _structure(xa, ya, cfg) != base:
                        kink[i, c] = True
                g[i, c] = (vals[0] - vals[1]) / (2.0 * h)
        out.append(g)
        kinks.append(kink)
    grads = GradPair(out[0], out[1])
    return (grads, GradPair(kinks[0], kinks[1])) if return_kinks else grads


def max_relative_error(analytic: GradPair, numeric: GradPair, exclude: GradPair | None = None) -> float:
    """``max |a - n| / max |n|`` over the coordinates not excluded."""
    a = analytic.flat()
    n = numeric.flat()
    if exclude is not None:
        keep = ~exclude.flat()
        a, n = a[keep], n[keep]
    if a.size == 0:
        return 0.0
    scale = np.max(np.abs(n))
    err = np.max(np.abs(a - n))
    return float(err / scale) if scale > 0 else float(err)
