"""Dense APML: materialized cost matrix and transport plan.

This backend is the correctness oracle for :mod:`apml.sparse`. It stores the
full ``N x M`` cost and plan, so it is only meant for small clouds.
"""

from __future__ import annotations

import numpy as np

from .memory import dense_memory_bytes
from .types import ApmlConfig, LossResult, StabilityMode, default_config, validate_pair


def pairwise_cost(x, y) -> np.ndarray:
    """Euclidean distance matrix ``C[i, j] = ||x_i - y_j||``."""
    x, y = validate_pair(x, y)
    diff = x.points[:, None, :] - y.points[None, :, :]
    return np.sqrt(np.sum(diff * diff, axis=-1))


def local_gap(costs, delta: float) -> tuple[float, float]:
    """Minimum of ``costs`` and the local gap (second-smallest shifted cost + delta).

    A duplicated minimum counts twice, so it yields a gap of ``delta``.
    """
    costs = np.asarray(costs, dtype=np.float64)
    c_min = float(costs.min())
    if costs.size < 2:
        return c_min, float(delta)
    second = float(np.partition(costs - c_min, 1)[1])
    return c_min, second + delta


def temperature_numerator(k, p_min: float):
    """``-log((1 - p_min) / ((k - 1) p_min))``, the gap-independent part of T."""
    return -np.log((1.0 - p_min) / ((np.asarray(k, dtype=np.float64) - 1.0) * p_min))


def adaptive_temperature(gap: float, k: int, p_min: float) -> float:
    """Softmax temperature giving the minimum-cost entry probability ``p_min``.

    Exact when every other shifted cost equals ``gap``. Returns zero or a
    negative value when ``p_min <= 1/k``; the caller uses it unchanged.
    """
    return float(temperature_numerator(k, p_min) / gap)


def _line_softmax(cost: np.ndarray, cfg: ApmlConfig) -> tuple[np.ndarray, int]:
    """Row-wise adaptive softmax of ``cost``; returns probabilities and the degenerate count."""
    n, k = cost.shape
    if k == 1:
        return np.ones_like(cost), 0
    c_min = cost.min(axis=1, keepdims=True)
    shifted = cost - c_min
    second = np.partition(shifted, 1, axis=1)[:, 1]
    gap = second + cfg.delta
    if cfg.stability_mode is StabilityMode.UNIFORM_FALLBACK:
        degenerate = second < cfg.eps_g
    else:
        degenerate = gap < cfg.eps_g
        gap = np.maximum(gap, cfg.eps_g)
    temp = temperature_numerator(k, cfg.p_min) / gap
    s = np.exp(-temp[:, None] * shifted)
    probs = s / s.sum(axis=1, keepdims=True)
    if cfg.stability_mode is StabilityMode.UNIFORM_FALLBACK and degenerate.any():
        probs[degenerate] = 1.0 / k
    return probs, int(degenerate.sum())


def directional_softmax(cost, axis: str = "row", cfg: ApmlConfig | None = None,
                        return_count: bool = False):
    """Adaptive-temperature softmax along rows (``axis="row"``) or columns.

    Each row (or column) of the result sums to one. Lines whose gap is
    degenerate are handled per ``cfg.stability_mode``.
    """
    cfg = cfg or default_config()
    cost = np.asarray(cost, dtype=np.float64)
    if axis == "row":
        probs, count = _line_softmax(cost, cfg)
    elif axis == "col":
        probs, count = _line_softmax(cost.T, cfg)
        probs = probs.T
    else:
        raise ValueError(f"axis must be 'row' or 'col', got {axis!r}")
    return (probs, count) if return_count else probs


def dense_sinkhorn(plan: np.ndarray, l_iter: int, eps_stab: float, history: bool = False):
    """Alternate column then row normalization for ``l_iter`` iterations."""
    p = np.array(plan, dtype=np.float64, copy=True)
    hist = [p.copy()] if history else None
    for _ in range(l_iter):
        p = p / (p.sum(axis=0, keepdims=True) + eps_stab)
        p = p / (p.sum(axis=1, keepdims=True) + eps_stab)
        if history:
            hist.append(p.copy())
    return (p, hist) if history else p


def dense_apml_plan(cost, cfg: ApmlConfig | None = None, return_count: bool = False):
    """Transport plan: average of both directional softmaxes, then Sinkhorn."""
    cfg = cfg or default_config()
    cost = np.asarray(cost, dtype=np.float64)
    p_row, n_row = directional_softmax(cost, "row", cfg, return_count=True)
    p_col, n_col = directional_softmax(cost, "col", cfg, return_count=True)
    p0 = 0.5 * (p_row + p_col)
    plan = dense_sinkhorn(p0, cfg.l_iter, cfg.eps_stab)
    return (plan, n_row + n_col) if return_count else plan


def dense_apml_loss(x, y, cfg: ApmlConfig | None = None) -> LossResult:
    """Frobenius inner product of the dense plan with the cost matrix."""
    cfg = cfg or default_config()
    x, y = validate_pair(x, y)
    cost = pairwise_cost(x, y)
    plan, clamped = dense_apml_plan(cost, cfg, return_count=True)
    loss = float(np.sum(plan * cost))
    dense_bytes = dense_memory_bytes(1, x.n, y.n)
    return LossResult(
        loss=loss,
        nnz=int(np.count_nonzero(plan)),
        clamp_count=clamped,
        bytes_plan=dense_bytes // 2,
        bytes_peak_estimate=dense_bytes,
        extras={"plan": plan, "cost": cost},
    )
