"""Byte-count model for dense and sparse plan storage.

The dense figure is the lower bound for holding the cost and plan as
float32 tensors. The sparse figure counts the COO plan (two int32 indices
and one float32 value per entry) plus the temporary buffers used while
building and normalizing it.
"""

from __future__ import annotations

from dataclasses import dataclass

INDEX_BYTES = 4
VALUE_BYTES = 4
KEY_BYTES = 8


@dataclass(frozen=True)
class MemoryEstimate:
    dense_bytes: int
    sparse_plan_bytes: int
    sparse_aux_bytes: int

    @property
    def sparse_bytes(self) -> int:
        return self.sparse_plan_bytes + self.sparse_aux_bytes

    @property
    def reduction_ratio(self) -> float:
        if self.dense_bytes <= 0:
            return 0.0
        return 1.0 - self.sparse_bytes / self.dense_bytes


def dense_memory_bytes(b: int, n: int, m: int) -> int:
    """``2 * 4 * b * n * m``: cost and plan in float32."""
    if b < 1 or n < 1 or m < 1:
        raise ValueError("dimensions must be positive")
    return 2 * VALUE_BYTES * b * n * m


def sparse_memory_bytes(nnz: int, n: int, m: int) -> tuple[int, int]:
    """Return ``(plan_bytes, aux_bytes)`` for a COO plan with ``nnz`` entries.

    aux covers one 64-bit sort key per entry of the two concatenated
    directional streams (bounded by ``2 * nnz``), the length-``n`` and
    length-``m`` Sinkhorn accumulators, and an equally sized scan workspace.
    """
    if nnz < 0:
        raise ValueError("nnz must be non-negative")
    plan = (2 * INDEX_BYTES + VALUE_BYTES) * nnz
    aux = KEY_BYTES * 2 * nnz + VALUE_BYTES * (n + m) + INDEX_BYTES * (n + m)
    return plan, aux


def memory_estimate(nnz: int, n: int, m: int) -> MemoryEstimate:
    """Dense vs sparse bytes for a single pair."""
    plan, aux = sparse_memory_bytes(nnz, n, m)
    return MemoryEstimate(dense_memory_bytes(1, n, m), plan, aux)
