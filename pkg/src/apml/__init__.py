"""Adaptive probabilistic matching loss (APML) with a sparse COO backend.

``dense_apml_loss`` materializes the full cost and plan and serves as the
reference. ``sparse_apml_loss`` keeps only thresholded entries and never
allocates an ``N x M`` array.
"""

from ._kernels import set_threads
from .dense import (
    adaptive_temperature,
    dense_apml_loss,
    dense_apml_plan,
    dense_sinkhorn,
    directional_softmax,
    local_gap,
    pairwise_cost,
)
from .gradients import (
    GradPair,
    finite_difference_oracle,
    grad_full,
    grad_plan_detached,
    max_relative_error,
)
from .memory import MemoryEstimate, dense_memory_bytes, memory_estimate, sparse_memory_bytes
from .scaling import (
    ScalingRecord,
    generate_cloud,
    generate_pair,
    loglog_slope,
    nnz_scaling_sweep,
)
from .sparse import (
    DirectionalCoo,
    apml_loss_batch,
    build_directional_coo,
    sparse_apml_loss,
    sparse_sinkhorn,
    symmetrize,
)
from .types import (
    ApmlConfig,
    ApmlError,
    BatchShapeMismatch,
    CooPlan,
    DimensionMismatch,
    EmptyCloud,
    GradMode,
    InvalidConfig,
    InvalidPlan,
    KeyOverflow,
    LossResult,
    NonFiniteInput,
    PointCloud,
    Reduction,
    StabilityMode,
    TauTooLarge,
    default_config,
    validate_pair,
)

__version__ = "0.1.0"
