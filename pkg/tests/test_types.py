import numpy as np
import pytest

from apml import (
    ApmlConfig,
    CooPlan,
    DimensionMismatch,
    EmptyCloud,
    InvalidConfig,
    InvalidPlan,
    NonFiniteInput,
    PointCloud,
    default_config,
    validate_pair,
)


def test_unequal_cardinality_allowed():
    x, y = validate_pair(np.zeros((4, 3)), np.ones((7, 3)))
    assert (x.n, y.n, x.d) == (4, 7, 3)


def test_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        validate_pair(np.zeros((4, 3)), np.zeros((4, 2)))


def test_non_finite():
    x = np.zeros((4, 3))
    x[1, 2] = np.nan
    with pytest.raises(NonFiniteInput):
        validate_pair(x, np.zeros((2, 3)))
    with pytest.raises(NonFiniteInput):
        PointCloud([[np.inf, 0.0]])


def test_empty_cloud():
    with pytest.raises(EmptyCloud):
        PointCloud(np.zeros((0, 3)))


def test_cloud_is_immutable_copy():
    raw = np.zeros((2, 3))
    cloud = PointCloud(raw)
    raw[0, 0] = 5.0
    assert cloud.points[0, 0] == 0.0
    with pytest.raises(ValueError):
        cloud.points[0, 0] = 1.0


def test_defaults():
    cfg = default_config()
    assert cfg.tau == 1e-8
    assert cfg.l_iter == 10
    assert cfg.eps_stab == 1e-8
    assert cfg.p_min == 0.9
    assert cfg.delta == 1e-6
    assert cfg.eps_g == 1e-8
    assert cfg.eps_dist == 1e-8
    assert cfg.stability_mode.value == "gap_clamp"
    assert cfg.grad_mode.value == "full"
    assert cfg.reduction.value == "sum"


@pytest.mark.parametrize("kwargs", [
    {"p_min": 0.0}, {"p_min": 1.0}, {"p_min": 1.5},
    {"tau": -1e-3}, {"l_iter": -1}, {"l_iter": 2.5},
    {"delta": 0.0}, {"eps_g": 0.0}, {"eps_stab": 0.0}, {"eps_dist": -1.0},
    {"stability_mode": "nope"},
])
def test_config_rejects(kwargs):
    with pytest.raises((InvalidConfig, ValueError)):
        ApmlConfig(**kwargs)


def test_config_accepts_enum_strings():
    cfg = ApmlConfig(stability_mode="uniform_fallback", reduction="mean_over_batch")
    assert cfg.stability_mode.value == "uniform_fallback"
    assert cfg.with_(tau=0.0).tau == 0.0


def test_coo_plan_validation():
    plan = CooPlan([0, 1], [1, 0], [0.5, 0.5], 2, 2)
    assert plan.nnz == 2
    assert plan.rows.dtype == np.int32
    with pytest.raises(InvalidPlan):
        CooPlan([0, 1], [1], [0.5, 0.5], 2, 2)
    with pytest.raises(InvalidPlan):
        CooPlan([0, 2], [1, 0], [0.5, 0.5], 2, 2)
    with pytest.raises(InvalidPlan):
        CooPlan([0, 1], [1, -1], [0.5, 0.5], 2, 2)
    with pytest.raises(InvalidPlan):
        CooPlan([0], [0], [-0.1], 2, 2)
    with pytest.raises(InvalidPlan):
        CooPlan([0], [0], [np.nan], 2, 2)


def test_coo_keys_and_dense():
    plan = CooPlan([1, 0], [0, 1], [0.25, 0.75], 2, 3)
    assert plan.keys().tolist() == [3, 1]
    assert not plan.is_canonical()
    np.testing.assert_array_equal(plan.to_dense(), [[0, 0.75, 0], [0.25, 0, 0]])
