import numpy as np
import pytest

from apml import (
    ApmlConfig,
    CooPlan,
    finite_difference_oracle,
    grad_full,
    grad_plan_detached,
    max_relative_error,
    sparse_apml_loss,
)
from apml.sparse import sparse_forward

from conftest import random_pair


def test_single_pair_detached():
    plan = CooPlan([0], [0], [1.0], 1, 1)
    g = grad_plan_detached([[0, 0, 0]], [[1, 0, 0]], plan)
    np.testing.assert_allclose(g.dx, [[-1, 0, 0]], atol=1e-7)
    np.testing.assert_allclose(g.dy, [[1, 0, 0]], atol=1e-7)


def test_coincident_points_zero_gradient():
    plan = CooPlan([0], [0], [1.0], 1, 1)
    g = grad_plan_detached([[0.3, 0.1, 2.0]], [[0.3, 0.1, 2.0]], plan)
    np.testing.assert_array_equal(g.dx, 0.0)
    np.testing.assert_array_equal(g.dy, 0.0)
    _, g = grad_full([[0.3, 0.1, 2.0]], [[0.3, 0.1, 2.0]])
    assert np.all(np.isfinite(g.dx)) and np.all(g.dx == 0.0)


def test_single_pair_full_and_fd():
    _, g = grad_full([[0, 0, 0]], [[1, 0, 0]])
    fd = finite_difference_oracle([[0, 0, 0]], [[1, 0, 0]])
    np.testing.assert_allclose(g.dx, [[-1, 0, 0]], atol=1e-7)
    np.testing.assert_allclose(fd.dx, [[-1, 0, 0]], atol=1e-7)


@pytest.mark.parametrize("seed", range(5))
def test_detached_antisymmetry(seed):
    x, y = random_pair(seed, 15, 11)
    plan = sparse_forward(x, y).plan
    g = grad_plan_detached(x, y, plan)
    np.testing.assert_allclose(g.dx.sum(axis=0), -g.dy.sum(axis=0), atol=1e-9)


def test_full_gradient_sums_to_zero():
    x, y = random_pair(3, 12, 9)
    _, g = grad_full(x, y)
    np.testing.assert_allclose(g.dx.sum(axis=0) + g.dy.sum(axis=0), 0.0, atol=1e-9)


def test_locality_on_truncated_plan():
    x, y = random_pair(0, 6, 6)
    plan = CooPlan([0, 2], [1, 4], [0.5, 0.5], 6, 6)
    g = grad_plan_detached(x, y, plan)
    absent_x = [1, 3, 4, 5]
    absent_y = [0, 2, 3, 5]
    np.testing.assert_array_equal(g.dx[absent_x], 0.0)
    np.testing.assert_array_equal(g.dy[absent_y], 0.0)


def test_detached_mode_dispatch():
    x, y = random_pair(4, 10, 10)
    cfg = ApmlConfig(grad_mode="plan_detached")
    res, g = grad_full(x, y, cfg)
    ref = grad_plan_detached(x, y, sparse_forward(x, y, cfg).plan, cfg)
    np.testing.assert_array_equal(g.dx, ref.dx)
    np.testing.assert_array_equal(g.dy, ref.dy)
    assert res.loss == sparse_apml_loss(x, y, cfg).loss


@pytest.mark.parametrize("cfg", [
    ApmlConfig(),
    ApmlConfig(tau=0.0),
    ApmlConfig(tau=1e-3, l_iter=3),
    ApmlConfig(stability_mode="uniform_fallback"),
    ApmlConfig(p_min=0.5, l_iter=0),
], ids=["default", "tau0", "tau1e-3", "uniform", "no_sinkhorn"])
def test_full_matches_finite_differences(cfg):
    x, y = random_pair(21, 8, 7)
    _, g = grad_full(x, y, cfg)
    fd, kinks = finite_difference_oracle(x, y, cfg, 1e-5, return_kinks=True)
    assert kinks.flat().sum() < 5
    assert max_relative_error(g, fd, kinks) <= 1e-4


def test_uniform_fallback_line_has_constant_weights():
    # x0 is equidistant from y0 and y1: its row is uniform and contributes
    # only through the distances
    x = np.array([[0.0, 0.0, 0.0], [5.0, 5.0, 5.0]])
    y = np.array([[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0], [5.0, 5.2, 5.0]])
    cfg = ApmlConfig(stability_mode="uniform_fallback", tau=0.0)
    _, g = grad_full(x, y, cfg)
    fd, kinks = finite_difference_oracle(x, y, cfg, 1e-6, return_kinks=True)
    assert max_relative_error(g, fd, kinks) <= 1e-4


def test_fd_step_sweep_plateau():
    x, y = random_pair(2, 6, 6)
    cfg = ApmlConfig(tau=0.0)
    _, g = grad_full(x, y, cfg)
    errs = [max_relative_error(g, finite_difference_oracle(x, y, cfg, h)) for h in (1e-3, 1e-5, 1e-9)]
    # truncation error at large h, cancellation at tiny h, minimum in between
    assert errs[1] < errs[0] and errs[1] < errs[2]


@pytest.mark.parametrize("seed", range(5))
def test_translation_invariance(seed):
    x, y = random_pair(seed, 10, 12)
    shift = np.array([3.0, -1.5, 0.25])
    r0, g0 = grad_full(x, y)
    r1, g1 = grad_full(x + shift, y + shift)
    assert r1.loss == pytest.approx(r0.loss, abs=1e-9)
    np.testing.assert_allclose(g1.dx, g0.dx, atol=1e-9)
    np.testing.assert_allclose(g1.dy, g0.dy, atol=1e-9)


def test_descent_step_reduces_loss():
    improved = 0
    for seed in range(20):
        x, y = random_pair(seed, 16, 16)
        res, g = grad_full(x, y)
        improved += sparse_apml_loss(x - 1e-3 * g.dx, y).loss < res.loss
    assert improved >= 19


def test_fd_rejects_bad_step():
    with pytest.raises(ValueError):
        finite_difference_oracle([[0.0]], [[1.0]], h=0.0)


@pytest.mark.parametrize("seed", range(4))
def test_swap_symmetric_gradients_without_sinkhorn(seed):
    x, y = random_pair(seed, 14, 10)
    cfg = ApmlConfig(l_iter=0)
    r0, g0 = grad_full(x, y, cfg)
    r1, g1 = grad_full(y, x, cfg)
    assert r0.loss == pytest.approx(r1.loss, abs=1e-12)
    np.testing.assert_allclose(g0.dx, g1.dy, atol=1e-9)
    np.testing.assert_allclose(g0.dy, g1.dx, atol=1e-9)
