import numpy as np
import pytest

from migra import FlowMatrix, ZoneTable, cpc
from migra.errors import DegenerateBatch, EmptyBatch
from migra.learn import cpc_loss, cpc_loss_grad, mse_loss, mse_loss_grad


def test_perfect_overlap_is_zero():
    y = np.array([3.0, 1.0, 4.0])
    assert cpc_loss(y, y) == 0.0


def test_disjoint_support_is_one():
    assert cpc_loss([2.0, 0.0], [0.0, 3.0]) == 1.0


def test_hand_case_one_third():
    assert cpc_loss([2.0, 2.0], [1.0, 1.0]) == pytest.approx(1 / 3)


def test_hand_gradient():
    g = cpc_loss_grad([2.0, 2.0], [1.0, 1.0])
    assert g == pytest.approx([-2 / 9, -2 / 9])


def test_gradient_when_overshooting():
    # every prediction above truth: only the denominator term survives
    y = np.array([1.0, 2.0])
    y_hat = np.array([3.0, 4.0])
    S = y.sum() + y_hat.sum()
    common = np.minimum(y, y_hat).sum()
    g = cpc_loss_grad(y, y_hat)
    assert g == pytest.approx([2 * common / S**2] * 2)
    assert np.all(g > 0)


def test_empty_batch():
    with pytest.raises(EmptyBatch):
        cpc_loss([], [])
    with pytest.raises(EmptyBatch):
        cpc_loss_grad([], [])


def test_degenerate_batch_semantics():
    z = np.zeros(3)
    assert cpc_loss(z, z) == 0.0
    with pytest.raises(DegenerateBatch):
        cpc_loss_grad(z, z)


def test_shape_mismatch():
    with pytest.raises(ValueError):
        cpc_loss([1.0, 2.0], [1.0])


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(33)
    y = rng.uniform(0.0, 10.0, 60)
    y_hat = rng.uniform(0.1, 10.0, 60)
    # keep every coordinate away from the min() kink
    y_hat = np.where(np.abs(y_hat - y) < 1e-2, y_hat + 2e-2, y_hat)
    g = cpc_loss_grad(y, y_hat)
    eps = 1e-6
    for j in range(0, 60, 7):
        up, down = y_hat.copy(), y_hat.copy()
        up[j] += eps
        down[j] -= eps
        fd = (cpc_loss(y, up) - cpc_loss(y, down)) / (2 * eps)
        assert g[j] == pytest.approx(fd, rel=1e-5, abs=1e-9)


def test_loss_complements_matrix_overlap():
    # 1 - loss on dense vectors equals the sparse-matrix statistic
    zones = ZoneTable(["A", "B", "C"], [0.0, 1.0, 2.0], [0.0, 0.0, 0.0],
                      [10.0, 5.0, 7.0])
    rng = np.random.default_rng(5)
    for _ in range(25):
        y = np.round(rng.uniform(0, 9, 6))
        y_hat = np.round(rng.uniform(0, 9, 6))
        if y.sum() + y_hat.sum() == 0:
            continue
        order = [(o, d) for o in "ABC" for d in "ABC" if o != d]
        T = FlowMatrix(0, {p: v for p, v in zip(order, y) if v > 0}, zones)
        T_hat = FlowMatrix(0, {p: v for p, v in zip(order, y_hat) if v > 0}, zones)
        assert cpc(T, T_hat) == pytest.approx(1.0 - cpc_loss(y, y_hat), rel=1e-12)


def test_mse_and_gradient():
    y = np.array([1.0, 2.0, 3.0])
    y_hat = np.array([2.0, 2.0, 5.0])
    assert mse_loss(y, y_hat) == pytest.approx(5 / 3)
    assert mse_loss_grad(y, y_hat) == pytest.approx([2 / 3, 0.0, 4 / 3])
