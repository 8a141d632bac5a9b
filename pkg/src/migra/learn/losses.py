"""Training losses on mini-batches of non-negative flow predictions."""

from __future__ import annotations

import numpy as np

from ..errors import DegenerateBatch, EmptyBatch


def _as_batch(y, y_hat) -> tuple[np.ndarray, np.ndarray]:
    y = np.asarray(y, dtype=np.float64)
    y_hat = np.asarray(y_hat, dtype=np.float64)
    if y.size == 0:
        raise EmptyBatch("loss evaluated on an empty batch")
    if y.shape != y_hat.shape:
        raise ValueError(f"shape mismatch: {y.shape} vs {y_hat.shape}")
    return y, y_hat


def cpc_loss(y, y_hat) -> float:
    """One minus the common part of the batch:
    1 - 2 * sum(min(y_i, yhat_i)) / (sum(y) + sum(yhat)).

    Computed per mini-batch, not over the whole pair set.  A batch
    where both sides sum to zero counts as perfect agreement (loss 0).
    """
    y, y_hat = _as_batch(y, y_hat)
    denom = y.sum() + y_hat.sum()
    if denom == 0:
        return 0.0
    return float(1.0 - 2.0 * np.minimum(y, y_hat).sum() / denom)


def cpc_loss_grad(y, y_hat) -> np.ndarray:
    """Gradient of cpc_loss with respect to each prediction:
    2 * sum(min) / S^2 - (2 if yhat_j < y_j else 0) / S,  S = sum(y) + sum(yhat).

    At the kink yhat_j = y_j the indicator is literally false and
    contributes nothing (strict inequality).
    """
    y, y_hat = _as_batch(y, y_hat)
    S = y.sum() + y_hat.sum()
    if S == 0:
        raise DegenerateBatch("batch sums to zero on both sides; "
                              "gradient undefined")
    common = np.minimum(y, y_hat).sum()
    return 2.0 * common / S ** 2 - np.where(y_hat < y, 2.0 / S, 0.0)


def mse_loss(y, y_hat) -> float:
    y, y_hat = _as_batch(y, y_hat)
    return float(((y - y_hat) ** 2).mean())


def mse_loss_grad(y, y_hat) -> np.ndarray:
    y, y_hat = _as_batch(y, y_hat)
    return 2.0 * (y_hat - y) / y.size
