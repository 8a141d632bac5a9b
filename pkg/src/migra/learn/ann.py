"""Feed-forward regression network trained with Adam.

Dense hidden layers with rectified-linear activations; the linear
output is rectified too, so predictions are valid non-negative counts.
Features are standardized with statistics fitted on the training rows
and stored on the model.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from ..dataset import ObservationSet, Scaler, apply_scaler, fit_scaler
from ..errors import InvalidConfig, NonFiniteLoss
from .losses import cpc_loss, cpc_loss_grad, mse_loss, mse_loss_grad

BATCH_MENU = (512, 1024, 2048, 4096, 8192, 16384)
LOSSES = ("cpc_loss", "mse")

ADAM_LR = 1e-3
ADAM_B1 = 0.9
ADAM_B2 = 0.999
ADAM_EPS = 1e-8


@dataclass(frozen=True)
class AnnSpec:
    loss: str
    n_layers: int
    layer_width: int
    n_epochs: int
    batch_size: int
    k: int = 1

    def __post_init__(self):
        if self.loss not in LOSSES:
            raise InvalidConfig(f"loss must be one of {LOSSES}, got {self.loss!r}")
        if self.n_layers < 1:
            raise InvalidConfig(f"n_layers must be >= 1, got {self.n_layers}")
        if self.layer_width < 1:
            raise InvalidConfig(f"layer_width must be >= 1, got {self.layer_width}")
        if self.n_epochs < 1:
            raise InvalidConfig(f"n_epochs must be >= 1, got {self.n_epochs}")
        if self.batch_size not in BATCH_MENU:
            raise InvalidConfig(f"batch_size must be one of {BATCH_MENU}, "
                                f"got {self.batch_size}")
        if self.k < 1:
            raise InvalidConfig(f"k must be >= 1, got {self.k}")

    def as_dict(self) -> dict:
        return {"loss": self.loss, "n_layers": self.n_layers,
                "layer_width": self.layer_width, "n_epochs": self.n_epochs,
                "batch_size": self.batch_size, "k": self.k}


def _forward(weights, X: np.ndarray):
    """Activations per layer plus the pre-clamp output."""
    acts = [X]
    h = X
    for W, b in weights[:-1]:
        h = np.maximum(h @ W + b, 0.0)
        acts.append(h)
    W, b = weights[-1]
    z = (h @ W + b).ravel()
    return acts, z


def _backward(weights, acts, z: np.ndarray, dL_dyhat: np.ndarray):
    """Gradients for every (W, b), ordered like ``weights``.

    The output clamp passes gradient only where the pre-clamp value is
    strictly positive.
    """
    d = (dL_dyhat * (z > 0))[:, None]
    grads = [None] * len(weights)
    grads[-1] = (acts[-1].T @ d, d.sum(axis=0))
    d = d @ weights[-1][0].T
    for layer in range(len(weights) - 2, -1, -1):
        d = d * (acts[layer + 1] > 0)
        grads[layer] = (acts[layer].T @ d, d.sum(axis=0))
        d = d @ weights[layer][0].T
    return grads


@dataclass(frozen=True)
class AnnModel:
    """Fitted network: weights, the training scaler, and the loss curve.

    ``loss_curve[0]`` is the full-training-set loss before any update;
    each later entry is the loss after one epoch.
    """

    spec: AnnSpec
    weights: tuple
    scaler: Scaler
    column_names: tuple[str, ...]
    loss_curve: tuple[float, ...]

    def predict_rows(self, rows: np.ndarray) -> np.ndarray:
        _, z = _forward(self.weights, self.scaler.transform(rows))
        return np.maximum(z, 0.0)

    def to_json(self) -> str:
        return json.dumps({
            "kind": "ann",
            "spec": self.spec.as_dict(),
            "weights": [{"W": W.tolist(), "b": b.tolist()}
                        for W, b in self.weights],
            "scaler": {"mean": self.scaler.mean.tolist(),
                       "std": self.scaler.std.tolist()},
            "column_names": list(self.column_names),
            "loss_curve": list(self.loss_curve),
        })

    @classmethod
    def from_json(cls, text: str) -> "AnnModel":
        d = json.loads(text)
        return cls(spec=AnnSpec(**d["spec"]),
                   weights=tuple((np.asarray(w["W"]), np.asarray(w["b"]))
                                 for w in d["weights"]),
                   scaler=Scaler(mean=np.asarray(d["scaler"]["mean"]),
                                 std=np.asarray(d["scaler"]["std"])),
                   column_names=tuple(d["column_names"]),
                   loss_curve=tuple(d["loss_curve"]))


def _init_weights(rng: np.random.Generator, d_in: int, spec: AnnSpec,
                  target_mean: float):
    """Fan-in-scaled uniform weights; output bias starts at the target
    mean so the clamped output is live from the first step."""
    sizes = [d_in] + [spec.layer_width] * spec.n_layers + [1]
    weights = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        a = np.sqrt(6.0 / fan_in)
        W = rng.uniform(-a, a, size=(fan_in, fan_out))
        b = np.zeros(fan_out)
        weights.append([W, b])
    weights[-1][1][:] = target_mean
    return weights


def _full_loss(spec: AnnSpec, weights, X: np.ndarray, y: np.ndarray) -> float:
    _, z = _forward(weights, X)
    y_hat = np.maximum(z, 0.0)
    return cpc_loss(y, y_hat) if spec.loss == "cpc_loss" else mse_loss(y, y_hat)


def fit_ann(spec: AnnSpec, train: ObservationSet, seed) -> AnnModel:
    """Mini-batch training over shuffled epochs; deterministic per seed.

    Batches where targets and clamped predictions both sum to zero
    carry no overlap gradient and are skipped.
    """
    rng = np.random.default_rng(seed)
    scaler = train.scaler or fit_scaler(train)
    if train.scaler is None:
        train = apply_scaler(train, scaler)
    X = np.asarray(train.rows, dtype=np.float64)
    y = np.asarray(train.targets, dtype=np.float64)

    weights = _init_weights(rng, X.shape[1], spec, float(y.mean()))
    m_state = [(np.zeros_like(W), np.zeros_like(b)) for W, b in weights]
    v_state = [(np.zeros_like(W), np.zeros_like(b)) for W, b in weights]
    step = 0

    curve = [_full_loss(spec, weights, X, y)]
    for epoch in range(spec.n_epochs):
        order = rng.permutation(len(y))
        for lo in range(0, len(y), spec.batch_size):
            rows = order[lo:lo + spec.batch_size]
            acts, z = _forward(weights, X[rows])
            y_hat = np.maximum(z, 0.0)
            yb = y[rows]
            if spec.loss == "cpc_loss":
                if yb.sum() + y_hat.sum() == 0:
                    continue
                dL = cpc_loss_grad(yb, y_hat)
            else:
                dL = mse_loss_grad(yb, y_hat)
            grads = _backward(weights, acts, z, dL)

            step += 1
            corr1 = 1.0 - ADAM_B1 ** step
            corr2 = 1.0 - ADAM_B2 ** step
            for layer, (gW, gb) in enumerate(grads):
                for slot, g in enumerate((gW, gb)):
                    m = m_state[layer][slot]
                    v = v_state[layer][slot]
                    m *= ADAM_B1
                    m += (1 - ADAM_B1) * g
                    v *= ADAM_B2
                    v += (1 - ADAM_B2) * g * g
                    weights[layer][slot] -= (
                        ADAM_LR * (m / corr1) / (np.sqrt(v / corr2) + ADAM_EPS))

        loss = _full_loss(spec, weights, X, y)
        if not np.isfinite(loss):
            raise NonFiniteLoss(
                f"loss became {loss} after epoch {epoch + 1} of {spec.n_epochs} "
                f"(loss={spec.loss}, layers={spec.n_layers}x{spec.layer_width}, "
                f"batch={spec.batch_size}); curve so far: {curve}")
        curve.append(loss)

    return AnnModel(spec=spec,
                    weights=tuple((W.copy(), b.copy()) for W, b in weights),
                    scaler=scaler, column_names=train.column_names,
                    loss_curve=tuple(curve))
