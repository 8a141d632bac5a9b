"""Randomized hyperparameter search scored by validation-set overlap."""

from __future__ import annotations

import json
import time
from dataclasses import dataclass

import numpy as np

from ..dataset import ObservationSet, downsample
from ..errors import AllTrialsFailed, InvalidConfig, MigraError
from .ann import BATCH_MENU, AnnModel, AnnSpec, fit_ann
from .gbt import GbtModel, GbtSpec, fit_gbt
from .losses import cpc_loss

# positive fraction below which the heavy downsampling range applies
SPARSE_DENSITY = 0.01


@dataclass(frozen=True)
class SearchSpace:
    """Sampling distributions for one model family.

    The downsampling ratio k is drawn from {k_lo..k_hi}; the other
    ranges are fixed per family.  Learning rate is drawn from the
    half-open interval (0, 0.5]: a rate of exactly 0 would make every
    boosting round a no-op.
    """

    model: str
    k_lo: int
    k_hi: int

    def __post_init__(self):
        if self.model not in ("gbt", "ann"):
            raise InvalidConfig(f"model must be 'gbt' or 'ann', got {self.model!r}")
        if not 1 <= self.k_lo <= self.k_hi:
            raise InvalidConfig(f"bad k range [{self.k_lo}, {self.k_hi}]")

    @classmethod
    def for_dataset(cls, model: str, train: ObservationSet) -> "SearchSpace":
        """k range picked by positive density: sparse sets (< 1%
        positive) get {5..100}, dense ones {1..5}."""
        if train.positive_density < SPARSE_DENSITY:
            return cls(model, 5, 100)
        return cls(model, 1, 5)

    def sample(self, rng: np.random.Generator):
        k = int(rng.integers(self.k_lo, self.k_hi + 1))
        if self.model == "gbt":
            return GbtSpec(
                max_depth=int(rng.integers(2, 8)),
                n_estimators=int(rng.integers(25, 276)),
                learning_rate=0.5 * (1.0 - rng.random()),
                k=k)
        return AnnSpec(
            loss=("cpc_loss", "mse")[int(rng.integers(0, 2))],
            n_layers=int(rng.integers(1, 6)),
            layer_width=int(rng.integers(16, 129)),
            n_epochs=int(rng.integers(10, 51)),
            batch_size=int(BATCH_MENU[int(rng.integers(0, len(BATCH_MENU)))]),
            k=k)


@dataclass(frozen=True)
class Trial:
    """One sampled spec with its validation score (or failure)."""

    index: int
    spec: GbtSpec | AnnSpec
    cpc: float | None
    seconds: float
    model: GbtModel | AnnModel | None = None
    error: str | None = None

    def log_line(self) -> str:
        return json.dumps({
            "trial": self.index,
            "family": "gbt" if isinstance(self.spec, GbtSpec) else "ann",
            "spec": self.spec.as_dict(),
            "cpc": self.cpc,
            "seconds": round(self.seconds, 4),
            "error": self.error,
        })


@dataclass(frozen=True)
class SearchResult:
    best: Trial
    trials: tuple[Trial, ...]

    def log_lines(self) -> str:
        return "\n".join(t.log_line() for t in self.trials) + "\n"


def _fit(spec, train: ObservationSet, seed):
    if isinstance(spec, GbtSpec):
        return fit_gbt(spec, train)
    return fit_ann(spec, train, seed)


def validation_cpc(model, valid: ObservationSet) -> float:
    """Overlap between clamped predictions and the full target vector."""
    valid.require_full("validation scoring")
    y_hat = np.maximum(model.predict_rows(np.asarray(valid.rows, dtype=np.float64)), 0.0)
    return 1.0 - cpc_loss(valid.targets, y_hat)


def random_search(space: SearchSpace, train: ObservationSet,
                  valid: ObservationSet, n_trials: int = 50,
                  seed=0, initial_specs=()) -> SearchResult:
    """Fit n_trials sampled specs on downsampled train, score each by
    CPC on the full validation set, return the argmax.

    ``initial_specs`` occupy the first trial slots (the rest are
    sampled), which gives tests a handle to inject known-good and
    known-bad configurations.  Ties break toward the earlier trial.
    Individual trial failures are recorded, not raised.
    """
    train.require_full("hyperparameter search")
    valid.require_full("hyperparameter search")
    if len(initial_specs) > n_trials:
        raise InvalidConfig(f"{len(initial_specs)} initial specs exceed "
                            f"{n_trials} trials")

    root = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    children = root.spawn(n_trials + 1)
    sampler = np.random.default_rng(children[0])
    specs = list(initial_specs)
    specs += [space.sample(sampler) for _ in range(n_trials - len(specs))]

    trials: list[Trial] = []
    best: Trial | None = None
    for i, spec in enumerate(specs):
        t0 = time.perf_counter()
        ds_seed, fit_seed = children[i + 1].spawn(2)
        try:
            sampled = downsample(train, spec.k, ds_seed)
            model = _fit(spec, sampled, fit_seed)
            score = validation_cpc(model, valid)
            trial = Trial(index=i, spec=spec, cpc=score,
                          seconds=time.perf_counter() - t0, model=model)
        except MigraError as exc:
            trial = Trial(index=i, spec=spec, cpc=None,
                          seconds=time.perf_counter() - t0,
                          error=f"{type(exc).__name__}: {exc}")
        trials.append(trial)
        if trial.cpc is not None and (best is None or trial.cpc > best.cpc):
            best = trial

    if best is None:
        raise AllTrialsFailed(
            "every trial failed: " + "; ".join(t.error for t in trials))
    return SearchResult(best=best, trials=tuple(trials))
