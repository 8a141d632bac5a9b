"""Observation matrices for the learned models.

One row per ordered zone pair: origin features, then destination
features, then pair features, with the next year's migrant count as
the target.  Includes negative downsampling and a fit-on-train
column scaler.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import NoPositives, SampledSetError, UnknownFeature
from .flows import FlowMatrix, ZoneTable
from .geo import PairFeatureSet


@dataclass(frozen=True)
class FeatureSchema:
    """Named columns drawn from the zone table and the pair set.

    ``origin_features`` and ``destination_features`` index zone columns;
    ``pair_features`` index PairFeatureSet columns.
    """

    origin_features: tuple[str, ...]
    destination_features: tuple[str, ...]
    pair_features: tuple[str, ...]
    variant: str = "custom"

    @property
    def column_names(self) -> tuple[str, ...]:
        return (tuple(f"origin_{f}" for f in self.origin_features)
                + tuple(f"destination_{f}" for f in self.destination_features)
                + tuple(self.pair_features))

    @classmethod
    def traditional(cls) -> "FeatureSchema":
        """The four inputs the classic models see: populations, distance,
        intervening population."""
        return cls(origin_features=("population",),
                   destination_features=("population",),
                   pair_features=("distance", "intervening_population"),
                   variant="traditional")

    @classmethod
    def extended(cls, zones: ZoneTable) -> "FeatureSchema":
        """Every zone column on both sides, plus distance and the
        intervening sum of every zone column."""
        names = zones.feature_names
        return cls(origin_features=names,
                   destination_features=names,
                   pair_features=("distance",) + tuple(f"intervening_{f}" for f in names),
                   variant="extended")


@dataclass(frozen=True)
class Scaler:
    """Per-column standardization statistics fitted on training rows."""

    mean: np.ndarray
    std: np.ndarray

    def transform(self, rows: np.ndarray) -> np.ndarray:
        # constant columns (std 0) pass through unscaled
        safe = np.where(self.std == 0, 1.0, self.std)
        shift = np.where(self.std == 0, 0.0, self.mean)
        return (rows - shift) / safe


@dataclass(frozen=True)
class ObservationSet:
    """Feature rows, targets, and the pair each row describes.

    ``sampled`` marks sets produced by downsampling; evaluation entry
    points refuse them.
    """

    rows: np.ndarray
    targets: np.ndarray
    pair_index: tuple[tuple[str, str], ...]
    column_names: tuple[str, ...]
    schema: FeatureSchema
    zones: ZoneTable = field(compare=False)
    target_year: int = 0
    sampled: bool = False
    scaler: Scaler | None = field(default=None, compare=False)

    @property
    def n_rows(self) -> int:
        return self.rows.shape[0]

    @property
    def n_positive(self) -> int:
        return int((self.targets > 0).sum())

    @property
    def positive_density(self) -> float:
        return self.n_positive / self.n_rows

    def require_full(self, context: str) -> None:
        if self.sampled:
            raise SampledSetError(f"{context} requires the full pair set, "
                                  "got a downsampled one")

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(",".join(self.column_names) + ",origin,destination,target\n")
        for r in range(self.n_rows):
            feats = ",".join(repr(float(x)) for x in self.rows[r])
            o, d = self.pair_index[r]
            buf.write(f"{feats},{o},{d},{repr(float(self.targets[r]))}\n")
        return buf.getvalue()


def build(zones: ZoneTable, pairs: PairFeatureSet, T_next: FlowMatrix,
          schema: FeatureSchema) -> ObservationSet:
    """Assemble the full n(n-1)-row observation matrix.

    Rows follow the pair set's origin-major order; the target for
    (i, j) is T_next's entry, zero when absent.
    """
    n = zones.n
    cols: list[np.ndarray] = []
    for name in schema.origin_features:
        cols.append(zones.feature_values(name)[pairs.origin_idx])
    for name in schema.destination_features:
        cols.append(zones.feature_values(name)[pairs.dest_idx])
    for name in schema.pair_features:
        cols.append(pairs.column(name))
    rows = np.column_stack(cols) if cols else np.zeros((len(pairs), 0))

    targets = np.zeros(len(pairs))
    for (o, d), v in T_next.entries.items():
        targets[pairs.row_index(o, d)] = v

    index = []
    for i in range(n):
        for j in range(n):
            if j != i:
                index.append((zones.ids[i], zones.ids[j]))
    return ObservationSet(rows=rows, targets=targets,
                          pair_index=tuple(index),
                          column_names=schema.column_names, schema=schema,
                          zones=zones, target_year=T_next.year)


def downsample(obs: ObservationSet, k: int, seed) -> ObservationSet:
    """All positive rows plus n_t * k zero rows drawn with replacement.

    Row contents are untouched; only multiplicity changes.  Identical
    seeds give identical samples.
    """
    if k < 1:
        raise ValueError(f"k must be a positive integer, got {k}")
    pos = np.flatnonzero(obs.targets > 0)
    zero = np.flatnonzero(obs.targets == 0)
    if len(pos) == 0:
        raise NoPositives("cannot downsample a set with no positive targets")
    rng = np.random.default_rng(seed)
    picked = rng.choice(zero, size=len(pos) * k, replace=True) if len(zero) else np.array([], dtype=int)
    keep = np.concatenate([pos, picked])
    return replace(obs,
                   rows=obs.rows[keep],
                   targets=obs.targets[keep],
                   pair_index=tuple(obs.pair_index[r] for r in keep),
                   sampled=True)


def fit_scaler(obs: ObservationSet) -> Scaler:
    """Column means and stds of the given (training) rows."""
    return Scaler(mean=obs.rows.mean(axis=0), std=obs.rows.std(axis=0))


def apply_scaler(obs: ObservationSet, scaler: Scaler) -> ObservationSet:
    """Standardize feature columns; targets are never scaled."""
    return replace(obs, rows=scaler.transform(obs.rows), scaler=scaler)
