"""Evaluation measures comparing predicted flow matrices to ground truth.

All matrix metrics run over the n(n-1) ordered pairs of the shared zone
universe, with absent entries counting as zero.  Sparse matrices are
never densified; sums iterate the union of stored keys in sorted order
so results are bit-stable across runs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DegenerateTruth, MissingDistance, UnknownZone, ZoneUniverseMismatch
from .flows import FlowMatrix, aggregates
from .geo import PairFeatureSet


@dataclass(frozen=True)
class EvalReport:
    """The six evaluation measures for one predicted matrix."""

    cpc: float
    cpc_d: float
    rmse: float
    r2: float
    incoming_mae: float
    incoming_r2: float

    def as_dict(self) -> dict[str, float]:
        return {
            "cpc": self.cpc,
            "cpc_d": self.cpc_d,
            "rmse": self.rmse,
            "r2": self.r2,
            "incoming_mae": self.incoming_mae,
            "incoming_r2": self.incoming_r2,
        }


def _check_universe(T: FlowMatrix, T_hat: FlowMatrix) -> None:
    if T.zones.ids != T_hat.zones.ids:
        raise ZoneUniverseMismatch("matrices cover different zone universes")


def _union_keys(T: FlowMatrix, T_hat: FlowMatrix) -> list[tuple[str, str]]:
    return sorted(T.entries.keys() | T_hat.entries.keys())


def cpc(T: FlowMatrix, T_hat: FlowMatrix) -> float:
    """Common part: 2 * sum of pairwise minima over the sum of totals.

    Equals 1 when the matrices agree exactly (including both empty) and
    0 when their supports are disjoint.
    """
    _check_universe(T, T_hat)
    common = math.fsum(min(T.entries[k], T_hat.entries[k])
                       for k in T.entries.keys() & T_hat.entries.keys())
    denom = T.total + T_hat.total
    if denom == 0:
        return 1.0
    return 2.0 * common / denom


def cpc_d(T: FlowMatrix, T_hat: FlowMatrix, distances: PairFeatureSet) -> float:
    """Common part of 2 km distance histograms.

    Migrants at distance d land in bin floor(d / 2), i.e. [2k-2, 2k)
    for bin index k-1; there is no maximum-distance cap.
    """
    _check_universe(T, T_hat)

    def histogram(M: FlowMatrix) -> dict[int, float]:
        bins: dict[int, float] = {}
        for (o, d), v in M.items_sorted():
            try:
                dist = distances.distance(o, d)
            except UnknownZone:
                raise MissingDistance(f"no distance for pair {o!r} -> {d!r}") from None
            k = int(dist // 2.0)
            bins[k] = bins.get(k, 0.0) + v
        return bins

    N, N_hat = histogram(T), histogram(T_hat)
    common = math.fsum(min(N[k], N_hat[k]) for k in N.keys() & N_hat.keys())
    denom = math.fsum(N.values()) + math.fsum(N_hat.values())
    if denom == 0:
        return 1.0
    return 2.0 * common / denom


def _n_pairs(T: FlowMatrix) -> int:
    n = T.zones.n
    return n * (n - 1)


def rmse(T: FlowMatrix, T_hat: FlowMatrix) -> float:
    """Root mean square error over all ordered pairs, zeros included."""
    _check_universe(T, T_hat)
    sq = math.fsum((T.value(o, d) - T_hat.value(o, d)) ** 2
                   for (o, d) in _union_keys(T, T_hat))
    return math.sqrt(sq / _n_pairs(T))


def r2(T: FlowMatrix, T_hat: FlowMatrix) -> float:
    """Coefficient of determination against the all-pairs mean of T.

    Structural zeros participate in both sums: pairs absent from both
    matrices still contribute (0 - mean)^2 to the denominator.
    """
    _check_universe(T, T_hat)
    P = _n_pairs(T)
    mean = T.total / P
    ss_res = math.fsum((T.value(o, d) - T_hat.value(o, d)) ** 2
                       for (o, d) in _union_keys(T, T_hat))
    nz = [(v - mean) ** 2 for _, v in T.items_sorted()]
    ss_tot = math.fsum(nz) + (P - len(T)) * mean ** 2
    if ss_tot == 0:
        raise DegenerateTruth("truth matrix is constant; r2 undefined")
    return 1.0 - ss_res / ss_tot


def incoming_metrics(T: FlowMatrix, T_hat: FlowMatrix) -> tuple[float, float]:
    """MAE and r2 over the per-zone incoming totals (column sums)."""
    _check_universe(T, T_hat)
    v = aggregates(T).incoming
    v_hat = aggregates(T_hat).incoming
    mae = float(abs(v - v_hat).mean())
    mean = v.mean()
    ss_tot = float(((v - mean) ** 2).sum())
    if ss_tot == 0:
        raise DegenerateTruth("incoming totals are constant; r2 undefined")
    ss_res = float(((v - v_hat) ** 2).sum())
    return mae, 1.0 - ss_res / ss_tot


def evaluate(T: FlowMatrix, T_hat: FlowMatrix,
             distances: PairFeatureSet) -> EvalReport:
    """All six measures in one report."""
    mae, inc_r2 = incoming_metrics(T, T_hat)
    return EvalReport(
        cpc=cpc(T, T_hat),
        cpc_d=cpc_d(T, T_hat, distances),
        rmse=rmse(T, T_hat),
        r2=r2(T, T_hat),
        incoming_mae=mae,
        incoming_r2=inc_r2,
    )
