"""Great-circle geometry and intervening-opportunity aggregation.

Distances are centroid-to-centroid haversine values on a sphere of
radius 6371.0088 km (IUGG mean Earth radius).  The intervening
aggregate for an ordered pair (i, j) sums a named zone feature over
every third zone whose centroid lies strictly inside the circle
centred at i with radius d_ij; zones exactly on the boundary are
excluded, which makes the two-zone case unambiguously zero.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Sequence

import numpy as np

from .errors import UnknownFeature, UnknownZone

if TYPE_CHECKING:
    from .flows import ZoneTable

EARTH_RADIUS_KM = 6371.0088


@dataclass(frozen=True)
class Centroid:
    """A zone centroid in degrees; rejects out-of-range coordinates.

    Longitude normalization into [-180, 180) is the ingester's job;
    this type only validates.
    """

    lat: float
    lon: float

    def __post_init__(self):
        if not -90.0 <= self.lat <= 90.0:
            raise ValueError(f"latitude {self.lat} outside [-90, 90]")
        if not -180.0 <= self.lon < 180.0:
            raise ValueError(f"longitude {self.lon} outside [-180, 180)")


@dataclass(frozen=True)
class InterveningQuery:
    """Request for the intervening aggregate of one feature over one pair."""

    variable: str
    origin: str
    destination: str

    def __post_init__(self):
        if self.origin == self.destination:
            raise ValueError("origin and destination must differ")


def _haversine_km(lat1, lon1, lat2, lon2):
    # Inputs in radians; works elementwise on scalars or arrays.
    dlat = lat2 - lat1
    dlon = lon2 - lon1
    h = np.sin(dlat / 2.0) ** 2 + np.cos(lat1) * np.cos(lat2) * np.sin(dlon / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_KM * np.arcsin(np.sqrt(np.clip(h, 0.0, 1.0)))


def distance_km(a: Centroid, b: Centroid) -> float:
    """Great-circle distance between two centroids in kilometres.

    Symmetric, non-negative, and zero exactly when the centroids
    coincide.
    """
    return float(
        _haversine_km(
            np.radians(a.lat), np.radians(a.lon), np.radians(b.lat), np.radians(b.lon)
        )
    )


def _distances_from(zones: "ZoneTable", i: int) -> np.ndarray:
    """Distances from zone index i to every zone in table order."""
    lat = np.radians(zones.lats)
    lon = np.radians(zones.lons)
    return _haversine_km(lat[i], lon[i], lat, lon)


def intervening_sum(zones: "ZoneTable", q: InterveningQuery) -> float:
    """Sum of one feature over the zones strictly between a pair.

    A zone k counts when k is neither endpoint and the centroid
    distance d_ik is strictly less than d_ij.  Returns 0 when no zone
    qualifies (including the coincident-centroid case d_ij = 0).

    Raises
    ------
    UnknownZone
        origin or destination id not in the table.
    UnknownFeature
        the named feature column does not exist.
    """
    i = zones.index_of(q.origin)
    j = zones.index_of(q.destination)
    values = zones.feature_values(q.variable)
    d = _distances_from(zones, i)
    inside = d < d[j]
    inside[i] = False
    inside[j] = False
    return float(np.sum(values[inside]))


class PairFeatureSet:
    """Joint features for every ordered zone pair (i, j), i != j.

    Rows are laid out origin-major in canonical table order, so the
    block for origin i is contiguous.  Columns always include
    ``distance``; each requested intervening variable ``v`` adds a
    column ``intervening_v``.
    """

    def __init__(self, zones: "ZoneTable", origin_idx: np.ndarray,
                 dest_idx: np.ndarray, columns: dict[str, np.ndarray]):
        self.zones = zones
        self.origin_idx = origin_idx
        self.dest_idx = dest_idx
        self.columns = columns
        self._row_of: dict[tuple[int, int], int] | None = None

    def __len__(self) -> int:
        return len(self.origin_idx)

    @property
    def column_names(self) -> tuple[str, ...]:
        return tuple(self.columns)

    def column(self, name: str) -> np.ndarray:
        try:
            return self.columns[name]
        except KeyError:
            raise UnknownFeature(f"pair feature {name!r} not present") from None

    def row_index(self, origin_id: str, dest_id: str) -> int:
        if self._row_of is None:
            self._row_of = {
                (int(o), int(d)): r
                for r, (o, d) in enumerate(zip(self.origin_idx, self.dest_idx))
            }
        i = self.zones.index_of(origin_id)
        j = self.zones.index_of(dest_id)
        try:
            return self._row_of[(i, j)]
        except KeyError:
            raise UnknownZone(f"pair ({origin_id!r}, {dest_id!r}) not in pair set") from None

    def distance(self, origin_id: str, dest_id: str) -> float:
        return float(self.columns["distance"][self.row_index(origin_id, dest_id)])

    def origin_block(self, i: int) -> slice:
        """Row slice holding all destinations for origin index i."""
        n = self.zones.n
        return slice(i * (n - 1), (i + 1) * (n - 1))


def pair_features(zones: "ZoneTable", variables: Sequence[str] = ()) -> PairFeatureSet:
    """Distances plus intervening sums for all ordered pairs.

    Output order is deterministic: sorted by origin id, then
    destination id (the table's canonical order).  Intervening sums
    use a per-origin sort with prefix sums, which matches the
    per-pair definition exactly because ties at d_ij are excluded on
    both paths.
    """
    for v in variables:
        zones.feature_values(v)  # raises UnknownFeature early

    n = zones.n
    lat = np.radians(zones.lats)
    lon = np.radians(zones.lons)
    feats = {v: zones.feature_values(v) for v in variables}

    origin_idx = np.empty(n * (n - 1), dtype=np.int64)
    dest_idx = np.empty(n * (n - 1), dtype=np.int64)
    dist = np.empty(n * (n - 1), dtype=np.float64)
    inter = {v: np.empty(n * (n - 1), dtype=np.float64) for v in variables}

    all_idx = np.arange(n)
    for i in range(n):
        block = slice(i * (n - 1), (i + 1) * (n - 1))
        dests = np.concatenate([all_idx[:i], all_idx[i + 1:]])
        d_row = _haversine_km(lat[i], lon[i], lat, lon)
        origin_idx[block] = i
        dest_idx[block] = dests
        dist[block] = d_row[dests]

        if variables:
            order = np.argsort(d_row[dests], kind="stable")
            sorted_d = d_row[dests][order]
            # searchsorted(..., 'left') counts zones strictly closer than
            # d_ij; the destination itself sits exactly at d_ij and any
            # boundary ties are excluded with it.
            pos = np.searchsorted(sorted_d, d_row[dests], side="left")
            for v in variables:
                prefix = np.concatenate([[0.0], np.cumsum(feats[v][dests][order])])
                inter[v][block] = prefix[pos]

    columns: dict[str, np.ndarray] = {"distance": dist}
    for v in variables:
        columns[f"intervening_{v}"] = inter[v]
    return PairFeatureSet(zones, origin_idx, dest_idx, columns)
