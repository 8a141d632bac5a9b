"""Zone tables, yearly flow matrices, and their CSV ingestion.

Zones CSV: header row with required columns ``zone_id,lat,lon,population``;
any additional numeric columns become named features.  Flows CSV:
``year,origin_id,destination_id,count``.  Both UTF-8, comma-separated,
``.`` decimal point.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from .errors import (
    DiagonalEntry,
    InvalidConfig,
    NegativeCount,
    ParseError,
    UnknownFeature,
    UnknownZone,
)
from .geo import Centroid

ZONE_REQUIRED_COLUMNS = ("zone_id", "lat", "lon", "population")
FLOW_COLUMNS = ("year", "origin_id", "destination_id", "count")


class ZoneTable:
    """Immutable per-zone records in canonical order (sorted by zone id).

    ``population`` is addressable as a feature column alongside any
    extra numeric columns from the source file.
    """

    def __init__(self, ids: Iterable[str], lats: Iterable[float],
                 lons: Iterable[float], populations: Iterable[float],
                 extras: Mapping[str, Iterable[float]] | None = None):
        ids = [str(z) for z in ids]
        if len(set(ids)) != len(ids):
            raise InvalidConfig("duplicate zone ids")
        order = np.argsort(np.asarray(ids, dtype=object), kind="stable")
        self.ids: tuple[str, ...] = tuple(ids[k] for k in order)
        self.lats = np.asarray(lats, dtype=np.float64)[order]
        self.lons = np.asarray(lons, dtype=np.float64)[order]
        self.populations = np.asarray(populations, dtype=np.float64)[order]
        self._extras = {
            str(name): np.asarray(vals, dtype=np.float64)[order]
            for name, vals in (extras or {}).items()
        }
        if np.any(self.populations < 0):
            raise InvalidConfig("negative population")
        if np.any(self.lats < -90) or np.any(self.lats > 90):
            raise InvalidConfig("latitude outside [-90, 90]")
        if np.any(self.lons < -180) or np.any(self.lons >= 180):
            raise InvalidConfig("longitude outside [-180, 180)")
        self._index = {z: k for k, z in enumerate(self.ids)}

    @property
    def n(self) -> int:
        return len(self.ids)

    @property
    def feature_names(self) -> tuple[str, ...]:
        return ("population",) + tuple(self._extras)

    def index_of(self, zone_id: str) -> int:
        try:
            return self._index[zone_id]
        except KeyError:
            raise UnknownZone(f"zone {zone_id!r} not in table") from None

    def feature_values(self, name: str) -> np.ndarray:
        if name == "population":
            return self.populations
        try:
            return self._extras[name]
        except KeyError:
            raise UnknownFeature(f"zone feature {name!r} not in table") from None

    def centroid(self, zone_id: str) -> Centroid:
        i = self.index_of(zone_id)
        return Centroid(float(self.lats[i]), float(self.lons[i]))

    def same_universe(self, other: "ZoneTable") -> bool:
        return self.ids == other.ids


class FlowMatrix:
    """Sparse year-stamped origin -> destination flow counts.

    Entries are strictly positive; an absent pair means zero.  Observed
    data carries integer counts, predicted matrices real values.
    Diagonal entries and ids outside the zone universe are rejected.
    """

    def __init__(self, year: int, entries: Mapping[tuple[str, str], float],
                 zones: ZoneTable):
        self.year = int(year)
        self.zones = zones
        clean: dict[tuple[str, str], float] = {}
        for (o, d), v in entries.items():
            if o == d:
                raise DiagonalEntry(f"within-zone entry {o!r} -> {d!r}")
            zones.index_of(o)
            zones.index_of(d)
            if v < 0:
                raise NegativeCount(f"negative count {v} for {o!r} -> {d!r}")
            if v != 0:
                clean[(o, d)] = v
        self.entries = clean

    def value(self, origin_id: str, dest_id: str) -> float:
        return self.entries.get((origin_id, dest_id), 0.0)

    @property
    def total(self) -> float:
        return float(sum(self.entries.values()))

    def items_sorted(self):
        return sorted(self.entries.items())

    def __eq__(self, other) -> bool:
        return (isinstance(other, FlowMatrix) and self.year == other.year
                and self.zones.ids == other.zones.ids
                and self.entries == other.entries)

    def __len__(self) -> int:
        return len(self.entries)


@dataclass(frozen=True)
class ZoneAggregates:
    """Per-zone outgoing and incoming totals, aligned to table order."""

    zones: ZoneTable
    outgoing: np.ndarray
    incoming: np.ndarray

    def outgoing_of(self, zone_id: str) -> float:
        return float(self.outgoing[self.zones.index_of(zone_id)])

    def incoming_of(self, zone_id: str) -> float:
        return float(self.incoming[self.zones.index_of(zone_id)])


def aggregates(T: FlowMatrix) -> ZoneAggregates:
    """Row sums (outgoing) and column sums (incoming) of a flow matrix.

    Zones with no entries get 0; the two totals balance exactly.
    """
    out = np.zeros(T.zones.n)
    inc = np.zeros(T.zones.n)
    for (o, d), v in T.entries.items():
        out[T.zones.index_of(o)] += v
        inc[T.zones.index_of(d)] += v
    return ZoneAggregates(T.zones, out, inc)


def load_zones(path) -> ZoneTable:
    """Read a zone table from CSV; extra numeric columns become features."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(path, 1, "empty file") from None
        header = [h.strip() for h in header]
        for col in ZONE_REQUIRED_COLUMNS:
            if col not in header:
                raise ParseError(path, 1, f"missing required column {col!r}")
        extras_names = [h for h in header if h not in ZONE_REQUIRED_COLUMNS]
        col_of = {h: k for k, h in enumerate(header)}

        ids, lats, lons, pops = [], [], [], []
        extras: dict[str, list[float]] = {name: [] for name in extras_names}
        for line_no, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise ParseError(path, line_no, f"expected {len(header)} fields, got {len(row)}")
            try:
                ids.append(row[col_of["zone_id"]].strip())
                lats.append(float(row[col_of["lat"]]))
                lons.append(float(row[col_of["lon"]]))
                pops.append(float(row[col_of["population"]]))
                for name in extras_names:
                    extras[name].append(float(row[col_of[name]]))
            except ValueError as exc:
                raise ParseError(path, line_no, str(exc)) from None
    try:
        return ZoneTable(ids, lats, lons, pops, extras)
    except InvalidConfig as exc:
        raise ParseError(path, 1, str(exc)) from None


def _parse_count(text: str, path, line_no: int, integer: bool) -> float:
    try:
        value = float(text)
    except ValueError:
        raise ParseError(path, line_no, f"bad count {text!r}") from None
    if not integer:
        return value
    if value != int(value):
        raise ParseError(path, line_no, f"non-integer count {text!r}")
    return int(value)


def _read_flow_rows(path, zones: ZoneTable, integer: bool = True):
    """Parse, validate, and sum duplicate rows; returns {year: entries}."""
    per_year: dict[int, dict[tuple[str, str], float]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ParseError(path, 1, "empty file") from None
        if tuple(header) != FLOW_COLUMNS:
            raise ParseError(path, 1, f"expected header {','.join(FLOW_COLUMNS)}")
        for line_no, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 4:
                raise ParseError(path, line_no, f"expected 4 fields, got {len(row)}")
            try:
                year = int(row[0])
            except ValueError:
                raise ParseError(path, line_no, f"bad year {row[0]!r}") from None
            o, d = row[1].strip(), row[2].strip()
            count = _parse_count(row[3], path, line_no, integer)
            if count < 0:
                raise NegativeCount(f"{path}:{line_no}: count {count} for {o!r} -> {d!r}")
            if o == d:
                raise DiagonalEntry(f"{path}:{line_no}: within-zone entry {o!r}")
            zones.index_of(o)
            zones.index_of(d)
            if count == 0:
                continue
            year_entries = per_year.setdefault(year, {})
            year_entries[(o, d)] = year_entries.get((o, d), 0) + count
    return per_year


def load_flows(path, zones: ZoneTable, year: int | None = None,
               integer: bool = True) -> FlowMatrix:
    """Read a single year of flows; duplicates sum, zero counts drop.

    When the file holds several years, ``year`` selects one; omitting
    it is an error in that case.  ``integer=False`` admits real-valued
    counts, as written by prediction exports.
    """
    per_year = _read_flow_rows(path, zones, integer)
    if year is None:
        if len(per_year) > 1:
            raise ParseError(path, 1, f"file holds years {sorted(per_year)}; pass year=")
        if not per_year:
            return FlowMatrix(0, {}, zones)
        year = next(iter(per_year))
    return FlowMatrix(year, per_year.get(year, {}), zones)


def load_all_flows(path, zones: ZoneTable, integer: bool = True) -> list[FlowMatrix]:
    """Read every year in a flows file, sorted by year."""
    per_year = _read_flow_rows(path, zones, integer)
    return [FlowMatrix(y, per_year[y], zones) for y in sorted(per_year)]


def _format_count(v: float) -> str:
    return str(int(v)) if float(v) == int(v) else repr(float(v))


def flows_to_csv(matrices: FlowMatrix | Iterable[FlowMatrix]) -> str:
    """Serialize one or more matrices to the flows CSV format.

    Rows are sorted by year, origin, destination, so equal matrices
    serialize byte-identically.
    """
    if isinstance(matrices, FlowMatrix):
        matrices = [matrices]
    buf = io.StringIO()
    buf.write(",".join(FLOW_COLUMNS) + "\n")
    for T in sorted(matrices, key=lambda m: m.year):
        for (o, d), v in T.items_sorted():
            buf.write(f"{T.year},{o},{d},{_format_count(v)}\n")
    return buf.getvalue()


def save_flows(matrices: FlowMatrix | Iterable[FlowMatrix], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(flows_to_csv(matrices))


def zones_to_csv(zones: ZoneTable) -> str:
    extras = [name for name in zones.feature_names if name != "population"]
    buf = io.StringIO()
    buf.write(",".join(ZONE_REQUIRED_COLUMNS + tuple(extras)) + "\n")
    for k, z in enumerate(zones.ids):
        row = [z, repr(float(zones.lats[k])), repr(float(zones.lons[k])),
               _format_count(zones.populations[k])]
        row += [repr(float(zones.feature_values(name)[k])) for name in extras]
        buf.write(",".join(row) + "\n")
    return buf.getvalue()


def save_zones(zones: ZoneTable, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(zones_to_csv(zones))


@dataclass(frozen=True)
class SynthConfig:
    """Generator settings for desk-scale synthetic datasets.

    ``kind`` picks the generative kernel; ``beta`` is required for
    every kind except ``radiation``.  ``noise`` is the sigma of a
    multiplicative lognormal factor applied before rounding (0 means
    noise-free).  ``lat0``/``lon0``/``extent_deg`` place the random
    zones in a square region, which controls the distance scale.
    """

    kind: str = "gravity_power"
    alpha: float = 0.03
    beta: float | None = 2.0
    noise: float = 0.0
    lat0: float = 38.0
    lon0: float = -95.0
    extent_deg: float = 4.0
    pop_min: float = 1e4
    pop_max: float = 1e6


def synth_dataset(seed: int, n_zones: int, n_years: int,
                  config: SynthConfig = SynthConfig()) -> tuple[ZoneTable, list[FlowMatrix]]:
    """Random zones plus yearly flows drawn from a classic kernel.

    Flows are the kernel predictions rounded to integers (zero rows
    dropped), optionally jittered by multiplicative lognormal noise.
    Deterministic for a fixed seed.
    """
    from .classic import ClassicModelSpec, ProductionFn, predict_matrix
    from .geo import pair_features

    if n_zones < 2:
        raise InvalidConfig("n_zones must be >= 2")
    if n_years < 1:
        raise InvalidConfig("n_years must be >= 1")
    if config.noise < 0:
        raise InvalidConfig("noise must be >= 0")
    if config.kind not in ("radiation", "ext_radiation", "gravity_power", "gravity_exp"):
        raise InvalidConfig(f"unknown generator kind {config.kind!r}")

    rng = np.random.default_rng(seed)
    width = max(2, len(str(n_zones - 1)))
    ids = [f"Z{k:0{width}d}" for k in range(n_zones)]
    half = config.extent_deg / 2.0
    lats = rng.uniform(config.lat0 - half, config.lat0 + half, n_zones)
    lons = rng.uniform(config.lon0 - half, config.lon0 + half, n_zones)
    pops = np.exp(rng.uniform(np.log(config.pop_min), np.log(config.pop_max), n_zones))
    zones = ZoneTable(ids, lats, lons, np.round(pops), {})

    beta = None if config.kind == "radiation" else float(config.beta)
    spec = ClassicModelSpec(kind=config.kind, beta=beta,
                            production=ProductionFn(alpha=config.alpha))
    pairs = pair_features(zones, ["population"])
    base = predict_matrix(spec, zones, pairs, year=0)

    matrices = []
    for year in range(n_years):
        entries: dict[tuple[str, str], int] = {}
        for (o, d), v in base.items_sorted():
            if config.noise > 0:
                v = v * np.exp(config.noise * rng.standard_normal())
            c = int(round(v))
            if c > 0:
                entries[(o, d)] = c
        matrices.append(FlowMatrix(year, entries, zones))
    return zones, matrices
