"""Shared builders for the test suite."""

import numpy as np
import pytest

from migra import FlowMatrix, ZoneTable


def random_zones(rng, n, n_extra=0, extent_deg=4.0, lat0=38.0, lon0=-95.0,
                 pop_lo=1e3, pop_hi=1e6):
    """Zones scattered in a square box with log-uniform populations."""
    width = max(2, len(str(n - 1)))
    ids = [f"Z{k:0{width}d}" for k in range(n)]
    half = extent_deg / 2.0
    lats = rng.uniform(lat0 - half, lat0 + half, n)
    lons = rng.uniform(lon0 - half, lon0 + half, n)
    pops = np.round(np.exp(rng.uniform(np.log(pop_lo), np.log(pop_hi), n)))
    extras = {f"x{k}": rng.uniform(0, 100, n) for k in range(n_extra)}
    return ZoneTable(ids, lats, lons, pops, extras)


def random_matrix(rng, zones, year=0, density=0.3, max_count=50):
    """Sparse integer flows over random ordered pairs; at least one entry."""
    entries = {}
    for i, o in enumerate(zones.ids):
        for j, d in enumerate(zones.ids):
            if i != j and rng.random() < density:
                entries[(o, d)] = int(rng.integers(1, max_count + 1))
    if not entries:
        entries[(zones.ids[0], zones.ids[1])] = 1
    return FlowMatrix(year, entries, zones)


@pytest.fixture
def collinear_zones():
    # A..C on one meridian so distances are exact multiples; the
    # middle zone is the only one intervening between the outer two
    return ZoneTable(["A", "B", "C"], [0.0, 1.0, 2.0], [0.0, 0.0, 0.0],
                     [10.0, 5.0, 7.0])
