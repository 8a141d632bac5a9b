"""Traditional spatial-interaction models and their calibration.

Four per-origin kernels (radiation, extended radiation, power-law and
exponential gravity), each renormalized so every origin row is a
probability distribution, then scaled by the production function
G_i = alpha * m_i to give expected flows.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import (
    AllZeroPopulations,
    CalibrationFailed,
    InvalidConfig,
    ZeroDistance,
    ZeroRow,
)
from .flows import FlowMatrix, ZoneTable
from .geo import PairFeatureSet

KINDS = ("radiation", "ext_radiation", "gravity_power", "gravity_exp")
BETA_KINDS = ("ext_radiation", "gravity_power", "gravity_exp")

# Calibration searches beta in [BETA_LO, BETA_HI] on a log scale.
BETA_LO = 1e-3
BETA_HI = 1e2


@dataclass(frozen=True)
class ProductionFn:
    """Per-capita emigration rate: expected outgoing migrants alpha * m_i."""

    alpha: float

    def __post_init__(self):
        if not self.alpha >= 0:
            raise InvalidConfig(f"alpha must be >= 0, got {self.alpha}")


@dataclass(frozen=True)
class ClassicModelSpec:
    """A calibrated traditional model: kind, optional beta, production."""

    kind: str
    beta: float | None
    production: ProductionFn

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidConfig(f"unknown model kind {self.kind!r}")
        if self.kind == "radiation":
            if self.beta is not None:
                raise InvalidConfig("radiation takes no beta")
        elif self.beta is None or not self.beta > 0:
            raise InvalidConfig(f"{self.kind} requires beta > 0, got {self.beta}")

    def as_dict(self) -> dict:
        return {"kind": self.kind, "alpha": self.production.alpha,
                "beta": self.beta}

    @classmethod
    def from_dict(cls, d: dict) -> "ClassicModelSpec":
        return cls(kind=d["kind"], beta=d.get("beta"),
                   production=ProductionFn(alpha=d["alpha"]))


def fit_production(populations, outgoing) -> ProductionFn:
    """Least-squares slope through the origin of (m_i, O_i) pairs."""
    m = np.asarray(populations, dtype=np.float64)
    O = np.asarray(outgoing, dtype=np.float64)
    denom = float((m * m).sum())
    if denom == 0:
        raise AllZeroPopulations("cannot fit production: all populations zero")
    return ProductionFn(alpha=float((m * O).sum() / denom))


def _kernel(kind: str, beta: float | None, m_i: np.ndarray, m_j: np.ndarray,
            s: np.ndarray | None, d: np.ndarray | None) -> np.ndarray:
    """Unnormalized Table-style kernel values for a batch of pairs."""
    if kind == "radiation":
        num = m_i * m_j
        den = (m_i + s) * (m_i + m_j + s)
        # 0/0 only occurs when the numerator is already 0
        return np.divide(num, den, out=np.zeros_like(num), where=num != 0)
    if kind == "ext_radiation":
        x1 = (m_i + s) ** beta
        x2 = (m_i + m_j + s) ** beta
        x3 = m_i ** beta
        return (x2 - x1) * (x3 + 1.0) / ((x1 + 1.0) * (x2 + 1.0))
    if kind == "gravity_power":
        if np.any(d == 0):
            raise ZeroDistance("zero distance with a power-law deterrence")
        return m_j * d ** (-beta)
    if kind == "gravity_exp":
        return m_j * np.exp(-beta * d)
    raise InvalidConfig(f"unknown model kind {kind!r}")


def _pair_arrays(kind: str, zones: ZoneTable, pairs: PairFeatureSet,
                 block: slice | None = None):
    sel = block if block is not None else slice(None)
    m = zones.populations
    m_i = m[pairs.origin_idx[sel]]
    m_j = m[pairs.dest_idx[sel]]
    s = pairs.column("intervening_population")[sel] if kind in ("radiation", "ext_radiation") else None
    d = pairs.column("distance")[sel] if kind in ("gravity_power", "gravity_exp") else None
    return m_i, m_j, s, d


def _check_finite(kern: np.ndarray, spec: ClassicModelSpec) -> None:
    if not np.all(np.isfinite(kern)):
        raise InvalidConfig(
            f"non-finite {spec.kind} kernel at beta={spec.beta}; "
            "reduce beta or rescale the inputs")


def predict_row_probs(spec: ClassicModelSpec, zones: ZoneTable,
                      pairs: PairFeatureSet, origin_id: str) -> np.ndarray:
    """Destination probabilities for one origin, in destination-id order.

    The returned vector has length n - 1 and sums to 1; destinations
    appear in zone-table order with the origin skipped.
    """
    i = zones.index_of(origin_id)
    block = pairs.origin_block(i)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        kern = _kernel(spec.kind, spec.beta, *_pair_arrays(spec.kind, zones, pairs, block))
    _check_finite(kern, spec)
    total = kern.sum()
    if total <= 0:
        raise ZeroRow(f"all kernel values zero for origin {origin_id!r}")
    return kern / total


def predict_matrix(spec: ClassicModelSpec, zones: ZoneTable,
                   pairs: PairFeatureSet, year: int = 0) -> FlowMatrix:
    """Expected flows alpha * m_i * P_ij, real-valued, for every origin.

    Origins whose kernel row is entirely zero contribute no entries; a
    warning is emitted for each.
    """
    n = zones.n
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        kern = _kernel(spec.kind, spec.beta,
                       *_pair_arrays(spec.kind, zones, pairs))
    _check_finite(kern, spec)
    rows = kern.reshape(n, n - 1)
    sums = rows.sum(axis=1)
    zero_rows = sums == 0
    for i in np.flatnonzero(zero_rows):
        warnings.warn(f"zero kernel row for origin {zones.ids[i]!r}; "
                      "predicting no outflow", stacklevel=2)
    safe = np.where(zero_rows, 1.0, sums)
    scale = spec.production.alpha * zones.populations / safe
    scale[zero_rows] = 0.0
    pred = rows * scale[:, None]

    entries: dict[tuple[str, str], float] = {}
    for i in range(n):
        row = pred[i]
        k = 0
        for j in range(n):
            if j == i:
                continue
            if row[k] > 0:
                entries[(zones.ids[i], zones.ids[j])] = float(row[k])
            k += 1
    return FlowMatrix(year, entries, zones)


def _truth_vector(T: FlowMatrix, pairs: PairFeatureSet) -> np.ndarray:
    t = np.zeros(len(pairs))
    for (o, d), v in T.entries.items():
        t[pairs.row_index(o, d)] = v
    return t


def _cpc_arrays(t: np.ndarray, t_hat: np.ndarray) -> float:
    denom = t.sum() + t_hat.sum()
    if denom == 0:
        return 1.0
    return float(2.0 * np.minimum(t, t_hat).sum() / denom)


_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def _golden_max(f, lo: float, hi: float, tol: float) -> tuple[float, float]:
    """Golden-section maximum of f on [lo, hi]; returns (x, f(x))."""
    c = hi - _INVPHI * (hi - lo)
    d = lo + _INVPHI * (hi - lo)
    fc, fd = f(c), f(d)
    while hi - lo > tol:
        if fc >= fd:
            hi, d, fd = d, c, fc
            c = hi - _INVPHI * (hi - lo)
            fc = f(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + _INVPHI * (hi - lo)
            fd = f(d)
    return (c, fc) if fc >= fd else (d, fd)


def calibrate_beta(kind: str, zones: ZoneTable, pairs: PairFeatureSet,
                   T_train: FlowMatrix, production: ProductionFn,
                   grid_points: int = 50) -> ClassicModelSpec:
    """Pick the beta maximizing CPC against T_train.

    Golden-section search on log beta over [1e-3, 1e2] to 1e-3 relative
    tolerance, guarded by a log-spaced grid scan: when the grid finds a
    better point than the golden result (a unimodality failure), the
    search is repeated bracketed around that grid point.
    """
    if kind == "radiation":
        raise InvalidConfig("radiation has no beta to calibrate")
    if kind not in BETA_KINDS:
        raise InvalidConfig(f"unknown model kind {kind!r}")

    n = zones.n
    m_i, m_j, s, d = _pair_arrays(kind, zones, pairs)
    t = _truth_vector(T_train, pairs)
    alpha_m = production.alpha * zones.populations

    def score(log_beta: float) -> float:
        beta = math.exp(log_beta)
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            kern = _kernel(kind, beta, m_i, m_j, s, d)
            rows = kern.reshape(n, n - 1)
            sums = rows.sum(axis=1)
            safe = np.where(sums == 0, 1.0, sums)
            scale = alpha_m / safe
            scale[sums == 0] = 0.0
            pred = (rows * scale[:, None]).ravel()
        if not np.all(np.isfinite(pred)):
            return -math.inf
        return _cpc_arrays(t, pred)

    lo, hi = math.log(BETA_LO), math.log(BETA_HI)
    grid = np.linspace(lo, hi, grid_points)
    grid_scores = [score(x) for x in grid]
    best_k = int(np.argmax(grid_scores))
    if not math.isfinite(grid_scores[best_k]):
        raise CalibrationFailed(f"CPC non-finite across the whole beta range for {kind}")

    tol = 1e-3
    best_x, best_f = _golden_max(score, lo, hi, tol)
    if grid_scores[best_k] > best_f:
        blo = grid[max(best_k - 1, 0)]
        bhi = grid[min(best_k + 1, grid_points - 1)]
        x2, f2 = _golden_max(score, blo, bhi, tol)
        if f2 > best_f:
            best_x, best_f = x2, f2
        if grid_scores[best_k] > best_f:
            best_x, best_f = grid[best_k], grid_scores[best_k]
    return ClassicModelSpec(kind=kind, beta=math.exp(best_x), production=production)
