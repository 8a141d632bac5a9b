"""Learned flow models: boosted trees, a feed-forward network, the
overlap loss both can train against, and randomized search."""

from __future__ import annotations

import numpy as np

from ..classic import ProductionFn
from ..dataset import ObservationSet
from ..flows import FlowMatrix
from .ann import BATCH_MENU, AnnModel, AnnSpec, fit_ann
from .gbt import GbtModel, GbtSpec, check_schema, fit_gbt
from .losses import cpc_loss, cpc_loss_grad, mse_loss, mse_loss_grad
from .search import SearchResult, SearchSpace, Trial, random_search, validation_cpc

__all__ = [
    "AnnModel", "AnnSpec", "BATCH_MENU", "fit_ann",
    "GbtModel", "GbtSpec", "fit_gbt",
    "cpc_loss", "cpc_loss_grad", "mse_loss", "mse_loss_grad",
    "SearchResult", "SearchSpace", "Trial", "random_search", "validation_cpc",
    "predict", "apply_production",
]


def predict(model: GbtModel | AnnModel, obs: ObservationSet) -> FlowMatrix:
    """Model predictions over the full pair set, as a real-valued matrix.

    Raw outputs are clamped at zero (counts cannot be negative; the
    tree ensemble can extrapolate below zero).
    """
    obs.require_full("prediction for evaluation")
    check_schema(model.column_names, obs)
    raw = np.maximum(model.predict_rows(np.asarray(obs.rows, dtype=np.float64)), 0.0)
    entries = {
        pair: float(v)
        for pair, v in zip(obs.pair_index, raw)
        if v > 0
    }
    return FlowMatrix(obs.target_year, entries, obs.zones)


def apply_production(T_hat: FlowMatrix, production: ProductionFn,
                     populations) -> FlowMatrix:
    """Rescale each origin row to sum to alpha * m_i.

    Rows with no predicted outflow stay empty: there is nothing to
    rescale.  ``populations`` aligns with the matrix's zone order.
    """
    m = np.asarray(populations, dtype=np.float64)
    zones = T_hat.zones
    row_sums = np.zeros(zones.n)
    for (o, _), v in T_hat.entries.items():
        row_sums[zones.index_of(o)] += v
    entries = {}
    for (o, d), v in T_hat.entries.items():
        i = zones.index_of(o)
        entries[(o, d)] = v * production.alpha * m[i] / row_sums[i]
    return FlowMatrix(T_hat.year, entries, zones)
