"""Year-triplet evaluation protocol and run reporting.

Each triplet uses year t-2 for hyperparameter search, year t-1 for
model selection, calibration, and the final refit, and year t only
for scoring.  The two phases are separate functions; nothing in the
fit phase receives test-year data.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .classic import (
    BETA_KINDS,
    KINDS as CLASSIC_KINDS,
    ClassicModelSpec,
    ProductionFn,
    calibrate_beta,
    fit_production,
    predict_matrix,
)
from .dataset import FeatureSchema, ObservationSet, build, downsample
from .errors import InsufficientYears, InvalidConfig, MigraError
from .flows import FlowMatrix, ZoneTable, aggregates
from .geo import PairFeatureSet, pair_features
from .learn import (
    GbtSpec,
    SearchResult,
    SearchSpace,
    apply_production,
    fit_ann,
    fit_gbt,
    predict,
    random_search,
)
from .metrics import EvalReport, evaluate

ML_KINDS = ("gbt", "ann")
ALL_MODELS = CLASSIC_KINDS + ML_KINDS
METRIC_NAMES = ("cpc", "cpc_d", "rmse", "r2", "incoming_mae", "incoming_r2")


@dataclass(frozen=True)
class RunConfig:
    """What to evaluate: model list, feature variant, search budget."""

    models: tuple[str, ...] = ALL_MODELS
    features: str = "traditional"
    production: bool = False
    n_trials: int = 50
    seed: int = 0

    def __post_init__(self):
        for m in self.models:
            if m not in ALL_MODELS:
                raise InvalidConfig(f"unknown model {m!r}; choose from {ALL_MODELS}")
        if len(set(self.models)) != len(self.models):
            raise InvalidConfig("duplicate model names")
        if self.features not in ("traditional", "extended"):
            raise InvalidConfig(f"features must be 'traditional' or 'extended', "
                                f"got {self.features!r}")
        if self.n_trials < 1:
            raise InvalidConfig(f"n_trials must be >= 1, got {self.n_trials}")

    def schema(self, zones: ZoneTable) -> FeatureSchema:
        if self.features == "traditional":
            return FeatureSchema.traditional()
        return FeatureSchema.extended(zones)

    def as_dict(self) -> dict:
        return {"models": list(self.models), "features": self.features,
                "production": self.production, "n_trials": self.n_trials,
                "seed": self.seed}


@dataclass(frozen=True)
class YearSlice:
    """One year of data: observation rows targeting that year's flows."""

    year: int
    obs: ObservationSet
    truth: FlowMatrix


@dataclass(frozen=True)
class Triplet:
    """Train / validation / test years.  ``test`` may be a zero-argument
    loader; it is only called after every model is fitted, which keeps
    the no-peeking property checkable."""

    index: int
    train: YearSlice
    valid: YearSlice
    test: YearSlice | Callable[[], YearSlice]

    def resolve_test(self) -> YearSlice:
        return self.test() if callable(self.test) else self.test


@dataclass(frozen=True)
class ModelOutcome:
    """One model's scores on one test year, or the error that stopped it."""

    name: str
    params: dict
    report: EvalReport | None = None
    error: str | None = None
    importances: tuple[tuple[str, float], ...] | None = None

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "params": self.params,
            "metrics": self.report.as_dict() if self.report else None,
            "error": self.error,
            "importances": [[n, v] for n, v in self.importances] if self.importances else None,
        }


@dataclass(frozen=True)
class TripletResult:
    train_year: int
    valid_year: int
    test_year: int
    outcomes: tuple[ModelOutcome, ...]
    search_logs: dict[str, SearchResult] = field(default_factory=dict,
                                                 compare=False, repr=False)

    def as_dict(self) -> dict:
        # search logs carry wall times; kept out so reports are
        # byte-stable across runs
        return {
            "train_year": self.train_year,
            "valid_year": self.valid_year,
            "test_year": self.test_year,
            "outcomes": [o.as_dict() for o in self.outcomes],
        }


class _Fitted:
    """Fit-phase artifacts for one model, awaiting a test year."""

    def __init__(self, name: str, params: dict, classic_spec=None,
                 ml_model=None, production: ProductionFn | None = None,
                 importances=None, search: SearchResult | None = None,
                 error: str | None = None):
        self.name = name
        self.params = params
        self.classic_spec = classic_spec
        self.ml_model = ml_model
        self.production = production
        self.importances = importances
        self.search = search
        self.error = error


def _model_seed(master: int, triplet_index: int, model_index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=master,
                                  spawn_key=(triplet_index, model_index))


def fit_phase(config: RunConfig, zones: ZoneTable, pairs: PairFeatureSet,
              train: YearSlice, valid: YearSlice,
              triplet_index: int) -> list[_Fitted]:
    """Search, calibrate, and refit every requested model.

    Classic alpha and beta come from the validation year (the year
    preceding test); ML models search on train, then refit the winning
    spec on the validation year.  Per-model failures are recorded so
    one bad model cannot sink the rest.
    """
    alpha = fit_production(zones.populations, aggregates(valid.truth).outgoing)
    fitted: list[_Fitted] = []
    for mi, name in enumerate(config.models):
        try:
            if name in CLASSIC_KINDS:
                if name in BETA_KINDS:
                    spec = calibrate_beta(name, zones, pairs, valid.truth, alpha)
                else:
                    spec = ClassicModelSpec(kind=name, beta=None, production=alpha)
                fitted.append(_Fitted(name, spec.as_dict(), classic_spec=spec))
                continue

            seed = _model_seed(config.seed, triplet_index, mi)
            search_seed, ds_seed, fit_seed = seed.spawn(3)
            space = SearchSpace.for_dataset(name, train.obs)
            result = random_search(space, train.obs, valid.obs,
                                   n_trials=config.n_trials, seed=search_seed)
            spec = result.best.spec
            refit_train = downsample(valid.obs, spec.k, ds_seed)
            if isinstance(spec, GbtSpec):
                model = fit_gbt(spec, refit_train)
                imp = tuple(sorted(zip(model.column_names,
                                       (float(v) for v in model.feature_importances)),
                                   key=lambda kv: -kv[1]))
            else:
                model = fit_ann(spec, refit_train, fit_seed)
                imp = None
            fitted.append(_Fitted(name, spec.as_dict(), ml_model=model,
                                  production=alpha, importances=imp,
                                  search=result))
        except MigraError as exc:
            fitted.append(_Fitted(name, {}, error=f"{type(exc).__name__}: {exc}"))
    return fitted


def eval_phase(config: RunConfig, zones: ZoneTable, pairs: PairFeatureSet,
               fitted: list[_Fitted], test: YearSlice) -> list[ModelOutcome]:
    """Score each fitted model on the held-out year."""
    outcomes: list[ModelOutcome] = []
    for f in fitted:
        if f.error is not None:
            outcomes.append(ModelOutcome(f.name, f.params, error=f.error))
            continue
        try:
            if f.classic_spec is not None:
                T_hat = predict_matrix(f.classic_spec, zones, pairs, year=test.year)
            else:
                T_hat = predict(f.ml_model, test.obs)
            outcomes.append(ModelOutcome(
                f.name, f.params, report=evaluate(test.truth, T_hat, pairs),
                importances=f.importances))
            if config.production and f.ml_model is not None:
                scaled = apply_production(T_hat, f.production, zones.populations)
                outcomes.append(ModelOutcome(
                    f.name + "+production",
                    dict(f.params, alpha=f.production.alpha),
                    report=evaluate(test.truth, scaled, pairs)))
        except MigraError as exc:
            outcomes.append(ModelOutcome(f.name, f.params,
                                         error=f"{type(exc).__name__}: {exc}"))
    return outcomes


def run_triplet(config: RunConfig, zones: ZoneTable, pairs: PairFeatureSet,
                triplet: Triplet,
                after_fit: Callable | None = None) -> TripletResult:
    """Full protocol for one (t-2, t-1, t) window.

    ``after_fit`` runs between the fit and evaluation phases; tests use
    it to pin down when test data is first touched.
    """
    fitted = fit_phase(config, zones, pairs, triplet.train, triplet.valid,
                       triplet.index)
    if after_fit is not None:
        after_fit(fitted)
    test = triplet.resolve_test()
    outcomes = eval_phase(config, zones, pairs, fitted, test)
    logs = {f.name: f.search for f in fitted if f.search is not None}
    return TripletResult(train_year=triplet.train.year,
                         valid_year=triplet.valid.year,
                         test_year=test.year,
                         outcomes=tuple(outcomes),
                         search_logs=logs)


@dataclass(frozen=True)
class RunReport:
    """Per-triplet outcomes plus mean and standard deviation per model."""

    config: RunConfig
    n_zones: int
    years: tuple[int, ...]
    triplets: tuple[TripletResult, ...]

    def model_names(self) -> tuple[str, ...]:
        names: list[str] = []
        for tr in self.triplets:
            for o in tr.outcomes:
                if o.name not in names:
                    names.append(o.name)
        return tuple(names)

    def aggregate(self) -> dict[str, dict[str, tuple[float, float]]]:
        """metric -> (mean, population std) across successful triplets."""
        out: dict[str, dict[str, tuple[float, float]]] = {}
        for name in self.model_names():
            reports = [o.report for tr in self.triplets for o in tr.outcomes
                       if o.name == name and o.report is not None]
            if not reports:
                continue
            per_metric = {}
            for metric in METRIC_NAMES:
                vals = np.array([r.as_dict()[metric] for r in reports])
                per_metric[metric] = (float(vals.mean()), float(vals.std()))
            out[name] = per_metric
        return out

    def mean_importances(self) -> tuple[tuple[str, float], ...]:
        """Feature importances averaged over triplets, highest first."""
        sums: dict[str, float] = {}
        counts: dict[str, int] = {}
        for tr in self.triplets:
            for o in tr.outcomes:
                for feat, v in o.importances or ():
                    sums[feat] = sums.get(feat, 0.0) + v
                    counts[feat] = counts.get(feat, 0) + 1
        means = {f: sums[f] / counts[f] for f in sums}
        return tuple(sorted(means.items(), key=lambda kv: (-kv[1], kv[0])))

    def as_dict(self) -> dict:
        return {
            "config": self.config.as_dict(),
            "n_zones": self.n_zones,
            "years": list(self.years),
            "triplets": [tr.as_dict() for tr in self.triplets],
            "aggregate": {
                name: {metric: {"mean": mv[0], "std": mv[1]}
                       for metric, mv in per.items()}
                for name, per in self.aggregate().items()
            },
            "feature_importances": [[f, v] for f, v in self.mean_importances()],
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2, sort_keys=True) + "\n"

    def to_text(self) -> str:
        lines = []
        lines.append("migration flow evaluation")
        lines.append(f"zones: {self.n_zones}   years: {', '.join(map(str, self.years))}")
        lines.append(f"features: {self.config.features}   trials: "
                     f"{self.config.n_trials}   seed: {self.config.seed}")
        lines.append("")
        agg = self.aggregate()
        rows = []
        for name in self.model_names():
            if name not in agg:
                rows.append([name, "(all triplets failed)"])
                continue
            rows.append([name] + [f"{mv[0]:.4f} ± {mv[1]:.4f}"
                                  for mv in agg[name].values()])
        headers = ["model"] + list(METRIC_NAMES)
        widths = [max(len(headers[c]), *(len(r[c]) for r in rows if c < len(r)))
                  for c in range(len(headers))]
        def fmt(cells):
            first = f"{cells[0]:<{widths[0]}}"
            rest = "".join(f"  {c:>{widths[k + 1]}}"
                           for k, c in enumerate(cells[1:]))
            return first + rest
        lines.append(fmt(headers))
        lines.append("-" * len(fmt(headers)))
        lines.extend(fmt(r) for r in rows)
        failures = [(tr.test_year, o.name, o.error)
                    for tr in self.triplets for o in tr.outcomes if o.error]
        if failures:
            lines.append("")
            lines.append("failures:")
            for year, name, err in failures:
                lines.append(f"  test year {year}, {name}: {err}")
        imp = self.mean_importances()
        if imp:
            lines.append("")
            lines.append("top feature importances (mean across triplets):")
            for feat, v in imp[:10]:
                lines.append(f"  {feat:<36}{v:.4f}")
        return "\n".join(lines) + "\n"


def build_triplets(zones: ZoneTable, pairs: PairFeatureSet,
                   flows: list[FlowMatrix],
                   schema: FeatureSchema) -> list[Triplet]:
    """Slide the 3-year window over the flow years, in year order."""
    flows = sorted(flows, key=lambda T: T.year)
    if len(flows) < 3:
        raise InsufficientYears(f"need at least 3 years of flows, got {len(flows)}")
    slices = [YearSlice(T.year, build(zones, pairs, T, schema), T) for T in flows]
    return [Triplet(i, slices[i], slices[i + 1], slices[i + 2])
            for i in range(len(slices) - 2)]


def run_all(config: RunConfig, zones: ZoneTable,
            flows: list[FlowMatrix],
            pairs: PairFeatureSet | None = None) -> RunReport:
    """The whole protocol: every triplet, every model, aggregated."""
    schema = config.schema(zones)
    if pairs is None:
        variables = (("population",) if config.features == "traditional"
                     else zones.feature_names)
        pairs = pair_features(zones, variables)
    triplets = build_triplets(zones, pairs, flows, schema)
    results = tuple(run_triplet(config, zones, pairs, t) for t in triplets)
    return RunReport(config=config, n_zones=zones.n,
                     years=tuple(T.year for T in sorted(flows, key=lambda T: T.year)),
                     triplets=results)


def export_error_map(T: FlowMatrix, T_hat: FlowMatrix, zones: ZoneTable,
                     csv_path, geojson_path=None) -> None:
    """Per-zone incoming-migrant errors as CSV and GeoJSON points.

    Error is truth minus prediction, so over-predicted zones come out
    negative.  The GeoJSON lands next to the CSV unless a path is given.
    """
    v = aggregates(T).incoming
    v_hat = aggregates(T_hat).incoming
    if geojson_path is None:
        base = str(csv_path)
        geojson_path = (base[:-4] if base.endswith(".csv") else base) + ".geojson"

    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        fh.write("zone_id,lat,lon,incoming_true,incoming_pred,error\n")
        for i, z in enumerate(zones.ids):
            fh.write(f"{z},{float(zones.lats[i])!r},{float(zones.lons[i])!r},"
                     f"{float(v[i])!r},{float(v_hat[i])!r},"
                     f"{float(v[i] - v_hat[i])!r}\n")

    features = []
    for i, z in enumerate(zones.ids):
        features.append({
            "type": "Feature",
            "geometry": {"type": "Point",
                         "coordinates": [float(zones.lons[i]), float(zones.lats[i])]},
            "properties": {"zone_id": z,
                           "incoming_true": float(v[i]),
                           "incoming_pred": float(v_hat[i]),
                           "error": float(v[i] - v_hat[i])},
        })
    with open(geojson_path, "w", encoding="utf-8") as fh:
        json.dump({"type": "FeatureCollection", "features": features}, fh)
        fh.write("\n")
