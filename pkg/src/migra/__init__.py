"""Origin/destination migration-flow prediction.

Traditional spatial-interaction models (radiation, extended radiation,
two gravity variants), gradient-boosted trees, and a feed-forward
network trained with a flow-overlap loss, evaluated under a sliding
train/validation/test year protocol.
"""

from . import errors
from .classic import (
    ClassicModelSpec,
    ProductionFn,
    calibrate_beta,
    fit_production,
    predict_matrix,
    predict_row_probs,
)
from .dataset import (
    FeatureSchema,
    ObservationSet,
    Scaler,
    apply_scaler,
    build,
    downsample,
    fit_scaler,
)
from .flows import (
    FlowMatrix,
    SynthConfig,
    ZoneAggregates,
    ZoneTable,
    aggregates,
    load_all_flows,
    load_flows,
    load_zones,
    save_flows,
    save_zones,
    synth_dataset,
)
from .geo import (
    EARTH_RADIUS_KM,
    Centroid,
    InterveningQuery,
    PairFeatureSet,
    distance_km,
    intervening_sum,
    pair_features,
)
from .learn import (
    AnnModel,
    AnnSpec,
    GbtModel,
    GbtSpec,
    SearchResult,
    SearchSpace,
    Trial,
    apply_production,
    cpc_loss,
    cpc_loss_grad,
    fit_ann,
    fit_gbt,
    predict,
    random_search,
)
from .metrics import (
    EvalReport,
    cpc,
    cpc_d,
    evaluate,
    incoming_metrics,
    r2,
    rmse,
)
from .pipeline import (
    ALL_MODELS,
    RunConfig,
    RunReport,
    Triplet,
    TripletResult,
    YearSlice,
    build_triplets,
    export_error_map,
    run_all,
    run_triplet,
)

__version__ = "0.1.0"
