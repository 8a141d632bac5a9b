import json

import numpy as np
import pytest

from conftest import random_zones
from migra import (
    FeatureSchema,
    FlowMatrix,
    SynthConfig,
    build,
    downsample,
    pair_features,
    synth_dataset,
)
from migra.errors import AllTrialsFailed, InvalidConfig, SampledSetError
from migra.learn import (
    AnnSpec,
    GbtModel,
    GbtSpec,
    SearchSpace,
    random_search,
    validation_cpc,
)


def flow_pair(seed=1, n=12):
    zones, flows = synth_dataset(seed, n, 2, SynthConfig(alpha=0.05, beta=2.0))
    pairs = pair_features(zones, ("population",))
    schema = FeatureSchema.traditional()
    train = build(zones, pairs, flows[0], schema)
    valid = build(zones, pairs, flows[1], schema)
    return train, valid


def test_space_validation():
    with pytest.raises(InvalidConfig):
        SearchSpace("forest", 1, 5)
    with pytest.raises(InvalidConfig):
        SearchSpace("gbt", 3, 2)
    with pytest.raises(InvalidConfig):
        SearchSpace("gbt", 0, 5)


def test_k_range_tracks_density():
    train, _ = flow_pair()
    assert train.positive_density >= 0.01
    dense = SearchSpace.for_dataset("gbt", train)
    assert (dense.k_lo, dense.k_hi) == (1, 5)

    rng = np.random.default_rng(0)
    zones = random_zones(rng, 15)
    pairs = pair_features(zones, ("population",))
    sparse_T = FlowMatrix(0, {(zones.ids[0], zones.ids[1]): 3,
                              (zones.ids[2], zones.ids[3]): 1}, zones)
    sparse = build(zones, pairs, sparse_T, FeatureSchema.traditional())
    assert sparse.positive_density == pytest.approx(2 / 210)
    space = SearchSpace.for_dataset("ann", sparse)
    assert (space.k_lo, space.k_hi) == (5, 100)


def test_sampled_specs_stay_in_range():
    rng = np.random.default_rng(99)
    gbt_space = SearchSpace("gbt", 1, 5)
    ann_space = SearchSpace("ann", 5, 100)
    for _ in range(200):
        g = gbt_space.sample(rng)
        assert 2 <= g.max_depth <= 7
        assert 25 <= g.n_estimators <= 275
        assert 0.0 < g.learning_rate <= 0.5
        assert 1 <= g.k <= 5
        a = ann_space.sample(rng)
        assert a.loss in ("cpc_loss", "mse")
        assert 1 <= a.n_layers <= 5
        assert 16 <= a.layer_width <= 128
        assert 10 <= a.n_epochs <= 50
        assert a.batch_size in (512, 1024, 2048, 4096, 8192, 16384)
        assert 5 <= a.k <= 100


def test_search_is_deterministic():
    train, valid = flow_pair()
    space = SearchSpace("gbt", 1, 3)
    r1 = random_search(space, train, valid, n_trials=4, seed=10)
    r2 = random_search(space, train, valid, n_trials=4, seed=10)
    assert [t.spec for t in r1.trials] == [t.spec for t in r2.trials]
    assert [t.cpc for t in r1.trials] == [t.cpc for t in r2.trials]
    assert r1.best.index == r2.best.index
    r3 = random_search(space, train, valid, n_trials=4, seed=11)
    assert [t.spec for t in r3.trials] != [t.spec for t in r1.trials]


def test_single_trial():
    train, valid = flow_pair()
    res = random_search(SearchSpace("gbt", 1, 2), train, valid,
                        n_trials=1, seed=0)
    assert len(res.trials) == 1
    assert res.best is res.trials[0]
    assert isinstance(res.best.model, GbtModel)
    assert 0.0 <= res.best.cpc <= 1.0


def test_injected_specs_compete():
    train, valid = flow_pair()
    good = GbtSpec(max_depth=4, n_estimators=80, learning_rate=0.3, k=2)
    # one stump with a microscopic step barely moves off the mean
    poor = GbtSpec(max_depth=1, n_estimators=1, learning_rate=1e-12, k=2)
    res = random_search(SearchSpace("gbt", 1, 2), train, valid,
                        n_trials=2, seed=0, initial_specs=(poor, good))
    assert [t.spec for t in res.trials] == [poor, good]
    assert res.best.spec == good
    assert res.best.cpc > res.trials[0].cpc


def test_too_many_initial_specs():
    train, valid = flow_pair()
    spec = GbtSpec(2, 25, 0.1)
    with pytest.raises(InvalidConfig):
        random_search(SearchSpace("gbt", 1, 2), train, valid, n_trials=1,
                      seed=0, initial_specs=(spec, spec))


def test_all_trials_failed():
    train, valid = flow_pair()
    empty = FlowMatrix(train.target_year, {}, train.zones)
    pairs = pair_features(train.zones, ("population",))
    no_pos = build(train.zones, pairs, empty, FeatureSchema.traditional())
    with pytest.raises(AllTrialsFailed) as info:
        random_search(SearchSpace("gbt", 1, 2), no_pos, valid,
                      n_trials=3, seed=0)
    assert "NoPositives" in str(info.value)


def test_search_refuses_downsampled_inputs():
    train, valid = flow_pair()
    sub = downsample(train, k=1, seed=0)
    with pytest.raises(SampledSetError):
        random_search(SearchSpace("gbt", 1, 2), sub, valid, n_trials=1)
    with pytest.raises(SampledSetError):
        validation_cpc(None, sub)


def test_log_lines_are_json():
    train, valid = flow_pair()
    res = random_search(SearchSpace("ann", 1, 2), train, valid,
                        n_trials=2, seed=3)
    lines = res.log_lines().strip().split("\n")
    assert len(lines) == 2
    for i, line in enumerate(lines):
        rec = json.loads(line)
        assert rec["trial"] == i
        assert rec["family"] == "ann"
        assert rec["error"] is None
        assert set(rec["spec"]) == {"loss", "n_layers", "layer_width",
                                    "n_epochs", "batch_size", "k"}
        assert 0.0 <= rec["cpc"] <= 1.0
        assert rec["seconds"] >= 0.0
