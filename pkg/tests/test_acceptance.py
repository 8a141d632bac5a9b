"""Gate tests: one per promised behavior, each printing a verdict line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the verdicts
alongside the usual pass/fail markers.  The first three carry runtime
budgets and assert them.
"""

import json
import os
import time

import numpy as np
import pytest
from scipy.spatial.distance import braycurtis

from conftest import random_matrix, random_zones
from migra import (
    ClassicModelSpec,
    FeatureSchema,
    FlowMatrix,
    ProductionFn,
    RunConfig,
    SynthConfig,
    Triplet,
    aggregates,
    build,
    build_triplets,
    calibrate_beta,
    cpc,
    downsample,
    evaluate,
    fit_production,
    load_all_flows,
    load_zones,
    pair_features,
    predict_matrix,
    predict_row_probs,
    run_all,
    run_triplet,
    synth_dataset,
)
from migra.dataset import ObservationSet
from migra.errors import SampledSetError
from migra.learn import (
    AnnSpec,
    GbtSpec,
    apply_production,
    cpc_loss,
    cpc_loss_grad,
    fit_ann,
    fit_gbt,
    predict,
    random_search,
    validation_cpc,
    SearchSpace,
)
from migra.pipeline import YearSlice


def _verdict(n: int, detail: str) -> None:
    print(f"\ncriterion {n}: PASS - {detail}")


# --------------------------------------------------------------- criterion 1

def test_criterion_1_gradient_matches_finite_differences():
    t0 = time.perf_counter()
    rng = np.random.default_rng(606)
    eps = 1e-5
    checked = 0
    worst = 0.0
    while checked < 1000:
        n = int(rng.integers(20, 80))
        y = rng.uniform(0.0, 5.0, n)
        y_hat = rng.uniform(0.0, 5.0, n)
        g = cpc_loss_grad(y, y_hat)
        for j in np.flatnonzero(np.abs(y_hat - y) > 1e-3):
            up, dn = y_hat.copy(), y_hat.copy()
            up[j] += eps
            dn[j] -= eps
            fd = (cpc_loss(y, up) - cpc_loss(y, dn)) / (2 * eps)
            rel = abs(g[j] - fd) / abs(fd)
            assert rel <= 1e-6, f"coordinate {j}: rel error {rel}"
            worst = max(worst, rel)
            checked += 1
    elapsed = time.perf_counter() - t0
    assert elapsed < 5.0, f"took {elapsed:.1f}s"
    _verdict(1, f"{checked} coordinates checked, worst rel error "
                f"{worst:.2e}, {elapsed:.2f}s")


# --------------------------------------------------------------- criterion 2

def _dense(T: FlowMatrix, order) -> np.ndarray:
    return np.array([T.value(o, d) for o, d in order])


def test_criterion_2_metrics_match_brute_force():
    t0 = time.perf_counter()
    rng = np.random.default_rng(1234)
    instances = 0
    while instances < 200:
        zones = random_zones(rng, 10)
        pairs = pair_features(zones, ("population",))
        order = [(o, d) for o in zones.ids for d in zones.ids if o != d]
        dist = {p: pairs.distance(*p) for p in order}
        P = len(order)
        for _ in range(20):
            density = float(rng.uniform(0.05, 0.4))
            T = random_matrix(rng, zones, density=density)
            T_hat = random_matrix(rng, zones, density=density)
            t = _dense(T, order)
            t_hat = _dense(T_hat, order)

            report = evaluate(T, T_hat, pairs)

            bf_cpc = 2 * np.minimum(t, t_hat).sum() / (t.sum() + t_hat.sum())
            assert report.cpc == pytest.approx(bf_cpc, rel=1e-12)
            assert report.cpc == pytest.approx(
                1.0 - braycurtis(t, t_hat), rel=1e-12)

            hist, hist_hat = {}, {}
            for p, v in zip(order, t):
                if v:
                    b = int(dist[p] // 2.0)
                    hist[b] = hist.get(b, 0.0) + v
            for p, v in zip(order, t_hat):
                if v:
                    b = int(dist[p] // 2.0)
                    hist_hat[b] = hist_hat.get(b, 0.0) + v
            bins = sorted(set(hist) | set(hist_hat))
            hv = np.array([hist.get(b, 0.0) for b in bins])
            hv_hat = np.array([hist_hat.get(b, 0.0) for b in bins])
            bf_cpc_d = 2 * np.minimum(hv, hv_hat).sum() / (hv.sum() + hv_hat.sum())
            assert report.cpc_d == pytest.approx(bf_cpc_d, rel=1e-12)

            bf_rmse = float(np.sqrt(((t - t_hat) ** 2).sum() / P))
            assert report.rmse == pytest.approx(bf_rmse, rel=1e-12)

            t_bar = t.sum() / P
            bf_r2 = 1.0 - ((t - t_hat) ** 2).sum() / ((t - t_bar) ** 2).sum()
            assert report.r2 == pytest.approx(bf_r2, rel=1e-12)

            v = _incoming(T, zones)
            v_hat = _incoming(T_hat, zones)
            bf_mae = float(np.abs(v - v_hat).mean())
            assert report.incoming_mae == pytest.approx(bf_mae, rel=1e-12)
            bf_inc_r2 = 1.0 - ((v - v_hat) ** 2).sum() / ((v - v.mean()) ** 2).sum()
            assert report.incoming_r2 == pytest.approx(bf_inc_r2, rel=1e-12)
            instances += 1
    elapsed = time.perf_counter() - t0
    assert elapsed < 10.0, f"took {elapsed:.1f}s"
    _verdict(2, f"{instances} instances, six statistics each vs naive dense "
                f"recomputation at 1e-12, {elapsed:.2f}s")


def _incoming(T: FlowMatrix, zones) -> np.ndarray:
    v = np.zeros(zones.n)
    for (_, d), val in T.entries.items():
        v[zones.index_of(d)] += val
    return v


# --------------------------------------------------------------- criterion 3

def test_criterion_3_closed_loop_calibration():
    t0 = time.perf_counter()
    cases = [("gravity_power", 2.0, 4.0), ("gravity_exp", 0.1, 1.5),
             ("ext_radiation", 0.5, 4.0)]
    summary = []
    for kind, beta_true, extent in cases:
        config = SynthConfig(kind=kind, alpha=0.04, beta=beta_true,
                             noise=0.0, extent_deg=extent)
        zones, flows = synth_dataset(101, 50, 2, config)
        pairs = pair_features(zones, ("population",))
        alpha = fit_production(zones.populations, aggregates(flows[0]).outgoing)
        spec = calibrate_beta(kind, zones, pairs, flows[0], alpha)
        rel = abs(spec.beta - beta_true) / beta_true
        assert rel <= 0.05, f"{kind}: beta {spec.beta} vs {beta_true}"
        test_cpc = cpc(flows[1], predict_matrix(spec, zones, pairs, year=1))
        assert test_cpc >= 0.95, f"{kind}: test cpc {test_cpc}"
        summary.append(f"{kind} beta rel err {rel:.1%} cpc {test_cpc:.3f}")
    elapsed = time.perf_counter() - t0
    assert elapsed < 60.0, f"took {elapsed:.1f}s"
    _verdict(3, "; ".join(summary) + f", {elapsed:.2f}s")


# --------------------------------------------------------------- criterion 4

def test_criterion_4_rows_normalize_and_production_scales():
    rng = np.random.default_rng(77)
    specs = {
        "radiation": ClassicModelSpec("radiation", None, ProductionFn(0.05)),
        "ext_radiation": ClassicModelSpec("ext_radiation", 0.5, ProductionFn(0.05)),
        "gravity_power": ClassicModelSpec("gravity_power", 2.0, ProductionFn(0.05)),
        "gravity_exp": ClassicModelSpec("gravity_exp", 0.02, ProductionFn(0.05)),
    }
    checked_rows = 0
    for table_seed in range(2):
        zones = random_zones(np.random.default_rng(table_seed), 100)
        pairs = pair_features(zones, ("population",))
        for kind, spec in specs.items():
            for origin in zones.ids:
                probs = predict_row_probs(spec, zones, pairs, origin)
                assert abs(probs.sum() - 1.0) <= 1e-9, (kind, origin)
                checked_rows += 1

        T_hat = random_matrix(rng, zones, density=0.1, max_count=80)
        prod = ProductionFn(0.02)
        scaled = apply_production(T_hat, prod, zones.populations)
        out = aggregates(scaled).outgoing
        nonzero = 0
        for i in range(zones.n):
            target = prod.alpha * zones.populations[i]
            if out[i] > 0:
                assert abs(out[i] - target) / target <= 1e-9
                nonzero += 1
        assert nonzero > 0
    _verdict(4, f"{checked_rows} origin rows sum to 1 +/- 1e-9 across four "
                "kernels; rescaled rows hit alpha*m_i to 1e-9 relative")


# --------------------------------------------------------------- criterion 5

def test_criterion_5_downsampling_contract():
    rng = np.random.default_rng(55)
    trials = 0
    for _ in range(25):
        n = int(rng.integers(8, 21))
        zones = random_zones(rng, n)
        pairs = pair_features(zones, ("population",))
        T = random_matrix(rng, zones, density=float(rng.uniform(0.05, 0.5)))
        obs = build(zones, pairs, T, FeatureSchema.traditional())
        k = int(rng.integers(1, 8))
        sub = downsample(obs, k=k, seed=int(rng.integers(0, 2**31)))
        n_t = obs.n_positive
        assert sub.n_rows == n_t * (1 + k)
        assert sorted(v for v in sub.targets if v > 0) == sorted(
            v for v in obs.targets if v > 0)
        trials += 1

    zones = random_zones(rng, 10)
    pairs = pair_features(zones, ("population",))
    schema = FeatureSchema.traditional()
    full = build(zones, pairs, random_matrix(rng, zones), schema)
    sub = downsample(full, k=2, seed=1)
    model = fit_gbt(GbtSpec(2, 5, 0.3), sub)
    with pytest.raises(SampledSetError):
        validation_cpc(model, sub)
    with pytest.raises(SampledSetError):
        predict(model, sub)
    with pytest.raises(SampledSetError):
        random_search(SearchSpace("gbt", 1, 2), sub, full, n_trials=1)
    with pytest.raises(SampledSetError):
        random_search(SearchSpace("gbt", 1, 2), full, sub, n_trials=1)
    _verdict(5, f"{trials} random (n_t, k) draws give exactly n_t*(1+k) rows "
                "with positives intact; scoring, prediction, and search all "
                "refuse sampled sets")


# --------------------------------------------------------------- criterion 6

def test_criterion_6_learner_sanity_and_determinism():
    # deterministic 3-feature target for the tree ensemble
    rng = np.random.default_rng(42)
    X = rng.uniform(0, 10, (400, 3))
    y = 3 * X[:, 0] - 2 * X[:, 1] + X[:, 0] * X[:, 2] + rng.normal(0, 0.5, 400)
    names = ("f0", "f1", "f2")
    obs = ObservationSet(
        rows=X, targets=y,
        pair_index=tuple((f"o{i}", f"d{i}") for i in range(400)),
        column_names=names, schema=FeatureSchema((), (), names), zones=None)
    gbt_spec = GbtSpec(max_depth=4, n_estimators=100, learning_rate=0.2)
    gbt = fit_gbt(gbt_spec, obs)
    pred = gbt.predict_rows(X)
    r2 = 1 - np.sum((y - pred) ** 2) / np.sum((y - y.mean()) ** 2)
    assert r2 >= 0.9, f"train r2 {r2}"
    assert fit_gbt(gbt_spec, obs).to_json() == gbt.to_json()

    # overlap-trained network on synthetic gravity flows
    zones, flows = synth_dataset(7, 15, 1, SynthConfig(alpha=0.05, beta=2.0))
    pairs = pair_features(zones, ("population",))
    flow_obs = build(zones, pairs, flows[0], FeatureSchema.traditional())
    ann_spec = AnnSpec("cpc_loss", 2, 32, 5, 512)
    ann = fit_ann(ann_spec, flow_obs, seed=3)
    curve = ann.loss_curve
    assert len(curve) == 6
    assert all(curve[i + 1] < curve[i] for i in range(5)), curve
    assert fit_ann(ann_spec, flow_obs, seed=3).to_json() == ann.to_json()
    _verdict(6, f"gbt train r2 {r2:.3f}; ann loss strictly falls over epochs "
                f"1-5 ({curve[0]:.5f} -> {curve[5]:.5f}); both refits "
                "byte-identical")


# --------------------------------------------------------------- criterion 7

def test_criterion_7_protocol_fidelity():
    zones, flows = synth_dataset(5, 10, 6, SynthConfig(alpha=0.05, beta=2.0,
                                                       noise=0.02))
    pairs = pair_features(zones, ("population",))
    config = RunConfig(models=("radiation", "gravity_power"))
    report = run_all(config, zones, flows, pairs)
    assert len(report.triplets) == 4
    assert [tr.test_year for tr in report.triplets] == [2, 3, 4, 5]

    agg = report.aggregate()
    for name in ("radiation", "gravity_power"):
        for metric in ("cpc", "rmse", "incoming_mae"):
            vals = np.array([o.report.as_dict()[metric]
                             for tr in report.triplets for o in tr.outcomes
                             if o.name == name])
            assert len(vals) == 4
            assert agg[name][metric][0] == pytest.approx(float(vals.mean()))
            assert agg[name][metric][1] == pytest.approx(float(vals.std()))

    # test year must stay untouched until every model is fitted
    schema = FeatureSchema.traditional()
    trips = build_triplets(zones, pairs, flows, schema)
    events = []

    def lazy_test():
        events.append("test_loaded")
        T = flows[2]
        return YearSlice(T.year, build(zones, pairs, T, schema), T)

    instrumented = Triplet(0, trips[0].train, trips[0].valid, lazy_test)
    run_triplet(config, zones, pairs, instrumented,
                after_fit=lambda fitted: events.append("fitted"))
    assert events == ["fitted", "test_loaded"]
    _verdict(7, "6 years -> 4 triplets; aggregates equal hand-recomputed "
                "mean/std; test year first read after the fit phase")


# --------------------------------------------------------------- criterion 8

USA_ZONES = os.environ.get("MIGRA_USA_ZONES")
USA_FLOWS = os.environ.get("MIGRA_USA_FLOWS")


@pytest.mark.skipif(
    not (USA_ZONES and USA_FLOWS),
    reason="full-corpus ordering check needs MIGRA_USA_ZONES and "
           "MIGRA_USA_FLOWS; reproducing published tables is out of scope "
           "at desk scale")
def test_criterion_8_real_data_ordering():
    zones = load_zones(USA_ZONES)
    flows = load_all_flows(USA_FLOWS, zones)
    trials = int(os.environ.get("MIGRA_USA_TRIALS", "50"))
    seed = int(os.environ.get("MIGRA_SEED", "0"))

    classic = run_all(RunConfig(models=("radiation", "ext_radiation",
                                        "gravity_power", "gravity_exp")),
                      zones, flows)
    learned = run_all(RunConfig(models=("ann",), features="extended",
                                n_trials=trials, seed=seed), zones, flows)

    cpc_of = {name: per["cpc"][0] for name, per in classic.aggregate().items()}
    ann_cpc = learned.aggregate()["ann"]["cpc"][0]
    assert cpc_of["ext_radiation"] > cpc_of["gravity_power"]
    assert cpc_of["ext_radiation"] > cpc_of["gravity_exp"]
    for name, value in cpc_of.items():
        assert ann_cpc > value, (name, value, ann_cpc)
    _verdict(8, f"ext_radiation cpc {cpc_of['ext_radiation']:.3f} beats both "
                f"gravity kernels; extended-feature ann cpc {ann_cpc:.3f} "
                "beats every traditional model")
