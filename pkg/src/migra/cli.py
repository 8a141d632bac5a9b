"""Command-line interface.

Verbs: ingest (validate data files), synth (generate a toy dataset),
fit-classic (calibrate one traditional model), search (hyperparameter
search for one learned model), run (the full triplet protocol with
reports and charts), export-map (per-zone error export).

Settings resolve as: command-line flag, then MIGRA_SEED (seed only),
then the --config JSON file, then built-in defaults.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from .classic import BETA_KINDS, ClassicModelSpec, calibrate_beta, fit_production
from .dataset import build
from .errors import InvalidConfig, MigraError
from .flows import (
    SynthConfig,
    aggregates,
    flows_to_csv,
    load_all_flows,
    load_flows,
    load_zones,
    save_flows,
    save_zones,
    synth_dataset,
)
from .geo import pair_features
from .learn import SearchSpace, random_search
from .pipeline import ALL_MODELS, RunConfig, export_error_map, run_all


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    with open(path, encoding="utf-8") as fh:
        cfg = json.load(fh)
    if not isinstance(cfg, dict):
        raise InvalidConfig(f"config {path} must hold a JSON object")
    return cfg


def _setting(flag, cfg: dict, key: str, default):
    return flag if flag is not None else cfg.get(key, default)


def _resolve_seed(flag, cfg: dict) -> int:
    if flag is not None:
        return flag
    env = os.environ.get("MIGRA_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise InvalidConfig(f"MIGRA_SEED must be an integer, got {env!r}") from None
    return int(cfg.get("seed", 0))


def _load_dataset(args, cfg: dict):
    zones_path = _setting(args.zones, cfg, "zones", None)
    flows_path = _setting(args.flows, cfg, "flows", None)
    if zones_path is None or flows_path is None:
        raise InvalidConfig("need --zones and --flows (flags or config file)")
    zones = load_zones(zones_path)
    flows = load_all_flows(flows_path, zones)
    return zones, flows


def _cmd_ingest(args) -> int:
    cfg = _load_config(args.config)
    zones, flows = _load_dataset(args, cfg)
    print(f"zones: {zones.n}")
    print(f"zone features: {', '.join(zones.feature_names)}")
    print(f"years: {', '.join(str(T.year) for T in flows)}")
    for T in flows:
        density = len(T) / (zones.n * (zones.n - 1))
        print(f"  year {T.year}: {len(T)} positive pairs "
              f"({100 * density:.2f}% of ordered pairs), "
              f"{int(T.total)} migrants")
    return 0


def _cmd_synth(args) -> int:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    config = SynthConfig(kind=args.kind, alpha=args.alpha,
                         beta=None if args.kind == "radiation" else args.beta,
                         noise=args.noise)
    zones, flows = synth_dataset(args.seed, args.zones, args.years, config)
    save_zones(zones, out / "zones.csv")
    save_flows(flows, out / "flows.csv")
    print(f"wrote {out / 'zones.csv'} ({zones.n} zones)")
    print(f"wrote {out / 'flows.csv'} ({len(flows)} years, "
          f"{sum(len(T) for T in flows)} rows)")
    return 0


def _cmd_fit_classic(args) -> int:
    cfg = _load_config(args.config)
    zones, flows = _load_dataset(args, cfg)
    by_year = {T.year: T for T in flows}
    if args.train not in by_year:
        raise InvalidConfig(f"year {args.train} not in data "
                            f"(have {sorted(by_year)})")
    T_train = by_year[args.train]
    pairs = pair_features(zones, ("population",))
    alpha = fit_production(zones.populations, aggregates(T_train).outgoing)
    if args.kind in BETA_KINDS:
        spec = calibrate_beta(args.kind, zones, pairs, T_train, alpha)
    else:
        spec = ClassicModelSpec(kind=args.kind, beta=None, production=alpha)
    text = json.dumps(spec.as_dict(), indent=2, sort_keys=True)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
        print(f"wrote {args.out}")
    print(text)
    return 0


def _cmd_search(args) -> int:
    cfg = _load_config(args.config)
    zones, flows = _load_dataset(args, cfg)
    seed = _resolve_seed(args.seed, cfg)
    by_year = {T.year: T for T in flows}
    for y in (args.train, args.valid):
        if y not in by_year:
            raise InvalidConfig(f"year {y} not in data (have {sorted(by_year)})")

    run_cfg = RunConfig(models=(args.model,),
                        features=_setting(args.features, cfg, "features", "traditional"),
                        n_trials=_setting(args.trials, cfg, "n_trials", 50),
                        seed=seed)
    schema = run_cfg.schema(zones)
    variables = (("population",) if run_cfg.features == "traditional"
                 else zones.feature_names)
    pairs = pair_features(zones, variables)
    train = build(zones, pairs, by_year[args.train], schema)
    valid = build(zones, pairs, by_year[args.valid], schema)

    space = SearchSpace.for_dataset(args.model, train)
    result = random_search(space, train, valid, n_trials=run_cfg.n_trials,
                           seed=np.random.SeedSequence(seed))
    if args.log:
        Path(args.log).write_text(result.log_lines(), encoding="utf-8")
        print(f"wrote {args.log}")
    best = result.best
    print(f"best trial {best.index}: validation cpc {best.cpc:.4f}")
    print(json.dumps(best.spec.as_dict(), indent=2, sort_keys=True))
    return 0


def _cmd_run(args) -> int:
    cfg = _load_config(args.config)
    zones, flows = _load_dataset(args, cfg)
    model_arg = _setting(args.models, cfg, "models", ",".join(ALL_MODELS))
    if isinstance(model_arg, str):
        models = tuple(m.strip() for m in model_arg.split(",") if m.strip())
    else:
        models = tuple(model_arg)
    run_cfg = RunConfig(
        models=models,
        features=_setting(args.features, cfg, "features", "traditional"),
        production=_setting(args.production, cfg, "production", "off") == "on",
        n_trials=_setting(args.trials, cfg, "n_trials", 50),
        seed=_resolve_seed(args.seed, cfg),
    )
    out = Path(_setting(args.out_dir, cfg, "out_dir", "migra-out"))
    out.mkdir(parents=True, exist_ok=True)

    report = run_all(run_cfg, zones, flows)

    (out / "report.json").write_text(report.to_json(), encoding="utf-8")
    (out / "report.txt").write_text(report.to_text(), encoding="utf-8")
    written = [out / "report.json", out / "report.txt"]
    for tr in report.triplets:
        for name, log in tr.search_logs.items():
            p = out / f"trials_{name}_{tr.test_year}.jsonl"
            p.write_text(log.log_lines(), encoding="utf-8")
            written.append(p)
    if not args.no_figures:
        from .figures import render_report_figures
        written.extend(render_report_figures(report, out))
    for p in written:
        print(f"wrote {p}")
    print()
    print(report.to_text(), end="")
    return 0


def _cmd_export_map(args) -> int:
    cfg = _load_config(args.config)
    zones_path = _setting(args.zones, cfg, "zones", None)
    if zones_path is None:
        raise InvalidConfig("need --zones (flag or config file)")
    zones = load_zones(zones_path)
    T = load_flows(args.truth, zones, year=args.year)
    T_hat = load_flows(args.pred, zones, year=args.year, integer=False)
    export_error_map(T, T_hat, zones, args.out)
    print(f"wrote {args.out}")
    return 0


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="migra",
        description="Predict and evaluate origin/destination migration flows.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, data=True):
        sp.add_argument("--config", help="JSON config file")
        if data:
            sp.add_argument("--zones", help="zones CSV")
            sp.add_argument("--flows", help="flows CSV")

    sp = sub.add_parser("ingest", help="validate and summarize a dataset")
    common(sp)
    sp.set_defaults(func=_cmd_ingest)

    sp = sub.add_parser("synth", help="generate a synthetic dataset")
    sp.add_argument("--out-dir", required=True)
    sp.add_argument("--zones", type=int, default=30)
    sp.add_argument("--years", type=int, default=4)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--kind", default="gravity_power",
                    choices=("radiation", "ext_radiation", "gravity_power", "gravity_exp"))
    sp.add_argument("--alpha", type=float, default=0.03)
    sp.add_argument("--beta", type=float, default=2.0)
    sp.add_argument("--noise", type=float, default=0.05)
    sp.set_defaults(func=_cmd_synth)

    sp = sub.add_parser("fit-classic", help="calibrate one traditional model")
    common(sp)
    sp.add_argument("--kind", required=True,
                    choices=("radiation", "ext_radiation", "gravity_power", "gravity_exp"))
    sp.add_argument("--train", type=int, required=True, help="calibration year")
    sp.add_argument("--out", help="write the calibrated spec as JSON")
    sp.set_defaults(func=_cmd_fit_classic)

    sp = sub.add_parser("search", help="randomized hyperparameter search")
    common(sp)
    sp.add_argument("--model", required=True, choices=("gbt", "ann"))
    sp.add_argument("--train", type=int, required=True)
    sp.add_argument("--valid", type=int, required=True)
    sp.add_argument("--features", choices=("traditional", "extended"))
    sp.add_argument("--trials", type=int)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--log", help="write one JSON line per trial")
    sp.set_defaults(func=_cmd_search)

    sp = sub.add_parser("run", help="full triplet protocol with reports")
    common(sp)
    sp.add_argument("--models", help="comma-separated model names")
    sp.add_argument("--features", choices=("traditional", "extended"))
    sp.add_argument("--production", choices=("on", "off"))
    sp.add_argument("--trials", type=int)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--out-dir")
    sp.add_argument("--no-figures", action="store_true",
                    help="skip chart rendering")
    sp.set_defaults(func=_cmd_run)

    sp = sub.add_parser("export-map", help="per-zone incoming-error export")
    sp.add_argument("--config", help="JSON config file")
    sp.add_argument("--zones", help="zones CSV")
    sp.add_argument("--truth", required=True, help="observed flows CSV")
    sp.add_argument("--pred", required=True, help="predicted flows CSV")
    sp.add_argument("--year", type=int, default=None)
    sp.add_argument("--out", required=True, help="output CSV path")
    sp.set_defaults(func=_cmd_export_map)
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        return args.func(args)
    except (MigraError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
