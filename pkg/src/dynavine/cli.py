"""Command-line entry points.

Subcommands: generate (emit a benchmark dataset), run (fit, evaluate and
report a scenario), runtime (the scaling harness), decompose (pair vs
higher-tree scores for one estimator), null (decorrelated-null rerun).
Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
failure in a required estimator.
"""

import argparse
import json
import os
import sys

import numpy as np

from .errors import ConfigError, DataError, NumericalError
from . import benchgen as bg
from . import evaldiag as ev
from . import pipeline as pl


def _add_common(p):
    p.add_argument("--scenario", help="benchmark scenario name")
    p.add_argument("--seed", type=int, default=bg.BENCHMARK_SEED)
    p.add_argument("--config", help="JSON config file; flags override it")
    p.add_argument("--out", help="output directory")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--estimators",
                   help="comma-separated estimator names to run")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="dynavine",
        description="temporal vine dependence toolkit")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, desc in (
        ("generate", "write a benchmark dataset (CSV windows + manifest)"),
        ("run", "fit estimators on a scenario and write the report"),
        ("runtime", "edge-fit count and wall-clock scaling table"),
        ("decompose", "pair vs higher-tree held-out decomposition"),
        ("null", "decorrelated-null rerun of a scenario"),
    ):
        p = sub.add_parser(name, help=desc)
        _add_common(p)
        if name == "null":
            p.add_argument("--null-seed", type=int, default=1)
        if name == "runtime":
            p.add_argument("--repeats", type=int, default=2)
    return parser


def _load_config_file(path):
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as err:
            raise ConfigError(f"config file is not valid JSON: {err}") from None
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a JSON object")
    return data


def _resolve(args, require_scenario=True):
    file_cfg = _load_config_file(args.config) if args.config else {}
    scenario = args.scenario or file_cfg.get("scenario")
    if require_scenario and not scenario:
        raise ConfigError("--scenario (or a config file naming one) is required")
    seed = args.seed if args.seed != bg.BENCHMARK_SEED else file_cfg.get("seed", args.seed)
    estimators = None
    if args.estimators:
        estimators = [s.strip() for s in args.estimators.split(",") if s.strip()]
    elif "estimators" in file_cfg:
        estimators = [e["name"] if isinstance(e, dict) else e
                      for e in file_cfg["estimators"]]
    overrides = {k: v for k, v in file_cfg.items()
                 if k in ("split", "jitter", "primary")}
    out = args.out or file_cfg.get("out")
    jobs = args.jobs if args.jobs != 1 else file_cfg.get("jobs", 1)
    return scenario, seed, estimators, overrides, out, jobs, file_cfg


def cmd_generate(args):
    scenario, seed, _, _, out, _, _ = _resolve(args)
    out = out or f"data_{scenario}_{seed}"
    dataset, truth = bg.generate(scenario, seed)
    bg.save_dataset(dataset, truth, out)
    print(f"wrote {dataset.n_windows} windows of {scenario} (seed {seed}) to {out}")
    return 0


def _run(args):
    scenario, seed, estimators, overrides, out, jobs, file_cfg = _resolve(args)
    config = pl.build_run_config(scenario, seed, estimators, overrides)
    if isinstance(file_cfg.get("estimators"), list) and not args.estimators:
        if all(isinstance(e, dict) for e in file_cfg["estimators"]):
            config["estimators"] = file_cfg["estimators"]
            for spec in config["estimators"]:
                pl.estimator_config(spec)
    config["jobs"] = jobs
    result = pl.run_scenario(config)
    return result, out


def cmd_run(args):
    result, out = _run(args)
    out = out or f"run_{result['config']['scenario']}_{result['config']['seed']}"
    pl.write_run_outputs(result, out)
    print(result["report"].to_csv(), end="")
    print(f"outputs written to {out}")
    if result["failures"]:
        print(f"estimator failures: {result['failures']}")
    return 0


def cmd_runtime(args):
    file_cfg = _load_config_file(args.config) if args.config else {}
    d_list = file_cfg.get("d_list", [3, 5, 8])
    t_list = file_cfg.get("T_list", [12, 24])
    rows = pl.runtime_table(d_list, t_list, repeats=args.repeats)
    out = args.out or "runtime_scaling.csv"
    pl.write_runtime_csv(rows, out)
    print("d,T,variant,edge_fits,compression,total_time_s,time_per_window_s")
    for r in rows:
        print("%d,%d,%s,%d,%s,%.4f,%.4f" % (
            r["d"], r["T"], r["variant"], r["edge_fits"], r["compression"],
            r["total_time_s"], r["time_per_window_s"]))
    return 0


def cmd_decompose(args):
    result, out = _run(args)
    out = out or f"decompose_{result['config']['scenario']}_{result['config']['seed']}"
    os.makedirs(out, exist_ok=True)
    pl._write_decomposition_csv(os.path.join(out, "decomposition.csv"),
                                result["decomposition"])
    dec = result["decomposition"]
    print("t,S_total,S_pair,Delta_HO")
    for t in range(len(dec["s_total"])):
        print("%d,%.6f,%.6f,%.6f" % (t, dec["s_total"][t], dec["s_pair"][t],
                                     dec["delta_ho"][t]))
    return 0


def cmd_null(args):
    scenario, seed, estimators, overrides, out, jobs, _ = _resolve(args)
    config = pl.build_run_config(scenario, seed, estimators, overrides)
    config["jobs"] = jobs
    dataset, truth = bg.generate(scenario, seed)
    split = config["split"]
    pseudo = ev.make_pseudo_obs(
        dataset.windows, train_frac=split["train_frac"], seed=seed + 1,
        jitter=config["jitter"], chronological=split.get("chronological", False))
    nulled = ev.decorrelated_null(pseudo, seed=args.null_seed)
    name, cfg = pl.estimator_config(
        next(e for e in config["estimators"] if e["name"] == config["primary"]))
    model = pl.fit_estimator(name, cfg, nulled.train)
    dec = ev.decompose(model, nulled)
    out = out or f"null_{scenario}_{seed}"
    os.makedirs(out, exist_ok=True)
    pl._write_decomposition_csv(os.path.join(out, "decomposition.csv"), dec)
    mean_dho = float(np.mean(dec["delta_ho"]))
    print(f"decorrelated null on {scenario}: mean Delta_HO = {mean_dho:.5f} "
          f"over {len(dec['delta_ho'])} windows")
    return 0


COMMANDS = {
    "generate": cmd_generate,
    "run": cmd_run,
    "runtime": cmd_runtime,
    "decompose": cmd_decompose,
    "null": cmd_null,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    except DataError as err:
        print(f"data error: {err}", file=sys.stderr)
        return 3
    except NumericalError as err:
        print(f"numerical error: {err}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
