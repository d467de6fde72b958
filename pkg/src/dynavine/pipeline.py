"""Scenario orchestration: generate, split, fit, evaluate, report.

Each benchmark scenario carries a default estimator lineup with the
hyperparameters used throughout the experiments; `run_scenario` executes
the whole chain deterministically and returns the report plus fitted
models.  Per-estimator failures are recorded and the run continues.
"""

import concurrent.futures
import json
import os
import time
from dataclasses import asdict

import numpy as np

from .errors import ConfigError, DataError, NumericalError
from . import baselines as bl
from . import benchgen as bg
from . import evaldiag as ev
from . import temporal as tm

ESTIMATOR_NAMES = (
    "smooth", "switch", "windowed", "reg_windowed", "latent",
    "gaussian_ssm", "gaussian_windowed",
)

_CONFIG_TYPES = {
    "smooth": tm.SmoothConfig,
    "switch": tm.SwitchConfig,
    "windowed": tm.WindowedConfig,
    "reg_windowed": tm.RegWindowedConfig,
    "latent": tm.LatentConfig,
}

_ROLE_BY_NAME = {
    "smooth": "primary",
    "switch": "primary",
    "windowed": "control",
    "reg_windowed": "control",
    "latent": "ablation",
    "gaussian_ssm": "baseline",
    "gaussian_windowed": "baseline",
}

# Default lineups: primary first; tail_df tracks the t degrees of freedom
# with a smooth trajectory, the family-switch benchmarks use the DP
# estimator with the documented penalties, hub recovery uses the
# root-regularized windowed control as its headline method.
SCENARIO_DEFAULTS = {
    "tail_df": {
        "primary": "smooth",
        "estimators": [
            {"name": "smooth", "t_df_mode": "trajectory"},
            {"name": "windowed"},
            {"name": "gaussian_ssm"},
            {"name": "gaussian_windowed"},
        ],
        "split": {"train_frac": 0.8, "chronological": False},
    },
    "tail_switch": {
        "primary": "switch",
        "estimators": [
            {"name": "switch", "lambda_switch": 0.08, "lambda_drift": 0.02},
            {"name": "windowed"},
            {"name": "gaussian_ssm"},
            {"name": "gaussian_windowed"},
        ],
        "split": {"train_frac": 0.8, "chronological": False},
    },
    "hub_switch": {
        "primary": "reg_windowed",
        "estimators": [
            {"name": "reg_windowed", "lambda_root": 0.25,
             "lambda_switch": 0.0, "lambda_drift": 0.0},
            {"name": "windowed"},
            {"name": "gaussian_ssm"},
            {"name": "gaussian_windowed"},
        ],
        "split": {"train_frac": 0.8, "chronological": False},
    },
    "agent_episodes": {
        "primary": "switch",
        "estimators": [
            {"name": "switch", "lambda_switch": 0.20, "lambda_drift": 0.0},
            {"name": "reg_windowed", "lambda_root": 0.10,
             "lambda_switch": 0.20, "lambda_drift": 0.10},
            {"name": "windowed"},
            {"name": "gaussian_ssm"},
            {"name": "gaussian_windowed"},
        ],
        "split": {"train_frac": 0.8, "chronological": False},
    },
    "xor_stress": {
        "primary": "switch",
        "estimators": [
            {"name": "switch"},
            {"name": "gaussian_ssm"},
            {"name": "gaussian_windowed"},
        ],
        "split": {"train_frac": 0.8, "chronological": False},
    },
    "mult_triplet": {
        "primary": "smooth",
        "estimators": [
            {"name": "smooth", "t_df_mode": "trajectory"},
            {"name": "windowed"},
            {"name": "gaussian_windowed"},
        ],
        "split": {"train_frac": 0.8, "chronological": False},
    },
    "showcase": {
        "primary": "switch",
        "estimators": [
            {"name": "switch"},
            {"name": "windowed"},
            {"name": "gaussian_ssm"},
            {"name": "gaussian_windowed"},
        ],
        "split": {"train_frac": 0.85, "chronological": True},
    },
}


def estimator_config(spec):
    """Validate one estimator spec dict and build its config object."""
    spec = dict(spec)
    name = spec.pop("name", None)
    if name not in ESTIMATOR_NAMES:
        raise ConfigError(
            f"unknown estimator {name!r}; valid: {', '.join(ESTIMATOR_NAMES)}")
    if name in ("gaussian_ssm", "gaussian_windowed"):
        if spec:
            raise ConfigError(f"{name} takes no options, got {sorted(spec)}")
        return name, None
    cls = _CONFIG_TYPES[name]
    for key in ("candidates", "nu_grid"):
        if key in spec:
            spec[key] = tuple(spec[key])
    if name == "latent" and "smooth" in spec:
        spec["smooth"] = tm.SmoothConfig(**spec["smooth"])
    try:
        cfg = cls(**spec)
    except TypeError as err:
        raise ConfigError(f"bad options for estimator {name}: {err}") from None
    return name, cfg


def fit_estimator(name, cfg, train_windows):
    if name == "smooth":
        return tm.fit_smooth(train_windows, cfg)
    if name == "switch":
        return tm.fit_switch(train_windows, cfg)
    if name == "windowed":
        return tm.fit_windowed(train_windows, cfg)
    if name == "reg_windowed":
        return tm.fit_reg_windowed(train_windows, cfg)
    if name == "latent":
        return tm.fit_latent(train_windows, cfg)
    if name == "gaussian_ssm":
        return bl.fit_gaussian_ssm(train_windows)
    if name == "gaussian_windowed":
        return bl.fit_gaussian_windows(train_windows)
    raise ConfigError(f"unknown estimator {name!r}")


def build_run_config(scenario, seed=bg.BENCHMARK_SEED, estimators=None,
                     overrides=None):
    """Merge scenario defaults, a config-file dict, and explicit choices."""
    if scenario not in SCENARIO_DEFAULTS:
        raise ConfigError(
            f"unknown scenario {scenario!r}; valid scenarios: "
            f"{', '.join(bg.SCENARIOS)}")
    base = SCENARIO_DEFAULTS[scenario]
    cfg = {
        "scenario": scenario,
        "seed": int(seed),
        "primary": base["primary"],
        "estimators": [dict(e) for e in base["estimators"]],
        "split": dict(base["split"]),
        "jitter": 1e-3,
        "jobs": 1,
    }
    if overrides:
        for key, val in overrides.items():
            if key not in cfg:
                raise ConfigError(f"unknown config key {key!r}")
            if key in ("split",):
                cfg["split"].update(val)
            else:
                cfg[key] = val
    if estimators is not None:
        keep = []
        by_name = {e["name"]: e for e in cfg["estimators"]}
        for name in estimators:
            keep.append(by_name.get(name, {"name": name}))
        cfg["estimators"] = keep
    # validate before any work
    names = []
    for spec in cfg["estimators"]:
        name, _ = estimator_config(spec)
        names.append(name)
    if not names:
        raise ConfigError("no estimators configured")
    if cfg["primary"] not in names:
        cfg["primary"] = names[0]
    return cfg


def _fit_task(args):
    name, spec, train = args
    _, cfg = estimator_config(spec)
    t0 = time.perf_counter()
    model = fit_estimator(name, cfg, train)
    return name, model, time.perf_counter() - t0


def run_scenario(config):
    """Execute one configured scenario run; returns results in memory.

    The returned dict carries the dataset, pseudo-observations, fitted
    models, per-window NLLs, the EvalReport, the primary decomposition,
    and any per-estimator failures.
    """
    scenario = config["scenario"]
    seed = config["seed"]
    dataset, truth = bg.generate(scenario, seed)
    split = config["split"]
    pseudo = ev.make_pseudo_obs(
        dataset.windows, train_frac=split["train_frac"], seed=seed + 1,
        jitter=config.get("jitter", 1e-3),
        chronological=split.get("chronological", False))

    tasks = [(spec["name"], spec, pseudo.train) for spec in config["estimators"]]
    models, timings, failures = {}, {}, {}
    jobs = int(config.get("jobs", 1))
    if jobs > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = {pool.submit(_fit_task, t): t[0] for t in tasks}
            for fut, name in ((f, n) for f, n in futures.items()):
                try:
                    rname, model, elapsed = fut.result()
                    models[rname], timings[rname] = model, elapsed
                except (DataError, NumericalError, ConfigError) as err:
                    failures[name] = f"{type(err).__name__}: {err}"
    else:
        for task in tasks:
            try:
                name, model, elapsed = _fit_task(task)
                models[name], timings[name] = model, elapsed
            except (DataError, NumericalError, ConfigError) as err:
                failures[task[0]] = f"{type(err).__name__}: {err}"

    primary = config["primary"]
    if primary not in models:
        raise NumericalError(
            f"primary estimator {primary!r} failed: "
            f"{failures.get(primary, 'not configured')}")

    nll = {}
    for name in [t[0] for t in tasks]:
        if name in models:
            nll[name] = ev.heldout_nll(models[name], pseudo)
    nll["truncated_1"] = ev.heldout_nll(models[primary], pseudo, truncation_level=1)

    roles = dict(_ROLE_BY_NAME)
    roles["truncated_1"] = "truncated"
    for name in nll:
        if name != primary and roles.get(name) == "primary":
            roles[name] = "control"
    roles[primary] = "primary"

    decomposition = ev.decompose(models[primary], pseudo)
    report = ev.build_report(
        scenario, primary, nll, roles, decomposition=decomposition,
        extras={"labels": truth.labels, "seed": seed,
                "failures": dict(failures)})
    return {
        "config": config,
        "dataset": dataset,
        "truth": truth,
        "pseudo": pseudo,
        "models": models,
        "nll": nll,
        "report": report,
        "decomposition": decomposition,
        "timings": timings,
        "failures": failures,
    }


# ---------------------------------------------------------------------------
# output writers


def _write_decomposition_csv(path, decomposition):
    with open(path, "w") as fh:
        fh.write("t,S_total,S_pair,Delta_HO\n")
        T = len(decomposition["s_total"])
        for t in range(T):
            fh.write("%d,%.10f,%.10f,%.10f\n" % (
                t, decomposition["s_total"][t], decomposition["s_pair"][t],
                decomposition["delta_ho"][t]))


def _write_family_paths_csv(path, model):
    rows = []
    if hasattr(model, "edge_states") and hasattr(model, "structure"):
        for (tree, leaf), states in sorted(model.edge_states.items()):
            for t, st in enumerate(states):
                rows.append((tree, leaf, t, st.family,
                             json.dumps(list(st.params))))
    elif hasattr(model, "vines"):
        for t, vine in enumerate(model.vines):
            for (tree, leaf), states in sorted(vine.edge_states.items()):
                rows.append((tree, leaf, t, states[0].family,
                             json.dumps(list(states[0].params))))
    with open(path, "w") as fh:
        fh.write("tree,leaf,t,family,params\n")
        for tree, leaf, t, fam, params in sorted(rows):
            fh.write(f"{tree},{leaf},{t},{fam},\"{params}\"\n")


def _write_order_assignment_csv(path, result):
    truth = result["truth"]
    dec = result["decomposition"]
    indep = [t for t, lab in enumerate(truth.labels) if lab == "independence"]
    detected = ev.detect_episodes(-dec["s_total"], indep)
    assigned = ev.assign_order(dec["s_total"], dec["delta_ho"], indep)
    with open(path, "w") as fh:
        fh.write("t,label_true,detected,label_assigned\n")
        for t, lab in enumerate(truth.labels):
            fh.write(f"{t},{lab},{int(detected[t])},{assigned[t]}\n")
    return assigned


def write_run_outputs(result, out_dir):
    """Persist a run: report CSV, decomposition CSV, model JSON, status."""
    os.makedirs(out_dir, exist_ok=True)
    report = result["report"]
    report.to_csv(os.path.join(out_dir, "report.csv"))
    _write_decomposition_csv(
        os.path.join(out_dir, "decomposition.csv"), result["decomposition"])
    models_dir = os.path.join(out_dir, "models")
    os.makedirs(models_dir, exist_ok=True)
    for name, model in result["models"].items():
        with open(os.path.join(models_dir, f"{name}.json"), "w") as fh:
            fh.write(model.to_json(indent=1))
            fh.write("\n")
    primary = result["config"]["primary"]
    _write_family_paths_csv(
        os.path.join(out_dir, "family_paths.csv"), result["models"][primary])
    if result["config"]["scenario"] == "agent_episodes":
        _write_order_assignment_csv(
            os.path.join(out_dir, "order_assignment.csv"), result)
    status_path = os.path.join(out_dir, "run_status.csv")
    with open(status_path, "w") as fh:
        fh.write("method,status,detail\n")
        for name in [spec["name"] for spec in result["config"]["estimators"]]:
            if name in result["models"]:
                fh.write(f"{name},ok,\n")
            else:
                detail = result["failures"].get(name, "").replace(",", ";")
                fh.write(f"{name},failed,{detail}\n")
    summary = {
        "config": result["config"],
        "timings_s": {k: round(v, 4) for k, v in result["timings"].items()},
        "failures": result["failures"],
    }
    with open(os.path.join(out_dir, "run_summary.json"), "w") as fh:
        json.dump(summary, fh, sort_keys=True, indent=1)
        fh.write("\n")
    return out_dir


# ---------------------------------------------------------------------------
# runtime-scaling harness


def _runtime_data(d, T, n=200, seed=7):
    """Synthetic drifting-correlation windows for the scaling harness."""
    from scipy.special import ndtr

    from .numkernel import SeededRng, child_seed
    windows = []
    for t in range(T):
        rng = SeededRng(child_seed(seed, t))
        rho = 0.3 + 0.3 * np.sin(2.0 * np.pi * t / max(T - 1, 1))
        corr = np.full((d, d), rho)
        np.fill_diagonal(corr, 1.0)
        z = rng.normal((n, d)) @ np.linalg.cholesky(corr).T
        windows.append(ndtr(z))
    return windows


def runtime_table(d_list=(3, 5, 8), T_list=(12, 24), repeats=2, n=200):
    """Edge-fit counts and wall-clock for windowed vs joint estimators.

    Edge fits are analytic: T*d(d-1)/2 for the windowed variant, d(d-1)/2
    trajectories for the joint one; compression is their ratio (T).
    Timing is the mean over `repeats` of the full sequential fit.
    """
    rows = []
    for d in d_list:
        if d < 3:
            raise ConfigError("runtime harness needs d >= 3")
        for T in T_list:
            if T < 2:
                raise ConfigError("runtime harness needs T >= 2")
            windows = _runtime_data(d, T, n=n)
            n_edges = d * (d - 1) // 2
            for variant, fitter, fits, compression in (
                ("windowed", lambda w: tm.fit_windowed(w, tm.WindowedConfig()),
                 T * n_edges, 1),
                ("joint_dynamic", lambda w: tm.fit_smooth(w, tm.SmoothConfig()),
                 n_edges, T),
            ):
                times = []
                for _ in range(repeats):
                    t0 = time.perf_counter()
                    fitter(windows)
                    times.append(time.perf_counter() - t0)
                total = float(np.mean(times))
                rows.append({
                    "d": d, "T": T, "variant": variant,
                    "edge_fits": fits, "compression": f"{compression}x",
                    "total_time_s": round(total, 4),
                    "time_per_window_s": round(total / T, 4),
                })
    return rows


def write_runtime_csv(rows, path):
    with open(path, "w") as fh:
        fh.write("d,T,variant,edge_fits,compression,total_time_s,time_per_window_s\n")
        for r in rows:
            fh.write("%d,%d,%s,%d,%s,%.4f,%.4f\n" % (
                r["d"], r["T"], r["variant"], r["edge_fits"],
                r["compression"], r["total_time_s"], r["time_per_window_s"]))
    return path
