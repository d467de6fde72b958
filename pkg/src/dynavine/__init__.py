"""Temporal vine-copula dependence toolkit.

Windowed multivariate samples map to rank pseudo-observations, a C-vine
factorization with per-edge parametric pair copulas models each window,
and temporal estimators couple the edges across windows: smooth basis
trajectories, penalized family switching, per-window and per-window
regularized controls, and a low-rank latent ablation.  The held-out
diagnostic splits predictive gains into first-tree pairwise structure
versus higher-tree conditional structure.
"""

from .errors import ConfigError, DataError, NumericalError
from .numkernel import SeededRng, child_seed
from .paircopula import (
    FAMILIES,
    EdgeState,
    INDEPENDENCE,
    empirical_tau,
    fit_window,
    h_function,
    h_inverse,
    log_density,
    sample,
    select_family_aic,
    state_from_tau,
    tau_to_theta,
    theta_to_tau,
)
from .vine import (
    CVineStructure,
    FittedVine,
    fit_static,
    gaussian_cvine_states,
    greedy_order,
    kendall_matrix,
    sample_cvine,
    select_order_pooled,
    select_root_windowed,
)
from .temporal import (
    LatentConfig,
    RegWindowedConfig,
    SmoothConfig,
    SwitchConfig,
    WindowSequence,
    WindowedConfig,
    build_basis,
    fit_latent,
    fit_reg_windowed,
    fit_smooth,
    fit_switch,
    fit_windowed,
    solve_state_path,
)
from .baselines import (
    GaussianWindows,
    fit_gaussian_ssm,
    fit_gaussian_windows,
    gaussian_copula_logdensity,
)
from .benchgen import (
    BENCHMARK_SEED,
    SCENARIOS,
    GroundTruth,
    ScenarioSpec,
    WindowedDataset,
    generate,
    load_dataset,
    oracle_information,
    save_dataset,
)
from .evaldiag import (
    EvalReport,
    PseudoObsSequence,
    assign_order,
    auroc,
    build_report,
    decompose,
    decorrelated_null,
    detect_episodes,
    heldout_nll,
    make_pseudo_obs,
    nll_gap,
)
from .pipeline import build_run_config, run_scenario, runtime_table

__version__ = "0.1.0"

__all__ = [
    "BENCHMARK_SEED",
    "CVineStructure",
    "ConfigError",
    "DataError",
    "EdgeState",
    "EvalReport",
    "FAMILIES",
    "FittedVine",
    "GaussianWindows",
    "GroundTruth",
    "INDEPENDENCE",
    "LatentConfig",
    "NumericalError",
    "PseudoObsSequence",
    "RegWindowedConfig",
    "SCENARIOS",
    "ScenarioSpec",
    "SeededRng",
    "SmoothConfig",
    "SwitchConfig",
    "WindowSequence",
    "WindowedConfig",
    "WindowedDataset",
    "assign_order",
    "auroc",
    "build_basis",
    "build_report",
    "build_run_config",
    "child_seed",
    "decompose",
    "decorrelated_null",
    "detect_episodes",
    "empirical_tau",
    "fit_gaussian_ssm",
    "fit_gaussian_windows",
    "fit_latent",
    "fit_reg_windowed",
    "fit_smooth",
    "fit_static",
    "fit_switch",
    "fit_window",
    "fit_windowed",
    "gaussian_copula_logdensity",
    "gaussian_cvine_states",
    "generate",
    "greedy_order",
    "h_function",
    "h_inverse",
    "heldout_nll",
    "kendall_matrix",
    "load_dataset",
    "log_density",
    "make_pseudo_obs",
    "nll_gap",
    "oracle_information",
    "run_scenario",
    "runtime_table",
    "sample",
    "sample_cvine",
    "save_dataset",
    "select_family_aic",
    "select_order_pooled",
    "select_root_windowed",
    "state_from_tau",
    "tau_to_theta",
    "theta_to_tau",
]
