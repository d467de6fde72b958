"""Temporal vine estimators over windowed pseudo-observations.

Four ways to track dependence through time, all sharing the C-vine
machinery from `vine`:

* smooth: per-edge basis-expanded parameter trajectories fitted jointly
  over all windows with a curvature penalty on the implied Kendall path;
* switch: per-window candidate fits tied together by an exact dynamic
  program that charges for family switches and for parameter drift;
* windowed / reg_windowed: independent per-window fits, optionally with a
  dynamic program smoothing the root choice and the per-edge state paths;
* latent: a low-rank autoregressive reconstruction of the smooth fit's
  latent trajectories (ablation).

Every estimator consumes training pseudo-observations only and returns an
object exposing log_density(rows, t), truncate(level) and to_dict().
"""

import json
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import optimize

from .errors import ConfigError, DataError, NumericalError
from . import paircopula as pc
from .vine import (
    SCHEMA,
    CVineStructure,
    FittedVine,
    fit_static,
    greedy_order,
    kendall_matrix,
    select_order_pooled,
    select_root_windowed,
)

state_distance = pc.state_distance


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class SmoothConfig:
    candidates: tuple = pc.FAMILIES
    nu_grid: tuple = pc.DEFAULT_NU_GRID
    n_centers: int = 3
    bandwidth: float = 0.75
    lambda_smooth: float = 5.0
    lambda_ridge: float = 1e-3
    max_iter: int = 80
    grad_step: float = 1e-5
    t_df_mode: str = "grid"  # "grid" or "trajectory"
    truncation_level: int = None


@dataclass(frozen=True)
class SwitchConfig:
    candidates: tuple = pc.FAMILIES
    nu_grid: tuple = pc.DEFAULT_NU_GRID
    lambda_switch: float = 0.08
    lambda_drift: float = 0.0
    truncation_level: int = None


@dataclass(frozen=True)
class WindowedConfig:
    candidates: tuple = pc.FAMILIES
    nu_grid: tuple = pc.DEFAULT_NU_GRID
    truncation_level: int = None


@dataclass(frozen=True)
class RegWindowedConfig:
    candidates: tuple = pc.FAMILIES
    nu_grid: tuple = pc.DEFAULT_NU_GRID
    lambda_root: float = 0.10
    lambda_switch: float = 0.20
    lambda_drift: float = 0.10
    truncation_level: int = None


@dataclass(frozen=True)
class LatentConfig:
    k: int = 1
    transition_weight: float = 1.0
    max_sweeps: int = 200
    tol: float = 1e-10
    smooth: SmoothConfig = field(default_factory=SmoothConfig)


# ---------------------------------------------------------------------------
# basis


def build_basis(n_windows, n_centers=3, bandwidth=0.75):
    """Temporal design matrix: intercept plus Gaussian bumps.

    Windows map to [0, 1]; the bump centers are evenly spaced over that
    interval, so the default three centers sit at 0, 1/2 and 1 with
    bandwidth 0.75.  Must have full column rank, so n_windows >= n_centers + 1.
    """
    if n_windows < 1:
        raise ValueError("need at least one window")
    t = np.linspace(0.0, 1.0, n_windows) if n_windows > 1 else np.zeros(1)
    cols = [np.ones(n_windows)]
    for c in np.linspace(0.0, 1.0, n_centers):
        cols.append(np.exp(-(((t - c) / bandwidth) ** 2)))
    design = np.column_stack(cols)
    if n_windows < design.shape[1] or np.linalg.svd(design, compute_uv=False)[-1] <= 1e-8:
        raise DataError(
            f"time basis is rank deficient: {design.shape[1]} columns "
            f"over {n_windows} windows")
    return design


# ---------------------------------------------------------------------------
# per-window sequences with independent structures


@dataclass
class WindowSequence:
    """Per-window vines stitched into one temporal model."""

    vines: list
    estimator: str = "windowed"
    fit_log: list = field(default_factory=list)
    extras: dict = field(default_factory=dict)

    @property
    def n_windows(self):
        return len(self.vines)

    @property
    def dim(self):
        return self.vines[0].dim

    def log_density(self, u, t=0, truncation_level=None):
        if not 0 <= t < self.n_windows:
            raise DataError("window index out of range")
        return self.vines[t].log_density(u, 0, truncation_level)

    def truncate(self, level):
        return WindowSequence(
            vines=[v.truncate(level) for v in self.vines],
            estimator=self.estimator,
            fit_log=list(self.fit_log),
            extras=dict(self.extras),
        )

    def to_dict(self):
        return {
            "schema": SCHEMA,
            "mode": "per_window",
            "estimator": self.estimator,
            "n_windows": self.n_windows,
            "windows": [v.to_dict() for v in self.vines],
            "fit_log": self.fit_log,
            "extras": self.extras,
        }

    def to_json(self, **kwargs):
        return json.dumps(self.to_dict(), sort_keys=True, **kwargs)

    @classmethod
    def from_dict(cls, data):
        if data.get("schema") != SCHEMA:
            raise DataError(f"unsupported model schema: {data.get('schema')}")
        return cls(
            vines=[FittedVine.from_dict(w) for w in data["windows"]],
            estimator=data.get("estimator", "windowed"),
            fit_log=data.get("fit_log", []),
            extras=data.get("extras", {}),
        )

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


# ---------------------------------------------------------------------------
# exact dynamic program over per-window states


def solve_state_path(local, switch_penalty, drift_stay=None):
    """Minimum-cost state path through a (T, K) table of local costs.

    Moving between different states costs switch_penalty; staying in state
    k from window t-1 to t costs drift_stay[t-1, k].  Ties prefer staying,
    then the lower state index; the terminal tie prefers fewer switches.
    Returns (path, total_cost, n_switches).
    """
    local = np.asarray(local, dtype=float)
    T, K = local.shape
    if drift_stay is None:
        drift_stay = np.zeros((T - 1, K))
    drift_stay = np.asarray(drift_stay, dtype=float)
    cost = local[0].copy()
    switches = np.zeros(K, dtype=int)
    back = np.full((T, K), -1, dtype=int)
    for t in range(1, T):
        new_cost = np.empty(K)
        new_sw = np.empty(K, dtype=int)
        for k in range(K):
            best_c = cost[k] + drift_stay[t - 1, k]
            best_s = switches[k]
            best_j = k
            for j in range(K):
                if j == k:
                    continue
                c = cost[j] + switch_penalty
                if c < best_c or (c == best_c and switches[j] + 1 < best_s):
                    best_c, best_s, best_j = c, switches[j] + 1, j
            new_cost[k] = best_c + local[t, k]
            new_sw[k] = best_s
            back[t, k] = best_j
        cost, switches = new_cost, new_sw
    order = sorted(range(K), key=lambda k: (cost[k], switches[k], k))
    end = int(order[0])
    path = [end]
    for t in range(T - 1, 0, -1):
        end = int(back[t, end])
        path.append(end)
    path.reverse()
    return path, float(cost[order[0]]), int(switches[order[0]])


# ---------------------------------------------------------------------------
# smooth trajectories


def _trajectory_objective(family, basis, widx, uu, vv, cfg, nu_fixed):
    lam_s, lam_r = cfg.lambda_smooth, cfg.lambda_ridge
    tau_family = family

    def split(beta_flat, q, p):
        return beta_flat.reshape(q, p)

    q = basis.shape[1]
    p = 2 if (family == "student_t" and nu_fixed is None) else (
        0 if family == "independence" else 1
    )
    # fixed-df student trajectories carry only the rho row; map it through
    # the correlation link and splice nu back in afterwards
    link = "gaussian" if (family == "student_t" and p == 1) else family

    def objective(beta_flat):
        beta = split(beta_flat, q, p)
        eta = basis @ beta  # (T, p)
        with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
            params = pc.eta_to_params(link, eta.T)
            p1 = params[0]
            p2 = params[1] if len(params) > 1 else nu_fixed
            row_p2 = p2[widx] if isinstance(p2, np.ndarray) else p2
            ll = pc.log_density_params(family, p1[widx], row_p2, uu, vv).sum()
            if not np.isfinite(ll):
                return 1e12 + float(np.sum(beta_flat**2))
            tau = np.asarray(pc.theta_to_tau(tau_family, p1))
            pen = lam_r * float(np.sum(beta**2))
            if tau.size >= 3:
                pen += lam_s * float(np.sum(np.diff(tau, 2) ** 2))
        return float(-ll + pen)

    return objective, q, p


def _central_gradient(fun, x, step):
    g = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = step
        g[i] = (fun(x + e) - fun(x - e)) / (2.0 * step)
    return g


def _fit_trajectory_family(family, basis, widx, uu, vv, n_per_window, cfg, nu_fixed=None):
    """Penalized trajectory fit for one family; returns a record dict."""
    T = basis.shape[0]
    objective, q, p = _trajectory_objective(family, basis, widx, uu, vv, cfg, nu_fixed)
    if family == "independence":
        states = [pc.INDEPENDENCE] * T
        return {"family": family, "states": states, "beta": np.zeros((q, 0)),
                "nll": 0.0, "k": 0, "objective_path": [0.0], "nu_fixed": None,
                "fallback": False}

    # constant-trajectory start from a pooled single-window fit
    grid = (nu_fixed,) if (family == "student_t" and nu_fixed is not None) else cfg.nu_grid
    pooled = pc.fit_window(uu, vv, family, nu_grid=grid)
    if family == "student_t" and nu_fixed is None:
        eta0 = pc.params_to_eta(family, pooled.state.params)
    elif family == "student_t":
        eta0 = pc.params_to_eta("gaussian", (pooled.state.params[0],))
    else:
        eta0 = pc.params_to_eta(family, pooled.state.params)
    beta0 = np.zeros((q, p))
    beta0[0, :] = eta0[:p]

    path_log = [objective(beta0.ravel())]

    def jac(x):
        return _central_gradient(objective, x, cfg.grad_step)

    fallback = False
    try:
        res = optimize.minimize(
            objective, beta0.ravel(), jac=jac, method="L-BFGS-B",
            options={"maxiter": cfg.max_iter},
            callback=lambda xk: path_log.append(objective(xk)),
        )
        beta = res.x.reshape(q, p)
        if not np.isfinite(res.fun) or res.fun >= 1e11:
            raise NumericalError("trajectory optimum is not finite")
    except (NumericalError, FloatingPointError, np.linalg.LinAlgError):
        beta = beta0
        fallback = True

    eta = basis @ beta
    link = "gaussian" if (family == "student_t" and p == 1) else family
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        params = pc.eta_to_params(link, eta.T)
    states = []
    for t in range(T):
        vals = tuple(float(np.asarray(pp)[t]) for pp in params)
        if family == "student_t" and nu_fixed is not None:
            vals = (vals[0], float(nu_fixed))
        states.append(pc.EdgeState(family, vals))
    p1 = params[0]
    p2 = params[1] if len(params) > 1 else nu_fixed
    row_p2 = p2[widx] if isinstance(p2, np.ndarray) else p2
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        nll = float(-pc.log_density_params(family, p1[widx], row_p2, uu, vv).sum())
    k = q * p + (1 if (family == "student_t" and nu_fixed is not None) else 0)
    return {"family": family, "states": states, "beta": beta, "nll": nll, "k": k,
            "objective_path": path_log, "nu_fixed": nu_fixed, "fallback": fallback}


def fit_smooth(windows, config=SmoothConfig(), order=None):
    """Joint smooth-trajectory C-vine fit over all training windows.

    Families are selected per edge by summed sequence NLL plus half the
    coefficient count times log of the pooled sample size; trajectories
    with lower penalized objectives win inside a family.
    """
    windows = [np.asarray(w, dtype=float) for w in windows]
    T = len(windows)
    if order is None:
        order = select_order_pooled(windows)
    structure = CVineStructure(tuple(order))
    d = structure.dim
    level = d - 1 if config.truncation_level is None else config.truncation_level
    # short sequences cannot support the full bump set; drop centers until
    # the design keeps full column rank
    n_centers = min(config.n_centers, max(T - 1, 0))
    while True:
        try:
            basis = build_basis(T, n_centers, config.bandwidth)
            break
        except DataError:
            if n_centers == 0:
                raise
            n_centers -= 1
    n_per_window = np.array([w.shape[0] for w in windows])
    log_total_n = np.log(float(n_per_window.sum()))
    widx = np.repeat(np.arange(T), n_per_window)

    cur = [{v: w[:, v] for v in structure.order} for w in windows]
    edge_states = {}
    fit_log = []
    trajectories = {}
    for m in range(1, level + 1):
        root = structure.order[m - 1]
        for leaf in structure.order[m:]:
            uu = np.concatenate([cur[t][root] for t in range(T)])
            vv = np.concatenate([cur[t][leaf] for t in range(T)])
            records = []
            for family in config.candidates:
                try:
                    if family == "student_t" and config.t_df_mode == "grid":
                        subs = [
                            _fit_trajectory_family(
                                family, basis, widx, uu, vv, n_per_window, config,
                                nu_fixed=float(nu))
                            for nu in config.nu_grid
                        ]
                        rec = min(subs, key=lambda r: r["nll"])
                    else:
                        rec = _fit_trajectory_family(
                            family, basis, widx, uu, vv, n_per_window, config)
                except (DataError, NumericalError) as err:
                    fit_log.append({"tree": m, "leaf": int(leaf), "family": family,
                                    "event": "candidate_failed", "reason": str(err)})
                    continue
                rec["score"] = rec["nll"] + 0.5 * rec["k"] * log_total_n
                records.append(rec)
            if not records:
                best = {"family": "independence", "states": [pc.INDEPENDENCE] * T,
                        "beta": np.zeros((basis.shape[1], 0)), "nll": 0.0, "k": 0,
                        "objective_path": [0.0], "nu_fixed": None, "fallback": True}
            else:
                best = min(records, key=lambda r: r["score"])
            edge_states[(m, leaf)] = best["states"]
            trajectories[f"{m}:{leaf}"] = {
                "family": best["family"],
                "beta": np.asarray(best["beta"]).tolist(),
                "nu_fixed": best["nu_fixed"],
            }
            fit_log.append({
                "tree": m, "leaf": int(leaf), "family": best["family"],
                "nll": best["nll"], "k": best["k"],
                "objective_path": [float(x) for x in best["objective_path"]],
                "fallback": bool(best.get("fallback", False)),
            })
        if m < level:
            for leaf in structure.order[m:]:
                states = edge_states[(m, leaf)]
                for t in range(T):
                    cur[t][leaf] = pc.h_function(states[t], cur[t][leaf], cur[t][root])
    return FittedVine(
        structure=structure, edge_states=edge_states, n_windows=T,
        truncation_level=level, estimator="smooth", fit_log=fit_log,
        extras={"trajectories": trajectories,
                "basis": {"n_centers": n_centers, "bandwidth": config.bandwidth}},
    )


# ---------------------------------------------------------------------------
# switching vines


def _switch_edge_tables(cur, root, leaf, T, candidates, nu_grid):
    K = len(candidates)
    local = np.full((T, K), np.inf)
    states = [[None] * K for _ in range(T)]
    n_fits = np.array([cur[t][root].size for t in range(T)], dtype=float)
    for t in range(T):
        ok = False
        for ki, family in enumerate(candidates):
            try:
                fit = pc.fit_window(cur[t][root], cur[t][leaf], family, nu_grid=nu_grid)
            except (DataError, NumericalError):
                continue
            local[t, ki] = fit.aic / (2.0 * n_fits[t])
            states[t][ki] = fit.state
            ok = True
        if not ok:
            # every candidate failed: contribute independence at zero cost
            states[t] = [pc.INDEPENDENCE] * K
            local[t] = np.zeros(K)
            local[t, 1:] = np.inf
            local[t, 0] = 0.0
            states[t][0] = pc.INDEPENDENCE
    return local, states


def _fit_switch_edges(windows_cur, order, T, config, level, fit_log, window_offset=0):
    """Shared per-edge DP used by switch and reg_windowed estimators."""
    candidates = tuple(config.candidates)
    edge_states = {}
    for m in range(1, level + 1):
        root = order[m - 1]
        for leaf in order[m:]:
            local, states = _switch_edge_tables(
                windows_cur, root, leaf, T, candidates, config.nu_grid)
            drift = np.zeros((T - 1, len(candidates)))
            if config.lambda_drift > 0.0:
                for t in range(1, T):
                    for ki in range(len(candidates)):
                        a, b = states[t - 1][ki], states[t][ki]
                        if a is not None and b is not None and a.family == b.family:
                            drift[t - 1, ki] = config.lambda_drift * pc.state_distance(a, b)
            path, cost, n_sw = solve_state_path(local, config.lambda_switch, drift)
            edge_states[(m, leaf)] = [states[t][path[t]] for t in range(T)]
            fit_log.append({
                "tree": m, "leaf": int(leaf),
                "families": [states[t][path[t]].family for t in range(T)],
                "dp_cost": cost, "switches": n_sw,
                "window_offset": window_offset,
            })
        if m < level:
            for leaf in order[m:]:
                sts = edge_states[(m, leaf)]
                for t in range(T):
                    windows_cur[t][leaf] = pc.h_function(
                        sts[t], windows_cur[t][leaf], windows_cur[t][root])
    return edge_states


def fit_switch(windows, config=SwitchConfig(), order=None):
    """Per-window candidate fits tied by an exact switching dynamic program.

    Local cost is AIC/(2 N_t); switching families costs lambda_switch and
    staying costs lambda_drift times the parameter distance between the
    adjacent per-window fits of that family.
    """
    windows = [np.asarray(w, dtype=float) for w in windows]
    T = len(windows)
    if order is None:
        order = select_order_pooled(windows)
    structure = CVineStructure(tuple(order))
    d = structure.dim
    level = d - 1 if config.truncation_level is None else config.truncation_level
    cur = [{v: w[:, v] for v in structure.order} for w in windows]
    fit_log = []
    edge_states = _fit_switch_edges(cur, structure.order, T, config, level, fit_log)
    return FittedVine(structure=structure, edge_states=edge_states, n_windows=T,
                      truncation_level=level, estimator="switch", fit_log=fit_log)


# ---------------------------------------------------------------------------
# windowed controls


def fit_windowed(windows, config=WindowedConfig()):
    """Independent static fit per window with the window's own root order."""
    windows = [np.asarray(w, dtype=float) for w in windows]
    vines = []
    for w in windows:
        fv = fit_static(w, candidates=config.candidates, nu_grid=config.nu_grid)
        if config.truncation_level is not None:
            fv = fv.truncate(config.truncation_level)
        vines.append(fv)
    return WindowSequence(vines=vines, estimator="windowed")


def fit_reg_windowed(windows, config=RegWindowedConfig()):
    """Windowed fits with penalized root and state paths.

    The root path minimizes the negative Kendall row sum plus a switching
    charge; inside each maximal constant-root segment the remaining order
    is greedy on segment-pooled taus and the per-edge dynamic program from
    the switching estimator smooths the states.  With all three penalties
    at zero this reduces exactly to fit_windowed.
    """
    windows = [np.asarray(w, dtype=float) for w in windows]
    if config.lambda_root == 0.0 and config.lambda_switch == 0.0 and config.lambda_drift == 0.0:
        seq = fit_windowed(windows, WindowedConfig(
            candidates=config.candidates, nu_grid=config.nu_grid,
            truncation_level=config.truncation_level))
        seq.estimator = "reg_windowed"
        return seq
    T = len(windows)
    d = windows[0].shape[1]
    taus = [kendall_matrix(w) for w in windows]
    root_local = np.array([-np.abs(t).sum(axis=1) for t in taus])
    root_path, _, _ = solve_state_path(root_local, config.lambda_root)

    level = d - 1 if config.truncation_level is None else config.truncation_level
    edge_cfg = SwitchConfig(
        candidates=config.candidates, nu_grid=config.nu_grid,
        lambda_switch=config.lambda_switch, lambda_drift=config.lambda_drift,
        truncation_level=config.truncation_level)
    vines = [None] * T
    fit_log = [{"event": "root_path", "roots": [int(r) for r in root_path]}]
    start = 0
    while start < T:
        end = start
        while end < T and root_path[end] == root_path[start]:
            end += 1
        seg = list(range(start, end))
        pooled = np.vstack([windows[t] for t in seg])
        tau = kendall_matrix(pooled)
        root = int(root_path[start])
        rest = greedy_order(tau[np.ix_([v for v in range(d) if v != root],
                                       [v for v in range(d) if v != root])])
        others = [v for v in range(d) if v != root]
        order = tuple([root] + [others[i] for i in rest])
        cur = [{v: windows[t][:, v] for v in order} for t in seg]
        edge_states = _fit_switch_edges(
            cur, order, len(seg), edge_cfg, level, fit_log, window_offset=start)
        structure = CVineStructure(order)
        for j, t in enumerate(seg):
            states_t = {k: [v[j]] for k, v in edge_states.items()}
            vines[t] = FittedVine(structure=structure, edge_states=states_t,
                                  n_windows=1, truncation_level=level,
                                  estimator="reg_windowed")
        start = end
    return WindowSequence(vines=vines, estimator="reg_windowed", fit_log=fit_log)


# ---------------------------------------------------------------------------
# latent low-rank ablation


def _latent_targets(smooth_fit):
    """Rows of latent trajectories (one per edge parameter) from a smooth fit."""
    basis_info = smooth_fit.extras["basis"]
    basis = build_basis(smooth_fit.n_windows, basis_info["n_centers"], basis_info["bandwidth"])
    rows, keys = [], []
    for key, rec in smooth_fit.extras["trajectories"].items():
        beta = np.asarray(rec["beta"], dtype=float)
        if rec["family"] == "independence" or beta.size == 0:
            continue
        eta = basis @ beta  # (T, p)
        for comp in range(eta.shape[1]):
            rows.append(eta[:, comp])
            keys.append((key, comp))
    return np.asarray(rows), keys, basis


def fit_latent(windows, config=LatentConfig(), smooth_fit=None, order=None):
    """Low-rank autoregressive reconstruction of the smooth trajectories.

    Each non-independence edge parameter contributes one latent target row
    eta_e(t); the model eta = w_e' z_t + b_e with z_t ~ phi z_{t-1} is fit
    by alternating least squares, and the reconstructed trajectories are
    re-realized as per-window states on the smooth fit's structure.
    """
    if smooth_fit is None:
        smooth_fit = fit_smooth(windows, config.smooth, order=order)
    T = smooth_fit.n_windows
    if config.k > smooth_fit.structure.edge_count():
        raise ConfigError(
            f"latent dimension {config.k} exceeds the edge count "
            f"{smooth_fit.structure.edge_count()}")
    targets, keys, basis = _latent_targets(smooth_fit)
    extras = {"phi": 0.0, "n_rows": int(targets.shape[0])}
    if targets.size == 0:
        out = FittedVine(structure=smooth_fit.structure,
                         edge_states=dict(smooth_fit.edge_states), n_windows=T,
                         truncation_level=smooth_fit.truncation_level,
                         estimator="latent", fit_log=list(smooth_fit.fit_log),
                         extras=extras)
        return out
    R = targets.shape[0]
    k = min(config.k, R)
    w_t = config.transition_weight

    b = targets.mean(axis=1)
    centered = targets - b[:, None]
    uu, ss, vt = np.linalg.svd(centered, full_matrices=False)
    W = uu[:, :k] * ss[:k]
    Z = vt[:k]  # (k, T)
    phi = 0.9

    def objective(W, b, Z, phi):
        resid = targets - W @ Z - b[:, None]
        pen = w_t * float(np.sum((Z[:, 1:] - phi * Z[:, :-1]) ** 2))
        return float(np.sum(resid**2)) + pen

    prev = objective(W, b, Z, phi)
    obj_path = [prev]
    for _ in range(config.max_sweeps):
        design = np.column_stack([Z.T, np.ones(T)])  # (T, k+1)
        sol, *_ = np.linalg.lstsq(design, targets.T, rcond=None)
        W = sol[:k].T
        b = sol[k]
        den = float(np.sum(Z[:, :-1] ** 2))
        phi = float(np.sum(Z[:, 1:] * Z[:, :-1]) / den) if den > 0 else 0.0
        phi = float(np.clip(phi, -0.999, 0.999))
        # z-step: block-tridiagonal normal equations over vec(Z) (t-major)
        wtw = W.T @ W
        big = np.zeros((T * k, T * k))
        rhs = np.zeros(T * k)
        for t in range(T):
            sl = slice(t * k, (t + 1) * k)
            big[sl, sl] += wtw
            rhs[sl] += W.T @ (targets[:, t] - b)
            if t > 0:
                big[sl, sl] += w_t * np.eye(k)
            if t < T - 1:
                big[sl, sl] += w_t * phi * phi * np.eye(k)
                nxt = slice((t + 1) * k, (t + 2) * k)
                big[sl, nxt] += -w_t * phi * np.eye(k)
                big[nxt, sl] += -w_t * phi * np.eye(k)
        z = np.linalg.solve(big + 1e-12 * np.eye(T * k), rhs)
        Z = z.reshape(T, k).T
        cur_obj = objective(W, b, Z, phi)
        obj_path.append(cur_obj)
        if prev - cur_obj <= config.tol * max(1.0, abs(prev)):
            prev = cur_obj
            break
        prev = cur_obj

    recon = W @ Z + b[:, None]
    by_key = {}
    for (key, comp), row in zip(keys, recon):
        by_key.setdefault(key, {})[comp] = row

    edge_states = {}
    for (tree, leaf), states in smooth_fit.edge_states.items():
        key = f"{tree}:{leaf}"
        rec = smooth_fit.extras["trajectories"][key]
        family = rec["family"]
        if family == "independence" or key not in by_key:
            edge_states[(tree, leaf)] = list(states)
            continue
        comps = by_key[key]
        p = len(comps)
        eta = np.vstack([comps[c] for c in range(p)])  # (p, T)
        link = "gaussian" if (family == "student_t" and p == 1) else family
        with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
            params = pc.eta_to_params(link, eta)
        new_states = []
        for t in range(T):
            vals = tuple(float(np.asarray(pp)[t]) for pp in params)
            if family == "student_t" and rec["nu_fixed"] is not None:
                vals = (vals[0], float(rec["nu_fixed"]))
            new_states.append(pc.EdgeState(family, vals))
        edge_states[(tree, leaf)] = new_states

    extras.update({
        "phi": phi,
        "loadings": W.tolist(),
        "offsets": b.tolist(),
        "z": Z.tolist(),
        "objective_path": [float(x) for x in obj_path],
        "rows": [f"{key}[{comp}]" for key, comp in keys],
    })
    return FittedVine(structure=smooth_fit.structure, edge_states=edge_states,
                      n_windows=T, truncation_level=smooth_fit.truncation_level,
                      estimator="latent", fit_log=list(smooth_fit.fit_log),
                      extras=extras)
