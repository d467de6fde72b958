"""Seeded synthetic benchmark generators and population information oracles.

Seven scenarios exercise distinct dependence dynamics:

* tail_df: equicorrelated multivariate t whose degrees of freedom jump
  from 3 to 30 halfway through, at fixed linear correlation;
* tail_switch: star vine whose tree-1 family flips Clayton to Gumbel at
  the midpoint, holding Kendall's tau at 0.4;
* hub_switch: Gaussian star whose hub moves from variable 0 to 1;
* agent_episodes: recurrent independence / pairwise / higher-order /
  mixed segments on six variables;
* xor_stress: pairwise-independent triple whose third coordinate is a
  deterministic function of the other two in the second half;
* mult_triplet: one window of Z = X*Y + sigma*eps, a purely conditional
  signal;
* showcase: ten variables through independence, Gaussian-star,
  triplet and lower-tail Clayton phases.

Everything is a pure function of (scenario, seed): windows draw from
per-window child streams, schedules never depend on the seed, and oracle
curves use fixed internal seeds so they are reproducible constants.
"""

import csv
import io
import json
import os
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .errors import ConfigError, DataError
from .numkernel import SeededRng, child_seed, normal_quantile
from . import paircopula as pc
from .vine import sample_cvine

BENCHMARK_SEED = 2026
SCENARIOS = (
    "tail_df",
    "tail_switch",
    "hub_switch",
    "agent_episodes",
    "xor_stress",
    "mult_triplet",
    "showcase",
)

AGENT_SCHEDULE_TYPES = (
    "independence", "pairwise", "independence", "higher", "independence",
    "mixed", "independence", "pairwise", "higher", "mixed", "independence",
)
AGENT_SEGMENT_LENGTHS = (4, 5, 3, 6, 4, 4, 4, 5, 6, 4, 3)

DATASET_SCHEMA = "dvc-dataset/1"


@dataclass(frozen=True)
class ScenarioSpec:
    name: str
    d: int
    T: int
    n_per_window: int
    seed: int
    params: dict = field(default_factory=dict)


@dataclass
class WindowedDataset:
    spec: ScenarioSpec
    windows: list
    var_names: list

    @property
    def n_windows(self):
        return len(self.windows)


@dataclass
class GroundTruth:
    labels: list
    schedule: list
    oracle: dict = field(default_factory=dict)


def _window_rng(seed, t):
    return SeededRng(child_seed(seed, t))


def _uniform_to_normal(u):
    return normal_quantile(np.clip(u, 1e-12, 1.0 - 1e-12))


def _rank_normal_scores(x):
    """Gaussianize one column by its empirical ranks, r/(n+1)."""
    x = np.asarray(x, dtype=float)
    ranks = stats.rankdata(x, method="ordinal")
    return normal_quantile(ranks / (x.size + 1.0))


# ---------------------------------------------------------------------------
# generators


def gen_tail_df(seed=BENCHMARK_SEED):
    """Equicorrelated multivariate t: rho=0.6 fixed, df 3 then 30."""
    d, T, n, rho = 5, 24, 250, 0.6
    corr = np.full((d, d), rho)
    np.fill_diagonal(corr, 1.0)
    chol = np.linalg.cholesky(corr)
    windows, labels = [], []
    for t in range(T):
        nu = 3.0 if t < 12 else 30.0
        rng = _window_rng(seed, t)
        z = rng.normal((n, d)) @ chol.T
        g = rng.chisquare(nu, n)
        windows.append(z / np.sqrt(g / nu)[:, None])
        labels.append("t3" if t < 12 else "t30")
    spec = ScenarioSpec("tail_df", d, T, n, seed, {"rho": rho, "nu": [3.0, 30.0]})
    schedule = [{"type": "t3", "start": 0, "length": 12},
                {"type": "t30", "start": 12, "length": 12}]
    gt = GroundTruth(labels, schedule, oracle_information(spec))
    return WindowedDataset(spec, windows, [f"x{i}" for i in range(d)]), gt


def gen_tail_switch(seed=BENCHMARK_SEED):
    """Star vine at Kendall tau 0.4; Clayton before t=12, Gumbel after."""
    d, T, n, tau = 5, 24, 250, 0.4
    windows, labels = [], []
    order = tuple(range(d))
    for t in range(T):
        fam = "clayton" if t < 12 else "gumbel"
        state = pc.state_from_tau(fam, tau)
        states = {(1, leaf): state for leaf in range(1, d)}
        u = sample_cvine(order, states, n, _window_rng(seed, t))
        windows.append(_uniform_to_normal(u))
        labels.append(fam)
    spec = ScenarioSpec("tail_switch", d, T, n, seed, {
        "tau": tau,
        "clayton_theta": pc.tau_to_theta("clayton", tau),
        "gumbel_theta": pc.tau_to_theta("gumbel", tau),
    })
    schedule = [{"type": "clayton", "start": 0, "length": 12},
                {"type": "gumbel", "start": 12, "length": 12}]
    return WindowedDataset(spec, windows, [f"x{i}" for i in range(d)]), GroundTruth(labels, schedule)


def _star_correlation(d, hub, rho):
    corr = np.full((d, d), rho * rho)
    corr[hub, :] = rho
    corr[:, hub] = rho
    np.fill_diagonal(corr, 1.0)
    return corr


def gen_hub_switch(seed=BENCHMARK_SEED):
    """Gaussian star; the hub moves from variable 0 to variable 1 at t=12."""
    d, T, n, rho = 8, 24, 250, 0.7
    windows, labels = [], []
    for t in range(T):
        hub = 0 if t < 12 else 1
        chol = np.linalg.cholesky(_star_correlation(d, hub, rho))
        windows.append(_window_rng(seed, t).normal((n, d)) @ chol.T)
        labels.append(f"hub{hub}")
    spec = ScenarioSpec("hub_switch", d, T, n, seed, {"rho": rho, "hubs": [0, 1]})
    schedule = [{"type": "hub0", "start": 0, "length": 12},
                {"type": "hub1", "start": 12, "length": 12}]
    return WindowedDataset(spec, windows, [f"x{i}" for i in range(d)]), GroundTruth(labels, schedule)


AGENT_PAIR = (0, 1)          # Gaussian episode pair
AGENT_TRIPLE = (0, 2, 3)     # conditional-vine episode triple
AGENT_PAIR_RHO = 0.7
AGENT_T_RHO = 0.5
AGENT_T_NU = 3.0
AGENT_HIGHER_TAU = 0.6


def _agent_schedule():
    schedule, start = [], 0
    for typ, length in zip(AGENT_SCHEDULE_TYPES, AGENT_SEGMENT_LENGTHS):
        schedule.append({"type": typ, "start": start, "length": length})
        start += length
    return schedule


def _agent_window(label, n, rng, d=6):
    x = rng.normal((n, d))
    if label in ("higher", "mixed"):
        t_state = pc.EdgeState("student_t", (AGENT_T_RHO, AGENT_T_NU))
        cl_state = pc.state_from_tau("clayton", AGENT_HIGHER_TAU)
        states = {(1, 1): t_state, (1, 2): t_state, (2, 2): cl_state}
        u = sample_cvine((0, 1, 2), states, n, rng)
        z = _uniform_to_normal(u)
        for col, var in enumerate(AGENT_TRIPLE):
            x[:, var] = z[:, col]
    if label in ("pairwise", "mixed"):
        a, b = AGENT_PAIR
        eps = rng.normal(n)
        x[:, b] = AGENT_PAIR_RHO * x[:, a] + np.sqrt(1.0 - AGENT_PAIR_RHO**2) * eps
    return x


def gen_agent_episodes(seed=BENCHMARK_SEED):
    """Recurrent independence / pairwise / higher-order / mixed segments."""
    d, T, n = 6, 48, 300
    schedule = _agent_schedule()
    labels = []
    for seg in schedule:
        labels.extend([seg["type"]] * seg["length"])
    windows = [_agent_window(labels[t], n, _window_rng(seed, t), d) for t in range(T)]
    spec = ScenarioSpec("agent_episodes", d, T, n, seed, {
        "pair": list(AGENT_PAIR), "pair_rho": AGENT_PAIR_RHO,
        "triple": list(AGENT_TRIPLE), "t_rho": AGENT_T_RHO, "t_nu": AGENT_T_NU,
        "higher_tau": AGENT_HIGHER_TAU,
    })
    return WindowedDataset(spec, windows, [f"x{i}" for i in range(d)]), GroundTruth(labels, schedule)


def gen_xor(seed=BENCHMARK_SEED):
    """Pairwise-independent triple; W = (U+V) mod 1 in the second half."""
    d, T, n = 3, 8, 3000
    windows, labels = [], []
    for t in range(T):
        rng = _window_rng(seed, t)
        u = rng.uniform(n)
        v = rng.uniform(n)
        if t < 4:
            w = rng.uniform(n)
            x = np.column_stack([_uniform_to_normal(c) for c in (u, v, w)])
            labels.append("independent")
        else:
            w = np.mod(u + v, 1.0)
            x = np.column_stack([_uniform_to_normal(c) for c in (u, v, w)])
            x = x + 1e-3 * rng.normal((n, d))
            labels.append("xor")
        windows.append(x)
    spec = ScenarioSpec("xor_stress", d, T, n, seed, {"jitter": 1e-3})
    schedule = [{"type": "independent", "start": 0, "length": 4},
                {"type": "xor", "start": 4, "length": 4}]
    return WindowedDataset(spec, windows, [f"x{i}" for i in range(d)]), GroundTruth(labels, schedule)


def _triplet_block(n, sigma, rng):
    x = rng.normal(n)
    y = rng.normal(n)
    z = x * y + sigma * rng.normal(n)
    return np.column_stack([_rank_normal_scores(c) for c in (x, y, z)])


def gen_mult_triplet(seed=BENCHMARK_SEED):
    """One window of the multiplicative triplet Z = X*Y + 0.25*eps."""
    d, T, n, sigma = 3, 1, 6000, 0.25
    windows = [_triplet_block(n, sigma, _window_rng(seed, 0))]
    spec = ScenarioSpec("mult_triplet", d, T, n, seed, {"sigma": sigma})
    gt = GroundTruth(["triplet"], [{"type": "triplet", "start": 0, "length": 1}],
                     oracle_information(spec))
    return WindowedDataset(spec, windows, [f"x{i}" for i in range(d)]), gt


SHOWCASE_STAR_RHO = 0.55
SHOWCASE_TRIPLET_SIGMA = 0.10
SHOWCASE_CLAYTON_THETA = 3.5


def _showcase_window(label, n, rng, d=10):
    x = rng.normal((n, d))
    if label in ("pairwise", "triplet"):
        r = SHOWCASE_STAR_RHO
        for leaf in (1, 2, 3):
            x[:, leaf] = r * x[:, 0] + np.sqrt(1.0 - r * r) * x[:, leaf]
    if label == "triplet":
        x[:, 4:7] = _triplet_block(n, SHOWCASE_TRIPLET_SIGMA, rng)
        x[:, 7:10] = _triplet_block(n, SHOWCASE_TRIPLET_SIGMA, rng)
    if label == "clayton":
        state = pc.EdgeState("clayton", (SHOWCASE_CLAYTON_THETA,))
        states = {(1, leaf): state for leaf in (1, 2, 3)}
        u = sample_cvine((0, 1, 2, 3), states, n, rng)
        x[:, 0:4] = _uniform_to_normal(u)
    return x


def gen_showcase(seed=BENCHMARK_SEED):
    """Four 15-window phases: independence, Gaussian star, star plus two
    multiplicative triplets, and a Clayton lower-tail block."""
    d, T, n = 10, 60, 300
    phases = ("independence", "pairwise", "triplet", "clayton")
    labels = [phases[t // 15] for t in range(T)]
    windows = [_showcase_window(labels[t], n, _window_rng(seed, t), d) for t in range(T)]
    spec = ScenarioSpec("showcase", d, T, n, seed, {
        "star_rho": SHOWCASE_STAR_RHO,
        "triplet_sigma": SHOWCASE_TRIPLET_SIGMA,
        "clayton_theta": SHOWCASE_CLAYTON_THETA,
    })
    schedule = [{"type": p, "start": 15 * i, "length": 15} for i, p in enumerate(phases)]
    gt = GroundTruth(labels, schedule, oracle_information(spec))
    return WindowedDataset(spec, windows, [f"x{i}" for i in range(d)]), gt


GENERATORS = {
    "tail_df": gen_tail_df,
    "tail_switch": gen_tail_switch,
    "hub_switch": gen_hub_switch,
    "agent_episodes": gen_agent_episodes,
    "xor_stress": gen_xor,
    "mult_triplet": gen_mult_triplet,
    "showcase": gen_showcase,
}


def generate(name, seed=BENCHMARK_SEED):
    """Dispatch by scenario name; unknown names raise ConfigError."""
    if name not in GENERATORS:
        raise ConfigError(
            f"unknown scenario {name!r}; valid scenarios: {', '.join(SCENARIOS)}")
    return GENERATORS[name](seed)


# ---------------------------------------------------------------------------
# population information oracles


def gaussian_pair_mi(rho):
    """Mutual information of a bivariate Gaussian, -0.5*ln(1-rho^2)."""
    return -0.5 * np.log1p(-float(rho) ** 2)


def clayton_pair_mi(theta, n_mc=10**6, seed=777001):
    """Copula entropy of a Clayton pair by Monte Carlo (SE < 0.005 nats)."""
    rng = SeededRng(seed)
    state = pc.EdgeState("clayton", (float(theta),))
    w = rng.uniform(n_mc)
    v = pc.h_inverse(state, rng.uniform(n_mc), w)
    return float(pc.log_density(state, w, v).mean())


def clayton_lower_tail(theta):
    """Lower tail-dependence coefficient 2^(-1/theta)."""
    return float(2.0 ** (-1.0 / float(theta)))


def _mvt_information(corr, nu, n_mc=10**6, seed=777002):
    """(TC, pair, higher) of an equicorrelated multivariate t by MC.

    Pair is the first-tree component of the C-vine decomposition (any root
    by exchangeability): (d-1) bivariate-t informations; higher is the
    remainder of the total correlation.
    """
    corr = np.asarray(corr, dtype=float)
    d = corr.shape[0]
    rng = SeededRng(seed)
    chol = np.linalg.cholesky(corr)
    z = rng.normal((n_mc, d)) @ chol.T
    g = rng.chisquare(nu, n_mc)
    x = z / np.sqrt(g / nu)[:, None]
    joint = stats.multivariate_t(loc=np.zeros(d), shape=corr, df=nu).logpdf(x)
    marg = stats.t(df=nu).logpdf(x).sum(axis=1)
    tc = float((joint - marg).mean())

    pair_corr = corr[:2, :2]
    z2 = rng.normal((n_mc, 2)) @ np.linalg.cholesky(pair_corr).T
    g2 = rng.chisquare(nu, n_mc)
    x2 = z2 / np.sqrt(g2 / nu)[:, None]
    j2 = stats.multivariate_t(loc=np.zeros(2), shape=pair_corr, df=nu).logpdf(x2)
    m2 = stats.t(df=nu).logpdf(x2).sum(axis=1)
    pair = (d - 1) * float((j2 - m2).mean())
    return tc, pair, tc - pair


def _triplet_information(sigma, n_mc=2 * 10**5, n_gh=64, seed=777003):
    """(TC, pair, higher) of Z = X*Y + sigma*eps with X, Y standard normal.

    TC = h(Z) - h(Z | X, Y); the pair component takes Z as the vine root
    (it carries all the pairwise signal), so pair = I(Z;X) + I(Z;Y) and
    higher is the conditional remainder.  h(Z) comes from Monte Carlo over
    a Gauss-Hermite evaluation of the Z density.
    """
    sigma = float(sigma)
    rng = SeededRng(seed)
    x = rng.normal(n_mc)
    y = rng.normal(n_mc)
    z = x * y + sigma * rng.normal(n_mc)

    nodes, weights = np.polynomial.hermite.hermgauss(n_gh)
    gx = np.sqrt(2.0) * nodes
    w2 = np.outer(weights, weights).ravel() / np.pi
    prod = np.outer(gx, gx).ravel()
    log_norm = -0.5 * np.log(2.0 * np.pi * sigma * sigma)
    h_z_terms = np.empty(n_mc)
    step = 2000
    for lo in range(0, n_mc, step):
        zz = z[lo:lo + step, None]
        dens = np.exp(-0.5 * ((zz - prod[None, :]) / sigma) ** 2) @ w2
        h_z_terms[lo:lo + step] = np.log(dens) + log_norm
    h_z = -float(h_z_terms.mean())

    log_2pe = np.log(2.0 * np.pi * np.e)
    h_z_given_xy = 0.5 * (log_2pe + 2.0 * np.log(sigma))
    tc = h_z - h_z_given_xy
    # I(Z;X) = h(Z) - h(Z|X), with Z|X=x Gaussian of variance x^2 + sigma^2
    gw = weights / np.sqrt(np.pi)
    h_z_given_x = 0.5 * float(np.sum(gw * (log_2pe + np.log(gx**2 + sigma**2))))
    pair = 2.0 * (h_z - h_z_given_x)
    return float(tc), float(pair), float(tc - pair)


def oracle_information(spec):
    """Population oracle curves for scenarios where they are defined."""
    if spec.name == "tail_df":
        corr = np.full((spec.d, spec.d), spec.params["rho"])
        np.fill_diagonal(corr, 1.0)
        curves = {"tc": [], "pair": [], "higher": []}
        by_nu = {nu: _mvt_information(corr, nu) for nu in spec.params["nu"]}
        for t in range(spec.T):
            tc, pair, higher = by_nu[3.0 if t < 12 else 30.0]
            curves["tc"].append(tc)
            curves["pair"].append(pair)
            curves["higher"].append(higher)
        return curves
    if spec.name == "mult_triplet":
        tc, pair, higher = _triplet_information(spec.params["sigma"])
        return {"tc": [tc], "pair": [pair], "higher": [higher]}
    if spec.name == "showcase":
        star_mi = gaussian_pair_mi(spec.params["star_rho"])
        tri = _triplet_information(spec.params["triplet_sigma"])
        cl_mi = clayton_pair_mi(spec.params["clayton_theta"])
        phase_vals = {
            "independence": (0.0, 0.0, 0.0),
            "pairwise": (3 * star_mi, 3 * star_mi, 0.0),
            "triplet": (3 * star_mi + 2 * tri[0], 3 * star_mi + 2 * tri[1], 2 * tri[2]),
            "clayton": (3 * cl_mi, 3 * cl_mi, 0.0),
        }
        phases = ("independence", "pairwise", "triplet", "clayton")
        curves = {"tc": [], "pair": [], "higher": []}
        for t in range(spec.T):
            tc, pair, higher = phase_vals[phases[t // 15]]
            curves["tc"].append(tc)
            curves["pair"].append(pair)
            curves["higher"].append(higher)
        curves["star_pair_mi"] = star_mi
        curves["clayton_pair_mi"] = cl_mi
        curves["clayton_lower_tail"] = clayton_lower_tail(spec.params["clayton_theta"])
        return curves
    raise ConfigError(f"no information oracle for scenario {spec.name!r}")


# ---------------------------------------------------------------------------
# dataset IO: one CSV per window plus a JSON manifest


def save_dataset(dataset, truth, out_dir):
    os.makedirs(out_dir, exist_ok=True)
    for t, w in enumerate(dataset.windows):
        path = os.path.join(out_dir, f"window_{t:03d}.csv")
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(dataset.var_names)
            for row in w:
                writer.writerow([_format_float(v) for v in row])
    manifest = {
        "schema": DATASET_SCHEMA,
        "scenario": dataset.spec.name,
        "seed": dataset.spec.seed,
        "d": dataset.spec.d,
        "T": dataset.spec.T,
        "n_per_window": dataset.spec.n_per_window,
        "params": dataset.spec.params,
        "var_names": dataset.var_names,
        "labels": truth.labels,
        "schedule": truth.schedule,
        "oracle": truth.oracle,
    }
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=1)
        fh.write("\n")
    return out_dir


def _format_float(v):
    return repr(float(v))


def load_dataset(in_dir):
    path = os.path.join(in_dir, "manifest.json")
    if not os.path.exists(path):
        raise DataError(f"no manifest.json under {in_dir}")
    with open(path) as fh:
        manifest = json.load(fh)
    if manifest.get("schema") != DATASET_SCHEMA:
        raise DataError(f"unsupported dataset schema: {manifest.get('schema')}")
    spec = ScenarioSpec(manifest["scenario"], manifest["d"], manifest["T"],
                        manifest["n_per_window"], manifest["seed"], manifest["params"])
    windows = []
    for t in range(manifest["T"]):
        wpath = os.path.join(in_dir, f"window_{t:03d}.csv")
        with open(wpath) as fh:
            reader = csv.reader(fh)
            header = next(reader)
            rows = [[float(v) for v in row] for row in reader]
        if header != manifest["var_names"]:
            raise DataError(f"window {t} header does not match the manifest")
        windows.append(np.asarray(rows, dtype=float))
    truth = GroundTruth(manifest["labels"], manifest["schedule"], manifest.get("oracle", {}))
    return WindowedDataset(spec, windows, manifest["var_names"]), truth
