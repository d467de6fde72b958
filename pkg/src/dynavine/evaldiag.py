"""Leakage-free evaluation: split pseudo-observations, held-out likelihood
gaps, the pair/higher-tree decomposition, episode detection, and the
decorrelated permutation null.

Ranking happens strictly within a split: train and held-out rows of a
window are ranked separately with r/(n+1), never pooled, so no held-out
information can reach a fitted model.  All scores are reported per
held-out observation.
"""

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .errors import ConfigError, DataError
from .numkernel import SeededRng, child_seed

ROLES = ("primary", "truncated", "baseline", "control", "ablation")


@dataclass
class PseudoObsSequence:
    """Per-window train / held-out pseudo-observations in (0,1)."""

    train: list
    heldout: list
    seed: int
    train_frac: float
    jitter: float
    chronological: bool = False

    @property
    def n_windows(self):
        return len(self.train)

    @property
    def dim(self):
        return self.train[0].shape[1]


def _rank_unit(x, jitter_ok):
    """Within-split pseudo-observations r/(n+1) per column."""
    n, d = x.shape
    u = np.empty_like(x)
    for j in range(d):
        col = x[:, j]
        if not jitter_ok and np.unique(col).size < n:
            raise DataError(
                "tied values make ranks degenerate; rerun with jitter > 0")
        u[:, j] = stats.rankdata(col, method="ordinal") / (n + 1.0)
    return u


def make_pseudo_obs(windows, train_frac=0.8, seed=0, jitter=1e-3,
                    chronological=False):
    """Split each window into train/held-out rows and rank within splits.

    The split is a deterministic shuffle by the window's child seed with
    the first ceil(train_frac * n) rows assigned to train; chronological
    splits take the leading rows instead.  Jitter (default scale 1e-3) is
    added before ranking to break ties.
    """
    if not 0.0 < train_frac < 1.0:
        raise ConfigError("train_frac must be in (0, 1)")
    train, heldout = [], []
    for t, w in enumerate(windows):
        w = np.asarray(w, dtype=float)
        n = w.shape[0]
        if n < 10:
            raise DataError(f"window {t} has {n} rows; need at least 10")
        rng = SeededRng(child_seed(seed, t))
        x = w + jitter * rng.normal(w.shape) if jitter > 0 else w.copy()
        n_train = int(np.ceil(train_frac * n))
        if chronological:
            idx_train = np.arange(n_train)
            idx_test = np.arange(n_train, n)
        else:
            perm = rng.permutation(n)
            idx_train, idx_test = perm[:n_train], perm[n_train:]
        train.append(_rank_unit(x[idx_train], jitter > 0))
        heldout.append(_rank_unit(x[idx_test], jitter > 0))
    return PseudoObsSequence(train, heldout, seed, train_frac, jitter,
                             chronological)


def decorrelated_null(pseudo, seed):
    """Permute every column independently within each window and split.

    Marginals and counts are untouched; all cross-column dependence is
    destroyed, giving the independence-floor reference.
    """
    def scramble(mats, offset):
        out = []
        for t, m in enumerate(mats):
            rng = SeededRng(child_seed(seed, offset + t))
            m2 = m.copy()
            for j in range(m2.shape[1]):
                m2[:, j] = m2[rng.permutation(m2.shape[0]), j]
            out.append(m2)
        return out

    return PseudoObsSequence(
        train=scramble(pseudo.train, 0),
        heldout=scramble(pseudo.heldout, 500000),
        seed=seed, train_frac=pseudo.train_frac, jitter=pseudo.jitter,
        chronological=pseudo.chronological)


# ---------------------------------------------------------------------------
# held-out scores


def heldout_nll(model, pseudo, truncation_level=None):
    """Per-window held-out NLL per observation under `model`."""
    out = np.empty(pseudo.n_windows)
    for t, rows in enumerate(pseudo.heldout):
        ll = model.log_density(rows, t, truncation_level)
        out[t] = -float(np.mean(ll))
    return out


def nll_gap(nll_baseline, nll_model):
    """Per-window gap NLL_baseline - NLL_model; positive favors the model."""
    a = np.asarray(nll_baseline, dtype=float)
    b = np.asarray(nll_model, dtype=float)
    if a.shape != b.shape:
        raise DataError("gap requires NLL trajectories over the same windows")
    return a - b


def decompose(model, pseudo):
    """Total / pair / higher-tree held-out score split per window.

    s_total = -NLL(full), s_pair = -NLL(1-truncated, matched states),
    delta_ho = s_total - s_pair; additive by construction.
    """
    full = heldout_nll(model, pseudo)
    trunc = heldout_nll(model, pseudo, truncation_level=1)
    return {"s_total": -full, "s_pair": -trunc, "delta_ho": trunc - full}


# ---------------------------------------------------------------------------
# episode detection and order assignment


def _reference(values, independence_windows):
    idx = np.asarray(sorted(independence_windows), dtype=int)
    if idx.size < 2:
        raise DataError("need at least two labeled independence windows")
    ref = np.asarray(values, dtype=float)[idx]
    return float(ref.mean()), float(ref.std(ddof=1))


def detect_episodes(nll, independence_windows):
    """Flag windows whose NLL drops below the independence-window mean
    minus 2 * max(SD, 0.01)."""
    mean, sd = _reference(nll, independence_windows)
    thr = mean - 2.0 * max(sd, 0.01)
    return np.asarray(nll, dtype=float) < thr


def assign_order(s_total, delta_ho, independence_windows):
    """Two-stage per-window labels in {none, pairwise, higher}.

    Stage 1 detects any interaction: total score above the independence
    mean plus 2 * max(SD, 0.01).  Stage 2 calls it higher-tree when
    delta_ho exceeds the independence mean plus 2 * max(SD, 0.005).
    """
    mean_s, sd_s = _reference(s_total, independence_windows)
    mean_d, sd_d = _reference(delta_ho, independence_windows)
    thr_s = mean_s + 2.0 * max(sd_s, 0.01)
    thr_d = mean_d + 2.0 * max(sd_d, 0.005)
    labels = []
    for s, dh in zip(np.asarray(s_total, float), np.asarray(delta_ho, float)):
        if s <= thr_s:
            labels.append("none")
        elif dh > thr_d:
            labels.append("higher")
        else:
            labels.append("pairwise")
    return labels


def auroc(scores, labels):
    """Tie-corrected rank AUROC of scores against binary labels."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=bool)
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DataError("AUROC needs both classes present")
    ranks = stats.rankdata(scores, method="average")
    u = ranks[labels].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


# ---------------------------------------------------------------------------
# report


@dataclass
class EvalReport:
    """Per-method held-out summary against a designated primary model."""

    scenario: str
    primary_estimator: str
    methods: list = field(default_factory=list)
    per_window: dict = field(default_factory=dict)
    decomposition: dict = field(default_factory=dict)
    extras: dict = field(default_factory=dict)

    def to_rows(self):
        rows = []
        for m in self.methods:
            rows.append({
                "scenario": self.scenario,
                "primary_estimator": self.primary_estimator,
                "method": m["method"],
                "role": m["role"],
                "mean_heldout_nll": m["mean_heldout_nll"],
                "gap_vs_primary": m["gap_vs_primary"],
                "positive_window_fraction": m["positive_window_fraction"],
            })
        return rows

    def to_csv(self, path=None):
        fields = ["scenario", "primary_estimator", "method", "role",
                  "mean_heldout_nll", "gap_vs_primary",
                  "positive_window_fraction"]
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
        writer.writeheader()
        for row in self.to_rows():
            out = dict(row)
            for k in ("mean_heldout_nll", "gap_vs_primary",
                      "positive_window_fraction"):
                out[k] = f"{row[k]:.6f}"
            writer.writerow(out)
        text = buf.getvalue()
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text

    def to_dict(self):
        return {
            "scenario": self.scenario,
            "primary_estimator": self.primary_estimator,
            "methods": self.methods,
            "per_window": {k: list(map(float, v)) for k, v in self.per_window.items()},
            "decomposition": {k: list(map(float, v)) for k, v in self.decomposition.items()},
            "extras": self.extras,
        }

    def to_json(self, **kwargs):
        return json.dumps(self.to_dict(), sort_keys=True, **kwargs)


def build_report(scenario, primary, nll_by_method, roles, decomposition=None,
                 extras=None):
    """Assemble an EvalReport from per-window NLL trajectories.

    `nll_by_method` maps method name to its per-window held-out NLL;
    `roles` maps method name to its comparator role; gaps are each
    method's NLL minus the primary's (positive favors the primary).
    """
    if primary not in nll_by_method:
        raise ConfigError(f"primary method {primary!r} missing from results")
    base = np.asarray(nll_by_method[primary], dtype=float)
    methods = []
    for name, nll in nll_by_method.items():
        gap = nll_gap(nll, base)
        methods.append({
            "method": name,
            "role": roles.get(name, "baseline"),
            "mean_heldout_nll": float(np.mean(nll)),
            "gap_vs_primary": float(np.mean(gap)),
            "positive_window_fraction": float(np.mean(gap > 0)),
        })
    order = {r: i for i, r in enumerate(ROLES)}
    methods.sort(key=lambda m: (order.get(m["role"], len(ROLES)), m["method"]))
    return EvalReport(
        scenario=scenario, primary_estimator=primary, methods=methods,
        per_window={k: np.asarray(v, float) for k, v in nll_by_method.items()},
        decomposition=decomposition or {}, extras=extras or {})
