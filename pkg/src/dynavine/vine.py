"""Canonical vine structures: static fits, density evaluation, sampling.

A C-vine on d variables is a sequence of star trees fixed by a root order:
tree m pairs the m-th root with every later variable, conditioned on the
earlier roots.  Pseudo-observations propagate between trees through the
fitted h-functions, so evaluating or truncating a vine never touches raw
data again.

Fitted objects hold one state per edge per window; a static fit is the
one-window special case.  Truncation shares the retained edge states with
the full fit (matched truncation), which makes score decompositions exact
by construction.
"""

import json
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .errors import DataError, NumericalError
from . import paircopula as pc

SCHEMA = "dvc-vine/1"


@dataclass(frozen=True)
class CVineStructure:
    """Root order of a canonical vine; order[m] roots tree m+1."""

    order: tuple

    def __post_init__(self):
        if sorted(self.order) != list(range(len(self.order))):
            raise ValueError("order must be a permutation of 0..d-1")

    @property
    def dim(self):
        return len(self.order)

    def edges(self, truncation_level=None):
        """(tree, root, leaf, conditioning tuple) for every retained edge."""
        d = self.dim
        level = d - 1 if truncation_level is None else truncation_level
        out = []
        for m in range(1, level + 1):
            root = self.order[m - 1]
            cond = tuple(self.order[: m - 1])
            for leaf in self.order[m:]:
                out.append((m, root, leaf, cond))
        return out

    def edge_count(self, truncation_level=None):
        d = self.dim
        level = d - 1 if truncation_level is None else truncation_level
        if not 0 <= level <= d - 1:
            raise ValueError("truncation level must lie in [0, d-1]")
        return sum(d - m for m in range(1, level + 1))


def kendall_matrix(u):
    """Symmetric matrix of sample Kendall's tau over all column pairs."""
    u = np.asarray(u, dtype=float)
    d = u.shape[1]
    m = np.zeros((d, d))
    for i in range(d):
        for j in range(i + 1, d):
            t = stats.kendalltau(u[:, i], u[:, j]).statistic
            m[i, j] = m[j, i] = 0.0 if np.isnan(t) else t
    return m


def _check_tau_input(u):
    u = np.asarray(u, dtype=float)
    if u.ndim != 2 or u.shape[0] < 8:
        raise DataError("need at least 8 rows of pseudo-observations")
    if np.any(np.all(u == u[0], axis=0)):
        raise DataError("constant column: Kendall tau is undefined")
    return u


def select_root_windowed(u):
    """Root for one window: argmax over variables of sum_j |tau_hat(r, j)|.

    Ties resolve to the lowest variable index.
    """
    scores = np.abs(kendall_matrix(_check_tau_input(u))).sum(axis=1)
    return int(np.argmax(scores))


# Tau entries are snapped to this width before the greedy argmax; sums that
# agree at this resolution count as ties and resolve to the lowest index.
TAU_TIE_WIDTH = 0.05


def greedy_order(tau_matrix):
    """Full root order: repeatedly take the variable with the largest
    absolute-tau row sum among the remaining ones."""
    q = np.round(np.abs(tau_matrix) / TAU_TIE_WIDTH) * TAU_TIE_WIDTH
    d = tau_matrix.shape[0]
    remaining = list(range(d))
    order = []
    while remaining:
        sub = q[np.ix_(remaining, remaining)].sum(axis=1)
        order.append(remaining.pop(int(np.argmax(sub))))
    return tuple(order)


def select_order_pooled(windows):
    """Greedy root order from pseudo-observations pooled across windows."""
    pooled = np.vstack([np.asarray(w, dtype=float) for w in windows])
    return greedy_order(kendall_matrix(_check_tau_input(pooled)))


@dataclass
class FittedVine:
    """A C-vine with one fitted state per edge per window.

    edge_states maps (tree, leaf) -> list of EdgeState of length n_windows;
    the root of each edge is implied by the structure's order.
    """

    structure: CVineStructure
    edge_states: dict
    n_windows: int = 1
    truncation_level: int = None
    estimator: str = "static"
    fit_log: list = field(default_factory=list)
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.truncation_level is None:
            self.truncation_level = self.structure.dim - 1

    @property
    def dim(self):
        return self.structure.dim

    def state_at(self, tree, leaf, t=0):
        states = self.edge_states.get((tree, leaf))
        if states is None:
            return pc.INDEPENDENCE
        return states[t]

    def log_density(self, u, t=0, truncation_level=None):
        """Per-row log copula density at window t, summed over retained trees."""
        u = np.atleast_2d(np.asarray(u, dtype=float))
        if u.shape[1] != self.dim:
            raise DataError("row dimension does not match the vine")
        if np.any(u <= 0.0) or np.any(u >= 1.0):
            raise DataError("pseudo-observations must lie strictly in (0, 1)")
        if not 0 <= t < self.n_windows:
            raise DataError("window index out of range")
        level = self.truncation_level if truncation_level is None else truncation_level
        if not 0 <= level <= self.dim - 1:
            raise ValueError("truncation level must lie in [0, d-1]")
        level = min(level, self.truncation_level)
        order = self.structure.order
        cur = {v: u[:, v] for v in order}
        total = np.zeros(u.shape[0])
        for m in range(1, level + 1):
            root = order[m - 1]
            for leaf in order[m:]:
                state = self.state_at(m, leaf, t)
                total += pc.log_density(state, cur[root], cur[leaf])
            if m < level:
                for leaf in order[m:]:
                    state = self.state_at(m, leaf, t)
                    cur[leaf] = pc.h_function(state, cur[leaf], cur[root])
        return total

    def truncate(self, level):
        """Vine sharing the retained edge states of this fit (matched
        truncation); higher trees are dropped, not refit."""
        if not 0 <= level <= self.dim - 1:
            raise ValueError("truncation level must lie in [0, d-1]")
        kept = {k: v for k, v in self.edge_states.items() if k[0] <= level}
        return FittedVine(
            structure=self.structure,
            edge_states=kept,
            n_windows=self.n_windows,
            truncation_level=level,
            estimator=self.estimator,
            fit_log=list(self.fit_log),
            extras=dict(self.extras),
        )

    def to_dict(self):
        edges = []
        for (tree, leaf), states in sorted(self.edge_states.items()):
            root = self.structure.order[tree - 1]
            cond = list(self.structure.order[: tree - 1])
            edges.append(
                {
                    "tree": tree,
                    "root": int(root),
                    "leaf": int(leaf),
                    "cond": [int(c) for c in cond],
                    "states": [s.as_dict() for s in states],
                }
            )
        return {
            "schema": SCHEMA,
            "mode": "shared_structure",
            "dim": self.dim,
            "order": [int(v) for v in self.structure.order],
            "n_windows": self.n_windows,
            "truncation_level": self.truncation_level,
            "estimator": self.estimator,
            "fit_log": self.fit_log,
            "extras": self.extras,
        } | {"edges": edges}

    def to_json(self, **kwargs):
        return json.dumps(self.to_dict(), sort_keys=True, **kwargs)

    @classmethod
    def from_dict(cls, data):
        if data.get("schema") != SCHEMA:
            raise DataError(f"unsupported model schema: {data.get('schema')}")
        structure = CVineStructure(tuple(data["order"]))
        edge_states = {}
        for e in data["edges"]:
            states = [pc.EdgeState(s["family"], tuple(s["params"])) for s in e["states"]]
            edge_states[(e["tree"], e["leaf"])] = states
        return cls(
            structure=structure,
            edge_states=edge_states,
            n_windows=data["n_windows"],
            truncation_level=data["truncation_level"],
            estimator=data.get("estimator", "static"),
            fit_log=data.get("fit_log", []),
            extras=data.get("extras", {}),
        )

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def fit_static(u, candidates=pc.FAMILIES, nu_grid=pc.DEFAULT_NU_GRID, order=None):
    """AIC-selected static C-vine fit of one window of pseudo-observations.

    Tree 1 edges are fitted first, pseudo-observations propagate through the
    fitted h-functions, and the scheme repeats until tree d-1.  An edge whose
    every candidate fails falls back to independence and the event lands in
    the fit log.
    """
    u = np.asarray(u, dtype=float)
    if u.ndim != 2 or u.shape[1] < 2:
        raise DataError("need a 2-d array with at least two columns")
    if order is None:
        tau = kendall_matrix(u)
        order = greedy_order(tau)
    structure = CVineStructure(tuple(order))
    d = structure.dim
    cur = {v: u[:, v] for v in structure.order}
    edge_states = {}
    fit_log = []
    for m in range(1, d):
        root = structure.order[m - 1]
        for leaf in structure.order[m:]:
            try:
                fit = pc.select_family_aic(cur[root], cur[leaf], candidates, nu_grid)
            except (DataError, NumericalError) as err:
                fit = pc.WindowFit(pc.INDEPENDENCE, 0.0, 0, 0.0)
                fit_log.append(
                    {"tree": m, "leaf": int(leaf), "event": "fallback_independence",
                     "reason": str(err)}
                )
            edge_states[(m, leaf)] = [fit.state]
            entry = {"tree": m, "leaf": int(leaf), "family": fit.state.family,
                     "nll": float(fit.nll)}
            if fit.failures:
                entry["failed_candidates"] = list(fit.failures)
            fit_log.append(entry)
        if m < d - 1:
            for leaf in structure.order[m:]:
                state = edge_states[(m, leaf)][0]
                cur[leaf] = pc.h_function(state, cur[leaf], cur[root])
    return FittedVine(structure=structure, edge_states=edge_states, n_windows=1,
                      estimator="static", fit_log=fit_log)


def sample_cvine(order, edge_states, n, rng, t=0):
    """Draw n rows from a C-vine with the given per-edge states.

    edge_states maps (tree, leaf) to either an EdgeState or a per-window
    list; missing edges count as independence.  Columns come back in
    variable (not root-order) indexing.
    """
    structure = CVineStructure(tuple(order))
    d = structure.dim

    def state_for(tree, leaf):
        s = edge_states.get((tree, leaf))
        if s is None:
            return pc.INDEPENDENCE
        if isinstance(s, pc.EdgeState):
            return s
        return s[t]

    w = rng.uniform((n, d))
    cond = [[None] * d for _ in range(d)]  # cond[k][i]: position i given first k roots
    cond[0][0] = w[:, 0]
    x = [w[:, 0]]
    for i in range(1, d):
        t_col = w[:, i]
        for k in range(i - 1, -1, -1):
            t_col = pc.h_inverse(state_for(k + 1, order[i]), t_col, cond[k][k])
        x.append(t_col)
        cond[0][i] = t_col
        for k in range(1, i + 1):
            cond[k][i] = pc.h_function(
                state_for(k, order[i]), cond[k - 1][i], cond[k - 1][k - 1]
            )
    out = np.empty((n, d))
    for pos, var in enumerate(order):
        out[:, var] = x[pos]
    return out


def gaussian_cvine_states(order, corr):
    """Edge states of the Gaussian C-vine matching correlation matrix `corr`.

    Tree-1 edges carry plain correlations, higher trees the recursive
    partial correlations; exact, so the vine density equals the Gaussian
    copula density of `corr`.
    """
    corr = np.asarray(corr, dtype=float)
    d = corr.shape[0]
    structure = CVineStructure(tuple(order))
    # partial[i][j] after conditioning on the first m roots
    current = corr.copy()
    states = {}
    for m in range(1, d):
        root = structure.order[m - 1]
        for leaf in structure.order[m:]:
            states[(m, leaf)] = pc.EdgeState("gaussian", (float(current[root, leaf]),))
        nxt = current.copy()
        for a in structure.order[m:]:
            for b in structure.order[m:]:
                if a == b:
                    continue
                num = current[a, b] - current[a, root] * current[b, root]
                den = np.sqrt((1 - current[a, root] ** 2) * (1 - current[b, root] ** 2))
                nxt[a, b] = num / den
        current = nxt
    return structure, states
