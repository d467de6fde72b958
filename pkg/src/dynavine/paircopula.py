"""Bivariate copula families: densities, conditionals, Kendall maps, fits.

Seven families are supported: independence, gaussian, student_t, clayton,
frank, gumbel and joe.  Parameters are stored on the natural scale in an
EdgeState; one-dimensional likelihood fits run on an unconstrained latent
scale (tanh for correlations, softplus shifts for Archimedean parameters)
so a bounded Brent search never leaves the family domain.

Every density, h-function and inverse is vectorized over numpy arrays and
broadcasts its parameters, which lets trajectory estimators evaluate one
window per row in a single call.
"""

from dataclasses import dataclass

import numpy as np
from scipy import optimize, special, stats

from .errors import DataError, NumericalError
from .numkernel import (
    ONE_MINUS,
    P_FLOOR,
    R_MAX,
    U_EPS,
    debye1,
    normal_cdf,
    normal_quantile,
    student_t_cdf,
    student_t_quantile,
)

FAMILIES = ("independence", "gaussian", "student_t", "clayton", "frank", "gumbel", "joe")
PARAM_COUNT = {
    "independence": 0,
    "gaussian": 1,
    "student_t": 2,
    "clayton": 1,
    "frank": 1,
    "gumbel": 1,
    "joe": 1,
}

# Bounded search intervals on the latent scale, wide enough for any
# dependence strength the toolkit generates (|rho| <= 1 - 3e-7,
# theta <= ~25 for the softplus families, |theta| < 35 for frank).
LATENT_BOUNDS = {
    "gaussian": (-7.25, 7.25),
    "student_t": (-7.25, 7.25),
    "clayton": (-12.0, 25.0),
    "frank": (-34.99, 34.99),
    "gumbel": (-12.0, 25.0),
    "joe": (-12.0, 25.0),
}

NU_MIN, NU_MAX = 2.1, 60.0
DEFAULT_NU_GRID = (4.0, 8.0, 16.0)
FRANK_THETA_MAX = 35.0


@dataclass(frozen=True)
class EdgeState:
    """One pair-copula: family tag plus natural-scale parameters."""

    family: str
    params: tuple

    def as_dict(self):
        return {"family": self.family, "params": [float(p) for p in self.params]}


INDEPENDENCE = EdgeState("independence", ())


@dataclass
class WindowFit:
    """Result of a single-window likelihood fit."""

    state: EdgeState
    nll: float
    k: int
    aic: float
    failures: tuple = ()


def _clip_u(u):
    return np.clip(np.asarray(u, dtype=float), U_EPS, 1.0 - U_EPS)


def softplus(x):
    return np.logaddexp(0.0, x)


def softplus_inv(y):
    y = np.asarray(y, dtype=float)
    return y + np.log1p(-np.exp(-y))


def _sigmoid(x):
    return special.expit(x)


def _check_params(family, p1, p2=None):
    p1 = np.asarray(p1, dtype=float)
    if family in ("gaussian", "student_t"):
        if np.any(np.abs(p1) >= 1.0):
            raise ValueError("correlation parameter must satisfy |rho| < 1")
        if family == "student_t":
            nu = np.asarray(p2, dtype=float)
            if np.any(nu <= 0.0):
                raise ValueError("student_t needs nu > 0")
    elif family == "clayton":
        if np.any(p1 <= 0.0):
            raise ValueError("clayton needs theta > 0")
    elif family == "frank":
        if np.any(p1 == 0.0) or np.any(np.abs(p1) >= FRANK_THETA_MAX):
            raise ValueError("frank needs theta != 0 with |theta| < 35")
    elif family in ("gumbel", "joe"):
        if np.any(p1 < 1.0):
            raise ValueError(f"{family} needs theta >= 1")
    elif family != "independence":
        raise ValueError(f"unknown copula family: {family}")


def _unpack(state):
    f = state.family
    if f == "independence":
        return f, None, None
    if f == "student_t":
        return f, state.params[0], state.params[1]
    return f, state.params[0], None


# ---------------------------------------------------------------------------
# log densities


def log_density_params(family, p1, p2, u, v):
    """Vectorized log copula density; parameters broadcast against u, v."""
    u = _clip_u(u)
    v = _clip_u(v)
    if family == "independence":
        return np.zeros(np.broadcast(u, v).shape)
    _check_params(family, p1, p2)
    p1 = np.asarray(p1, dtype=float)

    if family == "gaussian":
        x = normal_quantile(u)
        y = normal_quantile(v)
        r2 = p1 * p1
        omr = 1.0 - r2
        return -0.5 * np.log(omr) - (r2 * (x * x + y * y) - 2.0 * p1 * x * y) / (2.0 * omr)

    if family == "student_t":
        nu = np.asarray(p2, dtype=float)
        x = student_t_quantile(u, nu)
        y = student_t_quantile(v, nu)
        omr = 1.0 - p1 * p1
        w = (x * x - 2.0 * p1 * x * y + y * y) / (nu * omr)
        return (
            special.gammaln((nu + 2.0) / 2.0)
            + special.gammaln(nu / 2.0)
            - 2.0 * special.gammaln((nu + 1.0) / 2.0)
            - 0.5 * np.log(omr)
            - 0.5 * (nu + 2.0) * np.log1p(w)
            + 0.5 * (nu + 1.0) * (np.log1p(x * x / nu) + np.log1p(y * y / nu))
        )

    if family == "clayton":
        lu = np.log(u)
        lv = np.log(v)
        logs = np.log1p(np.expm1(-p1 * lu) + np.expm1(-p1 * lv))
        return np.log1p(p1) - (1.0 + p1) * (lu + lv) - (2.0 + 1.0 / p1) * logs

    if family == "frank":
        em = np.expm1(-p1)
        d = -(em + np.expm1(-p1 * u) * np.expm1(-p1 * v))
        return np.log(-p1 * em) - p1 * (u + v) - 2.0 * np.log(np.abs(d))

    if family == "gumbel":
        xt = -np.log(u)
        yt = -np.log(v)
        lxt = np.log(xt)
        lyt = np.log(yt)
        la = np.logaddexp(p1 * lxt, p1 * lyt) / p1
        a = np.exp(la)
        return (
            -a + xt + yt + (1.0 - 2.0 * p1) * la
            + (p1 - 1.0) * (lxt + lyt) + np.log(a + p1 - 1.0)
        )

    # joe
    lxb = np.log1p(-u)
    lyb = np.log1p(-v)
    x = np.exp(p1 * lxb)
    y = np.exp(p1 * lyb)
    s = x + y - x * y
    return (p1 - 1.0) * (lxb + lyb) + (1.0 / p1 - 2.0) * np.log(s) + np.log(p1 - 1.0 + s)


def log_density(state, u, v):
    """Log copula density of `state` at (u, v); inputs clamped into (0, 1)."""
    family, p1, p2 = _unpack(state)
    return log_density_params(family, p1, p2, u, v)


# ---------------------------------------------------------------------------
# h-functions (conditional CDF of the second argument given the first)


def h_function_params(family, p1, p2, v, u):
    """Vectorized h(v | u) = dC(u, v)/du, clamped into (0, 1)."""
    u = _clip_u(u)
    v = _clip_u(v)
    if family == "independence":
        return np.broadcast_to(v, np.broadcast(u, v).shape).copy()
    _check_params(family, p1, p2)
    p1 = np.asarray(p1, dtype=float)

    if family == "gaussian":
        x = normal_quantile(u)
        y = normal_quantile(v)
        out = normal_cdf((y - p1 * x) / np.sqrt(1.0 - p1 * p1))
    elif family == "student_t":
        nu = np.asarray(p2, dtype=float)
        x = student_t_quantile(u, nu)
        y = student_t_quantile(v, nu)
        scale = np.sqrt((nu + x * x) * (1.0 - p1 * p1) / (nu + 1.0))
        out = student_t_cdf((y - p1 * x) / scale, nu + 1.0)
    elif family == "clayton":
        lu = np.log(u)
        lv = np.log(v)
        logs = np.log1p(np.expm1(-p1 * lu) + np.expm1(-p1 * lv))
        out = np.exp(-(1.0 + p1) * lu - (1.0 + 1.0 / p1) * logs)
    elif family == "frank":
        num = np.expm1(-p1 * v) * np.exp(-p1 * u)
        den = np.expm1(-p1) + np.expm1(-p1 * u) * np.expm1(-p1 * v)
        out = num / den
    elif family == "gumbel":
        xt = -np.log(u)
        yt = -np.log(v)
        lxt = np.log(xt)
        lyt = np.log(yt)
        la = np.logaddexp(p1 * lxt, p1 * lyt) / p1
        out = np.exp(xt - np.exp(la) + (1.0 - p1) * (la - lxt))
    else:  # joe
        lxb = np.log1p(-u)
        lyb = np.log1p(-v)
        x = np.exp(p1 * lxb)
        y = np.exp(p1 * lyb)
        s = x + y - x * y
        out = np.exp((p1 - 1.0) * lxb + np.log1p(-y) + (1.0 / p1 - 1.0) * np.log(s))
    return np.clip(out, P_FLOOR, ONE_MINUS)


def h_function(state, v, u):
    """Conditional CDF h(v | u) of `state`."""
    family, p1, p2 = _unpack(state)
    return h_function_params(family, p1, p2, v, u)


def h_inverse_params(family, p1, p2, p, u):
    """Vectorized inverse of h in its first argument: v with h(v | u) = p."""
    u = _clip_u(u)
    p = _clip_u(p)
    if family == "independence":
        return np.broadcast_to(p, np.broadcast(u, p).shape).copy()
    _check_params(family, p1, p2)
    p1 = np.asarray(p1, dtype=float)

    if family == "gaussian":
        out = normal_cdf(normal_quantile(p) * np.sqrt(1.0 - p1 * p1) + p1 * normal_quantile(u))
    elif family == "student_t":
        nu = np.asarray(p2, dtype=float)
        x = student_t_quantile(u, nu)
        scale = np.sqrt((nu + x * x) * (1.0 - p1 * p1) / (nu + 1.0))
        out = student_t_cdf(student_t_quantile(p, nu + 1.0) * scale + p1 * x, nu)
    elif family == "clayton":
        t = np.exp(-p1 * np.log(u)) * np.expm1(-p1 / (1.0 + p1) * np.log(p))
        out = np.exp(-np.log1p(t) / p1)
    elif family == "frank":
        em = np.expm1(-p1)
        out = -np.log1p(p * em / (np.exp(-p1 * u) * (1.0 - p) + p)) / p1
    else:  # gumbel and joe have no closed form: monotone bisection in v
        shape = np.broadcast(p1, p, u).shape
        p1b = np.broadcast_to(p1, shape)
        pb = np.broadcast_to(p, shape)
        ub = np.broadcast_to(u, shape)
        lo = np.full(shape, U_EPS)
        hi = np.full(shape, 1.0 - U_EPS)
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            below = h_function_params(family, p1b, None, mid, ub) < pb
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
        out = 0.5 * (lo + hi)
    return np.clip(out, U_EPS, 1.0 - U_EPS)


def h_inverse(state, p, u):
    """Inverse conditional CDF: the v that satisfies h(v | u) = p."""
    family, p1, p2 = _unpack(state)
    return h_inverse_params(family, p1, p2, p, u)


# ---------------------------------------------------------------------------
# Kendall's tau maps


def _joe_tau(theta):
    # Series tau(theta) = 1 - 4 * sum_k 1 / (k (theta k + 2)(theta (k-1) + 2))
    # with the analytic 1/(2 theta^2 K^2) tail; exact to ~1e-10 for theta >= 1.
    theta = np.asarray(theta, dtype=float)
    k = np.arange(1.0, 2001.0)
    kk = k[:, None] if theta.ndim else k
    terms = 1.0 / (kk * (theta * kk + 2.0) * (theta * (kk - 1.0) + 2.0))
    tail = 1.0 / (2.0 * theta * theta * 2000.5**2)
    return 1.0 - 4.0 * (terms.sum(axis=0) + tail)


def theta_to_tau(family, theta):
    """Population Kendall's tau for the family at natural parameter `theta`.

    For student_t pass rho (tau does not depend on nu).
    """
    theta = np.asarray(theta, dtype=float)
    if family == "independence":
        return np.zeros_like(theta) if theta.ndim else 0.0
    if family in ("gaussian", "student_t"):
        return 2.0 / np.pi * np.arcsin(theta)
    if family == "clayton":
        return theta / (theta + 2.0)
    if family == "gumbel":
        return 1.0 - 1.0 / theta
    if family == "frank":
        at = np.abs(theta)
        tau = 1.0 - 4.0 / at * (1.0 - debye1(at))
        return np.sign(theta) * tau
    if family == "joe":
        return _joe_tau(theta)
    raise ValueError(f"unknown copula family: {family}")


def tau_to_theta(family, tau):
    """First natural parameter whose population Kendall's tau equals `tau`.

    Clayton, gumbel and joe need tau > 0; gaussian, student_t and frank
    accept |tau| < 1 (elliptical families return rho, which does not
    depend on the degrees of freedom).
    """
    tau = float(tau)
    if family in ("gaussian", "student_t"):
        if abs(tau) >= 1.0:
            raise ValueError("need |tau| < 1")
        return float(np.sin(np.pi * tau / 2.0))
    if family == "clayton":
        if not 0.0 < tau < 1.0:
            raise ValueError("clayton needs tau in (0, 1)")
        return 2.0 * tau / (1.0 - tau)
    if family == "gumbel":
        if not 0.0 <= tau < 1.0:
            raise ValueError("gumbel needs tau in [0, 1)")
        return 1.0 / (1.0 - tau)
    if family == "frank":
        if not 0.0 < abs(tau) < 1.0:
            raise ValueError("frank needs tau != 0 with |tau| < 1")
        hi = FRANK_THETA_MAX - 1e-9
        target = abs(tau)
        if theta_to_tau("frank", hi) < target:
            raise ValueError("tau outside the representable frank range")
        theta = optimize.brentq(
            lambda t: theta_to_tau("frank", t) - target, 1e-10, hi, xtol=1e-13
        )
        return float(np.sign(tau)) * theta
    if family == "joe":
        if not 0.0 < tau < 1.0:
            raise ValueError("joe needs tau in (0, 1)")
        hi = 500.0
        if _joe_tau(hi) < tau:
            raise ValueError("tau outside the representable joe range")
        return optimize.brentq(lambda t: _joe_tau(t) - tau, 1.0, hi, xtol=1e-13)
    raise ValueError(f"unknown copula family: {family}")


def state_from_tau(family, tau, nu=8.0):
    """EdgeState at the parameter matching `tau`; student_t takes nu as
    given (default 8, the middle of the fitting grid)."""
    if family == "independence":
        return INDEPENDENCE
    theta = tau_to_theta(family, tau)
    if family == "student_t":
        return EdgeState("student_t", (theta, float(nu)))
    return EdgeState(family, (theta,))


def empirical_tau(x, y):
    """Sample Kendall's tau (scipy implementation)."""
    return float(stats.kendalltau(x, y).statistic)


# ---------------------------------------------------------------------------
# latent-scale links


def eta_to_params(family, eta):
    """Map latent coordinates to natural parameters; eta has one row per
    parameter and broadcasts along trailing axes."""
    eta = np.asarray(eta, dtype=float)
    if family == "independence":
        return ()
    if family == "gaussian":
        return (np.tanh(eta[0]),)
    if family == "student_t":
        return (np.tanh(eta[0]), NU_MIN + (NU_MAX - NU_MIN) * _sigmoid(eta[1]))
    if family == "clayton":
        return (softplus(eta[0]) + 1e-4,)
    if family == "frank":
        th = np.clip(eta[0], -FRANK_THETA_MAX + 0.01, FRANK_THETA_MAX - 0.01)
        th = np.where(np.abs(th) < 1e-8, 1e-8, th)
        return (th,)
    if family in ("gumbel", "joe"):
        return (1.0 + softplus(eta[0]),)
    raise ValueError(f"unknown copula family: {family}")


def params_to_eta(family, params):
    """Inverse of eta_to_params on the interior of each family domain."""
    if family == "independence":
        return np.zeros(0)
    if family == "gaussian":
        return np.array([np.arctanh(np.clip(params[0], -1 + 3e-7, 1 - 3e-7))])
    if family == "student_t":
        frac = np.clip((params[1] - NU_MIN) / (NU_MAX - NU_MIN), 1e-9, 1 - 1e-9)
        return np.array(
            [np.arctanh(np.clip(params[0], -1 + 3e-7, 1 - 3e-7)), special.logit(frac)]
        )
    if family == "clayton":
        return np.array([float(softplus_inv(max(params[0] - 1e-4, 1e-9)))])
    if family == "frank":
        return np.array([params[0]])
    if family in ("gumbel", "joe"):
        return np.array([float(softplus_inv(max(params[0] - 1.0, 1e-9)))])
    raise ValueError(f"unknown copula family: {family}")


def state_from_eta(family, eta):
    params = eta_to_params(family, np.asarray(eta, dtype=float).reshape(-1, 1))
    return EdgeState(family, tuple(float(p[0]) for p in params))


# ---------------------------------------------------------------------------
# single-window fitting


def _nll_closure(family, u, v, nu=None):
    """Return nll(eta) with per-family precomputed transforms."""
    u = _clip_u(u)
    v = _clip_u(v)
    if family == "gaussian":
        x = normal_quantile(u)
        y = normal_quantile(v)
        xx_yy = x * x + y * y
        xy = x * y

        def nll(eta):
            rho = np.tanh(eta)
            omr = 1.0 - rho * rho
            ll = -0.5 * np.log(omr) * u.size - (rho * rho * xx_yy.sum() - 2.0 * rho * xy.sum()) / (2.0 * omr)
            return -ll

        return nll
    if family == "student_t":
        x = student_t_quantile(u, nu)
        y = student_t_quantile(v, nu)
        const = (
            special.gammaln((nu + 2.0) / 2.0)
            + special.gammaln(nu / 2.0)
            - 2.0 * special.gammaln((nu + 1.0) / 2.0)
        ) * u.size + 0.5 * (nu + 1.0) * (np.log1p(x * x / nu) + np.log1p(y * y / nu)).sum()
        quad = x * x + y * y
        xy = x * y

        def nll(eta):
            rho = np.tanh(eta)
            omr = 1.0 - rho * rho
            w = (quad - 2.0 * rho * xy) / (nu * omr)
            ll = const - 0.5 * np.log(omr) * u.size - 0.5 * (nu + 2.0) * np.log1p(w).sum()
            return -ll

        return nll

    def nll(eta):
        params = eta_to_params(family, np.array([eta]))
        val = log_density_params(family, params[0], None, u, v).sum()
        return -val if np.isfinite(val) else 1e12 + eta * eta

    return nll


def fit_window(u, v, family, nu_grid=DEFAULT_NU_GRID):
    """Maximum-likelihood fit of one family to one window of pseudo-obs.

    Runs a bounded Brent search on the latent scale (tolerance 1e-6, at
    most 200 iterations); student_t optimizes rho for each nu on the grid
    and keeps the best, counting k = 2 parameters.
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.size != v.size:
        raise DataError("pseudo-observation vectors differ in length")
    if u.size < 8:
        raise DataError("need at least 8 pairs to fit a pair copula")
    if np.ptp(u) <= 0.0 or np.ptp(v) <= 0.0:
        raise DataError("degenerate pseudo-observations (constant column)")
    if family == "independence":
        return WindowFit(INDEPENDENCE, 0.0, 0, 0.0)
    if family not in PARAM_COUNT:
        raise ValueError(f"unknown copula family: {family}")

    lo, hi = LATENT_BOUNDS[family]

    def solve(nll):
        res = optimize.minimize_scalar(
            nll, bounds=(lo, hi), method="bounded",
            options={"xatol": 1e-6, "maxiter": 200},
        )
        return float(res.x), float(nll(float(res.x)))

    if family == "student_t":
        best = None
        for nu in nu_grid:
            eta, val = solve(_nll_closure(family, u, v, nu=float(nu)))
            if best is None or val < best[1]:
                best = (eta, val, float(nu))
        eta, val, nu = best
        if not np.isfinite(val):
            raise NumericalError("student_t window fit failed")
        rho = float(np.tanh(eta))
        state = EdgeState("student_t", (rho, nu))
        k = 2
    else:
        eta, val = solve(_nll_closure(family, u, v))
        if not np.isfinite(val) or val >= 1e11:
            raise NumericalError(f"{family} window fit failed")
        state = state_from_eta(family, np.array([eta]))
        k = 1
    return WindowFit(state, val, k, 2.0 * val + 2.0 * k)


def select_family_aic(u, v, candidates=FAMILIES, nu_grid=DEFAULT_NU_GRID):
    """Fit every candidate family and keep the lowest AIC.

    Ties resolve in candidate order; if every parametric candidate fails
    numerically the independence fit is returned with the failures listed.
    """
    best = None
    failures = []
    for family in candidates:
        try:
            fit = fit_window(u, v, family, nu_grid=nu_grid)
        except NumericalError:
            failures.append(family)
            continue
        if best is None or fit.aic < best.aic:
            best = fit
    if best is None:
        best = WindowFit(INDEPENDENCE, 0.0, 0, 0.0)
    best.failures = tuple(failures)
    return best


def sample(state, n, rng):
    """Draw n pairs from `state` by the conditional method.

    The first coordinate is uniform; the second applies the inverse
    h-function to an independent uniform, so both margins are exactly
    uniform and the joint law is the copula itself.
    """
    u = rng.uniform(n)
    w = rng.uniform(n)
    v = h_inverse(state, w, u)
    return np.column_stack([u, v])


_PARAM_CLIP = {
    "gaussian": ((-R_MAX, R_MAX),),
    "student_t": ((-R_MAX, R_MAX), (NU_MIN, NU_MAX)),
    "clayton": ((1e-8, np.inf),),
    "frank": ((-FRANK_THETA_MAX, FRANK_THETA_MAX),),
    "gumbel": ((1.0, np.inf),),
    "joe": ((1.0, np.inf),),
}


def _sanitized_params(state):
    bounds = _PARAM_CLIP.get(state.family, ())
    return [float(np.clip(p, lo, hi)) for p, (lo, hi) in zip(state.params, bounds)]


def state_distance(a, b):
    """Mean absolute difference between domain-clipped parameters of two
    states of one family."""
    if a.family != b.family:
        raise ValueError("state_distance needs states from the same family")
    if not a.params:
        return 0.0
    diffs = [abs(x - y) for x, y in zip(_sanitized_params(a), _sanitized_params(b))]
    return float(sum(diffs) / len(diffs))
