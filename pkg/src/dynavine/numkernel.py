"""Low-level numerical kernels shared by every other module.

Distribution functions are clamped wrappers over scipy.special (erfc-based
normal CDF, incomplete-beta Student-t CDF) so accuracy sits at the 1e-14
level while outputs stay inside open intervals that downstream log and
quantile calls can digest.

Random numbers come from numpy's PCG64, a 64-bit permuted-congruential
generator: equal seeds give identical streams on every platform, and child
streams are derived from fixed integer offsets (never from shared state).
"""

import math

import numpy as np
from scipy import special

from .errors import NumericalError

# Open-interval guards: probabilities never reach 0 or 1, correlations
# never reach +-1, copula arguments stay inside (0, 1) by at least U_EPS.
P_FLOOR = 1e-300
ONE_MINUS = float(np.nextafter(1.0, 0.0))
U_EPS = 1e-10
R_MAX = 1.0 - 1e-15
EIG_FLOOR = 1e-10


def normal_cdf(x):
    """Standard normal CDF, clamped into the open interval (0, 1)."""
    return np.clip(special.ndtr(np.asarray(x, dtype=float)), P_FLOOR, ONE_MINUS)


def normal_quantile(p):
    """Inverse standard normal CDF; p must lie strictly inside (0, 1)."""
    p = np.asarray(p, dtype=float)
    if np.any(p <= 0.0) or np.any(p >= 1.0):
        raise ValueError("normal_quantile needs p strictly inside (0, 1)")
    return special.ndtri(p)


def student_t_cdf(x, nu):
    """Student-t CDF with nu degrees of freedom, clamped into (0, 1)."""
    nu = np.asarray(nu, dtype=float)
    if np.any(nu <= 0.0):
        raise ValueError("student_t_cdf needs nu > 0")
    return np.clip(special.stdtr(nu, np.asarray(x, dtype=float)), P_FLOOR, ONE_MINUS)


def student_t_quantile(p, nu):
    """Inverse Student-t CDF; p must lie strictly inside (0, 1)."""
    p = np.asarray(p, dtype=float)
    nu = np.asarray(nu, dtype=float)
    if np.any(p <= 0.0) or np.any(p >= 1.0):
        raise ValueError("student_t_quantile needs p strictly inside (0, 1)")
    if np.any(nu <= 0.0):
        raise ValueError("student_t_quantile needs nu > 0")
    return special.stdtrit(nu, p)


def fisher_z(r):
    """Fisher z-transform atanh(r); requires |r| < 1."""
    r = np.asarray(r, dtype=float)
    if np.any(np.abs(r) >= 1.0):
        raise ValueError("fisher_z needs |r| < 1")
    return np.arctanh(r)


def fisher_z_inv(z):
    """Inverse Fisher z-transform tanh(z)."""
    return np.tanh(np.asarray(z, dtype=float))


# Debye function D1.  Small arguments use the Bernoulli-number series,
# large arguments the exponential tail sum; both are exact to ~1e-14 and
# vectorize, which matters because the smoothness penalty evaluates the
# Frank Kendall map in a hot loop.
_DEBYE_K = np.arange(1, 17)
_DEBYE_COEF = np.array(
    [float(special.bernoulli(2 * int(k))[-1]) / ((2 * int(k) + 1) * math.factorial(2 * int(k)))
     for k in _DEBYE_K]
)
_DEBYE_J = np.arange(1, 19)


def debye1(x):
    """First Debye function D1(x) = (1/x) * integral_0^x t / (e^t - 1) dt.

    Requires x > 0; accurate to about 1e-12 absolute on the clamped
    domain x <= 700.
    """
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 0
    x = np.atleast_1d(x)
    if np.any(x <= 0.0):
        raise ValueError("debye1 needs x > 0")
    ax = np.clip(x, 0.0, 700.0)
    out = np.ones_like(ax)

    small = ax < 2.0
    if np.any(small):
        xs = ax[small]
        powers = xs[:, None] ** (2 * _DEBYE_K[None, :])
        out[small] = 1.0 - xs / 4.0 + powers @ _DEBYE_COEF

    large = ax >= 2.0
    if np.any(large):
        xl = ax[large]
        ex = np.exp(-np.outer(xl, _DEBYE_J))
        tail = (ex * (xl[:, None] / _DEBYE_J + 1.0 / _DEBYE_J**2)).sum(axis=1)
        out[large] = (np.pi**2 / 6.0 - tail) / xl

    return float(out[0]) if scalar else out


def nearest_pd_correlation(m, eig_floor=EIG_FLOOR, max_iter=100):
    """Project a symmetric matrix onto the unit-diagonal correlation matrices
    with all eigenvalues >= eig_floor.

    Eigenvalues are clipped from below, the matrix rebuilt, and the diagonal
    renormalized; the two steps repeat until the spectrum clears the floor.
    Matrices that already qualify pass through unchanged, which makes the
    projection idempotent.
    """
    a = np.array(m, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("correlation projection needs a square matrix")
    if not np.allclose(a, a.T, atol=1e-8):
        raise ValueError("correlation projection needs a symmetric matrix")
    a = 0.5 * (a + a.T)
    d = np.diag(a)
    if np.any(d <= 0.0):
        raise ValueError("correlation projection needs positive diagonal entries")
    if not np.allclose(d, 1.0):
        s = 1.0 / np.sqrt(d)
        a = a * np.outer(s, s)
    np.fill_diagonal(a, 1.0)
    for _ in range(max_iter):
        w, v = np.linalg.eigh(a)
        if w[0] >= eig_floor:
            return a
        # Clip with headroom so the diagonal renormalization cannot push
        # the smallest eigenvalue straight back under the floor.
        w = np.maximum(w, 1.1 * eig_floor)
        a = (v * w) @ v.T
        a = 0.5 * (a + a.T)
        s = 1.0 / np.sqrt(np.diag(a))
        a = a * np.outer(s, s)
        np.fill_diagonal(a, 1.0)
    raise NumericalError("correlation projection did not converge")


def is_valid_correlation(a, eig_floor=EIG_FLOOR):
    """True when `a` is symmetric with unit diagonal and spectrum >= eig_floor."""
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        return False
    if not np.allclose(a, a.T, atol=1e-10):
        return False
    if not np.allclose(np.diag(a), 1.0, atol=1e-12):
        return False
    return bool(np.linalg.eigvalsh(a)[0] >= eig_floor)


def child_seed(seed, index):
    """Derived seed for slice `index`; single-level derivation only."""
    return int(seed) + 1000 * int(index)


class SeededRng:
    """Deterministic random stream with integer-offset child derivation."""

    def __init__(self, seed):
        self.seed = int(seed)
        if self.seed < 0:
            raise ValueError("seed must be non-negative")
        self._gen = np.random.Generator(np.random.PCG64(self.seed))

    def uniform(self, size=None):
        return self._gen.random(size)

    def normal(self, size=None):
        return self._gen.standard_normal(size)

    def chisquare(self, df, size=None):
        return self._gen.chisquare(df, size)

    def permutation(self, n):
        return self._gen.permutation(n)

    def child(self, index):
        """Independent stream for slice `index` (seed + 1000 * index)."""
        return SeededRng(child_seed(self.seed, index))
