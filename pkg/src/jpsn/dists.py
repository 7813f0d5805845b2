"""Probability kernels used across the package.

Multivariate normal sampling/evaluation, lower-truncated normal draws,
normal-inverse-Wishart draws, the scalar normal CDF, a Monte Carlo
multivariate normal CDF, and the closed-form densities: univariate
projected normal, multivariate skew normal (diagonal skew matrix), and the
log-transformed Abe-Ley cylindrical density.

Density evaluations are pure and thread-safe.  Samplers take an explicit
``numpy.random.Generator``; do not share one handle across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import erfc, erfcx, log_ndtr, ndtr, ndtri

from .core import TWO_PI, wrap_angle
from .errors import DomainError, NumericalError

__all__ = [
    "safe_cholesky",
    "MvnParams",
    "NiwParams",
    "AbeLeyParams",
    "std_normal_cdf",
    "mvn_log_density",
    "sample_mvn",
    "sample_trunc_normal_lower",
    "sample_niw",
    "pn1_log_density",
    "ssn_log_density",
    "mvn_cdf_mc",
    "abeley_log_density",
]

_LOG_2PI = np.log(TWO_PI)
_SQRT_2PI = np.sqrt(TWO_PI)


def safe_cholesky(a, max_jitter=1e-6):
    """Lower-triangular Cholesky factor with diagonal jitter escalation.

    Jitter starts at 1e-12 (relative to the mean diagonal) and grows by
    factors of 10 up to ``max_jitter``.  A zero matrix factors to zero.

    Raises
    ------
    NumericalError
        If the matrix is materially asymmetric or never factorizes.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise NumericalError("expected a square matrix")
    scale = max(np.abs(np.diag(a)).max(), 1.0) if a.size else 1.0
    if a.size and np.abs(a - a.T).max() > 1e-8 * scale:
        raise NumericalError("matrix is not symmetric")
    if not a.any():
        return np.zeros_like(a)
    a = 0.5 * (a + a.T)
    diag_scale = np.abs(np.diag(a)).mean()
    jitter = 0.0
    while True:
        try:
            return np.linalg.cholesky(a + jitter * np.eye(a.shape[0]))
        except np.linalg.LinAlgError:
            jitter = 1e-12 * diag_scale if jitter == 0.0 else jitter * 10.0
            if jitter > max_jitter * max(diag_scale, 1.0):
                raise NumericalError(
                    "Cholesky factorization failed after jitter escalation"
                ) from None


@dataclass
class MvnParams:
    """Mean and covariance of a multivariate normal, with a cached factor."""

    mean: np.ndarray
    cov: np.ndarray
    _factor: np.ndarray = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=float).reshape(-1)
        self.cov = np.asarray(self.cov, dtype=float)
        d = self.mean.shape[0]
        if self.cov.shape != (d, d):
            raise DomainError("cov shape does not match the mean dimension")

    @property
    def factor(self):
        """Lower-triangular factor, computed on first use."""
        if self._factor is None:
            self._factor = safe_cholesky(self.cov)
        return self._factor


@dataclass(frozen=True)
class NiwParams:
    """Normal-inverse-Wishart hyperparameters (mu0, kappa0, nu0, psi0)."""

    mu0: np.ndarray
    kappa0: float
    nu0: float
    psi0: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mu0", np.asarray(self.mu0, dtype=float).reshape(-1))
        object.__setattr__(self, "psi0", np.asarray(self.psi0, dtype=float))
        d = self.mu0.shape[0]
        if self.psi0.shape != (d, d):
            raise DomainError("psi0 shape does not match mu0")
        if np.abs(self.psi0 - self.psi0.T).max() > 1e-8 * max(1.0, np.abs(self.psi0).max()):
            raise DomainError("psi0 must be symmetric")
        if not self.kappa0 > 0:
            raise DomainError("kappa0 must be positive")
        if not self.nu0 > d - 1:
            raise DomainError("nu0 must exceed dim - 1")

    @property
    def dim(self):
        return self.mu0.shape[0]


@dataclass(frozen=True)
class AbeLeyParams:
    """Parameters of the log-transformed Abe-Ley cylindrical density.

    ``alpha`` (shape) and ``beta`` (rate) act on the linear part,
    ``mu`` is the circular location, ``kappa >= 0`` the concentration /
    circular-linear dependence, and ``lambda_skew`` in [-1, 1] the circular
    skewness.
    """

    alpha: float
    beta: float
    mu: float
    kappa: float
    lambda_skew: float

    def __post_init__(self):
        if not self.alpha > 0:
            raise DomainError("alpha must be positive")
        if not self.beta > 0:
            raise DomainError("beta must be positive")
        if not self.kappa >= 0:
            raise DomainError("kappa must be non-negative")
        if not -1.0 <= self.lambda_skew <= 1.0:
            raise DomainError("lambda_skew must lie in [-1, 1]")
        object.__setattr__(self, "mu", wrap_angle(float(self.mu)))


def std_normal_cdf(x):
    """Standard normal CDF via the complementary error function."""
    out = 0.5 * erfc(-np.asarray(x, dtype=float) / np.sqrt(2.0))
    return float(out) if np.ndim(x) == 0 else out


def mvn_log_density(x, mean, cov_factor):
    """Multivariate normal log density given a lower-triangular factor of cov.

    ``x`` may be a single vector or an (n, d) batch; returns a scalar or (n,).
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    xm = np.atleast_2d(x) - np.asarray(mean, dtype=float)
    d = xm.shape[1]
    if d == 0:
        out = np.zeros(xm.shape[0])
        return float(out[0]) if single else out
    z = solve_triangular(cov_factor, xm.T, lower=True)
    log_det = 2.0 * np.sum(np.log(np.diag(cov_factor)))
    out = -0.5 * (d * _LOG_2PI + log_det + np.sum(z * z, axis=0))
    return float(out[0]) if single else out


def sample_mvn(params, rng, size=None):
    """Draw from a multivariate normal as ``mean + L z``.

    Returns a (d,) vector for ``size=None`` or an (size, d) matrix.
    """
    L = params.factor
    d = params.mean.shape[0]
    if size is None:
        return params.mean + L @ rng.standard_normal(d)
    z = rng.standard_normal((size, d))
    return params.mean + z @ L.T


def sample_trunc_normal_lower(mean, var, lower, rng, size=None):
    """Exact draws from ``N(mean, var)`` conditioned to ``(lower, inf)``.

    Uses the inverse-CDF method in the bulk and an exponential-rejection
    step once the bound exceeds ``mean + 5*sd``, which terminates for
    arbitrarily extreme bounds.  ``lower = -inf`` gives plain normal draws.
    Inputs broadcast; returns a scalar when all inputs are scalars and
    ``size`` is None.
    """
    mean = np.asarray(mean, dtype=float)
    var = np.asarray(var, dtype=float)
    if np.any(var <= 0):
        raise DomainError("var must be positive")
    sd = np.sqrt(var)
    lower = np.asarray(lower, dtype=float)
    shape = np.broadcast_shapes(mean.shape, sd.shape, lower.shape, () if size is None else (size,))
    mean, sd, lower = (np.broadcast_to(v, shape).astype(float) for v in (mean, sd, lower))
    a = np.where(np.isneginf(lower), -np.inf, (lower - mean) / np.where(sd > 0, sd, 1.0))

    x = np.empty(shape)
    bulk = a <= 5.0
    if np.any(bulk):
        sf_a = np.where(np.isneginf(a[bulk]), 1.0, ndtr(-a[bulk]))
        u = rng.random(int(bulk.sum()))
        x[bulk] = -ndtri(np.maximum(u * sf_a, 1e-300))
    tail = ~bulk
    if np.any(tail):
        at = a[tail]
        alpha = 0.5 * (at + np.sqrt(at * at + 4.0))
        zt = np.empty(at.shape)
        todo = np.ones(at.shape, dtype=bool)
        while np.any(todo):
            n_todo = int(todo.sum())
            z = at[todo] + rng.exponential(1.0, n_todo) / alpha[todo]
            accept = rng.random(n_todo) <= np.exp(-0.5 * (z - alpha[todo]) ** 2)
            idx = np.flatnonzero(todo)[accept]
            zt[idx] = z[accept]
            todo[idx] = False
        x[tail] = zt
    out = mean + sd * x
    finite = np.isfinite(lower)
    if np.any(finite):
        # keep the bound strict even if rounding lands exactly on it
        out[finite] = np.maximum(out[finite], np.nextafter(lower[finite], np.inf))
    if size is None and out.shape == ():
        return float(out)
    return out


def _sample_wishart(nu, scale_factor, rng):
    """Wishart(nu, S) draw via the Bartlett construction, S = L L^T given."""
    d = scale_factor.shape[0]
    A = np.zeros((d, d))
    for i in range(d):
        A[i, i] = np.sqrt(rng.chisquare(nu - i))
    if d > 1:
        tri = np.tril_indices(d, -1)
        A[tri] = rng.standard_normal(len(tri[0]))
    LA = scale_factor @ A
    return LA @ LA.T


def sample_niw(params, rng):
    """Draw (mu, sigma) from a normal-inverse-Wishart distribution.

    ``sigma`` is inverse-Wishart(nu0, psi0), obtained by Bartlett-sampling a
    Wishart on the inverted scale and inverting; ``mu | sigma`` is normal
    with mean ``mu0`` and covariance ``sigma / kappa0``.
    """
    d = params.dim
    psi_factor = safe_cholesky(params.psi0)
    # scale of the Wishart on the precision side is psi0^{-1}
    inv_factor = solve_triangular(psi_factor, np.eye(d), lower=True)
    w = _sample_wishart(params.nu0, inv_factor.T, rng)
    w_factor = safe_cholesky(w)
    w_inv_factor = solve_triangular(w_factor, np.eye(d), lower=True)
    sigma = w_inv_factor.T @ w_inv_factor
    sigma = 0.5 * (sigma + sigma.T)
    mu = params.mu0 + safe_cholesky(sigma) @ rng.standard_normal(d) / np.sqrt(params.kappa0)
    return mu, sigma


def _log1p_gauss_tail(dd):
    """log(1 + sqrt(2*pi) * D * exp(D^2/2) * Phi(D)), stable for all D."""
    dd = np.atleast_1d(np.asarray(dd, dtype=float))
    out = np.empty(dd.shape)
    big = dd > 34.0
    small = ~big
    if np.any(small):
        t = _SQRT_2PI * 0.5 * dd[small] * erfcx(-dd[small] / np.sqrt(2.0))
        out[small] = np.log1p(t)
    if np.any(big):
        db = dd[big]
        out[big] = 0.5 * _LOG_2PI + np.log(db) + 0.5 * db * db + log_ndtr(db)
    return out


def pn1_log_density(theta, mu, sigma):
    """Log density of the univariate projected normal at angle(s) ``theta``.

    ``mu`` is the 2-vector mean and ``sigma`` the 2x2 covariance of the
    underlying plane normal.  Accepts a scalar or array of angles.
    """
    mu = np.asarray(mu, dtype=float).reshape(2)
    sigma = np.asarray(sigma, dtype=float).reshape(2, 2)
    det = sigma[0, 0] * sigma[1, 1] - sigma[0, 1] * sigma[1, 0]
    if not np.isfinite(det) or det <= 0:
        raise NumericalError("sigma must be positive definite")
    omega = np.array([[sigma[1, 1], -sigma[0, 1]], [-sigma[1, 0], sigma[0, 0]]]) / det

    t = np.atleast_1d(np.asarray(theta, dtype=float))
    u = np.stack([np.cos(t), np.sin(t)], axis=-1)
    ou = u @ omega
    cc = np.einsum("...i,...i->...", ou, u)
    b = ou @ mu
    m = float(mu @ omega @ mu)
    dd = b / np.sqrt(cc)
    out = -0.5 * m - _LOG_2PI - 0.5 * np.log(det) - np.log(cc) + _log1p_gauss_tail(dd)
    return float(out[0]) if np.ndim(theta) == 0 else out


def mvn_cdf_mc(upper, corr, n=4096, rng=None):
    """Monte Carlo estimate of ``P(Z <= upper)`` for ``Z ~ N(0, corr)``.

    ``n`` counts antithetic pairs (2n underlying draws), which caps the
    reported standard error at ``1 / (2*sqrt(n))``.  When ``rng`` is None a
    fixed-seed generator is used, so repeated evaluations agree.

    Returns
    -------
    (estimate, std_error)
    """
    upper = np.asarray(upper, dtype=float).reshape(-1)
    corr = np.asarray(corr, dtype=float)
    d = upper.shape[0]
    if corr.shape != (d, d):
        raise NumericalError("corr shape does not match upper")
    if np.any(np.abs(np.diag(corr) - 1.0) > 1e-8):
        raise NumericalError("corr must have unit diagonal")
    L = safe_cholesky(corr)
    if rng is None:
        rng = np.random.default_rng(0)
    z = rng.standard_normal((n, d)) @ L.T
    hit_pos = np.all(z <= upper, axis=1).astype(float)
    hit_neg = np.all(-z <= upper, axis=1).astype(float)
    g = 0.5 * (hit_pos + hit_neg)
    est = float(g.mean())
    se = float(g.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.5
    return est, se


def ssn_log_density(y, mu, sigma, lam, mc_n=4096, rng=None, return_stderr=False):
    """Log density of the diagonal-skew multivariate skew normal.

    The density is ``2^q * phi_q(y | mu, Upsilon) * Phi_q(...)`` with
    ``Upsilon = sigma + diag(lam)^2``.  The orthant probability is exact for
    q = 1 (and for a diagonal ``Gamma``); otherwise it is estimated by
    antithetic Monte Carlo with ``mc_n`` pairs.

    With ``return_stderr=True`` the result is ``(logpdf, stderr)`` where
    ``stderr`` is the (approximate) standard error of the log value, zero on
    exact paths.
    """
    y = np.asarray(y, dtype=float).reshape(-1)
    mu = np.asarray(mu, dtype=float).reshape(-1)
    lam = np.asarray(lam, dtype=float).reshape(-1)
    q = mu.shape[0]
    sigma = np.asarray(sigma, dtype=float).reshape(q, q)
    if y.shape[0] != q or lam.shape[0] != q:
        raise DomainError("dimension mismatch between y, mu, sigma and lambda")

    upsilon = sigma + np.diag(lam**2)
    up_factor = safe_cholesky(upsilon)
    up_inv = solve_triangular(
        up_factor, solve_triangular(up_factor, np.eye(q), lower=True), lower=True, trans="T"
    )
    gamma = np.eye(q) - (lam[:, None] * up_inv) * lam[None, :]
    x = lam * (up_inv @ (y - mu))

    base = q * np.log(2.0) + mvn_log_density(y, mu, up_factor)
    if q == 1:
        return_val = base + float(log_ndtr(x[0] / np.sqrt(gamma[0, 0])))
        return (return_val, 0.0) if return_stderr else return_val
    sd = np.sqrt(np.diag(gamma))
    corr = gamma / np.outer(sd, sd)
    if np.abs(corr - np.eye(q)).max() < 1e-12:
        return_val = base + float(np.sum(log_ndtr(x / sd)))
        return (return_val, 0.0) if return_stderr else return_val
    est, se = mvn_cdf_mc(x / sd, corr, n=mc_n, rng=rng)
    if est <= 0.0:
        return_val, log_se = -np.inf, np.inf
    else:
        return_val, log_se = base + np.log(est), se / est
    return (return_val, log_se) if return_stderr else return_val


def _log_cosh(x):
    ax = abs(x)
    return ax + np.log1p(np.exp(-2.0 * ax)) - np.log(2.0)


def abeley_log_density(theta, y, params):
    """Log of the Abe-Ley cylindrical density with log-transformed linear part.

    The linear variable is the log of a conditional Weibull, so the Jacobian
    ``e^y`` is part of the density.  Vectorized over ``theta`` and ``y``.
    """
    th = np.asarray(theta, dtype=float)
    yy = np.asarray(y, dtype=float)
    a, b, k, lam = params.alpha, params.beta, params.kappa, params.lambda_skew
    dmu = th - params.mu
    with np.errstate(divide="ignore", over="ignore"):
        skew_term = np.log1p(lam * np.sin(dmu))
        rate = np.exp(a * (np.log(b) + yy))
        out = (
            np.log(a)
            + a * np.log(b)
            - _LOG_2PI
            - _log_cosh(k)
            + skew_term
            + yy * (a - 1.0)
            - rate * (1.0 - np.tanh(k) * np.cos(dmu))
            + yy
        )
    if np.ndim(theta) == 0 and np.ndim(y) == 0:
        return float(out)
    return out
