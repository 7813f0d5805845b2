"""The joint projected-normal / skew-normal model for poly-cylindrical data.

Parameters couple a 2p-dimensional plane-normal block (projected to p
angles) with a q-dimensional skew-normal block through one joint covariance
matrix.  This module provides exact simulation, the augmented joint log
density, Gaussian conditionals between the blocks, linear-block moments, the
identification transform that pins the second radial variance of each
circular block to one, the rotation/reflection parameter transform, and
sample dependence measures.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

from .core import PolyCylDataset, atan_star, polar_embed
from .dists import safe_cholesky
from .errors import DomainError

__all__ = [
    "JpsnParams",
    "LatentState",
    "CMatrix",
    "simulate_jpsn",
    "jpsn_aug_log_density",
    "conditional_circular_params",
    "conditional_linear_params",
    "ssn_moments",
    "identify",
    "identify_params",
    "transform_pn_params",
    "circ_circ_corr",
    "circ_lin_r2",
    "dependence_matrix",
    "DependenceMatrix",
]

HALF_NORMAL_MEAN = np.sqrt(2.0 / np.pi)


@dataclass
class JpsnParams:
    """Model parameters for p circular and q linear dimensions.

    ``mu`` stacks the plane-normal means (length 2p) before the linear means
    (length q); ``sigma`` is the matching (2p+q) x (2p+q) covariance and
    ``lam`` the q skewness coefficients.  ``constrained=True`` asserts the
    identified parameterization, where ``sigma[2i+1, 2i+1] = 1`` for every
    circular block i.
    """

    p: int
    q: int
    mu: np.ndarray
    sigma: np.ndarray
    lam: np.ndarray
    constrained: bool = False

    def __post_init__(self):
        dim = 2 * self.p + self.q
        self.mu = np.asarray(self.mu, dtype=float).reshape(-1)
        self.sigma = np.asarray(self.sigma, dtype=float)
        self.lam = np.asarray(self.lam, dtype=float).reshape(-1)
        if self.mu.shape[0] != dim or self.sigma.shape != (dim, dim):
            raise DomainError("mu / sigma dimensions inconsistent with (p, q)")
        if self.lam.shape[0] != self.q:
            raise DomainError("lambda must have length q")
        scale = max(1.0, np.abs(self.sigma).max()) if dim else 1.0
        if dim and np.abs(self.sigma - self.sigma.T).max() > 1e-8 * scale:
            raise DomainError("sigma must be symmetric")
        if self.constrained:
            second_diag = self.sigma[np.arange(self.p) * 2 + 1, np.arange(self.p) * 2 + 1]
            if self.p and np.abs(second_diag - 1.0).max() >= 1e-10:
                raise DomainError("constrained params need sigma[2i+1, 2i+1] = 1")

    @property
    def dim(self):
        return 2 * self.p + self.q

    @property
    def mu_w(self):
        return self.mu[: 2 * self.p]

    @property
    def mu_y(self):
        return self.mu[2 * self.p :]

    @property
    def sigma_w(self):
        return self.sigma[: 2 * self.p, : 2 * self.p]

    @property
    def sigma_wy(self):
        return self.sigma[: 2 * self.p, 2 * self.p :]

    @property
    def sigma_y(self):
        return self.sigma[2 * self.p :, 2 * self.p :]

    def shifted_mean(self, d):
        """Joint mean with the skew shift ``diag(lam) d`` on the linear block.

        ``d`` may be a (q,) vector or a (T, q) matrix.
        """
        d = np.asarray(d, dtype=float)
        if d.ndim == 1:
            return np.concatenate([self.mu_w, self.mu_y + self.lam * d])
        out = np.broadcast_to(self.mu, (d.shape[0], self.dim)).copy()
        out[:, 2 * self.p :] += self.lam * d
        return out


@dataclass
class LatentState:
    """Per-observation latent radii (T, p) and skew latents (T, q)."""

    r: np.ndarray
    d: np.ndarray

    def __post_init__(self):
        self.r = np.atleast_2d(np.asarray(self.r, dtype=float))
        self.d = np.atleast_2d(np.asarray(self.d, dtype=float))
        if self.r.size and np.any(self.r <= 0):
            raise DomainError("latent radii must be strictly positive")
        if self.d.size and np.any(self.d <= 0):
            raise DomainError("skew latents must be strictly positive")

    def embed(self, theta):
        """Plane coordinates w (T, 2p) implied by angles and radii."""
        theta = np.atleast_2d(np.asarray(theta, dtype=float))
        t_rows, p = self.r.shape
        w = np.empty((t_rows, 2 * p))
        if p:
            w[:, 0::2] = self.r * np.cos(theta)
            w[:, 1::2] = self.r * np.sin(theta)
        return w


@dataclass(frozen=True)
class CMatrix:
    """Per-circular-block radial scales c_i > 0 of the identification map."""

    c: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "c", np.asarray(self.c, dtype=float).reshape(-1))
        if np.any(self.c <= 0):
            raise DomainError("c entries must be positive")

    def diag_full(self, q):
        """Diagonal of the full (2p+q) scaling matrix (ones on the linear block)."""
        return np.concatenate([np.repeat(self.c, 2), np.ones(q)])


def simulate_jpsn(params, n_obs, rng):
    """Draw ``n_obs`` observations, returning the data and the true latents.

    Skew latents are independent half-normals; given them, the joint plane /
    linear vector is normal with a shifted mean, and the plane blocks are
    mapped to angles and radii.
    """
    p, q = params.p, params.q
    d = np.abs(rng.standard_normal((n_obs, q)))
    factor = safe_cholesky(params.sigma)
    z = rng.standard_normal((n_obs, params.dim))
    x = params.shifted_mean(d) + z @ factor.T
    w = x[:, : 2 * p]
    y = x[:, 2 * p :]
    if p:
        wx = w[:, 0::2]
        wy = w[:, 1::2]
        r = np.hypot(wx, wy)
        theta = atan_star(wy, wx)
    else:
        r = np.zeros((n_obs, 0))
        theta = np.zeros((n_obs, 0))
    data = PolyCylDataset(p, q, theta, y)
    return data, LatentState(r if p else np.ones((n_obs, 0)), d)


def jpsn_aug_log_density(theta, r, y, d, params):
    """Exact log density of the augmented joint (theta, r, y, d).

    Accepts single observations (1-d arrays) or batches of T rows; returns a
    float or a length-T array.  Latents must be strictly positive.
    """
    p, q = params.p, params.q
    single = (np.ndim(theta) <= 1) and (np.ndim(y) <= 1)
    if p:
        theta = np.atleast_2d(np.asarray(theta, dtype=float)).reshape(-1, p)
        r = np.atleast_2d(np.asarray(r, dtype=float)).reshape(-1, p)
        n_rows = theta.shape[0]
    else:
        y = np.atleast_2d(np.asarray(y, dtype=float)).reshape(-1, q)
        n_rows = y.shape[0]
        theta = np.zeros((n_rows, 0))
        r = np.ones((n_rows, 0))
    if q:
        y = np.atleast_2d(np.asarray(y, dtype=float)).reshape(-1, q)
        d = np.atleast_2d(np.asarray(d, dtype=float)).reshape(-1, q)
    else:
        y = np.zeros((n_rows, 0))
        d = np.ones((n_rows, 0))
    if (p and np.any(r <= 0)) or (q and np.any(d <= 0)):
        raise DomainError("latents must be strictly positive")

    latone = LatentState(r, d)
    x = np.concatenate([latone.embed(theta), y], axis=1)
    factor = safe_cholesky(params.sigma)
    mean = params.shifted_mean(d)
    out = _batch_mvn_log_density(x, mean, factor)
    out = out + q * np.log(2.0)
    if q:
        out = out - 0.5 * q * np.log(2.0 * np.pi) - 0.5 * np.sum(d * d, axis=1)
    if p:
        out = out + np.sum(np.log(r), axis=1)
    return float(out[0]) if single else out


def _batch_mvn_log_density(x, means, factor):
    """Normal log density rows of ``x`` against per-row ``means``."""
    resid = (x - means).T
    z = solve_triangular(factor, resid, lower=True)
    dim = x.shape[1]
    log_det = 2.0 * np.sum(np.log(np.diag(factor)))
    return -0.5 * (dim * np.log(2.0 * np.pi) + log_det + np.sum(z * z, axis=0))


def conditional_circular_params(params, y, d):
    """Plane-normal parameters of W given Y = y and skew latents d.

    Gaussian conditioning: the mean shifts by ``Sigma_wy Sigma_y^{-1}``
    applied to the de-skewed linear residual and the covariance is the Schur
    complement ``Sigma_w - Sigma_wy Sigma_y^{-1} Sigma_wy'``.
    """
    y = np.asarray(y, dtype=float).reshape(-1)
    d = np.asarray(d, dtype=float).reshape(-1)
    if params.q == 0:
        return params.mu_w.copy(), params.sigma_w.copy()
    factor_y = safe_cholesky(params.sigma_y)
    resid = y - params.mu_y - params.lam * d
    gain = cho_solve((factor_y, True), params.sigma_wy.T).T
    mean = params.mu_w + gain @ resid
    cov = params.sigma_w - gain @ params.sigma_wy.T
    return mean, 0.5 * (cov + cov.T)


def conditional_linear_params(params, theta, r):
    """Skew-normal parameters of Y given the circular block (theta, r).

    Returns ``(location, scale, lam)``: Gaussian conditioning on w moves the
    location and shrinks the scale to the Schur complement, while the skew
    coefficients are untouched (the skew latents stay marginal).
    """
    theta = np.asarray(theta, dtype=float).reshape(-1)
    r = np.asarray(r, dtype=float).reshape(-1)
    if params.p == 0:
        return params.mu_y.copy(), params.sigma_y.copy(), params.lam.copy()
    if np.any(r <= 0):
        raise DomainError("radii must be strictly positive")
    w = polar_embed(theta, r).reshape(-1)
    factor_w = safe_cholesky(params.sigma_w)
    gain = cho_solve((factor_w, True), params.sigma_wy).T
    loc = params.mu_y + gain @ (w - params.mu_w)
    scale = params.sigma_y - gain @ params.sigma_wy
    return loc, 0.5 * (scale + scale.T), params.lam.copy()


def ssn_moments(params):
    """Mean and covariance of the linear block.

    ``E(Y) = mu_y + lam * sqrt(2/pi)`` and
    ``Var(Y) = Sigma_y + (1 - 2/pi) diag(lam)^2``.
    """
    mean = params.mu_y + params.lam * HALF_NORMAL_MEAN
    cov = params.sigma_y + (1.0 - 2.0 / np.pi) * np.diag(params.lam**2)
    return mean, cov


def identify(mu, sigma, p):
    """Map unconstrained (mu, sigma) to the identified scale.

    ``c_i = sqrt(sigma[2i+1, 2i+1])`` (0-based); the identified parameters
    are ``C^{-1} mu`` and ``C^{-1} sigma C^{-1}`` with C acting only on the
    2p plane coordinates.  Returns ``(mu_tilde, sigma_tilde, CMatrix)``.
    """
    mu = np.asarray(mu, dtype=float).reshape(-1)
    sigma = np.asarray(sigma, dtype=float)
    q = mu.shape[0] - 2 * p
    if q < 0:
        raise DomainError("mu shorter than 2p")
    idx = np.arange(p) * 2 + 1
    diag = sigma[idx, idx] if p else np.empty(0)
    if p and np.any(diag <= 0):
        raise DomainError("sigma[2i+1, 2i+1] must be positive to identify")
    c = CMatrix(np.sqrt(diag)) if p else CMatrix(np.empty(0))
    inv_scale = 1.0 / c.diag_full(q)
    mu_tilde = mu * inv_scale
    sigma_tilde = sigma * np.outer(inv_scale, inv_scale)
    if p:
        sigma_tilde[idx, idx] = 1.0
    return mu_tilde, sigma_tilde, c


def identify_params(params):
    """Identified copy of a :class:`JpsnParams` plus the scaling used."""
    mu_t, sigma_t, c = identify(params.mu, params.sigma, params.p)
    out = JpsnParams(params.p, params.q, mu_t, sigma_t, params.lam.copy(), constrained=True)
    return out, c


def transform_pn_params(mu, sigma, xi, delta):
    """Projected-normal parameters after rotating by xi and reflecting by delta.

    The plane map is ``w* = diag(1, delta) T w`` with T the rotation by xi;
    the image of a projected normal is again projected normal with
    ``mu* = M mu`` and ``sigma* = M sigma M'``.
    """
    if delta not in (-1, 1):
        raise DomainError("delta must be -1 or +1")
    mu = np.asarray(mu, dtype=float).reshape(2)
    sigma = np.asarray(sigma, dtype=float).reshape(2, 2)
    rot = np.array([[np.cos(xi), -np.sin(xi)], [np.sin(xi), np.cos(xi)]])
    m = np.diag([1.0, float(delta)]) @ rot
    return m @ mu, m @ sigma @ m.T


def circ_circ_corr(theta_a, theta_b):
    """Sample circular-circular correlation of two angle series, in [-1, 1].

    Both series are centered at their sample circular means; the statistic is
    the normalized cross-moment of the sines of the deviations.
    """
    a = np.asarray(theta_a, dtype=float).reshape(-1)
    b = np.asarray(theta_b, dtype=float).reshape(-1)
    if a.shape[0] != b.shape[0]:
        raise DomainError("series lengths differ")
    if a.shape[0] < 2:
        raise DomainError("need at least 2 observations")
    sa = np.sin(a - _circ_mean(a))
    sb = np.sin(b - _circ_mean(b))
    denom = np.sqrt(np.sum(sa**2) * np.sum(sb**2))
    if denom == 0.0:
        raise DomainError("degenerate series: zero angular dispersion")
    return float(np.clip(np.sum(sa * sb) / denom, -1.0, 1.0))


def _circ_mean(angles):
    s, c = np.sin(angles).mean(), np.cos(angles).mean()
    if s == 0.0 and c == 0.0:
        raise DomainError("circular mean undefined for this series")
    return atan_star(s, c)


def circ_lin_r2(theta, y):
    """Squared circular-linear dependence of an angle and a real series, in [0, 1].

    The R^2 of regressing y on (cos theta, sin theta), written in terms of
    the three pairwise Pearson correlations.
    """
    t = np.asarray(theta, dtype=float).reshape(-1)
    yy = np.asarray(y, dtype=float).reshape(-1)
    if t.shape[0] != yy.shape[0]:
        raise DomainError("series lengths differ")
    if t.shape[0] < 3:
        raise DomainError("need at least 3 observations")
    if np.var(yy) == 0.0:
        raise DomainError("y has zero variance")
    cos_t, sin_t = np.cos(t), np.sin(t)
    if np.var(cos_t) == 0.0 or np.var(sin_t) == 0.0:
        raise DomainError("theta has zero variance in a component")
    r_cy = _pearson(cos_t, yy)
    r_sy = _pearson(sin_t, yy)
    r_cs = _pearson(cos_t, sin_t)
    denom = 1.0 - r_cs**2
    if denom <= 1e-14:
        raise DomainError("cos(theta) and sin(theta) are collinear")
    val = (r_cy**2 + r_sy**2 - 2.0 * r_cy * r_sy * r_cs) / denom
    return float(np.clip(val, 0.0, 1.0))


def _pearson(x, y):
    xc = x - x.mean()
    yc = y - y.mean()
    return float(np.sum(xc * yc) / np.sqrt(np.sum(xc**2) * np.sum(yc**2)))


@dataclass
class DependenceMatrix:
    """Posterior dependence summary over all (p+q) x (p+q) variable pairs.

    Row/column order is the p circular dimensions followed by the q linear
    ones.  ``mean``, ``lo`` and ``hi`` hold the posterior mean and the 95%
    interval of the per-draw Monte Carlo dependence statistics;
    ``flagged`` marks cells whose dependence is credibly nonzero (for
    circular-linear cells: some relevant cross-covariance interval excludes
    zero).
    """

    p: int
    q: int
    mean: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    flagged: np.ndarray


def dependence_matrix(draws, mc_n=4096, rng=None, max_draws=500):
    """Monte Carlo posterior dependence matrix from identified draws.

    For each retained draw, ``mc_n`` observations are simulated from the
    drawn parameters and the pairwise statistics (circular-circular
    correlation, circular-linear R^2, linear Pearson correlation) computed;
    posterior means and 95% intervals summarize the per-draw values.  At
    most ``max_draws`` equally spaced draws are used.

    ``draws`` must expose ``p``, ``q``, ``mu_tilde``, ``sigma_tilde``,
    ``lam`` arrays (as :class:`jpsn.mcmc.PosteriorDraws` does).
    """
    if rng is None:
        rng = np.random.default_rng(0)
    n_draws = draws.mu_tilde.shape[0]
    if n_draws == 0:
        raise DomainError("no posterior draws")
    p, q = draws.p, draws.q
    k = p + q
    use = np.unique(np.linspace(0, n_draws - 1, min(max_draws, n_draws)).astype(int))
    stats = np.full((len(use), k, k), np.nan)
    for out_i, b in enumerate(use):
        params = JpsnParams(p, q, draws.mu_tilde[b], draws.sigma_tilde[b], draws.lam[b])
        data, _ = simulate_jpsn(params, mc_n, rng)
        m = np.eye(k)
        for i in range(p):
            for j in range(i + 1, p):
                m[i, j] = m[j, i] = circ_circ_corr(data.theta[:, i], data.theta[:, j])
        for i in range(p):
            for j in range(q):
                m[i, p + j] = m[p + j, i] = circ_lin_r2(data.theta[:, i], data.y[:, j])
        for i in range(q):
            for j in range(i + 1, q):
                m[p + i, p + j] = m[p + j, p + i] = _pearson(data.y[:, i], data.y[:, j])
        stats[out_i] = m

    mean = stats.mean(axis=0)
    lo = np.quantile(stats, 0.025, axis=0)
    hi = np.quantile(stats, 0.975, axis=0)

    flagged = np.zeros((k, k), dtype=bool)
    np.fill_diagonal(flagged, True)
    # circular-circular and linear-linear: interval excludes zero
    for i in range(k):
        for j in range(k):
            if i == j or (i < p) != (j < p):
                continue
            flagged[i, j] = (lo[i, j] > 0.0) or (hi[i, j] < 0.0)
    # circular-linear: some plane/linear cross-covariance interval excludes zero
    for i in range(p):
        for j in range(q):
            entries = draws.sigma_tilde[:, 2 * i : 2 * i + 2, 2 * p + j]
            lo_s = np.quantile(entries, 0.025, axis=0)
            hi_s = np.quantile(entries, 0.975, axis=0)
            hit = bool(np.any((lo_s > 0.0) | (hi_s < 0.0)))
            flagged[i, p + j] = flagged[p + j, i] = hit
    return DependenceMatrix(p, q, mean, lo, hi, flagged)
