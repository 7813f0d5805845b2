"""Gibbs sampler on the unconstrained parameterization, with post-processing.

One scan updates, in fixed order: the skew latents D_t (positive-orthant
truncated normal via an exact coordinate sub-scan), each latent radius R_ti
(one two-uniform slice transition), the missing entries (Gaussian
conditional imputation), then (mu, Sigma) from the conjugate
normal-inverse-Wishart full conditional, and finally lambda from its normal
full conditional.  After sampling, every stored draw is rescaled to the
identified parameterization (unit second radial variances) and the radii are
rescaled accordingly.

A chain is strictly sequential; run several chains with independent seeds
for parallelism.  All randomness flows through one ``numpy.random.Generator``
per chain, so a seed fixes the draws bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_solve

from .core import atan_star
from .dists import NiwParams, safe_cholesky, sample_niw, sample_trunc_normal_lower
from .errors import DomainError, NumericalError
from .model import HALF_NORMAL_MEAN, JpsnParams, LatentState, identify

__all__ = [
    "PriorSpec",
    "ChainConfig",
    "GibbsState",
    "PosteriorDraws",
    "niw_full_conditional",
    "lambda_full_conditional",
    "sample_d",
    "slice_update_r",
    "compute_r_coefficients",
    "impute_missing",
    "gibbs_scan",
    "run_gibbs",
    "ess",
]


@dataclass(frozen=True)
class PriorSpec:
    """NIW prior over (mu, Sigma) and a normal prior over lambda."""

    niw: NiwParams
    lambda_mean: np.ndarray
    lambda_cov: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "lambda_mean", np.asarray(self.lambda_mean, dtype=float).reshape(-1))
        object.__setattr__(self, "lambda_cov", np.asarray(self.lambda_cov, dtype=float))
        q = self.lambda_mean.shape[0]
        if self.lambda_cov.shape != (q, q):
            raise DomainError("lambda_cov shape does not match lambda_mean")

    @classmethod
    def default(cls, p, q, niw_kappa=0.001, niw_extra_dof=10, lambda_var=100.0):
        """Weakly informative default: NIW(0, 0.001, dim+10, I), N(0, 100 I)."""
        dim = 2 * p + q
        niw = NiwParams(np.zeros(dim), niw_kappa, dim + niw_extra_dof, np.eye(dim))
        return cls(niw, np.zeros(q), lambda_var * np.eye(q))


@dataclass(frozen=True)
class ChainConfig:
    """Sampler settings; ``burnin < iterations`` and ``thin >= 1``."""

    iterations: int
    burnin: int
    thin: int = 1
    seed: int = 0
    init: str = "default"
    store_latents: bool = True

    def __post_init__(self):
        if not self.burnin < self.iterations:
            raise DomainError("burnin must be smaller than iterations")
        if self.thin < 1:
            raise DomainError("thin must be >= 1")
        if self.init not in ("default", "supplied"):
            raise DomainError("init must be 'default' or 'supplied'")

    @property
    def n_stored(self):
        return (self.iterations - self.burnin + self.thin - 1) // self.thin


@dataclass
class GibbsState:
    """Current unconstrained parameters, latents, and completed data."""

    params: JpsnParams
    r: np.ndarray      # (T, p) latent radii
    d: np.ndarray      # (T, q) skew latents
    theta: np.ndarray  # (T, p) angles, missing entries filled with current imputations
    y: np.ndarray      # (T, q) linear values, likewise completed

    def embed_w(self):
        return LatentState(self.r, self.d).embed(self.theta)


def niw_full_conditional(wy, d, lam, prior_niw):
    """Conjugate NIW full conditional of (mu, Sigma).

    ``wy`` holds the completed (w, y) rows (T, 2p+q); the de-skewed
    residuals ``eta_t`` subtract ``diag(lam) d_t`` from the linear block.
    With T = 0 the prior is returned unchanged.
    """
    wy = np.asarray(wy, dtype=float)
    n_obs = wy.shape[0]
    if n_obs == 0:
        return prior_niw
    eta = wy.copy()
    d = np.asarray(d, dtype=float)
    if d.size:
        d = d.reshape(n_obs, -1)
        eta[:, wy.shape[1] - d.shape[1] :] -= np.asarray(lam, dtype=float) * d
    eta_bar = eta.mean(axis=0)
    centered = eta - eta_bar
    scatter = centered.T @ centered
    k0, nu0 = prior_niw.kappa0, prior_niw.nu0
    mu_post = (k0 * prior_niw.mu0 + n_obs * eta_bar) / (k0 + n_obs)
    kappa_post = k0 + n_obs
    nu_post = nu0 + n_obs
    gap = eta_bar - prior_niw.mu0
    psi_post = prior_niw.psi0 + scatter + (k0 * n_obs / (k0 + n_obs)) * np.outer(gap, gap)
    return NiwParams(mu_post, kappa_post, nu_post, 0.5 * (psi_post + psi_post.T))


def _linear_conditional_pieces(mu, sigma, q):
    """(mu_y, gain, Sigma_{y|w}) for conditioning the linear block on w."""
    dim = mu.shape[0]
    p2 = dim - q
    mu_y = mu[p2:]
    if p2 == 0:
        return mu_y, np.zeros((q, 0)), sigma.copy()
    sigma_w = sigma[:p2, :p2]
    sigma_wy = sigma[:p2, p2:]
    factor_w = safe_cholesky(sigma_w)
    gain = cho_solve((factor_w, True), sigma_wy).T          # (q, 2p)
    s_cond = sigma[p2:, p2:] - gain @ sigma_wy
    return mu_y, gain, 0.5 * (s_cond + s_cond.T)


def lambda_full_conditional(wy, d, mu, sigma, prior):
    """Normal full conditional of lambda: returns (gamma_post, omega_post).

    Treats each ``diag(d_t)`` as the design matrix of a Bayesian regression
    of the conditional linear residuals on lambda.
    """
    d = np.asarray(d, dtype=float)
    q = d.shape[1]
    wy = np.asarray(wy, dtype=float)
    dim = np.asarray(mu).shape[0]
    p2 = dim - q
    mu_y, gain, s_cond = _linear_conditional_pieces(np.asarray(mu, float), np.asarray(sigma, float), q)
    w = wy[:, :p2]
    y = wy[:, p2:]
    resid = y - mu_y - (w - np.asarray(mu, float)[:p2]) @ gain.T
    s_factor = safe_cholesky(s_cond)
    s_inv = cho_solve((s_factor, True), np.eye(q))
    omega0_inv = np.linalg.inv(prior.lambda_cov)
    # sum_t diag(d_t) S^{-1} diag(d_t) = S^{-1} .* (d' d)
    prec = s_inv * (d.T @ d) + omega0_inv
    omega_post = np.linalg.inv(prec)
    omega_post = 0.5 * (omega_post + omega_post.T)
    rhs = np.sum(d * (resid @ s_inv.T), axis=0) + omega0_inv @ prior.lambda_mean
    gamma_post = omega_post @ rhs
    return gamma_post, omega_post


def sample_d(y, w, mu, sigma, lam, rng, d_current=None):
    """Update the positive skew latents for all rows at once.

    The target is the positive-orthant truncated normal with covariance
    ``(diag(lam) S^{-1} diag(lam) + I)^{-1}`` (S the conditional linear
    covariance given w) and matching mean; the draw is one full coordinate
    sub-scan of exact univariate truncated-normal conditionals, which is an
    exact draw for q = 1 or whenever the coordinates decouple.
    """
    y = np.atleast_2d(np.asarray(y, dtype=float))
    w = np.atleast_2d(np.asarray(w, dtype=float))
    lam = np.asarray(lam, dtype=float).reshape(-1)
    q = lam.shape[0]
    n_obs = y.shape[0]
    mu = np.asarray(mu, dtype=float).reshape(-1)
    mu_y, gain, s_cond = _linear_conditional_pieces(mu, np.asarray(sigma, float), q)
    p2 = mu.shape[0] - q
    cond_mean = mu_y + (w - mu[:p2]) @ gain.T if p2 else np.broadcast_to(mu_y, (n_obs, q))
    s_factor = safe_cholesky(s_cond)
    s_inv = cho_solve((s_factor, True), np.eye(q))
    prec = np.outer(lam, lam) * s_inv + np.eye(q)
    b = (y - cond_mean) @ s_inv.T * lam                       # (T, q)
    m = np.linalg.solve(prec, b.T).T                          # (T, q)
    d = np.full((n_obs, q), HALF_NORMAL_MEAN) if d_current is None else np.array(d_current, dtype=float)
    for j in range(q):
        others = [k for k in range(q) if k != j]
        mean_j = m[:, j]
        if others:
            mean_j = mean_j - (d[:, others] - m[:, others]) @ prec[j, others] / prec[j, j]
        d[:, j] = sample_trunc_normal_lower(mean_j, 1.0 / prec[j, j], 0.0, rng)
    return d


def slice_update_r(r_current, coef_a, coef_b, rng):
    """One exact slice transition for radii with target ``r * exp(-a/2 (r - b/a)^2)``.

    Vectorized: all arguments broadcast.  A vertical level is drawn under the
    Gaussian kernel, the slice is intersected with r > 0, and the new radius
    is uniform in r^2 over the slice.
    """
    r = np.asarray(r_current, dtype=float)
    a = np.asarray(coef_a, dtype=float)
    b = np.asarray(coef_b, dtype=float)
    if np.any(a <= 0):
        raise DomainError("slice coefficient a must be positive")
    if np.any(r <= 0):
        raise DomainError("current radius must be positive")
    m = b / a
    shape = np.broadcast_shapes(r.shape, m.shape)
    log_u = np.log1p(-rng.random(shape))                     # log U(0,1], avoids log(0)
    half_width = np.sqrt((r - m) ** 2 - 2.0 * log_u / a)
    rho1 = np.maximum(0.0, m - half_width)
    rho2 = m + half_width
    u2 = rng.random(shape)
    out = np.sqrt((rho2**2 - rho1**2) * u2 + rho1**2)
    out = np.maximum(out, 1e-300)
    return float(out) if out.ndim == 0 else out


def compute_r_coefficients(theta, r, y, i, mu, sigma, lam, d):
    """Slice coefficients (A, B) for radius block ``i`` of every row.

    ``A_t = u_t' P u_t`` and ``B_t = u_t' (P mu_i - Q resid_t)`` where
    ``u_t = (cos, sin)`` of the block angle, P is the 2x2 precision block of
    the joint precision matrix and Q its cross-block row, and the residuals
    subtract the skew-shifted joint mean.  Returns two length-T arrays.
    """
    theta = np.atleast_2d(np.asarray(theta, dtype=float))
    r = np.atleast_2d(np.asarray(r, dtype=float))
    y = np.atleast_2d(np.asarray(y, dtype=float))
    d = np.atleast_2d(np.asarray(d, dtype=float))
    mu = np.asarray(mu, dtype=float).reshape(-1)
    lam = np.asarray(lam, dtype=float).reshape(-1)
    p = theta.shape[1]
    q = y.shape[1]
    dim = 2 * p + q
    if not 0 <= i < p:
        raise DomainError("block index out of range")

    factor = safe_cholesky(np.asarray(sigma, dtype=float))
    omega = cho_solve((factor, True), np.eye(dim))
    bi = slice(2 * i, 2 * i + 2)
    rest = np.r_[0 : 2 * i, 2 * i + 2 : dim]
    o_ii = omega[bi, bi]
    o_ir = omega[bi, rest]

    x = np.empty((theta.shape[0], dim))
    x[:, 0:2 * p:2] = r * np.cos(theta)
    x[:, 1:2 * p:2] = r * np.sin(theta)
    x[:, 2 * p :] = y
    mean = np.broadcast_to(mu, x.shape).copy()
    if q:
        mean[:, 2 * p :] += lam * d
    resid_rest = x[:, rest] - mean[:, rest]

    u = np.stack([np.cos(theta[:, i]), np.sin(theta[:, i])], axis=1)   # (T, 2)
    coef_a = np.einsum("ti,ij,tj->t", u, o_ii, u)
    core = o_ii @ mu[bi] - (o_ir @ resid_rest.T).T                      # (T, 2)
    coef_b = np.einsum("ti,ti->t", u, core)
    if np.any(coef_a <= 0):
        raise NumericalError("conditional precision block is not positive definite")
    return coef_a, coef_b


def _impute_rows(x, mean, sigma, miss, rng):
    """Redraw missing coordinates of ``x`` from their Gaussian conditionals.

    ``x`` and ``mean`` are (T, dim); ``miss`` is the (T, dim) bool mask.
    Conditioning goes through the joint precision matrix (one factorization
    per call), so each missingness pattern only costs an inversion of its
    own small block.  Patterns are processed in a deterministic order.
    """
    rows = np.flatnonzero(miss.any(axis=1))
    if rows.size == 0:
        return x
    dim = sigma.shape[0]
    factor = safe_cholesky(sigma)
    omega = cho_solve((factor, True), np.eye(dim))
    patterns = {}
    for t in rows:
        patterns.setdefault(miss[t].tobytes(), []).append(t)
    for key in sorted(patterns):
        group = np.asarray(patterns[key])
        pat = np.frombuffer(key, dtype=bool)
        s_idx = np.flatnonzero(pat)
        o_idx = np.flatnonzero(~pat)
        if o_idx.size:
            omega_ss = omega[np.ix_(s_idx, s_idx)]
            cond_cov = np.linalg.inv(omega_ss)
            gain = cond_cov @ omega[np.ix_(s_idx, o_idx)]
            cond_mean = mean[np.ix_(group, s_idx)] - (
                x[np.ix_(group, o_idx)] - mean[np.ix_(group, o_idx)]
            ) @ gain.T
        else:
            cond_cov = sigma[np.ix_(s_idx, s_idx)]
            cond_mean = mean[np.ix_(group, s_idx)]
        factor_s = safe_cholesky(0.5 * (cond_cov + cond_cov.T))
        z = rng.standard_normal((group.size, s_idx.size))
        x[np.ix_(group, s_idx)] = cond_mean + z @ factor_s.T
    return x


def impute_missing(theta_t, r_t, y_t, theta_miss, y_miss, params, d_t, rng):
    """Redraw the missing entries of one observation.

    Missing linear entries are drawn from their Gaussian conditional given
    everything observed; a missing angle is drawn by sampling its whole
    plane block, then converting back to (angle, radius).  Returns
    ``(theta, r, y)`` with observed entries untouched.
    """
    p, q = params.p, params.q
    theta = np.asarray(theta_t, dtype=float).reshape(p).copy()
    r = np.asarray(r_t, dtype=float).reshape(p).copy()
    y = np.asarray(y_t, dtype=float).reshape(q).copy()
    theta_miss = np.asarray(theta_miss, dtype=bool).reshape(p)
    y_miss = np.asarray(y_miss, dtype=bool).reshape(q)
    if not theta_miss.any() and not y_miss.any():
        return theta, r, y

    x = np.empty((1, params.dim))
    x[0, 0:2 * p:2] = r * np.cos(theta)
    x[0, 1:2 * p:2] = r * np.sin(theta)
    x[0, 2 * p :] = y
    mean = params.shifted_mean(np.asarray(d_t, dtype=float).reshape(1, q))
    miss = np.zeros((1, params.dim), dtype=bool)
    miss[0, 0:2 * p:2] = theta_miss
    miss[0, 1:2 * p:2] = theta_miss
    miss[0, 2 * p :] = y_miss
    x = _impute_rows(x, mean, params.sigma, miss, rng)
    for i in np.flatnonzero(theta_miss):
        wx, wy = x[0, 2 * i], x[0, 2 * i + 1]
        theta[i] = atan_star(wy, wx)
        r[i] = np.hypot(wx, wy)
    y = x[0, 2 * p :].copy()
    return theta, r, y


def gibbs_scan(state, theta_miss, y_miss, prior, rng):
    """One full systematic scan; mutates and returns ``state``.

    Order: skew latents, radii (one slice transition per block), missing
    entries, (mu, Sigma), lambda.
    """
    params = state.params
    p, q = params.p, params.q
    n_obs = state.theta.shape[0] if p else state.y.shape[0]

    if q:
        w = state.embed_w()
        state.d = sample_d(state.y, w, params.mu, params.sigma, params.lam, rng, state.d)

    for i in range(p):
        coef_a, coef_b = compute_r_coefficients(
            state.theta, state.r, state.y, i, params.mu, params.sigma, params.lam, state.d
        )
        state.r[:, i] = slice_update_r(state.r[:, i], coef_a, coef_b, rng)

    if theta_miss.any() or y_miss.any():
        x = np.concatenate([state.embed_w(), state.y], axis=1)
        mean = params.shifted_mean(state.d)
        miss = np.zeros((n_obs, params.dim), dtype=bool)
        miss[:, 0:2 * p:2] = theta_miss
        miss[:, 1:2 * p:2] = theta_miss
        miss[:, 2 * p :] = y_miss
        x = _impute_rows(x, mean, params.sigma, miss, rng)
        if p and theta_miss.any():
            t_idx, i_idx = np.nonzero(theta_miss)
            wx = x[t_idx, 2 * i_idx]
            wy = x[t_idx, 2 * i_idx + 1]
            state.theta[t_idx, i_idx] = atan_star(wy, wx)
            state.r[t_idx, i_idx] = np.hypot(wx, wy)
        if q:
            state.y[y_miss] = x[:, 2 * p :][y_miss]

    wy = np.concatenate([state.embed_w(), state.y], axis=1)
    niw_post = niw_full_conditional(wy, state.d, params.lam, prior.niw)
    mu_new, sigma_new = sample_niw(niw_post, rng)

    lam_new = params.lam
    if q:
        gamma_post, omega_post = lambda_full_conditional(wy, state.d, mu_new, sigma_new, prior)
        lam_new = gamma_post + safe_cholesky(omega_post) @ rng.standard_normal(q)

    state.params = JpsnParams(p, q, mu_new, sigma_new, lam_new)
    return state


@dataclass
class PosteriorDraws:
    """Stored draws: raw, identified, latents, and imputations for masked entries."""

    p: int
    q: int
    mu: np.ndarray            # (B, dim) unconstrained
    sigma: np.ndarray         # (B, dim, dim)
    lam: np.ndarray           # (B, q)
    mu_tilde: np.ndarray      # (B, dim) identified
    sigma_tilde: np.ndarray   # (B, dim, dim)
    c: np.ndarray             # (B, p)
    r: np.ndarray = None          # (B, T, p) raw radii (optional)
    r_tilde: np.ndarray = None    # (B, T, p) identified radii (optional)
    d: np.ndarray = None          # (B, T, q) skew latents (optional)
    theta_missing_index: np.ndarray = None   # (n_mt, 2) as (t, i)
    y_missing_index: np.ndarray = None       # (n_my, 2) as (t, j)
    theta_imputed: np.ndarray = None         # (B, n_mt)
    y_imputed: np.ndarray = None             # (B, n_my)
    meta: dict = field(default_factory=dict)

    @property
    def n_draws(self):
        return self.mu.shape[0]

    def identified_params(self, b):
        return JpsnParams(
            self.p, self.q, self.mu_tilde[b], self.sigma_tilde[b], self.lam[b], constrained=True
        )


def _default_state(data, rng):
    """Neutral start: r=1, d=sqrt(2/pi), lambda=0, mu=0, Sigma=I; missing
    angles start uniform, missing linear entries at their column means."""
    p, q = data.p, data.q
    n_obs = data.n_obs
    theta = data.theta.copy()
    y = data.y.copy()
    if p and data.theta_missing.any():
        theta[data.theta_missing] = rng.uniform(0.0, 2.0 * np.pi, int(data.theta_missing.sum()))
    for j in range(q):
        col_miss = data.y_missing[:, j]
        if col_miss.any():
            y[col_miss, j] = y[~col_miss, j].mean() if (~col_miss).any() else 0.0
    params = JpsnParams(p, q, np.zeros(2 * p + q), np.eye(2 * p + q), np.zeros(q))
    return GibbsState(params, np.ones((n_obs, p)), np.full((n_obs, q), HALF_NORMAL_MEAN), theta, y)


def run_gibbs(data, prior=None, config=None, init_state=None):
    """Run the Gibbs sampler on a dataset and post-process the draws.

    Parameters
    ----------
    data : PolyCylDataset
    prior : PriorSpec, optional (weakly informative default)
    config : ChainConfig, optional (2000 kept draws by default)
    init_state : GibbsState, optional, used when ``config.init == 'supplied'``

    Returns
    -------
    PosteriorDraws
        Thinned post-burnin draws; identified entries satisfy the unit
        second-radial-variance constraint and ``r_tilde = r / c_i`` per draw.
    """
    if config is None:
        config = ChainConfig(iterations=12000, burnin=8000, thin=2)
    if prior is None:
        prior = PriorSpec.default(data.p, data.q)
    if prior.niw.dim != 2 * data.p + data.q or prior.lambda_mean.shape[0] != data.q:
        raise DomainError("prior dimensions inconsistent with the dataset")
    rng = np.random.default_rng(config.seed)
    if config.init == "supplied":
        if init_state is None:
            raise DomainError("init='supplied' requires an init_state")
        state = GibbsState(
            init_state.params,
            init_state.r.copy(),
            init_state.d.copy(),
            init_state.theta.copy(),
            init_state.y.copy(),
        )
    else:
        state = _default_state(data, rng)

    p, q = data.p, data.q
    dim = 2 * p + q
    n_obs = data.n_obs
    n_keep = config.n_stored
    theta_miss = data.theta_missing
    y_miss = data.y_missing
    mt_index = np.argwhere(theta_miss)
    my_index = np.argwhere(y_miss)

    mu_store = np.empty((n_keep, dim))
    sigma_store = np.empty((n_keep, dim, dim))
    lam_store = np.empty((n_keep, q))
    r_store = np.empty((n_keep, n_obs, p)) if config.store_latents else None
    d_store = np.empty((n_keep, n_obs, q)) if config.store_latents else None
    theta_imp = np.empty((n_keep, mt_index.shape[0]))
    y_imp = np.empty((n_keep, my_index.shape[0]))

    kept = 0
    for it in range(config.iterations):
        try:
            state = gibbs_scan(state, theta_miss, y_miss, prior, rng)
        except NumericalError as err:
            raise NumericalError(f"Gibbs scan failed at iteration {it}: {err}") from err
        if it >= config.burnin and (it - config.burnin) % config.thin == 0:
            mu_store[kept] = state.params.mu
            sigma_store[kept] = state.params.sigma
            lam_store[kept] = state.params.lam
            if config.store_latents:
                r_store[kept] = state.r
                d_store[kept] = state.d
            if mt_index.size:
                theta_imp[kept] = state.theta[mt_index[:, 0], mt_index[:, 1]]
            if my_index.size:
                y_imp[kept] = state.y[my_index[:, 0], my_index[:, 1]]
            kept += 1

    mu_t = np.empty_like(mu_store)
    sigma_t = np.empty_like(sigma_store)
    c_store = np.empty((n_keep, p))
    r_tilde = np.empty_like(r_store) if (config.store_latents and p) else None
    for b in range(n_keep):
        mu_t[b], sigma_t[b], cmat = identify(mu_store[b], sigma_store[b], p)
        c_store[b] = cmat.c
        if r_tilde is not None:
            r_tilde[b] = r_store[b] / cmat.c
    if config.store_latents and p == 0:
        r_tilde = r_store

    return PosteriorDraws(
        p=p,
        q=q,
        mu=mu_store,
        sigma=sigma_store,
        lam=lam_store,
        mu_tilde=mu_t,
        sigma_tilde=sigma_t,
        c=c_store,
        r=r_store,
        r_tilde=r_tilde,
        d=d_store,
        theta_missing_index=mt_index,
        y_missing_index=my_index,
        theta_imputed=theta_imp,
        y_imputed=y_imp,
        meta={
            "iterations": config.iterations,
            "burnin": config.burnin,
            "thin": config.thin,
            "seed": config.seed,
            "n_obs": n_obs,
        },
    )


def ess(chain):
    """Effective sample size via the initial-positive-sequence estimator.

    Autocorrelations are summed in adjacent pairs and truncated at the first
    non-positive pair sum.  Needs at least 10 values and a non-constant chain.
    """
    x = np.asarray(chain, dtype=float).reshape(-1)
    n = x.shape[0]
    if n < 10:
        raise DomainError("chain too short for an ESS estimate")
    x = x - x.mean()
    var0 = float(x @ x) / n
    if var0 == 0.0:
        raise DomainError("constant chain has no ESS")
    acov = np.correlate(x, x, mode="full")[n - 1 :] / n
    rho = acov / acov[0]
    tau = 0.0
    k = 0
    while 2 * k + 1 < n:
        pair = rho[2 * k] + rho[2 * k + 1]
        if pair <= 0.0:
            break
        tau += pair
        k += 1
    tau = 2.0 * tau - 1.0
    tau = max(tau, 1.0 / n)
    return float(n / tau)
