"""Cylindrical comparison models.

Two baselines fitted blockwise to (1 circular, 1 linear) pairs:

* the Abe-Ley sinusoidally-perturbed-Weibull density (with log-transformed
  linear part), fitted by coordinatewise random-walk Metropolis-Hastings on
  transformed coordinates with Robbins-Monro step adaptation during burnin;
* the independence-structured ("cylindrical") variant of the joint model,
  which reuses the Gibbs engine independently per block.

Both fitters impute missing entries each iteration from the current
parameters, which doubles as the posterior-predictive path for scoring.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import PolyCylDataset, circular_mean, wrap_angle
from .dists import AbeLeyParams, abeley_log_density
from .errors import DomainError, InitializationError
from .mcmc import ChainConfig, PriorSpec, run_gibbs

__all__ = [
    "MhConfig",
    "AbeLeyPrior",
    "AbeLeyDraws",
    "simulate_abeley",
    "fit_abeley_mh",
    "fit_cylindrical_jpsn",
    "validate_partition",
]

_GRID_N = 4096
_N_COORDS = 5  # alpha, beta, mu, kappa, lambda


@dataclass(frozen=True)
class MhConfig:
    """Random-walk MH settings with burnin-only step adaptation."""

    iterations: int
    burnin: int
    thin: int = 1
    seed: int = 0
    step_scales: tuple = (0.2,) * _N_COORDS
    adapt_window: int = 25
    target_accept: float = 0.3

    def __post_init__(self):
        if not self.burnin < self.iterations:
            raise DomainError("burnin must be smaller than iterations")
        if self.thin < 1:
            raise DomainError("thin must be >= 1")
        if not 0.0 < self.target_accept < 1.0:
            raise DomainError("target_accept must lie in (0, 1)")
        if len(self.step_scales) != _N_COORDS or any(s <= 0 for s in self.step_scales):
            raise DomainError("step_scales must be five positive numbers")

    @property
    def n_stored(self):
        return (self.iterations - self.burnin + self.thin - 1) // self.thin


@dataclass(frozen=True)
class AbeLeyPrior:
    """Inverse-gamma(shape, scale) on alpha, beta, kappa; uniform mu, lambda."""

    ig_shape: float = 1.0
    ig_scale: float = 1.0


@dataclass
class AbeLeyDraws:
    """Stored Abe-Ley posterior draws plus imputations for masked entries."""

    alpha: np.ndarray
    beta: np.ndarray
    mu: np.ndarray
    kappa: np.ndarray
    lambda_skew: np.ndarray
    accept_rate: np.ndarray                 # post-adaptation, per coordinate
    theta_missing_index: np.ndarray = None  # (n_mt,) row indices
    y_missing_index: np.ndarray = None
    theta_imputed: np.ndarray = None        # (B, n_mt)
    y_imputed: np.ndarray = None
    meta: dict = field(default_factory=dict)

    @property
    def n_draws(self):
        return self.alpha.shape[0]

    def params(self, b):
        return AbeLeyParams(
            self.alpha[b], self.beta[b], self.mu[b], self.kappa[b], self.lambda_skew[b]
        )


def _circular_marginal_cdf_grid(params):
    """Grid and CDF of the Abe-Ley circular marginal on [0, 2*pi)."""
    grid = np.linspace(0.0, 2.0 * np.pi, _GRID_N, endpoint=False)
    dens = (1.0 + params.lambda_skew * np.sin(grid - params.mu)) / (
        1.0 - np.tanh(params.kappa) * np.cos(grid - params.mu)
    )
    dens = np.maximum(dens, 0.0)
    cdf = np.cumsum(dens)
    cdf /= cdf[-1]
    return grid, cdf


def _grid_inverse_cdf(grid, cdf, u):
    """Sample from a tabulated circular density by inverting its CDF."""
    idx = np.searchsorted(cdf, u, side="left")
    cell = 2.0 * np.pi / len(grid)
    lo = np.where(idx > 0, cdf[np.maximum(idx - 1, 0)], 0.0)
    hi = cdf[idx]
    frac = np.where(hi > lo, (u - lo) / np.maximum(hi - lo, 1e-300), 0.5)
    return wrap_angle(grid[idx] + frac * cell)


def _sample_y_given_theta(theta, params, rng):
    """Log-Weibull conditional draw of the linear part."""
    g = 1.0 - np.tanh(params.kappa) * np.cos(np.asarray(theta) - params.mu)
    scale = 1.0 / (params.beta * g ** (1.0 / params.alpha))
    x = scale * rng.weibull(params.alpha, size=np.shape(theta))
    return np.log(np.maximum(x, 1e-300))


def simulate_abeley(params, n_obs, rng):
    """Draw (theta, y) pairs: theta by grid inverse-CDF of the circular
    marginal, then y from the conditional log-Weibull."""
    grid, cdf = _circular_marginal_cdf_grid(params)
    theta = _grid_inverse_cdf(grid, cdf, rng.random(n_obs))
    y = _sample_y_given_theta(theta, params, rng)
    return theta, y


def _sample_theta_given_y(y_vals, params, rng, grid_n=1024):
    """Grid draws of theta from its conditional density given y, one per row."""
    y_vals = np.atleast_1d(np.asarray(y_vals, dtype=float))
    grid = np.linspace(0.0, 2.0 * np.pi, grid_n, endpoint=False)
    logd = abeley_log_density(grid[None, :], y_vals[:, None], params)
    logd -= logd.max(axis=1, keepdims=True)
    dens = np.exp(logd)
    cdf = np.cumsum(dens, axis=1)
    cdf /= cdf[:, -1:]
    u = rng.random(y_vals.shape[0])
    cell = 2.0 * np.pi / grid_n
    out = np.empty(y_vals.shape[0])
    for row in range(y_vals.shape[0]):
        idx = int(np.searchsorted(cdf[row], u[row], side="left"))
        lo = cdf[row, idx - 1] if idx > 0 else 0.0
        hi = cdf[row, idx]
        frac = (u[row] - lo) / max(hi - lo, 1e-300)
        out[row] = wrap_angle(grid[idx] + frac * cell)
    return out


# transformed coordinates: (log a, log b, logit(mu / 2pi), log k, atanh(lam))


def _to_params(z):
    mu = 2.0 * np.pi / (1.0 + np.exp(-z[2]))
    return AbeLeyParams(np.exp(z[0]), np.exp(z[1]), mu, np.exp(z[3]), np.tanh(z[4]))


def _log_jacobian(z):
    sig = 1.0 / (1.0 + np.exp(-z[2]))
    log_j_mu = np.log(2.0 * np.pi) + np.log(sig) + np.log1p(-sig)
    log_j_lam = 2.0 * (np.log(2.0) - z[4] - np.log1p(np.exp(-2.0 * z[4])))  # log sech^2
    return z[0] + z[1] + z[3] + log_j_mu + log_j_lam


def _log_prior(params, prior):
    a, b = prior.ig_shape, prior.ig_scale
    out = 0.0
    for x in (params.alpha, params.beta, params.kappa):
        if x <= 0:
            return -np.inf
        out += -(a + 1.0) * np.log(x) - b / x
    return out


def _log_post(z, theta, y, prior):
    params = _to_params(z)
    loglik = float(np.sum(abeley_log_density(theta, y, params)))
    if not np.isfinite(loglik):
        return -np.inf, params
    return loglik + _log_prior(params, prior) + _log_jacobian(z), params


def fit_abeley_mh(data, prior=None, config=None):
    """Fit the Abe-Ley baseline to a single cylindrical series by MH.

    ``data`` must be a :class:`PolyCylDataset` with p = q = 1.  Missing
    entries are imputed from the current parameters at each iteration and the
    imputations at kept iterations are returned as predictive draws.

    Raises
    ------
    InitializationError
        If the likelihood is not finite at the moment-based starting point.
    """
    if data.p != 1 or data.q != 1:
        raise DomainError("the Abe-Ley baseline needs exactly one circular and one linear series")
    if prior is None:
        prior = AbeLeyPrior()
    if config is None:
        config = MhConfig(iterations=6000, burnin=3000, thin=1)
    rng = np.random.default_rng(config.seed)

    theta = data.theta[:, 0].copy()
    y = data.y[:, 0].copy()
    t_miss = np.flatnonzero(data.theta_missing[:, 0])
    y_miss = np.flatnonzero(data.y_missing[:, 0])
    obs_t = ~data.theta_missing[:, 0]
    obs_y = ~data.y_missing[:, 0]

    # moment-flavoured starting point on observed entries
    mu0 = circular_mean(theta[obs_t]) if obs_t.any() else np.pi
    mu0 = min(max(mu0, 1e-3), 2.0 * np.pi - 1e-3)
    mean_x = float(np.exp(np.minimum(y[obs_y], 50.0)).mean()) if obs_y.any() else 1.0
    beta0 = 1.0 / max(mean_x, 1e-6)
    z = np.array([0.0, np.log(beta0), np.log(mu0 / (2.0 * np.pi - mu0)), np.log(0.5), 0.0])

    # neutral fill for missing entries before the first imputation pass
    theta[~obs_t] = mu0
    y[~obs_y] = y[obs_y].mean() if obs_y.any() else 0.0

    log_post, params = _log_post(z, theta, y, prior)
    if not np.isfinite(log_post):
        raise InitializationError("Abe-Ley likelihood not finite at the starting point")

    log_scales = np.log(np.asarray(config.step_scales, dtype=float))
    window_acc = np.zeros(_N_COORDS)
    window_n = 0
    adapt_round = 0
    post_acc = np.zeros(_N_COORDS)
    post_n = 0

    n_keep = config.n_stored
    store = np.empty((n_keep, _N_COORDS))
    theta_imp = np.empty((n_keep, t_miss.size))
    y_imp = np.empty((n_keep, y_miss.size))
    kept = 0

    for it in range(config.iterations):
        if t_miss.size or y_miss.size:
            both = data.y_missing[t_miss, 0]
            if np.any(both):
                grid, cdf = _circular_marginal_cdf_grid(params)
                rows = t_miss[both]
                theta[rows] = _grid_inverse_cdf(grid, cdf, rng.random(rows.size))
            if np.any(~both):
                rows = t_miss[~both]
                theta[rows] = _sample_theta_given_y(y[rows], params, rng)
            if y_miss.size:
                y[y_miss] = _sample_y_given_theta(theta[y_miss], params, rng)
            log_post, params = _log_post(z, theta, y, prior)

        for k in range(_N_COORDS):
            z_prop = z.copy()
            z_prop[k] += np.exp(log_scales[k]) * rng.standard_normal()
            lp_prop, params_prop = _log_post(z_prop, theta, y, prior)
            accept_p = min(1.0, np.exp(min(lp_prop - log_post, 0.0)))
            if rng.random() < accept_p:
                z, log_post, params = z_prop, lp_prop, params_prop
                hit = 1.0
            else:
                hit = 0.0
            if it < config.burnin:
                window_acc[k] += hit
            else:
                post_acc[k] += hit
        if it < config.burnin:
            window_n += 1
            if window_n == config.adapt_window:
                adapt_round += 1
                rate = window_acc / window_n
                log_scales += (rate - config.target_accept) / np.sqrt(adapt_round)
                window_acc[:] = 0.0
                window_n = 0
        else:
            post_n += 1

        if it >= config.burnin and (it - config.burnin) % config.thin == 0:
            p_now = _to_params(z)
            store[kept] = (p_now.alpha, p_now.beta, p_now.mu, p_now.kappa, p_now.lambda_skew)
            if t_miss.size:
                theta_imp[kept] = theta[t_miss]
            if y_miss.size:
                y_imp[kept] = y[y_miss]
            kept += 1

    return AbeLeyDraws(
        alpha=store[:, 0],
        beta=store[:, 1],
        mu=store[:, 2],
        kappa=store[:, 3],
        lambda_skew=store[:, 4],
        accept_rate=post_acc / max(post_n, 1),
        theta_missing_index=t_miss,
        y_missing_index=y_miss,
        theta_imputed=theta_imp,
        y_imputed=y_imp,
        meta={"iterations": config.iterations, "burnin": config.burnin,
              "thin": config.thin, "seed": config.seed},
    )


def validate_partition(p, q, blocks):
    """Check that ``blocks`` partitions the circular and linear dimensions.

    ``blocks`` is a sequence of ``(circular_indices, linear_indices)`` pairs.
    """
    seen_c, seen_l = [], []
    for circ, lin in blocks:
        seen_c.extend(circ)
        seen_l.extend(lin)
    if sorted(seen_c) != list(range(p)) or sorted(seen_l) != list(range(q)):
        raise DomainError("blocks must partition the circular and linear dimensions exactly")


def fit_cylindrical_jpsn(data, blocks=None, priors=None, config=None):
    """Fit the joint model independently on each cylindrical block.

    ``blocks`` defaults to pairing circular i with linear i (requires p = q).
    Block k runs with seed ``config.seed + k``, so a single all-inclusive
    block reproduces a plain :func:`jpsn.mcmc.run_gibbs` run bit for bit.
    Returns one :class:`PosteriorDraws` per block; no cross-block parameters
    exist in the output.
    """
    if blocks is None:
        if data.p != data.q:
            raise DomainError("default pairing needs p == q; pass blocks explicitly")
        blocks = [((i,), (i,)) for i in range(data.p)]
    validate_partition(data.p, data.q, blocks)
    if config is None:
        config = ChainConfig(iterations=12000, burnin=8000, thin=2)
    out = []
    for k, (circ, lin) in enumerate(blocks):
        circ = list(circ)
        lin = list(lin)
        sub = PolyCylDataset(
            len(circ),
            len(lin),
            data.theta[:, circ],
            data.y[:, lin],
            data.theta_missing[:, circ],
            data.y_missing[:, lin],
        )
        prior = priors[k] if priors is not None else PriorSpec.default(sub.p, sub.q)
        cfg = ChainConfig(
            iterations=config.iterations,
            burnin=config.burnin,
            thin=config.thin,
            seed=config.seed + k,
            init=config.init,
            store_latents=config.store_latents,
        )
        out.append(run_gibbs(sub, prior, cfg))
    return out
