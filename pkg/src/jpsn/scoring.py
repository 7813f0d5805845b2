"""Holdout construction, CRPS for circular and linear predictions, and the
model-comparison harness.

Scores use the sample (energy-form) CRPS: mean distance from the truth to
the predictive draws minus half the mean pairwise distance among draws, with
the shortest-arc angular distance on the circle and the absolute difference
on the line.  Lower is better; a perfect point mass on the truth scores 0.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .core import angular_distance
from .errors import DomainError

__all__ = [
    "HoldoutPlan",
    "AnswerKey",
    "holdout_split",
    "crps_circular",
    "crps_linear",
    "PredictiveDraws",
    "ScoreRow",
    "ScoreTable",
    "compare_models",
    "jpsn_fitter",
    "cylindrical_fitter",
    "abeley_fitter",
]


@dataclass(frozen=True)
class HoldoutPlan:
    """Per-entry masks drawn independently at a target fraction."""

    theta_mask: np.ndarray
    y_mask: np.ndarray
    fraction: float
    seed: int = None


@dataclass(frozen=True)
class AnswerKey:
    """True values of the masked entries, keyed by (row, dimension)."""

    theta_index: np.ndarray   # (n_mt, 2)
    theta_truth: np.ndarray
    y_index: np.ndarray       # (n_my, 2)
    y_truth: np.ndarray
    plan: HoldoutPlan = None


def holdout_split(data, fraction, rng):
    """Mask each scalar entry independently with the given probability.

    ``rng`` may be a Generator or an integer seed.  Entries already missing
    in the input are never selected (there is no truth to score them
    against).  Returns ``(masked_dataset, answer_key)``; masked entries have
    their stored values zeroed and their missing flags set, and a warning is
    emitted if nothing ends up masked.
    """
    if not 0.0 < fraction < 1.0:
        raise DomainError("fraction must lie strictly between 0 and 1")
    seed = None
    if isinstance(rng, (int, np.integer)):
        seed = int(rng)
        rng = np.random.default_rng(seed)
    masked = data.copy()
    pick_theta = (rng.random(data.theta.shape) < fraction) & ~data.theta_missing
    pick_y = (rng.random(data.y.shape) < fraction) & ~data.y_missing
    theta_index = np.argwhere(pick_theta)
    y_index = np.argwhere(pick_y)
    if theta_index.size == 0 and y_index.size == 0:
        warnings.warn("holdout fraction selected no entries on this dataset", stacklevel=2)
    key = AnswerKey(
        theta_index,
        data.theta[pick_theta].copy(),
        y_index,
        data.y[pick_y].copy(),
        HoldoutPlan(pick_theta, pick_y, fraction, seed),
    )
    masked.theta[pick_theta] = 0.0
    masked.y[pick_y] = 0.0
    masked.theta_missing = data.theta_missing | pick_theta
    masked.y_missing = data.y_missing | pick_y
    return masked, key


def crps_circular(truth, draws):
    """Sample CRPS of angle draws against a true angle, using arc distance."""
    draws = np.asarray(draws, dtype=float).reshape(-1)
    if draws.size == 0:
        raise DomainError("need at least one predictive draw")
    term1 = angular_distance(float(truth), draws).mean()
    pair = angular_distance(draws[:, None], draws[None, :])
    return float(term1 - 0.5 * pair.mean())


def crps_linear(truth, draws):
    """Sample CRPS of real draws against a true value (sorted O(B log B) form)."""
    draws = np.asarray(draws, dtype=float).reshape(-1)
    n = draws.size
    if n == 0:
        raise DomainError("need at least one predictive draw")
    term1 = np.abs(draws - float(truth)).mean()
    srt = np.sort(draws)
    # sum_{b,b'} |x_b - x_b'| = 2 * sum_k (2k - n + 1) x_(k),  k = 0..n-1;
    # the weights sum to zero, so shifting by x_(0) only removes roundoff
    weights = 2.0 * np.arange(n) - n + 1.0
    pair_sum = 2.0 * float(weights @ (srt - srt[0]))
    return float(term1 - 0.5 * pair_sum / (n * n))


@dataclass
class PredictiveDraws:
    """Posterior-predictive draws for masked entries, keyed by (row, dim)."""

    theta: dict = field(default_factory=dict)
    y: dict = field(default_factory=dict)


@dataclass(frozen=True)
class ScoreRow:
    model: str
    crps_circular: float
    crps_linear: float


@dataclass
class ScoreTable:
    """Per-model mean scores plus the per-entry breakdown."""

    rows: list
    per_entry: dict   # model -> {("theta", t, i) | ("y", t, j): score}


def compare_models(data, fraction, fitters, rng, plan=None):
    """Mask a holdout set, fit every model on the masked data, score all.

    Parameters
    ----------
    data : PolyCylDataset with the true values.
    fraction : float, per-entry masking probability (ignored if ``plan``).
    fitters : dict name -> callable(masked_data, seed) -> PredictiveDraws.
    rng : numpy Generator driving the mask and the per-model seeds.
    plan : optional (masked_data, AnswerKey) pair to reuse a fixed split.

    Returns
    -------
    ScoreTable with one row per fitted model, columns (model,
    CRPS_circular, CRPS_linear), and per-entry scores.
    """
    if not fitters:
        raise DomainError("need at least one model fitter")
    if plan is None:
        masked, key = holdout_split(data, fraction, rng)
    else:
        masked, key = plan
    rows = []
    per_entry = {}
    for name, fitter in fitters.items():
        seed = int(rng.integers(2**31 - 1))
        try:
            preds = fitter(masked, seed)
        except Exception as err:
            raise type(err)(f"model '{name}': {err}") from err
        entry_scores = {}
        circ_scores = []
        for (t, i), truth in zip(key.theta_index, key.theta_truth):
            s = crps_circular(truth, preds.theta[(int(t), int(i))])
            entry_scores[("theta", int(t), int(i))] = s
            circ_scores.append(s)
        lin_scores = []
        for (t, j), truth in zip(key.y_index, key.y_truth):
            s = crps_linear(truth, preds.y[(int(t), int(j))])
            entry_scores[("y", int(t), int(j))] = s
            lin_scores.append(s)
        rows.append(
            ScoreRow(
                name,
                float(np.mean(circ_scores)) if circ_scores else np.nan,
                float(np.mean(lin_scores)) if lin_scores else np.nan,
            )
        )
        per_entry[name] = entry_scores
    return ScoreTable(rows, per_entry)


def _draws_to_predictive(draws_list):
    """Collect imputation draws from PosteriorDraws/AbeLeyDraws-like objects.

    Each element is a pair ``(draws, (circ_map, lin_map))`` where the maps
    translate block-local dimension indices to global ones.
    """
    def _pairs(idx):
        arr = np.asarray(idx)
        if arr.ndim == 1:   # bare row indices (AbeLeyDraws)
            arr = np.column_stack([arr, np.zeros(len(arr), dtype=int)])
        return arr

    out = PredictiveDraws()
    for draws, (circ_map, lin_map) in draws_list:
        t_idx = draws.theta_missing_index
        if t_idx is not None and len(t_idx):
            for col, (t, i) in enumerate(_pairs(t_idx)):
                out.theta[(int(t), circ_map[int(i)])] = draws.theta_imputed[:, col]
        y_idx = draws.y_missing_index
        if y_idx is not None and len(y_idx):
            for col, (t, j) in enumerate(_pairs(y_idx)):
                out.y[(int(t), lin_map[int(j)])] = draws.y_imputed[:, col]
    return out


def jpsn_fitter(prior=None, config=None):
    """Fitter adapter for the full joint model."""
    from .mcmc import ChainConfig, run_gibbs

    def fit(masked_data, seed):
        cfg = config if config is not None else ChainConfig(iterations=4000, burnin=2000, thin=2)
        cfg = ChainConfig(cfg.iterations, cfg.burnin, cfg.thin, seed, cfg.init, cfg.store_latents)
        draws = run_gibbs(masked_data, prior, cfg)
        ident = (list(range(masked_data.p)), list(range(masked_data.q)))
        return _draws_to_predictive([(draws, ident)])

    return fit


def cylindrical_fitter(blocks=None, priors=None, config=None):
    """Fitter adapter for the independence-structured blockwise model."""
    from .baselines import fit_cylindrical_jpsn
    from .mcmc import ChainConfig

    def fit(masked_data, seed):
        cfg = config if config is not None else ChainConfig(iterations=4000, burnin=2000, thin=2)
        cfg = ChainConfig(cfg.iterations, cfg.burnin, cfg.thin, seed, cfg.init, cfg.store_latents)
        blks = blocks
        if blks is None:
            if masked_data.p != masked_data.q:
                raise DomainError("default block pairing needs p == q; pass blocks explicitly")
            blks = [((i,), (i,)) for i in range(masked_data.p)]
        per_block = fit_cylindrical_jpsn(masked_data, blks, priors, cfg)
        return _draws_to_predictive(
            [(d, (list(c), list(l))) for d, (c, l) in zip(per_block, blks)]
        )

    return fit


def abeley_fitter(blocks=None, prior=None, config=None):
    """Fitter adapter running the Abe-Ley baseline on each cylindrical block."""
    from .baselines import MhConfig, fit_abeley_mh, validate_partition
    from .core import PolyCylDataset

    def fit(masked_data, seed):
        blks = blocks
        if blks is None:
            if masked_data.p != masked_data.q:
                raise DomainError("default block pairing needs p == q; pass blocks explicitly")
            blks = [((i,), (i,)) for i in range(masked_data.p)]
        validate_partition(masked_data.p, masked_data.q, blks)
        collected = []
        for k, (circ, lin) in enumerate(blks):
            if len(circ) != 1 or len(lin) != 1:
                raise DomainError("Abe-Ley blocks must pair one circular with one linear series")
            sub = PolyCylDataset(
                1,
                1,
                masked_data.theta[:, list(circ)],
                masked_data.y[:, list(lin)],
                masked_data.theta_missing[:, list(circ)],
                masked_data.y_missing[:, list(lin)],
            )
            cfg = config if config is not None else MhConfig(iterations=6000, burnin=3000)
            cfg = MhConfig(
                cfg.iterations, cfg.burnin, cfg.thin, seed + k,
                cfg.step_scales, cfg.adapt_window, cfg.target_accept,
            )
            collected.append((fit_abeley_mh(sub, prior, cfg), ([circ[0]], [lin[0]])))
        return _draws_to_predictive(collected)

    return fit
