"""Command-line surface: simulate | fit | predict | score | summarize.

Configuration lives in a JSON file with five blocks (model, prior, chain,
scoring, io); command-line flags override file values, which override
defaults.  Every run writes a ``manifest.json`` with the fully resolved
configuration, seed, package version, and a hash of the configuration;
re-running with ``--config manifest.json`` reproduces the outputs byte for
byte.  All floats are written with ``repr`` so files round-trip exactly.

Exit codes: 0 success, 1 usage/configuration error, 2 data error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import copy
import csv
import hashlib
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from types import SimpleNamespace

import numpy as np

from . import __version__
from .baselines import AbeLeyPrior, MhConfig, fit_abeley_mh, fit_cylindrical_jpsn
from .core import PolyCylDataset, wrap_angle
from .dists import NiwParams
from .errors import (
    DomainError,
    InsufficientDataError,
    JpsnError,
    NumericalError,
    ParseError,
)
from .mcmc import ChainConfig, PriorSpec, ess, run_gibbs
from .model import JpsnParams, dependence_matrix, simulate_jpsn
from .scoring import abeley_fitter, compare_models, cylindrical_fitter, jpsn_fitter

__all__ = ["parse_dataset_csv", "write_dataset_csv", "dispatch", "main"]


class UsageError(JpsnError):
    """Bad flags or configuration; maps to exit code 1."""


# --------------------------------------------------------------------------
# configuration


_DEFAULTS = {
    "model": {"type": "jpsn", "p": None, "q": None, "params": None, "blocks": None},
    "prior": {
        "niw": {"mu0": 0.0, "kappa0": 0.001, "nu0": None, "psi0": 1.0},
        "lambda": {"mean": 0.0, "var": 100.0, "cov": None},
        "abeley": {"ig_shape": 1.0, "ig_scale": 1.0},
    },
    "chain": {
        "iterations": 12000,
        "burnin": 8000,
        "thin": 2,
        "seed": 0,
        "chains": 1,
        "mh_step": 0.2,
        "adapt_window": 25,
        "target_accept": 0.3,
    },
    "scoring": {"holdout_fraction": 0.1, "models": ["jpsn"], "mc_n": 4096},
    "io": {"data": None, "out": None, "latents": False, "n_obs": 500},
}


def _merge_checked(base, override, path=""):
    out = copy.deepcopy(base)
    for key, val in override.items():
        if key not in base:
            raise UsageError(f"unknown configuration key '{path}{key}'")
        if isinstance(base[key], dict) and isinstance(val, dict):
            out[key] = _merge_checked(base[key], val, f"{path}{key}.")
        else:
            out[key] = copy.deepcopy(val)
    return out


def load_config(path):
    """Read a JSON config file; a manifest is accepted via its 'config' field."""
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except FileNotFoundError as err:
        raise UsageError(f"config file not found: {path}") from err
    except json.JSONDecodeError as err:
        raise UsageError(f"config file is not valid JSON: {err}") from err
    if not isinstance(raw, dict):
        raise UsageError("config root must be a JSON object")
    if "config" in raw and "version" in raw:   # manifest
        raw = raw["config"]
    return _merge_checked(_DEFAULTS, raw)


def resolve_config(args):
    """defaults < config file < command-line flags."""
    cfg = load_config(args.config) if args.config else copy.deepcopy(_DEFAULTS)
    chain = cfg["chain"]
    for flag, key in (
        ("seed", "seed"),
        ("iterations", "iterations"),
        ("burnin", "burnin"),
        ("thin", "thin"),
        ("chains", "chains"),
    ):
        val = getattr(args, flag, None)
        if val is not None:
            chain[key] = val
    if getattr(args, "model", None):
        models = [m.strip() for m in args.model.split(",") if m.strip()]
        for m in models:
            if m not in ("jpsn", "cyl-jpsn", "abeley"):
                raise UsageError(f"unknown model '{m}'")
        cfg["model"]["type"] = models[0]
        cfg["scoring"]["models"] = models
    if getattr(args, "holdout_fraction", None) is not None:
        cfg["scoring"]["holdout_fraction"] = args.holdout_fraction
    if getattr(args, "data", None):
        cfg["io"]["data"] = args.data
    if getattr(args, "out", None):
        cfg["io"]["out"] = args.out
    if getattr(args, "n_obs", None) is not None:
        cfg["io"]["n_obs"] = args.n_obs
    if getattr(args, "latents", False):
        cfg["io"]["latents"] = True
    return cfg


def _as_vector(value, length, name):
    if np.isscalar(value):
        return np.full(length, float(value))
    arr = np.asarray(value, dtype=float).reshape(-1)
    if arr.shape[0] != length:
        raise UsageError(f"{name} must be a scalar or have length {length}")
    return arr


def _as_matrix(value, dim, name):
    if np.isscalar(value):
        return float(value) * np.eye(dim)
    arr = np.asarray(value, dtype=float)
    if arr.shape != (dim, dim):
        raise UsageError(f"{name} must be a scalar or a {dim}x{dim} matrix")
    return arr


def build_prior(p, q, prior_cfg):
    dim = 2 * p + q
    niw_cfg = prior_cfg["niw"]
    nu0 = niw_cfg["nu0"] if niw_cfg["nu0"] is not None else dim + 10
    niw = NiwParams(
        _as_vector(niw_cfg["mu0"], dim, "prior.niw.mu0"),
        float(niw_cfg["kappa0"]),
        float(nu0),
        _as_matrix(niw_cfg["psi0"], dim, "prior.niw.psi0"),
    )
    lam_cfg = prior_cfg["lambda"]
    if lam_cfg["cov"] is not None:
        lam_cov = _as_matrix(lam_cfg["cov"], q, "prior.lambda.cov")
    else:
        lam_cov = float(lam_cfg["var"]) * np.eye(q)
    return PriorSpec(niw, _as_vector(lam_cfg["mean"], q, "prior.lambda.mean"), lam_cov)


def build_model_params(model_cfg):
    if model_cfg["p"] is None or model_cfg["q"] is None:
        raise UsageError("model.p and model.q are required")
    p, q = int(model_cfg["p"]), int(model_cfg["q"])
    raw = model_cfg["params"]
    if raw is None:
        raise UsageError("model.params (mu, sigma, lambda) is required to simulate")
    try:
        return JpsnParams(
            p,
            q,
            np.asarray(raw["mu"], dtype=float),
            np.asarray(raw["sigma"], dtype=float),
            np.asarray(raw.get("lambda", np.zeros(q)), dtype=float),
        )
    except (KeyError, DomainError) as err:
        raise UsageError(f"bad model.params: {err}") from err


def parse_blocks(model_cfg):
    raw = model_cfg["blocks"]
    if raw is None:
        return None
    blocks = []
    for entry in raw:
        if isinstance(entry, dict):
            blocks.append((tuple(entry["circular"]), tuple(entry["linear"])))
        else:
            circ, lin = entry
            blocks.append((tuple(circ), tuple(lin)))
    return blocks


# --------------------------------------------------------------------------
# file formats


def _fmt(x):
    return repr(float(x))


def parse_dataset_csv(path):
    """Read a dataset CSV with header columns ``theta:<name>`` / ``y:<name>``.

    Cells are decimal numbers or the literal ``NA`` (missing).  Angles are
    reduced to [0, 2*pi); the number of out-of-range inputs is returned so
    callers can report it.

    Returns
    -------
    (PolyCylDataset, n_wrapped)
    """
    try:
        fh = open(path, encoding="utf-8", newline="")
    except FileNotFoundError as err:
        raise ParseError(f"data file not found: {path}") from err
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty file", line=1) from None
        kinds, names = [], []
        for col, label in enumerate(header):
            label = label.strip()
            if label.startswith("theta:"):
                kinds.append("theta")
            elif label.startswith("y:"):
                kinds.append("y")
            else:
                raise ParseError(
                    f"column {col + 1} header '{label}' must start with 'theta:' or 'y:'",
                    line=1,
                )
            names.append(label.split(":", 1)[1])
        theta_cols = [i for i, k in enumerate(kinds) if k == "theta"]
        y_cols = [i for i, k in enumerate(kinds) if k == "y"]

        rows, miss_rows = [], []
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ParseError(
                    f"expected {len(header)} cells, found {len(row)}", line=line_no
                )
            vals, miss = [], []
            for col, cell in enumerate(row):
                cell = cell.strip()
                if cell == "NA":
                    vals.append(0.0)
                    miss.append(True)
                    continue
                try:
                    vals.append(float(cell))
                except ValueError:
                    raise ParseError(
                        f"cell {col + 1} '{cell}' is not a number or NA", line=line_no
                    ) from None
                miss.append(False)
            rows.append(vals)
            miss_rows.append(miss)

    values = np.asarray(rows, dtype=float) if rows else np.zeros((0, len(header)))
    missing = np.asarray(miss_rows, dtype=bool) if rows else np.zeros((0, len(header)), bool)
    theta = values[:, theta_cols]
    out_of_range = (theta < 0) | (theta >= 2 * np.pi)
    n_wrapped = int(np.sum(out_of_range & ~missing[:, theta_cols]))
    data = PolyCylDataset(
        len(theta_cols),
        len(y_cols),
        wrap_angle(theta) if theta.size else theta,
        values[:, y_cols],
        missing[:, theta_cols],
        missing[:, y_cols],
        labels=[names[i] for i in theta_cols] + [names[i] for i in y_cols],
    )
    return data, n_wrapped


def write_dataset_csv(path, data):
    labels = data.labels or [f"c{i + 1}" for i in range(data.p)] + [
        f"l{j + 1}" for j in range(data.q)
    ]
    header = [f"theta:{labels[i]}" for i in range(data.p)] + [
        f"y:{labels[data.p + j]}" for j in range(data.q)
    ]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for t in range(data.n_obs):
            row = []
            for i in range(data.p):
                row.append("NA" if data.theta_missing[t, i] else _fmt(data.theta[t, i]))
            for j in range(data.q):
                row.append("NA" if data.y_missing[t, j] else _fmt(data.y[t, j]))
            writer.writerow(row)


def _sigma_columns(dim):
    return [f"sigma[{i + 1},{j + 1}]" for i in range(dim) for j in range(i, dim)]


def _draw_columns(p, q, identified):
    dim = 2 * p + q
    cols = ["draw"] + [f"mu[{k + 1}]" for k in range(dim)] + _sigma_columns(dim)
    cols += [f"lambda[{j + 1}]" for j in range(q)]
    if identified:
        cols += [f"c[{i + 1}]" for i in range(p)]
    return cols


def write_draws_csv(path, draws, identified):
    p, q = draws.p, draws.q
    dim = 2 * p + q
    iu = np.triu_indices(dim)
    mu = draws.mu_tilde if identified else draws.mu
    sigma = draws.sigma_tilde if identified else draws.sigma
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(_draw_columns(p, q, identified))
        for b in range(draws.n_draws):
            row = [str(b + 1)]
            row += [_fmt(v) for v in mu[b]]
            row += [_fmt(v) for v in sigma[b][iu]]
            row += [_fmt(v) for v in draws.lam[b]]
            if identified:
                row += [_fmt(v) for v in draws.c[b]]
            writer.writerow(row)


def read_draws_csv(path, meta):
    p, q = meta["p"], meta["q"]
    dim = 2 * p + q
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [list(map(float, row)) for row in reader]
    table = {name: np.array([r[k] for r in rows]) for k, name in enumerate(header)}
    n = len(rows)
    mu = np.column_stack([table[f"mu[{k + 1}]"] for k in range(dim)]) if n else np.zeros((0, dim))
    sigma = np.zeros((n, dim, dim))
    for i in range(dim):
        for j in range(i, dim):
            sigma[:, i, j] = sigma[:, j, i] = table[f"sigma[{i + 1},{j + 1}]"]
    lam = (
        np.column_stack([table[f"lambda[{j + 1}]"] for j in range(q)])
        if q
        else np.zeros((n, 0))
    )
    c = (
        np.column_stack([table[f"c[{i + 1}]"] for i in range(p)])
        if (p and "c[1]" in table)
        else np.zeros((n, p))
    )
    return mu, sigma, lam, c


def write_imputations_csv(path, draws, circ_map, lin_map):
    """Long-form imputation draws: draw, kind, t, dim, value (1-based)."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["draw", "kind", "t", "dim", "value"])
        t_idx = draws.theta_missing_index
        if t_idx is not None and len(t_idx):
            arr = np.asarray(t_idx)
            if arr.ndim == 1:
                arr = np.column_stack([arr, np.zeros(len(arr), dtype=int)])
            for b in range(draws.theta_imputed.shape[0]):
                for col, (t, i) in enumerate(arr):
                    writer.writerow(
                        [b + 1, "theta", t + 1, circ_map[int(i)] + 1,
                         _fmt(draws.theta_imputed[b, col])]
                    )
        y_idx = draws.y_missing_index
        if y_idx is not None and len(y_idx):
            arr = np.asarray(y_idx)
            if arr.ndim == 1:
                arr = np.column_stack([arr, np.zeros(len(arr), dtype=int)])
            for b in range(draws.y_imputed.shape[0]):
                for col, (t, j) in enumerate(arr):
                    writer.writerow(
                        [b + 1, "y", t + 1, lin_map[int(j)] + 1,
                         _fmt(draws.y_imputed[b, col])]
                    )


def write_manifest(out_dir, command, cfg):
    body = {"command": command, "config": cfg, "version": __version__}
    blob = json.dumps(body["config"], sort_keys=True).encode()
    body["config_sha256"] = hashlib.sha256(blob).hexdigest()
    body["seed"] = cfg["chain"]["seed"]
    with open(Path(out_dir) / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(body, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _write_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, sort_keys=True, indent=2)
        fh.write("\n")


# --------------------------------------------------------------------------
# subcommands


def _need_out(cfg):
    out = cfg["io"]["out"]
    if not out:
        raise UsageError("an output directory is required (--out or io.out)")
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _load_data(cfg):
    if not cfg["io"]["data"]:
        raise UsageError("a dataset path is required (--data or io.data)")
    data, n_wrapped = parse_dataset_csv(cfg["io"]["data"])
    if n_wrapped:
        print(f"note: {n_wrapped} angle cell(s) were outside [0, 2*pi) and were wrapped")
    return data


def cmd_simulate(cfg):
    out = _need_out(cfg)
    params = build_model_params(cfg["model"])
    rng = np.random.default_rng(cfg["chain"]["seed"])
    data, latents = simulate_jpsn(params, int(cfg["io"]["n_obs"]), rng)
    write_dataset_csv(out / "data.csv", data)
    if cfg["io"]["latents"]:
        with open(out / "latents.csv", "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(
                [f"r[{i + 1}]" for i in range(params.p)]
                + [f"d[{j + 1}]" for j in range(params.q)]
            )
            for t in range(data.n_obs):
                writer.writerow(
                    [_fmt(v) for v in latents.r[t]] + [_fmt(v) for v in latents.d[t]]
                )
    write_manifest(out, "simulate", cfg)
    print(f"wrote {data.n_obs} observations to {out / 'data.csv'}")
    return 0


def _chain_config(cfg, seed=None):
    chain = cfg["chain"]
    return ChainConfig(
        iterations=int(chain["iterations"]),
        burnin=int(chain["burnin"]),
        thin=int(chain["thin"]),
        seed=int(chain["seed"] if seed is None else seed),
    )


def _mh_config(cfg, seed=None):
    chain = cfg["chain"]
    return MhConfig(
        iterations=int(chain["iterations"]),
        burnin=int(chain["burnin"]),
        thin=int(chain["thin"]),
        seed=int(chain["seed"] if seed is None else seed),
        step_scales=(float(chain["mh_step"]),) * 5,
        adapt_window=int(chain["adapt_window"]),
        target_accept=float(chain["target_accept"]),
    )


def _fit_one_chain(cfg, data, out):
    model = cfg["model"]["type"]
    blocks = parse_blocks(cfg["model"])
    if model == "jpsn":
        prior = build_prior(data.p, data.q, cfg["prior"])
        draws = run_gibbs(data, prior, _chain_config(cfg))
        write_draws_csv(out / "draws_raw.csv", draws, identified=False)
        write_draws_csv(out / "draws_identified.csv", draws, identified=True)
        write_imputations_csv(
            out / "imputations.csv", draws, list(range(data.p)), list(range(data.q))
        )
        _write_json(
            out / "draws_meta.json",
            {
                "model": "jpsn",
                "p": data.p,
                "q": data.q,
                "n_draws": draws.n_draws,
                "global_circular": list(range(data.p)),
                "global_linear": list(range(data.q)),
                "columns": _draw_columns(data.p, data.q, identified=True),
            },
        )
        return
    if blocks is None:
        if data.p != data.q:
            raise UsageError("block models need model.blocks when p != q")
        blocks = [((i,), (i,)) for i in range(data.p)]
    if model == "cyl-jpsn":
        per_block = fit_cylindrical_jpsn(data, blocks, None, _chain_config(cfg))
        for k, (draws, (circ, lin)) in enumerate(zip(per_block, blocks)):
            bdir = out / f"block-{k + 1:02d}"
            bdir.mkdir(parents=True, exist_ok=True)
            write_draws_csv(bdir / "draws_raw.csv", draws, identified=False)
            write_draws_csv(bdir / "draws_identified.csv", draws, identified=True)
            write_imputations_csv(bdir / "imputations.csv", draws, list(circ), list(lin))
            _write_json(
                bdir / "draws_meta.json",
                {
                    "model": "cyl-jpsn",
                    "p": draws.p,
                    "q": draws.q,
                    "n_draws": draws.n_draws,
                    "global_circular": list(circ),
                    "global_linear": list(lin),
                    "columns": _draw_columns(draws.p, draws.q, identified=True),
                },
            )
        return
    if model == "abeley":
        ab_cfg = cfg["prior"]["abeley"]
        prior = AbeLeyPrior(float(ab_cfg["ig_shape"]), float(ab_cfg["ig_scale"]))
        for k, (circ, lin) in enumerate(blocks):
            if len(circ) != 1 or len(lin) != 1:
                raise UsageError("abeley blocks must pair one circular with one linear series")
            sub = PolyCylDataset(
                1,
                1,
                data.theta[:, list(circ)],
                data.y[:, list(lin)],
                data.theta_missing[:, list(circ)],
                data.y_missing[:, list(lin)],
            )
            draws = fit_abeley_mh(sub, prior, _mh_config(cfg, cfg["chain"]["seed"] + k))
            bdir = out / f"block-{k + 1:02d}"
            bdir.mkdir(parents=True, exist_ok=True)
            with open(bdir / "draws.csv", "w", encoding="utf-8", newline="") as fh:
                writer = csv.writer(fh, lineterminator="\n")
                writer.writerow(["draw", "alpha", "beta", "mu", "kappa", "lambda"])
                for b in range(draws.n_draws):
                    writer.writerow(
                        [b + 1]
                        + [
                            _fmt(v)
                            for v in (
                                draws.alpha[b],
                                draws.beta[b],
                                draws.mu[b],
                                draws.kappa[b],
                                draws.lambda_skew[b],
                            )
                        ]
                    )
            write_imputations_csv(bdir / "imputations.csv", draws, list(circ), list(lin))
            _write_json(
                bdir / "draws_meta.json",
                {
                    "model": "abeley",
                    "p": 1,
                    "q": 1,
                    "n_draws": draws.n_draws,
                    "global_circular": list(circ),
                    "global_linear": list(lin),
                    "columns": ["draw", "alpha", "beta", "mu", "kappa", "lambda"],
                },
            )
        return
    raise UsageError(f"unknown model '{model}'")


def _fit_chain_job(job):
    cfg, data, cdir = job
    _fit_one_chain(cfg, data, cdir)


def cmd_fit(cfg):
    out = _need_out(cfg)
    data = _load_data(cfg)
    n_chains = int(cfg["chain"]["chains"])
    if n_chains < 1:
        raise UsageError("chains must be >= 1")
    if n_chains == 1:
        _fit_one_chain(cfg, data, out)
    else:
        base_seed = int(cfg["chain"]["seed"])
        jobs = []
        for c in range(n_chains):
            sub_cfg = copy.deepcopy(cfg)
            sub_cfg["chain"]["seed"] = base_seed + c
            cdir = out / f"chain-{c + 1:02d}"
            cdir.mkdir(parents=True, exist_ok=True)
            jobs.append((sub_cfg, data, cdir))
        try:
            with ProcessPoolExecutor(max_workers=min(n_chains, 4)) as pool:
                list(pool.map(_fit_chain_job, jobs))
        except (OSError, PermissionError):
            # no subprocess support here; chains are independent either way
            for job in jobs:
                _fit_chain_job(job)
    write_manifest(out, "fit", cfg)
    print(f"fit complete; draws under {out}")
    return 0


def _iter_draw_dirs(root):
    root = Path(root)
    if (root / "draws_meta.json").exists():
        yield root
    for sub in sorted(root.glob("block-*")):
        if (sub / "draws_meta.json").exists():
            yield sub
    for sub in sorted(root.glob("chain-*")):
        yield from _iter_draw_dirs(sub)


def cmd_predict(cfg, draws_dir):
    out = _need_out(cfg)
    records = {}
    found = False
    for ddir in _iter_draw_dirs(draws_dir):
        imp = ddir / "imputations.csv"
        if not imp.exists():
            continue
        found = True
        with open(imp, encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            next(reader)
            for row in reader:
                key = (row[1], int(row[2]), int(row[3]))
                records.setdefault(key, []).append(float(row[4]))
    if not found:
        raise ParseError(f"no draws with imputations found under {draws_dir}")
    with open(out / "predictions.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["kind", "t", "dim", "mean", "lo95", "hi95", "n_draws"])
        for (kind, t, dim), vals in sorted(records.items()):
            arr = np.asarray(vals)
            writer.writerow(
                [kind, t, dim, _fmt(arr.mean()), _fmt(np.quantile(arr, 0.025)),
                 _fmt(np.quantile(arr, 0.975)), len(vals)]
            )
    write_manifest(out, "predict", cfg)
    print(f"wrote {out / 'predictions.csv'}")
    return 0


def cmd_score(cfg):
    out = _need_out(cfg)
    data = _load_data(cfg)
    rng = np.random.default_rng(int(cfg["chain"]["seed"]))
    blocks = parse_blocks(cfg["model"])
    if (
        blocks is None
        and data.p != data.q
        and any(m in cfg["scoring"]["models"] for m in ("cyl-jpsn", "abeley"))
    ):
        raise UsageError("block models need model.blocks when p != q")
    chain_cfg = _chain_config(cfg)
    prior = build_prior(data.p, data.q, cfg["prior"])
    fitters = {}
    for name in cfg["scoring"]["models"]:
        if name == "jpsn":
            fitters[name] = jpsn_fitter(prior, chain_cfg)
        elif name == "cyl-jpsn":
            fitters[name] = cylindrical_fitter(blocks, None, chain_cfg)
        elif name == "abeley":
            ab = cfg["prior"]["abeley"]
            fitters[name] = abeley_fitter(
                blocks, AbeLeyPrior(float(ab["ig_shape"]), float(ab["ig_scale"])), _mh_config(cfg)
            )
        else:
            raise UsageError(f"unknown model '{name}' in scoring.models")
    table = compare_models(data, float(cfg["scoring"]["holdout_fraction"]), fitters, rng)
    with open(out / "scores.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["model", "CRPS_circular", "CRPS_linear"])
        for row in table.rows:
            writer.writerow([row.model, _fmt(row.crps_circular), _fmt(row.crps_linear)])
    _write_json(
        out / "scores.json",
        {
            row.model: {"CRPS_circular": row.crps_circular, "CRPS_linear": row.crps_linear}
            for row in table.rows
        },
    )
    with open(out / "per_entry.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["model", "kind", "t", "dim", "crps"])
        for model, entries in table.per_entry.items():
            for (kind, t, dim), score in sorted(entries.items()):
                writer.writerow([model, kind, t + 1, dim + 1, _fmt(score)])
    write_manifest(out, "score", cfg)
    for row in table.rows:
        print(f"{row.model}: circular {row.crps_circular:.4f}, linear {row.crps_linear:.4f}")
    return 0


def cmd_summarize(cfg, draws_dir):
    out = _need_out(cfg)
    ddirs = list(_iter_draw_dirs(draws_dir))
    if not ddirs:
        raise ParseError(f"no draws found under {draws_dir}")
    summary_rows = []
    dep_payload = {}
    for ddir in ddirs:
        with open(ddir / "draws_meta.json", encoding="utf-8") as fh:
            meta = json.load(fh)
        label = str(ddir.relative_to(draws_dir)) if ddir != Path(draws_dir) else "."
        if meta["model"] == "abeley":
            with open(ddir / "draws.csv", encoding="utf-8", newline="") as fh:
                reader = csv.reader(fh)
                header = next(reader)
                rows = [list(map(float, r)) for r in reader]
            arr = np.asarray(rows)
            for k, name in enumerate(header[1:], start=1):
                chain = arr[:, k]
                summary_rows.append((label, name, chain))
            continue
        mu, sigma, lam, c = read_draws_csv(ddir / "draws_identified.csv", meta)
        p, q = meta["p"], meta["q"]
        dim = 2 * p + q
        for k in range(dim):
            summary_rows.append((label, f"mu[{k + 1}]", mu[:, k]))
        for i in range(dim):
            for j in range(i, dim):
                summary_rows.append((label, f"sigma[{i + 1},{j + 1}]", sigma[:, i, j]))
        for j in range(q):
            summary_rows.append((label, f"lambda[{j + 1}]", lam[:, j]))
        for i in range(p):
            summary_rows.append((label, f"c[{i + 1}]", c[:, i]))

        view = SimpleNamespace(p=p, q=q, mu_tilde=mu, sigma_tilde=sigma, lam=lam)
        dep = dependence_matrix(
            view,
            mc_n=int(cfg["scoring"]["mc_n"]),
            rng=np.random.default_rng(int(cfg["chain"]["seed"])),
        )
        dep_payload[label] = {
            "order": (meta.get("global_circular", list(range(p))),
                      meta.get("global_linear", list(range(q)))),
            "mean": dep.mean.tolist(),
            "lo95": dep.lo.tolist(),
            "hi95": dep.hi.tolist(),
            "flagged": dep.flagged.astype(int).tolist(),
        }

    with open(out / "summary.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["source", "parameter", "mean", "lo95", "hi95", "ess"])
        for label, name, chain in summary_rows:
            try:
                chain_ess = _fmt(ess(chain))
            except DomainError:
                chain_ess = "NA"
            writer.writerow(
                [label, name, _fmt(chain.mean()), _fmt(np.quantile(chain, 0.025)),
                 _fmt(np.quantile(chain, 0.975)), chain_ess]
            )
    if dep_payload:
        _write_json(out / "dependence.json", dep_payload)
        with open(out / "dependence.csv", "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["source", "row", "col", "mean", "lo95", "hi95", "flagged"])
            for label, payload in dep_payload.items():
                mean = np.asarray(payload["mean"])
                for i in range(mean.shape[0]):
                    for j in range(mean.shape[1]):
                        writer.writerow(
                            [label, i + 1, j + 1, _fmt(mean[i, j]),
                             _fmt(payload["lo95"][i][j]), _fmt(payload["hi95"][i][j]),
                             payload["flagged"][i][j]]
                        )
    write_manifest(out, "summarize", cfg)
    print(f"wrote {out / 'summary.csv'}")
    return 0


# --------------------------------------------------------------------------
# argument parsing and dispatch


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def build_parser():
    parser = _Parser(prog="jpsn", description=__doc__)
    sub = parser.add_subparsers(dest="command")

    def add_common(sp):
        sp.add_argument("--config", help="JSON configuration file (or a manifest)")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out", help="output directory")

    sp = sub.add_parser("simulate", help="simulate a dataset from given parameters")
    add_common(sp)
    sp.add_argument("--n-obs", type=int, help="number of observations")
    sp.add_argument("--latents", action="store_true", help="also write the true latents")

    sp = sub.add_parser("fit", help="fit a model and write posterior draws")
    add_common(sp)
    sp.add_argument("--data", help="dataset CSV")
    sp.add_argument("--model", help="jpsn | cyl-jpsn | abeley")
    sp.add_argument("--iterations", type=int)
    sp.add_argument("--burnin", type=int)
    sp.add_argument("--thin", type=int)
    sp.add_argument("--chains", type=int)

    sp = sub.add_parser("predict", help="summarize imputation draws for masked entries")
    add_common(sp)
    sp.add_argument("--draws", required=True, help="directory written by fit")

    sp = sub.add_parser("score", help="holdout CRPS comparison of models")
    add_common(sp)
    sp.add_argument("--data", help="dataset CSV with the true values")
    sp.add_argument("--model", help="comma-separated list: jpsn,cyl-jpsn,abeley")
    sp.add_argument("--holdout-fraction", type=float)
    sp.add_argument("--iterations", type=int)
    sp.add_argument("--burnin", type=int)
    sp.add_argument("--thin", type=int)

    sp = sub.add_parser("summarize", help="posterior summaries and dependence matrix")
    add_common(sp)
    sp.add_argument("--draws", required=True, help="directory written by fit")
    return parser


def dispatch(argv):
    """Run one subcommand; returns the process exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not args.command:
            parser.print_usage(sys.stderr)
            return 1
        cfg = resolve_config(args)
        if args.command == "simulate":
            return cmd_simulate(cfg)
        if args.command == "fit":
            return cmd_fit(cfg)
        if args.command == "predict":
            return cmd_predict(cfg, args.draws)
        if args.command == "score":
            return cmd_score(cfg)
        if args.command == "summarize":
            return cmd_summarize(cfg, args.draws)
        parser.print_usage(sys.stderr)
        return 1
    except UsageError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except (ParseError, InsufficientDataError, DomainError) as err:
        print(f"data error: {err}", file=sys.stderr)
        return 2
    except NumericalError as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return 3


def main():
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
