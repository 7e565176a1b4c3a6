"""Experiment orchestration: strict config parsing, run -> artifacts on disk,
post-hoc diagnosis of stored chains, and side-by-side comparison tables.

Every run directory is self-describing: the manifest plus config echo suffice
to reproduce it exactly (chain files are byte-identical under a fixed seed).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import yaml

from .core import DecompProblem, Grid, RngHandle, Signal, add_noise, save_signal
from .diagnostics import (autocorrelation, chain_stats, relative_error,
                          save_acf, save_chain_stats)
from .operators import make_gaussian_kernel
from .phantoms import PhantomSpec, generate_phantom
from .priors import BesovParams
from .samplers import (ChainStore, GibbsConfig, HierGaussHypers,
                       SingleBesovPosterior, TwoBesovHypers, TwoBesovPosterior,
                       gibbs_gaussian_besov, gibbs_two_besov, nuts_sample)
from .wavelet import daubechies_filters


class ConfigError(ValueError):
    """Raised on malformed experiment configuration."""


EXPERIMENT_KINDS = (
    "two_besov_nuts", "single_besov_nuts", "hier_gaussian_besov", "hier_two_besov",
)

_PRIOR_KEYS_FIXED = ("wavelet_order", "s", "p", "lam")
_PRIOR_KEYS_HIER = ("wavelet_order", "s")


def _require_keys(block: dict, required: tuple, where: str, optional: tuple = ()):
    if not isinstance(block, dict):
        raise ConfigError(f"{where} must be a mapping")
    unknown = set(block) - set(required) - set(optional)
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")
    missing = set(required) - set(block)
    if missing:
        raise ConfigError(f"missing keys in {where}: {sorted(missing)}")


@dataclass(frozen=True)
class ExperimentConfig:
    """Parsed, validated experiment description (see configs/ for examples)."""

    kind: str
    grid: Grid
    kernel_sigma: float
    noise_level: float
    phantom: PhantomSpec
    priors: dict          # name -> dict of prior-block numbers
    hypers: Optional[dict]
    sampler: dict         # n_samples, burn_in, thin, seed, method extras
    acf_coordinate: Optional[int]
    raw: dict = field(repr=False, default_factory=dict)

    @staticmethod
    def from_dict(cfg: dict) -> "ExperimentConfig":
        _require_keys(
            cfg,
            ("experiment", "grid", "kernel_sigma", "noise_level", "phantom",
             "prior", "sampler"),
            "config", optional=("output",),
        )
        kind = cfg["experiment"]
        if kind not in EXPERIMENT_KINDS:
            raise ConfigError(
                f"experiment must be one of {EXPERIMENT_KINDS}, got {kind!r}"
            )
        _require_keys(cfg["grid"], ("d", "J"), "grid")
        grid = Grid(d=int(cfg["grid"]["d"]), J=int(cfg["grid"]["J"]))

        _require_keys(cfg["phantom"], ("kind", "seed"), "phantom",
                      optional=("jumps", "bumps", "rects"))
        ph = cfg["phantom"]
        phantom = PhantomSpec(
            kind=ph["kind"], grid=grid, seed=int(ph["seed"]),
            jumps=[tuple(j) for j in ph["jumps"]] if ph.get("jumps") else None,
            bumps=[tuple(b) for b in ph["bumps"]] if ph.get("bumps") else None,
            rects=[tuple(r) for r in ph["rects"]] if ph.get("rects") else None,
        )

        prior = cfg["prior"]
        hypers = None
        if kind == "two_besov_nuts":
            _require_keys(prior, ("g", "h"), "prior")
            for name in ("g", "h"):
                _require_keys(prior[name], _PRIOR_KEYS_FIXED, f"prior.{name}")
            priors = {"g": dict(prior["g"]), "h": dict(prior["h"])}
        elif kind == "single_besov_nuts":
            _require_keys(prior, ("f",), "prior")
            _require_keys(prior["f"], _PRIOR_KEYS_FIXED, "prior.f")
            priors = {"f": dict(prior["f"])}
        elif kind == "hier_gaussian_besov":
            _require_keys(prior, ("h", "hypers"), "prior")
            _require_keys(prior["h"], _PRIOR_KEYS_HIER, "prior.h")
            _require_keys(prior["hypers"], ("alpha1", "beta1", "alpha2", "beta2"),
                          "prior.hypers")
            priors = {"h": dict(prior["h"])}
            hypers = dict(prior["hypers"])
        else:  # hier_two_besov
            _require_keys(prior, ("g", "h", "hypers"), "prior")
            for name in ("g", "h"):
                _require_keys(prior[name], _PRIOR_KEYS_HIER, f"prior.{name}")
            _require_keys(prior["hypers"], ("a1", "b1", "a2", "b2"), "prior.hypers")
            priors = {"g": dict(prior["g"]), "h": dict(prior["h"])}
            hypers = dict(prior["hypers"])

        samp = cfg["sampler"]
        if kind.endswith("nuts"):
            _require_keys(samp, ("n_samples", "burn_in", "thin", "seed"),
                          "sampler", optional=("max_tree_depth", "target_accept"))
        else:
            _require_keys(samp, ("n_samples", "burn_in", "thin", "seed"),
                          "sampler", optional=("cgls_tol", "cgls_max_iter"))

        acf_coord = None
        if "output" in cfg:
            _require_keys(cfg["output"], (), "output", optional=("acf_coordinate",))
            if cfg["output"].get("acf_coordinate") is not None:
                acf_coord = int(cfg["output"]["acf_coordinate"])

        return ExperimentConfig(
            kind=kind, grid=grid,
            kernel_sigma=float(cfg["kernel_sigma"]),
            noise_level=float(cfg["noise_level"]),
            phantom=phantom, priors=priors, hypers=hypers,
            sampler=dict(samp), acf_coordinate=acf_coord, raw=cfg,
        )

    @staticmethod
    def from_yaml(path: str | Path) -> "ExperimentConfig":
        cfg = yaml.safe_load(Path(path).read_text())
        if not isinstance(cfg, dict):
            raise ConfigError("config file must hold a mapping")
        return ExperimentConfig.from_dict(cfg)


def _besov_params(block: dict, grid: Grid, fixed_p: Optional[float] = None) -> BesovParams:
    basis = daubechies_filters(int(block["wavelet_order"]))
    p = float(block["p"]) if fixed_p is None else fixed_p
    lam = float(block["lam"]) if "lam" in block else 1.0
    return BesovParams(s=float(block["s"]), p=p, lam=lam, basis=basis, grid=grid)


def run_experiment(
    config: ExperimentConfig,
    out_dir: str | Path,
    seed_override: Optional[int] = None,
    n_chains: int = 1,
) -> dict:
    """Generate data, run the configured sampler, and write all artifacts.

    With ``n_chains > 1``, replicate chains run on disjoint RNG streams into
    ``chain_XX`` subdirectories.  Returns the (last chain's) summary dict.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    seed = int(config.sampler["seed"] if seed_override is None else seed_override)
    master = RngHandle(seed=seed)
    t_start = time.perf_counter()

    manifest = {
        "config": _plain(config.raw),
        "seed": seed,
        "streams": {"noise": 1, "chains": [2 + c for c in range(n_chains)]},
        "complete": False,
        "warnings": [],
    }
    _write_manifest(out_dir, manifest)

    g_true, h_true, f_true = generate_phantom(config.phantom)
    conv = make_gaussian_kernel(config.grid, config.kernel_sigma)
    if conv.degenerate:
        manifest["warnings"].append(
            "degenerate blur kernel (support < 3 points): using identity"
        )
    clean = conv.apply_values(f_true.values)
    noisy, sigma = add_noise(clean, config.noise_level, master.stream(1))
    problem = DecompProblem(
        grid=config.grid, kernel_sigma=config.kernel_sigma,
        noise_sigma=sigma, data=noisy, truth=f_true,
    )
    manifest["sigma"] = sigma
    if config.grid.d == 2:
        manifest["kernel_sigma_units"] = (
            f"domain units ({config.kernel_sigma * config.grid.n_side:g} pixels)"
        )

    phantom_meta = {"phantom_seed": config.phantom.seed, "kind": config.phantom.kind}
    save_signal(out_dir / "g_true.txt", g_true, phantom_meta)
    save_signal(out_dir / "h_true.txt", h_true, phantom_meta)
    save_signal(out_dir / "f_true.txt", f_true, phantom_meta)
    save_signal(out_dir / "data.txt", Signal(grid=config.grid, values=noisy),
                {"seed": seed, "noise_level": config.noise_level, "sigma": sigma})

    summary = None
    for c in range(n_chains):
        chain_rng = master.stream(2 + c)
        chain_dir = out_dir if n_chains == 1 else out_dir / f"chain_{c:02d}"
        store = _dispatch_sampler(config, problem, chain_rng)
        store.meta["seed"] = seed
        store.meta["stream_id"] = 2 + c
        store.save(chain_dir / "chains")
        summary = diagnose(chain_dir, truth=f_true,
                           acf_coordinate=config.acf_coordinate)
    manifest["complete"] = True
    manifest["runtime_s"] = time.perf_counter() - t_start
    _write_manifest(out_dir, manifest)
    return summary


def _dispatch_sampler(config: ExperimentConfig, problem: DecompProblem,
                      rng: RngHandle) -> ChainStore:
    samp = config.sampler
    grid = config.grid
    if config.kind == "two_besov_nuts":
        post = TwoBesovPosterior(
            problem,
            _besov_params(config.priors["g"], grid),
            _besov_params(config.priors["h"], grid),
        )
        return nuts_sample(
            post, int(samp["n_samples"]), int(samp["burn_in"]), rng,
            thin=int(samp["thin"]),
            max_tree_depth=int(samp.get("max_tree_depth", 10)),
            target_accept=float(samp.get("target_accept", 0.8)),
        )
    if config.kind == "single_besov_nuts":
        post = SingleBesovPosterior(problem, _besov_params(config.priors["f"], grid))
        return nuts_sample(
            post, int(samp["n_samples"]), int(samp["burn_in"]), rng,
            thin=int(samp["thin"]),
            max_tree_depth=int(samp.get("max_tree_depth", 10)),
            target_accept=float(samp.get("target_accept", 0.8)),
        )
    if config.kind == "hier_gaussian_besov":
        hyp = HierGaussHypers(**{k: float(v) for k, v in config.hypers.items()})
        gc = GibbsConfig(
            n_samples=int(samp["n_samples"]), burn_in=int(samp["burn_in"]),
            thin=int(samp["thin"]), seed=int(samp["seed"]), hypers=hyp,
            cgls_tol=float(samp.get("cgls_tol", 1e-8)),
            cgls_max_iter=int(samp.get("cgls_max_iter", 200)),
        )
        params_h = _besov_params(config.priors["h"], grid, fixed_p=2.0)
        return gibbs_gaussian_besov(problem, params_h, gc, rng)
    hyp = TwoBesovHypers(**{k: float(v) for k, v in config.hypers.items()})
    gc = GibbsConfig(
        n_samples=int(samp["n_samples"]), burn_in=int(samp["burn_in"]),
        thin=int(samp["thin"]), seed=int(samp["seed"]), hypers=hyp,
        cgls_tol=float(samp.get("cgls_tol", 1e-8)),
        cgls_max_iter=int(samp.get("cgls_max_iter", 200)),
    )
    params_g = _besov_params(config.priors["g"], grid, fixed_p=2.0)
    params_h = _besov_params(config.priors["h"], grid, fixed_p=2.0)
    return gibbs_two_besov(problem, params_g, params_h, gc, rng)


def diagnose(
    run_dir: str | Path,
    truth: Optional[Signal] = None,
    level: float = 0.95,
    acf_coordinate: Optional[int] = None,
    max_lag: int = 100,
) -> dict:
    """Recompute stats files from the stored chains of a run directory.

    Deterministic: rerunning with the same options reproduces the stats files
    byte for byte.  Returns the summary dict (also written to summary.yaml).
    """
    run_dir = Path(run_dir)
    store = ChainStore.load(run_dir / "chains")
    from .core import load_signal  # local import to avoid cycle at module load

    if truth is None and (run_dir / "f_true.txt").exists():
        truth = load_signal(run_dir / "f_true.txt")
    grid = truth.grid if truth is not None else None

    samples = dict(store.samples)
    if "g" in samples and "h" in samples:
        samples["f"] = samples["g"] + samples["h"]

    stats_dir = run_dir / "stats"
    stats_dir.mkdir(parents=True, exist_ok=True)
    summary: dict = {
        "sampler": store.meta.get("sampler"),
        "runtime_s": store.meta.get("wall_time_s"),
        "level": level,
    }
    for key in ("divergences", "cgls_nonconverged", "step_size", "mean_tree_depth",
                "seed", "stream_id"):
        if key in store.meta:
            summary[key] = store.meta[key]

    signal_vars = [v for v in ("g", "h", "f") if v in samples]
    hyper_vars = [v for v in samples if v not in ("g", "h", "f")]
    for name in signal_vars:
        st = chain_stats(samples[name], level=level)
        save_chain_stats(stats_dir / f"stats_{name}.csv", st)
        if grid is not None:
            save_signal(run_dir / f"mean_{name}.txt",
                        Signal(grid=grid, values=st.mean), {"variable": name})
            save_signal(run_dir / f"ci_width_{name}.txt",
                        Signal(grid=grid, values=st.ci_width), {"variable": name})
        if name == "f":
            summary["ess_f"] = st.ess_summary()
    for name in hyper_vars:
        arr = samples[name]
        mat = arr[:, None] if arr.ndim == 1 else arr
        st = chain_stats(mat, level=level)
        save_chain_stats(stats_dir / f"stats_{name}.csv", st)
        summary[f"ess_{name}"] = st.ess_summary()

    coord = acf_coordinate
    if coord is None and grid is not None:
        coord = grid.n // 2
    target = "f" if "f" in samples else signal_vars[0] if signal_vars else None
    if target is not None and coord is not None:
        chain = samples[target][:, coord]
        lag = min(max_lag, chain.size - 1)
        if np.ptp(chain) > 0:
            save_acf(stats_dir / f"acf_{target}.txt", chain, lag)
            summary["acf_coordinate"] = int(coord)
    for name in hyper_vars:
        arr = samples[name]
        chain = arr if arr.ndim == 1 else arr[:, arr.shape[1] // 2]
        lag = min(max_lag, chain.size - 1)
        if np.ptp(chain) > 0:
            save_acf(stats_dir / f"acf_{name}.txt", chain, lag)

    if truth is not None and "f" in samples:
        est = Signal(grid=truth.grid, values=samples["f"].mean(axis=0))
        summary["relative_error"] = relative_error(est, truth)
    elif truth is not None and signal_vars:
        est = Signal(grid=truth.grid, values=samples[signal_vars[0]].mean(axis=0))
        summary["relative_error"] = relative_error(est, truth)

    (run_dir / "summary.yaml").write_text(yaml.safe_dump(_plain(summary),
                                                         sort_keys=True))
    return summary


def compare(run_dirs: list[str | Path]) -> str:
    """Side-by-side table of run summaries (comma-separated text)."""
    rows = ["run,sampler,relative_error,ess_min,ess_median,ess_max,runtime_s"]
    for rd in run_dirs:
        rd = Path(rd)
        summ = yaml.safe_load((rd / "summary.yaml").read_text())
        ess = summ.get("ess_f", {})
        rows.append(",".join([
            rd.name,
            str(summ.get("sampler", "")),
            _num(summ.get("relative_error")),
            _num(ess.get("min")), _num(ess.get("median")), _num(ess.get("max")),
            _num(summ.get("runtime_s")),
        ]))
    return "\n".join(rows) + "\n"


def _num(x) -> str:
    return "" if x is None else "%.17g" % float(x)


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    return obj


def _write_manifest(out_dir: Path, manifest: dict) -> None:
    (out_dir / "manifest.yaml").write_text(
        yaml.safe_dump(_plain(manifest), sort_keys=True)
    )
