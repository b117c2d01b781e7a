"""Experiment runners: single chains, shift study, dimension scaling, SDE comparison.

Every CSV written here starts with a ``# config: {...}`` line holding the
full JSON configuration, which is enough to regenerate the file exactly.
"""
from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .config import ExperimentConfig, kernel_from_spec
from .csvio import write_csv
from .diagnostics import (
    autocorrelation,
    integrated_autocorr_time,
    scaling_slope,
    stuck_statistics,
    summarize,
    chain_statistic,
)
from .errors import ConfigError, DegenerateInputError, DomainError
from .limit_sde import diffusion_from_target, empirical_triplet, euler_maruyama
from .rand import RNG_ALGORITHM, RngStream
from .samplers import ChainTrace, run_chain
from .targets import make_target, target_shifted

log = logging.getLogger(__name__)

SUMMARY_COLUMNS = [
    "algorithm", "target", "d", "rho_or_sigma", "M", "seed",
    "acceptance_rate", "iat_radial", "iat_coord1", "longest_reject_run",
]
ACF_COLUMNS = ["lag", "acf_radial", "acf_coord1"]
TRIPLET_COLUMNS = ["bin_center", "count", "a_hat", "a_closed", "b_hat", "b_closed", "c_hat"]
SCALING_COLUMNS = [
    "algorithm", "d", "replication", "iat",
    "acceptance_rate", "longest_reject_run", "M", "reliable",
]
SLOPE_COLUMNS = ["algorithm", "slope", "r_squared", "stable", "max_loo_change", "dims", "median_iats"]
SHIFT_COLUMNS = ["algorithm", "target", "xi", "peak_estimation", "iat_radial", "acceptance_rate", "xi_hat_mean"]


@dataclass
class RunResult:
    config: ExperimentConfig
    trace: ChainTrace
    summary: dict
    xi_hat: Optional[np.ndarray] = None
    files: dict = field(default_factory=dict)


def _initial_state(init, target, rng: RngStream, offset=None):
    if isinstance(init, str):
        if init == "std_normal":
            return rng.normal(target.dim)
        return target.sample(rng)
    x = np.asarray(init, dtype=float)
    return x if offset is None else x - offset


def _target_for(cfg: ExperimentConfig):
    target = cfg.base_target()
    if cfg.xi is not None:
        target = target_shifted(target, cfg.xi)
    return target


def estimate_peak(config: ExperimentConfig, pilot_M: int, rng: Optional[RngStream] = None) -> np.ndarray:
    """Average of ``X_0..X_{pilot_M - 1}`` from a pilot chain of the configured sampler."""
    if pilot_M < 1:
        raise DomainError("pilot_M must be >= 1")
    rng = rng or RngStream(config.seed, config.stream_id)
    target = _target_for(config)
    x0 = _initial_state(config.init, target, rng)
    tr = run_chain(x0, config.kernel(), target, pilot_M - 1, rng, record=(), record_path=True)
    return (x0 + tr.path.sum(axis=0)) / pilot_M


def simulate(config: ExperimentConfig) -> RunResult:
    """Run the configured chain in memory (no files)."""
    rng = RngStream(config.seed, config.stream_id)
    target = _target_for(config)
    xi_hat = None
    if config.peak_estimation is not None:
        xi_hat = estimate_peak(config, config.peak_estimation["pilot_M"], rng)
        # the main chain targets P(-xi_hat + dx) and reports in original coordinates
        target = target_shifted(target, -xi_hat)
    x0 = _initial_state(config.init, target, rng, offset=xi_hat)
    rec = tuple(k for k in ("radial", "coord1") if config.record.get(k, True))
    trace = run_chain(
        x0, config.kernel(), target, config.M, rng,
        offset=xi_hat, record=rec, thin=config.thin,
        record_path=bool(config.record.get("path", False)),
    )
    if xi_hat is not None and trace.path is not None:
        trace.path += xi_hat
    summary = summarize(trace)
    return RunResult(config, trace, summary, xi_hat)


def summary_row(result: RunResult) -> dict:
    cfg = result.config
    kern = cfg.kernel()
    return {
        "algorithm": kern.kind,
        "target": cfg.target["name"],
        "d": cfg.d,
        "rho_or_sigma": kern.rho if kern.rho is not None else kern.sigma_d,
        "M": cfg.M,
        "seed": cfg.seed,
        **{k: result.summary[k] for k in ("acceptance_rate", "iat_radial", "iat_coord1", "longest_reject_run")},
    }


def _safe_acf(series, max_lag):
    try:
        return autocorrelation(series, max_lag)
    except DegenerateInputError:
        return np.full(max_lag + 1, np.nan)


def run_name(cfg: ExperimentConfig) -> str:
    name = f"{cfg.algorithm['kind']}_{cfg.target['name']}_d{cfg.d}_s{cfg.seed}"
    if cfg.xi is not None:
        name += f"_xi{cfg.xi:g}"
    if cfg.peak_estimation is not None:
        name += "_peak"
    return name


def run_experiment(config: ExperimentConfig, write: bool = True) -> RunResult:
    """Run one chain and write its summary and autocorrelation CSVs."""
    result = simulate(config)
    if not write:
        return result
    out = Path(config.output_dir)
    name = run_name(config)
    cj = config.to_json()
    result.files["summary"] = write_csv(out / f"{name}_summary.csv", SUMMARY_COLUMNS, [summary_row(result)], cj)
    n = len(result.trace.radial) or len(result.trace.coord1)
    if n > 1:
        max_lag = min(config.max_lag, n - 1)
        acf_r = _safe_acf(result.trace.radial, max_lag) if len(result.trace.radial) else np.full(max_lag + 1, np.nan)
        acf_c = _safe_acf(result.trace.coord1, max_lag) if len(result.trace.coord1) else np.full(max_lag + 1, np.nan)
        rows = [(k, float(acf_r[k]), float(acf_c[k])) for k in range(max_lag + 1)]
        result.files["acf"] = write_csv(out / f"{name}_acf.csv", ACF_COLUMNS, rows, cj)
    return result


# -- shift study ---------------------------------------------------------------

def run_shift_study(base: ExperimentConfig, xis=(0, 1, 2, 3, 4), algorithms=("pcn", "mpcn"),
                    peak=(False, True), pilot_M: int = 1000, write: bool = True):
    """IAT of the radial statistic against the shift ``xi``, with and without peak estimation."""
    if base.target["name"] not in ("gaussian", "student_t"):
        raise ConfigError("target.name", "shift study needs a gaussian or student_t target")
    rows = []
    for alg in algorithms:
        spec = dict(base.algorithm) if base.algorithm["kind"] == alg else {"kind": alg}
        for use_peak in peak:
            for xi in xis:
                cfg = base.replace(
                    algorithm=spec, xi=float(xi),
                    peak_estimation={"pilot_M": pilot_M} if use_peak else None,
                )
                res = simulate(cfg)
                rows.append({
                    "algorithm": alg,
                    "target": base.target["name"],
                    "xi": float(xi),
                    "peak_estimation": use_peak,
                    "iat_radial": res.summary["iat_radial"],
                    "acceptance_rate": res.summary["acceptance_rate"],
                    "xi_hat_mean": float(res.xi_hat.mean()) if res.xi_hat is not None else float("nan"),
                })
                log.info("shift %s xi=%s peak=%s iat=%.4g", alg, xi, use_peak, rows[-1]["iat_radial"])
    files = {}
    if write:
        meta = json.dumps({"base": base.to_dict(), "xis": [float(x) for x in xis],
                           "algorithms": list(algorithms), "peak": list(peak), "pilot_M": pilot_M},
                          sort_keys=True, separators=(",", ":"))
        files["shift"] = write_csv(Path(base.output_dir) / "shift_study.csv", SHIFT_COLUMNS, rows, meta)
    return rows, files


# -- scaling study -------------------------------------------------------------

def _default_algorithms():
    return [
        {"kind": "mpcn", "M_scale": 10_000, "M_power": 1, "thin_power": 0},
        {"kind": "rwm_gauss", "M_scale": 10_000, "M_power": 2, "thin_power": 1},
        {"kind": "pcn", "M_scale": 1_000_000, "M_power": 0, "thin_power": 0},
    ]


@dataclass
class ScalingConfig:
    """Dimension-scaling study.

    Each algorithm entry is a kernel spec plus ``M_scale``/``M_power`` (chain
    length ``M_scale * d**M_power``) and ``thin_power`` (record every
    ``d**thin_power``-th state).
    """

    algorithms: list = field(default_factory=_default_algorithms)
    target: dict = field(default_factory=lambda: {"name": "student_t", "nu": 2.0, "sigma": 5.0})
    dims: list = field(default_factory=lambda: [8, 16, 32, 64])
    replications: int = 5
    seed: int = 2024
    init: str = "exact_target"
    unreliable_fraction: float = 1 / 50
    output_dir: str = "out"
    workers: int = 1

    def __post_init__(self):
        if len(self.dims) < 3:
            raise ConfigError("dims", "need at least three dimensions")
        if self.replications < 3:
            raise ConfigError("replications", "need at least three replications")
        if any(int(d) != d or d < 1 for d in self.dims):
            raise ConfigError("dims", "dimensions must be positive integers")
        for i, a in enumerate(self.algorithms):
            if "kind" not in a:
                raise ConfigError(f"algorithms[{i}].kind", "missing")

    def to_json(self):
        d = asdict(self)
        d["rng"] = RNG_ALGORITHM
        d.pop("workers")
        return json.dumps(d, sort_keys=True, separators=(",", ":"))


def _scaling_cell(args):
    alg, target_spec, d, rep, stream_id, seed, init, frac = args
    spec = {k: v for k, v in alg.items() if k not in ("M_scale", "M_power", "thin_power")}
    M = int(alg.get("M_scale", 10_000) * d ** alg.get("M_power", 1))
    thin = int(d ** alg.get("thin_power", 0))
    params = {k: v for k, v in target_spec.items() if k != "name"}
    target = make_target(target_spec["name"], d, **params)
    rng = RngStream(seed, stream_id)
    x0 = _initial_state(init, target, rng)
    tr = run_chain(x0, kernel_from_spec(spec, d), target, M, rng, record=("radial",), thin=thin)
    rate, longest = stuck_statistics(tr.accepted)
    try:
        iat = thin * integrated_autocorr_time(chain_statistic(tr))
    except DegenerateInputError:
        iat = float("inf")
    return {
        "algorithm": spec["kind"], "d": d, "replication": rep, "iat": iat,
        "acceptance_rate": rate, "longest_reject_run": longest, "M": M,
        "reliable": bool(np.isfinite(iat) and iat <= frac * M),
    }


@dataclass
class ScalingResult:
    rows: list
    slopes: dict
    stuck: dict
    files: dict = field(default_factory=dict)


def _slope_from_rows(rows, dims):
    med_d, med_t = [], []
    for d in dims:
        vals = [r["iat"] for r in rows if r["d"] == d and r["reliable"]]
        if vals:
            med_d.append(d)
            med_t.append(float(np.median(vals)))
    if len(med_d) < 3:
        return None
    slope, r2 = scaling_slope(med_d, med_t)
    return slope, r2, med_d, med_t


def run_scaling_study(cfg: ScalingConfig, write: bool = True) -> ScalingResult:
    """Median IAT per dimension and its log-log slope, per algorithm.

    Cells ``(algorithm, d, replication)`` draw from stream ``(seed, d_index *
    replications + replication)``, so every algorithm sees the same seeds.
    """
    cells = []
    for alg in cfg.algorithms:
        for di, d in enumerate(cfg.dims):
            for rep in range(cfg.replications):
                cells.append((alg, cfg.target, int(d), rep, di * cfg.replications + rep,
                              cfg.seed, cfg.init, cfg.unreliable_fraction))
    if cfg.workers > 1:
        with ProcessPoolExecutor(cfg.workers) as pool:
            rows = list(pool.map(_scaling_cell, cells))
    else:
        rows = [_scaling_cell(c) for c in cells]
    rows.sort(key=lambda r: (r["algorithm"], r["d"], r["replication"]))

    slopes, stuck = {}, {}
    for alg in dict.fromkeys(r["algorithm"] for r in rows):
        mine = [r for r in rows if r["algorithm"] == alg]
        stuck[alg] = {d: float(np.median([r["longest_reject_run"] for r in mine if r["d"] == d]))
                      for d in cfg.dims}
        fit = _slope_from_rows(mine, cfg.dims)
        if fit is None:
            slopes[alg] = None
            continue
        slope, r2, md, mt = fit
        # leave-one-replication-out stability gate
        changes = []
        for rep in range(cfg.replications):
            loo = _slope_from_rows([r for r in mine if r["replication"] != rep], cfg.dims)
            changes.append(abs(loo[0] - slope) if loo else math.inf)
        max_change = max(changes)
        slopes[alg] = {"slope": slope, "r_squared": r2, "stable": max_change < 0.2,
                       "max_loo_change": max_change, "dims": md, "median_iats": mt}

    result = ScalingResult(rows, slopes, stuck)
    if write:
        out = Path(cfg.output_dir)
        cj = cfg.to_json()
        result.files["scaling"] = write_csv(out / "scaling.csv", SCALING_COLUMNS, rows, cj)
        srows = []
        for alg, s in slopes.items():
            if s is None:
                srows.append([alg, "nan", "nan", 0, "nan", "", ""])
            else:
                srows.append([alg, s["slope"], s["r_squared"], s["stable"], s["max_loo_change"],
                              " ".join(str(d) for d in s["dims"]),
                              " ".join(repr(t) for t in s["median_iats"])])
        result.files["slopes"] = write_csv(out / "slopes.csv", SLOPE_COLUMNS, srows, cj)
    return result


# -- diffusion-limit comparison ---------------------------------------------------

@dataclass
class SdeCompareConfig:
    d: int = 100
    M: int = 10_000_000
    chains: int = 5
    rho: float = 0.8
    nu: float = 2.0
    sigma: float = 5.0
    seed: int = 11
    n_bins: int = 30
    min_count: int = 200
    em_dt: float = 1e-3
    em_steps: int = 10_000_000
    output_dir: str = "out"

    def to_json(self):
        d = asdict(self)
        d["rng"] = RNG_ALGORITHM
        return json.dumps(d, sort_keys=True, separators=(",", ":"))


def sde_compare(cfg: SdeCompareConfig, write: bool = True):
    """Binned moment triplet of stationary MpCN chains against the limiting diffusion.

    Also runs Euler-Maruyama on the limit and reports its median next to the
    median of the mixing law.
    """
    target = make_target("student_t", cfg.d, nu=cfg.nu, sigma=cfg.sigma)
    spec = diffusion_from_target(target, cfg.rho)
    kernel = kernel_from_spec({"kind": "mpcn", "rho": cfg.rho}, cfg.d)
    series = []
    for c in range(cfg.chains):
        rng = RngStream(cfg.seed, c)
        tr = run_chain(target.sample(rng), kernel, target, cfg.M, rng, record=("radial",))
        series.append(tr.radial)
    est = empirical_triplet(series, cfg.d, n_bins=cfg.n_bins, min_count=cfg.min_count)
    rows = [
        {"bin_center": float(y), "count": int(n), "a_hat": float(a), "a_closed": float(spec.a(y)),
         "b_hat": float(b), "b_closed": float(spec.b(y)), "c_hat": float(c)}
        for y, n, a, b, c in zip(est.bin_centers, est.counts, est.a_hat, est.b_hat, est.c_hat)
    ]
    mix = target.mixing.invgamma
    em_rng = RngStream(cfg.seed, cfg.chains)
    em = euler_maruyama(spec, float(target.mixing.sample(em_rng)), cfg.em_dt, cfg.em_steps, em_rng)
    em_summary = {"em_median": float(np.median(em)), "q_median": float(mix.scale / np.log(2.0)),
                  "em_min": float(em.min())}
    files = {}
    if write:
        files["triplet"] = write_csv(Path(cfg.output_dir) / f"triplet_d{cfg.d}.csv",
                                     TRIPLET_COLUMNS, rows, cfg.to_json())
    return est, rows, em_summary, files
