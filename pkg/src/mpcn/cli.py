"""Command-line entry point: ``mpcn {run,shift-study,scaling-study,sde-compare,selftest}``.

Every subcommand accepts ``--config FILE`` (YAML or JSON); explicit flags
override values from the file.  Exit status: 0 success, 1 configuration
error, 2 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import fields

from .config import ExperimentConfig, load_config_file, merge
from .errors import ConfigError, NumericalError

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2


def _common(p):
    p.add_argument("--config", help="YAML/JSON config file")
    p.add_argument("--output-dir", dest="output_dir")
    p.add_argument("--seed", type=int)
    p.add_argument("-v", "--verbose", action="store_true")


def _experiment_flags(p):
    p.add_argument("--algorithm", help="rwm_gauss, rwm_t, pcn, mpcn or mpcn_general")
    p.add_argument("--rho", type=float)
    p.add_argument("--sigma-d", dest="sigma_d", type=float)
    p.add_argument("--df", type=float)
    p.add_argument("--nu-bar", dest="nu_bar", type=float)
    p.add_argument("--target", help="gaussian, student_t or perturbed_t")
    p.add_argument("--nu", type=float)
    p.add_argument("--sigma", type=float)
    p.add_argument("-d", "--dim", dest="d", type=int)
    p.add_argument("-M", "--steps", dest="M", type=int)
    p.add_argument("--stream-id", dest="stream_id", type=int)
    p.add_argument("--init", help="std_normal, exact_target or comma-separated vector")
    p.add_argument("--xi", type=float)
    p.add_argument("--pilot-M", dest="pilot_M", type=int, help="enable peak estimation")
    p.add_argument("--max-lag", dest="max_lag", type=int)
    p.add_argument("--thin", type=int)
    p.add_argument("--record-path", dest="record_path", action="store_true", default=None)


def _experiment_config(args) -> ExperimentConfig:
    data = load_config_file(args.config) if args.config else {}
    over = {
        "d": args.d, "M": args.M, "seed": args.seed, "stream_id": args.stream_id,
        "xi": args.xi, "max_lag": args.max_lag, "thin": args.thin, "output_dir": args.output_dir,
    }
    alg = {k: getattr(args, k) for k in ("rho", "sigma_d", "df", "nu_bar")}
    if args.algorithm:
        if args.algorithm != data.get("algorithm", {}).get("kind"):
            data["algorithm"] = {"kind": args.algorithm}
        alg["kind"] = args.algorithm
    over["algorithm"] = alg
    tgt = {"nu": args.nu, "sigma": args.sigma}
    if args.target:
        if args.target != data.get("target", {}).get("name"):
            data["target"] = {"name": args.target}
        tgt["name"] = args.target
    over["target"] = tgt
    if args.init:
        over["init"] = args.init if args.init in ("std_normal", "exact_target") else [
            float(v) for v in args.init.split(",")]
    if args.pilot_M is not None:
        over["peak_estimation"] = {"pilot_M": args.pilot_M}
    if args.record_path:
        over["record"] = {"path": True}
    merged = merge(data, over)
    defaults = ExperimentConfig()
    for key, name_key in (("algorithm", "kind"), ("target", "name")):
        if not merged.get(key):
            merged.pop(key, None)
        elif name_key not in merged[key]:
            merged[key] = {**getattr(defaults, key), **merged[key]}
    return ExperimentConfig.from_dict(merged)


def _dataclass_from(cls, args, names):
    data = load_config_file(args.config) if args.config else {}
    over = {n: getattr(args, n, None) for n in names}
    merged = merge(data, over)
    known = {f.name for f in fields(cls)}
    bad = set(merged) - known
    if bad:
        raise ConfigError(sorted(bad)[0], "unknown configuration key")
    try:
        return cls(**merged)
    except TypeError as exc:
        raise ConfigError("config", str(exc)) from None


def cmd_run(args):
    from .harness import run_experiment, summary_row

    cfg = _experiment_config(args)
    res = run_experiment(cfg)
    print(json.dumps(summary_row(res)))
    for kind, path in res.files.items():
        print(f"{kind}: {path}")
    return EXIT_OK


def cmd_shift(args):
    from .harness import run_shift_study

    cfg = _experiment_config(args)
    xis = [float(v) for v in args.xis.split(",")]
    peak = {"both": (False, True), "on": (True,), "off": (False,)}[args.peak]
    algs = tuple(args.algorithms.split(","))
    rows, files = run_shift_study(cfg, xis, algs, peak, args.study_pilot_M)
    for r in rows:
        print(json.dumps(r))
    for kind, path in files.items():
        print(f"{kind}: {path}")
    return EXIT_OK


def cmd_scaling(args):
    from .harness import ScalingConfig, run_scaling_study

    if args.dims:
        args.dims = [int(v) for v in args.dims.split(",")]
    cfg = _dataclass_from(ScalingConfig, args, ("dims", "replications", "seed", "output_dir", "workers"))
    res = run_scaling_study(cfg)
    for alg, s in res.slopes.items():
        print(json.dumps({"algorithm": alg, **(s or {"slope": None}), "median_reject_run": res.stuck[alg]}))
    for kind, path in res.files.items():
        print(f"{kind}: {path}")
    return EXIT_OK


def cmd_sde(args):
    from .harness import SdeCompareConfig, sde_compare

    cfg = _dataclass_from(SdeCompareConfig, args,
                          ("d", "M", "chains", "rho", "seed", "em_steps", "em_dt", "output_dir"))
    est, rows, em, files = sde_compare(cfg)
    print(json.dumps(em))
    for r in rows:
        print(json.dumps(r))
    for kind, path in files.items():
        print(f"{kind}: {path}")
    return EXIT_OK


def cmd_selftest(args):
    from .selftest import run_all

    ok = run_all(verbose=True)
    return EXIT_OK if ok else EXIT_NUMERICAL


def build_parser():
    p = argparse.ArgumentParser(prog="mpcn", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="single experiment")
    _common(r)
    _experiment_flags(r)
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("shift-study", help="IAT against shift xi, with/without peak estimation")
    _common(s)
    _experiment_flags(s)
    s.add_argument("--xis", default="0,1,2,3,4")
    s.add_argument("--algorithms", default="pcn,mpcn")
    s.add_argument("--peak", choices=("both", "on", "off"), default="both")
    s.add_argument("--study-pilot-M", dest="study_pilot_M", type=int, default=1000)
    s.set_defaults(func=cmd_shift)

    c = sub.add_parser("scaling-study", help="IAT against dimension, log-log slopes")
    _common(c)
    c.add_argument("--dims", help="comma-separated, e.g. 8,16,32,64")
    c.add_argument("--replications", type=int)
    c.add_argument("--workers", type=int)
    c.set_defaults(func=cmd_scaling)

    e = sub.add_parser("sde-compare", help="MpCN moment triplet against the diffusion limit")
    _common(e)
    e.add_argument("-d", "--dim", dest="d", type=int)
    e.add_argument("-M", "--steps", dest="M", type=int)
    e.add_argument("--chains", type=int)
    e.add_argument("--rho", type=float)
    e.add_argument("--em-steps", dest="em_steps", type=int)
    e.add_argument("--em-dt", dest="em_dt", type=float)
    e.set_defaults(func=cmd_sde)

    t = sub.add_parser("selftest", help="quick property checks")
    t.add_argument("-v", "--verbose", action="store_true")
    t.set_defaults(func=cmd_selftest)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
