"""Command-line front end.

Exit codes: 0 on success, 2 for configuration errors, 3 for runtime or
numerical failures. Data goes to ``--out`` (``-`` for stdout); progress
and errors go to stderr.
"""
import argparse
import logging
import math
import os
import sys
import time

import numpy as np

from . import __version__
from . import io as rio
from .analysis import (
    LaplaceProbe,
    cmse_bound,
    empirical_laplace,
    ks_min_inverse_rss,
    mse_bound,
    rhat_moments,
    run_cmse_experiment,
    run_mse_experiment,
    seed_sequence,
)
from .channel import aoa_variance, observe, sigma_from_db
from .config import ConfigError, load
from .estimator import CalibrationFit, calibrate, generate_calibration_data, localize
from .pointproc import PairCorrelationEstimator, PoissonProcess

log = logging.getLogger("rssaoa")

SEED_ENV = "RSSAOA_SEED"
EXIT_CONFIG = 2
EXIT_RUNTIME = 3

# flag name -> config key
CONFIG_FLAGS = {
    "dim": int, "radius": float, "model": str, "lambda": float, "lambda_p": float,
    "target_lambda": float, "rc": float, "cbar": float, "sigma_c": float, "alpha": float,
    "ginibre_method": str, "K": float, "beta": float, "sigma_db": float, "tau_min": float,
    "tau_max": float, "aoa_a": float, "aoa_r0": float, "reps": int, "seed": int,
    "threads": int, "n_cal": int, "n_mc": int, "grid": str,
}


def _add_config_flags(p):
    p.add_argument("--config", help="flat key=value configuration file")
    for key, typ in CONFIG_FLAGS.items():
        flag = "--" + key.replace("_", "-")
        p.add_argument(flag, dest=key, type=typ, default=None)
    p.add_argument("--deterministic", dest="deterministic", action="store_const", const="true", default=None,
                   help="reproducible reduction order (the default; kept for explicitness)")
    p.add_argument("--out", default=None, help="output file ('-' for stdout)")
    p.add_argument("--sidecar", default=None, help="JSON sidecar path (default: output path with .json)")
    p.add_argument("--fit", default=None, help="calibration fit JSON to use instead of fresh calibration")
    p.add_argument("--exact-fit", action="store_true", help="use the population calibration coefficients")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser():
    parser = argparse.ArgumentParser(prog="rssaoa", description="RSS+AOA fusion localisation toolkit")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", help="sample a deployment pattern")
    _add_config_flags(p)

    p = sub.add_parser("observe", help="generate RSS/AOA observations for a pattern")
    _add_config_flags(p)
    p.add_argument("--pattern", help="pattern CSV (default: sample one from the model)")

    p = sub.add_parser("calibrate", help="fit the log-linear range model")
    _add_config_flags(p)
    p.add_argument("--data", help="calibration CSV with header P,R (default: simulate n_cal pairs)")
    p.add_argument("--emit-data", help="also write the simulated calibration pairs here")

    p = sub.add_parser("localize", help="fuse one scene of observations into a target estimate")
    _add_config_flags(p)
    p.add_argument("--obs", required=True, help="observation CSV")

    for name in ("cmse", "mse"):
        p = sub.add_parser(name, help=f"Monte Carlo {name.upper()} experiment with bounds")
        _add_config_flags(p)

    p = sub.add_parser("bound", help="tabulate the CMSE or MSE bound")
    _add_config_flags(p)
    p.add_argument("--mode", choices=("cmse", "mse"), default="cmse")

    p = sub.add_parser("paircorr", help="closed-form (and optionally empirical) pair correlation")
    _add_config_flags(p)
    p.add_argument("--estimate", action="store_true", help="add an empirical estimate from `reps` patterns")
    p.add_argument("--bandwidth", type=float, default=None)

    p = sub.add_parser("srd", help="short-range-dependence integral of the model")
    _add_config_flags(p)

    p = sub.add_parser("converge", help="PPP-vs-model gaps of the observable process over a sigma_dB grid")
    _add_config_flags(p)
    p.add_argument("--sigma-db-grid", default=None, help="comma-separated sigma_dB values (default 4,8,12)")
    p.add_argument("--probe-r-lo", type=float, default=None)
    p.add_argument("--probe-r-hi", type=float, default=None)
    p.add_argument("--probe-weight", type=float, default=None)
    p.add_argument("--probe-shoulder", type=float, default=None)
    return parser


def _resolve_config(args):
    overrides = {k: getattr(args, k) for k in list(CONFIG_FLAGS) + ["deterministic"]}
    if overrides.get("seed") is None and "seed" not in _file_keys(args.config) and os.environ.get(SEED_ENV):
        overrides["seed"] = os.environ[SEED_ENV]
    overrides = {k: (v if isinstance(v, str) or v is None else repr(v) if isinstance(v, float) else str(v))
                 for k, v in overrides.items()}
    cfg = load(args.config, overrides)
    return cfg.validate()


def _file_keys(path):
    if not path:
        return set()
    cfg = load(path)
    return set(cfg.origins)


def _fit(cfg, args, params):
    if args.fit:
        return rio.read_fit(args.fit)
    if args.exact_fit:
        return CalibrationFit.exact(params)
    rng = np.random.default_rng(seed_sequence(cfg["seed"], 99))
    rss, dist = generate_calibration_data(cfg["n_cal"], cfg["radius"], params, cfg["dim"], rng)
    return calibrate(rss, dist)


def _sidecar(args, cfg, extra):
    out = args.out or "-"
    path = args.sidecar or (None if out == "-" else rio.sidecar_path(out))
    if path is None:
        return
    payload = {"config": cfg.as_dict(), "config_canonical": cfg.dump(), **extra}
    rio.write_json(path, payload)


def _grid(cfg, default):
    g = cfg["grid"]
    return list(g) if g else list(default)


def cmd_sample(args, cfg):
    model = cfg.model()
    rng = np.random.default_rng(seed_sequence(cfg["seed"]))
    pattern = model.sample(cfg["radius"], cfg["dim"], rng)
    rio.write_pattern(args.out or "-", pattern.points)
    _sidecar(args, cfg, {
        "model": model.to_dict(), "radius": cfg["radius"], "dim": cfg["dim"], "seed": cfg["seed"],
        "count": len(pattern), "effective_intensity": model.effective_intensity(cfg["dim"]),
    })


def cmd_observe(args, cfg):
    params = cfg.channel()
    rng = np.random.default_rng(seed_sequence(cfg["seed"]))
    if args.pattern:
        points = rio.read_pattern(args.pattern)
    else:
        points = cfg.model().sample(cfg["radius"], cfg["dim"], rng).points
    obs = observe(points, params, rng)
    rio.write_observations(args.out or "-", obs)
    _sidecar(args, cfg, {"channel": params.to_dict(), "seed": cfg["seed"], "count": len(obs)})


def cmd_calibrate(args, cfg):
    params = cfg.channel()
    if args.data:
        rss, dist = rio.read_calibration(args.data)
    else:
        rng = np.random.default_rng(seed_sequence(cfg["seed"], 99))
        rss, dist = generate_calibration_data(cfg["n_cal"], cfg["radius"], params, cfg["dim"], rng)
        if args.emit_data:
            rio.write_calibration(args.emit_data, rss, dist)
    fit = calibrate(rss, dist)
    rio.write_fit(args.out or "-", fit)


def cmd_localize(args, cfg):
    obs = rio.read_observations(args.obs)
    fit = _fit(cfg, args, cfg.channel())
    est = localize(obs, fit)
    d = obs.dimension
    rio.write_table(args.out or "-", [f"x{k + 1}" for k in range(d)] + ["n_used"], [list(est.coords) + [est.n_used]])
    _sidecar(args, cfg, {"fit": fit.to_dict(), "n_used": est.n_used})


def _experiment_sidecar(args, cfg, result, fit, moments):
    extra = {
        "result": result.summary(include_time=not cfg["deterministic"]),
        "fit": fit.to_dict(),
        "moments": {"m1": moments.m1, "m2": moments.m2, "se1": moments.se1, "se2": moments.se2, "n_mc": moments.n_mc},
    }
    _sidecar(args, cfg, extra)


def cmd_cmse(args, cfg):
    if cfg["model"] != "ppp":
        raise ConfigError(
            f"{cfg.where('model')}: cmse needs model=ppp; conditioning on the sensor count can only be "
            f"simulated exactly for the Poisson model (use `mse` for {cfg['model']!r})"
        )
    params = cfg.channel()
    d, radius = cfg["dim"], cfg["radius"]
    fit = _fit(cfg, args, params)
    moments = rhat_moments(params, fit, radius, d, cfg["n_mc"], seed_sequence(cfg["seed"], 0))
    grid = [int(round(n)) for n in _grid(cfg, (1000, 2000, 3000, 4000, 5000))]
    log.info("cmse over n=%s with %d reps", grid, cfg["reps"])
    result = run_cmse_experiment(grid, radius, d, params, fit, cfg["reps"], cfg["seed"], cfg["threads"], moments)
    with rio.open_out(args.out or "-") as fh:
        result.to_csv(fh)
    _experiment_sidecar(args, cfg, result, fit, moments)


def cmd_mse(args, cfg):
    params = cfg.channel()
    d, radius = cfg["dim"], cfg["radius"]
    fit = _fit(cfg, args, params)
    moments = rhat_moments(params, fit, radius, d, cfg["n_mc"], seed_sequence(cfg["seed"], 0))
    grid = _grid(cfg, (1, 2, 3, 4, 5))
    models = [(lam, cfg.model(intensity=lam)) for lam in grid]
    log.info("mse for %s over lambda=%s with %d reps", cfg["model"], grid, cfg["reps"])
    result = run_mse_experiment(models, radius, d, params, fit, cfg["reps"], cfg["seed"], cfg["threads"], moments)
    with rio.open_out(args.out or "-") as fh:
        result.to_csv(fh)
    _experiment_sidecar(args, cfg, result, fit, moments)


def cmd_bound(args, cfg):
    params = cfg.channel()
    d, radius = cfg["dim"], cfg["radius"]
    fit = _fit(cfg, args, params)
    moments = rhat_moments(params, fit, radius, d, cfg["n_mc"], seed_sequence(cfg["seed"], 0))
    tau = aoa_variance(radius, params.aoa)
    if args.mode == "cmse":
        grid = _grid(cfg, (1000, 2000, 4000))
        rows = [(g, *cmse_bound(int(round(g)), d, radius, tau, moments, return_stderr=True)) for g in grid]
    else:
        grid = _grid(cfg, (1, 2, 4))
        rows = [(g, *mse_bound(g, d, radius, tau, moments, return_stderr=True)) for g in grid]
    rows = [r + (moments.m1, moments.se1, moments.m2, moments.se2) for r in rows]
    rio.write_table(args.out or "-", ["grid", "bound", "bound_stderr", "m1", "m1_stderr", "m2", "m2_stderr"], rows)
    _sidecar(args, cfg, {"mode": args.mode, "fit": fit.to_dict(), "tau_at_radius": tau})


def cmd_paircorr(args, cfg):
    model = cfg.model()
    d = cfg["dim"]
    grid = np.asarray(_grid(cfg, np.round(np.linspace(0.05, 1.0, 20), 10)))
    h = np.asarray(model.pair_correlation(grid, d), dtype=float)
    header, cols = ["r", "h"], [grid, h]
    if args.estimate:
        children = seed_sequence(cfg["seed"]).spawn(cfg["reps"])
        patterns = [model.sample(cfg["radius"], d, np.random.default_rng(c)) for c in children]
        est = PairCorrelationEstimator(r_grid=grid, bandwidth=args.bandwidth).fit(patterns)
        header += ["h_hat", "stderr"]
        cols += [est.h_, est.stderr_]
    rio.write_table(args.out or "-", header, np.column_stack(cols))
    _sidecar(args, cfg, {"model": model.to_dict()})


def cmd_srd(args, cfg):
    model = cfg.model()
    value = model.srd_integral(cfg["dim"])
    rio.write_table(args.out or "-", ["model", "srd"], [[model.kind, value]])
    _sidecar(args, cfg, {"model": model.to_dict(), "srd": value})


def cmd_converge(args, cfg):
    params = cfg.channel()
    d, radius = cfg["dim"], cfg["radius"]
    model = cfg.model()
    ppp = PoissonProcess(model.effective_intensity(d))
    sigmas = list(_parse_grid(args.sigma_db_grid)) if args.sigma_db_grid else [4.0, 8.0, 12.0]
    probe_cfg = {
        "r_lo": args.probe_r_lo if args.probe_r_lo is not None else 0.5,
        "r_hi": args.probe_r_hi if args.probe_r_hi is not None else 2.0,
        "weight": args.probe_weight if args.probe_weight is not None else 0.2,
        "shoulder": args.probe_shoulder if args.probe_shoulder is not None else 0.25,
    }
    probe = LaplaceProbe.from_distances(params, probe_cfg["r_lo"], probe_cfg["r_hi"], d,
                                        weight=probe_cfg["weight"], shoulder=probe_cfg["shoulder"])
    reps, threads, seed = cfg["reps"], cfg["threads"], cfg["seed"]
    rows = []
    for k, sdb in enumerate(sigmas):
        s = sigma_from_db(sdb)
        la, sa = empirical_laplace(ppp, s, probe, radius, d, params, reps, seed_sequence(seed, 10, k, 0), threads)
        lb, sb = empirical_laplace(model, s, probe, radius, d, params, reps, seed_sequence(seed, 10, k, 1), threads)
        ks = ks_min_inverse_rss(ppp, model, s, radius, d, params, max(reps, 500), seed_sequence(seed, 11, k), threads)
        rows.append([sdb, la, sa, lb, sb, abs(la - lb), math.hypot(sa, sb), ks.statistic, ks.pvalue, ks.critical_1pct])
        log.info("sigma_db=%s gap=%.4g ks=%.4g", sdb, abs(la - lb), ks.statistic)
    header = ["sigma_db", "laplace_ppp", "stderr_ppp", "laplace_model", "stderr_model", "gap", "joint_stderr",
              "ks_statistic", "ks_pvalue", "ks_critical_1pct"]
    rio.write_table(args.out or "-", header, rows)
    _sidecar(args, cfg, {"model": model.to_dict(), "reference": ppp.to_dict(), "probe": probe_cfg,
                         "probe_box": probe.to_dict(), "sigma_db_grid": sigmas})


def _parse_grid(text):
    return tuple(float(t) for t in text.replace(";", ",").split(",") if t.strip())


COMMANDS = {
    "sample": cmd_sample, "observe": cmd_observe, "calibrate": cmd_calibrate, "localize": cmd_localize,
    "cmse": cmd_cmse, "mse": cmd_mse, "bound": cmd_bound, "paircorr": cmd_paircorr, "srd": cmd_srd,
    "converge": cmd_converge,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr,
                        format="%(name)s: %(message)s")
    try:
        cfg = _resolve_config(args)
        t0 = time.perf_counter()
        COMMANDS[args.command](args, cfg)
        log.info("%s finished in %.2fs", args.command, time.perf_counter() - t0)
    except ConfigError as exc:
        print(f"rssaoa: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, ValueError, ArithmeticError, RuntimeError, NotImplementedError) as exc:
        print(f"rssaoa: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return 0


if __name__ == "__main__":
    sys.exit(main())
