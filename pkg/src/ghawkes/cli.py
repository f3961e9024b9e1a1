"""Command-line entry point: ``ghawkes <subcommand> ...``.

Exit codes: 0 success, 2 configuration error, 3 assumption check failed,
4 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__, io
from ._backend import BACKEND
from .analyze import check_assumptions, default_b_grid
from .errors import ConfigError, GHawkesError
from .estimate import SmoothingKernel, bandwidth_rule, default_grid, estimate_cross_cov
from .experiments import (ExperimentConfig, deviation_rows, fig1b_curve, soloist_scores, write_fig1b)
from .keys import RandomKey
from .model import build_block_model
from .simulate import couple, default_burn_in, deviation_profile, simulate_burned
from .wienerhopf import GridCurveSet, default_step, wh_forward, wh_recover

log = logging.getLogger("ghawkes")


def _model(args):
    if args.config:
        return io.load_model(args.config)
    if args.p is None:
        raise ConfigError("give --config or --p (block model)")
    return build_block_model(args.p, args.gamma)


def _base_meta(args, command, model=None):
    meta = {"command": command, "version": __version__, "backend": BACKEND}
    if getattr(args, "seed", None) is not None:
        meta["seed"] = args.seed
    if model is not None:
        meta["model"] = io.model_to_config(model)
    return meta


def _out(args) -> Path:
    return io.ensure_dir(args.out)


def cmd_simulate(args):
    model = _model(args)
    burn = default_burn_in(model) if args.burn_in is None else args.burn_in
    stream = simulate_burned(model, args.T, burn, RandomKey(args.seed), allow_unstable=args.allow_unstable)
    out = _out(args)
    io.write_events(stream, out / "events.csv")
    meta = _base_meta(args, "simulate", model)
    meta.update({"T": args.T, "burn_in": burn, "p": model.p, "counts": stream.counts().tolist()})
    io.write_meta(out / "meta.json", meta)
    print(f"wrote {len(stream)} events to {out / 'events.csv'}")


def _read_stream(args):
    p = horizon = None
    meta_path = Path(args.events).with_name("meta.json")
    if meta_path.exists():
        with open(meta_path) as fh:
            meta = json.load(fh)
        horizon, p = meta.get("T"), meta.get("p")
    horizon = args.T if args.T is not None else horizon
    p = args.p if args.p is not None else p
    return io.read_events(args.events, horizon, p)


def cmd_estimate_cov(args):
    stream = _read_stream(args)
    h = args.bandwidth if args.bandwidth is not None else bandwidth_rule(stream.horizon, args.r, args.bandwidth_const)
    grid = default_grid(h, args.B)
    est = estimate_cross_cov(stream, grid, SmoothingKernel(h))
    est.meta.update({"grid_step": float(grid[1] - grid[0]), "B": args.B})
    out = _out(args)
    io.write_cov_estimate(est, out / "cov.csv")
    meta = _base_meta(args, "estimate-cov")
    meta.update({"events": str(args.events), "T": stream.horizon, "p": stream.p, "h": h, "B": args.B,
                 "grid_points": int(grid.size)})
    io.write_meta(out / "meta.json", meta)
    print(f"wrote {stream.p}x{stream.p} curves on {grid.size} lags (h={h:.6g}) to {out / 'cov.csv'}")


def cmd_check(args):
    model = _model(args)
    report = check_assumptions(model, default_b_grid(model), strict=args.strict)
    print(report.format())
    if args.out:
        out = _out(args)
        meta = _base_meta(args, "check", model)
        meta["report"] = report.to_dict()
        io.write_meta(out / "meta.json", meta)
    return 3 if report.hard_failure else 0


def cmd_couple(args):
    model = _model(args)
    pair = couple(model, args.T, args.cut, RandomKey(args.seed), burn_in=args.burn_in or 0.0)
    out = _out(args)
    io.write_events(pair.original, out / "original.csv")
    io.write_events(pair.coupled, out / "coupled.csv")
    meta = _base_meta(args, "couple", model)
    meta.update({"z": args.cut, "T": args.T, "p": model.p, "shared_violations": pair.shared_violations})
    io.write_meta(out / "meta.json", meta)
    print(f"wrote coupled pair to {out} (shared-stream violations: {pair.shared_violations})")
    return 4 if pair.shared_violations else 0


def cmd_deviation(args):
    model = _model(args)
    prof = deviation_profile(model, args.T, args.cut, args.bin_width, args.reps, RandomKey(args.seed),
                             burn_in=args.burn_in or 0.0, workers=args.workers)
    out = _out(args)
    io.write_table(out / "deviation.csv", ["offset", "component", "mean_abs_diff", "se"], deviation_rows(prof))
    meta = _base_meta(args, "deviation", model)
    meta.update({"z": args.cut, "T": args.T, "bin_width": args.bin_width, "replicates": args.reps,
                 "shared_violations": prof.shared_violations})
    io.write_meta(out / "meta.json", meta)
    for off, m, s in zip(prof.offsets, prof.pooled_mean, prof.pooled_se):
        print(f"u={off:g}: {m:.4f} +- {s:.4f}")


def cmd_wiener_hopf(args):
    out = _out(args)
    meta = _base_meta(args, "wiener-hopf")
    if args.cov:
        est = io.read_cov_estimate(args.cov)
        if args.step is None or args.max_lag is None:
            raise ConfigError("recovery from an estimate needs --step and --max-lag")
        curves = GridCurveSet.from_cov_estimate(est, args.step, args.max_lag)
        res = wh_recover(curves, est.lambda_hat)
        io.write_grid_curves(res.curves, out / "omega.csv")
        meta.update({"mode": "recover", "input": str(args.cov), "max_asymmetry": curves.meta["max_asymmetry"]})
    else:
        model = _model(args)
        if any(link.kind != "linear" for link in model.links):
            raise ConfigError("the Wiener-Hopf relation holds for linear links only")
        from .analyze import integrated_kernel_matrix, mean_intensity_linear

        step, max_lag = default_step(model)
        step = args.step or step
        max_lag = args.max_lag or max_lag
        lam = mean_intensity_linear(model.mu, integrated_kernel_matrix(model))
        fwd = wh_forward(GridCurveSet.from_kernels(model, step, max_lag), lam)
        io.write_grid_curves(fwd.curves, out / "cov_grid.csv")
        res = wh_recover(fwd.curves, lam)
        io.write_grid_curves(res.curves, out / "omega.csv")
        meta.update({"mode": "round-trip", "model": io.model_to_config(model), "forward_residual": fwd.residual})
    meta.update({"residual": res.residual, "condition": res.condition, "warnings": res.warnings})
    io.write_meta(out / "meta.json", meta)
    print(f"residual {res.residual:.3g}, condition {res.condition:.3g}; wrote {out / 'omega.csv'}")


def cmd_fig1b(args):
    if args.config:
        with open(args.config) as fh:
            raw = json.load(fh)
        model_cfg = raw.get("model", raw) if isinstance(raw, dict) else raw
        cfg_kwargs = {"model_config": model_cfg}
    else:
        cfg_kwargs = {"p": args.p or 20, "gamma": args.gamma}
    cfg = ExperimentConfig(T_list=args.T or [20.0, 100.0, 400.0], replicates=args.reps, B=args.B, c8=args.c8,
                           extra_c8=args.extra_c8 or [], ref_M=args.ref_M, T_ref=args.T_ref,
                           master_seed=args.seed, **cfg_kwargs)
    res = fig1b_curve(cfg, workers=args.workers, out_dir=args.out, resume=not args.no_resume)
    write_fig1b(res, cfg, args.out)
    for row in res["rows"]:
        print(f"p={row[0]} T={row[1]:g} c8={row[3]:g}: P(A)={row[7]:.3f} +- {row[8]:.3f}")


def cmd_soloist(args):
    stream = _read_stream(args)
    if args.cov:
        est = io.read_cov_estimate(args.cov)
    else:
        h = bandwidth_rule(stream.horizon, args.r, args.bandwidth_const)
        est = estimate_cross_cov(stream, default_grid(h, args.B), SmoothingKernel(h))
    res = soloist_scores(stream, est)
    out = _out(args)
    io.write_table(out / "soloist.csv", ["component", "score"],
                   [[j + 1, s] for j, s in enumerate(res.scores)])
    meta = _base_meta(args, "soloist")
    meta.update({"undefined": [j + 1 for j in res.undefined]})
    io.write_meta(out / "meta.json", meta)
    for j, s in enumerate(res.scores):
        print(f"{j + 1}: {s:.4f}")


def _floats(text):
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ghawkes", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__} ({BACKEND} core)")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, model=True, seed=True, out=True):
        if model:
            p.add_argument("--config", help="model config (JSON)")
            p.add_argument("--p", type=int, help="block-model dimension when no --config is given")
            p.add_argument("--gamma", type=float, default=1.0, help="block-model kernel decay")
        if seed:
            p.add_argument("--seed", type=int, default=1, help="master seed (unsigned 64-bit)")
        if out:
            p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("simulate", help="simulate one realization")
    common(p)
    p.add_argument("--T", type=float, required=True)
    p.add_argument("--burn-in", type=float, help="default 50 / gamma_min")
    p.add_argument("--allow-unstable", action="store_true")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate-cov", help="smoothing cross-covariance estimate from an event file")
    common(p, model=False, seed=False)
    p.add_argument("--events", required=True)
    p.add_argument("--T", type=float, help="horizon (default: from meta.json or last event)")
    p.add_argument("--p", type=int, help="dimension (default: from meta.json or largest mark)")
    p.add_argument("--B", type=float, default=10.0)
    p.add_argument("--bandwidth", type=float)
    p.add_argument("--bandwidth-const", type=float, default=1.0)
    p.add_argument("--r", type=float, default=1.0)
    p.set_defaults(func=cmd_estimate_cov)

    p = sub.add_parser("check", help="check the stability and decay assumptions")
    common(p, seed=False, out=False)
    p.add_argument("--out")
    p.add_argument("--strict", action="store_true", help="treat every assumption as hard")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("couple", help="simulate a coupled pair")
    common(p)
    p.add_argument("--T", type=float, required=True)
    p.add_argument("--cut", type=float, required=True)
    p.add_argument("--burn-in", type=float)
    p.set_defaults(func=cmd_couple)

    p = sub.add_parser("deviation", help="Monte Carlo deviation profile of coupled pairs")
    common(p)
    p.add_argument("--T", type=float, required=True)
    p.add_argument("--cut", type=float, required=True)
    p.add_argument("--bin-width", type=float, default=1.0)
    p.add_argument("--reps", type=int, default=200)
    p.add_argument("--burn-in", type=float)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_deviation)

    p = sub.add_parser("wiener-hopf", help="discretized Wiener-Hopf solves")
    common(p, seed=False)
    p.add_argument("--cov", help="covariance estimate file; recover kernels from it")
    p.add_argument("--step", type=float)
    p.add_argument("--max-lag", type=float)
    p.set_defaults(func=cmd_wiener_hopf)

    p = sub.add_parser("reproduce-fig1b", help="event-A probability versus horizon")
    common(p)
    p.add_argument("--T", type=_floats, help="comma-separated horizons (default 20,100,400)")
    p.add_argument("--reps", type=int, default=50)
    p.add_argument("--B", type=float, default=10.0)
    p.add_argument("--c8", type=float, default=0.32)
    p.add_argument("--extra-c8", type=_floats)
    p.add_argument("--ref-M", type=int, default=100)
    p.add_argument("--T-ref", type=float, default=200.0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--no-resume", action="store_true")
    p.set_defaults(func=cmd_fig1b)

    p = sub.add_parser("soloist", help="soloist scores from an event file")
    common(p, model=False, seed=False)
    p.add_argument("--events", required=True)
    p.add_argument("--cov", help="precomputed covariance estimate")
    p.add_argument("--T", type=float)
    p.add_argument("--p", type=int)
    p.add_argument("--B", type=float, default=10.0)
    p.add_argument("--bandwidth-const", type=float, default=1.0)
    p.add_argument("--r", type=float, default=1.0)
    p.set_defaults(func=cmd_soloist)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        code = args.func(args)
    except GHawkesError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except KeyboardInterrupt:
        print("interrupted; completed replicates were flushed", file=sys.stderr)
        return 130
    return int(code or 0)


if __name__ == "__main__":
    sys.exit(main())
