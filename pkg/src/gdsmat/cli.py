"""Command-line entry point: ``gdsmat {recover,sweep,geometry,verify,calibrate}``.

Exit codes: 0 success, 1 bound verification failed, 2 solver failures above
the configured threshold, 3 configuration error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import experiment as ex
from . import geometry as geo
from .measurements import MeasurementSet, observe, sample
from .solver import GdsProblem, solve

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_SOLVER = 2
EXIT_CONFIG = 3


def _load_config(args) -> ex.ExperimentConfig:
    if args.config is None:
        raise ex.ConfigError("--config is required")
    cfg = ex.ExperimentConfig.from_json(args.config)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    return cfg


def _out_dir(args, cfg=None) -> Path:
    out = args.out or (cfg.output if cfg is not None else None) or "."
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _dump(path: Path, data) -> None:
    path.write_text(json.dumps(geo._jsonable(data), indent=2, sort_keys=True) + "\n")


def cmd_recover(args) -> int:
    cfg = _load_config(args)
    out = _out_dir(args, cfg)
    norm = ex.build_norm(cfg)
    ens = cfg.build_ensemble()
    theta_star = None
    if cfg.theta_star_path:
        theta_star = ex.read_matrix(cfg.theta_star_path)
        if theta_star.shape != (cfg.d, cfg.p):
            raise ex.ConfigError(f"theta_star has shape {theta_star.shape}, config says {(cfg.d, cfg.p)}")
    if cfg.y_path:
        y = np.atleast_1d(np.loadtxt(cfg.y_path, ndmin=1))
        xs = sample(ens, y.size, cfg.seed)
        data = MeasurementSet(ens, xs, y, cfg.seed, cfg.noise_kind, cfg.tau)
    else:
        if theta_star is None:
            theta_star = ex.make_ground_truth(cfg)
        xs = sample(ens, cfg.n_grid[0], cfg.seed)
        y, omega = observe(xs, theta_star, cfg.noise_kind, cfg.tau, cfg.seed)
        data = MeasurementSet(ens, xs, y, cfg.seed, cfg.noise_kind, cfg.tau, omega)
    lams = ex.lambda_table(replace(cfg, n_grid=[data.n]))[data.n]
    lam = ex._lambda_for(cfg, lams)
    sol = solve(GdsProblem(norm, data, lam), cfg.solver)
    ex.write_matrix(out / "theta_hat.csv", sol.theta_hat)
    sol.write_log(out / "iterations.csv")
    data.save(out / "measurements")
    info = {
        "n": data.n, "lambda": lam, "objective": sol.objective,
        "constraint_residual": sol.constraint_residual, "iterations": sol.iterations,
        "converged": sol.converged,
    }
    if theta_star is not None:
        ex.write_matrix(out / "theta_star.csv", theta_star)
        err = float(np.linalg.norm(sol.theta_hat - theta_star))
        info.update(error=err, rel_error=err / float(np.linalg.norm(theta_star)))
    _dump(out / "solution.json", info)
    print(json.dumps(geo._jsonable(info), indent=2))
    return EXIT_OK if sol.converged else EXIT_SOLVER


def cmd_sweep(args) -> int:
    cfg = _load_config(args)
    out = _out_dir(args, cfg)
    result = ex.run_sweep(cfg, threads=args.threads, out=out)
    print(json.dumps(geo._jsonable(result.summary()), indent=2))
    if result.failed:
        print(f"{result.failures} of {len(result.records)} solves did not converge", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


def cmd_geometry(args) -> int:
    cfg = _load_config(args)
    out = _out_dir(args, cfg)
    theta_star = ex.make_ground_truth(cfg)
    if cfg.theta_star_path:
        theta_star = ex.read_matrix(cfg.theta_star_path)
    geometry = ex.sweep_geometry(cfg, theta_star, ex.lambda_table(cfg))
    _dump(out / "geometry.json", geometry.to_dict())
    print(json.dumps(geometry.to_dict(), indent=2))
    return EXIT_OK


def cmd_verify(args) -> int:
    if args.records:
        src = Path(args.records)
        records = ex.read_records(src / "records.csv")
        geometry = ex.SweepGeometry.from_dict(json.loads((src / "geometry.json").read_text()))
        out = Path(args.out) if args.out else src
        out.mkdir(parents=True, exist_ok=True)
        failed = False
    else:
        cfg = _load_config(args)
        out = _out_dir(args, cfg)
        result = ex.run_sweep(cfg, threads=args.threads, out=out)
        records, geometry, failed = result.records, result.geometry, result.failed
    summary = ex.verify_bounds(records, geometry)
    _dump(out / "verify.json", summary)
    print(summary["message"])
    if failed:
        return EXIT_SOLVER
    return EXIT_OK if summary["passed"] else EXIT_VERIFY_FAILED


def cmd_calibrate(args) -> int:
    desc = {}
    if args.config is not None:
        try:
            desc = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ex.ConfigError(f"cannot read config {args.config}: {exc}") from exc
    try:
        cal = ex.CalibrationConfig.from_dict(desc)
    except (TypeError, ValueError) as exc:
        raise ex.ConfigError(str(exc)) from exc
    if args.seed is not None:
        cal = replace(cal, seed=args.seed)
    out = _out_dir(args)
    result = ex.calibrate(cal, threads=args.threads)
    _dump(out / "calibration.json", result)
    print(json.dumps({"xi": result["xi"], "c0": result["c0"]}, indent=2))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gdsmat", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log solver progress")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="experiment config (JSON)")
        p.add_argument("--out", help="output directory")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--threads", type=int, default=1, help="worker processes for trials")
        return p

    common(sub.add_parser("recover", help="solve one instance and write theta_hat.csv")).set_defaults(func=cmd_recover)
    common(sub.add_parser("sweep", help="run the full n grid")).set_defaults(func=cmd_sweep)
    common(sub.add_parser("geometry", help="geometry report only")).set_defaults(func=cmd_geometry)
    verify = common(sub.add_parser("verify", help="check observed errors against the bound"))
    verify.add_argument("--records", help="existing sweep output directory to verify instead of rerunning")
    verify.set_defaults(func=cmd_verify)
    common(sub.add_parser("calibrate", help="fit xi and c0 on a calibration grid")).set_defaults(func=cmd_calibrate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ex.ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
