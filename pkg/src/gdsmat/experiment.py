"""Config-driven recovery sweeps, bound verification and constant calibration.

A sweep draws one ground truth, then for every ``n`` in the grid and every
trial generates fresh measurements and noise, picks ``lambda`` by the
configured rule, solves the Dantzig program and records the error.  Trial
``t`` uses the same seed at every ``n``; because measurement streams are
prefix-reproducible the designs are nested across the grid.
"""

from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import geometry as geo
from .gauges import gauge_from_dict
from .measurements import Ensemble, MeasurementSet, forward, stream
from .solver import GdsProblem, SolverOptions, check_solution, solve
from .spectral import SpectralNorm

__all__ = [
    "CalibrationConfig",
    "ConfigError",
    "ExperimentConfig",
    "SweepGeometry",
    "SweepResult",
    "TrialRecord",
    "build_norm",
    "calibrate",
    "loglog_slope",
    "make_ground_truth",
    "read_matrix",
    "read_records",
    "run_sweep",
    "run_trial",
    "trial_seed",
    "verify_bounds",
    "write_matrix",
    "write_records",
]

GROUND_TRUTH_STREAM = 3
TRIAL_STREAM = 4


class ConfigError(ValueError):
    """Invalid experiment or calibration configuration."""


# ---------------------------------------------------------------- matrix files


def write_matrix(path, matrix) -> None:
    """CSV with a ``# rows,cols`` header and one matrix row per line."""
    matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
    with open(path, "w") as fh:
        fh.write(f"# {matrix.shape[0]},{matrix.shape[1]}\n")
        for row in matrix:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def read_matrix(path) -> np.ndarray:
    out = np.atleast_2d(np.loadtxt(path, delimiter=",", comments="#", ndmin=2))
    with open(path) as fh:
        head = fh.readline()
    if head.startswith("#"):
        rows, cols = (int(v) for v in head[1:].split(","))
        if out.shape != (rows, cols):
            raise ValueError(f"{path}: header says {rows}x{cols}, found {out.shape}")
    return out


# ---------------------------------------------------------------- configuration


def _spectrum_ok(spectrum) -> bool:
    return spectrum in ("flat", "linear-decay") or isinstance(spectrum, list)


@dataclass
class ExperimentConfig:
    """Everything needed to reproduce a sweep.

    ``lambda_rule`` is ``"empirical"`` (quantile of simulated noise
    correlations), ``"theory"`` (width formula with calibrated ``c0``) or
    ``"fixed"`` (``lambda_value``).  ``xi`` and ``c0`` of ``None`` fall back
    to the shipped calibration.
    """

    d: int
    p: int
    rank: int
    n_grid: list
    norm: dict = field(default_factory=lambda: {"kind": "trace"})
    ensemble: dict = field(default_factory=lambda: {"kind": "gaussian"})
    spectrum: object = "flat"
    normalize: bool = True
    noise_kind: str | None = "gaussian"
    tau: float = 0.1
    trials: int = 10
    lambda_rule: str = "empirical"
    lambda_value: float | None = None
    lambda_quantile: float = 0.95
    lambda_samples: int = 200
    xi: float | None = None
    c0: float | None = None
    geometry_samples: int = 10_000
    width_source: str = "bound"
    solver: SolverOptions = field(default_factory=SolverOptions)
    seed: int = 0
    output: str | None = None
    max_failure_fraction: float = 0.1
    theta_star_path: str | None = None
    y_path: str | None = None

    def __post_init__(self):
        if not 1 <= self.rank <= self.d <= self.p:
            raise ConfigError("need 1 <= rank <= d <= p")
        if not self.n_grid or any(int(n) < 1 for n in self.n_grid):
            raise ConfigError("n_grid must hold positive measurement counts")
        if list(self.n_grid) != sorted(self.n_grid):
            raise ConfigError("n_grid must be ascending")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.lambda_rule not in ("empirical", "theory", "fixed"):
            raise ConfigError(f"unknown lambda rule {self.lambda_rule!r}")
        if self.lambda_rule == "fixed" and self.lambda_value is None:
            raise ConfigError("fixed lambda rule needs lambda_value")
        if self.width_source not in ("bound", "mc"):
            raise ConfigError("width_source must be 'bound' or 'mc'")
        if not _spectrum_ok(self.spectrum):
            raise ConfigError(f"unknown spectrum {self.spectrum!r}")
        if self.tau < 0:
            raise ConfigError("tau must be nonnegative")
        try:
            build_norm(self)
            self.build_ensemble()
        except (KeyError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_dict(cls, desc: dict) -> "ExperimentConfig":
        """Parse the nested JSON layout documented in the README."""
        desc = dict(desc)
        try:
            shape = desc.pop("shape")
            kw = {"d": int(shape["d"]), "p": int(shape["p"]), "rank": int(desc.pop("rank"))}
            kw["n_grid"] = [int(n) for n in desc.pop("n_grid")]
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"missing or malformed field: {exc}") from exc
        noise = desc.pop("noise", None)
        if noise is not None:
            kw["noise_kind"] = noise.get("kind", "gaussian")
            kw["tau"] = float(noise.get("tau", 0.1))
        lam = desc.pop("lambda", None)
        if lam is not None:
            kw["lambda_rule"] = lam.get("rule", "empirical")
            kw["lambda_value"] = lam.get("value")
            kw["lambda_quantile"] = float(lam.get("quantile", 0.95))
            kw["lambda_samples"] = int(lam.get("samples", 200))
        consts = desc.pop("constants", None) or {}
        kw["xi"], kw["c0"] = consts.get("xi"), consts.get("c0")
        geom = desc.pop("geometry", None) or {}
        if "samples" in geom:
            kw["geometry_samples"] = int(geom["samples"])
        if "width_source" in geom:
            kw["width_source"] = geom["width_source"]
        try:
            kw["solver"] = SolverOptions.from_dict(desc.pop("solver", None))
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc
        names = {f.name for f in fields(cls)}
        unknown = set(desc) - names
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        kw.update(desc)
        return cls(**kw)

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        try:
            desc = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(desc)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["solver"] = asdict(self.solver)
        return out

    def build_ensemble(self) -> Ensemble:
        return Ensemble.from_dict(self.ensemble, self.d, self.p)


def build_norm(config) -> SpectralNorm:
    """Spectral norm for the config; a k-support descriptor without ``k`` uses the rank."""
    desc = dict(config.norm)
    kind = str(desc.get("kind", "")).lower().replace("-", "").replace("_", "")
    if kind in ("ksupport", "kyfan") and "k" not in desc:
        desc["k"] = config.rank
    return SpectralNorm(gauge_from_dict(desc, dim=min(config.d, config.p)), config.d, config.p)


def _spectrum(spectrum, r: int, normalize: bool) -> np.ndarray:
    if spectrum == "flat":
        s = np.ones(r)
    elif spectrum == "linear-decay":
        s = np.arange(r, 0, -1, dtype=float)
    else:
        s = np.sort(np.asarray(spectrum, dtype=float))[::-1]
        if s.size != r:
            raise ConfigError(f"custom spectrum has {s.size} entries, rank is {r}")
        if not s[-1] > 0:
            raise ConfigError("custom spectrum entries must be positive")
    return s / np.linalg.norm(s) if normalize else s


def make_ground_truth(config: ExperimentConfig, seed: int | None = None) -> np.ndarray:
    """Rank-``r`` matrix ``U diag(sigma) V^T`` with Haar-distributed factors."""
    seed = config.seed if seed is None else seed
    sigma = _spectrum(config.spectrum, config.rank, config.normalize)
    rng = stream(seed, GROUND_TRUTH_STREAM)
    u, _ = np.linalg.qr(rng.standard_normal((config.d, config.rank)))
    v, _ = np.linalg.qr(rng.standard_normal((config.p, config.rank)))
    return (u * sigma) @ v.T


def trial_seed(seed: int, trial: int) -> int:
    return int(np.random.SeedSequence(int(seed), spawn_key=(TRIAL_STREAM, trial)).generate_state(1)[0])


# ---------------------------------------------------------------- trials


@dataclass
class TrialRecord:
    n: int
    trial: int
    seed: int
    lam: float
    error: float
    rel_error: float
    norm_hat: float
    norm_star: float
    residual: float
    iterations: int
    converged: bool
    noise_dual_norm: float
    wall_time: float


_RECORD_FIELDS = [f.name for f in fields(TrialRecord)]


def write_records(path, records) -> None:
    """CSV sorted by ``(n, trial)``; floats use ``repr`` so reruns are byte-identical."""
    rows = sorted(records, key=lambda r: (r.n, r.trial))
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_RECORD_FIELDS)
        for rec in rows:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in astuple_record(rec)])


def astuple_record(rec: TrialRecord) -> list:
    return [getattr(rec, name) for name in _RECORD_FIELDS]


def read_records(path) -> list:
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out.append(TrialRecord(
                n=int(row["n"]), trial=int(row["trial"]), seed=int(row["seed"]),
                lam=float(row["lam"]), error=float(row["error"]), rel_error=float(row["rel_error"]),
                norm_hat=float(row["norm_hat"]), norm_star=float(row["norm_star"]),
                residual=float(row["residual"]), iterations=int(row["iterations"]),
                converged=row["converged"] == "True", noise_dual_norm=float(row["noise_dual_norm"]),
                wall_time=float(row["wall_time"]),
            ))
    return out


def run_trial(config: ExperimentConfig, theta_star, n: int, trial: int, lam: float) -> TrialRecord:
    """One fresh draw of measurements and noise, solved at the given ``lambda``."""
    start = time.perf_counter()
    norm = build_norm(config)
    seed = trial_seed(config.seed, trial)
    data = MeasurementSet.generate(config.build_ensemble(), n, theta_star, seed,
                                   config.noise_kind, config.tau)
    sol = solve(GdsProblem(norm, data, lam), config.solver)
    noise_corr = norm.dual(np.tensordot(data.omega, data.xs, axes=1))
    err = float(np.linalg.norm(sol.theta_hat - theta_star))
    star_fro = float(np.linalg.norm(theta_star))
    return TrialRecord(
        n=n, trial=trial, seed=seed, lam=float(lam), error=err,
        rel_error=err / star_fro if star_fro > 0 else err,
        norm_hat=float(sol.objective), norm_star=norm.eval(theta_star),
        residual=float(sol.constraint_residual), iterations=int(sol.iterations),
        converged=bool(sol.converged), noise_dual_norm=float(noise_corr),
        wall_time=time.perf_counter() - start,
    )


def _run_trial_job(args):
    return run_trial(*args)


def _map(func, jobs, threads: int):
    if threads <= 1 or len(jobs) <= 1:
        return [func(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(func, jobs))


# ---------------------------------------------------------------- sweeps


@dataclass
class SweepGeometry:
    """Geometry report at the first grid point plus per-``n`` predictions."""

    report: geo.GeometryReport
    per_n: list

    def at(self, n: int) -> dict:
        for row in self.per_n:
            if row["n"] == n:
                return row
        raise KeyError(f"no prediction for n={n}")

    def to_dict(self) -> dict:
        return {"report": self.report.to_dict(), "per_n": geo._jsonable(self.per_n)}

    @classmethod
    def from_dict(cls, data: dict) -> "SweepGeometry":
        per_n = [{k: (math.inf if v == "inf" else v) for k, v in row.items()} for row in data["per_n"]]
        return cls(geo.GeometryReport.from_dict(data["report"]), per_n)


@dataclass
class SweepResult:
    config: ExperimentConfig
    theta_star: np.ndarray
    records: list
    geometry: SweepGeometry

    @property
    def failures(self) -> int:
        return sum(not r.converged for r in self.records)

    @property
    def failed(self) -> bool:
        return self.failures > self.config.max_failure_fraction * len(self.records)

    def medians(self) -> dict:
        out = {}
        for n in self.config.n_grid:
            out[n] = float(np.median([r.error for r in self.records if r.n == n]))
        return out

    def summary(self) -> dict:
        med = self.medians()
        ns = sorted(med)
        slope = loglog_slope(ns, [med[n] for n in ns]) if len(ns) > 1 else None
        return {
            "median_error": {str(n): med[n] for n in ns},
            "median_rel_error": {
                str(n): float(np.median([r.rel_error for r in self.records if r.n == n])) for n in ns
            },
            "loglog_slope": slope,
            "trials": len(self.records),
            "failures": self.failures,
        }


def loglog_slope(ns, values) -> float:
    """Least-squares slope of ``log(values)`` against ``log(ns)``."""
    return float(np.polyfit(np.log(np.asarray(ns, float)), np.log(np.asarray(values, float)), 1)[0])


def _resolved_constants(config):
    cal = geo.default_calibration()
    xi = cal["xi"] if config.xi is None else config.xi
    c0 = cal["c0"] if config.c0 is None else config.c0
    return xi, c0


def sweep_geometry(config: ExperimentConfig, theta_star, lambda_table: dict) -> SweepGeometry:
    norm = build_norm(config)
    ens = config.build_ensemble()
    xi, c0 = _resolved_constants(config)
    n0 = config.n_grid[0]
    report = geo.geometry_report(
        norm, theta_star, n0, ens, config.tau, config.noise_kind, xi=xi, c0=c0,
        samples=config.geometry_samples, lambda_samples=config.lambda_samples,
        quantile=config.lambda_quantile,
        lambda_rule="theory" if config.lambda_rule == "theory" else "empirical",
        width_source=config.width_source, seed=config.seed, lambdas=lambda_table[n0],
    )
    width = report.width_cone_bound if config.width_source == "bound" else report.width_cone_mc.value
    per_n = []
    for n in config.n_grid:
        alpha = geo.alpha_pred(ens.kappa, n, width, xi)
        lam = _lambda_for(config, lambda_table[n])
        per_n.append({
            "n": n,
            "alpha_pred": alpha,
            "lambda_theory": lambda_table[n]["lambda_theory"],
            "lambda_empirical": lambda_table[n]["lambda_empirical"],
            "lambda_used": lam,
            "error_bound_pred": geo.error_bound_pred(report.psi_bound, lam, alpha),
        })
    return SweepGeometry(report, per_n)


def _lambda_for(config, lams: dict) -> float:
    if config.lambda_rule == "fixed":
        return float(config.lambda_value)
    return lams["lambda_theory"] if config.lambda_rule == "theory" else lams["lambda_empirical"]


def lambda_table(config: ExperimentConfig) -> dict:
    norm = build_norm(config)
    ens = config.build_ensemble()
    _, c0 = _resolved_constants(config)
    table = {}
    for n in config.n_grid:
        if config.lambda_rule == "fixed":
            # still report both rules, but skip the Monte Carlo when it is unused
            table[n] = {"lambda_theory": geo.lambda_theory(norm, n, config.tau, ens.kappa, c0),
                        "lambda_empirical": math.nan}
            continue
        table[n] = geo.lambda_rules(norm, ens, n, config.tau, ens.kappa, c0, config.lambda_samples,
                                    config.lambda_quantile, config.seed, config.noise_kind or "gaussian")
    return table


_PLOT_SCRIPT = '''"""Plot median recovery error against n on log-log axes (needs matplotlib)."""
import csv
import statistics
import sys
from collections import defaultdict

import matplotlib.pyplot as plt

path = sys.argv[1] if len(sys.argv) > 1 else "records.csv"
errors = defaultdict(list)
with open(path, newline="") as fh:
    for row in csv.DictReader(fh):
        errors[int(row["n"])].append(float(row["error"]))
ns = sorted(errors)
plt.loglog(ns, [statistics.median(errors[n]) for n in ns], "o-", label="median error")
plt.loglog(ns, [statistics.median(errors[ns[0]]) * (ns[0] / n) ** 0.5 for n in ns], "k--",
           label="slope -1/2")
plt.xlabel("n")
plt.ylabel("Frobenius error")
plt.legend()
plt.savefig("errors.png", dpi=150)
'''


def run_sweep(config: ExperimentConfig, threads: int = 1, out=None, theta_star=None) -> SweepResult:
    """Run every trial of the grid and optionally write results to ``out``.

    Written files: ``records.csv``, ``geometry.json``, ``summary.json``,
    ``config.json``, ``theta_star.csv`` and ``plot_errors.py``.
    """
    theta_star = make_ground_truth(config) if theta_star is None else np.asarray(theta_star, float)
    lams = lambda_table(config)
    jobs = [(config, theta_star, n, t, _lambda_for(config, lams[n]))
            for n in config.n_grid for t in range(config.trials)]
    records = _map(_run_trial_job, jobs, threads)
    records.sort(key=lambda r: (r.n, r.trial))
    result = SweepResult(config, theta_star, records, sweep_geometry(config, theta_star, lams))
    out = out if out is not None else config.output
    if out is not None:
        write_sweep(result, out)
    return result


def write_sweep(result: SweepResult, out) -> None:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    write_records(out / "records.csv", result.records)
    (out / "geometry.json").write_text(json.dumps(result.geometry.to_dict(), indent=2, sort_keys=True) + "\n")
    summary = geo._jsonable(result.summary())
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    (out / "config.json").write_text(json.dumps(result.config.to_dict(), indent=2, sort_keys=True) + "\n")
    write_matrix(out / "theta_star.csv", result.theta_star)
    (out / "plot_errors.py").write_text(_PLOT_SCRIPT)


# ---------------------------------------------------------------- verification


def verify_bounds(records, geometry: SweepGeometry, threshold: float = 0.95) -> dict:
    """Compare observed errors with ``2 psi lambda / alpha`` trial by trial.

    Trials whose ``lambda`` is below the realized noise correlation are
    flagged and excluded, as are noiseless trials and grid points where the
    predicted restricted eigenvalue is zero.
    """
    report = geometry.report
    flagged, vacuous, noiseless, checked = [], 0, 0, []
    for rec in records:
        alpha = geometry.at(rec.n)["alpha_pred"]
        if rec.noise_dual_norm == 0:
            noiseless += 1
            continue
        if rec.lam < rec.noise_dual_norm:
            flagged.append({"n": rec.n, "trial": rec.trial, "flag": "lambda below noise correlation"})
            continue
        if alpha <= 0:
            vacuous += 1
            continue
        bound = geo.error_bound_pred(report.psi_bound, rec.lam, alpha)
        checked.append({"n": rec.n, "trial": rec.trial, "error": rec.error, "bound": bound,
                        "ok": rec.error <= bound})
    cone, ball = report.width_cone_mc, report.width_ball_mc
    widths = {
        "cone_mc": cone.value, "cone_stderr": cone.stderr, "cone_bound": report.width_cone_bound,
        "cone_ok": cone.value <= report.width_cone_bound + 3 * cone.stderr,
        "ball_mc": ball.value, "ball_stderr": ball.stderr, "ball_bound": report.width_ball_bound,
        "ball_ok": ball.value <= report.width_ball_bound + 3 * ball.stderr,
    }
    summary = {
        "checked": len(checked),
        "satisfied": sum(c["ok"] for c in checked),
        "condition_violated": flagged,
        "vacuous": vacuous,
        "noiseless": noiseless,
        "threshold": threshold,
        "widths": widths,
        "trials": checked,
    }
    if not checked:
        summary.update(fraction=None, status="vacuous", passed=widths["cone_ok"] and widths["ball_ok"],
                       message="bound vacuous at all n")
    else:
        frac = summary["satisfied"] / len(checked)
        ok = frac >= threshold and widths["cone_ok"] and widths["ball_ok"]
        summary.update(fraction=frac, status="pass" if ok else "fail", passed=ok,
                       message=f"{summary['satisfied']}/{len(checked)} trials within the predicted bound")
    return geo._jsonable(summary)


# ---------------------------------------------------------------- calibration


@dataclass
class CalibrationConfig:
    """Grid on which ``c0`` and ``xi`` are fitted.

    ``shapes`` lists ``[d, p, r]`` triples.  ``c0`` is the smallest value
    with the theory ``lambda`` above the ``quantile`` of simulated noise
    correlations everywhere on the grid.  ``xi`` is the smallest value
    keeping the predicted restricted eigenvalue below the observed
    ``||A Delta||^2 / ||Delta||^2`` of every calibration solve.
    """

    shapes: list = field(default_factory=lambda: [[12, 12, 1], [16, 16, 2], [16, 24, 2]])
    n_grid: list = field(default_factory=lambda: [500, 1000, 2000])
    norms: list = field(default_factory=lambda: [{"kind": "trace"}, {"kind": "ksupport"}])
    spectra: list = field(default_factory=lambda: ["flat", "linear-decay"])
    ensemble: dict = field(default_factory=lambda: {"kind": "gaussian"})
    noise_kind: str = "gaussian"
    tau: float = 0.1
    trials: int = 3
    lambda_samples: int = 200
    quantile: float = 0.99
    solver: SolverOptions = field(default_factory=SolverOptions)
    seed: int = 7

    @classmethod
    def from_dict(cls, desc: dict) -> "CalibrationConfig":
        desc = dict(desc.get("calibration", desc))
        if "solver" in desc:
            desc["solver"] = SolverOptions.from_dict(desc["solver"])
        unknown = set(desc) - {f.name for f in fields(cls)}
        if unknown:
            raise ConfigError(f"unknown calibration fields: {sorted(unknown)}")
        cfg = cls(**desc)
        for shape in cfg.shapes:
            if len(shape) != 3 or not 1 <= shape[2] <= shape[0] <= shape[1]:
                raise ConfigError(f"bad calibration shape {shape}")
        return cfg

    def experiments(self):
        for d, p, r in self.shapes:
            for spectrum in self.spectra:
                for norm in self.norms:
                    yield ExperimentConfig(
                        d=d, p=p, rank=r, n_grid=list(self.n_grid), norm=norm, ensemble=self.ensemble,
                        spectrum=spectrum, noise_kind=self.noise_kind, tau=self.tau, trials=self.trials,
                        lambda_rule="theory", solver=self.solver, seed=self.seed,
                    )


def _calibration_solve(args):
    config, theta_star, n, trial, lam = args
    norm = build_norm(config)
    seed = trial_seed(config.seed, trial)
    data = MeasurementSet.generate(config.build_ensemble(), n, theta_star, seed, config.noise_kind, config.tau)
    sol = solve(GdsProblem(norm, data, lam), config.solver)
    delta = sol.theta_hat - theta_star
    fro2 = float(np.sum(delta**2))
    ratio = float(np.sum(forward(data.xs, delta) ** 2) / fro2) if fro2 > 0 else math.inf
    return {"ratio": ratio, "converged": sol.converged,
            "feasible_star": check_solution(GdsProblem(norm, data, lam), theta_star)["feasible"]}


def calibrate(cal: CalibrationConfig, threads: int = 1) -> dict:
    ens_cache = {}
    c0 = 0.0
    rows = []
    experiments = list(cal.experiments())
    for cfg in experiments:
        norm = build_norm(cfg)
        ens = cfg.build_ensemble()
        nu = norm.gauge.constants().nu
        for n in cfg.n_grid:
            key = (cfg.d, cfg.p, n)
            if key not in ens_cache:
                ens_cache[key] = geo.noise_correlation_draws(ens, n, cal.noise_kind, cal.tau,
                                                             cal.lambda_samples, cal.seed)
            q = float(np.quantile([norm.dual(m) for m in ens_cache[key]], cal.quantile))
            need = q / (ens.kappa * cal.tau * math.sqrt(n) * geo.width_ball_bound(nu, cfg.d, cfg.p))
            c0 = max(c0, need)
    jobs, meta = [], []
    for cfg in experiments:
        theta_star = make_ground_truth(cfg)
        norm = build_norm(cfg)
        decomp = norm.decompose(theta_star)
        width = geo.width_cone_bound(cfg.d, cfg.p, cfg.rank, decomp.rho)
        ens = cfg.build_ensemble()
        for n in cfg.n_grid:
            lam = geo.lambda_theory(norm, n, cal.tau, ens.kappa, c0)
            for t in range(cfg.trials):
                jobs.append((cfg, theta_star, n, t, lam))
                meta.append((cfg, n, width, ens.kappa))
    results = _map(_calibration_solve, jobs, threads)
    xi = 0.0
    for (cfg, n, width, kappa), res in zip(meta, results):
        need = (1 - res["ratio"] / n) * math.sqrt(n) / (kappa**2 * width)
        xi = max(xi, need)
        rows.append({"d": cfg.d, "p": cfg.p, "r": cfg.rank, "norm": cfg.norm, "spectrum": cfg.spectrum,
                     "n": n, "ratio_over_n": res["ratio"] / n, "xi_needed": need,
                     "converged": res["converged"], "feasible_star": res["feasible_star"]})
    grid = asdict(cal)
    grid["solver"] = asdict(cal.solver)
    return {"xi": xi, "c0": c0, "grid": grid, "solves": rows}
