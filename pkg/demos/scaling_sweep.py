"""Error against sample size on a small grid, for both norms.

A reduced version of ``configs/scaling_*.json`` that runs in well under a
minute.  Writes each sweep to ``demo_output/<norm>/`` and prints the
log-log slope of the median error.

    python3 demos/scaling_sweep.py
"""

from pathlib import Path

from gdsmat.experiment import ExperimentConfig, run_sweep

base = {
    "shape": {"d": 10, "p": 10},
    "rank": 2,
    "noise": {"kind": "gaussian", "tau": 0.1},
    "n_grid": [200, 400, 800, 1600],
    "trials": 4,
    "lambda": {"rule": "empirical", "samples": 100},
    "geometry": {"samples": 1000},
    "seed": 0,
}

for norm in ({"kind": "trace"}, {"kind": "ksupport", "k": 2}):
    cfg = ExperimentConfig.from_dict({**base, "norm": norm})
    res = run_sweep(cfg, out=Path("demo_output") / norm["kind"])
    summary = res.summary()
    print(norm["kind"])
    for n, err in summary["median_error"].items():
        print(f"  n={n:>5}  median error {err:.4f}")
    print(f"  slope {summary['loglog_slope']:.3f}  (n^-1/2 would give -0.5)")
