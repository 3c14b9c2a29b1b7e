import csv
import json

import cvxpy as cp
import numpy as np
import pytest
from numpy.testing import assert_allclose

from gdsmat.gauges import L1, KSupport, KyFan, UnsupportedOperation
from gdsmat.measurements import Ensemble, MeasurementSet, adjoint
from gdsmat.solver import GdsProblem, SolverOptions, check_solution, solve
from gdsmat.spectral import SpectralNorm


def instance(d, p, r, n, tau, seed, gauge=None):
    rng = np.random.default_rng(seed)
    u, _ = np.linalg.qr(rng.standard_normal((d, r)))
    v, _ = np.linalg.qr(rng.standard_normal((p, r)))
    theta = (u * np.ones(r) / np.sqrt(r)) @ v.T
    ens = Ensemble("gaussian", d, p)
    data = MeasurementSet.generate(ens, n, theta, seed, "gaussian" if tau else None, tau)
    norm = SpectralNorm(gauge or L1(min(d, p)), d, p)
    return norm, data, theta


def cvx_trace_gds(data, lam):
    n, d, p = data.xs.shape
    a = data.xs.reshape(n, -1)
    t = cp.Variable((d, p))
    m = cp.reshape(a.T @ (a @ cp.vec(t, order="C") - data.y), (d, p), order="C")
    prob = cp.Problem(cp.Minimize(cp.normNuc(t)), [cp.sigma_max(m) <= lam])
    prob.solve(solver="CLARABEL")
    return prob.value


def test_zero_truth_gives_zero():
    norm, data, _ = instance(4, 5, 1, 10, 0.0, 0)
    data.y = np.zeros(data.n)
    sol = solve(GdsProblem(norm, data, 0.5))
    assert sol.converged
    assert_allclose(sol.theta_hat, 0)
    assert sol.objective == 0


def test_problem_validation():
    norm, data, _ = instance(4, 4, 1, 10, 0.0, 0)
    with pytest.raises(ValueError):
        GdsProblem(norm, data, -1.0)
    with pytest.raises(ValueError):
        GdsProblem(SpectralNorm(L1(3), 3, 4), data, 1.0)
    with pytest.raises(UnsupportedOperation):
        solve(GdsProblem(SpectralNorm(KyFan(4, 2), 4, 4), data, 1.0))


def test_matches_conic_oracle_small():
    for seed in range(3):
        norm, data, _ = instance(4, 4, 1, 10, 0.1, seed)
        lam = norm.dual(adjoint(data.xs, data.omega))
        sol = solve(GdsProblem(norm, data, lam), SolverOptions(feas_tol=1e-7))
        assert sol.converged
        ref = cvx_trace_gds(data, lam)
        assert abs(sol.objective - ref) <= 1e-4 * ref
        assert sol.constraint_residual <= 1e-6


def test_noiseless_exact_recovery():
    norm, data, theta = instance(10, 10, 1, 200, 0.0, 4)
    scale = norm.dual(adjoint(data.xs, data.y))
    sol = solve(GdsProblem(norm, data, 1e-6 * scale))
    assert sol.converged
    assert np.linalg.norm(sol.theta_hat - theta) / np.linalg.norm(theta) <= 1e-3


@pytest.mark.parametrize("gauge", [L1(8), KSupport(8, 2)], ids=repr)
def test_error_cone_membership(gauge):
    norm, data, theta = instance(8, 8, 2, 150, 0.1, 5, gauge)
    lam = 1.2 * norm.dual(adjoint(data.xs, data.omega))
    problem = GdsProblem(norm, data, lam)
    assert check_solution(problem, theta)["feasible"]
    opts = SolverOptions()
    sol = solve(problem, opts)
    assert sol.converged
    assert sol.objective <= norm.eval(theta) * (1 + opts.opt_tol) + 1e-9
    report = check_solution(problem, sol.theta_hat)
    assert report["constraint"] <= lam + 1e-7 * norm.dual(adjoint(data.xs, data.y))


def test_check_solution_flags_infeasible():
    norm, data, theta = instance(5, 5, 1, 40, 0.1, 6)
    lam = norm.dual(adjoint(data.xs, data.omega))
    report = check_solution(GdsProblem(norm, data, lam), 5 * theta + 1)
    assert not report["feasible"]
    assert report["residual"] > 0
    assert set(report) >= {"feasible", "objective", "residual"}


def test_scale_equivariance():
    norm, data, _ = instance(6, 6, 1, 60, 0.1, 7)
    lam = norm.dual(adjoint(data.xs, data.omega))
    base = solve(GdsProblem(norm, data, lam))
    scaled = MeasurementSet(data.ensemble, data.xs, 3.0 * data.y, data.seed)
    big = solve(GdsProblem(norm, scaled, 3.0 * lam))
    assert_allclose(big.objective, 3.0 * base.objective, rtol=1e-5)
    diff = np.linalg.norm(big.theta_hat - 3.0 * base.theta_hat) / np.linalg.norm(big.theta_hat)
    assert diff <= 1e-3


def test_deterministic():
    norm, data, _ = instance(5, 6, 1, 50, 0.1, 8)
    lam = norm.dual(adjoint(data.xs, data.omega))
    a = solve(GdsProblem(norm, data, lam))
    b = solve(GdsProblem(norm, data, lam))
    assert a.theta_hat.tobytes() == b.theta_hat.tobytes()
    assert a.iterations == b.iterations


def test_gap_history_settles():
    norm, data, _ = instance(6, 6, 2, 80, 0.1, 9)
    lam = norm.dual(adjoint(data.xs, data.omega))
    sol = solve(GdsProblem(norm, data, lam), SolverOptions(check_every=1))
    gaps = np.abs(sol.gap_history)
    burn = len(gaps) // 4
    # allow oscillation: the running max over a 50-iteration window never increases
    windowed = [gaps[i:i + 50].max() for i in range(burn, len(gaps) - 50)]
    assert all(b <= a * (1 + 1e-6) + 1e-12 for a, b in zip(windowed, windowed[1:]))


def test_options_json(tmp_path):
    path = tmp_path / "opts.json"
    path.write_text(json.dumps({"max_iter": 10, "feas_tol": 1e-3, "opt_tol": 1e-6, "step_scale": 0.9,
                                "log_every": 0}))
    opts = SolverOptions.from_json(path)
    assert opts.max_iter == 10 and opts.step_scale == 0.9
    with pytest.raises(ValueError):
        SolverOptions.from_dict({"max_iters": 3})


def test_max_iter_reports_not_converged(tmp_path):
    norm, data, _ = instance(6, 6, 1, 60, 0.1, 10)
    lam = norm.dual(adjoint(data.xs, data.omega))
    sol = solve(GdsProblem(norm, data, lam), SolverOptions(max_iter=30, check_every=10))
    assert not sol.converged
    assert sol.iterations == 30
    sol.write_log(tmp_path / "log.csv")
    with open(tmp_path / "log.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["iter", "objective", "residual", "gap"]
    assert [int(r[0]) for r in rows[1:]] == [10, 20, 30]
