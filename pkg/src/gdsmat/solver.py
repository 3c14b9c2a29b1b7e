"""Generalized Dantzig selector.

Solves ``min R(theta)  s.t.  R*(sum_i (<<X_i, theta>> - y_i) X_i) <= lam`` with a
primal-dual hybrid gradient iteration.  Writing ``K`` for the self-adjoint map
``theta -> sum_i <<X_i, theta>> X_i`` and ``b = sum_i y_i X_i``, the problem is
``min R(theta) + I_C(K theta - b)`` with ``C`` the dual-norm ball of radius
``lam``.  Each iteration costs one application of ``K``, one spectral prox of
``R`` and one projection onto ``C``.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .gauges import UnsupportedOperation
from .measurements import MeasurementSet, adjoint, gram, operator_norm_estimate
from .spectral import SpectralNorm

__all__ = ["GdsProblem", "GdsSolution", "SolverOptions", "check_solution", "solve"]

log = logging.getLogger(__name__)


@dataclass
class SolverOptions:
    """Iteration controls.

    ``feas_tol`` is absolute; ``None`` means ``1e-7 * R*(b)``.  ``opt_tol`` is
    the relative objective change allowed over a ``window`` of iterations;
    ``gap_tol`` bounds the relative duality gap at convergence.
    """

    max_iter: int = 50_000
    feas_tol: float | None = None
    opt_tol: float = 1e-8
    step_scale: float = 0.95
    log_every: int = 0
    check_every: int = 25
    window: int = 25
    gap_tol: float = 1e-4
    adaptive: bool = True

    @classmethod
    def from_dict(cls, desc: dict | None) -> "SolverOptions":
        desc = dict(desc or {})
        unknown = set(desc) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown solver options: {sorted(unknown)}")
        return cls(**desc)

    @classmethod
    def from_json(cls, path) -> "SolverOptions":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass
class GdsProblem:
    norm: SpectralNorm
    data: MeasurementSet
    lam: float

    def __post_init__(self):
        if not self.lam >= 0:
            raise ValueError("lambda must be nonnegative")
        if self.norm.shape != (self.data.ensemble.d, self.data.ensemble.p):
            raise ValueError("norm shape does not match the measurement shape")

    @property
    def shape(self):
        return self.norm.shape

    def residual_map(self, theta) -> np.ndarray:
        """``sum_i (<<X_i, theta>> - y_i) X_i``."""
        xs = self.data.xs
        return adjoint(xs, xs.reshape(xs.shape[0], -1) @ np.ravel(theta) - self.data.y)


@dataclass
class GdsSolution:
    theta_hat: np.ndarray
    objective: float
    constraint_residual: float
    iterations: int
    converged: bool
    gap_history: list = field(default_factory=list)
    history: list = field(default_factory=list, repr=False)

    def write_log(self, path) -> None:
        """Write the iteration log as CSV with columns ``iter, objective, residual, gap``."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["iter", "objective", "residual", "gap"])
            for row in self.history:
                writer.writerow([row[0]] + [repr(float(v)) for v in row[1:]])


def check_solution(problem: GdsProblem, theta) -> dict:
    """Report the objective and both sides of the Dantzig constraint at ``theta``."""
    theta = np.asarray(theta, dtype=float)
    lhs = problem.norm.dual(problem.residual_map(theta))
    return {
        "feasible": bool(lhs <= problem.lam),
        "objective": problem.norm.eval(theta),
        "constraint": lhs,
        "lam": problem.lam,
        "residual": lhs - problem.lam,
    }


def solve(problem: GdsProblem, opts: SolverOptions | None = None, gram_matrix=None) -> GdsSolution:
    """Solve the Dantzig program; deterministic given the problem and options.

    ``gram_matrix`` may carry a precomputed ``A^T A`` to share across solves
    on the same measurements.
    """
    opts = opts or SolverOptions()
    norm, lam = problem.norm, problem.lam
    if not norm.gauge.supports_prox:
        raise UnsupportedOperation(f"{type(norm.gauge).__name__} gauge has no prox")
    shape = norm.shape
    xs = problem.data.xs
    a = xs.reshape(xs.shape[0], -1)
    kmat = gram(xs) if gram_matrix is None else gram_matrix
    b = (problem.data.y @ a).reshape(shape)

    scale = norm.dual(b)
    feas_tol = 1e-7 * scale if opts.feas_tol is None else opts.feas_tol
    if scale <= lam:
        zero = np.zeros(shape)
        return GdsSolution(zero, 0.0, scale - lam, 0, True, [0.0], [(0, 0.0, scale - lam, 0.0)])

    def apply_k(m):
        return (kmat @ m.ravel()).reshape(shape)

    op_norm = operator_norm_estimate(gram_matrix=kmat, tol=1e-9, max_iter=2000)
    op_norm *= 1.01  # guard against power-iteration underestimate
    # K has norm ||A||^2, so tau*sigma*||K||^2 < 1 is the step condition.
    tau = sigma = opts.step_scale / op_norm
    alpha, eta, delta = 0.5, 0.95, 1.5

    x = np.zeros(shape)
    y = np.zeros(shape)
    ky = np.zeros(shape)
    kx = np.zeros(shape)
    kx_bar = np.zeros(shape)
    best = None
    objectives = []
    gaps, history = [], []
    converged = False
    it = 0
    for it in range(1, opts.max_iter + 1):
        v = y + sigma * (kx_bar - b)
        y_new = v - sigma * norm.project_dual_ball(v / sigma, lam)
        ky_new = apply_k(y_new)
        x_new = norm.prox(x - tau * ky_new, tau)
        kx_new = apply_k(x_new)

        if opts.adaptive:
            dx, dy = x - x_new, y - y_new
            p_res = np.linalg.norm(dx / tau - (ky - ky_new))
            d_res = np.linalg.norm(dy / sigma - (kx - kx_new))
            if p_res > delta * d_res:
                tau, sigma, alpha = tau / (1 - alpha), sigma * (1 - alpha), alpha * eta
            elif p_res < d_res / delta:
                tau, sigma, alpha = tau * (1 - alpha), sigma / (1 - alpha), alpha * eta

        kx_bar = 2 * kx_new - kx
        x, y, kx, ky = x_new, y_new, kx_new, ky_new

        if it % opts.check_every == 0 or it == opts.max_iter:
            objective = norm.eval(x)
            residual = norm.dual(kx - b) - lam
            # dual point rescaled into {R*(K y) <= 1}
            y_feas = y / max(1.0, norm.dual(ky))
            dual_obj = -float(np.vdot(y_feas, b)) - lam * norm.eval(y_feas)
            gap = objective - dual_obj
            gaps.append(gap)
            history.append((it, objective, residual, gap))
            objectives.append(objective)
            if opts.log_every and it % opts.log_every < opts.check_every:
                log.info("iter %d objective %.10g residual %.3e gap %.3e", it, objective, residual, gap)
            if residual <= feas_tol and (best is None or objective < best[1]):
                best = (x.copy(), objective, residual)
            lag = max(1, opts.window // opts.check_every)
            if residual <= feas_tol and len(objectives) > lag:
                change = abs(objectives[-1] - objectives[-1 - lag])
                tol = opts.opt_tol * max(objective, np.finfo(float).tiny)
                if change <= tol and gap <= opts.gap_tol * max(objective, 1.0):
                    converged = True
                    break

    if converged or best is None:
        theta_hat = x
    else:
        theta_hat = best[0]
    objective = norm.eval(theta_hat)
    residual = norm.dual(apply_k(theta_hat) - b) - lam
    return GdsSolution(theta_hat, objective, residual, it, converged, gaps, history)

