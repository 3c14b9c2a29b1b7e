"""Geometric measures behind the recovery error bound.

Three quantities control the error of the Dantzig selector around a
structured ``theta_star``: the restricted compatibility constant ``psi``,
the Gaussian width of the error cone intersected with the sphere, and the
Gaussian width of the unit norm ball.  This module computes closed-form
upper bounds for unitarily invariant norms, Monte-Carlo estimates of both
widths, the restricted-eigenvalue and ``lambda`` predictions, and the
assembled bound ``2 * psi * lambda / alpha``.

Infinite values (``math.inf``) mark vacuous bounds.  They are produced by
explicit branches, never by arithmetic on infinities.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from importlib import resources
from typing import NamedTuple

import numpy as np

from .gauges import GaugeConstants
from .measurements import MC_STREAM, Ensemble, noise, stream
from .spectral import SpectralNorm, SubspaceDecomposition

__all__ = [
    "GeometryReport",
    "MCEstimate",
    "alpha_pred",
    "cone_distance_sq",
    "default_calibration",
    "error_bound_pred",
    "geometry_report",
    "lambda_empirical",
    "lambda_rules",
    "lambda_theory",
    "noise_correlation_draws",
    "psi_bound",
    "width_ball_bound",
    "width_ball_mc",
    "width_cone_bound",
    "width_cone_mc",
]

_GOLDEN = (math.sqrt(5) - 1) / 2


class MCEstimate(NamedTuple):
    value: float
    stderr: float


def psi_bound(constants: GaugeConstants, r: int, rho: float) -> float:
    """Upper bound ``2*phi_f(r) + max(eta2, eta1*(1 + rho)*sqrt(r))`` on ``psi``."""
    if r < 1:
        raise ValueError("rank must be at least 1")
    if constants.eta1 == 0:
        return 2 * constants.phi_f(r) + constants.eta2
    if math.isinf(rho):
        return math.inf
    return 2 * constants.phi_f(r) + max(constants.eta2, constants.eta1 * (1 + rho) * math.sqrt(r))


def width_cone_bound(d: int, p: int, r: int, rho: float) -> float:
    """``min(sqrt(dp), sqrt((2 rho^2 + 1)(d + p - r) r))``; ``sqrt(dp)`` if ``rho`` is infinite."""
    if not 1 <= r <= min(d, p):
        raise ValueError("need 1 <= r <= min(d, p)")
    full = math.sqrt(d * p)
    if math.isinf(rho):
        return full
    return min(full, math.sqrt((2 * rho**2 + 1) * (d + p - r) * r))


def width_ball_bound(nu: float, d: int, p: int) -> float:
    if not nu > 0:
        raise ValueError("nu must be positive")
    return (math.sqrt(d) + math.sqrt(p)) / nu


def _golden_min(f, lo, hi, iters):
    """Vectorized golden-section search of convex ``f`` on ``[lo, hi]``."""
    a, b = lo.copy(), hi.copy()
    c = b - _GOLDEN * (b - a)
    e = a + _GOLDEN * (b - a)
    fc, fe = f(c), f(e)
    for _ in range(iters):
        left = fc <= fe
        b = np.where(left, e, b)
        a = np.where(left, a, c)
        new_c = b - _GOLDEN * (b - a)
        new_e = a + _GOLDEN * (b - a)
        c_next = np.where(left, new_c, e)
        e_next = np.where(left, c, new_e)
        fc_next = np.where(left, f(c_next), fe)
        fe_next = np.where(left, fc, f(e_next))
        c, e, fc, fe = c_next, e_next, fc_next, fe_next
    t = (a + b) / 2
    return np.minimum(np.minimum(f(t), f(lo)), np.minimum(fc, fe))


def cone_distance_sq(decomp: SubspaceDecomposition, g: np.ndarray, tol: float = 1e-8) -> np.ndarray:
    """Squared distance term of the statistical-dimension bound for each ``g[k]``.

    For a Gaussian ``G`` the value is

        min_{t >= 0} ||G1 - t Gamma||^2 + sum_i max(sigma_i(G2) - t z_i, 0)^2 + ||Gperp||^2,

    an upper bound on the squared distance to the polar of the error cone.
    The convex one-dimensional problem in ``t`` is solved by golden section.
    """
    r = decomp.rank
    theta_top = decomp.theta[:r]
    z = decomp.theta[r:]
    gamma_sq = float(theta_top @ theta_top)
    m = g.shape[0]
    g1 = decomp.u.T @ g @ decomp.v
    g2 = decomp.u_perp.T @ g @ decomp.v_perp
    g1_sq = np.einsum("kij,kij->k", g1, g1)
    g2_sq = np.einsum("kij,kij->k", g2, g2)
    perp_sq = np.einsum("kij,kij->k", g, g) - g1_sq - g2_sq
    cross = np.einsum("kii,i->k", g1, theta_top)
    s = np.linalg.svd(g2, compute_uv=False) if g2.size else np.zeros((m, 0))
    zz = z[: s.shape[1]]

    def phi(t):
        excess = np.maximum(s - t[:, None] * zz, 0.0)
        return g1_sq - 2 * t * cross + t * t * gamma_sq + np.einsum("ki,ki->k", excess, excess)

    # phi increases past the quadratic vertex, past every breakpoint s_i/z_i
    # and past 2*||G2||_op/theta_min
    hi = np.maximum(cross / gamma_sq, 0.0)
    pos = zz > 0
    if pos.any():
        hi = np.maximum(hi, (s[:, pos] / zz[pos]).max(axis=1))
    if decomp.theta[-1] > 0 and s.shape[1]:
        hi = np.maximum(hi, 2 * s[:, 0] / decomp.theta[-1])
    hi = hi + 1.0
    iters = int(math.ceil(math.log(tol / max(float(hi.max()), 1.0)) / math.log(_GOLDEN))) + 2
    return _golden_min(phi, np.zeros(m), hi, max(iters, 10)) + perp_sq


def width_cone_mc(decomp: SubspaceDecomposition, samples: int = 10_000, seed: int = 0,
                  tol: float = 1e-8, batch: int = 2_000) -> MCEstimate:
    """Statistical-dimension estimate of the error-cone Gaussian width.

    Returns ``sqrt`` of the mean of :func:`cone_distance_sq` over Gaussian
    draws, with a delta-method standard error.  This estimates an upper
    bound on the width.
    """
    if samples < 100:
        raise ValueError("need at least 100 samples")
    d, p = decomp.shape
    rng = stream(seed, MC_STREAM)
    values = []
    for start in range(0, samples, batch):
        m = min(batch, samples - start)
        values.append(cone_distance_sq(decomp, rng.standard_normal((m, d, p)), tol))
    values = np.concatenate(values)
    mean = float(values.mean())
    se_mean = float(values.std(ddof=1) / math.sqrt(values.size))
    root = math.sqrt(mean)
    return MCEstimate(root, se_mean / (2 * root))


def width_ball_mc(norm: SpectralNorm, samples: int = 10_000, seed: int = 0,
                  batch: int = 2_000) -> MCEstimate:
    """Monte-Carlo Gaussian width of the unit ball: the mean of ``R*(G)``."""
    if samples < 100:
        raise ValueError("need at least 100 samples")
    rng = stream(seed, MC_STREAM, 1)
    vals = np.empty(samples)
    for start in range(0, samples, batch):
        m = min(batch, samples - start)
        s = np.linalg.svd(rng.standard_normal((m, norm.rows, norm.cols)), compute_uv=False)
        vals[start:start + m] = [norm.gauge.dual(row) for row in s]
    return MCEstimate(float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(samples)))


def alpha_pred(kappa: float, n: int, width_cone: float, xi: float = 1.0) -> float:
    """Predicted restricted eigenvalue for unnormalized sums; 0 when vacuous."""
    if n < 1:
        raise ValueError("n must be positive")
    return n * max(0.0, 1 - xi * kappa**2 * width_cone / math.sqrt(n))


def error_bound_pred(psi: float, lam: float, alpha: float) -> float:
    """``2 * psi * lam / alpha``; ``math.inf`` when ``alpha <= 0`` or ``psi`` is infinite."""
    if alpha <= 0 or math.isinf(psi):
        return math.inf
    return 2 * psi * lam / alpha


def noise_correlation_draws(ensemble: Ensemble, n: int, noise_kind: str, tau: float,
                            samples: int, seed: int) -> np.ndarray:
    """Independent draws of ``sum_i omega_i X_i`` with fresh measurements and noise."""
    out = np.empty((samples, ensemble.d, ensemble.p))
    for j in range(samples):
        rng = stream(seed, MC_STREAM, 2, j)
        xs = ensemble.draw(rng, n)
        omega = noise(noise_kind, tau, n, int(rng.integers(2**63)))
        out[j] = np.tensordot(omega, xs, axes=1)
    return out


def lambda_theory(norm: SpectralNorm, n: int, tau: float, kappa: float = 1.0, c0: float = 1.0) -> float:
    nu = norm.gauge.constants().nu
    return c0 * kappa * tau * math.sqrt(n) * width_ball_bound(nu, norm.rows, norm.cols)


def lambda_empirical(norm: SpectralNorm, draws: np.ndarray, quantile: float = 0.95) -> float:
    """Quantile of ``R*`` over precomputed noise-correlation draws."""
    vals = [norm.dual(m) for m in draws]
    return float(np.quantile(vals, quantile))


def lambda_rules(norm: SpectralNorm, ensemble: Ensemble, n: int, tau: float, kappa: float = 1.0,
                 c0: float = 1.0, mc_samples: int = 200, quantile: float = 0.95, seed: int = 0,
                 noise_kind: str = "gaussian") -> dict:
    """Both ``lambda`` choices: the width-based formula and an empirical quantile."""
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    theory = lambda_theory(norm, n, tau, kappa, c0)
    if tau == 0:
        return {"lambda_theory": theory, "lambda_empirical": 0.0}
    draws = noise_correlation_draws(ensemble, n, noise_kind, tau, mc_samples, seed)
    return {"lambda_theory": theory, "lambda_empirical": lambda_empirical(norm, draws, quantile)}


def default_calibration() -> dict:
    """Constants fitted by ``experiment.calibrate`` and shipped with the package."""
    text = resources.files("gdsmat").joinpath("data/calibration.json").read_text()
    return json.loads(text)


def _jsonable(value):
    if isinstance(value, float) and math.isinf(value):
        return "inf"
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    return value


@dataclass
class GeometryReport:
    rank: int
    rho: float
    psi_bound: float
    width_cone_bound: float
    width_cone_mc: MCEstimate
    width_ball_bound: float
    width_ball_mc: MCEstimate
    alpha_pred: float
    lambda_theory: float
    lambda_empirical: float
    error_bound_pred: float
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["width_cone_mc"] = dict(self.width_cone_mc._asdict())
        out["width_ball_mc"] = dict(self.width_ball_mc._asdict())
        return _jsonable(out)

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_dict(cls, data: dict) -> "GeometryReport":
        def num(v):
            return math.inf if v == "inf" else v

        data = {k: num(v) if not isinstance(v, dict) else v for k, v in data.items()}
        data["width_cone_mc"] = MCEstimate(**data["width_cone_mc"])
        data["width_ball_mc"] = MCEstimate(**data["width_ball_mc"])
        return cls(**data)


def geometry_report(norm: SpectralNorm, theta_star, n: int, ensemble: Ensemble, tau: float,
                    noise_kind: str = "gaussian", xi: float | None = None, c0: float | None = None,
                    samples: int = 10_000, lambda_samples: int = 200, quantile: float = 0.95,
                    lambda_rule: str = "empirical", width_source: str = "bound",
                    seed: int = 0, lambdas: dict | None = None) -> GeometryReport:
    """Assemble every measure for ``theta_star`` at ``n`` measurements.

    ``xi`` and ``c0`` default to the shipped calibration.  ``width_source``
    picks the cone width fed to ``alpha_pred`` (``"bound"`` or ``"mc"``) and
    ``lambda_rule`` the ``lambda`` used in the predicted error bound.
    ``lambdas`` may carry precomputed :func:`lambda_rules` output.
    """
    cal = default_calibration()
    xi = cal["xi"] if xi is None else xi
    c0 = cal["c0"] if c0 is None else c0
    decomp = norm.decompose(theta_star)
    consts = norm.gauge.constants()
    r = decomp.rank
    rho_value = decomp.rho
    d, p = norm.shape
    psi = psi_bound(consts, r, rho_value)
    wc_bound = width_cone_bound(min(d, p), max(d, p), r, rho_value)
    wc_mc = width_cone_mc(decomp, samples, seed)
    wb_bound = width_ball_bound(consts.nu, d, p)
    wb_mc = width_ball_mc(norm, samples, seed)
    width = wc_bound if width_source == "bound" else wc_mc.value
    alpha = alpha_pred(ensemble.kappa, n, width, xi)
    if lambdas is None:
        lambdas = lambda_rules(norm, ensemble, n, tau, ensemble.kappa, c0, lambda_samples, quantile,
                               seed, noise_kind)
    lams = lambdas
    lam = lams["lambda_theory"] if lambda_rule == "theory" else lams["lambda_empirical"]
    return GeometryReport(
        rank=r,
        rho=rho_value,
        psi_bound=psi,
        width_cone_bound=wc_bound,
        width_cone_mc=wc_mc,
        width_ball_bound=wb_bound,
        width_ball_mc=wb_mc,
        alpha_pred=alpha,
        lambda_theory=lams["lambda_theory"],
        lambda_empirical=lams["lambda_empirical"],
        error_bound_pred=error_bound_pred(psi, lam, alpha),
        config={
            "xi": xi, "c0": c0, "samples": samples, "lambda_samples": lambda_samples,
            "quantile": quantile, "seed": seed, "n": n, "tau": tau, "kappa": ensemble.kappa,
            "lambda_rule": lambda_rule, "width_source": width_source,
            "norm": norm.gauge.to_dict(), "ensemble": ensemble.to_dict(),
        },
    )
