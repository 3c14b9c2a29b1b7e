"""Unitarily invariant matrix norms obtained by applying a gauge to singular values."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gauges import Gauge, UnsupportedOperation, rho

__all__ = [
    "SpectralNorm",
    "SubspaceDecomposition",
    "projector_trace",
    "haar_orthogonal",
    "owl_value",
    "singular_values",
]


def singular_values(theta) -> np.ndarray:
    return np.linalg.svd(np.asarray(theta, dtype=float), compute_uv=False)


def owl_value(sigma, weights) -> float:
    """OWL value of a descending nonnegative vector with descending weights.

    Zero weights are allowed (seminorm), so this bypasses the OWL class.
    """
    return float(np.asarray(sigma) @ np.asarray(weights))


@dataclass(frozen=True)
class SpectralNorm:
    """``R(X) = gauge(sigma(X))`` on ``rows x cols`` matrices.

    The gauge dimension must equal ``min(rows, cols)``.
    """

    gauge: Gauge
    rows: int
    cols: int

    def __post_init__(self):
        if self.gauge.dim != min(self.rows, self.cols):
            raise ValueError(
                f"gauge dim {self.gauge.dim} does not match min({self.rows}, {self.cols})"
            )

    @property
    def shape(self):
        return (self.rows, self.cols)

    def _check(self, theta):
        theta = np.asarray(theta, dtype=float)
        if theta.shape != self.shape:
            raise ValueError(f"expected shape {self.shape}, got {theta.shape}")
        return theta

    def eval(self, theta) -> float:
        return self.gauge.eval(singular_values(self._check(theta)))

    def dual(self, theta) -> float:
        return self.gauge.dual(singular_values(self._check(theta)))

    def prox(self, theta, t: float) -> np.ndarray:
        """Apply the gauge prox to the singular values, keeping singular vectors."""
        theta = self._check(theta)
        if not self.gauge.supports_prox:
            raise UnsupportedOperation(f"{type(self.gauge).__name__} has no prox")
        u, s, vt = np.linalg.svd(theta, full_matrices=False)
        return (u * self.gauge.prox(s, t)) @ vt

    def project_dual_ball(self, theta, radius: float) -> np.ndarray:
        """Frobenius projection onto ``{Z : dual(Z) <= radius}``."""
        theta = self._check(theta)
        if not self.gauge.supports_prox:
            raise UnsupportedOperation(f"{type(self.gauge).__name__} has no projection")
        u, s, vt = np.linalg.svd(theta, full_matrices=False)
        return (u * self.gauge.project_dual_ball(s, radius)) @ vt

    def rank_tol(self, sigma_max: float) -> float:
        return max(self.rows, self.cols) * np.finfo(float).eps * sigma_max

    def decompose(self, theta_star, rank_tol: float | None = None) -> "SubspaceDecomposition":
        """Split the matrix space around ``theta_star`` as in the error-cone superset.

        ``rank_tol`` defaults to ``max(rows, cols) * eps * sigma_1``.
        """
        theta_star = self._check(theta_star)
        u, s, vt = np.linalg.svd(theta_star)
        if s[0] == 0:
            raise ValueError("cannot decompose the zero matrix")
        tol = self.rank_tol(s[0]) if rank_tol is None else rank_tol
        r = int(np.count_nonzero(s > tol))
        sigma = np.where(s > tol, s, 0.0)
        theta = self.gauge.polar(sigma)
        return SubspaceDecomposition(
            u=u[:, :r],
            v=vt[:r].T,
            u_perp=u[:, r:],
            v_perp=vt[r:].T,
            sigma=sigma,
            theta=theta,
        )


@dataclass(frozen=True, eq=False)
class SubspaceDecomposition:
    """Orthogonal split of the matrix space induced by a rank-r matrix.

    ``M1`` holds matrices with column space in ``col(u)`` and row space in
    ``col(v)``; ``M2`` the doubly orthogonal complement; ``Mperp`` the rest.
    ``theta`` is the polar-operator subgradient of the gauge at ``sigma``.
    """

    u: np.ndarray
    v: np.ndarray
    u_perp: np.ndarray
    v_perp: np.ndarray
    sigma: np.ndarray
    theta: np.ndarray

    @property
    def rank(self) -> int:
        return self.u.shape[1]

    @property
    def shape(self):
        return (self.u.shape[0], self.v.shape[0])

    @property
    def w(self) -> np.ndarray:
        out = np.zeros_like(self.theta)
        out[: self.rank] = self.theta[: self.rank]
        return out

    @property
    def z(self) -> np.ndarray:
        out = np.zeros_like(self.theta)
        tail = self.theta[self.rank :]
        out[: tail.size] = tail
        return out

    @property
    def rho(self) -> float:
        return rho(self.theta)

    @property
    def gamma(self) -> np.ndarray:
        """``U diag(theta_1..theta_r) V^T``."""
        return (self.u * self.theta[: self.rank]) @ self.v.T

    def p1(self, x):
        return self.u @ (self.u.T @ x @ self.v) @ self.v.T

    def p2(self, x):
        return self.u_perp @ (self.u_perp.T @ x @ self.v_perp) @ self.v_perp.T

    def p_perp(self, x):
        return x - self.p1(x) - self.p2(x)

    def dims(self) -> tuple[int, int, int]:
        """Dimensions of ``(M1, M2, Mperp)``."""
        d, p = self.shape
        r = self.rank
        return r * r, (d - r) * (p - r), r * (d + p - 2 * r)

    def seminorm(self, x) -> float:
        """``||P1 x||_w + ||P2 x||_z``, the subspace spectral OWL seminorm."""
        x = np.asarray(x, dtype=float)
        s1 = singular_values(self.p1(x))
        s2 = singular_values(self.p2(x))
        return owl_value(s1, self.w[: s1.size]) + owl_value(s2, self.z[: s2.size])


def haar_orthogonal(n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw an ``n x n`` orthogonal matrix from the Haar measure."""
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    return q * np.sign(np.diag(r))


def projector_trace(decomp: SubspaceDecomposition, which: str) -> float:
    """Trace of a projector computed on the canonical basis (for tests and demos)."""
    proj = {"p1": decomp.p1, "p2": decomp.p2, "perp": decomp.p_perp}[which]
    d, p = decomp.shape
    total = 0.0
    for i in range(d):
        for j in range(p):
            e = np.zeros((d, p))
            e[i, j] = 1.0
            total += proj(e)[i, j]
    return total

