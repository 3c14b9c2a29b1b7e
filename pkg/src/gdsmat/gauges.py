"""Symmetric gauge functions on R^d.

A symmetric gauge is a norm invariant under permutations and sign flips of
the coordinates.  Every gauge here provides evaluation, the dual norm, the
proximal operator (where supported), the Euclidean projection onto the scaled
dual ball, the polar operator and the envelope constants consumed by the
recovery bounds in :mod:`gdsmat.geometry`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import brentq, isotonic_regression

__all__ = [
    "Gauge",
    "GaugeConstants",
    "KSupport",
    "KyFan",
    "L1",
    "L2",
    "OWL",
    "UnsupportedOperation",
    "gauge_from_dict",
    "rho",
]


class UnsupportedOperation(NotImplementedError):
    """Raised when a gauge does not implement an operation (Ky Fan prox)."""


@dataclass(frozen=True)
class GaugeConstants:
    """Envelope constants of a gauge ``f``.

    ``f(v) <= max(eta1*||v||_1, eta2*||v||_2)``, ``f(v) >= nu*||v||_1`` and
    ``f(v) <= phi_f(r)*||v||_2`` whenever ``v`` has at most ``r`` nonzeros.
    """

    eta1: float
    eta2: float
    nu: float
    phi_f: Callable[[int], float] = field(repr=False)

    def check(self, gauge: "Gauge", samples: int = 200, seed: int = 0) -> None:
        """Raise ``ValueError`` if a random sample violates an envelope."""
        rng = np.random.default_rng(seed)
        d = gauge.dim
        slack = 1e-10
        for _ in range(samples):
            v = rng.standard_normal(d) * rng.exponential(size=d)
            f = gauge.eval(v)
            l1, l2 = np.abs(v).sum(), np.linalg.norm(v)
            if f > max(self.eta1 * l1, self.eta2 * l2) * (1 + slack) + slack:
                raise ValueError(f"upper envelope violated for {gauge!r}")
            if f < self.nu * l1 * (1 - slack) - slack:
                raise ValueError(f"lower l1 envelope violated for {gauge!r}")
            r = int(rng.integers(1, d + 1))
            sparse = v.copy()
            sparse[rng.permutation(d)[r:]] = 0.0
            if gauge.eval(sparse) > self.phi_f(r) * np.linalg.norm(sparse) * (1 + slack) + slack:
                raise ValueError(f"sparse compatibility violated for {gauge!r}")


def _as_vector(v, dim):
    v = np.asarray(v, dtype=float)
    if v.shape != (dim,):
        raise ValueError(f"expected a vector of length {dim}, got shape {v.shape}")
    return v


def _check_sorted(sigma, dim):
    sigma = _as_vector(sigma, dim)
    if np.any(sigma < 0) or np.any(np.diff(sigma) > 0):
        raise ValueError("polar operator expects a nonnegative, descending vector")
    return sigma


def _tie_blocks(sigma):
    """Yield ``(start, stop)`` for maximal runs of equal entries."""
    start = 0
    for i in range(1, len(sigma) + 1):
        if i == len(sigma) or sigma[i] != sigma[start]:
            yield start, i
            start = i


def _sorted_abs(v):
    order = np.argsort(-np.abs(v), kind="stable")
    return np.abs(v)[order], order


def _unsort(z_sorted, order, signs):
    out = np.empty_like(z_sorted)
    out[order] = z_sorted
    return out * signs


class Gauge:
    """Base class.  Subclasses set ``dim`` and override the norm primitives."""

    dim: int
    supports_prox = True

    def eval(self, v) -> float:
        raise NotImplementedError

    def dual(self, v) -> float:
        raise NotImplementedError

    def _project_sorted(self, z, t):
        """Project a nonnegative descending ``z`` onto ``{x : dual(x) <= t}``."""
        raise UnsupportedOperation(f"{type(self).__name__} has no projection")

    def project_dual_ball(self, v, t: float) -> np.ndarray:
        """Euclidean projection of ``v`` onto ``{x : dual(x) <= t}``."""
        v = _as_vector(v, self.dim)
        if t < 0:
            raise ValueError("radius must be nonnegative")
        if not self.supports_prox:
            raise UnsupportedOperation(f"{type(self).__name__} has no projection")
        if t == 0:
            return np.zeros_like(v)
        if self.dual(v) <= t:
            return v.copy()
        z, order = _sorted_abs(v)
        # the projection is positively homogeneous in (v, t); work at unit scale
        scale = z[0]
        return _unsort(scale * self._project_sorted(z / scale, t / scale), order, np.sign(v))

    def prox(self, v, t: float) -> np.ndarray:
        """``argmin_x 0.5*||x - v||^2 + t*f(x)``, via the Moreau identity."""
        if not t > 0:
            raise ValueError("prox step must be positive")
        v = _as_vector(v, self.dim)
        return v - self.project_dual_ball(v, t)

    def polar(self, sigma) -> np.ndarray:
        raise NotImplementedError

    def constants(self) -> GaugeConstants:
        raise NotImplementedError

    def sparse_compatibility(self, r: int) -> float:
        """Exact ``sup f(v)/||v||_2`` over vectors with at most ``r`` nonzeros."""
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class L1(Gauge):
    dim: int

    def eval(self, v):
        return float(np.abs(_as_vector(v, self.dim)).sum())

    def dual(self, v):
        v = _as_vector(v, self.dim)
        return float(np.abs(v).max(initial=0.0))

    def project_dual_ball(self, v, t):
        v = _as_vector(v, self.dim)
        if t < 0:
            raise ValueError("radius must be nonnegative")
        return np.clip(v, -t, t)

    def polar(self, sigma):
        _check_sorted(sigma, self.dim)
        return np.ones(self.dim)

    def sparse_compatibility(self, r):
        return math.sqrt(min(r, self.dim))

    def constants(self):
        c = GaugeConstants(1.0, 0.0, 1.0, lambda r: math.sqrt(r))
        c.check(self)
        return c

    def to_dict(self):
        return {"kind": "l1", "dim": self.dim}


@dataclass(frozen=True)
class L2(Gauge):
    dim: int

    def eval(self, v):
        return float(np.linalg.norm(_as_vector(v, self.dim)))

    dual = eval

    def _project_sorted(self, z, t):
        return z * (t / np.linalg.norm(z))

    def polar(self, sigma):
        sigma = _check_sorted(sigma, self.dim)
        if sigma[0] == 0:
            return np.full(self.dim, 1 / math.sqrt(self.dim))
        sigma = sigma / sigma[0]
        return sigma / np.linalg.norm(sigma)

    def sparse_compatibility(self, r):
        return 1.0

    def constants(self):
        c = GaugeConstants(0.0, 1.0, 1 / math.sqrt(self.dim), lambda r: 1.0)
        c.check(self)
        return c

    def to_dict(self):
        return {"kind": "l2", "dim": self.dim}


@dataclass(frozen=True, eq=False)
class OWL(Gauge):
    """Ordered weighted l1 norm ``<|v| sorted desc, w>``.

    Weights are stored sorted in descending order; the leading weight must be
    positive for the function to be a norm.
    """

    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float).ravel()
        if w.size == 0 or np.any(w < 0):
            raise ValueError("OWL weights must be nonnegative")
        w = np.sort(w)[::-1].copy()
        if w[0] <= 0:
            raise ValueError("OWL needs at least one positive weight")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def dim(self):
        return self.weights.size

    def __repr__(self):
        return f"OWL(weights={self.weights.tolist()})"

    def eval(self, v):
        v = _as_vector(v, self.dim)
        return float(np.sort(np.abs(v))[::-1] @ self.weights)

    def dual(self, v):
        v = _as_vector(v, self.dim)
        z = np.sort(np.abs(v))[::-1]
        return float(np.max(np.cumsum(z) / np.cumsum(self.weights)))

    def prox(self, v, t):
        if not t > 0:
            raise ValueError("prox step must be positive")
        v = _as_vector(v, self.dim)
        z, order = _sorted_abs(v)
        x = isotonic_regression(z - t * self.weights, increasing=False).x
        return _unsort(np.maximum(x, 0.0), order, np.sign(v))

    def _project_sorted(self, z, t):
        x = isotonic_regression(z - t * self.weights, increasing=False).x
        return z - np.maximum(x, 0.0)

    def polar(self, sigma):
        # w itself attains <w, sigma> = f(sigma); averaging w over tie blocks
        # of sigma keeps optimality and dual feasibility and spreads support.
        sigma = _check_sorted(sigma, self.dim)
        if not sigma.any():
            return np.full(self.dim, self.weights.mean())
        theta = self.weights.copy()
        for a, b in _tie_blocks(sigma):
            theta[a:b] = theta[a:b].mean()
        return theta

    def sparse_compatibility(self, r):
        return float(np.linalg.norm(self.weights[: min(r, self.dim)]))

    def constants(self):
        w = self.weights
        c = GaugeConstants(float(w[0]), 0.0, float(w.mean()), self.sparse_compatibility)
        c.check(self)
        return c

    def to_dict(self):
        return {"kind": "owl", "weights": self.weights.tolist(), "dim": self.dim}


def _ksupport_split(z, k):
    """Best split index ``q`` and squared norm for sorted nonnegative ``z``.

    Each admissible ``q`` (linear-regime mean not exceeding the last entry of
    the quadratic regime) gives a lower bound on the squared norm, and the
    true split attains it, so the maximum is the norm.
    """
    tails = np.cumsum(z[::-1])[::-1]
    head_sq = np.concatenate(([0.0], np.cumsum(z**2)))
    best_q, best = k - 1, -1.0
    for q in range(k):
        m = k - q - 1  # size of the quadratic regime
        mean = tails[m] / (q + 1)
        if m == 0 or mean <= z[m - 1]:
            value = head_sq[m] + tails[m] ** 2 / (q + 1)
            if value > best:
                best_q, best = q, value
    return best_q, best


@dataclass(frozen=True)
class KSupport(Gauge):
    """k-support norm: infimal convolution of l2 norms on k-sparse groups."""

    dim: int
    k: int

    def __post_init__(self):
        if not 1 <= self.k <= self.dim:
            raise ValueError(f"k must lie in [1, {self.dim}], got {self.k}")

    def eval(self, v):
        z = np.sort(np.abs(_as_vector(v, self.dim)))[::-1]
        if self.k == self.dim or z[0] == 0:
            return float(np.linalg.norm(z))
        # rescale so the squared split values cannot underflow or overflow
        return float(z[0] * math.sqrt(_ksupport_split(z / z[0], self.k)[1]))

    def dual(self, v):
        z = np.sort(np.abs(_as_vector(v, self.dim)))[::-1]
        return float(np.linalg.norm(z[: self.k]))

    def _project_sorted(self, z, t):
        k = self.k
        positive = int(np.count_nonzero(z > np.finfo(float).tiny))  # subnormals stay in the tail
        if positive <= k:
            return z * (t / np.linalg.norm(z[:k]))
        zp = z[:positive]

        def shrink(mu):
            # Top entries scale by 1/(1+mu), a middle block sits at level
            # beta, the rest is untouched; beta solves
            # sum(clip(z/beta - 1, 0, mu)) = mu*k.
            if mu == 0:
                return z
            # knots overflow only for entries near the smallest normal float;
            # an infinite 1/beta then means beta is below resolution
            with np.errstate(over="ignore", invalid="ignore"):
                knots = np.sort(np.concatenate((1 / zp, (1 + mu) / zp)))
                g = np.clip(np.outer(knots, zp) - 1, 0, mu).sum(axis=1)
                j = int(np.searchsorted(g, mu * k))
                u = knots[j - 1] + (mu * k - g[j - 1]) * (knots[j] - knots[j - 1]) / (g[j] - g[j - 1])
            beta = 1 / u if np.isfinite(u) else 0.0
            return np.minimum(z, np.maximum(beta, z / (1 + mu)))

        def excess(mu):
            x = shrink(mu)
            return float(x[:k] @ x[:k]) - t * t

        hi = 1.0
        while excess(hi) > 0:
            hi *= 4
        mu = brentq(excess, 0.0, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=500)
        x = shrink(mu)
        top = np.linalg.norm(x[:k])
        return x * min(1.0, t / top)

    def polar(self, sigma):
        sigma = _check_sorted(sigma, self.dim)
        if not sigma.any():
            return np.full(self.dim, 1 / math.sqrt(self.k))
        sigma = sigma / sigma[0]
        if self.k == self.dim:
            return sigma / np.linalg.norm(sigma)
        q, sq = _ksupport_split(sigma, self.k)
        norm = math.sqrt(sq)
        m = self.k - q - 1
        theta = np.full(self.dim, sigma[m:].sum() / (q + 1) / norm)
        theta[:m] = sigma[:m] / norm
        return theta

    def sparse_compatibility(self, r):
        return max(1.0, math.sqrt(min(r, self.dim) / self.k))

    def constants(self):
        # All four constants are read off the elastic-net sandwich
        # max(||v||_2, ||v||_1/sqrt(k)) <= f(v) <= sqrt(2)*max(...).
        k = self.k
        c = GaugeConstants(
            math.sqrt(2 / k),
            math.sqrt(2),
            1 / math.sqrt(k),
            lambda r: math.sqrt(2) * max(1.0, math.sqrt(r / k)),
        )
        c.check(self)
        return c

    def to_dict(self):
        return {"kind": "ksupport", "k": self.k, "dim": self.dim}


@dataclass(frozen=True)
class KyFan(Gauge):
    """Sum of the k largest magnitudes.  Evaluation and dual only."""

    dim: int
    k: int
    supports_prox = False

    def __post_init__(self):
        if not 1 <= self.k <= self.dim:
            raise ValueError(f"k must lie in [1, {self.dim}], got {self.k}")

    def eval(self, v):
        z = np.sort(np.abs(_as_vector(v, self.dim)))[::-1]
        return float(z[: self.k].sum())

    def dual(self, v):
        z = np.abs(_as_vector(v, self.dim))
        return float(max(z.max(initial=0.0), z.sum() / self.k))

    def prox(self, v, t):
        raise UnsupportedOperation("Ky Fan gauge provides eval and dual only")

    def polar(self, sigma):
        # Dual ball is {||x||_inf <= 1, ||x||_1 <= k}: unit weight on the top
        # k entries, with the tie block straddling position k sharing the rest.
        sigma = _check_sorted(sigma, self.dim)
        theta = np.zeros(self.dim)
        for a, b in _tie_blocks(sigma):
            if b <= self.k:
                theta[a:b] = 1.0
            elif a < self.k:
                theta[a:b] = (self.k - a) / (b - a)
        return theta

    def sparse_compatibility(self, r):
        return math.sqrt(min(r, self.k))

    def constants(self):
        k = self.k
        c = GaugeConstants(1.0, 0.0, k / self.dim, lambda r: math.sqrt(min(r, k)))
        c.check(self)
        return c

    def to_dict(self):
        return {"kind": "kyfan", "k": self.k, "dim": self.dim}


_ALIASES = {"trace": "l1", "nuclear": "l1", "frobenius": "l2"}


def gauge_from_dict(desc: dict, dim: int | None = None) -> Gauge:
    """Build a gauge from a descriptor such as ``{"kind": "ksupport", "k": 3, "dim": 20}``.

    ``dim`` fills in a missing ``"dim"`` entry.
    """
    kind = str(desc["kind"]).lower().replace("-", "").replace("_", "")
    kind = _ALIASES.get(kind, kind)
    d = desc.get("dim", dim)
    if kind == "owl":
        w = np.asarray(desc["weights"], dtype=float)
        if d is not None and w.size != d:
            raise ValueError(f"OWL weights have length {w.size}, expected {d}")
        return OWL(w)
    if d is None:
        raise ValueError("gauge descriptor needs a 'dim'")
    d = int(d)
    if kind == "l1":
        return L1(d)
    if kind == "l2":
        return L2(d)
    if kind == "ksupport":
        return KSupport(d, int(desc["k"]))
    if kind == "kyfan":
        return KyFan(d, int(desc["k"]))
    raise ValueError(f"unknown gauge kind {desc['kind']!r}")


def rho(theta) -> float:
    """Ratio of largest to smallest entry of a nonnegative descending vector.

    Returns ``math.inf`` when the smallest entry is zero.  Callers branch on
    ``math.isinf`` and never feed the value into arithmetic.
    """
    theta = np.asarray(theta, dtype=float)
    if np.any(theta < 0) or np.any(np.diff(theta) > 0):
        raise ValueError("rho expects a nonnegative, descending vector")
    if not theta.any():
        raise ValueError("rho is undefined for the zero subgradient")
    if theta[-1] == 0:
        return math.inf
    return float(theta[0] / theta[-1])
