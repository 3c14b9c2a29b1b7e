"""Sub-Gaussian measurement ensembles and the linear maps they induce.

Measurement matrices are stacked in an array of shape ``(n, d, p)``.  Matrix
``i`` comes from its own random stream keyed by ``(seed, i)``, so the first
``m`` matrices of an ``n``-draw are the ``m``-draw for every ``m <= n``.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "Ensemble",
    "ImplicitMeasurements",
    "MeasurementSet",
    "adjoint",
    "forward",
    "gram",
    "observe",
    "operator_norm_estimate",
    "sample",
    "stream",
]

# spawn-key domains keep the measurement, noise and Monte-Carlo streams apart
MEASUREMENT_STREAM = 0
NOISE_STREAM = 1
MC_STREAM = 2


def stream(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for ``seed`` and a spawn key."""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=tuple(key)))


@dataclass(frozen=True)
class Ensemble:
    """Isotropic zero-mean ensemble of ``d x p`` matrices with i.i.d. entries.

    ``kind`` is ``"gaussian"``, ``"rademacher"`` or ``"sparse_sign"``.  For
    sparse signs an entry is 0 with probability ``1 - 1/s`` and ``+-sqrt(s)``
    otherwise.  ``kappa`` is recorded for the bound formulas, not enforced.
    """

    kind: str
    d: int
    p: int
    s: int = 1
    kappa: float = 1.0

    def __post_init__(self):
        if self.kind not in ("gaussian", "rademacher", "sparse_sign"):
            raise ValueError(f"unknown ensemble kind {self.kind!r}")
        if self.s < 1:
            raise ValueError("sparse_sign sparsity must be >= 1")
        if self.d < 1 or self.p < 1:
            raise ValueError("matrix shape must be positive")

    @classmethod
    def from_dict(cls, desc: dict, d: int, p: int) -> "Ensemble":
        kind = str(desc.get("kind", "gaussian")).lower().replace("-", "_")
        return cls(kind, d, p, int(desc.get("s", 1)), float(desc.get("kappa", 1.0)))

    def to_dict(self) -> dict:
        return asdict(self)

    def draw(self, rng: np.random.Generator, count: int | None = None) -> np.ndarray:
        shape = (self.d, self.p) if count is None else (count, self.d, self.p)
        if self.kind == "gaussian":
            return rng.standard_normal(shape)
        if self.kind == "rademacher":
            return rng.choice(np.array([-1.0, 1.0]), size=shape)
        signs = rng.choice(np.array([-1.0, 1.0]), size=shape)
        keep = rng.random(shape) < 1.0 / self.s
        return np.where(keep, signs * math.sqrt(self.s), 0.0)


def sample(ensemble: Ensemble, n: int, seed: int) -> np.ndarray:
    """Draw ``n`` measurement matrices, each from its own stream."""
    if n < 1:
        raise ValueError("need at least one measurement")
    out = np.empty((n, ensemble.d, ensemble.p))
    for i in range(n):
        out[i] = ensemble.draw(stream(seed, MEASUREMENT_STREAM, i))
    return out


def _flat(xs):
    xs = np.asarray(xs, dtype=float)
    if xs.ndim != 3:
        raise ValueError("measurements must have shape (n, d, p)")
    return xs.reshape(xs.shape[0], -1)


def forward(xs, theta) -> np.ndarray:
    """``<<X_i, theta>>`` for every measurement."""
    theta = np.asarray(theta, dtype=float)
    if theta.shape != np.shape(xs)[1:]:
        raise ValueError(f"theta has shape {theta.shape}, measurements {np.shape(xs)[1:]}")
    return _flat(xs) @ theta.ravel()


def adjoint(xs, u) -> np.ndarray:
    """``sum_i u_i X_i``."""
    u = np.asarray(u, dtype=float)
    if u.shape != (np.shape(xs)[0],):
        raise ValueError(f"u has shape {u.shape}, expected ({np.shape(xs)[0]},)")
    return (u @ _flat(xs)).reshape(np.shape(xs)[1:])


def gram(xs) -> np.ndarray:
    """Matrix of ``theta -> adjoint(forward(theta))`` acting on ``theta.ravel()``."""
    a = _flat(xs)
    return a.T @ a


def noise(kind: str | None, tau: float, n: int, seed: int) -> np.ndarray:
    if kind is None or kind == "none" or tau == 0:
        return np.zeros(n)
    rng = stream(seed, NOISE_STREAM)
    if kind == "gaussian":
        return tau * rng.standard_normal(n)
    if kind == "rademacher":
        return tau * rng.choice(np.array([-1.0, 1.0]), size=n)
    raise ValueError(f"unknown noise kind {kind!r}")


def observe(xs, theta_star, noise_kind: str | None = None, tau: float = 0.0, seed: int = 0):
    """``y_i = <<X_i, theta_star>> + omega_i``.  Returns ``(y, omega)``."""
    clean = forward(xs, theta_star)
    omega = noise(noise_kind, tau, clean.size, seed)
    return clean + omega, omega


def operator_norm_estimate(xs=None, *, gram_matrix=None, tol=1e-6, max_iter=200, seed=0):
    """Power-iteration estimate of the norm of ``theta -> adjoint(forward(theta))``.

    Returns the Rayleigh quotient, which never decreases over iterations.
    Either the measurements or their precomputed Gram matrix may be given.
    """
    if gram_matrix is None:
        a = _flat(xs)
        apply = lambda v: a.T @ (a @ v)  # noqa: E731
        dim = a.shape[1]
    else:
        apply = lambda v: gram_matrix @ v  # noqa: E731
        dim = gram_matrix.shape[0]
    v = np.random.default_rng(seed).standard_normal(dim)
    v /= np.linalg.norm(v)
    w = apply(v)
    estimate = float(v @ w)
    for _ in range(max_iter):
        norm_w = np.linalg.norm(w)
        if norm_w == 0:
            return 0.0
        v = w / norm_w
        w = apply(v)
        new = float(v @ w)
        if abs(new - estimate) <= tol * abs(new):
            return max(new, estimate)
        estimate = max(new, estimate)
    return estimate


@dataclass
class MeasurementSet:
    """Measurements, observations and the metadata needed to regenerate them."""

    ensemble: Ensemble
    xs: np.ndarray = field(repr=False)
    y: np.ndarray = field(repr=False)
    seed: int
    noise_kind: str | None = None
    noise_tau: float = 0.0
    omega: np.ndarray | None = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return self.xs.shape[0]

    @classmethod
    def generate(cls, ensemble, n, theta_star, seed, noise_kind=None, noise_tau=0.0):
        xs = sample(ensemble, n, seed)
        y, omega = observe(xs, theta_star, noise_kind, noise_tau, seed)
        return cls(ensemble, xs, y, seed, noise_kind, noise_tau, omega)

    def save(self, directory) -> None:
        """Write ``meta.json`` and ``y.csv``; measurement matrices are not stored."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        meta = {
            "ensemble": self.ensemble.to_dict(),
            "n": self.n,
            "seed": self.seed,
            "noise": {"kind": self.noise_kind, "tau": self.noise_tau},
        }
        (directory / "meta.json").write_text(json.dumps(meta, indent=2) + "\n")
        np.savetxt(directory / "y.csv", self.y, fmt="%.17g")

    @classmethod
    def load(cls, directory) -> "MeasurementSet":
        directory = Path(directory)
        meta = json.loads((directory / "meta.json").read_text())
        e = meta["ensemble"]
        ensemble = Ensemble(e["kind"], e["d"], e["p"], e.get("s", 1), e.get("kappa", 1.0))
        y = np.atleast_1d(np.loadtxt(directory / "y.csv"))
        xs = sample(ensemble, int(meta["n"]), int(meta["seed"]))
        if y.size != xs.shape[0]:
            raise ValueError(f"y.csv has {y.size} entries, meta says n={xs.shape[0]}")
        noise_meta = meta.get("noise") or {}
        return cls(ensemble, xs, y, int(meta["seed"]), noise_meta.get("kind"), noise_meta.get("tau", 0.0))


@dataclass(frozen=True)
class ImplicitMeasurements:
    """Measurement operator that regenerates ``X_i`` from the seed on demand.

    Produces exactly the matrices of :func:`sample` without holding all of
    them in memory; ``chunk`` matrices are materialized at a time.
    """

    ensemble: Ensemble
    n: int
    seed: int
    chunk: int = 256

    def _chunks(self):
        for start in range(0, self.n, self.chunk):
            stop = min(start + self.chunk, self.n)
            block = np.empty((stop - start, self.ensemble.d, self.ensemble.p))
            for j, i in enumerate(range(start, stop)):
                block[j] = self.ensemble.draw(stream(self.seed, MEASUREMENT_STREAM, i))
            yield start, stop, block

    def forward(self, theta):
        out = np.empty(self.n)
        for start, stop, block in self._chunks():
            out[start:stop] = forward(block, theta)
        return out

    def adjoint(self, u):
        u = np.asarray(u, dtype=float)
        out = np.zeros((self.ensemble.d, self.ensemble.p))
        for start, stop, block in self._chunks():
            out += adjoint(block, u[start:stop])
        return out

    def gram(self):
        dp = self.ensemble.d * self.ensemble.p
        out = np.zeros((dp, dp))
        for _, _, block in self._chunks():
            out += gram(block)
        return out
