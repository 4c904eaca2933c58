"""Finite-activity jump laws with closed-form Laplace transforms.

Every law carries its own Poisson ``rate``. Transforms are evaluated on a
flattened coordinate vector: ``d``-vectors on the canonical space and
row-major ``d*d`` matrices on the positive semidefinite cone, so that the
pairing ``<u, xi>`` is always ``sum(u * xi)``.
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.special import gammaincinv, gammaln, ndtri, roots_laguerre

from .errors import DomainError, StructureError
from .linalg import is_psd, is_symmetric, psd_factor

_LAGUERRE_NODES = 60


def _pair(u, vec):
    return np.tensordot(u, vec, axes=([-1], [0]))


@dataclass(frozen=True, eq=False)
class PointJump:
    """Jumps of a fixed size (vector or psd matrix)."""

    rate: float
    size: np.ndarray
    kind = "point"

    @cached_property
    def flat(self):
        return np.asarray(self.size, dtype=float).ravel()

    @property
    def matrix_valued(self):
        return np.ndim(self.size) == 2

    n_uniforms = 0

    def laplace(self, u):
        return np.exp(_pair(u, self.flat))

    def domain_margin(self, u):
        return np.full(np.shape(u)[:-1], np.inf)

    def mean(self):
        return self.flat.copy()

    def raw_moment(self, kappa):
        return float(np.prod(self.flat ** np.asarray(kappa)))

    def sample(self, uniforms):
        return np.broadcast_to(self.flat, (uniforms.shape[0], self.flat.size)).copy()

    def to_dict(self):
        return {"kind": "point", "rate": self.rate, "size": np.asarray(self.size).tolist()}

    def equals(self, other):
        return type(other) is type(self) and self.rate == other.rate and np.array_equal(self.size, other.size)


@dataclass(frozen=True, eq=False)
class RayJump:
    """Jumps ``w * direction`` with ``w`` gamma distributed (exponential when shape=1)."""

    rate: float
    direction: np.ndarray
    shape: float = 1.0
    scale: float = 1.0

    @property
    def kind(self):
        return "exponential" if self.shape == 1.0 else "gamma"

    matrix_valued = False
    n_uniforms = 1

    @cached_property
    def flat(self):
        return np.asarray(self.direction, dtype=float).ravel()

    def domain_margin(self, u):
        return 1.0 - self.scale * np.real(_pair(u, self.flat))

    def laplace(self, u):
        base = 1.0 - self.scale * _pair(u, self.flat)
        with np.errstate(all="ignore"):
            out = base ** (-self.shape)
        return np.where(np.real(base) > 0, out, np.nan)

    def mean(self):
        return self.shape * self.scale * self.flat

    def raw_moment(self, kappa):
        kappa = np.asarray(kappa)
        n = int(kappa.sum())
        w_moment = np.exp(n * np.log(self.scale) + gammaln(self.shape + n) - gammaln(self.shape))
        return float(w_moment * np.prod(self.flat ** kappa))

    def sample(self, uniforms):
        w = gammaincinv(self.shape, uniforms[:, 0]) * self.scale
        return w[:, None] * self.flat

    def to_dict(self):
        out = {"kind": self.kind, "rate": self.rate, "direction": np.asarray(self.direction).tolist()}
        if self.kind == "exponential":
            out["mean"] = self.scale
        else:
            out["shape"] = self.shape
            out["scale"] = self.scale
        return out

    def equals(self, other):
        return (type(other) is type(self) and self.rate == other.rate and self.shape == other.shape
                and self.scale == other.scale and np.array_equal(self.direction, other.direction))


@dataclass(frozen=True, eq=False)
class RankOneJump:
    """Matrix jumps ``w v v^T`` with ``w`` exponential of the given mean."""

    rate: float
    vector: np.ndarray
    mean_weight: float = 1.0
    kind = "rank_one"
    matrix_valued = True
    n_uniforms = 1

    @cached_property
    def flat(self):
        v = np.asarray(self.vector, dtype=float)
        return np.outer(v, v).ravel()

    def domain_margin(self, u):
        return 1.0 - self.mean_weight * np.real(_pair(u, self.flat))

    def laplace(self, u):
        base = 1.0 - self.mean_weight * _pair(u, self.flat)
        with np.errstate(all="ignore"):
            out = 1.0 / base
        return np.where(np.real(base) > 0, out, np.nan)

    def mean(self):
        return self.mean_weight * self.flat

    def sample(self, uniforms):
        w = -np.log(uniforms[:, 0]) * self.mean_weight
        return w[:, None] * self.flat

    def to_dict(self):
        return {"kind": "rank_one", "rate": self.rate, "vector": np.asarray(self.vector).tolist(),
                "mean": self.mean_weight}

    def equals(self, other):
        return (type(other) is type(self) and self.rate == other.rate
                and self.mean_weight == other.mean_weight and np.array_equal(self.vector, other.vector))


@dataclass(frozen=True, eq=False)
class GaussianRankOneJump:
    """Matrix jumps ``w xi xi^T`` with ``xi ~ N(0, cov)`` and ``w`` exponential.

    The transform ``E[det(I - 2 w cov u)^(-1/2)]`` is averaged over ``w`` by
    Gauss-Laguerre quadrature; it is finite exactly on ``Re(u) <= 0``.
    """

    rate: float
    cov: np.ndarray
    mean_weight: float = 1.0
    kind = "gaussian_rank_one"
    matrix_valued = True

    @property
    def n_uniforms(self):
        return 1 + self.dim

    @property
    def dim(self):
        return np.shape(self.cov)[0]

    @cached_property
    def _nodes(self):
        return roots_laguerre(_LAGUERRE_NODES)

    def domain_margin(self, u):
        d = self.dim
        re = np.real(u).reshape(np.shape(u)[:-1] + (d, d))
        lam = np.linalg.eigvalsh(0.5 * (re + np.swapaxes(re, -1, -2)))[..., -1]
        # closed domain: a margin of exactly zero is still admissible
        return np.where(lam <= 1e-14, np.inf, -lam)

    def laplace(self, u):
        d = self.dim
        u = np.asarray(u, dtype=complex)
        mats = u.reshape(u.shape[:-1] + (d, d))
        kappa = np.linalg.eigvals(np.asarray(self.cov, dtype=float) @ mats)
        z, wts = self._nodes
        w = self.mean_weight * z
        terms = np.prod((1.0 - 2.0 * w[:, None] * kappa[..., None, :]) ** -0.5, axis=-1)
        out = terms @ wts
        ok = np.isfinite(self.domain_margin(u))
        return np.where(ok, out, np.nan)

    def mean(self):
        return self.mean_weight * np.asarray(self.cov, dtype=float).ravel()

    def sample(self, uniforms):
        w = -np.log(uniforms[:, 0]) * self.mean_weight
        xi = ndtri(uniforms[:, 1:]) @ psd_factor(np.asarray(self.cov, dtype=float)).T
        return (w[:, None, None] * xi[:, :, None] * xi[:, None, :]).reshape(len(w), -1)

    def to_dict(self):
        return {"kind": "gaussian_rank_one", "rate": self.rate, "cov": np.asarray(self.cov).tolist(),
                "mean": self.mean_weight}

    def equals(self, other):
        return (type(other) is type(self) and self.rate == other.rate
                and self.mean_weight == other.mean_weight and np.array_equal(self.cov, other.cov))


CANONICAL_KINDS = ("point", "exponential", "gamma")
PSD_KINDS = ("point", "rank_one", "gaussian_rank_one")


def jump_from_dict(doc, matrix=False):
    """Build a jump law from its tagged JSON form."""
    if doc is None:
        return None
    kind = doc.get("kind")
    rate = float(doc.get("rate", 0.0))
    if kind == "point":
        size = np.asarray(doc["size"], dtype=float)
        if matrix and size.ndim != 2:
            raise StructureError("matrix point jump needs a square 'size'")
        return PointJump(rate, size)
    if matrix:
        if kind == "rank_one":
            return RankOneJump(rate, np.asarray(doc["vector"], dtype=float), float(doc.get("mean", 1.0)))
        if kind == "gaussian_rank_one":
            cov = np.asarray(doc["cov"], dtype=float)
            if not (is_symmetric(cov) and is_psd(cov)):
                raise StructureError("gaussian_rank_one covariance must be symmetric psd")
            return GaussianRankOneJump(rate, cov, float(doc.get("mean", 1.0)))
        raise StructureError(f"unknown matrix jump kind {kind!r}; expected one of {PSD_KINDS}")
    if kind == "exponential":
        return RayJump(rate, np.asarray(doc["direction"], dtype=float), 1.0, float(doc["mean"]))
    if kind == "gamma":
        return RayJump(rate, np.asarray(doc["direction"], dtype=float), float(doc["shape"]), float(doc["scale"]))
    raise StructureError(f"unknown jump kind {kind!r}; expected one of {CANONICAL_KINDS}")


def check_in_domain(jump, u, label):
    """Raise ``DomainError`` naming ``label`` when ``Re(u)`` leaves the transform domain."""
    if jump is None or jump.rate == 0:
        return
    margin = np.asarray(jump.domain_margin(u))
    if np.any(~(margin > 0)):
        raise DomainError(f"argument outside the Laplace-transform domain of jump doc {label} ({jump.kind})")


__all__ = [
    "CANONICAL_KINDS",
    "PSD_KINDS",
    "GaussianRankOneJump",
    "PointJump",
    "RankOneJump",
    "RayJump",
    "check_in_domain",
    "jump_from_dict",
]
