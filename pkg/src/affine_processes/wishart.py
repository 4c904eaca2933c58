"""Non-central Wishart laws: transition parameters of Wishart processes, their
Laplace transform and existence conditions (Gindikin set and rank bounds).
"""

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.linalg import expm

from .errors import DomainError, StructureError, UnsupportedParameterization
from .linalg import is_psd, is_symmetric, psd_rank, van_loan_integral
from .models import WishartModel, validate

HALF_INTEGER_TOL = 1e-9


@dataclass(frozen=True)
class ExistenceReport:
    d: int
    p: float
    rank: int
    strict: bool
    in_gindikin: bool
    rank_bound: float
    reasons: tuple = field(default_factory=tuple)

    @property
    def valid(self):
        return not self.reasons

    def __bool__(self):
        return self.valid

    def to_dict(self):
        return {
            "valid": self.valid, "d": self.d, "p": self.p, "rank": self.rank, "strict": self.strict,
            "in_gindikin": self.in_gindikin, "rank_bound": self.rank_bound, "reasons": list(self.reasons),
        }


def in_gindikin_set(d, p):
    """``2p`` in ``{0, 1, ..., d-2}`` or ``2p >= d-1``."""
    two_p = 2.0 * p
    if two_p >= d - 1 - HALF_INTEGER_TOL:
        return True
    k = round(two_p)
    return abs(two_p - k) <= HALF_INTEGER_TOL and 0 <= k <= d - 2


def validate_params(d, p, sigma=None, omega=None, strict=False, tol=1e-12):
    """Existence of the non-central Wishart law with shape ``p`` and non-centrality ``omega``.

    The law exists iff ``p`` lies in the Gindikin set and ``rank(omega) <= 2p + 1``.
    ``strict=True`` tightens the rank bound to ``rank(omega) <= 2p`` when ``2p < d - 1``.
    """
    d = int(d)
    if d < 1:
        raise StructureError("dimension must be >= 1")
    p = float(p)
    if not p >= 0:
        raise StructureError(f"shape parameter must be non-negative, got {p}")
    for name, mat in (("sigma", sigma), ("omega", omega)):
        if mat is None:
            continue
        mat = np.asarray(mat, dtype=float)
        if mat.shape != (d, d) or not is_symmetric(mat):
            raise StructureError(f"{name} must be a symmetric {d}x{d} matrix")
        if not is_psd(mat):
            raise StructureError(f"{name} must be positive semidefinite")
    rank = 0 if omega is None else psd_rank(omega, tol)
    two_p = 2.0 * p
    gindikin = in_gindikin_set(d, p)
    bound = two_p + 1.0
    if strict and two_p < d - 1 - HALF_INTEGER_TOL:
        bound = two_p
    reasons = []
    if not gindikin:
        reasons.append(f"2p = {two_p:g} is outside the Gindikin set for d = {d}")
    if rank > bound + HALF_INTEGER_TOL:
        reasons.append(f"rank(omega) = {rank} exceeds the bound {bound:g}")
    return ExistenceReport(d, p, rank, bool(strict), gindikin, bound, tuple(reasons))


@dataclass(frozen=True)
class WishartDistribution:
    """Non-central Wishart law with shape ``p``, scale ``sigma`` and non-centrality ``omega``.

    Its Laplace transform is
    ``E[exp(-tr(u X))] = det(I + sigma u)^(-p) exp(-tr(u (I + sigma u)^(-1) omega))``.
    """

    p: float
    sigma: np.ndarray
    omega: np.ndarray

    def __post_init__(self):
        sigma = np.asarray(self.sigma, dtype=float)
        omega = np.asarray(self.omega, dtype=float)
        if sigma.ndim != 2 or sigma.shape != omega.shape or sigma.shape[0] != sigma.shape[1]:
            raise StructureError("sigma and omega must be square matrices of equal size")
        if self.p < 0:
            raise StructureError("shape parameter must be non-negative")
        for name, mat in (("sigma", sigma), ("omega", omega)):
            if not is_symmetric(mat, 1e-10) or not is_psd(mat, 1e-10):
                raise StructureError(f"{name} must be symmetric positive semidefinite")
        object.__setattr__(self, "sigma", 0.5 * (sigma + sigma.T))
        object.__setattr__(self, "omega", 0.5 * (omega + omega.T))

    @property
    def d(self):
        return self.sigma.shape[0]

    @cached_property
    def existence(self):
        return validate_params(self.d, self.p, self.sigma, self.omega)

    def mean(self):
        """``E[X] = p sigma + omega``."""
        return self.p * self.sigma + self.omega

    def to_dict(self):
        return {"p": self.p, "sigma": self.sigma.tolist(), "omega": self.omega.tolist(),
                "existence": self.existence.to_dict()}


def laplace(dist, u):
    """``E[exp(-tr(u X))]`` for one ``d x d`` matrix ``u`` or a stack of them."""
    u = np.asarray(u, dtype=float)
    d = dist.d
    if u.shape[-2:] != (d, d):
        raise StructureError(f"u must have trailing shape ({d}, {d})")
    M = np.eye(d) + dist.sigma @ u
    sign, logdet = np.linalg.slogdet(M)
    if np.any(sign <= 0):
        raise DomainError("I + sigma u is not positive definite on this argument")
    inner = u @ np.linalg.solve(M, np.broadcast_to(dist.omega, M.shape))
    out = np.exp(-dist.p * logdet - np.trace(inner, axis1=-2, axis2=-1))
    return float(out) if out.ndim == 0 else out


def shape_parameter(model, tol=1e-10):
    """``p`` with ``b = 2 p alpha``; raises when ``b`` is not of that form."""
    alpha, b = model.alpha, model.b
    na = np.linalg.norm(alpha)
    if na == 0:
        if np.linalg.norm(b) == 0:
            return 0.0
        raise UnsupportedParameterization("alpha = 0 while b != 0: b is not of the form 2 p alpha")
    p = float(np.sum(b * alpha) / (2 * na ** 2))
    if np.linalg.norm(b - 2 * p * alpha) > tol * (1.0 + np.linalg.norm(b)):
        raise UnsupportedParameterization("constant drift b is not of the form 2 p alpha")
    return p


def transition_params(model, t, x=None):
    """Wishart law of ``X_t`` given ``X_0 = x`` for a jump-free model with ``b = 2 p alpha``.

    ``sigma_t = int_0^t exp(s beta) 2 alpha exp(s beta^T) ds`` and
    ``omega_t = exp(t beta) x exp(t beta^T)``.
    """
    if not isinstance(model, WishartModel):
        raise UnsupportedParameterization("transition_params needs a Wishart model")
    if model.has_jumps():
        raise UnsupportedParameterization("transition parameters are only defined without jumps")
    report = validate(model)
    if not report.ok:
        raise DomainError("model is not admissible: " + "; ".join(c.name for c in report.failures()))
    x = model.x0 if x is None else np.asarray(x, dtype=float)
    if x is None:
        raise DomainError("no initial state given")
    if not model.in_state_space(x):
        raise DomainError("initial state is not positive semidefinite")
    if t < 0:
        raise DomainError("time must be non-negative")
    p = shape_parameter(model)
    sigma = van_loan_integral(model.beta, 2.0 * model.alpha, t)
    e = expm(t * model.beta)
    omega = e @ x @ e.T
    return WishartDistribution(p, sigma, 0.5 * (omega + omega.T))


__all__ = [
    "ExistenceReport", "WishartDistribution", "in_gindikin_set", "laplace", "psd_rank",
    "shape_parameter", "transition_params", "validate_params",
]
