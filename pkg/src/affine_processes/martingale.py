"""Exponential martingales ``exp(<theta, X_t>)`` and exponential tilting.

``exp(<theta, X>)`` is a local martingale exactly when ``F(theta) = 0`` and
``R(theta) = 0``. It is then a true martingale when the tilted process is
conservative, which holds when the zero solution of ``g' = R~(g)``,
``g(0) = 0`` is the only non-positive one. That uniqueness is probed by
starting from ``-eps`` for several ``eps`` and checking that the solution
stays proportional to ``eps``.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, StiffnessError
from .models import validate
from .riccati import BLOWUP, TiltedExponents, exponents, solve

MARTINGALE, STRICT_LOCAL, NOT_LOCAL, INCONCLUSIVE = "Martingale", "StrictLocal", "NotLocal", "Inconclusive"
EPSILONS = (1e-3, 1e-5, 1e-7)
RATIO_FACTOR = 10.0


def _flat_theta(model, theta):
    ex = exponents(model)
    theta = np.asarray(theta, dtype=float)
    square = getattr(model, "space", None) == "psd" and theta.shape == (model.d, model.d)
    if square and not np.allclose(theta, theta.T):
        raise DomainError("theta must be a symmetric matrix")
    theta = theta.ravel()
    if theta.shape != (ex.dim,):
        raise DomainError(f"theta has {theta.size} entries, expected {ex.dim}")
    return theta


def tilt(model, theta):
    """Characteristic exponents ``F(u + theta) - F(theta)``, ``R(u + theta) - R(theta)``."""
    return TiltedExponents(exponents(model), _flat_theta(model, theta))


@dataclass
class MartingaleResult:
    verdict: str
    theta: np.ndarray
    T: float
    F_theta: float
    R_theta: np.ndarray
    tolerance: float
    epsilons: tuple = ()
    sup_norms: tuple = ()
    ratios: tuple = ()
    diagnostics: dict = field(default_factory=dict)

    @property
    def is_martingale(self):
        return self.verdict == MARTINGALE

    def to_dict(self):
        return {
            "verdict": self.verdict,
            "theta": self.theta.tolist(),
            "T": self.T,
            "F_theta": self.F_theta,
            "R_theta": np.asarray(self.R_theta).tolist(),
            "tolerance": self.tolerance,
            "epsilons": list(self.epsilons),
            "sup_norms": [None if not np.isfinite(s) else s for s in self.sup_norms],
            "ratios": [None if not np.isfinite(r) else r for r in self.ratios],
            "diagnostics": self.diagnostics,
        }


def _perturbation_direction(model, dim):
    if getattr(model, "space", None) == "psd":
        return -np.eye(model.d).ravel()
    e = np.zeros(dim)
    if model.m > 0:
        e[: model.m] = -1.0
    else:
        e[:] = -1.0
    return e


def martingale_check(model, theta, T, epsilons=EPSILONS):
    """Classify ``exp(<theta, X>)`` on ``[0, T]`` as Martingale, StrictLocal or NotLocal.

    A result with verdict ``Inconclusive`` carries the stiffness diagnostics
    instead of a classification.
    """
    report = validate(model)
    if not report.ok:
        raise DomainError("model is not admissible: " + "; ".join(c.name for c in report.failures()))
    if not T > 0:
        raise ValueError("horizon T must be positive")
    base = exponents(model)
    F0, R0 = base(np.zeros(base.dim, dtype=complex))
    if abs(F0) > 1e-12 or np.linalg.norm(R0) > 1e-12:
        raise DomainError("the model is not conservative: F(0) or R(0) is non-zero")
    theta = _flat_theta(model, theta)
    tilted = tilt(model, theta)
    F_th = float(np.real(tilted.F_theta))
    R_th = np.real(np.asarray(tilted.R_theta, dtype=complex))
    tol = 1e-10 * (1.0 + np.linalg.norm(theta) * model.parameter_scale())
    common = {"theta": theta, "T": float(T), "F_theta": F_th, "R_theta": R_th, "tolerance": tol}
    if abs(F_th) > tol or np.linalg.norm(R_th) > tol:
        return MartingaleResult(NOT_LOCAL, **common)

    direction = _perturbation_direction(model, base.dim)
    sups, ratios, blown = [], [], []
    for eps in epsilons:
        rtol = max(1e-13, min(1e-10, 1e-4 * eps))
        try:
            sol = solve(tilted, eps * direction, T, rtol)
        except StiffnessError as exc:
            diag = {"epsilon": eps, "t": exc.t, "message": str(exc)}
            return MartingaleResult(INCONCLUSIVE, epsilons=tuple(epsilons), diagnostics=diag, **common)
        sup = np.abs(sol.system.psi(sol.states)).max()
        if sol.status == BLOWUP:
            blown.append(eps)
            sup = np.inf
        sups.append(float(sup))
        ratios.append(float(sup / eps))
    spread = max(ratios) / min(ratios) if np.all(np.isfinite(ratios)) else np.inf
    verdict = MARTINGALE if spread <= RATIO_FACTOR else STRICT_LOCAL
    diag = {"ratio_spread": None if not np.isfinite(spread) else spread, "blow_up_epsilons": blown}
    return MartingaleResult(verdict, epsilons=tuple(epsilons), sup_norms=tuple(sups), ratios=tuple(ratios),
                            diagnostics=diag, **common)


__all__ = [
    "INCONCLUSIVE",
    "MARTINGALE",
    "NOT_LOCAL",
    "STRICT_LOCAL",
    "MartingaleResult",
    "martingale_check",
    "tilt",
]
