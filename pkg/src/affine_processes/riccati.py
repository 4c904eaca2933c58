"""Functional characteristics ``(F, R)`` and the generalized Riccati system.

``psi' = R(psi)``, ``psi(0) = u`` and ``phi' = F(psi)``, ``phi(0) = 0`` are
integrated jointly (``phi`` as an appended quadrature coordinate). Complex
data are split into real and imaginary parts. Explosion of the solution is
detected by a norm cap and localised to a bracket of relative width below
``1e-6``.
"""

from dataclasses import dataclass, field

import numpy as np

from . import ode
from .errors import DomainError, StiffnessError
from .models import CanonicalAffineModel, WishartModel

BLOWUP_CAP = 1e8
SINGULAR_MARGIN = 1e-6
COMPLETE, BLOWUP = "Complete", "BlowUp"


class CharacteristicExponents:
    """Vectorised evaluators of ``F`` and ``R``.

    Arguments are complex arrays of shape ``(..., dim)``; matrix-valued
    models use row-major flattened matrices.
    """

    dim = None
    model = None

    def F(self, u):
        raise NotImplementedError

    def R(self, u):
        raise NotImplementedError

    def jump_laws(self):
        return []

    def domain_margin(self, u):
        u = np.asarray(u)
        margin = np.full(u.shape[:-1], np.inf)
        for _, j in self.jump_laws():
            margin = np.minimum(margin, j.domain_margin(u))
        return margin

    def check_domain(self, u):
        u = np.asarray(u)
        for label, j in self.jump_laws():
            if np.any(~(np.asarray(j.domain_margin(u)) > 0)):
                raise DomainError(f"Re(u) outside the Laplace-transform domain of jump law {label} ({j.kind})")

    def __call__(self, u):
        """Return ``(F(u), R(u))`` after checking the jump-transform domain."""
        u = np.asarray(u, dtype=complex)
        self.check_domain(u)
        return self.F(u), self.R(u)


class CanonicalExponents(CharacteristicExponents):
    def __init__(self, model):
        self.model = model
        self.dim = model.d

    def jump_laws(self):
        return [(lbl, j) for lbl, j in self.model._labelled_jumps() if j.rate > 0]

    def F(self, u):
        mdl = self.model
        out = u @ mdl.b + 0.5 * np.einsum("...j,jk,...k->...", u, mdl.a, u)
        if mdl.jump0 is not None and mdl.jump0.rate > 0:
            out = out + mdl.jump0.rate * (mdl.jump0.laplace(u) - 1.0)
        return out

    def R(self, u):
        mdl = self.model
        out = u @ mdl.beta
        if mdl.m:
            out = np.array(out, dtype=complex if np.iscomplexobj(u) else float)
            for i, al in enumerate(mdl.alpha):
                extra = 0.5 * np.einsum("...j,jk,...k->...", u, al, u)
                j = mdl.jumps[i]
                if j is not None and j.rate > 0:
                    extra = extra + j.rate * (j.laplace(u) - 1.0)
                out[..., i] += extra
        return out


class WishartExponents(CharacteristicExponents):
    """``F(u) = tr(b u) + lam (L(u) - 1)``, ``R(u) = 2 u alpha u + u beta + beta^T u``."""

    def __init__(self, model):
        self.model = model
        self.d = model.d
        self.dim = model.d * model.d

    def jump_laws(self):
        j = self.model.jump
        return [("jump", j)] if j is not None and j.rate > 0 else []

    def F(self, u):
        mdl = self.model
        out = u @ mdl.b.ravel()
        if mdl.has_jumps():
            out = out + mdl.jump.rate * (mdl.jump.laplace(u) - 1.0)
        return out

    def R(self, u):
        d, mdl = self.d, self.model
        U = u.reshape(u.shape[:-1] + (d, d))
        out = 2.0 * U @ mdl.alpha @ U + U @ mdl.beta + mdl.beta.T @ U
        return out.reshape(u.shape)


class TiltedExponents(CharacteristicExponents):
    """``F~(u) = F(u + theta) - F(theta)``, ``R~(u) = R(u + theta) - R(theta)``."""

    def __init__(self, base, theta):
        self.base = base
        self.model = base.model
        self.dim = base.dim
        self.theta = np.asarray(theta, dtype=float).ravel()
        if self.theta.shape != (self.dim,):
            raise DomainError(f"tilt parameter has {self.theta.size} entries, expected {self.dim}")
        base.check_domain(self.theta.astype(complex))
        self.F_theta = np.real_if_close(base.F(self.theta))
        self.R_theta = np.real_if_close(base.R(self.theta))

    def jump_laws(self):
        return []

    def domain_margin(self, u):
        return self.base.domain_margin(np.asarray(u) + self.theta)

    def check_domain(self, u):
        self.base.check_domain(np.asarray(u) + self.theta)

    def F(self, u):
        return self.base.F(u + self.theta) - self.F_theta

    def R(self, u):
        return self.base.R(u + self.theta) - self.R_theta


def exponents(model):
    """Return the characteristic exponents of a model (or pass exponents through)."""
    if isinstance(model, CharacteristicExponents):
        return model
    if isinstance(model, WishartModel):
        return WishartExponents(model)
    if isinstance(model, CanonicalAffineModel):
        return CanonicalExponents(model)
    raise TypeError(f"not an affine model: {type(model).__name__}")


def eval_exponents(model, u):
    """``(F(u), R(u))`` for a single argument, with domain checking."""
    ex = exponents(model)
    u = np.asarray(u, dtype=complex).ravel()
    if u.shape != (ex.dim,):
        raise DomainError(f"argument has {u.size} entries, expected {ex.dim}")
    F, R = ex(u)
    return complex(F), np.asarray(R, dtype=complex)


# --------------------------------------------------------------------------
# packing of complex (psi, phi) into a real ODE state


class _System:
    def __init__(self, ex, U):
        self.ex = ex
        self.dim = ex.dim
        U = np.asarray(U)
        self.complex = bool(np.iscomplexobj(U) and np.any(np.imag(U) != 0))
        self.U = U.astype(complex) if self.complex else np.real(U).astype(float)
        self.unorm = np.linalg.norm(self.U, axis=-1)

    def pack(self):
        U = self.U
        n = U.shape[0]
        if self.complex:
            return np.concatenate([U.real, U.imag, np.zeros((n, 2))], axis=1)
        return np.concatenate([U, np.zeros((n, 1))], axis=1)

    def psi(self, y):
        d = self.dim
        if self.complex:
            return y[..., :d] + 1j * y[..., d: 2 * d]
        return y[..., :d]

    def phi(self, y):
        d = self.dim
        if self.complex:
            return y[..., 2 * d] + 1j * y[..., 2 * d + 1]
        return y[..., d]

    def rhs(self, y):
        psi = self.psi(y)
        bad = ~(self.ex.domain_margin(psi) > 0)
        R = self.ex.R(psi)
        F = self.ex.F(psi)
        if self.complex:
            out = np.concatenate([R.real, R.imag, F.real[:, None], F.imag[:, None]], axis=1)
        else:
            out = np.concatenate([np.real(R), np.real(F)[:, None]], axis=1)
        if np.any(bad):
            out[bad] = np.nan
        return out

    def blowup(self, y, rows):
        return np.linalg.norm(self.psi(y), axis=-1) > BLOWUP_CAP * (1.0 + self.unorm[rows])

    def singular(self, y, rows):
        psi = self.psi(y)
        with np.errstate(all="ignore"):
            margin = self.ex.domain_margin(psi)
            speed = np.linalg.norm(self.ex.R(psi), axis=-1)
        return (margin < SINGULAR_MARGIN) | ~np.isfinite(speed) | (speed > BLOWUP_CAP * (1.0 + self.unorm[rows]))


def _check_tol(T, tol):
    if not T > 0:
        raise ValueError("horizon T must be positive")
    if not 1e-13 <= tol <= 1e-3:
        raise ValueError("tol must lie in [1e-13, 1e-3]")


@dataclass
class RiccatiSolution:
    """Dense output of ``(psi, phi)`` on ``[0, T]`` (or up to blow-up)."""

    u: np.ndarray
    T: float
    status: str
    times: np.ndarray
    states: np.ndarray
    slopes: np.ndarray
    dense: np.ndarray
    system: object = field(repr=False)
    t_star: float = np.inf
    bracket: tuple = None
    steps: int = 0
    rejected: int = 0
    tol: float = 1e-10

    @property
    def complete(self):
        return self.status == COMPLETE

    @property
    def t_end(self):
        return float(self.times[-1])

    def _state(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t < 0) or np.any(t > self.t_end * (1 + 1e-12)):
            raise ValueError(f"dense output is available on [0, {self.t_end}]")
        k = np.clip(np.searchsorted(self.times, t, side="right") - 1, 0, len(self.times) - 2)
        out = ode.interpolate(self.times[k], self.states[k], self.slopes[k],
                              self.times[k + 1], self.states[k + 1], self.slopes[k + 1], self.dense[k + 1], t)
        exact = t == self.times[k]
        if np.any(exact):
            out = np.where(np.asarray(exact)[..., None], self.states[k], out)
        return out

    def psi(self, t):
        """``psi(t, u)``; complex array of shape ``t.shape + (dim,)``."""
        return self.system.psi(self._state(t)).astype(complex)

    def phi(self, t):
        return self.system.phi(self._state(t)).astype(complex)

    @property
    def psi_T(self):
        return self.system.psi(self.states[-1]).astype(complex)

    @property
    def phi_T(self):
        return complex(self.system.phi(self.states[-1]))

    def to_rows(self, n_points=101):
        """Rows ``(t, Re psi..., Im psi..., Re phi, Im phi)`` on a uniform grid."""
        ts = np.linspace(0.0, self.t_end, n_points)
        psi, phi = self.psi(ts), self.phi(ts)
        return np.column_stack([ts, psi.real, psi.imag, phi.real, phi.imag])


def solve(model, u, T, tol=1e-10):
    """Solve the Riccati system from ``u`` up to ``T``.

    Returns a :class:`RiccatiSolution`; when ``psi`` explodes before ``T``
    its status is ``"BlowUp"`` with ``t_star`` and a bracket ``(t_lo, t_hi)``
    of width below ``1e-6 * t_star``. A collapsing step size without norm
    growth raises :class:`StiffnessError`.
    """
    _check_tol(T, tol)
    ex = exponents(model)
    u = np.asarray(u).ravel()
    if u.shape != (ex.dim,):
        raise DomainError(f"initial datum has {u.size} entries, expected {ex.dim}")
    ex.check_domain(u.astype(complex))
    system = _System(ex, u[None, :])
    res = ode.integrate(system.rhs, system.pack(), T, tol, blowup=system.blowup,
                        singular=system.singular, record=True)
    hist = res.history
    times = np.array([h[0] for h in hist])
    states = np.array([h[1] for h in hist])
    slopes = np.array([h[2] for h in hist])
    dense = np.array([h[3] for h in hist])
    stats = {"steps": int(res.n_steps[0]), "rejected": int(res.n_rejected[0]), "tol": tol}
    if res.status[0] == ode.STIFF:
        raise StiffnessError(f"step size collapsed at t={res.t[0]:.6g} without blow-up", res.t[0], res.y[0])
    if res.status[0] == ode.COMPLETE:
        return RiccatiSolution(u, T, COMPLETE, times, states, slopes, dense, system, **stats)

    # blow-up: drop the step that crossed the cap from the dense output
    t_lo, y_lo = float(res.t_lo[0]), res.y_lo[0]
    t_hi = float(res.t[0]) if res.t[0] > t_lo else t_lo + float(res.h[0])
    t_lo, t_hi = _refine_bracket(system, t_lo, y_lo, t_hi, tol)
    keep = times <= t_lo
    if keep.sum() < 2:
        keep[:2] = True
    return RiccatiSolution(u, T, BLOWUP, times[keep], states[keep], slopes[keep], dense[keep], system,
                           t_star=t_hi, bracket=(t_lo, t_hi), **stats)


def _refine_bracket(system, t_lo, y_lo, t_hi, tol, max_iter=80):
    """Bisect the integration horizon until ``t_hi - t_lo < 1e-6 * t_hi``."""
    for _ in range(max_iter):
        if t_hi - t_lo < 1e-6 * t_hi:
            break
        mid = 0.5 * (t_lo + t_hi)
        sub = ode.integrate(system.rhs, y_lo[None, :], mid - t_lo, tol,
                            blowup=lambda y, rows: system.blowup(y, np.zeros(len(rows), dtype=int)),
                            singular=lambda y, rows: system.singular(y, np.zeros(len(rows), dtype=int)),
                            hmin=1e-14 * t_hi)
        st = sub.status[0]
        if st == ode.COMPLETE:
            t_lo, y_lo = mid, sub.y[0]
        elif st == ode.BLOWUP:
            t_hi = t_lo + (float(sub.t[0]) if np.isfinite(sub.t[0]) and sub.t[0] > 0 else mid - t_lo)
            if np.isfinite(sub.t_lo[0]) and sub.t_lo[0] > 0:
                y_lo = sub.y_lo[0]
                t_lo = t_lo + float(sub.t_lo[0])
        else:
            break
    return t_lo, t_hi


@dataclass
class BatchSolution:
    psi: np.ndarray      # (n, dim) complex at T, nan where blown up
    phi: np.ndarray      # (n,) complex
    blowup: np.ndarray   # bool
    t_star: np.ndarray   # inf where complete


def solve_batch(model, U, T, tol=1e-10, raise_on_stiff=True):
    """Terminal values of many Riccati solves at once (no dense output)."""
    _check_tol(T, tol)
    ex = exponents(model)
    U = np.atleast_2d(np.asarray(U))
    if U.shape[1] != ex.dim:
        raise DomainError(f"initial data have {U.shape[1]} columns, expected {ex.dim}")
    ex.check_domain(U.astype(complex))
    system = _System(ex, U)
    res = ode.integrate(system.rhs, system.pack(), T, tol, blowup=system.blowup, singular=system.singular)
    if raise_on_stiff and np.any(res.status == ode.STIFF):
        k = int(np.flatnonzero(res.status == ode.STIFF)[0])
        raise StiffnessError(f"step size collapsed for initial datum {U[k]}", res.t[k], res.y[k])
    blow = res.status == ode.BLOWUP
    psi = system.psi(res.y).astype(complex)
    phi = system.phi(res.y).astype(complex)
    psi[blow] = np.nan
    phi[blow] = np.nan
    t_star = np.where(blow, res.t, np.inf)
    return BatchSolution(psi, phi, blow, t_star)


def explosion_time(model, u, T_max, tol=1e-10):
    """Blow-up time of the Riccati solution started at real ``u`` (``inf`` if beyond ``T_max``)."""
    u = np.asarray(u)
    if np.iscomplexobj(u) and np.any(np.imag(u) != 0):
        raise DomainError("explosion_time expects a real initial datum")
    sol = solve(model, np.real(u).astype(float), T_max, tol)
    return sol.t_star if sol.status == BLOWUP else np.inf
