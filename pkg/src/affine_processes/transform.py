"""Affine transform formula, characteristic function, Fourier inversion and
the empirical decay diagnostic for density existence.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DomainError
from .models import CanonicalAffineModel
from .riccati import BLOWUP, exponents, solve, solve_batch


class DensityWarning(UserWarning):
    """Emitted when the decay diagnostic cannot support existence of a density."""


def _pair(psi, x):
    return np.tensordot(psi, np.asarray(x, dtype=float).ravel(), axes=([-1], [0]))


def _check_state(model, x):
    x = np.asarray(x, dtype=float)
    if not model.in_state_space(x):
        raise DomainError(f"state {x.tolist()} is outside the state space of the model")
    return x


def _flat_argument(model, u):
    u = np.asarray(u)
    if u.ndim == 0:
        u = u[None]
    dim = exponents(model).dim
    if u.shape[-2:] == (getattr(model, "d", 0),) * 2 and model.space == "psd":
        u = u.reshape(u.shape[:-2] + (dim,))
    return u


@dataclass
class TransformResult:
    value: complex | None
    t: float
    u: np.ndarray
    x: np.ndarray
    solution: object = field(repr=False, default=None)

    @property
    def explodes(self):
        return self.value is None

    @property
    def t_star(self):
        return None if self.solution is None else self.solution.t_star

    def to_dict(self):
        out = {"t": self.t, "u": _complex_list(self.u), "x": np.asarray(self.x).tolist()}
        if self.explodes:
            out["result"] = "Explodes"
            out["t_star"] = self.t_star
        else:
            out["result"] = "Finite"
            out["value"] = {"re": self.value.real, "im": self.value.imag}
        return out


def _complex_list(u):
    u = np.asarray(u).ravel()
    if np.iscomplexobj(u) and np.any(u.imag != 0):
        return [{"re": float(z.real), "im": float(z.imag)} for z in u]
    return np.real(u).astype(float).tolist()


def mgf(model, t, u, x, tol=1e-10):
    """``E[exp(<u, X_t>) | X_0 = x]`` via the affine transform formula.

    When the Riccati solution explodes before ``t`` the result is marked
    ``Explodes`` (``value is None``).
    """
    x = _check_state(model, x)
    u = _flat_argument(model, u).ravel()
    if t == 0:
        return TransformResult(complex(np.exp(_pair(u, x))), 0.0, u, x)
    sol = solve(model, u, t, tol)
    if sol.status == BLOWUP:
        return TransformResult(None, t, u, x, sol)
    value = np.exp(sol.phi_T + _pair(sol.psi_T, x))
    return TransformResult(complex(value), t, u, x, sol)


def mgf_batch(model, t, U, x, tol=1e-10):
    """Vectorised ATF: complex values, ``nan`` where the solution explodes."""
    x = _check_state(model, x)
    U = np.atleast_2d(_flat_argument(model, U))
    sol = solve_batch(model, U, t, tol)
    with np.errstate(over="ignore", under="ignore", invalid="ignore"):
        return np.exp(sol.phi + _pair(sol.psi, x))


def charfn(model, t, y, x, tol=1e-9):
    """``E[exp(i <y, X_t>) | X_0 = x]`` for one ``y`` or a batch of rows."""
    x = _check_state(model, x)
    y = np.asarray(y, dtype=float)
    single = y.ndim <= 1 and not (model.space == "psd" and y.ndim == 2 and y.shape == (model.d, model.d))
    if model.space == "psd" and y.ndim >= 2 and y.shape[-2:] == (model.d, model.d):
        y = y.reshape(y.shape[:-2] + (model.dim,))
        single = y.ndim == 1
    Y = np.atleast_2d(y)
    if t == 0:
        vals = np.exp(1j * _pair(Y, x))
    else:
        vals = mgf_batch(model, t, 1j * Y, x, tol)
    return complex(vals[0]) if single else vals


@dataclass
class DecayReport:
    slope: float
    verdicts: dict
    super_polynomial: bool
    radii: np.ndarray
    magnitudes: np.ndarray

    def passes(self, k):
        return self.verdicts[k]

    def to_dict(self):
        return {
            "slope": None if not np.isfinite(self.slope) else self.slope,
            "super_polynomial": self.super_polynomial,
            "verdicts": {str(k): v for k, v in self.verdicts.items()},
            "radii": np.asarray(self.radii).tolist(),
            "magnitudes": np.asarray(self.magnitudes).tolist(),
        }


def decay_exponent(model, t, x, direction, radii, k_max=10, tol=1e-9):
    """Fit the decay rate of ``|Phi(t, r * direction, x)|`` in ``r``.

    The slope of ``log|Phi|`` against ``log r`` is fitted by least squares
    over the largest decade of ``radii``; order ``k`` passes when the slope
    is below ``-k``. Any magnitude below ``1e-300`` is reported as
    super-polynomial decay, which passes every order.
    """
    radii = np.asarray(radii, dtype=float)
    if radii.ndim != 1 or radii.size < 3 or np.any(np.diff(radii) <= 0) or radii[0] <= 0:
        raise ValueError("radii must be an increasing list of positive numbers")
    if radii[-1] / radii[0] < 1e3 * (1 - 1e-12):
        raise ValueError("radii must span at least three decades")
    direction = np.asarray(direction, dtype=float).ravel()
    direction = direction / np.linalg.norm(direction)
    mags = np.abs(charfn(model, t, radii[:, None] * direction, x, tol))
    if np.any(mags < 1e-300):
        return DecayReport(-np.inf, {k: True for k in range(k_max + 1)}, True, radii, mags)
    top = radii >= radii[-1] / 10 * (1 - 1e-12)
    if top.sum() < 2:
        top[-2:] = True
    slope = float(np.polyfit(np.log(radii[top]), np.log(mags[top]), 1)[0])
    # a flat transform gives a slope at rounding level, which must not pass k = 0
    verdicts = {k: bool(slope < -k - 1e-8) for k in range(k_max + 1)}
    return DecayReport(slope, verdicts, False, radii, mags)


def _default_damping(model, t, x):
    from .moments import mean_and_variance

    mean, var = mean_and_variance(model, t, x)
    sd = np.maximum(np.sqrt(np.maximum(var, 0.0)), 1e-3 * (1.0 + np.abs(mean)))
    eta = np.zeros(model.d)
    eta[: model.m] = -0.25 / sd[: model.m]
    return eta


def invert_density(model, t, x, grid, eta=None, tol=1e-9, max_nodes=None, tail_tol=1e-10):
    """Transition density of ``X_t | X_0 = x`` on ``grid`` by damped Fourier inversion.

    ``density(xi) = (2 pi)^-d int exp(-<eta + i y, xi>) g(t, eta + i y, x) dy``
    with trapezoidal quadrature. The frequency step is ``pi / (8 span)``
    where ``span`` covers the grid and ten standard deviations around the
    mean; the truncation radius follows the decay pre-scan and is capped by
    ``max_nodes`` per axis.
    """
    from .moments import mean_and_variance

    if not isinstance(model, CanonicalAffineModel):
        raise ConfigurationError("Fourier inversion supports canonical models only")
    d = model.d
    if d > 2:
        raise ConfigurationError("Fourier inversion is limited to d <= 2; use the polynomial expansion")
    x = _check_state(model, x)
    grid = np.asarray(grid, dtype=float)
    pts = grid.reshape(-1, 1) if d == 1 and grid.ndim == 1 else grid.reshape(-1, d)
    eta = _default_damping(model, t, x) if eta is None else np.asarray(eta, dtype=float).ravel()
    if mgf(model, t, eta, x, tol).explodes:
        raise DomainError(f"the moment generating function explodes at damping {eta.tolist()}")

    mean, var = mean_and_variance(model, t, x)
    sd = np.sqrt(np.maximum(var, 0.0))
    span = np.maximum(np.abs(pts - mean).max(axis=0), 10 * sd)
    span = np.maximum(span, 1e-8)
    dy = np.pi / (8 * span)
    if max_nodes is None:
        max_nodes = 20000 if d == 1 else 256

    y_max = np.empty(d)
    for j in range(d):
        e = np.zeros(d)
        e[j] = 1.0
        scale = 1.0 / max(sd[j], 1e-3 * (1.0 + abs(mean[j])))
        radii = scale * np.logspace(-1, 4, 26)
        rep = decay_exponent(model, t, x, e, radii, tol=tol)
        if not rep.verdicts[0]:
            warnings.warn("characteristic function does not decay: density may not exist", DensityWarning,
                          stacklevel=2)
        y_max[j] = _truncation_radius(rep, tail_tol, dy[j] * max_nodes)

    axes = [np.arange(0.0 if j == 0 else -y_max[j], y_max[j] + 0.5 * dy[j], dy[j]) for j in range(d)]
    mesh = np.meshgrid(*axes, indexing="ij")
    nodes = np.stack([m.ravel() for m in mesh], axis=1)
    weights = np.ones(())
    for j, ax in enumerate(axes):
        w = np.full(ax.size, dy[j])
        w[[0, -1]] *= 0.5
        if j == 0:
            w *= 2.0  # half line; the other half is the complex conjugate
        weights = np.multiply.outer(weights, w)
    weights = weights.ravel()

    g = mgf_batch(model, t, eta + 1j * nodes, x, tol)
    if np.any(~np.isfinite(g)):
        raise DomainError("transform not finite on the inversion contour")
    gw = g * weights
    out = np.empty(len(pts))
    chunk = max(1, 2_000_000 // len(nodes))
    for s in range(0, len(pts), chunk):
        p = pts[s: s + chunk]
        phase = np.exp(-1j * (p @ nodes.T))
        with np.errstate(over="ignore", invalid="ignore"):
            out[s: s + chunk] = np.exp(-(p @ eta)) * np.real(phase @ gw) / (2 * np.pi) ** d
    return out.reshape(grid.shape if d == 1 and grid.ndim == 1 else grid.shape[:-1])


def _truncation_radius(rep, tail_tol, cap):
    """Frequency radius beyond which the transform tail is negligible."""
    r, mag = rep.radii, rep.magnitudes
    below = np.flatnonzero(mag < tail_tol)
    if rep.super_polynomial:
        return float(min(r[below[0]], cap))
    if rep.slope < -1:
        s = rep.slope
        c = mag[-1] / r[-1] ** s
        y = (tail_tol * (-s - 1) / c) ** (1.0 / (s + 1))
        return float(min(max(y, r[0]), cap))
    return float(cap)
