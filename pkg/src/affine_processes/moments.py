"""Polynomial property: the generator acting on polynomials of degree <= k.

For a canonical affine jump-diffusion the generator maps the monomial
``x^alpha`` to a polynomial of degree ``<= |alpha|``, so conditional
moments solve a linear ODE whose solution is a matrix exponential.
"""

import itertools
from dataclasses import dataclass
from math import comb

import numpy as np
from scipy.linalg import expm

from .errors import DomainError, MomentDomainError
from .models import CanonicalAffineModel


def multi_indices(d, k):
    """Multi-indices ``|alpha| <= k`` in graded lexicographic order.

    >>> multi_indices(2, 2)
    [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]
    """
    out = []
    for deg in range(k + 1):
        block = [c for c in itertools.product(range(deg, -1, -1), repeat=d) if sum(c) == deg]
        out.extend(sorted(block, reverse=True))
    return out


@dataclass(frozen=True)
class MomentOperator:
    """Matrix ``A`` with ``(generator x^alpha)(x) = sum_gamma A[alpha, gamma] x^gamma``."""

    degree: int
    basis: tuple
    A: np.ndarray

    @property
    def index(self):
        return {alpha: i for i, alpha in enumerate(self.basis)}

    def monomials(self, x):
        x = np.asarray(x, dtype=float)
        return np.array([np.prod(x ** np.array(alpha)) for alpha in self.basis])


def _add(poly, gamma, coef):
    if coef != 0.0:
        poly[gamma] = poly.get(gamma, 0.0) + coef


def _sub(alpha, j, k=None):
    g = list(alpha)
    g[j] -= 1
    if k is not None:
        g[k] -= 1
    return tuple(g)


def _jump_expansion(alpha, law, scale):
    """``E[(z + xi / scale)^alpha] - z^alpha`` as a polynomial in ``z``."""
    poly = {}
    ranges = [range(a + 1) for a in alpha]
    for gamma in itertools.product(*ranges):
        if gamma == tuple(alpha):
            continue
        kappa = tuple(a - g for a, g in zip(alpha, gamma))
        coef = float(np.prod([comb(a, g) for a, g in zip(alpha, gamma)]))
        moment = law.raw_moment(kappa)
        if not np.isfinite(moment):
            raise MomentDomainError(f"jump law {law.kind} lacks the order-{sum(kappa)} moment")
        _add(poly, gamma, coef * moment / np.prod(scale ** np.array(kappa)))
    return poly


def _shift_up(gamma, i):
    return tuple(g + (1 if q == i else 0) for q, g in enumerate(gamma))


def generator_matrix(model, k, shift=None, scale=None):
    """Exact action of the generator on polynomials of degree ``<= k``.

    With ``shift`` and ``scale`` the basis is made of monomials in the
    standardised coordinates ``z = (xi - shift) / scale``; since drift,
    diffusion and jump intensities are affine in the state, the generator
    still maps degree ``j`` into degree ``<= j``.
    """
    if not isinstance(model, CanonicalAffineModel):
        raise TypeError("generator_matrix supports canonical models only")
    d, m = model.d, model.m
    s = np.zeros(d) if shift is None else np.asarray(shift, dtype=float)
    c = np.ones(d) if scale is None else np.asarray(scale, dtype=float)
    if np.any(c <= 0):
        raise ValueError("scale must be positive")
    # affine coefficients in z: drift_j = b0_j + sum_l b1_jl z_l, diffusion similar
    b0 = (model.b + model.beta @ s) / c
    b1 = model.beta * c[None, :] / c[:, None]
    outer = np.outer(c, c)
    a0 = (model.a + sum(s[i] * model.alpha[i] for i in range(m))) / outer
    a1 = [c[i] * model.alpha[i] / outer for i in range(m)]

    basis = multi_indices(d, k)
    pos = {alpha: i for i, alpha in enumerate(basis)}
    A = np.zeros((len(basis), len(basis)))
    for row, alpha in enumerate(basis):
        poly = {}
        for j in range(d):
            if alpha[j] == 0:
                continue
            low = _sub(alpha, j)
            _add(poly, low, alpha[j] * b0[j])
            for l in range(d):
                _add(poly, _shift_up(low, l), alpha[j] * b1[j, l])
        for j in range(d):
            for l in range(d):
                c2 = alpha[j] * (alpha[l] - (1 if j == l else 0))
                if c2 <= 0:
                    continue
                low = _sub(alpha, j, l)
                _add(poly, low, 0.5 * c2 * a0[j, l])
                for i in range(m):
                    _add(poly, _shift_up(low, i), 0.5 * c2 * a1[i][j, l])
        if sum(alpha) > 0:
            if model.jump0 is not None and model.jump0.rate > 0:
                for gamma, coef in _jump_expansion(alpha, model.jump0, c).items():
                    _add(poly, gamma, model.jump0.rate * coef)
            for i, law in enumerate(model.jumps):
                if law is None or law.rate == 0:
                    continue
                for gamma, coef in _jump_expansion(alpha, law, c).items():
                    # intensity rate * xi_i = rate * (s_i + c_i z_i)
                    _add(poly, gamma, law.rate * s[i] * coef)
                    _add(poly, _shift_up(gamma, i), law.rate * c[i] * coef)
        for gamma, coef in poly.items():
            A[row, pos[gamma]] += coef
    return MomentOperator(k, tuple(basis), A)


def moments(model, t, x, k, operator=None, shift=None, scale=None):
    """``E[X_t^alpha | X_0 = x]`` for all ``|alpha| <= k`` (graded lex order).

    With ``shift``/``scale`` the moments are those of ``(X_t - shift) / scale``.
    Returns ``(basis, values)``.
    """
    x = np.asarray(x, dtype=float)
    if not model.in_state_space(x):
        raise DomainError(f"initial state {x} is outside the state space")
    op = operator if operator is not None else generator_matrix(model, k, shift, scale)
    z = x
    if shift is not None or scale is not None:
        z = (x - (0.0 if shift is None else np.asarray(shift))) / (1.0 if scale is None else np.asarray(scale))
    vals = expm(t * op.A) @ op.monomials(z)
    return op.basis, vals


def moment_dict(model, t, x, k):
    basis, vals = moments(model, t, x, k)
    return dict(zip(basis, vals))


def mean_and_variance(model, t, x):
    """Per-coordinate mean and variance from the order-2 moments."""
    basis, vals = moments(model, t, x, 2)
    d = model.d
    idx = {a: i for i, a in enumerate(basis)}
    mean = np.empty(d)
    var = np.empty(d)
    for j in range(d):
        e1 = tuple(1 if q == j else 0 for q in range(d))
        e2 = tuple(2 if q == j else 0 for q in range(d))
        mean[j] = vals[idx[e1]]
        var[j] = vals[idx[e2]] - mean[j] ** 2
    return mean, var
