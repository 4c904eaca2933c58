"""Weighted polynomial density proxy built from exact conditional moments.

The transition density is approximated by ``w(xi) * sum_alpha c_alpha p_alpha(xi)``
where ``w`` is a product of one-dimensional Gaussian or gamma weights and
``p_alpha`` are products of the matching orthonormal Hermite and Laguerre
polynomials. Each ``c_alpha = E[p_alpha(X_t)]`` is a finite linear
combination of moments, which the polynomial property gives exactly.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, roots_genlaguerre, roots_hermitenorm

from .errors import ConfigurationError, SupportError
from .models import CanonicalAffineModel
from .moments import mean_and_variance, moments, multi_indices


class OrthonormalFamily:
    """Orthonormal polynomials in a standardised variable ``z``.

    The family is defined by its three-term recurrence
    ``z p_n = b_{n+1} p_{n+1} + a_n p_n + b_n p_{n-1}``, with ``p_0 = 1``.
    """

    def __init__(self, a, b):
        self._a = a
        self._b = b

    def evaluate(self, z, N):
        """Values ``p_0(z), ..., p_N(z)`` stacked along a new last axis."""
        z = np.asarray(z, dtype=float)
        out = np.empty(z.shape + (N + 1,))
        out[..., 0] = 1.0
        if N >= 1:
            out[..., 1] = (z - self._a(0)) / self._b(1)
        for n in range(1, N):
            out[..., n + 1] = ((z - self._a(n)) * out[..., n] - self._b(n) * out[..., n - 1]) / self._b(n + 1)
        return out

    def coefficients(self, N):
        """Row ``n`` holds the coefficients of ``p_n`` in powers of ``z``."""
        C = np.zeros((N + 1, N + 1))
        C[0, 0] = 1.0
        if N >= 1:
            C[1, 1] = 1.0 / self._b(1)
            C[1, 0] = -self._a(0) / self._b(1)
        for n in range(1, N):
            zp = np.roll(C[n], 1)
            zp[0] = 0.0
            C[n + 1] = (zp - self._a(n) * C[n] - self._b(n) * C[n - 1]) / self._b(n + 1)
        return C


@dataclass(frozen=True)
class GaussianWeight:
    """Normal weight on a real coordinate; orthonormal family: Hermite."""

    mean: float
    var: float
    kind = "gaussian"

    def __post_init__(self):
        if not self.var > 0:
            raise ConfigurationError("Gaussian weight needs a positive variance")

    @property
    def shift(self):
        return self.mean

    @property
    def scale(self):
        return float(np.sqrt(self.var))

    @property
    def family(self):
        return OrthonormalFamily(lambda n: 0.0, lambda n: np.sqrt(n))

    def pdf(self, xi):
        z = (np.asarray(xi, dtype=float) - self.mean) / self.scale
        return np.exp(-0.5 * z ** 2) / (self.scale * np.sqrt(2 * np.pi))

    def in_support(self, xi):
        return np.isfinite(xi)

    def quadrature(self, n):
        z, w = roots_hermitenorm(n)
        return z, w / np.sqrt(2 * np.pi)

    def to_dict(self):
        return {"kind": self.kind, "mean": self.mean, "var": self.var}


@dataclass(frozen=True)
class GammaWeight:
    """Gamma weight on a positive coordinate; orthonormal family: Laguerre.

    The Laguerre polynomials are sign-normalised to a positive leading
    coefficient.
    """

    shape: float
    scale: float
    kind = "gamma"

    def __post_init__(self):
        if not (self.shape > 0 and self.scale > 0):
            raise ConfigurationError("gamma weight needs positive shape and scale")

    @property
    def shift(self):
        return 0.0

    @property
    def family(self):
        k = self.shape
        return OrthonormalFamily(lambda n: 2 * n + k, lambda n: np.sqrt(n * (n + k - 1)))

    def pdf(self, xi):
        xi = np.asarray(xi, dtype=float)
        z = xi / self.scale
        with np.errstate(divide="ignore", invalid="ignore"):
            logp = (self.shape - 1) * np.log(z) - z - gammaln(self.shape) - np.log(self.scale)
            out = np.exp(logp)
        return np.where(xi > 0, out, np.where(xi == 0, self._at_zero(), 0.0))

    def _at_zero(self):
        if self.shape > 1:
            return 0.0
        return 1.0 / self.scale if self.shape == 1 else np.inf

    def in_support(self, xi):
        return xi >= 0

    def quadrature(self, n):
        z, w = roots_genlaguerre(n, self.shape - 1)
        return z, w / np.exp(gammaln(self.shape))

    def to_dict(self):
        return {"kind": self.kind, "shape": self.shape, "scale": self.scale}


def weight_from_dict(doc):
    kind = doc.get("kind")
    if kind == "gaussian":
        return GaussianWeight(float(doc["mean"]), float(doc["var"]))
    if kind == "gamma":
        return GammaWeight(float(doc["shape"]), float(doc["scale"]))
    raise ConfigurationError(f"unknown weight kind {kind!r}")


@dataclass(frozen=True)
class DensityExpansion:
    """Truncated expansion ``w(xi) sum_{|alpha| <= N} c_alpha p_alpha(xi)``."""

    order: int
    weights: tuple
    basis: tuple
    coefficients: np.ndarray
    t: float = 0.0
    x: tuple = ()

    @property
    def d(self):
        return len(self.weights)

    def coefficient(self, alpha):
        return float(self.coefficients[self.basis.index(tuple(alpha))])

    def parseval_sum(self):
        """``sum c_alpha^2``, the squared L2(w) norm of the projected likelihood ratio."""
        return float(np.sum(self.coefficients ** 2))

    def to_dict(self):
        return {
            "order": self.order,
            "weights": [w.to_dict() for w in self.weights],
            "coefficients": [{"index": list(a), "value": float(c)}
                             for a, c in zip(self.basis, self.coefficients)],
        }


def _positive_mask(model):
    return np.arange(model.d) < model.m


def auto_weights(model, t, x, method="auto"):
    """Product weight calibrated to the transition law.

    Real coordinates get the Gaussian with the exact mean and variance.
    Positive coordinates get a gamma weight with scale ``var / mean``; the
    shape is ``mean^2 / var`` (``method="moments"``) or, with
    ``method="auto"``, the smaller of that and the boundary exponent
    ``2 b_i / alpha_i[i, i]`` that governs the density near zero.
    """
    if method not in ("auto", "moments"):
        raise ConfigurationError(f"unknown weight method {method!r}")
    mean, var = mean_and_variance(model, t, x)
    out = []
    for j in range(model.d):
        if var[j] <= 0:
            raise ConfigurationError(f"coordinate {j} has zero variance; no weight can be matched")
        if j >= model.m:
            out.append(GaussianWeight(float(mean[j]), float(var[j])))
            continue
        if mean[j] <= 0:
            raise ConfigurationError(f"coordinate {j} has non-positive mean; no gamma weight can be matched")
        shape = mean[j] ** 2 / var[j]
        diag = model.alpha[j][j, j]
        if method == "auto" and diag > 0 and model.b[j] > 0:
            shape = min(shape, 2 * model.b[j] / diag)
        out.append(GammaWeight(float(shape), float(var[j] / mean[j])))
    return tuple(out)


def _check_weights(model, weights):
    if len(weights) != model.d:
        raise ConfigurationError(f"expected {model.d} weights, got {len(weights)}")
    for j, w in enumerate(weights):
        if j < model.m and not isinstance(w, GammaWeight):
            raise ConfigurationError(f"coordinate {j} is positive and needs a gamma weight")
        if j >= model.m and not isinstance(w, GaussianWeight):
            raise ConfigurationError(f"coordinate {j} is real and needs a Gaussian weight")


def build_expansion(model, t, x, N, weight="auto"):
    """Expansion of the law of ``X_t | X_0 = x`` to total order ``N``.

    ``weight`` is ``"auto"``, ``"moments"`` or a sequence with one weight
    (object or dict) per coordinate.
    """
    if not isinstance(model, CanonicalAffineModel):
        raise ConfigurationError("density expansions support canonical models only")
    if N < 0:
        raise ValueError("order N must be non-negative")
    x = np.asarray(x, dtype=float)
    if isinstance(weight, str):
        weights = auto_weights(model, t, x, weight)
    else:
        weights = tuple(weight_from_dict(w) if isinstance(w, dict) else w for w in weight)
    _check_weights(model, weights)

    shift = np.array([w.shift for w in weights])
    scale = np.array([w.scale for w in weights])
    basis, zmom = moments(model, t, x, N, shift=shift, scale=scale)
    index = {a: i for i, a in enumerate(basis)}
    coef = [w.family.coefficients(N) for w in weights]
    c = np.empty(len(basis))
    for r, alpha in enumerate(basis):
        total = 0.0
        for gamma in np.ndindex(*(a + 1 for a in alpha)):
            total += np.prod([coef[j][alpha[j], gamma[j]] for j in range(len(alpha))]) * zmom[index[gamma]]
        c[r] = total
    return DensityExpansion(N, weights, tuple(basis), c, float(t), tuple(x.tolist()))


def _basis_values(expansion, xi):
    """``(points, len(basis))`` array of ``p_alpha`` evaluated at ``xi``."""
    N = expansion.order
    per_axis = [w.family.evaluate((xi[:, j] - w.shift) / w.scale, N) for j, w in enumerate(expansion.weights)]
    vals = np.ones((xi.shape[0], len(expansion.basis)))
    for r, alpha in enumerate(expansion.basis):
        for j, a in enumerate(alpha):
            if a:
                vals[:, r] *= per_axis[j][:, a]
    return vals


def evaluate_expansion(expansion, xi):
    """Proxy density at ``xi`` (one point of length ``d`` or rows of points).

    Values may be negative; this is a truncation artefact and is returned
    unchanged. Points outside the weight support raise ``SupportError``.
    """
    d = expansion.d
    xi = np.asarray(xi, dtype=float)
    shape = xi.shape
    pts = xi.reshape(-1, 1) if d == 1 and (xi.ndim <= 1) else xi.reshape(-1, d)
    for j, w in enumerate(expansion.weights):
        if not np.all(w.in_support(pts[:, j])):
            raise SupportError(f"point outside the support of the {w.kind} weight on coordinate {j}")
    dens = np.ones(len(pts))
    for j, w in enumerate(expansion.weights):
        dens *= w.pdf(pts[:, j])
    out = dens * (_basis_values(expansion, pts) @ expansion.coefficients)
    if d == 1:
        return float(out[0]) if xi.ndim == 0 else out.reshape(shape)
    return float(out[0]) if xi.ndim == 1 else out.reshape(shape[:-1])


def gram_matrix(expansion):
    """Gram matrix of the basis under the weight, by Gauss quadrature exact to degree ``2N``."""
    n = expansion.order + 1
    nodes, wts = [], []
    for w in expansion.weights:
        z, q = w.quadrature(n)
        nodes.append(w.shift + w.scale * z)
        wts.append(q)
    grid = np.stack([g.ravel() for g in np.meshgrid(*nodes, indexing="ij")], axis=1)
    wq = np.ones(())
    for q in wts:
        wq = np.multiply.outer(wq, q)
    P = _basis_values(expansion, grid)
    return (P * wq.ravel()[:, None]).T @ P


__all__ = [
    "DensityExpansion", "GammaWeight", "GaussianWeight", "OrthonormalFamily", "auto_weights",
    "build_expansion", "evaluate_expansion", "gram_matrix", "multi_indices", "weight_from_dict",
]
