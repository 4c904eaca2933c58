"""Affine model parameter sets and their admissibility checks.

Two state spaces are supported: the canonical space ``R_+^m x R^n`` and the
cone ``S_d^+`` of positive semidefinite matrices. Models are immutable; the
validation functions are pure and return an :class:`AdmissibilityReport`
listing every constraint with its outcome.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import StructureError
from .jumps import GaussianRankOneJump, PointJump, RankOneJump, RayJump
from .linalg import is_psd, is_symmetric, min_eigenvalue, psd_tolerance


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str = ""
    informational: bool = False

    def to_dict(self):
        out = {"name": self.name, "passed": bool(self.passed), "detail": self.detail}
        if self.informational:
            out["informational"] = True
        return out


@dataclass(frozen=True)
class AdmissibilityReport:
    checks: tuple

    @property
    def ok(self):
        return all(c.passed for c in self.checks if not c.informational)

    def __bool__(self):
        return self.ok

    def failures(self):
        return [c for c in self.checks if not c.passed and not c.informational]

    def get(self, name):
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self):
        return {"ok": self.ok, "checks": [c.to_dict() for c in self.checks]}


def _as_matrix(value, shape, name):
    arr = np.asarray(value, dtype=float)
    if arr.shape != shape:
        raise StructureError(f"{name} has shape {arr.shape}, expected {shape}")
    return arr


@dataclass(frozen=True, eq=False)
class CanonicalAffineModel:
    """Affine jump-diffusion on ``R_+^m x R^n`` (positive coordinates first).

    The generator acts on ``f`` as
    ``1/2 tr((a + sum_i x_i alpha[i]) D^2 f) + <b + beta x, grad f>
    + (lam_0 + sum_i lam_i x_i) E[f(x + xi) - f(x)]``,
    hence ``R(u)`` carries ``beta^T u``.
    """

    m: int
    n: int
    a: np.ndarray
    alpha: tuple
    b: np.ndarray
    beta: np.ndarray
    jump0: object = None
    jumps: tuple = ()
    x0: np.ndarray = None

    def __post_init__(self):
        m, n = int(self.m), int(self.n)
        if m < 0 or n < 0 or m + n == 0:
            raise StructureError("need m, n >= 0 and m + n >= 1")
        d = m + n
        object.__setattr__(self, "a", _as_matrix(self.a, (d, d), "a"))
        alpha = tuple(_as_matrix(al, (d, d), f"alpha[{i}]") for i, al in enumerate(self.alpha))
        if len(alpha) != m:
            raise StructureError(f"expected {m} alpha matrices, got {len(alpha)}")
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "b", _as_matrix(self.b, (d,), "b"))
        object.__setattr__(self, "beta", _as_matrix(self.beta, (d, d), "beta"))
        jumps = tuple(self.jumps) if self.jumps else (None,) * m
        if len(jumps) != m:
            raise StructureError(f"expected {m} state-dependent jump laws, got {len(jumps)}")
        object.__setattr__(self, "jumps", jumps)
        for label, j in self._labelled_jumps():
            if not isinstance(j, (PointJump, RayJump)):
                raise StructureError(f"{label}: {type(j).__name__} is not a canonical jump law")
            if j.flat.size != d:
                raise StructureError(f"{label}: jump dimension {j.flat.size} != {d}")
        if self.x0 is not None:
            object.__setattr__(self, "x0", _as_matrix(self.x0, (d,), "x0"))

    @property
    def d(self):
        return self.m + self.n

    @property
    def space(self):
        return "canonical"

    @property
    def dim(self):
        return self.d

    def _labelled_jumps(self):
        out = []
        if self.jump0 is not None:
            out.append(("jump0", self.jump0))
        out += [(f"jump[{i}]", j) for i, j in enumerate(self.jumps) if j is not None]
        return out

    def without_jumps(self):
        return CanonicalAffineModel(self.m, self.n, self.a, self.alpha, self.b, self.beta, None, (), self.x0)

    def has_jumps(self):
        return any(j.rate > 0 for _, j in self._labelled_jumps())

    def in_state_space(self, x, tol=0.0):
        x = np.asarray(x, dtype=float)
        return x.shape == (self.d,) and bool(np.all(x[: self.m] >= -tol)) and bool(np.all(np.isfinite(x)))

    def parameter_scale(self):
        parts = [np.abs(self.a).max(), np.abs(self.b).max(), np.abs(self.beta).max()]
        parts += [np.abs(al).max() for al in self.alpha]
        parts += [j.rate for _, j in self._labelled_jumps()]
        return float(max(parts))

    def to_dict(self):
        out = {
            "space": "canonical", "m": self.m, "n": self.n,
            "a": self.a.tolist(), "alpha": [al.tolist() for al in self.alpha],
            "b": self.b.tolist(), "beta": self.beta.tolist(),
            "jump0": None if self.jump0 is None else self.jump0.to_dict(),
            "jumps": [None if j is None else j.to_dict() for j in self.jumps],
        }
        if self.x0 is not None:
            out["x0"] = self.x0.tolist()
        return out

    def __eq__(self, other):
        if not isinstance(other, CanonicalAffineModel):
            return NotImplemented
        return _dict_equal(self, other)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class WishartModel:
    """Affine process on ``S_d^+`` solving
    ``dX = (b + beta X + X beta^T) dt + sqrt(X) dW Q + Q^T dW^T sqrt(X) + dL``
    with a compound-Poisson matrix subordinator ``L``.
    """

    d: int
    b: np.ndarray
    beta: np.ndarray
    Q: np.ndarray
    jump: object = None
    x0: np.ndarray = None
    alpha: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        d = int(self.d)
        if d < 1:
            raise StructureError("matrix dimension must be >= 1")
        b = _as_matrix(self.b, (d, d), "b")
        if not is_symmetric(b):
            raise StructureError("constant drift b must be symmetric")
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "beta", _as_matrix(self.beta, (d, d), "beta"))
        q = _as_matrix(self.Q, (d, d), "Q")
        object.__setattr__(self, "Q", q)
        object.__setattr__(self, "alpha", q.T @ q)
        if self.jump is not None:
            if not isinstance(self.jump, (PointJump, RankOneJump, GaussianRankOneJump)):
                raise StructureError(f"{type(self.jump).__name__} is not a matrix jump law")
            if self.jump.mean().size != d * d:
                raise StructureError("jump dimension does not match d")
        if self.x0 is not None:
            object.__setattr__(self, "x0", _as_matrix(self.x0, (d, d), "x0"))

    @property
    def space(self):
        return "psd"

    @property
    def dim(self):
        return self.d * self.d

    @property
    def strong_capable(self):
        return is_psd(self.b - (self.d + 1) * self.alpha)

    def has_jumps(self):
        return self.jump is not None and self.jump.rate > 0

    def without_jumps(self):
        return WishartModel(self.d, self.b, self.beta, self.Q, None, self.x0)

    def in_state_space(self, x, tol=1e-10):
        x = np.asarray(x, dtype=float)
        if x.shape != (self.d, self.d) or not is_symmetric(x):
            return False
        return min_eigenvalue(x) >= -tol * (1.0 + np.abs(x).max())

    def parameter_scale(self):
        parts = [np.abs(self.b).max(), np.abs(self.beta).max(), np.abs(self.alpha).max()]
        if self.jump is not None:
            parts.append(self.jump.rate)
        return float(max(parts))

    def to_dict(self):
        out = {
            "space": "psd", "d": self.d, "b": self.b.tolist(), "beta": self.beta.tolist(),
            "Q": self.Q.tolist(), "jump": None if self.jump is None else self.jump.to_dict(),
        }
        if self.x0 is not None:
            out["x0"] = self.x0.tolist()
        return out

    def __eq__(self, other):
        if not isinstance(other, WishartModel):
            return NotImplemented
        return _dict_equal(self, other)

    __hash__ = None


def _dict_equal(m1, m2):
    return m1.to_dict() == m2.to_dict()


def _idx(k):
    return k + 1


def validate_canonical(model):
    """Check the admissibility constraints of a canonical model.

    Dimension mismatches raise at construction time (``StructureError``);
    everything else is reported.
    """
    m, d = model.m, model.d
    pos, real = np.arange(m), np.arange(m, d)
    checks = []

    def psd_check(name, mat):
        lam = min_eigenvalue(mat)
        ok = lam >= -psd_tolerance(mat)
        checks.append(Check(name, ok, "" if ok else f"min eigenvalue {lam:.3e}"))

    sym_a = is_symmetric(model.a)
    checks.append(Check("a symmetric", sym_a))
    psd_check("a psd", model.a)
    bad = [(j + 1, k + 1) for j in pos for k in range(d) if model.a[j, k] != 0 or model.a[k, j] != 0]
    checks.append(Check("a vanishes on positive coordinates", not bad,
                        "" if not bad else f"nonzero entry a[{bad[0][0]},{bad[0][1]}]"))

    for i, al in enumerate(model.alpha):
        checks.append(Check(f"alpha[{_idx(i)}] symmetric", is_symmetric(al)))
        psd_check(f"alpha[{_idx(i)}] psd", al)
        allowed = np.zeros((d, d), dtype=bool)
        allowed[i, i] = True
        allowed[i, real] = allowed[real, i] = True
        allowed[np.ix_(real, real)] = True
        off = np.argwhere((al != 0) & ~allowed)
        detail = "" if off.size == 0 else f"nonzero entry alpha[{_idx(i)}][{off[0][0] + 1},{off[0][1] + 1}]"
        checks.append(Check(f"alpha[{_idx(i)}] sparsity", off.size == 0, detail))

    neg = [k for k in pos if model.b[k] < 0]
    checks.append(Check("b in D", not neg, "" if not neg else f"b_{neg[0] + 1} = {model.b[neg[0]]:g} < 0"))

    for k in pos:
        for i in pos:
            if k != i:
                v = model.beta[k, i]
                checks.append(Check(f"beta_{{{k + 1}{i + 1}}} >= 0", v >= 0, "" if v >= 0 else f"value {v:g}"))
        for i in real:
            v = model.beta[k, i]
            checks.append(Check(f"beta_{{{k + 1}{i + 1}}} = 0", v == 0, "" if v == 0 else f"value {v:g}"))

    for label, j in model._labelled_jumps():
        checks.append(Check(f"{label} rate >= 0", j.rate >= 0, "" if j.rate >= 0 else f"rate {j.rate:g}"))
        vec = j.flat
        ok = bool(np.all(vec[:m] >= 0))
        checks.append(Check(f"{label} support keeps D invariant", ok,
                            "" if ok else "negative jump in a positive coordinate"))
        if isinstance(j, RayJump):
            ok = j.scale > 0 and j.shape > 0
            checks.append(Check(f"{label} exponential moment", ok, "" if ok else "shape and scale must be > 0"))
    return AdmissibilityReport(tuple(checks))


def validate_wishart(model):
    """Drift condition ``b - (d-1) alpha >= 0`` plus jump finite variation.

    The strong-solution condition ``b - (d+1) alpha >= 0`` is reported for
    information and does not enter the verdict.
    """
    d, alpha = model.d, model.alpha
    checks = []
    weak = model.b - (d - 1) * alpha
    lam = min_eigenvalue(weak)
    ok = lam >= -psd_tolerance(weak)
    checks.append(Check("b - (d-1) alpha psd", ok, "" if ok else f"min eigenvalue {lam:.3e}"))
    strong = model.b - (d + 1) * alpha
    lam_s = min_eigenvalue(strong)
    checks.append(Check("b - (d+1) alpha psd (strong solutions)", lam_s >= -psd_tolerance(strong),
                        f"min eigenvalue {lam_s:.3e}", informational=True))
    j = model.jump
    if j is not None:
        checks.append(Check("jump rate >= 0", j.rate >= 0))
        mean = j.mean().reshape(d, d)
        if isinstance(j, PointJump):
            supp = is_symmetric(mean) and is_psd(mean)
        elif isinstance(j, RankOneJump):
            supp = j.mean_weight > 0
        else:
            supp = j.mean_weight > 0 and is_psd(j.cov)
        fin = bool(np.all(np.isfinite(mean)))
        checks.append(Check("jump support in S_d^+", supp))
        checks.append(Check("jump finite variation (finite mean)", fin))
    return AdmissibilityReport(tuple(checks))


def validate(model):
    if isinstance(model, WishartModel):
        return validate_wishart(model)
    return validate_canonical(model)


def infinitely_decomposable(model):
    """True iff ``alpha = Q^T Q`` vanishes or ``d = 1``."""
    if model.d == 1:
        return True
    return bool(np.all(np.abs(model.alpha) <= psd_tolerance(model.alpha)))


def cir(b, beta, sigma, jump0=None, x0=None):
    """Square-root (CIR) model ``dX = (b + beta X) dt + sigma sqrt(X) dB``."""
    return CanonicalAffineModel(1, 0, [[0.0]], ([[sigma ** 2]],), [b], [[beta]], jump0, (),
                                None if x0 is None else [x0])


def gaussian_ou(a, b, beta, x0=None):
    """Scalar Ornstein-Uhlenbeck model ``dX = (b + beta X) dt + sqrt(a) dB``."""
    return CanonicalAffineModel(0, 1, [[a]], (), [b], [[beta]], None, (), None if x0 is None else [x0])


def heston(kappa, theta, sigma, rho, r=0.0, x0=None):
    """Heston model in coordinates ``(variance, log-price)``."""
    alpha = [[sigma ** 2, rho * sigma], [rho * sigma, 1.0]]
    return CanonicalAffineModel(1, 1, np.zeros((2, 2)), (alpha,), [kappa * theta, r],
                                [[-kappa, 0.0], [-0.5, 0.0]], None, (), x0)
