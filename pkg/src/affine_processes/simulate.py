"""Monte Carlo paths for canonical and Wishart affine models.

Canonical models use an Euler scheme with full truncation: the internal
state may dip below zero in a positive coordinate, drift and diffusion see
``x+``, and reported snapshots are projected onto the state space. Wishart
models use Euler-Maruyama with symmetrisation and spectral clipping after
every step. Jumps are drawn per step from a Poisson count whose intensity is
frozen at the left endpoint.

All randomness comes from :mod:`.rng`, keyed by ``(seed, path, step, lane)``,
so results do not depend on how paths are split across worker threads.
"""

import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaincinv
from scipy.stats import poisson

from .errors import AdmissibilityError, DomainError
from .linalg import psd_factor
from .models import CanonicalAffineModel, WishartModel, validate
from .rng import PathStream

CHUNK = 2048
_COUNT_LANE = 1 << 20
_MARK_LANE = 1 << 32


class SaturationWarning(RuntimeWarning):
    """Some sample exponents exceed the floating-point range of ``exp``."""


def thread_count():
    """Worker threads from ``AFFINE_THREADS`` (default: all cores)."""
    raw = os.environ.get("AFFINE_THREADS")
    if raw:
        try:
            n = int(raw)
        except ValueError:
            raise ValueError(f"AFFINE_THREADS must be an integer, got {raw!r}") from None
        return max(1, n)
    return os.cpu_count() or 1


@dataclass
class PathEnsemble:
    """Simulated paths.

    ``states`` has shape ``(npaths, len(times), d)`` for canonical models and
    ``(npaths, len(times), d, d)`` for Wishart models. With ``store="terminal"``
    only the initial and terminal snapshots are kept. ``path_min`` holds the
    running minimum over all steps of each positive coordinate (canonical)
    or of the smallest eigenvalue (Wishart).
    """

    kind: str
    scheme: str
    seed: int
    T: float
    nsteps: int
    times: np.ndarray
    states: np.ndarray
    path_min: np.ndarray
    jump_counts: np.ndarray
    x0: np.ndarray
    path_ids: np.ndarray = field(default=None)

    @property
    def npaths(self):
        return self.states.shape[0]

    @property
    def terminal(self):
        return self.states[:, -1]

    def seed_record(self):
        """Per-path stream keys ``(seed, path)``."""
        return [(self.seed, int(i)) for i in self.path_ids]


def _noise_factors(model):
    """Factors ``L`` of ``a`` and each ``alpha_i`` (``L L^T`` equals the matrix)."""
    return psd_factor(model.a), [psd_factor(al) for al in model.alpha]


def _jump_sources(model):
    sources = []
    if model.jump0 is not None and model.jump0.rate > 0:
        sources.append((None, model.jump0))
    for i, law in enumerate(model.jumps):
        if law is not None and law.rate > 0:
            sources.append((i, law))
    return sources


def _add_jumps(stream, k, intensity, law, src, x, counts):
    """Add a Poisson number of jumps from ``law`` to each row of ``x``."""
    u = stream.uniform(k, [_COUNT_LANE + src])[:, 0]
    n = np.zeros(len(x), dtype=np.int64)
    live = intensity > 0
    if np.any(live):
        n[live] = poisson.ppf(u[live], intensity[live]).astype(np.int64)
    counts += n
    nu = law.n_uniforms
    for r in range(int(n.max(initial=0))):
        rows = np.flatnonzero(n > r)
        lanes = _MARK_LANE * (src + 1) + r * max(nu, 1) + np.arange(max(nu, 1))
        marks = law.sample(stream.uniform(k, lanes, rows))
        x[rows] += marks


def _canonical_chunk(model, x0, T, nsteps, paths, seed, store):
    d, m = model.d, model.m
    h = T / nsteps
    sqh = np.sqrt(h)
    stream = PathStream(seed, paths)
    n = len(paths)
    La, Ls = _noise_factors(model)
    sources = _jump_sources(model)
    x = np.tile(x0, (n, 1))
    keep = [x.copy()]
    path_min = np.tile(x0[:m], (n, 1))
    counts = np.zeros(n, dtype=np.int64)
    lanes = np.arange(d * (1 + m))
    for k in range(nsteps):
        xp = x.copy()
        xp[:, :m] = np.maximum(xp[:, :m], 0.0)
        z = stream.normal(k, lanes)
        dx = (model.b + xp @ model.beta.T) * h + (z[:, :d] @ La.T) * sqh
        for i in range(m):
            dx += np.sqrt(xp[:, i])[:, None] * (z[:, d * (i + 1): d * (i + 2)] @ Ls[i].T) * sqh
        x = x + dx
        for src, (i, law) in enumerate(sources):
            lam = np.full(n, law.rate * h) if i is None else law.rate * xp[:, i] * h
            _add_jumps(stream, k, lam, law, src, x, counts)
        snap = x.copy()
        snap[:, :m] = np.maximum(snap[:, :m], 0.0)
        path_min = np.minimum(path_min, snap[:, :m])
        if store == "all" or k == nsteps - 1:
            keep.append(snap)
    return np.stack(keep, axis=1), path_min, counts


def _sym(x):
    return 0.5 * (x + np.swapaxes(x, -1, -2))


def _wishart_chunk(model, x0, T, nsteps, paths, seed, store, scheme="euler"):
    d = model.d
    h = T / nsteps
    sqh = np.sqrt(h)
    stream = PathStream(seed, paths)
    n = len(paths)
    x = np.tile(x0, (n, 1, 1))
    w, v = np.linalg.eigh(x)
    keep = [x.copy()]
    path_min = w[:, 0].copy()
    counts = np.zeros(n, dtype=np.int64)
    jump = model.jump if model.has_jumps() else None
    lanes = np.arange(d * d)
    for k in range(nsteps):
        root = (v * np.sqrt(np.clip(w, 0.0, None))[:, None, :]) @ np.swapaxes(v, -1, -2)
        dW = stream.normal(k, lanes).reshape(n, d, d) * sqh
        drift = (model.beta @ x + x @ model.beta.T) * h
        if scheme == "milstein":
            # (Y + Z)^T (Y + Z) with Y = sqrt(X), Z = dW Q carries the same volatility
            # as the Euler step plus Z^T Z, whose mean d h alpha is taken out of b
            y = root + dW @ model.Q
            x = np.swapaxes(y, -1, -2) @ y + (model.b - d * model.alpha) * h + drift
        else:
            vol = root @ dW @ model.Q
            x = x + model.b * h + drift + vol + np.swapaxes(vol, -1, -2)
        if jump is not None:
            flat = x.reshape(n, d * d)
            _add_jumps(stream, k, np.full(n, jump.rate * h), jump, 0, flat, counts)
            x = flat.reshape(n, d, d)
        w, v = np.linalg.eigh(_sym(x))
        w = np.clip(w, 0.0, None)
        x = _sym((v * w[:, None, :]) @ np.swapaxes(v, -1, -2))
        path_min = np.minimum(path_min, w[:, 0])
        if store == "all" or k == nsteps - 1:
            keep.append(x.copy())
    return np.stack(keep, axis=1), path_min, counts


def _run(chunk_fn, model, x0, T, nsteps, npaths, seed, store, chunk, **options):
    if nsteps < 1:
        raise ValueError("nsteps must be >= 1")
    if npaths < 1:
        raise ValueError("npaths must be >= 1")
    if not T > 0:
        raise ValueError("horizon T must be positive")
    if store not in ("all", "terminal"):
        raise ValueError("store must be 'all' or 'terminal'")
    blocks = [np.arange(s, min(s + chunk, npaths)) for s in range(0, npaths, chunk)]
    threads = min(thread_count(), len(blocks))
    job = lambda paths: chunk_fn(model, x0, T, nsteps, paths, seed, store, **options)
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            parts = list(pool.map(job, blocks))
    else:
        parts = [job(b) for b in blocks]
    states = np.concatenate([p[0] for p in parts])
    path_min = np.concatenate([p[1] for p in parts])
    counts = np.concatenate([p[2] for p in parts])
    times = np.linspace(0.0, T, nsteps + 1) if store == "all" else np.array([0.0, T])
    return states, path_min, counts, times


def _require_admissible(model):
    report = validate(model)
    if not report.ok:
        raise AdmissibilityError("model is not admissible: " + "; ".join(c.name for c in report.failures()),
                                 report)


def simulate_canonical(model, x0, T, nsteps, npaths, seed, store="all", chunk=CHUNK):
    """Full-truncation Euler paths of a canonical affine model."""
    if not isinstance(model, CanonicalAffineModel):
        raise TypeError("simulate_canonical needs a canonical model")
    x0 = np.asarray(model.x0 if x0 is None else x0, dtype=float).ravel()
    if x0.shape != (model.d,) or not model.in_state_space(x0):
        raise DomainError(f"initial state {x0.tolist()} is outside the state space")
    _require_admissible(model)
    states, pmin, counts, times = _run(_canonical_chunk, model, x0, T, nsteps, npaths, seed, store, chunk)
    return PathEnsemble("canonical", "euler-full-truncation", int(seed), float(T), int(nsteps), times,
                        states, pmin, counts, x0, np.arange(npaths))


WISHART_SCHEMES = {"euler": "euler-spectral-clipping", "milstein": "milstein-spectral-clipping"}


def simulate_wishart(model, x0, T, nsteps, npaths, seed, store="all", chunk=CHUNK, scheme="euler"):
    """Paths of a Wishart model with spectral clipping after every step.

    ``scheme="euler"`` is plain Euler-Maruyama. ``scheme="milstein"`` writes
    the step as ``(Y + Z)^T (Y + Z) + (b - d alpha) h + drift`` with
    ``Y = sqrt(X)`` and ``Z = dW Q``; it reduces to the Milstein scheme when
    ``d = 1`` and needs no clipping when ``b - d alpha`` is positive
    semidefinite. Euler's weak error is of order ``h^(1/2)`` for drifts near
    the boundary of the admissible set, where paths touch singular matrices.
    """
    if scheme not in WISHART_SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}; expected one of {sorted(WISHART_SCHEMES)}")
    if not isinstance(model, WishartModel):
        raise TypeError("simulate_wishart needs a Wishart model")
    x0 = np.asarray(model.x0 if x0 is None else x0, dtype=float)
    if not model.in_state_space(x0):
        raise DomainError("initial state is not a symmetric positive semidefinite matrix")
    _require_admissible(model)
    states, pmin, counts, times = _run(_wishart_chunk, model, _sym(x0), T, nsteps, npaths, seed, store, chunk,
                                       scheme=scheme)
    return PathEnsemble("psd", WISHART_SCHEMES[scheme], int(seed), float(T), int(nsteps), times,
                        states, pmin, counts, x0, np.arange(npaths))


def simulate_cir_exact(b, beta, sigma, x0, t, npaths, seed):
    """Exact draws of ``X_t`` for ``dX = (b + beta X) dt + sigma sqrt(X) dW``.

    The law is ``c`` times a noncentral chi-squared variable with ``4b/sigma^2``
    degrees of freedom, sampled as a Poisson mixture of gamma variables.
    """
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    if b < 0 or x0 < 0:
        raise ValueError("b and x0 must be non-negative")
    if beta == 0:
        c = sigma ** 2 * t / 4
        decay = 1.0
    else:
        c = sigma ** 2 * np.expm1(beta * t) / (4 * beta)
        decay = np.exp(beta * t)
    df = 4 * b / sigma ** 2
    half_nc = x0 * decay / (2 * c)
    stream = PathStream(seed, np.arange(npaths))
    u = stream.uniform(0, [0, 1])
    n = poisson.ppf(u[:, 0], half_nc) if half_nc > 0 else np.zeros(npaths)
    shape = df / 2 + n
    g = np.zeros(npaths)
    pos = shape > 0
    g[pos] = gammaincinv(shape[pos], u[pos, 1])
    return 2 * c * g


def boundary_report(ensemble, tol=None, quantiles=(0.0, 0.01, 0.05, 0.5)):
    """Per-path minimum eigenvalue over time and the fraction of paths that touch zero.

    A path hits when its minimum eigenvalue drops below ``tol``, by default
    ``1e-8 * ||x0||_2``.
    """
    if ensemble.kind != "psd":
        raise ValueError("boundary_report needs a matrix-valued ensemble")
    if tol is None:
        tol = 1e-8 * np.linalg.norm(ensemble.x0, 2)
    mins = ensemble.path_min
    return {
        "tol": float(tol),
        "min_eig_quantiles": {str(q): float(np.quantile(mins, q)) for q in quantiles},
        "fraction_hitting": float(np.mean(mins < tol)) if tol > 0 else float(np.mean(mins <= 0)),
    }


def empirical_mgf(ensemble, u):
    """Sample mean of ``exp(<u, X_T>)`` and its standard error.

    For matrix ensembles the pairing is ``tr(u X_T)``.
    """
    u = np.asarray(u, dtype=float)
    xt = ensemble.terminal
    if ensemble.kind == "psd":
        if u.shape != xt.shape[1:]:
            raise ValueError(f"u must have shape {xt.shape[1:]}")
        expo = np.einsum("ij,nji->n", u, xt)
    else:
        u = u.ravel()
        if u.shape != (xt.shape[1],):
            raise ValueError(f"u must have {xt.shape[1]} entries")
        expo = xt @ u
    over = int(np.sum(expo > 700))
    if over:
        warnings.warn(f"exponent exceeds 700 on {over} of {len(expo)} paths", SaturationWarning, stacklevel=2)
    with np.errstate(over="ignore", invalid="ignore"):
        vals = np.exp(expo)
        est = float(vals.mean())
        se = float(vals.std(ddof=1) / np.sqrt(len(vals))) if len(vals) > 1 else 0.0
    return est, se


def summary(ensemble, u=None):
    """Terminal moments, optional empirical MGF, and (matrix case) boundary report."""
    xt = ensemble.terminal.reshape(ensemble.npaths, -1)
    out = {
        "kind": ensemble.kind, "scheme": ensemble.scheme, "seed": ensemble.seed, "T": ensemble.T,
        "nsteps": ensemble.nsteps, "npaths": ensemble.npaths,
        "mean": xt.mean(axis=0).tolist(),
        "var": xt.var(axis=0, ddof=1).tolist() if ensemble.npaths > 1 else [0.0] * xt.shape[1],
        "mean_jump_count": float(ensemble.jump_counts.mean()),
    }
    if u is not None:
        est, se = empirical_mgf(ensemble, u)
        out["mgf"] = {"estimate": est, "standard_error": se}
    if ensemble.kind == "psd":
        out["boundary"] = boundary_report(ensemble)
    return out


__all__ = [
    "PathEnsemble", "SaturationWarning", "boundary_report", "empirical_mgf", "simulate_canonical",
    "simulate_cir_exact", "simulate_wishart", "summary", "thread_count",
]
