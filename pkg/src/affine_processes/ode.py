"""Batched Dormand-Prince 5(4) integrator with per-trajectory step control.

Each row of the state array advances with its own time and step size, so a
single call can integrate thousands of independent initial value problems
(for example one Riccati system per Fourier node) using vectorised numpy
arithmetic. Rows terminate independently with one of the statuses below.
"""

from dataclasses import dataclass, field

import numpy as np

RUNNING, COMPLETE, BLOWUP, STIFF = 0, 1, 2, 3

_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
# continuous extension of order 4 (Hairer, Norsett & Wanner, dopri5 contd5)
_D = np.array([-12715105075 / 11282082432, 0.0, 87487479700 / 32700410799, -10690763975 / 1880347072,
               701980252875 / 199316789632, -1453857185 / 822651844, 69997945 / 29380423])
_E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40])

# PI controller exponents (Gustafsson), order 5 error estimator
_ALPHA, _BETA = 0.7 / 5, 0.4 / 5
_SAFETY, _FAC_MIN, _FAC_MAX = 0.9, 0.2, 5.0


@dataclass
class BatchResult:
    t: np.ndarray            # final (or last accepted) time per row
    y: np.ndarray            # state at ``t``
    status: np.ndarray       # RUNNING/COMPLETE/BLOWUP/STIFF per row
    t_lo: np.ndarray         # blow-up bracket, nan unless BLOWUP
    y_lo: np.ndarray
    h: np.ndarray            # last proposed step size per row
    n_steps: np.ndarray
    n_rejected: np.ndarray
    history: list = field(default_factory=list)   # (t, y, f, dense) per accepted step, single-row runs only


def _initial_step(f, t0, y0, f0, T, rtol, atol):
    scale = atol + rtol * np.abs(y0)
    d0 = np.sqrt(np.mean((y0 / scale) ** 2, axis=1))
    d1 = np.sqrt(np.mean((f0 / scale) ** 2, axis=1))
    h0 = np.where((d0 < 1e-5) | (d1 < 1e-5), 1e-6, 0.01 * d0 / np.where(d1 > 0, d1, 1.0))
    h0 = np.minimum(h0, T)
    y1 = y0 + h0[:, None] * f0
    with np.errstate(all="ignore"):
        f1 = f(y1)
        d2 = np.sqrt(np.mean(((f1 - f0) / scale) ** 2, axis=1)) / h0
    dmax = np.maximum(d1, d2)
    dmax = np.where(np.isfinite(dmax), dmax, 1e300)
    h1 = np.where(dmax <= 1e-15, np.maximum(1e-6, h0 * 1e-3), (0.01 / np.maximum(dmax, 1e-300)) ** (1 / 5))
    return np.minimum(np.minimum(100 * h0, h1), T)


def integrate(f, y0, T, rtol, atol=None, blowup=None, singular=None, hmin=None,
              max_steps=200_000, record=False):
    """Integrate ``y' = f(y)`` row-wise from 0 to ``T``.

    Parameters
    ----------
    f : callable
        Maps an ``(k, D)`` array to an ``(k, D)`` array; non-finite output
        marks a point where the vector field is undefined and forces a
        step rejection.
    blowup : callable, optional
        ``blowup(y, rows) -> bool mask`` evaluated after each accepted step.
    singular : callable, optional
        ``singular(y, rows) -> bool mask`` consulted when the step size collapses;
        rows flagged here are classed as blow-up instead of stiff.
    hmin : float
        Step-size floor; defaults to ``1e-12 * T``.
    record : bool
        Keep the accepted-step history (only meaningful for one row).
    """
    y = np.array(y0, dtype=float, copy=True)
    if y.ndim != 2:
        raise ValueError("y0 must be 2-d (rows, coordinates)")
    n, dim = y.shape
    atol = rtol if atol is None else atol
    hmin = 1e-12 * T if hmin is None else hmin
    t = np.zeros(n)
    status = np.zeros(n, dtype=int)
    t_lo = np.full(n, np.nan)
    y_lo = np.full_like(y, np.nan)
    n_steps = np.zeros(n, dtype=int)
    n_rej = np.zeros(n, dtype=int)
    err_prev = np.ones(n)
    with np.errstate(all="ignore"):
        k1 = f(y)
    if not np.all(np.isfinite(k1)):
        raise ValueError("vector field is not finite at the initial data")
    h = _initial_step(f, t, y, k1, T, rtol, atol)
    history = [(0.0, y[0].copy(), k1[0].copy(), np.zeros(dim))] if record else []
    stages = np.empty((7, n, dim))

    while True:
        idx = np.flatnonzero(status == RUNNING)
        if idx.size == 0:
            break
        ti, yi, hi = t[idx], y[idx], h[idx]
        last = hi >= (T - ti) * (1 - 1e-14)
        hi = np.where(last, T - ti, hi)
        K = stages[:, : idx.size]
        K[0] = k1[idx]
        with np.errstate(all="ignore"):
            for s in range(1, 7):
                incr = sum(_A[s][j] * K[j] for j in range(s) if _A[s][j] != 0.0)
                K[s] = f(yi + hi[:, None] * incr)
            y_new = yi + hi[:, None] * sum(_A[6][j] * K[j] for j in range(6) if _A[6][j] != 0.0)
            err_vec = hi[:, None] * np.tensordot(_E, K, axes=(0, 0))
            scale = atol + rtol * np.maximum(np.abs(yi), np.abs(y_new))
            err = np.sqrt(np.mean((err_vec / scale) ** 2, axis=1))
        bad = ~np.isfinite(err) | ~np.all(np.isfinite(y_new), axis=1) | ~np.all(np.isfinite(K[6]), axis=1)
        err = np.where(bad, np.inf, err)
        accept = err <= 1.0

        # step-size update
        with np.errstate(divide="ignore", over="ignore"):
            e = np.maximum(err, 1e-10)
            fac_acc = _SAFETY * e ** (-_ALPHA) * err_prev[idx] ** _BETA
            fac_rej = np.where(np.isfinite(err), _SAFETY * e ** (-1 / 5), _FAC_MIN)
        fac = np.where(accept, np.clip(fac_acc, _FAC_MIN, _FAC_MAX), np.clip(fac_rej, _FAC_MIN, 1.0))
        h_next = hi * fac

        acc = idx[accept]
        if acc.size:
            t_old = t[acc].copy()
            y_old = y[acc].copy()
            t[acc] = np.where(last[accept], T, ti[accept] + hi[accept])
            y[acc] = y_new[accept]
            k1[acc] = K[6][accept]
            err_prev[acc] = np.maximum(err[accept], 1e-4)
            n_steps[acc] += 1
            if record:
                dense = hi[0] * np.tensordot(_D, K[:, 0], axes=(0, 0))
                history.append((float(t[0]), y[0].copy(), k1[0].copy(), dense))
            if blowup is not None:
                bu = blowup(y[acc], acc)
                if np.any(bu):
                    rows = acc[bu]
                    status[rows] = BLOWUP
                    t_lo[rows] = t_old[bu]
                    y_lo[rows] = y_old[bu]
            done = (t[acc] >= T) & (status[acc] == RUNNING)
            status[acc[done]] = COMPLETE
        rej = idx[~accept]
        n_rej[rej] += 1
        # keep the unclipped proposal when the last step was shortened to hit T
        h[idx] = np.where(accept & last, np.maximum(h_next, h[idx]), h_next)

        tiny = idx[(h[idx] < hmin) & (status[idx] == RUNNING)]
        too_many = idx[(n_steps[idx] + n_rej[idx] >= max_steps) & (status[idx] == RUNNING)]
        collapsed = np.union1d(tiny, too_many)
        if collapsed.size:
            if singular is not None:
                sing = singular(y[collapsed], collapsed)
            else:
                sing = np.zeros(collapsed.size, dtype=bool)
            status[collapsed[sing]] = BLOWUP
            t_lo[collapsed[sing]] = t[collapsed[sing]]
            y_lo[collapsed[sing]] = y[collapsed[sing]]
            status[collapsed[~sing]] = STIFF
    return BatchResult(t, y, status, t_lo, y_lo, h, n_steps, n_rej, history)


def interpolate(t0, y0, f0, t1, y1, f1, dense, t):
    """Dense output on ``[t0, t1]``: cubic Hermite plus the order-4 correction ``dense``.

    With ``dense = 0`` this is plain cubic Hermite interpolation.
    """
    h = np.asarray(t1 - t0)[..., None]
    s = np.asarray((t - t0) / (t1 - t0))[..., None]
    ydiff = y1 - y0
    bspl = h * f0 - ydiff
    r4 = ydiff - h * f1 - bspl
    return y0 + s * (ydiff + (1 - s) * (bspl + s * (r4 + (1 - s) * dense)))
