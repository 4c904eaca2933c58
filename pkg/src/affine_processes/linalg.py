"""Small dense linear-algebra helpers used across modules."""

import numpy as np
from scipy.linalg import expm

PSD_TOL = 1e-12


def psd_tolerance(matrix, tol=PSD_TOL):
    """Scale-aware eigenvalue tolerance ``tol * (1 + ||matrix||_2)``."""
    matrix = np.asarray(matrix, dtype=float)
    if matrix.size == 0:
        return tol
    return tol * (1.0 + np.linalg.norm(matrix, 2))


def min_eigenvalue(matrix):
    matrix = np.asarray(matrix, dtype=float)
    if matrix.size == 0:
        return 0.0
    return float(np.linalg.eigvalsh(0.5 * (matrix + matrix.T))[0])


def is_psd(matrix, tol=PSD_TOL):
    matrix = np.asarray(matrix, dtype=float)
    if matrix.size == 0:
        return True
    return min_eigenvalue(matrix) >= -psd_tolerance(matrix, tol)


def is_symmetric(matrix, tol=1e-12):
    matrix = np.asarray(matrix, dtype=float)
    return np.allclose(matrix, matrix.T, rtol=0.0, atol=tol * (1.0 + np.abs(matrix).max(initial=0.0)))


def psd_sqrt(matrix):
    """Symmetric square root, negative eigenvalues clipped to zero."""
    w, v = np.linalg.eigh(0.5 * (matrix + np.swapaxes(matrix, -1, -2)))
    w = np.sqrt(np.clip(w, 0.0, None))
    return (v * w[..., None, :]) @ np.swapaxes(v, -1, -2)


def psd_factor(matrix):
    """Return ``L`` with ``L @ L.T == matrix`` for a psd (possibly singular) matrix."""
    w, v = np.linalg.eigh(0.5 * (matrix + matrix.T))
    return v * np.sqrt(np.clip(w, 0.0, None))


def psd_rank(omega, tol=1e-12):
    """Number of eigenvalues above ``tol * max(1, lambda_max)``.

    >>> psd_rank(np.diag([1.0, 1e-18]))
    1
    """
    omega = np.asarray(omega, dtype=float)
    if omega.size == 0:
        return 0
    w = np.linalg.eigvalsh(0.5 * (omega + omega.T))
    return int(np.sum(w > tol * max(1.0, w[-1])))


def van_loan_integral(a, q, t):
    """Compute ``int_0^t exp(s a) q exp(s a^T) ds`` with one block exponential.

    Uses ``expm([[-a, q], [0, a^T]] t) = [[., F12], [0, F22]]`` and
    returns ``F22^T F12``.
    """
    a = np.asarray(a, dtype=float)
    q = np.asarray(q, dtype=float)
    d = a.shape[0]
    block = np.zeros((2 * d, 2 * d))
    block[:d, :d] = -a
    block[:d, d:] = q
    block[d:, d:] = a.T
    f = expm(block * t)
    out = f[d:, d:].T @ f[:d, d:]
    return 0.5 * (out + out.T)
