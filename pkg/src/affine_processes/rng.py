"""Counter-based random numbers.

Every variate is a pure function of ``(seed, path, step, lane)``, so path
``i`` is identical whether it is simulated alone, in a batch, or in a
different thread. The mixing function is the splitmix64 finaliser applied
in a chain over the four keys.
"""

import numpy as np
from scipy.special import ndtri

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_TWO_M53 = 2.0 ** -53


def _mix(z):
    z = z ^ (z >> np.uint64(30))
    z = z * _M1
    z = z ^ (z >> np.uint64(27))
    z = z * _M2
    return z ^ (z >> np.uint64(31))


def hash64(seed, path, step, lane):
    """64-bit hash of the four counters (broadcasting numpy arrays)."""
    with np.errstate(over="ignore"):
        h = _mix(np.uint64(seed) + _GOLDEN)
        for key in (path, step, lane):
            h = _mix(h ^ (np.asarray(key).astype(np.uint64) + _GOLDEN))
    return h


def uniforms(seed, path, step, lane):
    """Uniforms on the open interval ``(0, 1)``."""
    h = hash64(seed, path, step, lane)
    return ((h >> np.uint64(11)).astype(np.float64) + 0.5) * _TWO_M53


def normals(seed, path, step, lane):
    """Standard normals by inversion of :func:`uniforms`."""
    return ndtri(uniforms(seed, path, step, lane))


class PathStream:
    """Random numbers for a block of paths at a fixed seed.

    ``paths`` holds global path indices; lanes are arbitrary non-negative
    integers chosen by the caller so that distinct uses never collide.
    """

    def __init__(self, seed, paths):
        seed = int(seed)
        if not 0 <= seed < 2 ** 64:
            raise ValueError("seed must be a non-negative 64-bit integer")
        self.seed = seed
        self.paths = np.asarray(paths, dtype=np.uint64)

    def uniform(self, step, lanes, rows=None):
        p = self.paths if rows is None else self.paths[rows]
        lanes = np.asarray(lanes, dtype=np.uint64)
        return uniforms(self.seed, p[:, None], step, lanes[None, :])

    def normal(self, step, lanes, rows=None):
        return ndtri(self.uniform(step, lanes, rows))
