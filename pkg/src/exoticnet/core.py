"""Dense float64 matrix arithmetic, seeded RNG, and activations.

Matrices are plain C-contiguous float64 2-D numpy arrays (row-major, so
``shape`` and the flat buffer are the rows/cols/values triple).  All
public operations return finite values or raise.

Reproducibility contract
------------------------
:class:`Prng` is a counter-based splitmix64 generator.  Draw ``i``
(0-indexed) is computed from the seed alone, so any language can replay
the stream::

    state_i  = (seed + (i + 1) * 0x9E3779B97F4A7C15)  mod 2^64
    z = state_i
    z = (z XOR (z >> 30)) * 0xBF58476D1CE4E5B9        mod 2^64
    z = (z XOR (z >> 27)) * 0x94D049BB133111EB        mod 2^64
    output_i = z XOR (z >> 31)

Uniform doubles take the top 53 bits: ``(output >> 11) * 2^-53``.
Normal deviates use the trigonometric Box-Muller transform on
consecutive output pairs (a, b)::

    u1 = ((a >> 11) + 1) * 2^-53      # (0, 1], safe for log
    u2 = (b >> 11) * 2^-53            # [0, 1)
    z0 = sqrt(-2 ln u1) * cos(2 pi u2)
    z1 = sqrt(-2 ln u1) * sin(2 pi u2)

A request for n normals always consumes 2*ceil(n/2) outputs; a trailing
odd deviate discards its sin() partner rather than caching it.
"""

from __future__ import annotations

import math

import numpy as np

from . import kernels
from .errors import ShapeError

_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3


def _mix64(z: int) -> int:
    z &= _MASK64
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
    return z ^ (z >> 31)


def _fnv1a64(text: str) -> int:
    h = _FNV_OFFSET
    for byte in text.encode("utf-8"):
        h = ((h ^ byte) * _FNV_PRIME) & _MASK64
    return h


class Prng:
    """Deterministic splitmix64 stream; single-owner, never share across
    threads without external coordination."""

    def __init__(self, seed: int):
        self.seed = seed & _MASK64
        self.counter = 0

    def child(self, label: str) -> "Prng":
        """Independent stream derived from (seed, label); used so pipeline
        stages (init, split, shuffle, ...) are individually replayable."""
        return Prng(_mix64(self.seed ^ _fnv1a64(label)))

    def next_u64(self) -> int:
        self.counter += 1
        return _mix64((self.seed + self.counter * _GAMMA) & _MASK64)

    def u64(self, count: int) -> np.ndarray:
        out = kernels.splitmix64_kernel(self.seed, self.counter, count)
        self.counter += count
        return out

    def uniform(self, count: int) -> np.ndarray:
        """count doubles in [0, 1)."""
        return (self.u64(count) >> np.uint64(11)).astype(np.float64) * 2.0**-53

    def next_below(self, bound: int) -> int:
        """Integer in [0, bound) via modulo; bias is < 2^-50 for any bound
        this package uses and irrelevant to the determinism contract."""
        return self.next_u64() % bound

    def normals(self, count: int, mean: float = 0.0, variance: float = 1.0) -> np.ndarray:
        if variance < 0.0:
            raise ValueError(f"variance must be >= 0, got {variance}")
        if count == 0:
            return np.empty(0)
        pairs = (count + 1) // 2
        z = kernels.normals_kernel(self.u64(2 * pairs))[:count]
        if variance == 0.0:
            return np.full(count, mean)
        if mean == 0.0 and variance == 1.0:
            return z
        return mean + math.sqrt(variance) * z

    def permutation(self, n: int) -> np.ndarray:
        """Fisher-Yates shuffle of 0..n-1: at step i, swap position i with
        i + (next output mod (n - i))."""
        perm = np.arange(n, dtype=np.int64)
        for i in range(n - 1):
            j = i + self.next_below(n - i)
            perm[i], perm[j] = perm[j], perm[i]
        return perm


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Matrix product with the documented left-to-right reduction order.

    Raises if the result leaves the finite float64 range; no public
    operation hands back NaN or infinity.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError(f"matmul needs 2-D operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(
            f"matmul shape mismatch: ({a.shape[0]}x{a.shape[1]}) x "
            f"({b.shape[0]}x{b.shape[1]})"
        )
    out = kernels.matmul_kernel(a, b)
    if not np.all(np.isfinite(out)):
        raise ValueError("matmul overflowed the finite float64 range")
    return out


def sigmoid(x):
    """Numerically stable logistic: exp is only ever taken of -|x|.

    Accepts a scalar or an array; saturates to exactly 0.0 / 1.0 far out
    in the tails instead of overflowing.
    """
    if np.isscalar(x):
        v = float(x)
        if v >= 0.0:
            return 1.0 / (1.0 + math.exp(-v))
        e = math.exp(v)
        return e / (1.0 + e)
    return kernels.sigmoid_kernel(np.asarray(x, dtype=np.float64))


def gaussian_matrix(
    rng: Prng, rows: int, cols: int, mean: float = 0.0, variance: float = 1.0
) -> np.ndarray:
    """(rows x cols) matrix of independent N(mean, variance) draws, filled
    row-major from the Box-Muller stream documented on :class:`Prng`."""
    if rows <= 0 or cols <= 0:
        raise ValueError(f"matrix dims must be positive, got {rows}x{cols}")
    if variance < 0.0:
        raise ValueError(f"variance must be >= 0, got {variance}")
    return rng.normals(rows * cols, mean, variance).reshape(rows, cols)
