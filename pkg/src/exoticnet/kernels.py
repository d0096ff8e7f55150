"""Hot numeric kernels, each in a numba and a pure-numpy variant.

Every kernel is written so both variants perform the same floating-point
operations in the same order per output element.  For integer kernels
(the splitmix64 stream) the two variants are bit-identical; for float
kernels they agree except where the two runtimes' transcendental
implementations differ in the last ulp.  Within one backend all kernels
are fully deterministic.

matmul accumulates strictly left-to-right over the shared index: each
``c[i, j]`` is built as ``((a[i,0]*b[0,j]) + a[i,1]*b[1,j]) + ...`` with
one rounding per multiply and per add.  This fixed reduction order is
what makes results bit-reproducible and is why the generic BLAS path is
not used here.
"""

from __future__ import annotations

import math

import numpy as np

from . import backend

# splitmix64 constants (Steele, Lea & Flood's published mixing recurrence)
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB

_TWO53_INV = 2.0 ** -53


# ---------------------------------------------------------------------------
# numpy variants
# ---------------------------------------------------------------------------


def _matmul_np(a, b):
    n, k = a.shape
    m = b.shape[1]
    c = np.zeros((n, m))
    # one rank-1 update per shared index: same per-element order as the
    # scalar i,k,j loop; overflow to inf is caught by the caller
    with np.errstate(over="ignore", invalid="ignore"):
        for kk in range(k):
            c += a[:, kk : kk + 1] * b[kk, :]
    return c


def _sigmoid_np(x):
    out = np.empty_like(x)
    pos = x >= 0.0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    e = np.exp(x[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def _tanh_np(x):
    return np.tanh(x)


def _rmsprop_np(theta, grad, vel, rms, lr, mu, beta, eps):
    rms *= beta
    rms += (1.0 - beta) * grad * grad
    vel *= mu
    vel -= lr * grad / (np.sqrt(rms) + eps)
    theta += vel


def _splitmix64_np(seed, start, count):
    idx = np.arange(start + 1, start + count + 1, dtype=np.uint64)
    z = np.uint64(seed) + idx * np.uint64(_GAMMA)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
    return z ^ (z >> np.uint64(31))


def _normals_np(u64s):
    """Box-Muller on consecutive u64 pairs; returns len(u64s) deviates.

    u1 = ((a >> 11) + 1) * 2^-53  in (0, 1]
    u2 = (b >> 11) * 2^-53        in [0, 1)
    z0 = sqrt(-2 ln u1) cos(2 pi u2), z1 = ... sin(...)
    """
    n = u64s.size // 2
    u1 = ((u64s[0::2] >> np.uint64(11)).astype(np.float64) + 1.0) * _TWO53_INV
    u2 = (u64s[1::2][:n] >> np.uint64(11)).astype(np.float64) * _TWO53_INV
    r = np.sqrt(-2.0 * np.log(u1))
    theta = (2.0 * math.pi) * u2
    out = np.empty(2 * n)
    out[0::2] = r * np.cos(theta)
    out[1::2] = r * np.sin(theta)
    return out


def _jacobi_np(a, v, tol, max_sweeps):
    """Cyclic Jacobi rotations on symmetric ``a``; accumulates into ``v``.

    Stops when the off-diagonal Frobenius norm drops below ``tol`` or
    after ``max_sweeps`` full (p, q) cycles.  Returns sweeps used.
    """
    n = a.shape[0]
    sweeps = 0
    while sweeps < max_sweeps:
        off = 0.0
        for p in range(n):
            for q in range(p + 1, n):
                off += 2.0 * a[p, q] * a[p, q]
        if math.sqrt(off) <= tol:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = 1.0 / (abs(theta) + math.sqrt(theta * theta + 1.0))
                if theta < 0.0:
                    t = -t
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                rp = a[p, :].copy()
                rq = a[q, :].copy()
                a[p, :] = c * rp - s * rq
                a[q, :] = s * rp + c * rq
                cp = a[:, p].copy()
                cq = a[:, q].copy()
                a[:, p] = c * cp - s * cq
                a[:, q] = s * cp + c * cq
                vp = v[:, p].copy()
                vq = v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
        sweeps += 1
    return sweeps


# ---------------------------------------------------------------------------
# numba variants
# ---------------------------------------------------------------------------

if backend.HAS_NUMBA:
    from numba import njit

    @njit(cache=True)
    def _matmul_nb(a, b):
        n, k = a.shape
        m = b.shape[1]
        c = np.zeros((n, m))
        for i in range(n):
            for kk in range(k):
                aik = a[i, kk]
                for j in range(m):
                    c[i, j] += aik * b[kk, j]
        return c

    @njit(cache=True)
    def _sigmoid_nb(x):
        out = np.empty_like(x)
        for i in range(x.size):
            val = x[i]
            if val >= 0.0:
                out[i] = 1.0 / (1.0 + math.exp(-val))
            else:
                e = math.exp(val)
                out[i] = e / (1.0 + e)
        return out

    @njit(cache=True)
    def _tanh_nb(x):
        out = np.empty_like(x)
        for i in range(x.size):
            out[i] = math.tanh(x[i])
        return out

    @njit(cache=True)
    def _rmsprop_nb(theta, grad, vel, rms, lr, mu, beta, eps):
        for i in range(theta.size):
            g = grad[i]
            r = rms[i] * beta + (1.0 - beta) * g * g
            rms[i] = r
            vnew = mu * vel[i] - lr * g / (math.sqrt(r) + eps)
            vel[i] = vnew
            theta[i] += vnew

    @njit(cache=True)
    def _splitmix64_nb(seed, start, count):
        out = np.empty(count, dtype=np.uint64)
        for i in range(count):
            z = np.uint64(seed) + np.uint64(start + i + 1) * np.uint64(_GAMMA)
            z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
            z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
            out[i] = z ^ (z >> np.uint64(31))
        return out

    @njit(cache=True)
    def _normals_nb(u64s):
        n = u64s.size // 2
        out = np.empty(2 * n)
        for i in range(n):
            u1 = (np.float64(u64s[2 * i] >> np.uint64(11)) + 1.0) * _TWO53_INV
            u2 = np.float64(u64s[2 * i + 1] >> np.uint64(11)) * _TWO53_INV
            r = math.sqrt(-2.0 * math.log(u1))
            theta = (2.0 * math.pi) * u2
            out[2 * i] = r * math.cos(theta)
            out[2 * i + 1] = r * math.sin(theta)
        return out

    @njit(cache=True)
    def _jacobi_nb(a, v, tol, max_sweeps):
        n = a.shape[0]
        sweeps = 0
        while sweeps < max_sweeps:
            off = 0.0
            for p in range(n):
                for q in range(p + 1, n):
                    off += 2.0 * a[p, q] * a[p, q]
            if math.sqrt(off) <= tol:
                break
            for p in range(n - 1):
                for q in range(p + 1, n):
                    apq = a[p, q]
                    if apq == 0.0:
                        continue
                    theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                    t = 1.0 / (abs(theta) + math.sqrt(theta * theta + 1.0))
                    if theta < 0.0:
                        t = -t
                    c = 1.0 / math.sqrt(t * t + 1.0)
                    s = t * c
                    for j in range(n):
                        rp = a[p, j]
                        rq = a[q, j]
                        a[p, j] = c * rp - s * rq
                        a[q, j] = s * rp + c * rq
                    for i in range(n):
                        cp = a[i, p]
                        cq = a[i, q]
                        a[i, p] = c * cp - s * cq
                        a[i, q] = s * cp + c * cq
                        vp = v[i, p]
                        vq = v[i, q]
                        v[i, p] = c * vp - s * vq
                        v[i, q] = s * vp + c * vq
            sweeps += 1
        return sweeps

    _IMPL = {
        "numba": {
            "matmul": _matmul_nb,
            "sigmoid": _sigmoid_nb,
            "tanh": _tanh_nb,
            "rmsprop": _rmsprop_nb,
            "splitmix64": _splitmix64_nb,
            "normals": _normals_nb,
            "jacobi": _jacobi_nb,
        }
    }
else:
    _IMPL = {}

_IMPL["numpy"] = {
    "matmul": _matmul_np,
    "sigmoid": _sigmoid_np,
    "tanh": _tanh_np,
    "rmsprop": _rmsprop_np,
    "splitmix64": _splitmix64_np,
    "normals": _normals_np,
    "jacobi": _jacobi_np,
}


def _kern(name):
    return _IMPL[backend.active_backend()][name]


# ---------------------------------------------------------------------------
# dispatching wrappers (shape/dtype normalization lives here, not in kernels)
# ---------------------------------------------------------------------------


def matmul_kernel(a, b):
    """Raw product of two float64 2-D arrays; shapes assumed validated."""
    a = np.ascontiguousarray(a, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    return _kern("matmul")(a, b)


def sigmoid_kernel(x):
    """Elementwise stable logistic on a float64 array of any shape."""
    flat = np.ascontiguousarray(x, dtype=np.float64).reshape(-1)
    return _kern("sigmoid")(flat).reshape(x.shape)


def tanh_kernel(x):
    flat = np.ascontiguousarray(x, dtype=np.float64).reshape(-1)
    return _kern("tanh")(flat).reshape(x.shape)


def rmsprop_kernel(theta, grad, vel, rms, lr, mu, beta, eps):
    """In-place RMS-scaled momentum step on flat float64 views."""
    _kern("rmsprop")(theta, grad, vel, rms, lr, mu, beta, eps)


def splitmix64_kernel(seed, start, count):
    if count == 0:
        return np.empty(0, dtype=np.uint64)
    return _kern("splitmix64")(np.uint64(seed), start, count)


def normals_kernel(u64s):
    return _kern("normals")(u64s)


def jacobi_kernel(a, v, tol, max_sweeps):
    return _kern("jacobi")(a, v, tol, max_sweeps)


def warmup():
    """Force one tiny call through every kernel (triggers JIT compile)."""
    a = np.array([[1.0, 2.0], [3.0, 4.0]])
    matmul_kernel(a, a)
    sigmoid_kernel(a)
    tanh_kernel(a)
    th = np.zeros(4)
    rmsprop_kernel(th, np.ones(4), np.zeros(4), np.zeros(4), 0.1, 0.9, 0.9, 1e-8)
    normals_kernel(splitmix64_kernel(1, 0, 4))
    sym = np.array([[2.0, 1.0], [1.0, 2.0]])
    jacobi_kernel(sym.copy(), np.eye(2), 1e-12, 4)
