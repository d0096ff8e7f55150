"""The numba kernels and the pure-numpy fallback must agree."""

import numpy as np
import pytest

from exoticnet import backend, kernels

import oracles

needs_numba = pytest.mark.skipif(not backend.HAS_NUMBA, reason="numba not installed")


@pytest.fixture
def both_backends():
    """Runs the wrapped call under each backend and restores the default."""
    original = backend.active_backend()

    def run(fn):
        out = {}
        for name in ("numpy", "numba") if backend.HAS_NUMBA else ("numpy",):
            backend.set_backend(name)
            out[name] = fn()
        return out

    yield run
    backend.set_backend(original)


@needs_numba
def test_matmul_bitwise_identical_across_backends(both_backends):
    rng = np.random.default_rng(10)
    a = rng.standard_normal((23, 17))
    b = rng.standard_normal((17, 31))
    results = both_backends(lambda: kernels.matmul_kernel(a, b))
    assert np.array_equal(results["numpy"], results["numba"])
    assert np.array_equal(results["numpy"], oracles.mm_triple(a, b))


@needs_numba
def test_splitmix_stream_bitwise_identical(both_backends):
    results = both_backends(lambda: kernels.splitmix64_kernel(123456789, 17, 4096))
    assert np.array_equal(results["numpy"], results["numba"])


@needs_numba
def test_normals_agree_to_one_ulp(both_backends):
    u = kernels.splitmix64_kernel(5, 0, 20000)
    results = both_backends(lambda: kernels.normals_kernel(u))
    np.testing.assert_allclose(results["numpy"], results["numba"], rtol=0, atol=1e-12)


@needs_numba
def test_sigmoid_agrees_to_one_ulp(both_backends):
    x = np.linspace(-40, 40, 10001)
    results = both_backends(lambda: kernels.sigmoid_kernel(x))
    np.testing.assert_allclose(results["numpy"], results["numba"], rtol=0, atol=1e-15)


@needs_numba
def test_optimizer_update_bitwise_identical(both_backends):
    rng = np.random.default_rng(11)
    theta0 = rng.standard_normal(1000)
    grad = rng.standard_normal(1000)

    def step():
        theta = theta0.copy()
        vel = np.zeros_like(theta)
        rms = np.ones_like(theta)
        for _ in range(5):
            kernels.rmsprop_kernel(theta, grad, vel, rms, 0.05, 0.9, 0.9, 1e-8)
        return theta

    results = both_backends(step)
    assert np.array_equal(results["numpy"], results["numba"])


@needs_numba
def test_jacobi_agrees_across_backends(both_backends):
    rng = np.random.default_rng(12)
    m = rng.standard_normal((12, 12))
    sym = m @ m.T

    def solve():
        a = sym.copy()
        v = np.eye(12)
        kernels.jacobi_kernel(a, v, 1e-12, 100)
        return np.sort(np.diag(a))

    results = both_backends(solve)
    np.testing.assert_allclose(results["numpy"], results["numba"], rtol=1e-12, atol=1e-12)


def test_env_flag_rejects_unknown_backend():
    with pytest.raises(ValueError):
        backend.set_backend("cuda")


def test_numpy_backend_always_available(both_backends):
    results = both_backends(lambda: backend.active_backend())
    assert results["numpy"] == "numpy"
