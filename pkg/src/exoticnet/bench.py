"""Benchmark the numba kernels against the pure-numpy fallback.

Run with ``python -m exoticnet.bench [--repeat N]``.  Times the hot
kernels (matmul at training shapes, elementwise sigmoid, the normal-
deviate stream, the optimizer update, the Jacobi eigensolver) plus one
full forward/backward/update training step, on every available backend.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from . import backend, kernels
from .core import Prng
from .network import Architecture, backward, forward, init_network
from .training import OptimizerConfig, OptimizerState, sgd_step


def _time(fn, repeat: int) -> float:
    fn()  # warm (and JIT-compile) outside the timed region
    t0 = time.perf_counter()
    for _ in range(repeat):
        fn()
    return (time.perf_counter() - t0) / repeat


def _cases():
    rng = np.random.default_rng(123)
    a_fwd = rng.standard_normal((50, 300))
    b_fwd = rng.standard_normal((300, 300))
    a_grad = rng.standard_normal((300, 50))
    b_grad = rng.standard_normal((50, 300))
    x_small = rng.standard_normal(1_000_000)
    theta = rng.standard_normal(271_801)
    grad = rng.standard_normal(271_801)
    sym = rng.standard_normal((30, 30))
    sym = sym @ sym.T

    net = init_network(Architecture((30, 300, 300, 300, 300, 1)), Prng(7))
    batch = rng.standard_normal((50, 30))
    targets = (rng.random(50) < 0.5).astype(np.float64)
    cfg = OptimizerConfig()
    state = OptimizerState(net)

    def train_step():
        trace = forward(net, batch)
        grads = backward(net, trace, targets)
        sgd_step(net, grads, state, 0.05, 0.9, cfg)

    return [
        ("matmul (50x300)@(300x300)", lambda: kernels.matmul_kernel(a_fwd, b_fwd)),
        ("matmul (300x50)@(50x300)", lambda: kernels.matmul_kernel(a_grad, b_grad)),
        ("sigmoid 1e6", lambda: kernels.sigmoid_kernel(x_small)),
        ("normals 1e6", lambda: kernels.normals_kernel(kernels.splitmix64_kernel(1, 0, 1_000_000))),
        (
            "optimizer update 271801 params",
            lambda: kernels.rmsprop_kernel(
                theta, grad, np.zeros_like(theta), np.ones_like(theta), 0.05, 0.9, 0.9, 1e-8
            ),
        ),
        (
            "jacobi eigh 30x30",
            lambda: kernels.jacobi_kernel(sym.copy(), np.eye(30), 1e-12, 100),
        ),
        ("train step (batch 50, 30-300x4-1)", train_step),
    ]


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="exoticnet.bench")
    parser.add_argument("--repeat", type=int, default=20)
    args = parser.parse_args(argv)

    backends = ["numpy"] + (["numba"] if backend.HAS_NUMBA else [])
    results: dict[str, dict[str, float]] = {}
    for name in backends:
        backend.set_backend(name)
        kernels.warmup()
        for label, fn in _cases():
            results.setdefault(label, {})[name] = _time(fn, args.repeat)

    width = max(len(label) for label in results)
    header = f"{'kernel':<{width}}  " + "  ".join(f"{b:>12}" for b in backends)
    if len(backends) == 2:
        header += f"  {'speedup':>8}"
    print(header)
    for label, times in results.items():
        row = f"{label:<{width}}  " + "  ".join(
            f"{times[b] * 1e3:>10.3f}ms" for b in backends
        )
        if len(backends) == 2:
            row += f"  {times['numpy'] / times['numba']:>7.1f}x"
        print(row)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
