"""Backend benchmark: compiled Cython kernels vs the numpy fallback.

Times the two hot kernels on an MNIST-shaped training workload and checks
that both backends agree numerically.

    python -m securefed.benchmark [--batches N] [--batch-size B]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from .kernels import available_backends


def _workload(batch_size: int, input_dim: int = 784, hidden: int = 64,
              classes: int = 10, seed: int = 7):
    rng = np.random.Generator(np.random.PCG64(seed))
    x = rng.uniform(0.0, 1.0, size=(batch_size, input_dim))
    x[x < 0.8] = 0.0  # mimic MNIST sparsity
    y = rng.integers(0, classes, size=batch_size).astype(np.int64)
    w1 = rng.uniform(-0.05, 0.05, size=(input_dim, hidden))
    b1 = np.zeros(hidden)
    w2 = rng.uniform(-0.05, 0.05, size=(hidden, classes))
    b2 = np.zeros(classes)
    grads = (np.zeros_like(w1), np.zeros_like(b1), np.zeros_like(w2), np.zeros_like(b2))
    return np.ascontiguousarray(x), y, (w1, b1, w2, b2), grads


def _time_backend(impl, batches: int, batch_size: int) -> tuple[float, float, np.ndarray, np.ndarray]:
    x, y, weights, grads = _workload(batch_size)
    impl.batch_loss_grad(x, y, *weights, *grads)  # warm up
    start = time.perf_counter()
    for _ in range(batches):
        loss = impl.batch_loss_grad(x, y, *weights, *grads)
    grad_time = time.perf_counter() - start
    start = time.perf_counter()
    for _ in range(batches):
        logits = impl.batch_forward(x, *weights)
    fwd_time = time.perf_counter() - start
    return grad_time, fwd_time, np.concatenate([g.ravel() for g in grads]), logits


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--batches", type=int, default=200)
    parser.add_argument("--batch-size", type=int, default=64)
    args = parser.parse_args(argv)

    backends = available_backends()
    print(f"backends available: {', '.join(backends)}")
    results = {}
    for name, impl in backends.items():
        grad_t, fwd_t, grad, logits = _time_backend(impl, args.batches, args.batch_size)
        results[name] = (grad_t, fwd_t, grad, logits)
        per_batch = grad_t / args.batches * 1e3
        print(f"{name:>9}: loss+grad {per_batch:8.3f} ms/batch   "
              f"forward {fwd_t / args.batches * 1e3:8.3f} ms/batch")

    if len(results) == 2:
        g_pure, g_comp = results["pure"][2], results["compiled"][2]
        z_pure, z_comp = results["pure"][3], results["compiled"][3]
        print(f"max |grad diff|   = {np.abs(g_pure - g_comp).max():.3e}")
        print(f"max |logits diff| = {np.abs(z_pure - z_comp).max():.3e}")
        speedup = results["pure"][0] / results["compiled"][0]
        print(f"compiled speedup on loss+grad: {speedup:.2f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
