"""Numpy implementation of the MLP hot kernels.

Fallback backend used when the compiled extension is unavailable (or forced
via SECUREFED_KERNELS=pure). Semantics match securefed.kernels._ckernels:
one hidden ReLU layer, softmax cross-entropy averaged over the batch, and a
ReLU subgradient of 0 at exactly 0.
"""

import numpy as np

NAME = "pure"


def batch_forward(x, w1, b1, w2, b2):
    """Output-layer logits for a batch: relu(x w1 + b1) w2 + b2."""
    h = x @ w1
    h += b1
    np.maximum(h, 0.0, out=h)
    z = h @ w2
    z += b2
    return z


def batch_loss_grad(x, labels, w1, b1, w2, b2, gw1, gb1, gw2, gb2):
    """Mean softmax cross-entropy over the batch; gradients written in place.

    Returns the loss. Gradient buffers must match the weight shapes; they are
    overwritten, not accumulated.
    """
    m = x.shape[0]
    h = x @ w1
    h += b1
    np.maximum(h, 0.0, out=h)
    z = h @ w2
    z += b2

    z -= z.max(axis=1, keepdims=True)
    log_probs = z - np.log(np.sum(np.exp(z), axis=1, keepdims=True))
    rows = np.arange(m)
    loss = -float(np.mean(log_probs[rows, labels]))

    delta = np.exp(log_probs)
    delta[rows, labels] -= 1.0
    delta /= m

    gw2[...] = h.T @ delta
    gb2[...] = delta.sum(axis=0)
    dh = delta @ w2.T
    dh[h <= 0.0] = 0.0
    gw1[...] = x.T @ dh
    gb1[...] = dh.sum(axis=0)
    return loss
