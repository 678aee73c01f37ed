"""Elementwise and dense kernels used by the whole engine.

Every function is pure, keeps the floating dtype of its inputs, and accepts
either single vectors or arrays with extra leading batch axes.
"""

import numpy as np
from scipy.special import erf

from .errors import ArgumentError, ShapeError

SQRT2 = float(np.sqrt(2.0))
INV_SQRT_2PI = float(1.0 / np.sqrt(2.0 * np.pi))

# epsilon inside the layer-norm variance; fixed engine-wide so that traces
# replay bit-identically across modules
NORM_EPS = 1e-6


def matvec(m, v):
    """m (r, c) @ v (..., c) -> (..., r)."""
    m = np.asarray(m)
    v = np.asarray(v)
    if m.ndim != 2 or v.shape[-1] != m.shape[1]:
        raise ShapeError(f"matvec: matrix {m.shape} incompatible with vector {v.shape}")
    return v @ m.T


def gelu(x):
    """x * Phi(x) with the exact Gaussian CDF, not the tanh fit."""
    x = np.asarray(x)
    return x * (0.5 * (1.0 + erf(x / SQRT2)))


def gelu_grad(x):
    """d/dx of gelu: Phi(x) + x * pdf(x)."""
    x = np.asarray(x)
    cdf = 0.5 * (1.0 + erf(x / SQRT2))
    pdf = np.exp(-0.5 * x * x) * INV_SQRT_2PI
    return cdf + x * pdf


def sigmoid(x):
    """1 / (1 + exp(-x)), branch by sign so neither exp overflows."""
    x = np.asarray(x)
    out = np.empty_like(x, dtype=x.dtype if x.dtype.kind == "f" else np.float64)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def mse_loss(pred, target):
    """Mean of squared differences over all elements."""
    pred = np.asarray(pred)
    target = np.asarray(target)
    if pred.shape != target.shape:
        raise ShapeError(f"mse_loss: prediction {pred.shape} vs target {target.shape}")
    d = pred - target
    return float(np.mean(d * d))


def softmax_cross_entropy(logits, class_index):
    """-log softmax(logits)[class_index], computed via the max-shifted
    log-sum-exp so large logits cannot overflow."""
    logits = np.asarray(logits)
    if logits.ndim != 1:
        raise ShapeError(f"softmax_cross_entropy: logits must be 1-d, got {logits.shape}")
    n = logits.shape[0]
    if not 0 <= class_index < n:
        raise ArgumentError(f"class index {class_index} out of range for {n} classes")
    m = np.max(logits)
    lse = m + np.log(np.sum(np.exp(logits - m)))
    return float(lse - logits[class_index])


def softmax(logits):
    """Max-shifted softmax along the last axis."""
    logits = np.asarray(logits)
    z = logits - np.max(logits, axis=-1, keepdims=True)
    e = np.exp(z)
    return e / np.sum(e, axis=-1, keepdims=True)


def layer_norm(u, scale, bias):
    """Normalize u (..., d) to zero mean / unit variance over the last axis,
    then apply elementwise scale and bias.

    Returns (out, u_hat, inv_std); the latter two feed the backward pass.
    """
    u = np.asarray(u)
    mean = np.mean(u, axis=-1, keepdims=True)
    var = np.mean((u - mean) ** 2, axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + NORM_EPS)
    u_hat = (u - mean) * inv_std
    return u_hat * scale + bias, u_hat, inv_std


def layer_norm_backward(d_out, u_hat, inv_std, scale):
    """Gradients of layer_norm. Returns (d_u, d_scale, d_bias); d_scale and
    d_bias are summed over all leading axes."""
    lead = tuple(range(d_out.ndim - 1))
    d_scale = np.sum(d_out * u_hat, axis=lead)
    d_bias = np.sum(d_out, axis=lead)
    d_hat = d_out * scale
    m1 = np.mean(d_hat, axis=-1, keepdims=True)
    m2 = np.mean(d_hat * u_hat, axis=-1, keepdims=True)
    d_u = inv_std * (d_hat - m1 - u_hat * m2)
    return d_u, d_scale, d_bias
