"""Hand-written reverse-mode gradients through the full stack.

The only sequential dependency in the backward pass is the adjoint scan

    dL/dx_k = (output path at k) + lam_{k+1} * dL/dx_{k+1}

everything else contracts over steps in bulk.  Gradients flow through the
input-shifted transition weights, so the projection that makes the
recurrence input-adaptive trains like any other dense map.
"""

from dataclasses import dataclass
from typing import Dict, List, Optional

import numpy as np

from .errors import ArgumentError, ShapeError
from .kernels import INV_SQRT_2PI, layer_norm_backward, matvec, softmax
from .layer import BlockTrace, LayerParams, transition_derivative
from .model import Model, forward, named_params

LOSSES = ("mse", "cross_entropy")


@dataclass
class GradientSet:
    """Gradient arrays keyed like named_params: 'encoder', 'layers.0.b_in', ..."""

    arrays: Dict[str, np.ndarray]

    def __getitem__(self, name):
        return self.arrays[name]

    def items(self):
        return self.arrays.items()


def _flat(x):
    return x.reshape(-1, x.shape[-1])


def _contract(a, b):
    """sum over leading axes of outer(a, b): (..., p), (..., q) -> (p, q)."""
    return _flat(a).T @ _flat(b)


def _sum_lead(x):
    return x.sum(axis=tuple(range(x.ndim - 1)))


def output_loss(outputs, targets, loss_kind):
    """Scalar loss and its gradient w.r.t. the model outputs.

    mse: mean of squared differences over every element (batch included).
    cross_entropy: mean over leading axes of -log softmax picked at the
    integer targets; outputs are logits (..., n_classes).
    """
    if loss_kind == "mse":
        targets = np.asarray(targets, dtype=outputs.dtype)
        if outputs.shape != targets.shape:
            raise ShapeError(f"loss: outputs {outputs.shape} vs targets {targets.shape}")
        diff = outputs - targets
        return float(np.mean(diff * diff)), (2.0 / diff.size) * diff
    if loss_kind != "cross_entropy":
        raise ArgumentError(f"unknown loss {loss_kind!r}")
    targets = np.asarray(targets)
    if targets.shape != outputs.shape[:-1]:
        raise ShapeError(f"loss: logits {outputs.shape} need targets {outputs.shape[:-1]}, "
                         f"got {targets.shape}")
    z = outputs - np.max(outputs, axis=-1, keepdims=True)
    lse = np.log(np.sum(np.exp(z), axis=-1))
    picked = np.take_along_axis(z, targets[..., None].astype(np.int64), axis=-1)[..., 0]
    n = max(targets.size, 1)
    loss = float(np.sum(lse - picked) / n)
    d_out = softmax(outputs)
    np.put_along_axis(d_out, targets[..., None].astype(np.int64),
                      np.take_along_axis(d_out, targets[..., None].astype(np.int64), axis=-1) - 1.0,
                      axis=-1)
    return loss, d_out / n


def block_backward(d_out, params: LayerParams, cfg, tr: BlockTrace,
                   want_lam_grads=False):
    """Backward through one block.  d_out is the gradient at the block
    output; returns (d_u at the block input, per-field grads, d_lam)."""
    g: Dict[str, np.ndarray] = {}
    with np.errstate(over="ignore", invalid="ignore", under="ignore"):
        y, cdf, gate, ut = tr.y, tr.cdf, tr.gate, tr.u_tilde
        h = y * cdf
        # gate: out = h * sigmoid(W h)
        d_h = d_out * gate
        d_z = (d_out * h) * gate * (1.0 - gate)
        g["gate_w"] = _contract(d_z, h)
        d_h = d_h + matvec(params.gate_w.T, d_z)
        pdf = np.exp(-0.5 * y * y) * INV_SQRT_2PI
        d_y = d_h * (cdf + y * pdf)

        # output path y = C x + c-mod + d_skip * u
        xs_now = tr.xs[1:]
        g["c_out"] = _contract(d_y, xs_now)
        xgrad = matvec(params.c_out.T, d_y)
        d_ut = d_y * params.d_skip
        g["d_skip"] = _sum_lead(d_y * ut)
        if params.c_mod is not None:
            cmu = matvec(params.c_mod, ut)
            d_s = np.sum(d_y, axis=-1, keepdims=True)
            xgrad = xgrad + d_s * cmu
            d_cmu = d_s * xs_now
            g["c_mod"] = _contract(d_cmu, ut)
            d_ut = d_ut + matvec(params.c_mod.T, d_cmu)

        # adjoint scan through x_k = lam_k x_{k-1} + drive_k
        T = y.shape[0]
        dxs = np.empty_like(tr.lam)
        carry = np.zeros_like(tr.xs[0])
        for k in range(T - 1, -1, -1):
            carry = xgrad[k] + carry
            dxs[k] = carry
            carry = tr.lam[k] * carry
        d_lam = dxs * tr.xs[:-1]

        # drive: B u (+ rank-1 modulation) + state_bias
        g["state_bias"] = _sum_lead(dxs)
        g["b_in"] = _contract(dxs, ut)
        d_ut = d_ut + matvec(params.b_in.T, dxs)
        if params.b_mod is not None:
            bmu = matvec(params.b_mod, ut)
            tau = np.sum(ut, axis=-1, keepdims=True)
            d_tau = np.sum(dxs * bmu, axis=-1, keepdims=True)
            d_bmu = tau * dxs
            g["b_mod"] = _contract(d_bmu, ut)
            d_ut = d_ut + matvec(params.b_mod.T, d_bmu) + d_tau

        # transition: lam = squash(w), w = lam_raw + lam_proj u + lam_bias
        dlam_dw = transition_derivative(tr.w, tr.lam, tr.dts, cfg)
        d_w = d_lam * dlam_dw
        g["lam_raw"] = _sum_lead(d_w)
        g["lam_bias"] = _sum_lead(d_w)
        g["lam_proj"] = _contract(d_w, ut)
        d_ut = d_ut + matvec(params.lam_proj.T, d_w)

        d_u, g["norm_scale"], g["norm_bias"] = layer_norm_backward(
            d_ut, tr.u_hat, tr.inv_std, params.norm_scale)
        d_u = d_u + d_out  # residual add
    return d_u, g, (d_lam if want_lam_grads else None)


def backward_model(model: Model, trace, d_out, want_lam_grads=False):
    """Full-stack backward from the loss gradient at the model outputs.

    Returns (GradientSet, lam_grads); lam_grads is a per-layer list of
    per-step transition-factor gradients (T, ..., m) when requested.
    """
    cfg = model.config.transition
    arrays: Dict[str, np.ndarray] = {}
    if model.config.readout == "per_step":
        arrays["decoder"] = _contract(d_out, trace.final)
        d_r = matvec(model.decoder.T, d_out)
    else:
        d_out = np.asarray(d_out)
        arrays["decoder"] = _contract(d_out, trace.pooled)
        d_pool = matvec(model.decoder.T, d_out)
        T = trace.final.shape[0]
        d_r = np.broadcast_to(d_pool / T, trace.final.shape).copy()

    lam_grads: List[Optional[np.ndarray]] = []
    for i in range(len(model.layers) - 1, -1, -1):
        d_r, g, dl = block_backward(d_r, model.layers[i], cfg, trace.blocks[i],
                                    want_lam_grads)
        for field, arr in g.items():
            arrays[f"layers.{i}.{field}"] = arr
        lam_grads.append(dl)
    lam_grads.reverse()

    arrays["encoder"] = _contract(d_r, trace.raw)
    arrays["enc_bias"] = _sum_lead(d_r)
    return GradientSet(arrays), (lam_grads if want_lam_grads else None)


def model_loss(model: Model, seq, targets, loss_kind, dts=None) -> float:
    out, _ = forward(model, seq, dts=dts)
    loss, _ = output_loss(out, targets, loss_kind)
    return loss


def loss_and_gradients(model: Model, seq, targets, loss_kind, dts=None,
                       want_lam_grads=False):
    out, trace = forward(model, seq, dts=dts, want_trace=True)
    loss, d_out = output_loss(out, targets, loss_kind)
    grads, lam_grads = backward_model(model, trace, d_out, want_lam_grads)
    return loss, grads, lam_grads, trace


def finite_difference_gradients(model: Model, seq, targets, loss_kind,
                                dts=None, h=1e-5) -> Dict[str, np.ndarray]:
    """Central differences (L(p+h) - L(p-h)) / 2h for every scalar in every
    parameter array.  Second-order accurate; the independent check on the
    analytic pass."""
    if not (1e-7 <= h <= 1e-3):
        raise ArgumentError(f"finite-difference step h={h} outside [1e-7, 1e-3]")
    out: Dict[str, np.ndarray] = {}
    for name, arr, _ in named_params(model):
        grad = np.zeros_like(arr)
        it = np.nditer(arr, flags=["multi_index"])
        while not it.finished:
            idx = it.multi_index
            orig = arr[idx]
            arr[idx] = orig + h
            lp = model_loss(model, seq, targets, loss_kind, dts)
            arr[idx] = orig - h
            lm = model_loss(model, seq, targets, loss_kind, dts)
            arr[idx] = orig
            grad[idx] = (lp - lm) / (2.0 * h)
            it.iternext()
        out[name] = grad
    return out


def relative_error(a, b, floor=1e-8):
    """Max elementwise discrepancy, relative above `floor` and forgiven
    below it (differences smaller than the floor count as zero)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    diff = np.abs(a - b)
    scale = np.maximum(np.abs(a), np.abs(b))
    rel = np.where(diff <= floor, 0.0, diff / np.where(scale == 0, 1.0, scale))
    return float(np.max(rel)) if rel.size else 0.0
