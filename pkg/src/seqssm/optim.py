"""Adam with decoupled, group-wise weight decay and a cosine schedule.

Three parameter groups, disjoint and exhaustive (model.py asserts this):
the recurrence core uses its own learning rate, the input-dependence dense
maps and everything else share the base rate, and each group carries its
own decay constant.  Decay multiplies into the weights before the Adam
step, scaled by that group's current learning rate, so zero gradients with
positive decay shrink weights by exactly (1 - lr * wd).

No gradient clipping anywhere: a run that blows up should report that it
blew up, not mask it.
"""

import math
from dataclasses import dataclass, field
from typing import Dict

import numpy as np

from .errors import ArgumentError, NumericError
from .model import Model, named_params


def cosine_lr(epoch, total, base):
    """base * 0.5 * (1 + cos(pi * epoch / total)); no warmup."""
    if total < 1:
        raise ArgumentError(f"cosine_lr: total epochs must be >= 1, got {total}")
    if not 0 <= epoch <= total:
        raise ArgumentError(f"cosine_lr: epoch {epoch} outside [0, {total}]")
    return base * 0.5 * (1.0 + math.cos(math.pi * epoch / total))


@dataclass
class AdamState:
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)


def init_adam(model: Model) -> AdamState:
    state = AdamState()
    for name, arr, _ in named_params(model):
        state.m[name] = np.zeros_like(arr, dtype=np.float64)
        state.v[name] = np.zeros_like(arr, dtype=np.float64)
    return state


def adam_update(model: Model, grads, state: AdamState, cfg, lr_factor=1.0):
    """One in-place update over every parameter.

    cfg supplies base_lr / ssm_lr and the per-group decay constants;
    lr_factor is the schedule multiplier for this step.  The whole update
    is atomic: any non-finite gradient aborts before touching parameters
    or moments.
    """
    for name, _, _ in named_params(model):
        if not np.all(np.isfinite(grads[name])):
            raise NumericError(f"non-finite gradient for parameter {name}")

    state.t += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** state.t
    c2 = 1.0 - b2 ** state.t
    decay = {"ssm": cfg.wd_ssm, "input_dep": cfg.wd_dense_inputdep, "other": cfg.wd_other}
    for name, arr, group in named_params(model):
        lr = (cfg.ssm_lr if group == "ssm" else cfg.base_lr) * lr_factor
        wd = decay[group]
        if wd:
            arr *= 1.0 - lr * wd
        g = grads[name].astype(np.float64, copy=False)
        m = state.m[name]
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        step = lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
        arr -= step.astype(arr.dtype, copy=False)
