"""One recurrent block: pre-norm, input-adaptive diagonal recurrence, gate.

The state update for step k on a normalized input u is

    w_k   = w + W_lam u + w_bias          raw transition weights, input-shifted
    lam_k = squash(w_k)                   stable by construction, see reparam
    x_k   = lam_k * x_{k-1} + B u + bias
    y_k   = C x_k + d_skip * u

followed by a multiplicative gate gelu(y) * sigmoid(W_g gelu(y)) and a
residual add of the un-normalized block input.  Because the raw weights are
shifted additively *before* squashing, the transition stays inside the
stable region for every input, not just on the training distribution.

Batching: every op accepts arrays with extra leading axes; (d,) and (B, d)
inputs run through the same code.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from scipy.special import erf

from .errors import ArgumentError, NumericError, ShapeError
from .kernels import SQRT2, gelu, layer_norm, matvec, sigmoid
from .reparam import ReparamConfig, inverse_stability_map, stability_map, stability_map_derivative


@dataclass(frozen=True)
class TransitionConfig:
    """How raw weights become transition factors.

    With enabled=False the squash is skipped entirely (raw w is the
    transition, or the generator when timestamps are present); training can
    then push the recurrence out of the stable region, which is the point
    of the ablation.
    """

    a: float = 1.0
    b: float = 0.5
    enabled: bool = True

    @property
    def discrete(self) -> ReparamConfig:
        return ReparamConfig(self.a, self.b, "discrete")

    @property
    def continuous(self) -> ReparamConfig:
        return ReparamConfig(self.a, self.b, "continuous")


@dataclass
class LayerParams:
    """All trainables of one block; arrays share one floating dtype.

    b_mod / c_mod are rank-1 input modulators for the B and C paths and are
    None unless the corresponding flag was set at build time.
    """

    lam_raw: np.ndarray     # (m,)   raw diagonal transition weights
    lam_proj: np.ndarray    # (m, d) input projection shifting lam_raw
    lam_bias: np.ndarray    # (m,)
    b_in: np.ndarray        # (m, d)
    c_out: np.ndarray       # (d, m)
    d_skip: np.ndarray      # (d,)   diagonal feedthrough
    state_bias: np.ndarray  # (m,)
    gate_w: np.ndarray      # (d, d)
    norm_scale: np.ndarray  # (d,)
    norm_bias: np.ndarray   # (d,)
    b_mod: Optional[np.ndarray] = None  # (m, d)
    c_mod: Optional[np.ndarray] = None  # (m, d)

    @property
    def m(self) -> int:
        return self.lam_raw.shape[0]

    @property
    def d(self) -> int:
        return self.c_out.shape[0]

    def validate(self):
        m, d = self.m, self.d
        expect = {
            "lam_raw": (m,), "lam_proj": (m, d), "lam_bias": (m,),
            "b_in": (m, d), "c_out": (d, m), "d_skip": (d,),
            "state_bias": (m,), "gate_w": (d, d),
            "norm_scale": (d,), "norm_bias": (d,),
        }
        for name, shape in expect.items():
            got = getattr(self, name).shape
            if got != shape:
                raise ShapeError(f"layer field {name}: expected {shape}, got {got}")
        for name in ("b_mod", "c_mod"):
            arr = getattr(self, name)
            if arr is not None and arr.shape != (m, d):
                raise ShapeError(f"layer field {name}: expected {(m, d)}, got {arr.shape}")


def init_layer_params(m, d, rng, cfg: TransitionConfig, *, input_dep_b=False,
                      input_dep_c=False, timestamped=False, dtype=np.float64,
                      lam_lo=0.7, lam_hi=0.99) -> LayerParams:
    """Draw one block's parameters.

    Transition magnitudes are targeted in [lam_lo, lam_hi] and inverted
    through the active squash so the draw order and the realized decay
    spectrum are identical whether or not the squash is enabled.  Draw
    order is fixed: targets, lam_proj, b_in, c_out, gate_w.
    """
    targets = rng.uniform(lam_lo, lam_hi, m)
    goal = np.log(targets) if timestamped else targets
    if cfg.enabled:
        form = cfg.continuous if timestamped else cfg.discrete
        w = inverse_stability_map(goal, form)
    else:
        w = goal
    s = 1.0 / np.sqrt(d)
    p = LayerParams(
        lam_raw=np.asarray(w, dtype=dtype),
        lam_proj=rng.uniform(-0.5 * s, 0.5 * s, (m, d)).astype(dtype),
        lam_bias=np.zeros(m, dtype=dtype),
        b_in=rng.uniform(-s, s, (m, d)).astype(dtype),
        c_out=rng.uniform(-s, s, (d, m)).astype(dtype),
        d_skip=np.ones(d, dtype=dtype),
        state_bias=np.zeros(m, dtype=dtype),
        gate_w=rng.uniform(-s, s, (d, d)).astype(dtype),
        norm_scale=np.ones(d, dtype=dtype),
        norm_bias=np.zeros(d, dtype=dtype),
        b_mod=np.zeros((m, d), dtype=dtype) if input_dep_b else None,
        c_mod=np.zeros((m, d), dtype=dtype) if input_dep_c else None,
    )
    p.validate()
    return p


def modulate(params: LayerParams, u):
    """Raw transition weights for input u: lam_raw + lam_proj u + lam_bias."""
    return params.lam_raw + matvec(params.lam_proj, u) + params.lam_bias


def transition(w, dt, cfg: TransitionConfig):
    """Transition factor from raw weights.

    Without dt the discrete squash applies directly; with dt the continuous
    squash gives a strictly negative generator and the factor is its
    exponential over the step, so irregular gaps stay stable too.
    """
    w = np.asarray(w)
    if dt is None:
        return stability_map(w, cfg.discrete) if cfg.enabled else w
    dt = np.asarray(dt)
    if dt.ndim:
        dt = dt[..., None]
    gen = stability_map(w, cfg.continuous) if cfg.enabled else w
    return np.exp(gen * dt)


def transition_derivative(w, lam, dt, cfg: TransitionConfig):
    """d lam / d w given the already-computed factor lam."""
    w = np.asarray(w)
    if dt is None:
        if cfg.enabled:
            return stability_map_derivative(w, cfg.discrete)
        return np.ones_like(lam)
    dt = np.asarray(dt)
    if dt.ndim:
        dt = dt[..., None]
    if cfg.enabled:
        return lam * dt * stability_map_derivative(w, cfg.continuous)
    return lam * dt


def _b_drive(params: LayerParams, u):
    """B u plus the optional rank-1 modulation (sum u) * (b_mod u)."""
    bu = matvec(params.b_in, u)
    if params.b_mod is not None:
        tau = np.sum(u, axis=-1, keepdims=True)
        bu = bu + tau * matvec(params.b_mod, u)
    return bu


def step(x_prev, u, params: LayerParams, cfg: TransitionConfig, dt=None):
    """One recurrence step on an already-normalized input.

    Returns (x, y): the advanced state and the pre-gate output.
    """
    x_prev = np.asarray(x_prev)
    u = np.asarray(u)
    w_k = modulate(params, u)
    lam = transition(w_k, dt, cfg)
    x = lam * x_prev + _b_drive(params, u) + params.state_bias
    if not np.all(np.isfinite(x)):
        raise NumericError("non-finite state after one step")
    y = matvec(params.c_out, x)
    if params.c_mod is not None:
        s = np.sum(matvec(params.c_mod, u) * x, axis=-1, keepdims=True)
        y = y + s
    y = y + params.d_skip * u
    return x, y


def gate_output(y, params: LayerParams):
    """gelu(y) * sigmoid(W_g gelu(y)); the sigmoid factor is in (0, 1), so
    the gate attenuates but never flips sign."""
    h = gelu(y)
    return h * sigmoid(matvec(params.gate_w, h))


def event_pool(x, window, params: LayerParams, cfg: TransitionConfig, dts=None):
    """Advance the state over a whole window of inputs in closed form.

    The transition is frozen at the window's first input:

        x' = lam^p x + sum_i lam^(p-1-i) B u_i      (i = 0..p-1)

    No per-window state bias and no B modulation; the static input matrix
    drives every pooled event.  Used for inference-time pooling, not in the
    training path.
    """
    window = np.asarray(window)
    if window.ndim < 1 or window.shape[0] == 0:
        raise ArgumentError("event_pool: empty window")
    p = window.shape[0]
    dt0 = None if dts is None else np.asarray(dts)[0]
    lam = transition(modulate(params, window[0]), dt0, cfg)
    bu = matvec(params.b_in, window)
    x_new = np.power(lam, p) * x
    for i in range(p):
        x_new = x_new + np.power(lam, p - 1 - i) * bu[i]
    return x_new


@dataclass
class BlockTrace:
    """Per-step cache of one block_forward call, enough to run the exact
    backward pass and to audit per-step transition gradients."""

    u: np.ndarray        # (T, ..., d) block input
    u_hat: np.ndarray    # normalized input before scale/shift
    inv_std: np.ndarray  # (T, ..., 1)
    u_tilde: np.ndarray  # normalized input after scale/shift
    w: np.ndarray        # (T, ..., m) modulated raw weights
    lam: np.ndarray      # (T, ..., m) transition factors
    xs: np.ndarray       # (T+1, ..., m) states, xs[0] is the initial state
    y: np.ndarray        # (T, ..., d) pre-gate output
    cdf: np.ndarray      # Phi(y), reused by gelu and its derivative
    gate: np.ndarray     # sigmoid gate values
    out: np.ndarray      # (T, ..., d) block output
    dts: Optional[np.ndarray]


def block_forward(seq, params: LayerParams, cfg: TransitionConfig, dts=None,
                  x0=None):
    """Run one block over a sequence (T, ..., d).  Returns (out, trace).

    Everything except the state scan is vectorized over steps; the scan
    itself is the only sequential dependency.
    """
    seq = np.asarray(seq)
    if seq.ndim < 2 or seq.shape[0] == 0:
        raise ShapeError(f"block_forward: need a (T, ..., d) sequence with T >= 1, got {seq.shape}")
    T = seq.shape[0]
    m = params.m
    if x0 is None:
        x0 = np.zeros(seq.shape[1:-1] + (m,), dtype=seq.dtype)

    with np.errstate(over="ignore", invalid="ignore", under="ignore"):
        u_tilde, u_hat, inv_std = layer_norm(seq, params.norm_scale, params.norm_bias)
        w_all = modulate(params, u_tilde)
        lam = transition(w_all, dts, cfg)
        drive = _b_drive(params, u_tilde) + params.state_bias

        xs = np.empty((T + 1,) + x0.shape, dtype=seq.dtype)
        xs[0] = x0
        for k in range(T):
            xs[k + 1] = lam[k] * xs[k] + drive[k]

        bad = ~np.isfinite(xs[1:])
        if bad.any():
            k = int(np.nonzero(bad.reshape(T, -1).any(axis=1))[0][0])
            raise NumericError(f"non-finite state at step {k}")

        y = matvec(params.c_out, xs[1:])
        if params.c_mod is not None:
            s = np.sum(matvec(params.c_mod, u_tilde) * xs[1:], axis=-1, keepdims=True)
            y = y + s
        y = y + params.d_skip * u_tilde

        cdf = 0.5 * (1.0 + erf(y / SQRT2))
        h = y * cdf
        g = sigmoid(matvec(params.gate_w, h))
        out = seq + h * g

    if not np.all(np.isfinite(out)):
        raise NumericError("non-finite block output")
    return out, BlockTrace(seq, u_hat, inv_std, u_tilde, w_all, lam, xs, y, cdf, g,
                           out, None if dts is None else np.asarray(dts))
