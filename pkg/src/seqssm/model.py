"""Encoder -> stacked blocks -> decoder, plus checkpoint round-tripping.

The decoder applies per step for per-step targets, or to the mean over
steps of the last block's outputs for sequence-level targets.
"""

import json
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .errors import CheckpointVersionError, ShapeError
from .kernels import matvec
from .layer import BlockTrace, LayerParams, TransitionConfig, block_forward, init_layer_params

CHECKPOINT_VERSION = 1

READOUTS = ("per_step", "pooled")

# weight-decay / learning-rate groups; every parameter name must land in
# exactly one of these (asserted at build time)
GROUP_SSM = ("lam_raw", "b_in", "c_out", "d_skip", "state_bias")
GROUP_INPUT_DEP = ("lam_proj", "lam_bias", "b_mod", "c_mod")
GROUP_OTHER = ("gate_w", "norm_scale", "norm_bias", "encoder", "enc_bias", "decoder")


@dataclass(frozen=True)
class ModelConfig:
    in_width: int
    out_width: int
    depth: int = 1
    d: int = 16           # block width
    m: int = 16           # state size per block
    input_dep_b: bool = False
    input_dep_c: bool = False
    readout: str = "per_step"
    reparam_a: float = 1.0
    reparam_b: float = 0.5
    reparam_enabled: bool = True
    timestamped: bool = False
    precision: int = 64

    def __post_init__(self):
        if self.depth < 0 or self.d < 1 or self.m < 1 or self.in_width < 1 or self.out_width < 1:
            raise ShapeError(f"bad model dimensions: {self}")
        if self.readout not in READOUTS:
            raise ShapeError(f"readout must be one of {READOUTS}, got {self.readout!r}")
        if self.precision not in (32, 64):
            raise ShapeError(f"precision must be 32 or 64, got {self.precision}")

    @property
    def dtype(self):
        return np.float32 if self.precision == 32 else np.float64

    @property
    def transition(self) -> TransitionConfig:
        return TransitionConfig(self.reparam_a, self.reparam_b, self.reparam_enabled)


@dataclass
class Model:
    config: ModelConfig
    encoder: np.ndarray            # (d, in_width)
    layers: List[LayerParams]
    decoder: np.ndarray            # (out_width, d)
    # encoding is affine: with a pure matrix and a width-1 input, the first
    # block's pre-normalization would see a one-dimensional ray and keep only
    # the input's sign, so the bias is what lets magnitude reach the state
    enc_bias: np.ndarray = None    # (d,), zero at init

    def __post_init__(self):
        if self.enc_bias is None:
            self.enc_bias = np.zeros(self.config.d, dtype=self.config.dtype)


def init_model(config: ModelConfig, seed: int) -> Model:
    """Build a model from a seed.  Per-layer draws come from spawned child
    generators so layer count does not shift the encoder/decoder draws."""
    root = np.random.SeedSequence(seed)
    enc_ss, dec_ss, *layer_ss = root.spawn(2 + config.depth)
    dt = config.dtype
    enc_rng = np.random.default_rng(enc_ss)
    dec_rng = np.random.default_rng(dec_ss)
    s_in = 1.0 / np.sqrt(config.in_width)
    s_d = 1.0 / np.sqrt(config.d)
    encoder = enc_rng.uniform(-s_in, s_in, (config.d, config.in_width)).astype(dt)
    decoder = dec_rng.uniform(-s_d, s_d, (config.out_width, config.d)).astype(dt)
    layers = [
        init_layer_params(
            config.m, config.d, np.random.default_rng(ss), config.transition,
            input_dep_b=config.input_dep_b, input_dep_c=config.input_dep_c,
            timestamped=config.timestamped, dtype=dt,
        )
        for ss in layer_ss
    ]
    model = Model(config, encoder, layers, decoder)
    _assert_groups_cover(model)
    return model


def named_params(model: Model):
    """Yield (name, array, group) for every trainable array, in a fixed
    order.  Names look like 'layers.0.lam_raw', 'encoder', 'decoder'."""
    yield "encoder", model.encoder, "other"
    yield "enc_bias", model.enc_bias, "other"
    for i, lp in enumerate(model.layers):
        for f in ("lam_raw", "lam_proj", "lam_bias", "b_in", "c_out", "d_skip",
                  "state_bias", "gate_w", "norm_scale", "norm_bias", "b_mod", "c_mod"):
            arr = getattr(lp, f)
            if arr is None:
                continue
            group = "ssm" if f in GROUP_SSM else ("input_dep" if f in GROUP_INPUT_DEP else "other")
            yield f"layers.{i}.{f}", arr, group
    yield "decoder", model.decoder, "other"


def _assert_groups_cover(model: Model):
    seen = set()
    for name, _, group in named_params(model):
        assert group in ("ssm", "input_dep", "other"), name
        assert name not in seen, f"duplicate parameter {name}"
        seen.add(name)
    fields = {n.split(".")[-1] for n in seen}
    uncovered = fields - set(GROUP_SSM) - set(GROUP_INPUT_DEP) - set(GROUP_OTHER)
    assert not uncovered, f"parameters outside every decay group: {uncovered}"


def param_count(model: Model) -> int:
    return sum(arr.size for _, arr, _ in named_params(model))


def set_params_from(model: Model, snapshot: dict):
    for name, arr, _ in named_params(model):
        np.copyto(arr, snapshot[name])


def snapshot_params(model: Model) -> dict:
    return {name: arr.copy() for name, arr, _ in named_params(model)}


@dataclass
class ModelTrace:
    raw: np.ndarray                 # (T, ..., in_width) raw inputs
    enc_out: np.ndarray             # (T, ..., d)
    blocks: List[BlockTrace] = field(default_factory=list)
    final: Optional[np.ndarray] = None   # last block output (decoder input stream)
    pooled: Optional[np.ndarray] = None  # mean over steps when readout is pooled


def forward(model: Model, seq, dts=None, want_trace=False):
    """Run the full stack.

    seq: (T, ..., in_width); dts: optional (T, ...) positive gaps.
    Returns (outputs, trace); outputs are per-step (T, ..., out) or pooled
    (..., out) depending on the configured readout.
    """
    seq = np.asarray(seq, dtype=model.config.dtype)
    if seq.ndim < 2 or seq.shape[0] == 0:
        raise ShapeError(f"forward: need (T, ..., in_width) with T >= 1, got {seq.shape}")
    if seq.shape[-1] != model.config.in_width:
        raise ShapeError(
            f"forward: input width {seq.shape[-1]}, model expects {model.config.in_width}")
    if dts is not None:
        dts = np.asarray(dts, dtype=model.config.dtype)

    h = matvec(model.encoder, seq) + model.enc_bias
    trace = ModelTrace(seq, h)
    cfg = model.config.transition
    for lp in model.layers:
        h, bt = block_forward(h, lp, cfg, dts=dts)
        if want_trace:
            trace.blocks.append(bt)
    trace.final = h
    if model.config.readout == "per_step":
        out = matvec(model.decoder, h)
    else:
        pooled = np.mean(h, axis=0)
        trace.pooled = pooled
        out = matvec(model.decoder, pooled)
    return out, (trace if want_trace else None)


def save_checkpoint(path, model: Model):
    """Single-file container: every parameter array plus a JSON header with
    shapes and the format version.  Round-trips bit-exactly."""
    arrays = {name.replace(".", "/"): arr for name, arr, _ in named_params(model)}
    meta = {
        "format_version": CHECKPOINT_VERSION,
        "config": {
            "in_width": model.config.in_width, "out_width": model.config.out_width,
            "depth": model.config.depth, "d": model.config.d, "m": model.config.m,
            "input_dep_b": model.config.input_dep_b, "input_dep_c": model.config.input_dep_c,
            "readout": model.config.readout,
            "reparam_a": model.config.reparam_a, "reparam_b": model.config.reparam_b,
            "reparam_enabled": model.config.reparam_enabled,
            "timestamped": model.config.timestamped, "precision": model.config.precision,
        },
        "shapes": {name: list(arr.shape) for name, arr, _ in named_params(model)},
    }
    np.savez(path, __meta__=np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8), **arrays)


def load_checkpoint(path) -> Model:
    with np.load(path) as z:
        meta = json.loads(bytes(z["__meta__"]))
        version = meta.get("format_version")
        if version != CHECKPOINT_VERSION:
            raise CheckpointVersionError(version, CHECKPOINT_VERSION)
        config = ModelConfig(**meta["config"])
        model = init_model(config, seed=0)
        for name, arr, _ in named_params(model):
            stored = z[name.replace(".", "/")]
            if list(stored.shape) != meta["shapes"][name]:
                raise ShapeError(f"checkpoint field {name}: header says "
                                 f"{meta['shapes'][name]}, array is {list(stored.shape)}")
            np.copyto(arr, stored.astype(config.dtype, copy=False))
    for lp in model.layers:
        lp.validate()
    return model
