import math

import numpy as np
import pytest

from seqssm.errors import ArgumentError, NumericError
from seqssm.model import ModelConfig, init_model, named_params
from seqssm.optim import AdamState, adam_update, cosine_lr, init_adam


class Groups:
    """Minimal stand-in for the trainer's hyperparameter bundle."""

    def __init__(self, base_lr=0.01, ssm_lr=0.01, wd_ssm=0.0,
                 wd_dense_inputdep=0.0, wd_other=0.0):
        self.base_lr = base_lr
        self.ssm_lr = ssm_lr
        self.wd_ssm = wd_ssm
        self.wd_dense_inputdep = wd_dense_inputdep
        self.wd_other = wd_other


def tiny_model(seed=0):
    cfg = ModelConfig(in_width=2, out_width=2, depth=1, d=3, m=4,
                      input_dep_b=True, input_dep_c=True, precision=64)
    return init_model(cfg, seed=seed)


def zero_grads(model):
    return {name: np.zeros_like(arr) for name, arr, _ in named_params(model)}


def snapshot(model):
    return {name: arr.copy() for name, arr, _ in named_params(model)}


class TestCosineSchedule:
    def test_start_is_base(self):
        assert cosine_lr(0, 100, 0.02) == 0.02

    def test_midpoint_is_half(self):
        assert cosine_lr(50, 100, 0.02) == pytest.approx(0.01, abs=1e-18)

    def test_end_is_zero(self):
        assert cosine_lr(100, 100, 0.02) == pytest.approx(0.0, abs=1e-18)

    def test_monotone_decreasing(self):
        vals = [cosine_lr(e, 40, 1.0) for e in range(41)]
        assert all(a > b for a, b in zip(vals, vals[1:]))

    def test_quarter_point(self):
        expect = 0.5 * (1.0 + math.cos(math.pi / 4))
        assert cosine_lr(10, 40, 1.0) == pytest.approx(expect, rel=1e-15)

    def test_epoch_past_total_rejected(self):
        with pytest.raises(ArgumentError):
            cosine_lr(41, 40, 1.0)

    def test_negative_epoch_rejected(self):
        with pytest.raises(ArgumentError):
            cosine_lr(-1, 40, 1.0)

    def test_zero_total_rejected(self):
        with pytest.raises(ArgumentError):
            cosine_lr(0, 0, 1.0)


class TestAdamState:
    def test_moments_cover_every_parameter(self):
        model = tiny_model()
        state = init_adam(model)
        names = {name for name, _, _ in named_params(model)}
        assert set(state.m) == names
        assert set(state.v) == names
        assert state.t == 0

    def test_moments_start_at_zero_float64(self):
        state = init_adam(tiny_model())
        for buf in list(state.m.values()) + list(state.v.values()):
            assert buf.dtype == np.float64
            assert np.all(buf == 0.0)

    def test_constants(self):
        state = AdamState()
        assert (state.beta1, state.beta2, state.eps) == (0.9, 0.999, 1e-8)


class TestAdamUpdate:
    def test_zero_grads_no_decay_is_identity(self):
        model = tiny_model(1)
        state = init_adam(model)
        before = snapshot(model)
        adam_update(model, zero_grads(model), state, Groups())
        for name, arr, _ in named_params(model):
            assert np.array_equal(arr, before[name]), name
        assert state.t == 1

    def test_zero_grads_with_decay_shrinks_by_group(self):
        model = tiny_model(2)
        state = init_adam(model)
        cfg = Groups(base_lr=0.1, ssm_lr=0.2, wd_ssm=0.5,
                     wd_dense_inputdep=0.25, wd_other=0.125)
        factors = {"ssm": 1.0 - 0.2 * 0.5,
                   "input_dep": 1.0 - 0.1 * 0.25,
                   "other": 1.0 - 0.1 * 0.125}
        before = snapshot(model)
        adam_update(model, zero_grads(model), state, cfg)
        for name, arr, group in named_params(model):
            assert np.allclose(arr, before[name] * factors[group],
                               rtol=1e-15, atol=0), name

    def test_first_step_magnitude_is_lr(self):
        """With fresh moments the bias-corrected step is lr * sign(g) up to
        the epsilon guard."""
        model = tiny_model(3)
        state = init_adam(model)
        grads = {name: np.full_like(arr, 2.0)
                 for name, arr, _ in named_params(model)}
        before = snapshot(model)
        adam_update(model, grads, state, Groups(base_lr=0.01, ssm_lr=0.03))
        for name, arr, group in named_params(model):
            lr = 0.03 if group == "ssm" else 0.01
            assert np.allclose(before[name] - arr, lr, rtol=1e-7, atol=0), name

    def test_constant_gradient_step_approaches_lr(self):
        model = tiny_model(4)
        state = init_adam(model)
        grads = {name: np.full_like(arr, -0.5)
                 for name, arr, _ in named_params(model)}
        cfg = Groups(base_lr=1e-3, ssm_lr=1e-3)
        for _ in range(1000):
            before = snapshot(model)
            adam_update(model, grads, state, cfg)
        for name, arr, _ in named_params(model):
            step = arr - before[name]
            assert np.allclose(step, 1e-3, rtol=0.01, atol=0), name

    def test_lr_factor_scales_step(self):
        ma, mb = tiny_model(5), tiny_model(5)
        sa, sb = init_adam(ma), init_adam(mb)
        grads = {name: np.full_like(arr, 1.0)
                 for name, arr, _ in named_params(ma)}
        cfg = Groups(base_lr=0.01, ssm_lr=0.01)
        before = snapshot(ma)
        adam_update(ma, grads, sa, cfg, lr_factor=1.0)
        adam_update(mb, grads, sb, cfg, lr_factor=0.25)
        for name, arr, _ in named_params(ma):
            full = before[name] - arr
            quarter = before[name] - dict(
                (n, a) for n, a, _ in named_params(mb))[name]
            assert np.allclose(quarter, 0.25 * full, rtol=1e-12), name

    def test_nan_gradient_aborts_atomically(self):
        model = tiny_model(6)
        state = init_adam(model)
        grads = zero_grads(model)
        grads["decoder"][0, 0] = np.nan
        before = snapshot(model)
        with pytest.raises(NumericError, match="decoder"):
            adam_update(model, grads, state, Groups(wd_ssm=0.9, wd_other=0.9,
                                                    wd_dense_inputdep=0.9))
        assert state.t == 0
        for name, arr, _ in named_params(model):
            assert np.array_equal(arr, before[name]), name
        for buf in list(state.m.values()) + list(state.v.values()):
            assert np.all(buf == 0.0)

    def test_inf_gradient_aborts(self):
        model = tiny_model(7)
        state = init_adam(model)
        grads = zero_grads(model)
        grads["layers.0.b_in"][1, 2] = np.inf
        with pytest.raises(NumericError, match="b_in"):
            adam_update(model, grads, state, Groups())

    def test_descends_a_quadratic(self):
        """Minimizing mean((params)^2) should shrink every parameter bundle
        toward zero."""
        model = tiny_model(8)
        state = init_adam(model)
        cfg = Groups(base_lr=0.05, ssm_lr=0.05)
        def sq_norm():
            return sum(float((a ** 2).sum()) for _, a, _ in named_params(model))
        start = sq_norm()
        for _ in range(200):
            grads = {name: 2.0 * arr for name, arr, _ in named_params(model)}
            adam_update(model, grads, state, cfg)
        assert sq_norm() < 0.01 * start
