"""Scikit-learn style front end over the sequence engine.

X is a list of (T, n_features) float arrays (a single (N, T, d) array also
works); sequences may have different lengths.  Targets:

    SequenceRegressor   per-step  -> list of (T, k) arrays
                        sequence  -> (N, k) array or list of (k,) vectors
    SequenceClassifier  one integer label per sequence

Optional per-sequence timestamps (strictly increasing seconds) switch the
recurrence to gap-aware stepping.  Estimators follow the usual contract:
all constructor arguments are stored verbatim, state learned by fit ends in
a trailing underscore, get_params/set_params/clone compose with the wider
ecosystem.
"""

from typing import List, Optional

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .datasets import DatasetSplits, SequenceSample
from .errors import ShapeError
from .model import ModelConfig, forward, init_model, param_count
from .seeding import derived_rng
from .trainer import TrainConfig, train

KEY_VAL_SPLIT = 3


def check_sequences(X) -> List[np.ndarray]:
    """Validate and normalize X to a list of float64 (T, d) arrays with one
    shared feature width."""
    if isinstance(X, np.ndarray) and X.ndim == 3:
        X = list(X)
    if not isinstance(X, (list, tuple)) or len(X) == 0:
        raise ShapeError("X must be a non-empty list of (T, n_features) arrays")
    out = []
    width = None
    for i, x in enumerate(X):
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[0] == 0:
            raise ShapeError(f"X[{i}] must be (T, n_features) with T >= 1, got {x.shape}")
        if not np.all(np.isfinite(x)):
            raise ShapeError(f"X[{i}] contains non-finite values")
        if width is None:
            width = x.shape[1]
        elif x.shape[1] != width:
            raise ShapeError(f"X[{i}] has {x.shape[1]} features, X[0] has {width}")
        out.append(x)
    return out


def check_timestamps(timestamps, X: List[np.ndarray]) -> Optional[List[np.ndarray]]:
    if timestamps is None:
        return None
    if len(timestamps) != len(X):
        raise ShapeError(f"{len(timestamps)} timestamp arrays for {len(X)} sequences")
    out = []
    for i, (ts, x) in enumerate(zip(timestamps, X)):
        ts = np.asarray(ts, dtype=np.float64)
        if ts.shape != (x.shape[0],):
            raise ShapeError(f"timestamps[{i}] shape {ts.shape} does not match length {x.shape[0]}")
        out.append(ts)
    return out


class _SequenceEstimator(BaseEstimator):
    def __init__(self, depth=1, d_model=16, state_size=16, input_dep_b=False,
                 input_dep_c=False, reparam_a=1.0, reparam_b=0.5,
                 reparam_enabled=True, base_lr=3e-3, ssm_lr=1e-2, wd_ssm=0.0,
                 wd_dense_inputdep=0.0, wd_other=0.0, epochs=100, batch_size=32,
                 validation_fraction=0.1, precision=64, random_state=0):
        self.depth = depth
        self.d_model = d_model
        self.state_size = state_size
        self.input_dep_b = input_dep_b
        self.input_dep_c = input_dep_c
        self.reparam_a = reparam_a
        self.reparam_b = reparam_b
        self.reparam_enabled = reparam_enabled
        self.base_lr = base_lr
        self.ssm_lr = ssm_lr
        self.wd_ssm = wd_ssm
        self.wd_dense_inputdep = wd_dense_inputdep
        self.wd_other = wd_other
        self.epochs = epochs
        self.batch_size = batch_size
        self.validation_fraction = validation_fraction
        self.precision = precision
        self.random_state = random_state

    _loss = "mse"

    def _check_fitted(self):
        if not hasattr(self, "model_"):
            raise NotFittedError(f"{type(self).__name__} is not fitted yet; call fit first")

    def _fit_samples(self, samples: List[SequenceSample], out_width, readout):
        timestamped = samples[0].timestamps is not None
        config = ModelConfig(
            in_width=samples[0].inputs.shape[1], out_width=out_width,
            depth=self.depth, d=self.d_model, m=self.state_size,
            input_dep_b=self.input_dep_b, input_dep_c=self.input_dep_c,
            readout=readout, reparam_a=self.reparam_a, reparam_b=self.reparam_b,
            reparam_enabled=self.reparam_enabled, timestamped=timestamped,
            precision=self.precision)
        n_val = int(round(self.validation_fraction * len(samples)))
        if n_val:
            order = derived_rng(self.random_state, KEY_VAL_SPLIT).permutation(len(samples))
            val_idx = set(order[:n_val].tolist())
            splits = DatasetSplits(
                train=[samples[i] for i in range(len(samples)) if i not in val_idx],
                val=[samples[i] for i in range(len(samples)) if i in val_idx])
        else:
            splits = DatasetSplits(train=list(samples))
        cfg = TrainConfig(base_lr=self.base_lr, ssm_lr=self.ssm_lr,
                          wd_ssm=self.wd_ssm, wd_dense_inputdep=self.wd_dense_inputdep,
                          wd_other=self.wd_other, epochs=self.epochs,
                          batch_size=self.batch_size, seed=self.random_state,
                          loss=self._loss, precision=self.precision)
        self.model_ = init_model(config, self.random_state)
        self.report_ = train(self.model_, splits, cfg)
        self.n_params_ = param_count(self.model_)
        return self

    def _forward_one(self, x, ts):
        dts = None
        if ts is not None:
            dts = np.empty_like(ts)
            dts[0] = ts[0]
            dts[1:] = np.diff(ts)
        out, _ = forward(self.model_, x, dts=dts)
        return out


class SequenceRegressor(_SequenceEstimator):
    """Sequence-in, real-values-out.  Per-step targets train a per-step
    readout; one vector per sequence trains a mean-pooled readout."""

    _loss = "mse"

    def fit(self, X, y, timestamps=None):
        X = check_sequences(X)
        ts = check_timestamps(timestamps, X)
        if len(y) != len(X):
            raise ShapeError(f"{len(y)} targets for {len(X)} sequences")
        y0 = np.asarray(y[0], dtype=np.float64)
        per_step = y0.ndim == 2 or (y0.ndim == 1 and y0.shape[0] == X[0].shape[0]
                                    and X[0].shape[0] > 1)
        samples = []
        for i, x in enumerate(X):
            yi = np.asarray(y[i], dtype=np.float64)
            if per_step:
                yi = yi.reshape(x.shape[0], -1)
            else:
                yi = yi.reshape(-1)
            samples.append(SequenceSample(x, yi, None if ts is None else ts[i]))
        self.per_step_ = per_step
        width = samples[0].target.shape[-1]
        return self._fit_samples(samples, width, "per_step" if per_step else "pooled")

    def predict(self, X, timestamps=None):
        self._check_fitted()
        X = check_sequences(X)
        ts = check_timestamps(timestamps, X)
        outs = [self._forward_one(x, None if ts is None else ts[i])
                for i, x in enumerate(X)]
        if self.per_step_:
            return outs
        return np.stack(outs)

    def score(self, X, y, timestamps=None):
        """Negative mean squared error (higher is better)."""
        preds = self.predict(X, timestamps)
        total, n = 0.0, 0
        for p, t in zip(preds, y):
            t = np.asarray(t, dtype=np.float64).reshape(np.shape(p))
            total += float(np.sum((p - t) ** 2))
            n += t.size
        return -total / n


class SequenceClassifier(_SequenceEstimator):
    """One label per sequence; softmax over a mean-pooled readout."""

    _loss = "cross_entropy"

    def fit(self, X, y, timestamps=None):
        X = check_sequences(X)
        ts = check_timestamps(timestamps, X)
        y = np.asarray(y)
        if y.shape != (len(X),):
            raise ShapeError(f"y must be ({len(X)},) labels, got {y.shape}")
        self.classes_, encoded = np.unique(y, return_inverse=True)
        samples = [SequenceSample(x, int(encoded[i]), None if ts is None else ts[i])
                   for i, x in enumerate(X)]
        return self._fit_samples(samples, len(self.classes_), "pooled")

    def decision_function(self, X, timestamps=None):
        self._check_fitted()
        X = check_sequences(X)
        ts = check_timestamps(timestamps, X)
        return np.stack([self._forward_one(x, None if ts is None else ts[i])
                         for i, x in enumerate(X)])

    def predict_proba(self, X, timestamps=None):
        from .kernels import softmax
        return softmax(self.decision_function(X, timestamps))

    def predict(self, X, timestamps=None):
        logits = self.decision_function(X, timestamps)
        return self.classes_[np.argmax(logits, axis=-1)]

    def score(self, X, y, timestamps=None):
        """Accuracy."""
        return float(np.mean(self.predict(X, timestamps) == np.asarray(y)))
