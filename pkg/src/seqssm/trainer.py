"""Training loop: seeded shuffling, cosine schedule, best-epoch selection.

Divergence is data, not an exception: a non-finite loss or gradient ends
the run cleanly and the report records at which epoch.  Shuffling, batch
grouping and reduction order are all fixed by (seed, config), so two runs
with the same inputs produce identical reports, bit for bit, up to the
wall-clock column.
"""

import json
import math
import time
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .backprop import LOSSES, loss_and_gradients, output_loss
from .datasets import SequenceSample
from .errors import ArgumentError, NumericError, ShapeError
from .model import Model, forward, set_params_from, snapshot_params
from .optim import adam_update, cosine_lr, init_adam
from .seeding import KEY_SHUFFLE, derived_rng


@dataclass(frozen=True)
class TrainConfig:
    base_lr: float = 3e-3
    ssm_lr: float = 1e-2
    wd_ssm: float = 0.0
    wd_dense_inputdep: float = 0.0
    wd_other: float = 0.0
    epochs: int = 100
    batch_size: int = 32
    seed: int = 0
    loss: str = "mse"
    precision: int = 32

    def __post_init__(self):
        if self.epochs < 1:
            raise ArgumentError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ArgumentError(f"batch_size must be >= 1, got {self.batch_size}")
        if min(self.base_lr, self.ssm_lr, self.wd_ssm, self.wd_dense_inputdep,
               self.wd_other) < 0:
            raise ArgumentError("learning rates and decay constants must be >= 0")
        if self.loss not in LOSSES:
            raise ArgumentError(f"loss must be one of {LOSSES}, got {self.loss!r}")
        if self.precision not in (32, 64):
            raise ArgumentError(f"precision must be 32 or 64, got {self.precision}")


@dataclass
class EpochRecord:
    epoch: int
    lr: float
    train_loss: Optional[float]
    val_metric: Optional[float]
    wall_ms: int


@dataclass
class TrainReport:
    records: List[EpochRecord] = field(default_factory=list)
    best_epoch: Optional[int] = None
    test_metric: Optional[float] = None
    diverged_epoch: Optional[int] = None

    def jsonl_lines(self) -> List[str]:
        lines = []
        for r in self.records:
            lines.append(json.dumps({
                "epoch": r.epoch, "lr": _finite_or_none(r.lr),
                "train_loss": _finite_or_none(r.train_loss),
                "val_metric": _finite_or_none(r.val_metric),
                "wall_ms": r.wall_ms,
            }))
        lines.append(json.dumps({
            "best_epoch": self.best_epoch,
            "test_metric": _finite_or_none(self.test_metric),
            "diverged_epoch": self.diverged_epoch,
        }))
        return lines

    def write_jsonl(self, path):
        with open(path, "w") as fh:
            fh.write("\n".join(self.jsonl_lines()) + "\n")


def _finite_or_none(x):
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else None


def _stack_batch(samples: List[SequenceSample], readout: str, loss_kind: str):
    """(T, B, d) inputs, targets, (T, B) dts or None; all samples must share
    one length, which batch grouping guarantees."""
    seq = np.stack([s.inputs for s in samples], axis=1)
    if any(s.timestamps is not None for s in samples) and \
       any(s.timestamps is None for s in samples):
        raise ShapeError("cannot batch timestamped and plain sequences together")
    dts = None
    if samples[0].timestamps is not None:
        dts = np.stack([s.dts() for s in samples], axis=1)
    if loss_kind == "cross_entropy":
        targets = np.array([int(s.target) for s in samples], dtype=np.int64)
    elif readout == "pooled":
        targets = np.stack([np.asarray(s.target, dtype=np.float64) for s in samples])
    else:
        targets = np.stack([np.asarray(s.target, dtype=np.float64).reshape(s.length, -1)
                            for s in samples], axis=1)
    return seq, targets, dts


def iter_batches(samples: List[SequenceSample], order, batch_size, readout, loss_kind):
    """Fixed-order batches; a chunk with mixed lengths splits into one
    sub-batch per length, preserving order, so stacking always works."""
    for i in range(0, len(order), batch_size):
        chunk = [samples[j] for j in order[i:i + batch_size]]
        by_len = {}
        for s in chunk:
            by_len.setdefault((s.length, s.timestamps is None), []).append(s)
        for group in by_len.values():
            yield _stack_batch(group, readout, loss_kind), len(group)


def evaluate(model: Model, samples: List[SequenceSample], loss_kind: str,
             batch_size: int):
    """(mean loss, metric) over samples; metric is the loss for mse and
    accuracy for cross-entropy."""
    if not samples:
        return None, None
    readout = model.config.readout
    total, n = 0.0, 0
    correct = 0
    for (seq, targets, dts), b in iter_batches(samples, range(len(samples)),
                                               batch_size, readout, loss_kind):
        out, _ = forward(model, seq, dts=dts)
        loss, _ = output_loss(out, targets, loss_kind)
        total += loss * b
        n += b
        if loss_kind == "cross_entropy":
            correct += int(np.sum(np.argmax(out, axis=-1) == targets))
    loss = total / n
    metric = (correct / n) if loss_kind == "cross_entropy" else loss
    return loss, metric


def train(model: Model, splits, cfg: TrainConfig, metrics_path=None) -> TrainReport:
    """Optimize in place; on return the model holds the best-validation
    epoch's parameters (last completed epoch when there is no validation
    split)."""
    if not splits.train:
        raise ArgumentError("training split is empty")
    readout = model.config.readout
    rng = derived_rng(cfg.seed, KEY_SHUFFLE)
    adam = init_adam(model)
    report = TrainReport()
    best = None  # (metric, epoch, snapshot)
    higher_better = cfg.loss == "cross_entropy"

    for epoch in range(cfg.epochs):
        t0 = time.perf_counter()
        factor = cosine_lr(epoch, cfg.epochs, 1.0)
        order = rng.permutation(len(splits.train))
        total, n = 0.0, 0
        diverged = False
        for (seq, targets, dts), b in iter_batches(splits.train, order,
                                                   cfg.batch_size, readout, cfg.loss):
            try:
                loss, grads, _, _ = loss_and_gradients(model, seq, targets, cfg.loss,
                                                       dts=dts)
                if not math.isfinite(loss):
                    raise NumericError(f"non-finite training loss {loss}")
                adam_update(model, grads, adam, cfg, factor)
            except NumericError:
                diverged = True
                break
            total += loss * b
            n += b
        train_loss = (total / n) if n else None

        val_metric = None
        if not diverged:
            try:
                _, val_metric = evaluate(model, splits.val, cfg.loss, cfg.batch_size)
            except NumericError:
                diverged = True
        wall_ms = int(round((time.perf_counter() - t0) * 1000))
        report.records.append(EpochRecord(epoch, cfg.base_lr * factor,
                                          train_loss, val_metric, wall_ms))
        if diverged:
            report.diverged_epoch = epoch
            break
        if val_metric is not None and math.isfinite(val_metric):
            better = best is None or (val_metric > best[0] if higher_better
                                      else val_metric < best[0])
            if better:
                best = (val_metric, epoch, snapshot_params(model))
        elif not splits.val:
            # no validation split: keep the last completed epoch
            best = (math.nan, epoch, snapshot_params(model))

    if best is not None:
        report.best_epoch = best[1]
        set_params_from(model, best[2])
        if splits.test:
            try:
                _, report.test_metric = evaluate(model, splits.test, cfg.loss,
                                                 cfg.batch_size)
            except NumericError:
                report.test_metric = None
    if metrics_path is not None:
        report.write_jsonl(metrics_path)
    return report
