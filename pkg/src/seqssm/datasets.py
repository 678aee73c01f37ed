"""Desk-scale synthetic tasks and the CSV interchange format.

All generators are deterministic in (config, seed) and emit float64; the
trainer casts to the working precision.  CSV files hold one or more
sequences separated by blank lines, full float precision (%.17g), so a
write/read round trip is exact.
"""

import csv
import os
from dataclasses import dataclass, field
from typing import List, Optional, Union

import numpy as np

from .errors import ArgumentError, GenerationError, IngestionError, ShapeError
from .seeding import KEY_ADDING, KEY_FHN_TEST, KEY_FHN_TRAIN, KEY_FHN_VAL, derived_rng

TARGET_KINDS = ("per_step", "vector", "class")


@dataclass
class SequenceSample:
    """inputs (T, n_features); target is a (T, k) array for per-step tasks,
    a (k,) array for sequence-level regression, or an int class label.
    timestamps, when present, are strictly increasing positive seconds."""

    inputs: np.ndarray
    target: Union[np.ndarray, int, None]
    timestamps: Optional[np.ndarray] = None

    def __post_init__(self):
        self.inputs = np.asarray(self.inputs, dtype=np.float64)
        if self.inputs.ndim != 2 or self.inputs.shape[0] == 0:
            raise ShapeError(f"sample inputs must be (T, d) with T >= 1, got {self.inputs.shape}")
        if not np.all(np.isfinite(self.inputs)):
            raise ShapeError("sample inputs contain non-finite values")
        if self.timestamps is not None:
            ts = np.asarray(self.timestamps, dtype=np.float64)
            if ts.shape != (self.inputs.shape[0],):
                raise ShapeError(f"timestamps {ts.shape} do not match inputs {self.inputs.shape}")
            if ts[0] <= 0 or np.any(np.diff(ts) <= 0):
                raise ShapeError("timestamps must be strictly increasing and positive")
            self.timestamps = ts

    @property
    def length(self) -> int:
        return self.inputs.shape[0]

    def dts(self) -> Optional[np.ndarray]:
        """Gaps in seconds; the first gap is measured from stream start 0."""
        if self.timestamps is None:
            return None
        out = np.empty_like(self.timestamps)
        out[0] = self.timestamps[0]
        out[1:] = np.diff(self.timestamps)
        return out


@dataclass
class DatasetSplits:
    train: List[SequenceSample] = field(default_factory=list)
    val: List[SequenceSample] = field(default_factory=list)
    test: List[SequenceSample] = field(default_factory=list)


# ---------------------------------------------------------------------------
# FitzHugh-Nagumo: slow-fast relaxation oscillator, classical RK4

@dataclass(frozen=True)
class FhnConfig:
    eps: float = 0.01     # recovery timescale; small = strongly slow-fast
    a: float = 0.7
    b: float = 0.8
    i_ext: float = 0.5    # constant drive; 0.5 sits in the oscillatory regime
    dt_sim: float = 0.04  # integrator step
    length: int = 1000    # emitted points per sequence
    subsample: int = 10   # integrator steps per emitted point
    train: int = 128
    val: int = 32
    test: int = 32


def fhn_rhs(state, cfg: FhnConfig):
    """state (..., 2) -> time derivative; v' = v - v^3/3 - w + I,
    w' = eps (v + a - b w)."""
    v = state[..., 0]
    w = state[..., 1]
    dv = v - v ** 3 / 3.0 - w + cfg.i_ext
    dw = cfg.eps * (v + cfg.a - cfg.b * w)
    return np.stack([dv, dw], axis=-1)


def fhn_rk4_step(state, dt, cfg: FhnConfig):
    k1 = fhn_rhs(state, cfg)
    k2 = fhn_rhs(state + 0.5 * dt * k1, cfg)
    k3 = fhn_rhs(state + 0.5 * dt * k2, cfg)
    k4 = fhn_rhs(state + dt * k3, cfg)
    return state + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def fhn_integrate(state0, n_steps, dt, cfg: FhnConfig):
    """Final state after n_steps of RK4 at step dt; state0 (..., 2)."""
    state = np.asarray(state0, dtype=np.float64)
    for _ in range(n_steps):
        state = fhn_rk4_step(state, dt, cfg)
    return state


def fhn_equilibria(cfg: FhnConfig):
    """Real fixed points as (v, w, stable) triples."""
    # v - v^3/3 - (v + a)/b + I = 0
    coeffs = [-1.0 / 3.0, 0.0, 1.0 - 1.0 / cfg.b, cfg.i_ext - cfg.a / cfg.b]
    out = []
    for r in np.roots(coeffs):
        if abs(r.imag) > 1e-9:
            continue
        v = float(r.real)
        w = (v + cfg.a) / cfg.b
        trace = (1.0 - v * v) - cfg.eps * cfg.b
        det = (1.0 - v * v) * (-cfg.eps * cfg.b) + cfg.eps
        out.append((v, w, trace < 0 and det > 0))
    return out


def _fhn_split(n, cfg: FhnConfig, rng, seed):
    if n == 0:
        return []
    ics = np.empty((n, 2))
    ics[:, 0] = rng.uniform(-2.0, 2.0, n)
    ics[:, 1] = rng.uniform(-0.5, 1.5, n)
    n_pts = cfg.length + 1
    traj = np.empty((n_pts, n, 2))
    traj[0] = ics
    state = ics
    for k in range(1, n_pts):
        for _ in range(cfg.subsample):
            state = fhn_rk4_step(state, cfg.dt_sim, cfg)
        traj[k] = state
    if not np.all(np.isfinite(traj)):
        raise GenerationError(f"fhn trajectory diverged (seed={seed})")
    # input: the fast variable; target: both variables one emitted step ahead
    return [SequenceSample(traj[:-1, i, 0:1], traj[1:, i, :]) for i in range(n)]


def fhn_generate(cfg: FhnConfig, seed: int) -> DatasetSplits:
    return DatasetSplits(
        train=_fhn_split(cfg.train, cfg, derived_rng(seed, KEY_FHN_TRAIN), seed),
        val=_fhn_split(cfg.val, cfg, derived_rng(seed, KEY_FHN_VAL), seed),
        test=_fhn_split(cfg.test, cfg, derived_rng(seed, KEY_FHN_TEST), seed),
    )


# ---------------------------------------------------------------------------
# Adding problem: recall two marked values from a long distractor stream

def adding_problem_generate(length: int, n_samples: int, seed: int) -> DatasetSplits:
    """Channel 0 holds uniform(0,1) values, channel 1 is zero except for two
    marker ones at distinct random positions; the target is the sum of the
    two marked values.  Splits are 80/10/10 in draw order."""
    if length < 2:
        raise ArgumentError(f"adding problem needs length >= 2, got {length}")
    rng = derived_rng(seed, KEY_ADDING)
    samples = []
    for _ in range(n_samples):
        inputs = np.zeros((length, 2))
        inputs[:, 0] = rng.uniform(0.0, 1.0, length)
        marks = rng.choice(length, size=2, replace=False)
        inputs[marks, 1] = 1.0
        target = np.array([inputs[marks, 0].sum()])
        samples.append(SequenceSample(inputs, target))
    n_train = int(0.8 * n_samples)
    n_val = int(0.1 * n_samples)
    return DatasetSplits(train=samples[:n_train],
                         val=samples[n_train:n_train + n_val],
                         test=samples[n_train + n_val:])


# ---------------------------------------------------------------------------
# CSV interchange

@dataclass(frozen=True)
class SequenceCsvSchema:
    features: int
    targets: int
    target_kind: str = "per_step"
    timestamps: bool = False

    def __post_init__(self):
        if self.features < 1 or self.targets < 1:
            raise ArgumentError("schema needs features >= 1 and targets >= 1")
        if self.target_kind not in TARGET_KINDS:
            raise ArgumentError(f"target_kind must be one of {TARGET_KINDS}")

    @property
    def header(self):
        return (["t"] + [f"f{i + 1}" for i in range(self.features)]
                + [f"y{i + 1}" for i in range(self.targets)])


def _fmt(x):
    return format(float(x), ".17g")


def write_sequence_csv(path, samples: List[SequenceSample], schema: SequenceCsvSchema):
    """One file, samples separated by a blank line, header once at the top.
    Sequence-level targets repeat on every row of their sample."""
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(schema.header)
        for s_i, s in enumerate(samples):
            if s_i:
                wr.writerow([])
            T = s.length
            ts = s.timestamps if schema.timestamps else np.arange(T, dtype=np.float64)
            if s.target is None:
                raise ArgumentError("cannot write a sample without a target")
            if schema.target_kind == "per_step":
                tgt_rows = np.asarray(s.target).reshape(T, schema.targets)
            elif schema.target_kind == "vector":
                tgt_rows = np.tile(np.asarray(s.target).reshape(1, schema.targets), (T, 1))
            else:
                tgt_rows = np.full((T, 1), float(s.target))
            for k in range(T):
                wr.writerow([_fmt(ts[k])] + [_fmt(v) for v in s.inputs[k]]
                            + [_fmt(v) for v in tgt_rows[k]])


def _block_to_sample(rows, schema: SequenceCsvSchema, path, line0):
    arr = np.asarray(rows, dtype=np.float64)
    ts = arr[:, 0]
    inputs = arr[:, 1:1 + schema.features]
    tgt = arr[:, 1 + schema.features:]
    if schema.timestamps and (ts[0] <= 0 or np.any(np.diff(ts) <= 0)):
        raise IngestionError(f"{path}:{line0}: timestamps not strictly increasing")
    if schema.target_kind == "per_step":
        target = tgt
    else:
        if np.any(tgt != tgt[0]):
            raise IngestionError(
                f"{path}:{line0}: sequence-level target varies within one sample")
        if schema.target_kind == "vector":
            target = tgt[0].copy()
        else:
            val = tgt[0, 0]
            if val != int(val):
                raise IngestionError(f"{path}:{line0}: class label {val} is not an integer")
            target = int(val)
    return SequenceSample(inputs, target, ts if schema.timestamps else None)


def load_sequence_csv_file(path, schema: SequenceCsvSchema) -> List[SequenceSample]:
    samples = []
    expect = schema.header
    with open(path, newline="") as fh:
        rd = csv.reader(fh)
        try:
            header = next(rd)
        except StopIteration:
            raise IngestionError(f"{path}:1: empty file, expected header {expect}")
        if header != expect:
            raise IngestionError(f"{path}:1: header {header} does not match schema {expect}")
        rows, line0 = [], 2
        for i, row in enumerate(rd, start=2):
            if not row:
                if rows:
                    samples.append(_block_to_sample(rows, schema, path, line0))
                rows, line0 = [], i + 1
                continue
            if len(row) != len(expect):
                raise IngestionError(f"{path}:{i}: expected {len(expect)} fields, got {len(row)}")
            try:
                rows.append([float(v) for v in row])
            except ValueError as e:
                raise IngestionError(f"{path}:{i}: {e}")
        if rows:
            samples.append(_block_to_sample(rows, schema, path, line0))
    return samples


def load_sequence_csv(path, schema: SequenceCsvSchema) -> DatasetSplits:
    """path is a directory holding train.csv / val.csv / test.csv."""
    if not os.path.isdir(path):
        raise IngestionError(f"{path}: expected a directory with train/val/test.csv")
    out = {}
    for split in ("train", "val", "test"):
        f = os.path.join(path, f"{split}.csv")
        if not os.path.isfile(f):
            raise IngestionError(f"{f}: missing split file")
        out[split] = load_sequence_csv_file(f, schema)
    return DatasetSplits(**out)


def write_splits_csv(path, splits: DatasetSplits, schema: SequenceCsvSchema):
    os.makedirs(path, exist_ok=True)
    for split in ("train", "val", "test"):
        write_sequence_csv(os.path.join(path, f"{split}.csv"), getattr(splits, split), schema)
