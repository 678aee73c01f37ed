"""Event-camera style streams: sparse (t, x, y, polarity) records.

Tokenization folds position and polarity into one integer:

    token = 2 * (x * s_y + y) + (p + 1) / 2

which is a bijection onto [0, 2 * s_x * s_y); both polarities of every
pixel get distinct tokens.  Streams feed the model as (one-hot token, dt)
pairs; the gaps drive the timestamp-aware transition.
"""

import csv
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from .datasets import DatasetSplits, SequenceSample
from .errors import ArgumentError, IngestionError
from .seeding import KEY_EVENTS, derived_rng


@dataclass(frozen=True)
class EventRecord:
    t: int  # microseconds, nondecreasing within a stream
    x: int
    y: int
    p: int  # -1 or +1


def _check_sensor(s_x, s_y):
    if s_x < 1 or s_y < 1:
        raise ArgumentError(f"sensor must be at least 1x1, got {s_x}x{s_y}")


def tokenize_event(x, y, p, s_x, s_y) -> int:
    _check_sensor(s_x, s_y)
    if not (0 <= x < s_x and 0 <= y < s_y):
        raise ArgumentError(f"event ({x},{y}) outside {s_x}x{s_y} sensor")
    if p not in (-1, 1):
        raise ArgumentError(f"polarity must be -1 or +1, got {p}")
    return 2 * (x * s_y + y) + (p + 1) // 2


def detokenize(token, s_x, s_y) -> Tuple[int, int, int]:
    _check_sensor(s_x, s_y)
    n = 2 * s_x * s_y
    if not 0 <= token < n:
        raise ArgumentError(f"token {token} outside [0, {n})")
    p = 2 * (token % 2) - 1
    cell = token // 2
    return cell // s_y, cell % s_y, p


def vocab_size(s_x, s_y) -> int:
    return 2 * s_x * s_y


def load_events_csv(path, s_x, s_y) -> List[EventRecord]:
    """Header t,x,y,p; integer microsecond timestamps, nondecreasing."""
    _check_sensor(s_x, s_y)
    out: List[EventRecord] = []
    with open(path, newline="") as fh:
        rd = csv.reader(fh)
        try:
            header = next(rd)
        except StopIteration:
            raise IngestionError(f"{path}:1: empty file, expected header t,x,y,p")
        if header != ["t", "x", "y", "p"]:
            raise IngestionError(f"{path}:1: header {header}, expected ['t', 'x', 'y', 'p']")
        prev_t = None
        for i, row in enumerate(rd, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise IngestionError(f"{path}:{i}: expected 4 fields, got {len(row)}")
            try:
                t, x, y, p = (int(v) for v in row)
            except ValueError as e:
                raise IngestionError(f"{path}:{i}: {e}")
            if p not in (-1, 1):
                raise IngestionError(f"{path}:{i}: polarity {p} not in {{-1, +1}}")
            if not (0 <= x < s_x and 0 <= y < s_y):
                raise IngestionError(f"{path}:{i}: event ({x},{y}) outside {s_x}x{s_y} sensor")
            if prev_t is not None and t < prev_t:
                raise IngestionError(f"{path}:{i}: timestamp {t} decreases (previous {prev_t})")
            prev_t = t
            out.append(EventRecord(t, x, y, p))
    return out


def events_to_token_stream(events: List[EventRecord], s_x, s_y):
    """(tokens, dts): integer tokens and gaps in seconds; the first gap is
    measured from t = 0."""
    tokens = np.array([tokenize_event(e.x, e.y, e.p, s_x, s_y) for e in events],
                      dtype=np.int64)
    t_sec = np.array([e.t for e in events], dtype=np.float64) * 1e-6
    dts = np.empty_like(t_sec)
    if len(events):
        dts[0] = t_sec[0]
        dts[1:] = np.diff(t_sec)
    return tokens, dts


@dataclass(frozen=True)
class EventStreamConfig:
    s_x: int = 8
    s_y: int = 8
    n_classes: int = 3
    events_per_stream: int = 200
    streams_per_class: int = 40
    mean_dt: float = 0.005  # seconds between events

    def __post_init__(self):
        _check_sensor(self.s_x, self.s_y)
        if self.n_classes < 2 or self.events_per_stream < 1 or self.streams_per_class < 1:
            raise ArgumentError(f"bad event stream config: {self}")


def _class_template(cfg: EventStreamConfig, c):
    """Each class is a blob orbiting its own anchor with its own polarity
    flip rate; anchors sit on a circle so far-apart classes do not overlap."""
    ang = 2.0 * np.pi * c / cfg.n_classes
    big = min(cfg.s_x, cfg.s_y) / 3.5
    cx = (cfg.s_x - 1) / 2.0 + big * np.cos(ang)
    cy = (cfg.s_y - 1) / 2.0 + big * np.sin(ang)
    orbit = min(cfg.s_x, cfg.s_y) / 10.0
    omega = 2.0 * np.pi * (1.0 + 0.5 * c)   # orbital rad/s
    pol_freq = 2.0 + c                      # polarity flips per second
    return cx, cy, orbit, omega, pol_freq


def synth_stream_events(cfg: EventStreamConfig, c, rng) -> List[EventRecord]:
    n = cfg.events_per_stream
    cx, cy, orbit, omega, pol_freq = _class_template(cfg, c)
    gaps_us = np.maximum(np.rint(rng.exponential(cfg.mean_dt, n) * 1e6), 1.0).astype(np.int64)
    t_us = np.cumsum(gaps_us)
    t = t_us * 1e-6
    phase = rng.uniform(0.0, 2.0 * np.pi)
    px = cx + orbit * np.cos(omega * t + phase) + rng.integers(-1, 2, n)
    py = cy + orbit * np.sin(omega * t + phase) + rng.integers(-1, 2, n)
    xs = np.clip(np.rint(px), 0, cfg.s_x - 1).astype(int)
    ys = np.clip(np.rint(py), 0, cfg.s_y - 1).astype(int)
    ps = np.where(np.sin(2.0 * np.pi * pol_freq * t + phase) >= 0, 1, -1)
    return [EventRecord(int(t_us[i]), int(xs[i]), int(ys[i]), int(ps[i])) for i in range(n)]


def _stream_to_sample(events: List[EventRecord], label, s_x, s_y) -> SequenceSample:
    tokens, _ = events_to_token_stream(events, s_x, s_y)
    onehot = np.zeros((len(events), vocab_size(s_x, s_y)))
    onehot[np.arange(len(events)), tokens] = 1.0
    ts = np.array([e.t for e in events], dtype=np.float64) * 1e-6
    return SequenceSample(onehot, int(label), ts)


def event_stream_synthesize(cfg: EventStreamConfig, seed: int) -> DatasetSplits:
    """streams_per_class per class, split 80/10/10 per class in draw order."""
    rng = derived_rng(seed, KEY_EVENTS)
    per_class = [[synth_stream_events(cfg, c, rng) for _ in range(cfg.streams_per_class)]
                 for c in range(cfg.n_classes)]
    splits = DatasetSplits()
    n_train = int(0.8 * cfg.streams_per_class)
    n_val = int(0.1 * cfg.streams_per_class)
    for c, streams in enumerate(per_class):
        for i, ev in enumerate(streams):
            sample = _stream_to_sample(ev, c, cfg.s_x, cfg.s_y)
            if i < n_train:
                splits.train.append(sample)
            elif i < n_train + n_val:
                splits.val.append(sample)
            else:
                splits.test.append(sample)
    return splits


def write_events_csv(path, events: List[EventRecord]):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["t", "x", "y", "p"])
        for e in events:
            wr.writerow([e.t, e.x, e.y, e.p])
