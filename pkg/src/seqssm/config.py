"""Strict JSON run configs: unknown keys, missing keys, duplicate keys and
type mismatches are all errors that name the offending field.  Nothing is
defaulted silently; a config spells out every knob of its run."""

import dataclasses
import json
from dataclasses import dataclass
from typing import List, Optional

from .datasets import TARGET_KINDS, FhnConfig, SequenceCsvSchema
from .errors import ConfigError
from .events import EventStreamConfig
from .reparam import FORMS
from .trainer import TrainConfig

SCHEMA_VERSION = 1

TASKS = ("fhn", "adding", "events", "csv")
CSV_FORMATS = ("sequence", "events")


@dataclass(frozen=True)
class AddingSpec:
    length: int
    n_samples: int


@dataclass(frozen=True)
class CsvSpec:
    format: str
    schema: Optional[SequenceCsvSchema]  # sequence format only
    s_x: int = 0                         # events format only
    s_y: int = 0


@dataclass(frozen=True)
class ReparamSpec:
    enabled: bool
    a: float
    b: float
    form: str


@dataclass(frozen=True)
class ModelSpec:
    depth: int
    d: int
    m: int
    input_dep_b: bool
    input_dep_c: bool


@dataclass(frozen=True)
class PathsSpec:
    data: Optional[str]
    out: str
    checkpoint: Optional[str]


@dataclass(frozen=True)
class AblateVariant:
    enabled: bool
    a: float
    b: float


@dataclass(frozen=True)
class RunConfig:
    task_name: str
    task: object            # FhnConfig | AddingSpec | EventStreamConfig | CsvSpec
    model: ModelSpec
    reparam: ReparamSpec
    train: TrainConfig
    paths: PathsSpec
    ablate: Optional[List[AblateVariant]]


def _no_dupes(pairs):
    seen = {}
    for k, v in pairs:
        if k in seen:
            raise ConfigError(f"duplicate key {k!r}")
        seen[k] = v
    return seen


def _section(obj, path, required, optional=()):
    if not isinstance(obj, dict):
        raise ConfigError(f"{path}: expected an object")
    unknown = set(obj) - set(required) - set(optional)
    if unknown:
        raise ConfigError(f"{path}: unknown key(s) {sorted(unknown)}")
    missing = set(required) - set(obj)
    if missing:
        raise ConfigError(f"{path}: missing key(s) {sorted(missing)}")
    return obj


def _typed(obj, path, key, kinds, allow_none=False):
    v = obj[key]
    if v is None and allow_none:
        return None
    if isinstance(v, bool) and bool not in kinds:
        raise ConfigError(f"{path}.{key}: expected {kinds}, got a boolean")
    if not isinstance(v, tuple(kinds)):
        names = "/".join(k.__name__ for k in kinds)
        raise ConfigError(f"{path}.{key}: expected {names}, got {v!r}")
    return v


def _pos_int(obj, path, key, minimum=1):
    v = _typed(obj, path, key, (int,))
    if v < minimum:
        raise ConfigError(f"{path}.{key}: must be >= {minimum}, got {v}")
    return v


def _num(obj, path, key):
    return float(_typed(obj, path, key, (int, float)))


def _parse_task(obj):
    name = _typed(obj, "task", "name", (str,)) if "name" in obj else None
    if name not in TASKS:
        raise ConfigError(f"task.name: expected one of {TASKS}, got {name!r}")
    if name == "fhn":
        _section(obj, "task", ("name", "length", "subsample", "dt_sim", "eps", "a",
                               "b", "i_ext", "train", "val", "test"))
        spec = FhnConfig(
            eps=_num(obj, "task", "eps"), a=_num(obj, "task", "a"),
            b=_num(obj, "task", "b"), i_ext=_num(obj, "task", "i_ext"),
            dt_sim=_num(obj, "task", "dt_sim"),
            length=_pos_int(obj, "task", "length"),
            subsample=_pos_int(obj, "task", "subsample"),
            train=_pos_int(obj, "task", "train"),
            val=_pos_int(obj, "task", "val", 0), test=_pos_int(obj, "task", "test", 0))
    elif name == "adding":
        _section(obj, "task", ("name", "length", "n_samples"))
        spec = AddingSpec(length=_pos_int(obj, "task", "length", 2),
                          n_samples=_pos_int(obj, "task", "n_samples", 10))
    elif name == "events":
        _section(obj, "task", ("name", "s_x", "s_y", "n_classes", "events_per_stream",
                               "streams_per_class", "mean_dt"))
        spec = EventStreamConfig(
            s_x=_pos_int(obj, "task", "s_x"), s_y=_pos_int(obj, "task", "s_y"),
            n_classes=_pos_int(obj, "task", "n_classes", 2),
            events_per_stream=_pos_int(obj, "task", "events_per_stream"),
            streams_per_class=_pos_int(obj, "task", "streams_per_class"),
            mean_dt=_num(obj, "task", "mean_dt"))
    else:
        fmt = _typed(obj, "task", "format", (str,)) if "format" in obj else None
        if fmt not in CSV_FORMATS:
            raise ConfigError(f"task.format: expected one of {CSV_FORMATS}, got {fmt!r}")
        if fmt == "sequence":
            _section(obj, "task", ("name", "format", "features", "targets",
                                   "target_kind", "timestamps"))
            kind = _typed(obj, "task", "target_kind", (str,))
            if kind not in TARGET_KINDS:
                raise ConfigError(f"task.target_kind: expected one of {TARGET_KINDS}")
            spec = CsvSpec("sequence", SequenceCsvSchema(
                features=_pos_int(obj, "task", "features"),
                targets=_pos_int(obj, "task", "targets"),
                target_kind=kind,
                timestamps=_typed(obj, "task", "timestamps", (bool,))))
        else:
            _section(obj, "task", ("name", "format", "s_x", "s_y"))
            spec = CsvSpec("events", None, s_x=_pos_int(obj, "task", "s_x"),
                           s_y=_pos_int(obj, "task", "s_y"))
    return name, spec


def task_is_timestamped(name, spec) -> Optional[bool]:
    """Whether the task drives the gap-aware transition; None when the task
    never feeds a model (events-format csv)."""
    if name == "events":
        return True
    if name == "csv":
        return spec.schema.timestamps if spec.format == "sequence" else None
    return False


def task_loss(name, spec) -> Optional[str]:
    if name in ("fhn", "adding"):
        return "mse"
    if name == "events":
        return "cross_entropy"
    if spec.format == "sequence":
        return "cross_entropy" if spec.schema.target_kind == "class" else "mse"
    return None


def parse_run_config(obj) -> RunConfig:
    _section(obj, "config", ("schema_version", "task", "model", "reparam",
                             "train", "paths"), optional=("ablate",))
    version = _typed(obj, "config", "schema_version", (int,))
    if version != SCHEMA_VERSION:
        raise ConfigError(f"schema_version: this reader expects {SCHEMA_VERSION}, got {version}")

    task_name, task = _parse_task(obj["task"])

    mo = _section(obj["model"], "model", ("depth", "d", "m", "input_dep_b", "input_dep_c"))
    model = ModelSpec(depth=_pos_int(mo, "model", "depth", 0),
                      d=_pos_int(mo, "model", "d"), m=_pos_int(mo, "model", "m"),
                      input_dep_b=_typed(mo, "model", "input_dep_b", (bool,)),
                      input_dep_c=_typed(mo, "model", "input_dep_c", (bool,)))

    ro = _section(obj["reparam"], "reparam", ("enabled", "a", "b", "form"))
    form = _typed(ro, "reparam", "form", (str,))
    if form not in FORMS:
        raise ConfigError(f"reparam.form: expected one of {FORMS}, got {form!r}")
    a = _num(ro, "reparam", "a")
    b = _num(ro, "reparam", "b")
    if a <= 0 or b <= 0:
        raise ConfigError(f"reparam: a and b must be positive, got a={a} b={b}")
    reparam = ReparamSpec(enabled=_typed(ro, "reparam", "enabled", (bool,)), a=a, b=b,
                          form=form)
    timestamped = task_is_timestamped(task_name, task)
    if timestamped is not None:
        want = "continuous" if timestamped else "discrete"
        if form != want:
            raise ConfigError(
                f"reparam.form: task {task_name!r} steps "
                f"{'with' if timestamped else 'without'} timestamps and needs "
                f"{want!r}, got {form!r}")

    to = _section(obj["train"], "train",
                  ("base_lr", "ssm_lr", "wd_ssm", "wd_dense_inputdep", "wd_other",
                   "epochs", "batch_size", "seed", "loss", "precision"))
    loss = _typed(to, "train", "loss", (str,))
    expected_loss = task_loss(task_name, task)
    if expected_loss is not None and loss != expected_loss:
        raise ConfigError(f"train.loss: task {task_name!r} needs {expected_loss!r}, got {loss!r}")
    try:
        train = TrainConfig(
            base_lr=_num(to, "train", "base_lr"), ssm_lr=_num(to, "train", "ssm_lr"),
            wd_ssm=_num(to, "train", "wd_ssm"),
            wd_dense_inputdep=_num(to, "train", "wd_dense_inputdep"),
            wd_other=_num(to, "train", "wd_other"),
            epochs=_pos_int(to, "train", "epochs"),
            batch_size=_pos_int(to, "train", "batch_size"),
            seed=_pos_int(to, "train", "seed", 0), loss=loss,
            precision=_typed(to, "train", "precision", (int,)))
    except ValueError as e:
        raise ConfigError(f"train: {e}")

    po = _section(obj["paths"], "paths", ("data", "out", "checkpoint"))
    paths = PathsSpec(data=_typed(po, "paths", "data", (str,), allow_none=True),
                      out=_typed(po, "paths", "out", (str,)),
                      checkpoint=_typed(po, "paths", "checkpoint", (str,), allow_none=True))

    ablate = None
    if "ablate" in obj:
        ao = _section(obj["ablate"], "ablate", ("variants",))
        raw = _typed(ao, "ablate", "variants", (list,))
        if not raw:
            raise ConfigError("ablate.variants: must list at least one variant")
        ablate = []
        for i, v in enumerate(raw):
            vo = _section(v, f"ablate.variants[{i}]", ("enabled", "a", "b"))
            va = _num(vo, f"ablate.variants[{i}]", "a")
            vb = _num(vo, f"ablate.variants[{i}]", "b")
            if va <= 0 or vb <= 0:
                raise ConfigError(f"ablate.variants[{i}]: a and b must be positive")
            ablate.append(AblateVariant(
                enabled=_typed(vo, f"ablate.variants[{i}]", "enabled", (bool,)),
                a=va, b=vb))

    return RunConfig(task_name, task, model, reparam, train, paths, ablate)


def load_run_config(path) -> RunConfig:
    try:
        with open(path) as fh:
            obj = json.load(fh, object_pairs_hook=_no_dupes)
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}")
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON: {e}")
    except ConfigError as e:
        raise ConfigError(f"{path}: {e}")
    try:
        return parse_run_config(obj)
    except ConfigError as e:
        raise ConfigError(f"{path}: {e}")


def replace_seed(rc: RunConfig, seed: int) -> RunConfig:
    return dataclasses.replace(rc, train=dataclasses.replace(rc.train, seed=seed))
