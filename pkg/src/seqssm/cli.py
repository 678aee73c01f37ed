"""Command-line front end.

Five subcommands share one config format: ``train`` fits a model and writes
metrics plus a checkpoint, ``eval`` reloads a checkpoint and scores the test
split, ``gradcheck`` runs the derivative oracle suite and dumps diagnostic
CSVs, ``ablate`` trains the configured squash variants on shared data, and
``tokenize`` streams an event CSV as ``token,dt`` rows.

Exit codes: 0 success, 1 runtime failure (including a failed gradcheck),
2 config error.
"""

import argparse
import sys
from contextlib import nullcontext
from pathlib import Path

from threadpoolctl import threadpool_limits

from .config import RunConfig, load_run_config, replace_seed
from .datasets import adding_problem_generate, fhn_generate, load_sequence_csv
from .errors import (ArgumentError, CheckpointVersionError, ConfigError,
                     DomainError, GenerationError, IngestionError,
                     NumericError, ShapeError)
from .events import (event_stream_synthesize, events_to_token_stream,
                     load_events_csv, vocab_size)
from .gradcheck import gf_sweep, gradcheck_suite, gradient_ratio_table
from .model import (ModelConfig, init_model, load_checkpoint, param_count,
                    save_checkpoint)
from .reparam import ReparamConfig
from .trainer import _stack_batch, evaluate, train


def _g17(x):
    return "none" if x is None else format(float(x), ".17g")


def _build_data(rc: RunConfig):
    """(splits, in_width, out_width, readout, timestamped) for a trainable
    task; the events-format csv task has no model side and is rejected."""
    seed = rc.train.seed
    if rc.task_name == "fhn":
        return fhn_generate(rc.task, seed), 1, 2, "per_step", False
    if rc.task_name == "adding":
        return (adding_problem_generate(rc.task.length, rc.task.n_samples, seed),
                2, 1, "pooled", False)
    if rc.task_name == "events":
        width = vocab_size(rc.task.s_x, rc.task.s_y)
        return event_stream_synthesize(rc.task, seed), width, rc.task.n_classes, \
            "pooled", True
    if rc.task.format != "sequence":
        raise ConfigError("task csv/events has no model; only tokenize accepts it")
    if rc.paths.data is None:
        raise ConfigError("paths.data: required for the csv task")
    schema = rc.task.schema
    splits = load_sequence_csv(rc.paths.data, schema)
    if schema.target_kind == "class":
        labels = [int(s.target) for split in (splits.train, splits.val, splits.test)
                  for s in split]
        out_width = max(labels) + 1
        readout = "pooled"
    else:
        out_width = schema.targets
        readout = "per_step" if schema.target_kind == "per_step" else "pooled"
    return splits, schema.features, out_width, readout, schema.timestamps


def _model_config(rc: RunConfig, in_width, out_width, readout, timestamped,
                  *, precision=None, variant=None):
    rp = rc.reparam if variant is None else variant
    return ModelConfig(
        in_width=in_width, out_width=out_width, depth=rc.model.depth,
        d=rc.model.d, m=rc.model.m, input_dep_b=rc.model.input_dep_b,
        input_dep_c=rc.model.input_dep_c, readout=readout,
        reparam_a=rp.a, reparam_b=rp.b, reparam_enabled=rp.enabled,
        timestamped=timestamped,
        precision=rc.train.precision if precision is None else precision)


def _out_dir(rc: RunConfig, args) -> Path:
    out = Path(args.out if args.out else rc.paths.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_train(rc: RunConfig, args) -> int:
    out = _out_dir(rc, args)
    splits, in_w, out_w, readout, timestamped = _build_data(rc)
    model = init_model(_model_config(rc, in_w, out_w, readout, timestamped),
                       seed=rc.train.seed)
    print(f"train: task={rc.task_name} params={param_count(model)} "
          f"epochs={rc.train.epochs} seed={rc.train.seed}")
    report = train(model, splits, rc.train, metrics_path=out / "metrics.jsonl")
    save_checkpoint(out / "checkpoint.npz", model)
    if report.diverged_epoch is not None:
        print(f"diverged_epoch {report.diverged_epoch}")
    print(f"best_epoch {report.best_epoch}")
    print(f"test_metric {_g17(report.test_metric)}")
    print(f"wrote {out / 'metrics.jsonl'} and {out / 'checkpoint.npz'}")
    return 0


def cmd_eval(rc: RunConfig, args) -> int:
    if rc.paths.checkpoint is None:
        raise ConfigError("paths.checkpoint: required for eval")
    try:
        model = load_checkpoint(rc.paths.checkpoint)
    except CheckpointVersionError as e:
        print(f"checkpoint {rc.paths.checkpoint} has format version {e.found}; "
              f"this build reads version {e.expected}", file=sys.stderr)
        return 1
    splits, _, _, _, _ = _build_data(rc)
    loss, metric = evaluate(model, splits.test, rc.train.loss, rc.train.batch_size)
    print(f"eval: task={rc.task_name} params={param_count(model)} "
          f"test_sequences={len(splits.test)}")
    print(f"test_loss {_g17(loss)}")
    print(f"test_metric {_g17(metric)}")
    return 0


def cmd_gradcheck(rc: RunConfig, args) -> int:
    out = _out_dir(rc, args)
    report = gradcheck_suite(seed=rc.train.seed)
    for line in report.lines():
        print(line)

    # diagnostic tables from a fresh 64-bit model on one real task batch
    splits, in_w, out_w, readout, timestamped = _build_data(rc)
    model = init_model(_model_config(rc, in_w, out_w, readout, timestamped,
                                     precision=64), seed=rc.train.seed)
    seq, targets, dts = _stack_batch(splits.train[:1], readout, rc.train.loss)
    rows = gradient_ratio_table(model, seq, targets, rc.train.loss, dts=dts)
    with open(out / "gradient_ratio.csv", "w") as fh:
        fh.write("layer,index,grad_abs,deriv_abs,ratio\n")
        for r in rows:
            fh.write(f"{r.layer},{r.index},{_g17(r.grad_abs)},"
                     f"{_g17(r.deriv_abs)},{_g17(r.ratio)}\n")
    sweep = gf_sweep(ReparamConfig(a=rc.reparam.a, b=rc.reparam.b,
                                   form=rc.reparam.form))
    with open(out / "gf_sweep.csv", "w") as fh:
        fh.write("w,f,f_prime,ratio\n")
        for w, f, fp, ratio in sweep:
            fh.write(f"{_g17(w)},{_g17(f)},{_g17(fp)},{_g17(ratio)}\n")
    print(f"wrote {out / 'gradient_ratio.csv'} and {out / 'gf_sweep.csv'}")
    return 0 if report.passed else 1


def cmd_ablate(rc: RunConfig, args) -> int:
    if rc.ablate is None:
        raise ConfigError("ablate: section required for the ablate command")
    out = _out_dir(rc, args)
    splits, in_w, out_w, readout, timestamped = _build_data(rc)
    rows = []
    for i, v in enumerate(rc.ablate):
        model = init_model(_model_config(rc, in_w, out_w, readout, timestamped,
                                         variant=v), seed=rc.train.seed)
        report = train(model, splits, rc.train,
                       metrics_path=out / f"variant{i}.metrics.jsonl")
        best_val = None
        if report.best_epoch is not None:
            best_val = report.records[report.best_epoch].val_metric
        rows.append((v, report.best_epoch, best_val, report.test_metric,
                     report.diverged_epoch))

    with open(out / "ablation.csv", "w") as fh:
        fh.write("enabled,a,b,best_epoch,best_val,test_metric,diverged_epoch\n")
        for v, best_epoch, best_val, test_metric, diverged in rows:
            fh.write(",".join([
                str(v.enabled).lower(), _g17(v.a), _g17(v.b),
                "" if best_epoch is None else str(best_epoch),
                "" if best_val is None else _g17(best_val),
                "" if test_metric is None else _g17(test_metric),
                "" if diverged is None else str(diverged)]) + "\n")

    print(f"ablation: task={rc.task_name} variants={len(rows)}")
    print(f"{'enabled':<8} {'a':>6} {'b':>6} {'best_epoch':>10} "
          f"{'best_val':>12} {'test_metric':>12} {'diverged':>8}")
    for v, best_epoch, best_val, test_metric, diverged in rows:
        print(f"{str(v.enabled):<8} {v.a:>6g} {v.b:>6g} "
              f"{'-' if best_epoch is None else best_epoch:>10} "
              f"{'-' if best_val is None else format(best_val, '.6g'):>12} "
              f"{'-' if test_metric is None else format(test_metric, '.6g'):>12} "
              f"{'-' if diverged is None else diverged:>8}")
    print(f"wrote {out / 'ablation.csv'}")
    return 0


def cmd_tokenize(rc: RunConfig, args) -> int:
    if rc.task_name != "csv" or rc.task.format != "events":
        raise ConfigError("tokenize: task must be csv with format 'events'")
    if rc.paths.data is None:
        raise ConfigError("paths.data: required for tokenize")
    events = load_events_csv(rc.paths.data, rc.task.s_x, rc.task.s_y)
    tokens, dts = events_to_token_stream(events, rc.task.s_x, rc.task.s_y)
    for tok, dt in zip(tokens, dts):
        print(f"{tok},{dt:.9g}")
    return 0


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="seqssm",
                                description="input-adaptive state-space sequence models")
    sub = p.add_subparsers(dest="command", required=True)
    for name, func, doc in (
            ("train", cmd_train, "fit a model; write metrics.jsonl and checkpoint.npz"),
            ("eval", cmd_eval, "score a saved checkpoint on the test split"),
            ("gradcheck", cmd_gradcheck, "run the derivative oracle suite"),
            ("ablate", cmd_ablate, "train the configured squash variants"),
            ("tokenize", cmd_tokenize, "print an event CSV as token,dt rows")):
        sp = sub.add_parser(name, help=doc)
        sp.add_argument("--config", required=True, help="JSON run config")
        sp.add_argument("--out", default=None,
                        help="output directory (default: paths.out from the config)")
        sp.add_argument("--seed", type=int, default=None,
                        help="override train.seed from the config")
        sp.add_argument("--threads", type=int, default=None,
                        help="cap BLAS/OpenMP thread pools")
        sp.set_defaults(func=func)
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        rc = load_run_config(args.config)
        if args.seed is not None:
            rc = replace_seed(rc, args.seed)
        limit = threadpool_limits(limits=args.threads) if args.threads else nullcontext()
        with limit:
            return args.func(rc, args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except (ArgumentError, DomainError, ShapeError, IngestionError,
            CheckpointVersionError, GenerationError, NumericError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
