"""Command line interface.

Verbs: ``gen`` (synthetic benchmark datasets), ``train`` (fit a task
library from a dataset), ``predict`` (push one demo's human stream through
the dynamic pipeline and emit its blend trace), ``eval`` (the full
leave-one-out sweep), ``report`` (re-aggregate a records CSV). The flags
--seed, --config, and --out-dir are accepted both before and after the
verb.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
failure. Error lines carry a stable bracketed code naming the failure kind.
"""
import argparse
import dataclasses
import json
import sys
import time
from pathlib import Path

from . import io as data_io
from .config import (ExperimentConfig, default_config, load_config,
                     save_config)
from .errors import (ConfigError, DataError, DomainError, IPrompError,
                     NumericalError)
from .pipeline import (EXPERIMENT_SEED_OFFSETS, aggregate_records,
                       difference_curves, fit_library, run_dynamic,
                       run_loocv, selections_from_records)
from .promp import human_part
from .synthgen import make_benchmark

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4


def _exit_code(err: IPrompError) -> int:
    if isinstance(err, ConfigError):
        return EXIT_CONFIG
    if isinstance(err, NumericalError):
        return EXIT_NUMERICAL
    if isinstance(err, (DataError, DomainError)):
        return EXIT_DATA
    return EXIT_DATA


def _add_common(parser):
    parser.add_argument("--seed", type=int, default=argparse.SUPPRESS,
                        help="override the config seed")
    parser.add_argument("--config", default=argparse.SUPPRESS,
                        help="YAML configuration file")
    parser.add_argument("--out-dir", default=argparse.SUPPRESS,
                        help="output directory (default: out)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ipromp",
        description="Interaction movement primitives: synthetic benchmarks, "
                    "training, windowed prediction, and evaluation sweeps.")
    _add_common(parser)
    sub = parser.add_subparsers(dest="verb", required=True,
                                metavar="{gen,train,predict,eval,report}")

    gen = sub.add_parser("gen", help="generate synthetic benchmark datasets")
    _add_common(gen)
    gen.add_argument("--experiment", action="append",
                     choices=("distinct", "diverging"),
                     help="benchmark family; repeatable (default: from "
                          "config)")
    gen.add_argument("--inline", action="store_true",
                     help="store samples inline as text instead of an npz "
                          "sidecar")
    gen.set_defaults(func=cmd_gen)

    train = sub.add_parser("train", help="fit a task library from a dataset")
    _add_common(train)
    train.add_argument("--dataset", required=True, help="dataset JSON file")
    train.set_defaults(func=cmd_train)

    predict = sub.add_parser(
        "predict", help="run one human stream through the dynamic pipeline")
    _add_common(predict)
    predict.add_argument("--library", required=True,
                         help="library directory written by train")
    predict.add_argument("--dataset", required=True,
                         help="dataset holding the stream's demo")
    predict.add_argument("--demo", type=int, default=0,
                         help="demo index within the dataset (default 0)")
    predict.add_argument("--window", type=float, default=None,
                         help="observation window seconds (default: first "
                              "configured dynamic window)")
    predict.set_defaults(func=cmd_predict)

    ev = sub.add_parser("eval", help="leave-one-out sweep over benchmarks")
    _add_common(ev)
    ev.add_argument("--experiment", action="append",
                    choices=("distinct", "diverging"),
                    help="restrict to one benchmark family; repeatable")
    ev.set_defaults(func=cmd_eval)

    report = sub.add_parser(
        "report", help="re-aggregate a records CSV into summary tables")
    _add_common(report)
    report.add_argument("--records", required=True,
                        help="records.csv written by eval")
    report.set_defaults(func=cmd_report)
    return parser


def _resolve_config(args) -> ExperimentConfig:
    config_path = getattr(args, "config", None)
    cfg = load_config(config_path) if config_path else default_config()
    seed = getattr(args, "seed", None)
    if seed is not None:
        cfg = dataclasses.replace(cfg, seed=seed).validate()
    return cfg


def _benchmark_for(cfg, experiment):
    return make_benchmark(
        experiment, cfg.profile, cfg.resolved_n_demos(),
        cfg.seed + EXPERIMENT_SEED_OFFSETS[experiment],
        sample_rate=cfg.sample_rate)


def cmd_gen(args, cfg, out):
    experiments = tuple(args.experiment or cfg.experiments)
    for experiment in experiments:
        layout, _, demos_by_task = _benchmark_for(cfg, experiment)
        dataset = data_io.dataset_from_demos(
            layout, demos_by_task, cfg.sample_rate,
            name=f"{experiment}-{cfg.profile}")
        path = data_io.save_dataset(dataset,
                                    out / f"dataset_{experiment}.json",
                                    sidecar=not args.inline)
        print(f"wrote {path} ({dataset.n_demos} demos, "
              f"{len(dataset.task_ids)} tasks)")
    return EXIT_OK


def cmd_train(args, cfg, out):
    dataset = data_io.load_dataset(args.dataset)
    library = fit_library(dataset.by_task(), dataset.layout, cfg)
    directory = data_io.save_library(library, out / "library")
    print(f"wrote {directory} ({library.n_tasks} tasks: "
          f"{', '.join(library.task_ids)})")
    return EXIT_OK


def cmd_predict(args, cfg, out):
    library = data_io.load_library(args.library)
    dataset = data_io.load_dataset(args.dataset)
    if not (0 <= args.demo < dataset.n_demos):
        raise DataError(
            f"demo index {args.demo} outside the dataset's "
            f"{dataset.n_demos} demos")
    demo = dataset.demos[args.demo]
    stream = human_part(demo.trajectory, dataset.layout)
    window = args.window if args.window is not None else \
        cfg.windows.dynamic[0]
    record = run_dynamic(library, stream, window, cfg,
                         experiment=dataset.name, task_id=demo.task_id,
                         fold_id=args.demo)
    data_io.export_curves([record], out / "blend_trace.csv")
    data_io.save_prediction(record.final_prediction, out / "prediction.json")
    if record.executed is not None:
        data_io.save_prediction(record.executed, out / "executed.json")
    summary = {
        "demo": args.demo,
        "task_id": demo.task_id,
        "recognized_task": record.recognized_task,
        "alpha_est": record.alpha_est,
        "window": record.window,
        "n_windows": record.n_windows,
        "n_samples_used": record.n_samples_used,
    }
    data_io.write_json(out / "summary.json", summary)
    print(f"recognized {record.recognized_task!r} "
          f"(true {demo.task_id!r}), alpha {record.alpha_est:.4f}, "
          f"{record.n_windows} windows -> {out}")
    return EXIT_OK


def _write_report_tables(records, cfg, out):
    rows = aggregate_records(records)
    selections = selections_from_records(records, cfg)
    data_io.write_aggregate_csv(rows, out / "aggregate.csv")
    data_io.write_difference_csv(
        difference_curves(records, selections), out / "differences.csv")
    data_io.write_selection_json(selections, out / "selection.json")
    return selections


def cmd_eval(args, cfg, out):
    t0 = time.perf_counter()
    result = run_loocv(cfg, args.experiment)
    if not result.records:
        first = result.failures[0].message if result.failures else "no runs"
        raise NumericalError(f"evaluation produced no records ({first})")
    data_io.write_records_csv(result.records, out / "records.csv")
    data_io.export_curves(result.records, out / "window_traces.csv")
    selections = _write_report_tables(result.records, cfg, out)
    save_config(cfg, out / "config.yaml")
    info = {
        "n_records": len(result.records),
        "n_failures": len(result.failures),
        "failures": [dataclasses.asdict(f) for f in result.failures],
        "wall_times_s": {k: round(v, 3)
                         for k, v in result.wall_times.items()},
        "total_wall_time_s": round(time.perf_counter() - t0, 3),
    }
    data_io.write_json(out / "run_info.json", info)
    for experiment, wall in result.wall_times.items():
        selection = selections.get(experiment)
        best = selection.best_window if selection else None
        print(f"{experiment}: {wall:.1f}s, selected window {best}")
    if result.failures:
        print(f"{len(result.failures)} folds failed; see run_info.json",
              file=sys.stderr)
    print(f"wrote {out / 'aggregate.csv'}")
    return EXIT_OK


def cmd_report(args, cfg, out):
    records = data_io.read_records_csv(args.records)
    if not records:
        raise DataError(f"{args.records} holds no records")
    _write_report_tables(records, cfg, out)
    print(f"wrote {out / 'aggregate.csv'} "
          f"({len(records)} records re-aggregated)")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _resolve_config(args)
        out = Path(getattr(args, "out_dir", "out"))
        out.mkdir(parents=True, exist_ok=True)
        return args.func(args, cfg, out)
    except IPrompError as err:
        print(f"ipromp: error [{err.code}]: {err}", file=sys.stderr)
        return _exit_code(err)


if __name__ == "__main__":
    sys.exit(main())
