from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from contextlib import contextmanager
from dataclasses import asdict
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Iterator, Sequence

from dotenv import find_dotenv, load_dotenv
from threadpoolctl import threadpool_limits

from fdgnn.app.config import (
    AppConfig,
    ConfigError,
    EnvSettings,
    apply_overrides,
    check_model_fits,
    load_app_config,
    load_env_settings,
    resolve_data_root,
    resolve_log_level,
    resolve_threads,
)
from fdgnn.app.persistence import ModelFormatError, load_model, save_model
from fdgnn.app.runtime_state import RunState
from fdgnn.data.graphs import dataset_summary
from fdgnn.data.tudataset import DatasetError, dataset_checksum, parse_tudataset
from fdgnn.harness.folds import StratificationError
from fdgnn.harness.nested_cv import FoldError, nested_cv
from fdgnn.readout.model import accuracy, fit_model, predict_many
from fdgnn.report.reporter import ConsoleReporter, format_summary, write_report
from fdgnn.reservoir.weights import effective_spectral_radius
from fdgnn.state.models import ContractError, Dataset, ModelConfig

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_CONFIG = 2
EXIT_DATASET = 3
EXIT_MODEL = 4

COMMANDS = ("benchmark", "train", "predict", "inspect")
RUN_JSON = "run.json"
MODEL_FILE = "model.npz"
PREDICTIONS_FILE = "predictions.txt"


def _configure_logger(level: int = logging.INFO) -> logging.Logger:
    logger = logging.getLogger("fdgnn")
    logger.setLevel(level)
    if not logger.handlers:
        handler = logging.StreamHandler()
        handler.setFormatter(_JsonFormatter())
        logger.addHandler(handler)
    return logger


class _JsonFormatter(logging.Formatter):
    def format(self, record: logging.LogRecord) -> str:
        payload = {"level": record.levelname, "message": record.getMessage()}
        standard = {
            "name",
            "msg",
            "args",
            "levelname",
            "levelno",
            "pathname",
            "filename",
            "module",
            "exc_info",
            "exc_text",
            "stack_info",
            "lineno",
            "funcName",
            "created",
            "msecs",
            "relativeCreated",
            "thread",
            "threadName",
            "processName",
            "process",
            "taskName",
        }
        extras = {k: v for k, v in record.__dict__.items() if k not in standard}
        payload.update(extras)
        return json.dumps(payload, ensure_ascii=False, default=str)


def _load_dotenv() -> None:
    dotenv_path = find_dotenv(usecwd=True)
    if dotenv_path:
        load_dotenv(dotenv_path, override=False)


def _add_common_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--data-root", default=None, help="TUDataset root (env: fdgnn_data_root)")
    parser.add_argument("--config", type=Path, default=None)
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument(
        "--threads",
        type=int,
        default=None,
        help="Worker threads, 0 = all cores, 1 = sequential (env: fdgnn_threads)",
    )
    parser.add_argument("--out", type=Path, default=None, help="Output directory")
    parser.add_argument(
        "--log-level",
        default=None,
        help="Log level (default: INFO, env: log_level)",
    )
    parser.add_argument(
        "--debug-embedding",
        action="store_true",
        default=False,
        help="Log per-graph embedding diagnostics at DEBUG level",
    )


def _build_benchmark_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Nested cross-validation benchmark")
    parser.add_argument("--dataset", required=True)
    _add_common_arguments(parser)
    parser.add_argument("--configs", type=int, default=None, help="Sampled configurations per fold")
    parser.add_argument("--guesses", type=int, default=None, help="Weight re-instantiations per config")
    parser.add_argument("--folds", type=int, default=None, help="Outer folds (default: 10)")
    parser.add_argument("--inner-folds", type=int, default=None, help="Inner folds (default: 10)")
    parser.add_argument("--layers", type=int, default=None, help="Restrict the search to one depth")
    return parser


def _build_train_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Train a model on a whole dataset")
    parser.add_argument("--dataset", required=True)
    _add_common_arguments(parser)
    parser.add_argument("--model", type=Path, default=None, help=f"Model path (default: <out>/{MODEL_FILE})")
    return parser


def _build_predict_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Predict graph classes with a saved model")
    parser.add_argument("--dataset", required=True)
    parser.add_argument("--model", type=Path, required=True)
    _add_common_arguments(parser)
    return parser


def _build_inspect_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Summarize a dataset and/or a saved model")
    parser.add_argument("--dataset", default=None)
    parser.add_argument("--model", type=Path, default=None)
    _add_common_arguments(parser)
    return parser


def run(argv: list[str] | None = None) -> int:
    argv = argv if argv is not None else sys.argv[1:]
    _load_dotenv()
    command = argv[:1]
    if command == ["benchmark"]:
        return run_benchmark(argv[1:])
    if command == ["train"]:
        return run_train(argv[1:])
    if command == ["predict"]:
        return run_predict(argv[1:])
    if command == ["inspect"]:
        return run_inspect(argv[1:])
    sys.stderr.write(f"usage: fdgnn {{{','.join(COMMANDS)}}} [options]\n")
    return EXIT_CONFIG


def _prepare(
    args: argparse.Namespace, command: str
) -> tuple[logging.Logger, EnvSettings, AppConfig, RunState]:
    logger = _configure_logger(logging.INFO)
    settings = load_env_settings()
    config = load_app_config(args.config)
    config = apply_overrides(
        config,
        configs=getattr(args, "configs", None),
        guesses=getattr(args, "guesses", None),
        layers=getattr(args, "layers", None),
        folds=getattr(args, "folds", None),
        inner_folds=getattr(args, "inner_folds", None),
        seed=args.seed,
    )
    log_level = resolve_log_level(args.log_level, config.log_level, settings.log_level)
    if args.debug_embedding:
        log_level = min(log_level, logging.DEBUG)
    logger.setLevel(log_level)
    state = RunState(
        started_at=datetime.now(timezone.utc),
        pid=os.getpid(),
        command=command,
        dataset=getattr(args, "dataset", None),
        seed=config.protocol.seed,
    )
    return logger, settings, config, state


def _load_dataset(
    data_root: Path,
    name: str,
    state: RunState,
    logger: logging.Logger,
    require_labels: bool = True,
    node_categories: Sequence[int] | None = None,
) -> Dataset:
    with state.phase("load", logger):
        dataset = parse_tudataset(
            data_root,
            name,
            require_labels=require_labels,
            node_categories=node_categories,
            logger=logger,
        )
    state.update(dataset_checksum=dataset_checksum(data_root, name))
    logger.info(
        "dataset_checksum",
        extra={"dataset": name, "sha256": state.dataset_checksum, "seed": state.seed},
    )
    return dataset


def _write_run_json(out_dir: Path, state: RunState, extra: dict[str, Any]) -> Path:
    snapshot = state.snapshot()
    payload = {
        "command": snapshot.command,
        "dataset": snapshot.dataset,
        "seed": snapshot.seed,
        "dataset_checksum": snapshot.dataset_checksum,
        "started_at": snapshot.started_at.isoformat(),
        "phase_seconds": {key: round(value, 4) for key, value in snapshot.phase_seconds.items()},
        "last_error": snapshot.last_error,
        **extra,
    }
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / RUN_JSON
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return path


def _record_failure(
    state: RunState,
    out_dir: Path,
    logger: logging.Logger,
    event: str,
    exc: BaseException,
    **extra: Any,
) -> None:
    state.update(last_error=f"{type(exc).__name__}: {exc}")
    logger.error(event, extra={"error": str(exc), **extra})
    _write_run_json(out_dir, state, {"status": "failed"})


@contextmanager
def _native_threads(threads: int) -> Iterator[None]:
    # threads=0 leaves BLAS and OpenMP pools at their defaults
    if threads >= 1:
        with threadpool_limits(limits=threads):
            yield
    else:
        yield


def run_benchmark(argv: list[str]) -> int:
    args = _build_benchmark_parser().parse_args(argv)
    logger = _configure_logger(logging.INFO)
    try:
        logger, settings, config, state = _prepare(args, "benchmark")
        data_root = resolve_data_root(args.data_root, settings)
        threads = resolve_threads(args.threads, config.protocol.threads, settings.threads)
    except ConfigError as exc:
        logger.error("config_error", extra={"error": str(exc)})
        return EXIT_CONFIG

    out_dir = args.out or Path("fdgnn-out")
    try:
        dataset = _load_dataset(data_root, args.dataset, state, logger)
        model_cfg = config.model_config(dataset.name)
        check_model_fits(model_cfg, dataset.label_dim)
    except DatasetError as exc:
        _record_failure(state, out_dir, logger, "dataset_error", exc)
        return EXIT_DATASET
    except ConfigError as exc:
        _record_failure(state, out_dir, logger, "config_error", exc)
        return EXIT_CONFIG

    protocol = config.protocol
    logger.info(
        "effective_config",
        extra={
            "dataset": dataset.name,
            "model": asdict(model_cfg),
            "search": asdict(config.search),
            "outer_folds": protocol.outer_folds,
            "inner_folds": protocol.inner_folds,
            "seed": protocol.seed,
            "threads": threads,
            "regularize_bias": protocol.regularize_bias,
        },
    )
    try:
        with state.phase("nested_cv", logger), _native_threads(threads):
            report = nested_cv(
                dataset,
                config.search,
                model_cfg,
                outer_k=protocol.outer_folds,
                inner_k=protocol.inner_folds,
                seed=protocol.seed,
                threads=threads,
                regularize_bias=protocol.regularize_bias,
                reporter=ConsoleReporter(logger),
                logger=logger,
            )
    except StratificationError as exc:
        _record_failure(state, out_dir, logger, "dataset_error", exc)
        return EXIT_DATASET
    except FoldError as exc:
        if isinstance(exc.__cause__, StratificationError):
            _record_failure(state, out_dir, logger, "dataset_error", exc, fold=exc.fold)
            return EXIT_DATASET
        state.update(last_error=f"{type(exc).__name__}: {exc}")
        _write_run_json(out_dir, state, {"status": "failed"})
        raise

    with state.phase("report", logger):
        csv_path, txt_path = write_report(report, out_dir, dataset.name)
    _write_run_json(
        out_dir,
        state,
        {
            "model": asdict(model_cfg),
            "search": asdict(config.search),
            "protocol": asdict(protocol),
            "threads": threads,
            "mean_accuracy": report.mean_accuracy,
            "std_accuracy": report.std_accuracy,
            "mean_depth": report.mean_depth,
        },
    )
    sys.stdout.write(format_summary(report, dataset.name))
    logger.info(
        "benchmark_finished",
        extra={
            "mean_accuracy": round(report.mean_accuracy, 6),
            "std_accuracy": round(report.std_accuracy, 6),
            "report_csv": str(csv_path),
            "report_txt": str(txt_path),
        },
    )
    return EXIT_OK


def run_train(argv: list[str]) -> int:
    args = _build_train_parser().parse_args(argv)
    logger = _configure_logger(logging.INFO)
    try:
        logger, settings, config, state = _prepare(args, "train")
        data_root = resolve_data_root(args.data_root, settings)
        threads = resolve_threads(args.threads, config.protocol.threads, settings.threads)
    except ConfigError as exc:
        logger.error("config_error", extra={"error": str(exc)})
        return EXIT_CONFIG

    out_dir = args.out or Path("fdgnn-out")
    try:
        dataset = _load_dataset(data_root, args.dataset, state, logger)
        model_cfg = config.model_config(dataset.name)
        check_model_fits(model_cfg, dataset.label_dim)
        if dataset.num_classes < 2:
            raise DatasetError("training needs at least two classes")
    except DatasetError as exc:
        _record_failure(state, out_dir, logger, "dataset_error", exc)
        return EXIT_DATASET
    except ConfigError as exc:
        _record_failure(state, out_dir, logger, "config_error", exc)
        return EXIT_CONFIG

    model_cfg = ModelConfig(**{**asdict(model_cfg), "seed": config.protocol.seed})
    logger.info("effective_config", extra={"dataset": dataset.name, "model": asdict(model_cfg)})
    with _native_threads(threads):
        with state.phase("train", logger):
            model = fit_model(
                dataset,
                range(len(dataset)),
                model_cfg,
                threads=threads,
                regularize_bias=config.protocol.regularize_bias,
                logger=logger,
                debug=args.debug_embedding,
            )
        with state.phase("score", logger):
            train_accuracy = accuracy(
                predict_many(model, dataset.graphs, threads=threads), dataset.targets
            )
    model_path = args.model or out_dir / MODEL_FILE
    try:
        save_model(model, model_path)
    except OSError as exc:
        _record_failure(state, out_dir, logger, "model_error", exc, path=str(model_path))
        return EXIT_MODEL
    _write_run_json(
        out_dir,
        state,
        {"model": asdict(model_cfg), "model_path": str(model_path), "train_accuracy": train_accuracy},
    )
    logger.info(
        "model_saved",
        extra={"path": str(model_path), "train_accuracy": round(train_accuracy, 6)},
    )
    return EXIT_OK


def run_predict(argv: list[str]) -> int:
    args = _build_predict_parser().parse_args(argv)
    logger = _configure_logger(logging.INFO)
    try:
        logger, settings, config, state = _prepare(args, "predict")
        data_root = resolve_data_root(args.data_root, settings)
        threads = resolve_threads(args.threads, config.protocol.threads, settings.threads)
    except ConfigError as exc:
        logger.error("config_error", extra={"error": str(exc)})
        return EXIT_CONFIG

    try:
        model = load_model(args.model)
    except ModelFormatError as exc:
        logger.error("model_error", extra={"error": str(exc), "path": str(args.model)})
        return EXIT_MODEL
    try:
        # encode vertex labels over the training categories, not the ones present here
        dataset = _load_dataset(
            data_root,
            args.dataset,
            state,
            logger,
            require_labels=False,
            node_categories=model.node_categories or None,
        )
    except DatasetError as exc:
        logger.error("dataset_error", extra={"error": str(exc)})
        return EXIT_DATASET

    try:
        with state.phase("predict", logger), _native_threads(threads):
            labels = predict_many(
                model, dataset.graphs, threads=threads, logger=logger, debug=args.debug_embedding
            )
    except ContractError as exc:
        logger.error("model_error", extra={"error": str(exc), "path": str(args.model)})
        return EXIT_MODEL
    lines = "".join(f"{int(label)}\n" for label in labels)
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / PREDICTIONS_FILE).write_text(lines)
    else:
        sys.stdout.write(lines)
    logger.info("predictions_written", extra={"graphs": len(labels)})
    return EXIT_OK


def run_inspect(argv: list[str]) -> int:
    args = _build_inspect_parser().parse_args(argv)
    logger = _configure_logger(logging.INFO)
    if args.dataset is None and args.model is None:
        logger.error("config_error", extra={"error": "inspect needs --dataset and/or --model"})
        return EXIT_CONFIG
    try:
        logger, settings, config, state = _prepare(args, "inspect")
        data_root = resolve_data_root(args.data_root, settings) if args.dataset else None
    except ConfigError as exc:
        logger.error("config_error", extra={"error": str(exc)})
        return EXIT_CONFIG

    if args.dataset is not None and data_root is not None:
        try:
            dataset = _load_dataset(data_root, args.dataset, state, logger, require_labels=False)
        except DatasetError as exc:
            logger.error("dataset_error", extra={"error": str(exc)})
            return EXIT_DATASET
        summary = asdict(dataset_summary(dataset))
        summary["dataset"] = summary.pop("name")
        logger.info("dataset_summary", extra=summary)

    if args.model is not None:
        try:
            model = load_model(args.model)
        except ModelFormatError as exc:
            logger.error("model_error", extra={"error": str(exc), "path": str(args.model)})
            return EXIT_MODEL
        logger.info(
            "model_summary",
            extra={
                "path": str(args.model),
                "config": asdict(model.config),
                "num_classes": model.num_classes,
                "degree": model.degree,
                "label_dim": model.label_dim,
                "projection_dim": int(model.w_phi.shape[0]),
            },
        )
        for index, layer in enumerate(model.stack):
            logger.info(
                "layer_summary",
                extra={
                    "layer": index + 1,
                    "input_size": layer.input_size,
                    "hidden_size": layer.hidden_size,
                    "effective_spectral_radius": round(
                        effective_spectral_radius(layer, model.degree), 8
                    ),
                },
            )
    return EXIT_OK


def main() -> None:
    try:
        code = run()
    except KeyboardInterrupt:
        code = EXIT_UNEXPECTED
    except Exception as exc:  # noqa: BLE001
        logging.getLogger("fdgnn").exception("unexpected_error", extra={"error": str(exc)})
        code = EXIT_UNEXPECTED
    sys.exit(code)


if __name__ == "__main__":
    main()
