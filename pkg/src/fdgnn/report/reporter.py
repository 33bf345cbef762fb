from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass
from pathlib import Path

from fdgnn.state.models import CVReport, FoldResult, ModelConfig

CSV_COLUMNS = (
    "fold",
    "L",
    "H",
    "C",
    "rho",
    "omega1",
    "omega",
    "lambda",
    "test_accuracy",
    "train_seconds",
    "test_seconds",
)
TIMING_COLUMNS = ("train_seconds", "test_seconds")
REPORT_CSV = "report.csv"
REPORT_TXT = "report.txt"


class Reporter:
    def fold_selected(self, fold: int, config: ModelConfig, inner_score: float) -> None:
        raise NotImplementedError

    def fold_result(self, result: FoldResult) -> None:
        raise NotImplementedError


@dataclass
class ConsoleReporter(Reporter):
    logger: logging.Logger

    def fold_selected(self, fold: int, config: ModelConfig, inner_score: float) -> None:
        self.logger.info(
            "fold_selected",
            extra={
                "fold": fold,
                "num_layers": config.num_layers,
                "rho": round(config.rho, 6),
                "omega1": round(config.omega1, 6),
                "omega": round(config.omega, 6),
                "ridge_lambda": config.ridge_lambda,
                "inner_score": round(inner_score, 6),
            },
        )

    def fold_result(self, result: FoldResult) -> None:
        self.logger.info(
            "fold_result",
            extra={
                "fold": result.fold,
                "num_layers": result.config.num_layers,
                "test_accuracy": round(result.test_accuracy, 6),
                "train_seconds": round(result.train_seconds, 4),
                "test_seconds": round(result.test_seconds, 4),
            },
        )


def _row(result: FoldResult) -> dict[str, str]:
    cfg = result.config
    return {
        "fold": str(result.fold),
        "L": str(cfg.num_layers),
        "H": str(cfg.hidden_size),
        "C": str(cfg.connections),
        "rho": f"{cfg.rho:.10f}",
        "omega1": f"{cfg.omega1:.10f}",
        "omega": f"{cfg.omega:.10f}",
        "lambda": f"{cfg.ridge_lambda:.3e}",
        "test_accuracy": f"{result.test_accuracy:.6f}",
        "train_seconds": f"{result.train_seconds:.4f}",
        "test_seconds": f"{result.test_seconds:.4f}",
    }


def format_table(report: CVReport, include_timing: bool = True) -> str:
    columns = [
        column for column in CSV_COLUMNS if include_timing or column not in TIMING_COLUMNS
    ]
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=columns, extrasaction="ignore", lineterminator="\n")
    writer.writeheader()
    for result in report.per_fold:
        writer.writerow(_row(result))
    return buffer.getvalue()


def format_summary(report: CVReport, dataset_name: str | None = None) -> str:
    lines = []
    if dataset_name:
        lines.append(f"dataset: {dataset_name}")
    lines.extend(
        [
            f"folds: {len(report.per_fold)}",
            f"accuracy: {report.mean_accuracy:.4f} +- {report.std_accuracy:.4f}",
            f"depth: {report.mean_depth:.2f} +- {report.std_depth:.2f}",
            f"train seconds: {report.mean_train_seconds:.4f} +- {report.std_train_seconds:.4f}",
            f"test seconds: {report.mean_test_seconds:.4f} +- {report.std_test_seconds:.4f}",
        ]
    )
    for result in report.per_fold:
        lines.append(
            f"fold {result.fold}: L={result.config.num_layers} "
            f"lambda={result.config.ridge_lambda:.1e} "
            f"inner={result.inner_score:.4f} test={result.test_accuracy:.4f}"
        )
    return "\n".join(lines) + "\n"


def write_report(
    report: CVReport,
    out_dir: Path,
    dataset_name: str | None = None,
) -> tuple[Path, Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / REPORT_CSV
    txt_path = out_dir / REPORT_TXT
    csv_path.write_text(format_table(report))
    txt_path.write_text(format_summary(report, dataset_name))
    return csv_path, txt_path
