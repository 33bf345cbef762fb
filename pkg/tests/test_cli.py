from __future__ import annotations

import csv
import json
import logging
from pathlib import Path

import pytest

from threadpoolctl import threadpool_info

from conftest import TUWriter, toy_graph_specs
from fdgnn.app import main as app_main

SMALL_CONFIG = "hidden_size: 6\nlambda_grid: [0.01, 1.0]\n"


@pytest.fixture(autouse=True)
def isolated(monkeypatch: pytest.MonkeyPatch, tmp_path: Path) -> None:
    for name in ("fdgnn_threads", "fdgnn_data_root", "log_level"):
        for variant in (name, name.upper()):
            monkeypatch.setenv(variant, "")
            monkeypatch.delenv(variant)
    workdir = tmp_path / "work"
    workdir.mkdir()
    monkeypatch.chdir(workdir)


@pytest.fixture
def toy_root(tudataset_writer: TUWriter) -> Path:
    return tudataset_writer("TOY", toy_graph_specs(per_class=6))


@pytest.fixture
def config_path(tmp_path: Path) -> Path:
    path = tmp_path / "config.yaml"
    path.write_text(SMALL_CONFIG)
    return path


def _benchmark_args(root: Path, config: Path, out: Path) -> list[str]:
    return [
        "benchmark",
        "--dataset",
        "TOY",
        "--data-root",
        str(root),
        "--config",
        str(config),
        "--configs",
        "2",
        "--guesses",
        "1",
        "--folds",
        "3",
        "--inner-folds",
        "2",
        "--seed",
        "4",
        "--out",
        str(out),
    ]


def test_unknown_command_is_usage_error(capsys: pytest.CaptureFixture[str]) -> None:
    assert app_main.run(["serve"]) == app_main.EXIT_CONFIG
    assert "usage: fdgnn" in capsys.readouterr().err
    assert app_main.run([]) == app_main.EXIT_CONFIG


def test_parsers_share_common_options() -> None:
    args = app_main._build_benchmark_parser().parse_args(["--dataset", "MUTAG", "--threads", "0"])
    assert args.threads == 0
    assert args.layers is None
    assert not args.debug_embedding
    predict_args = app_main._build_predict_parser().parse_args(
        ["--dataset", "X", "--model", "m.npz", "--debug-embedding"]
    )
    assert predict_args.debug_embedding


def test_benchmark_writes_report(
    toy_root: Path, config_path: Path, tmp_path: Path, capsys: pytest.CaptureFixture[str]
) -> None:
    out = tmp_path / "out"

    code = app_main.run(_benchmark_args(toy_root, config_path, out))

    assert code == app_main.EXIT_OK
    rows = list(csv.DictReader((out / "report.csv").open()))
    assert len(rows) == 3
    assert {row["H"] for row in rows} == {"6"}
    assert "accuracy:" in (out / "report.txt").read_text()
    run_info = json.loads((out / "run.json").read_text())
    assert run_info["command"] == "benchmark"
    assert run_info["seed"] == 4
    assert len(run_info["dataset_checksum"]) == 64
    assert "nested_cv" in run_info["phase_seconds"]
    assert run_info["last_error"] is None
    assert "dataset: TOY" in capsys.readouterr().out


def test_benchmark_is_reproducible(toy_root: Path, config_path: Path, tmp_path: Path) -> None:
    first = tmp_path / "first"
    second = tmp_path / "second"
    assert app_main.run(_benchmark_args(toy_root, config_path, first)) == app_main.EXIT_OK
    assert app_main.run(_benchmark_args(toy_root, config_path, second)) == app_main.EXIT_OK

    def stable(path: Path) -> list[dict[str, str]]:
        rows = list(csv.DictReader(path.open()))
        for row in rows:
            row.pop("train_seconds")
            row.pop("test_seconds")
        return rows

    assert stable(first / "report.csv") == stable(second / "report.csv")


def test_benchmark_without_data_root(config_path: Path) -> None:
    code = app_main.run(["benchmark", "--dataset", "TOY", "--config", str(config_path)])
    assert code == app_main.EXIT_CONFIG


def test_benchmark_with_bad_config(toy_root: Path, tmp_path: Path) -> None:
    path = tmp_path / "bad.yaml"
    path.write_text("rho: 2.0\n")
    code = app_main.run(
        ["benchmark", "--dataset", "TOY", "--data-root", str(toy_root), "--config", str(path)]
    )
    assert code == app_main.EXIT_CONFIG


def test_benchmark_missing_dataset(tmp_path: Path, config_path: Path) -> None:
    code = app_main.run(
        ["benchmark", "--dataset", "NOPE", "--data-root", str(tmp_path), "--config", str(config_path)]
    )
    assert code == app_main.EXIT_DATASET


def test_benchmark_class_too_small_for_folds(
    tudataset_writer: TUWriter, config_path: Path, tmp_path: Path
) -> None:
    root = tudataset_writer("RARE", [(2, [(0, 1)], 0)] * 10 + [(3, [(0, 1)], 1)] * 2)
    out = tmp_path / "out"
    args = _benchmark_args(root, config_path, out)
    args[2] = "RARE"

    assert app_main.run(args) == app_main.EXIT_DATASET

    run_info = json.loads((out / "run.json").read_text())
    assert run_info["status"] == "failed"
    assert run_info["last_error"].startswith("StratificationError: class 1 has 2 member")


def test_train_then_predict(
    toy_root: Path, config_path: Path, tmp_path: Path, caplog: pytest.LogCaptureFixture
) -> None:
    model_path = tmp_path / "model.npz"
    out = tmp_path / "pred"
    with caplog.at_level(logging.INFO, logger="fdgnn"):
        train_code = app_main.run(
            [
                "train",
                "--dataset",
                "TOY",
                "--data-root",
                str(toy_root),
                "--config",
                str(config_path),
                "--model",
                str(model_path),
                "--out",
                str(tmp_path / "train"),
            ]
        )
    assert train_code == app_main.EXIT_OK
    assert model_path.is_file()
    saved = [r for r in caplog.records if r.message == "model_saved"]
    assert saved and 0.0 <= saved[0].train_accuracy <= 1.0  # type: ignore[attr-defined]

    predict_code = app_main.run(
        [
            "predict",
            "--dataset",
            "TOY",
            "--data-root",
            str(toy_root),
            "--model",
            str(model_path),
            "--out",
            str(out),
        ]
    )

    assert predict_code == app_main.EXIT_OK
    lines = (out / "predictions.txt").read_text().split()
    assert len(lines) == 12
    assert set(lines) <= {"0", "1"}


def test_predict_to_stdout(
    toy_root: Path, config_path: Path, tmp_path: Path, capsys: pytest.CaptureFixture[str]
) -> None:
    model_path = tmp_path / "model.npz"
    base = ["--dataset", "TOY", "--data-root", str(toy_root)]
    assert app_main.run(["train", *base, "--config", str(config_path), "--model", str(model_path)]) == 0
    capsys.readouterr()

    assert app_main.run(["predict", *base, "--model", str(model_path)]) == app_main.EXIT_OK

    assert len(capsys.readouterr().out.split()) == 12


def test_predict_with_corrupt_model(toy_root: Path, tmp_path: Path) -> None:
    model_path = tmp_path / "model.npz"
    model_path.write_bytes(b"not a model")
    code = app_main.run(
        ["predict", "--dataset", "TOY", "--data-root", str(toy_root), "--model", str(model_path)]
    )
    assert code == app_main.EXIT_MODEL


def test_predict_with_mismatched_labels(
    toy_root: Path, config_path: Path, tudataset_writer: TUWriter, tmp_path: Path
) -> None:
    model_path = tmp_path / "model.npz"
    assert (
        app_main.run(
            [
                "train",
                "--dataset",
                "TOY",
                "--data-root",
                str(toy_root),
                "--config",
                str(config_path),
                "--model",
                str(model_path),
            ]
        )
        == 0
    )
    labeled_root = tudataset_writer("LAB", [(2, [(0, 1)], 0), (2, [(0, 1)], 1)], node_labels=[1, 2, 3, 1])

    code = app_main.run(
        ["predict", "--dataset", "LAB", "--data-root", str(labeled_root), "--model", str(model_path)]
    )

    assert code == app_main.EXIT_MODEL


def test_inspect_dataset_and_model(
    toy_root: Path, config_path: Path, tmp_path: Path, caplog: pytest.LogCaptureFixture
) -> None:
    model_path = tmp_path / "model.npz"
    base = ["--dataset", "TOY", "--data-root", str(toy_root)]
    assert app_main.run(["train", *base, "--config", str(config_path), "--model", str(model_path)]) == 0
    caplog.clear()

    with caplog.at_level(logging.INFO, logger="fdgnn"):
        code = app_main.run(["inspect", *base, "--model", str(model_path)])

    assert code == app_main.EXIT_OK
    summary = next(r for r in caplog.records if r.message == "dataset_summary")
    assert summary.num_graphs == 12  # type: ignore[attr-defined]
    layers = [r for r in caplog.records if r.message == "layer_summary"]
    assert len(layers) == 1
    assert 0.0 < layers[0].effective_spectral_radius < 1.0  # type: ignore[attr-defined]


def test_inspect_needs_a_target() -> None:
    assert app_main.run(["inspect"]) == app_main.EXIT_CONFIG


def test_main_exits_with_run_code(monkeypatch: pytest.MonkeyPatch) -> None:
    monkeypatch.setattr(app_main, "run", lambda argv=None: app_main.EXIT_DATASET)
    with pytest.raises(SystemExit) as excinfo:
        app_main.main()
    assert excinfo.value.code == app_main.EXIT_DATASET


def test_main_maps_unexpected_errors(monkeypatch: pytest.MonkeyPatch) -> None:
    def broken(argv: list[str] | None = None) -> int:
        raise RuntimeError("boom")

    monkeypatch.setattr(app_main, "run", broken)
    with pytest.raises(SystemExit) as excinfo:
        app_main.main()
    assert excinfo.value.code == app_main.EXIT_UNEXPECTED


def test_connections_wider_than_labels(toy_root: Path, tmp_path: Path) -> None:
    path = tmp_path / "wide.yaml"
    path.write_text("hidden_size: 6\nconnections: 2\n")
    code = app_main.run(
        ["train", "--dataset", "TOY", "--data-root", str(toy_root), "--config", str(path)]
    )
    assert code == app_main.EXIT_CONFIG


def test_predict_on_held_out_directory_uses_training_categories(
    tudataset_writer: TUWriter, config_path: Path, tmp_path: Path
) -> None:
    specs = toy_graph_specs(per_class=6)
    node_labels: list[int] = []
    for index, (size, _, _) in enumerate(specs):
        # the first four graphs only carry labels 2 and 3
        node_labels.extend(2 + v % 2 if index < 4 else 1 + v % 3 for v in range(size))
    held_out_size = sum(size for size, _, _ in specs[:4])
    root = tudataset_writer("FULL", specs, node_labels=node_labels)
    tudataset_writer("PART", specs[:4], node_labels=node_labels[:held_out_size])
    model_path = tmp_path / "model.npz"
    train_args = ["--dataset", "FULL", "--data-root", str(root), "--config", str(config_path)]
    assert app_main.run(["train", *train_args, "--model", str(model_path)]) == app_main.EXIT_OK

    def predict(name: str) -> list[str]:
        out = tmp_path / f"pred-{name}"
        args = ["--dataset", name, "--data-root", str(root), "--model", str(model_path)]
        assert app_main.run(["predict", *args, "--out", str(out)]) == app_main.EXIT_OK
        return (out / "predictions.txt").read_text().split()

    assert predict("PART") == predict("FULL")[:4]


def test_benchmark_limits_native_thread_pools(
    toy_root: Path, config_path: Path, tmp_path: Path, monkeypatch: pytest.MonkeyPatch
) -> None:
    seen: list[list[dict[str, object]]] = []
    original = app_main.nested_cv

    def recording(*args: object, **kwargs: object) -> object:
        seen.append(threadpool_info())
        return original(*args, **kwargs)  # type: ignore[arg-type]

    monkeypatch.setattr(app_main, "nested_cv", recording)

    args = _benchmark_args(toy_root, config_path, tmp_path / "out")
    assert app_main.run([*args, "--threads", "1"]) == app_main.EXIT_OK

    assert len(seen) == 1
    assert all(pool["num_threads"] == 1 for pool in seen[0])
