from __future__ import annotations

import logging
import time
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
import numpy.typing as npt
from joblib import Parallel, delayed

from fdgnn.data.graphs import encode_targets, scaling_degree
from fdgnn.embedding.engine import resolve_jobs
from fdgnn.harness.folds import Split, stratified_folds
from fdgnn.harness.search import SearchSpace, sample_configs
from fdgnn.readout.model import (
    accuracy,
    classes_from_outputs,
    extract_features,
    init_network,
    outputs_for,
)
from fdgnn.readout.ridge import fit_ridge
from fdgnn.report.reporter import Reporter
from fdgnn.reservoir.weights import derive_seed
from fdgnn.state.models import (
    ContractError,
    CVReport,
    Dataset,
    FloatArray,
    FoldResult,
    IntArray,
    ModelConfig,
    TargetMatrix,
)

SELECTION_STREAM = 4
RETRAIN_STREAM = 5
INNER_FOLD_STREAM = 6
CONFIG_STREAM = 7


class FoldError(RuntimeError):
    def __init__(self, fold: int, cause: BaseException) -> None:
        super().__init__(f"outer fold {fold} failed: {cause}")
        self.fold = fold


@dataclass(frozen=True)
class ConfigScore:
    index: int
    config: ModelConfig
    lambda_scores: tuple[float, ...]

    @property
    def best_lambda_index(self) -> int:
        # np.argmax keeps the first, i.e. smallest-index, lambda on ties
        return int(np.argmax(self.lambda_scores))

    @property
    def score(self) -> float:
        return self.lambda_scores[self.best_lambda_index]


def guess_seeds(master_seed: int, stream: int, fold: int, guesses: int) -> tuple[int, ...]:
    return tuple(derive_seed(master_seed, stream, fold, guess) for guess in range(guesses))


def score_lambdas(
    train_features: FloatArray,
    train_targets: TargetMatrix,
    val_features: FloatArray,
    val_classes: npt.ArrayLike,
    lambda_grid: Sequence[float],
    regularize_bias: bool = True,
) -> FloatArray:
    scores = np.empty(len(lambda_grid), dtype=np.float64)
    for position, ridge_lambda in enumerate(lambda_grid):
        w_out = fit_ridge(train_features, train_targets, ridge_lambda, regularize_bias)
        predicted = classes_from_outputs(outputs_for(w_out, val_features))
        scores[position] = accuracy(predicted, val_classes)
    return scores


def evaluate_lambdas(
    cfg: ModelConfig,
    splits: Sequence[Split],
    dataset: Dataset,
    guesses: int,
    lambda_grid: Sequence[float],
    *,
    fold: int = 0,
    degree: float | None = None,
    regularize_bias: bool = True,
) -> FloatArray:
    """Mean validation accuracy per lambda over ``splits`` and guesses.

    ``splits`` index into ``dataset``; every graph of ``dataset`` is embedded
    once per guess and reused by all splits.
    """
    k = scaling_degree(dataset) if degree is None else degree
    totals = np.zeros(len(lambda_grid), dtype=np.float64)
    runs = 0
    for seed in guess_seeds(cfg.seed, SELECTION_STREAM, fold, guesses):
        guess_cfg = replace(cfg, seed=seed)
        stack, w_phi = init_network(guess_cfg, dataset.label_dim, k)
        features = extract_features(stack, w_phi, dataset.graphs, guess_cfg.embedding_config())
        for train_idx, val_idx in splits:
            totals += score_lambdas(
                features[:, train_idx],
                encode_targets(dataset.targets[train_idx], dataset.num_classes),
                features[:, val_idx],
                dataset.targets[val_idx],
                lambda_grid,
                regularize_bias,
            )
            runs += 1
    return totals / runs


def evaluate_config(
    cfg: ModelConfig,
    train_idx: npt.ArrayLike,
    val_idx: npt.ArrayLike,
    dataset: Dataset,
    guesses: int,
    *,
    fold: int = 0,
    degree: float | None = None,
) -> float:
    train = np.asarray(train_idx, dtype=np.int64)
    val = np.asarray(val_idx, dtype=np.int64)
    if np.intersect1d(train, val).size:
        raise ContractError("train and validation indices overlap")
    local = (np.arange(len(train)), np.arange(len(train), len(train) + len(val)))
    scores = evaluate_lambdas(
        cfg,
        [local],
        dataset.subset(np.concatenate([train, val])),
        guesses,
        (cfg.ridge_lambda,),
        fold=fold,
        degree=degree,
    )
    return float(scores[0])


def select_config(scores: Sequence[ConfigScore]) -> ConfigScore:
    """Highest inner score; ties go to fewer layers, then to the earlier sample."""
    return min(scores, key=lambda item: (-item.score, item.config.num_layers, item.index))


def _search_fold(
    outer_train: Dataset,
    configs: Sequence[ModelConfig],
    space: SearchSpace,
    inner_k: int,
    fold: int,
    seed: int,
    degree: float,
    threads: int,
    regularize_bias: bool,
) -> list[ConfigScore]:
    inner_splits = stratified_folds(
        outer_train.targets, inner_k, derive_seed(seed, INNER_FOLD_STREAM, fold)
    )

    def score(index: int, cfg: ModelConfig) -> ConfigScore:
        values = evaluate_lambdas(
            cfg,
            inner_splits,
            outer_train,
            space.guesses,
            space.lambda_grid,
            fold=fold,
            degree=degree,
            regularize_bias=regularize_bias,
        )
        return ConfigScore(index=index, config=cfg, lambda_scores=tuple(float(v) for v in values))

    jobs = resolve_jobs(threads)
    if jobs == 1:
        return [score(index, cfg) for index, cfg in enumerate(configs)]
    scored: list[ConfigScore] = Parallel(n_jobs=jobs, prefer="threads")(
        delayed(score)(index, cfg) for index, cfg in enumerate(configs)
    )
    return scored


def _retrain_and_test(
    cfg: ModelConfig,
    dataset: Dataset,
    train_idx: IntArray,
    test_idx: IntArray,
    guesses: int,
    fold: int,
    degree: float,
    threads: int,
    regularize_bias: bool,
) -> tuple[float, float, float]:
    train = dataset.subset(train_idx)
    test = dataset.subset(test_idx)
    train_targets = encode_targets(train.targets, dataset.num_classes)
    accuracies: list[float] = []
    train_seconds = 0.0
    test_seconds = 0.0
    for seed in guess_seeds(cfg.seed, RETRAIN_STREAM, fold, guesses):
        guess_cfg = replace(cfg, seed=seed)
        embed_cfg = guess_cfg.embedding_config()
        started = time.perf_counter()
        stack, w_phi = init_network(guess_cfg, dataset.label_dim, degree)
        train_features = extract_features(stack, w_phi, train.graphs, embed_cfg, threads=threads)
        w_out = fit_ridge(train_features, train_targets, cfg.ridge_lambda, regularize_bias)
        trained_at = time.perf_counter()
        # outer-test graphs are embedded only after selection and retraining
        test_features = extract_features(stack, w_phi, test.graphs, embed_cfg, threads=threads)
        predicted = classes_from_outputs(outputs_for(w_out, test_features))
        accuracies.append(accuracy(predicted, test.targets))
        finished = time.perf_counter()
        train_seconds += trained_at - started
        test_seconds += finished - trained_at
    return float(np.mean(accuracies)), train_seconds / guesses, test_seconds / guesses


def nested_cv(
    dataset: Dataset,
    space: SearchSpace,
    base: ModelConfig,
    outer_k: int = 10,
    inner_k: int = 10,
    seed: int = 0,
    threads: int = 1,
    regularize_bias: bool = True,
    reporter: Reporter | None = None,
    logger: logging.Logger | None = None,
) -> CVReport:
    logger = logger or logging.getLogger("fdgnn")
    degree = scaling_degree(dataset)
    base = replace(base, seed=seed)
    outer_splits = stratified_folds(dataset.targets, outer_k, seed)
    results: list[FoldResult] = []
    for fold, (train_idx, test_idx) in enumerate(outer_splits):
        try:
            # the search only ever sees the outer-train subset
            outer_train = dataset.subset(train_idx)
            configs = sample_configs(space, base, derive_seed(seed, CONFIG_STREAM, fold))
            scores = _search_fold(
                outer_train,
                configs,
                space,
                inner_k,
                fold,
                seed,
                degree,
                threads,
                regularize_bias,
            )
            best = select_config(scores)
            selected = replace(
                best.config, ridge_lambda=float(space.lambda_grid[best.best_lambda_index])
            )
            if reporter is not None:
                reporter.fold_selected(fold, selected, best.score)
            test_accuracy, train_seconds, test_seconds = _retrain_and_test(
                selected,
                dataset,
                train_idx,
                test_idx,
                space.guesses,
                fold,
                degree,
                threads,
                regularize_bias,
            )
        except Exception as exc:
            logger.error("fold_failed", extra={"fold": fold, "error": str(exc)})
            raise FoldError(fold, exc) from exc
        result = FoldResult(
            fold=fold,
            config=selected,
            inner_score=best.score,
            test_accuracy=test_accuracy,
            train_seconds=train_seconds,
            test_seconds=test_seconds,
        )
        if reporter is not None:
            reporter.fold_result(result)
        results.append(result)
    return CVReport.from_folds(results)
