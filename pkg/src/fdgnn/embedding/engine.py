from __future__ import annotations

import logging
from typing import Sequence

import numpy as np
from joblib import Parallel, delayed

from fdgnn.state.models import (
    ContractError,
    EmbeddingConfig,
    EmbeddingResult,
    FloatArray,
    Graph,
    LayerWeights,
)

GES_AGREEMENT_FACTOR = 10.0


class NumericError(ArithmeticError):
    pass


def resolve_jobs(threads: int) -> int:
    if threads < 0:
        raise ContractError(f"threads must be >= 0, got {threads}")
    return -1 if threads == 0 else threads


def _check_dimensions(weights: LayerWeights, inputs: FloatArray, graph: Graph) -> None:
    if inputs.ndim != 2:
        raise ContractError(f"layer input must be a U x N matrix, got shape {inputs.shape}")
    if inputs.shape[0] != weights.input_size:
        raise ContractError(
            f"layer expects {weights.input_size} input rows, got {inputs.shape[0]}"
        )
    if inputs.shape[1] != graph.num_vertices:
        raise ContractError(
            f"layer input has {inputs.shape[1]} columns for a graph with "
            f"{graph.num_vertices} vertices"
        )


def layer_map(
    weights: LayerWeights,
    drive: FloatArray,
    graph: Graph,
    state: FloatArray,
) -> FloatArray:
    """One synchronous application of tanh(W_I U + W_H X A), with drive = W_I U."""
    # W_H is C-sparse per row, so reduce over neurons first, then over neighbours
    recurrent = np.asarray(weights.w_recurrent @ state)
    return np.tanh(drive + np.asarray(recurrent @ graph.adjacency))


def _iterate(
    weights: LayerWeights,
    inputs: FloatArray,
    graph: Graph,
    cfg: EmbeddingConfig,
    initial_state: FloatArray | None = None,
) -> tuple[FloatArray, int, bool, float]:
    _check_dimensions(weights, inputs, graph)
    drive = np.asarray(weights.w_input @ inputs)
    if initial_state is None:
        state = np.zeros((weights.hidden_size, graph.num_vertices), dtype=np.float64)
    else:
        if initial_state.shape != (weights.hidden_size, graph.num_vertices):
            raise ContractError(
                f"initial state must be {weights.hidden_size} x {graph.num_vertices}, "
                f"got {initial_state.shape}"
            )
        state = np.array(initial_state, dtype=np.float64)
    residual = np.inf
    for iteration in range(1, cfg.max_iters + 1):
        updated = layer_map(weights, drive, graph, state)
        if not np.all(np.isfinite(updated)):
            raise NumericError(f"non-finite state at iteration {iteration}")
        residual = float(np.linalg.norm(updated - state))
        state = updated
        if residual <= cfg.epsilon:
            return state, iteration, True, residual
    return state, cfg.max_iters, False, residual


def iterate_layer(
    weights: LayerWeights,
    inputs: FloatArray,
    graph: Graph,
    cfg: EmbeddingConfig,
) -> tuple[FloatArray, int, bool]:
    states, iterations, converged, _ = _iterate(weights, inputs, graph, cfg)
    return states, iterations, converged


def embed_graph(
    stack: Sequence[LayerWeights],
    graph: Graph,
    cfg: EmbeddingConfig,
    logger: logging.Logger | None = None,
    debug: bool = False,
) -> EmbeddingResult:
    if not stack:
        raise ContractError("embedding needs at least one layer")
    if stack[0].input_size != graph.label_dim:
        raise ContractError(
            f"first layer expects {stack[0].input_size}-dimensional labels, "
            f"graph has {graph.label_dim}"
        )
    inputs = graph.vertex_labels
    iterations: list[int] = []
    converged: list[bool] = []
    residuals: list[float] = []
    for weights in stack:
        inputs, count, done, residual = _iterate(weights, inputs, graph, cfg)
        iterations.append(count)
        converged.append(done)
        residuals.append(residual)
    if debug:
        (logger or logging.getLogger("fdgnn")).debug(
            "embedding_diagnostic",
            extra={
                "vertices": graph.num_vertices,
                "iterations": iterations,
                "converged": converged,
                "final_residual": residuals[-1],
            },
        )
    return EmbeddingResult(
        states=inputs,
        per_layer_iterations=tuple(iterations),
        converged_flags=tuple(converged),
        residuals=tuple(residuals),
    )


def embed_dataset(
    stack: Sequence[LayerWeights],
    graphs: Sequence[Graph],
    cfg: EmbeddingConfig,
    threads: int = 1,
    logger: logging.Logger | None = None,
    debug: bool = False,
) -> list[EmbeddingResult]:
    jobs = resolve_jobs(threads)
    if jobs == 1:
        return [embed_graph(stack, graph, cfg, logger=logger, debug=debug) for graph in graphs]
    results: list[EmbeddingResult] = Parallel(n_jobs=jobs, prefer="threads")(
        delayed(embed_graph)(stack, graph, cfg, logger, debug) for graph in graphs
    )
    return results


def check_ges(
    weights: LayerWeights,
    graph: Graph,
    inputs: FloatArray,
    cfg: EmbeddingConfig,
    trials: int,
    seed: int = 0,
) -> bool:
    """Run the layer from the zero state and ``trials`` random states and
    report whether every run lands on the same embedding."""
    if trials < 2:
        raise ContractError(f"check_ges needs at least 2 trials, got {trials}")
    rng = np.random.default_rng(seed)
    shape = (weights.hidden_size, graph.num_vertices)
    starts: list[FloatArray | None] = [None]
    starts.extend(rng.uniform(-1.0, 1.0, size=shape) for _ in range(trials))
    finals = [_iterate(weights, inputs, graph, cfg, initial_state=start)[0] for start in starts]
    limit = GES_AGREEMENT_FACTOR * cfg.epsilon
    for index, first in enumerate(finals):
        for second in finals[index + 1 :]:
            if np.linalg.norm(first - second) > limit:
                return False
    return True
