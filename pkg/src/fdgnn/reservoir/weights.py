from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from fdgnn.reservoir.spectral import spectral_norm, spectral_radius
from fdgnn.state.models import ContractError, LayerWeights, ModelConfig

# every generator in the package is PCG64 seeded through derive_seed
MAX_RESAMPLE_ATTEMPTS = 10
LAYER_STREAM = 0
PROJECTION_STREAM = 1


class ReservoirInitError(RuntimeError):
    pass


@dataclass(frozen=True)
class LayerConfig:
    hidden_size: int
    input_size: int
    connections_per_neuron: int = 1
    effective_spectral_radius: float = 0.9
    input_scale: float = 0.5
    degree: float = 1.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.hidden_size < 1 or self.input_size < 1:
            raise ContractError(
                f"layer sizes must be positive, got H={self.hidden_size} U={self.input_size}"
            )
        if self.connections_per_neuron < 1:
            raise ContractError(
                f"connections_per_neuron must be >= 1, got {self.connections_per_neuron}"
            )
        if self.connections_per_neuron > min(self.hidden_size, self.input_size):
            raise ContractError(
                f"C={self.connections_per_neuron} exceeds min(H={self.hidden_size}, "
                f"U={self.input_size})"
            )
        if not 0.0 < self.effective_spectral_radius < 1.0:
            raise ContractError(
                f"effective_spectral_radius must lie in (0, 1), got {self.effective_spectral_radius}"
            )
        if not 0.0 < self.input_scale < 1.0:
            raise ContractError(f"input_scale must lie in (0, 1), got {self.input_scale}")
        if not self.degree > 0:
            raise ContractError(f"degree must be positive, got {self.degree}")


def derive_seed(master_seed: int, *path: int) -> int:
    sequence = np.random.SeedSequence(master_seed, spawn_key=path)
    high, low = sequence.generate_state(2, dtype=np.uint32)
    return int((int(high) << 32 | int(low)) & 0x7FFF_FFFF_FFFF_FFFF)


def layer_seeds(master_seed: int, num_layers: int) -> tuple[int, ...]:
    return tuple(derive_seed(master_seed, LAYER_STREAM, index) for index in range(num_layers))


def projection_seed(master_seed: int) -> int:
    return derive_seed(master_seed, PROJECTION_STREAM)


def sparse_uniform_rows(
    rng: np.random.Generator,
    rows: int,
    cols: int,
    per_row: int,
    scale: float,
) -> sparse.csr_matrix:
    columns = np.argsort(rng.random((rows, cols)), axis=1)[:, :per_row]
    values = rng.uniform(-scale, scale, size=(rows, per_row))
    matrix = sparse.csr_matrix(
        (values.ravel(), (np.repeat(np.arange(rows), per_row), columns.ravel())),
        shape=(rows, cols),
    )
    matrix.sort_indices()
    return matrix


def init_layer(cfg: LayerConfig, logger: logging.Logger | None = None) -> LayerWeights:
    logger = logger or logging.getLogger("fdgnn")
    for attempt in range(MAX_RESAMPLE_ATTEMPTS):
        rng = np.random.default_rng(cfg.seed + attempt)
        recurrent = sparse_uniform_rows(
            rng, cfg.hidden_size, cfg.hidden_size, cfg.connections_per_neuron, 1.0
        )
        raw_radius = spectral_radius(recurrent, logger=logger)
        if raw_radius > 0.0:
            break
        logger.warning(
            "zero_spectral_radius_resample",
            extra={"seed": cfg.seed, "attempt": attempt + 1},
        )
    else:
        raise ReservoirInitError(
            f"recurrent matrix kept a zero spectral radius after {MAX_RESAMPLE_ATTEMPTS} attempts "
            f"(seed={cfg.seed})"
        )
    w_input = sparse_uniform_rows(
        rng, cfg.hidden_size, cfg.input_size, cfg.connections_per_neuron, cfg.input_scale
    )
    w_recurrent = recurrent * (cfg.effective_spectral_radius / (cfg.degree * raw_radius))
    return LayerWeights(w_input=w_input, w_recurrent=sparse.csr_matrix(w_recurrent))


def build_stack(
    model_cfg: ModelConfig,
    label_dim: int,
    degree: float,
    logger: logging.Logger | None = None,
) -> tuple[LayerWeights, ...]:
    seeds = layer_seeds(model_cfg.seed, model_cfg.num_layers)
    stack: list[LayerWeights] = []
    for index, seed in enumerate(seeds):
        first = index == 0
        stack.append(
            init_layer(
                LayerConfig(
                    hidden_size=model_cfg.hidden_size,
                    input_size=label_dim if first else model_cfg.hidden_size,
                    connections_per_neuron=model_cfg.connections,
                    effective_spectral_radius=model_cfg.rho,
                    input_scale=model_cfg.omega1 if first else model_cfg.omega,
                    degree=degree,
                    seed=seed,
                ),
                logger=logger,
            )
        )
    return tuple(stack)


def effective_spectral_radius(weights: LayerWeights, degree: float) -> float:
    return spectral_radius(weights.w_recurrent) * degree


def norm_bound(weights: LayerWeights) -> float:
    return spectral_norm(weights.w_recurrent)
