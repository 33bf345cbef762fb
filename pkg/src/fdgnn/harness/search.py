from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.stats import uniform
from sklearn.model_selection import ParameterSampler

from fdgnn.reservoir.weights import derive_seed
from fdgnn.state.models import ContractError, ModelConfig

SEARCH_STREAM = 3
LARGE_DATASETS = frozenset({"NCI1", "COLLAB"})
DEFAULT_HIDDEN_SIZE = 50
LARGE_HIDDEN_SIZE = 500
DEFAULT_LAMBDA_GRID: tuple[float, ...] = tuple(float(value) for value in np.logspace(-8, 3, 12))
DEFAULT_LAYER_CHOICES: tuple[int, ...] = (1, 2, 3, 4, 5)


def default_hidden_size(dataset_name: str) -> int:
    return LARGE_HIDDEN_SIZE if dataset_name.upper() in LARGE_DATASETS else DEFAULT_HIDDEN_SIZE


@dataclass(frozen=True)
class SearchSpace:
    num_configs: int = 100
    rho_range: tuple[float, float] = (0.0, 1.0)
    omega1_range: tuple[float, float] = (0.0, 1.0)
    omega_range: tuple[float, float] = (0.0, 1.0)
    layer_choices: tuple[int, ...] = DEFAULT_LAYER_CHOICES
    lambda_grid: tuple[float, ...] = DEFAULT_LAMBDA_GRID
    guesses: int = 20
    fixed_layers: int | None = None

    def __post_init__(self) -> None:
        if self.num_configs < 1:
            raise ContractError(f"num_configs must be >= 1, got {self.num_configs}")
        if self.guesses < 1:
            raise ContractError(f"guesses must be >= 1, got {self.guesses}")
        for name in ("rho_range", "omega1_range", "omega_range"):
            low, high = getattr(self, name)
            if not 0.0 <= low < high <= 1.0:
                raise ContractError(f"{name} must satisfy 0 <= low < high <= 1, got ({low}, {high})")
        if not self.layer_choices or min(self.layer_choices) < 1:
            raise ContractError(f"layer_choices must be positive integers, got {self.layer_choices}")
        if not self.lambda_grid or min(self.lambda_grid) < 0:
            raise ContractError(f"lambda_grid must be non-negative values, got {self.lambda_grid}")
        if self.fixed_layers is not None and self.fixed_layers < 1:
            raise ContractError(f"fixed_layers must be >= 1, got {self.fixed_layers}")

    @property
    def depths(self) -> tuple[int, ...]:
        if self.fixed_layers is not None:
            return (self.fixed_layers,)
        return tuple(sorted(set(self.layer_choices)))


def _open_interval(value: float, bounds: tuple[float, float]) -> float:
    low, high = bounds
    return float(np.clip(value, np.nextafter(low, high), np.nextafter(high, low)))


def sample_configs(space: SearchSpace, base: ModelConfig, seed: int) -> tuple[ModelConfig, ...]:
    """Draw ``space.num_configs`` configurations around ``base``.

    Only L, rho, omega1 and omega vary; every other field, the seed included,
    is copied from ``base`` so that configurations share guess seeds.
    """
    distributions = {
        "num_layers": list(space.depths),
        "rho": uniform(loc=space.rho_range[0], scale=space.rho_range[1] - space.rho_range[0]),
        "omega1": uniform(
            loc=space.omega1_range[0], scale=space.omega1_range[1] - space.omega1_range[0]
        ),
        "omega": uniform(
            loc=space.omega_range[0], scale=space.omega_range[1] - space.omega_range[0]
        ),
    }
    sampler = ParameterSampler(
        distributions,
        n_iter=space.num_configs,
        random_state=derive_seed(seed, SEARCH_STREAM) % 2**32,
    )
    return tuple(
        replace(
            base,
            num_layers=int(params["num_layers"]),
            rho=_open_interval(params["rho"], space.rho_range),
            omega1=_open_interval(params["omega1"], space.omega1_range),
            omega=_open_interval(params["omega"], space.omega_range),
        )
        for params in sampler
    )
