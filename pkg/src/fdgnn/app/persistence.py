"""Versioned ``.npz`` container for trained models.

Layout: a ``header`` entry holding a JSON document (format version, model
and embedding configs, class count, degree, label dimension, raw vertex-label
categories, layer count), per-layer sparse matrices stored as
``layer{i}_{input|recurrent}_{row|col|value|shape}`` triplets, and the dense
``w_phi`` and ``w_out`` arrays.
"""

from __future__ import annotations

import json
import zipfile
from dataclasses import asdict
from pathlib import Path
from typing import Any

import numpy as np
from scipy import sparse

from fdgnn.state.models import (
    ContractError,
    EmbeddingConfig,
    LayerWeights,
    ModelConfig,
    TrainedModel,
)

FORMAT_VERSION = 1
_MATRICES = ("input", "recurrent")


class ModelFormatError(ValueError):
    pass


def _sparse_entries(prefix: str, matrix: sparse.csr_matrix) -> dict[str, np.ndarray]:
    coo = matrix.tocoo()
    return {
        f"{prefix}_row": coo.row.astype(np.int64),
        f"{prefix}_col": coo.col.astype(np.int64),
        f"{prefix}_value": coo.data.astype(np.float64),
        f"{prefix}_shape": np.asarray(matrix.shape, dtype=np.int64),
    }


def _sparse_from(prefix: str, archive: Any) -> sparse.csr_matrix:
    shape = tuple(int(value) for value in archive[f"{prefix}_shape"])
    matrix = sparse.csr_matrix(
        (archive[f"{prefix}_value"], (archive[f"{prefix}_row"], archive[f"{prefix}_col"])),
        shape=shape,
    )
    matrix.sort_indices()
    return matrix


def save_model(model: TrainedModel, path: Path) -> Path:
    header = {
        "format_version": FORMAT_VERSION,
        "config": asdict(model.config),
        "embed_cfg": asdict(model.embed_cfg),
        "num_classes": model.num_classes,
        "degree": model.degree,
        "label_dim": model.label_dim,
        "node_categories": list(model.node_categories),
        "num_layers": len(model.stack),
    }
    arrays: dict[str, np.ndarray] = {
        "header": np.asarray(json.dumps(header, sort_keys=True)),
        "w_phi": model.w_phi,
        "w_out": model.w_out,
    }
    for index, layer in enumerate(model.stack):
        arrays.update(_sparse_entries(f"layer{index}_input", layer.w_input))
        arrays.update(_sparse_entries(f"layer{index}_recurrent", layer.w_recurrent))
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("wb") as handle:
        np.savez_compressed(handle, **arrays)
    return path


def load_model(path: Path) -> TrainedModel:
    path = Path(path)
    if not path.is_file():
        raise ModelFormatError(f"Model file not found: {path}")
    try:
        with np.load(path, allow_pickle=False) as archive:
            header = json.loads(str(archive["header"]))
            version = header.get("format_version")
            if version != FORMAT_VERSION:
                raise ModelFormatError(
                    f"unsupported model format version {version!r}, expected {FORMAT_VERSION}"
                )
            stack = tuple(
                LayerWeights(
                    w_input=_sparse_from(f"layer{index}_input", archive),
                    w_recurrent=_sparse_from(f"layer{index}_recurrent", archive),
                )
                for index in range(int(header["num_layers"]))
            )
            w_phi = np.asarray(archive["w_phi"], dtype=np.float64)
            w_out = np.asarray(archive["w_out"], dtype=np.float64)
            model = TrainedModel(
                stack=stack,
                w_phi=w_phi,
                w_out=w_out,
                embed_cfg=EmbeddingConfig(**header["embed_cfg"]),
                config=ModelConfig(**header["config"]),
                num_classes=int(header["num_classes"]),
                degree=float(header["degree"]),
                label_dim=int(header["label_dim"]),
                node_categories=tuple(int(value) for value in header.get("node_categories", [])),
            )
    except ModelFormatError:
        raise
    except (
        OSError,
        EOFError,
        KeyError,
        TypeError,
        ValueError,
        zipfile.BadZipFile,
    ) as exc:
        raise ModelFormatError(f"Unreadable or truncated model file {path}: {exc}") from exc
    _check_shapes(model)
    return model


def _check_shapes(model: TrainedModel) -> None:
    if not model.stack:
        raise ModelFormatError("model has no layers")
    try:
        for layer in model.stack:
            if layer.w_recurrent.shape != (layer.hidden_size, layer.hidden_size):
                raise ContractError(f"recurrent matrix has shape {layer.w_recurrent.shape}")
            if layer.w_input.shape[0] != layer.hidden_size:
                raise ContractError(f"input matrix has shape {layer.w_input.shape}")
        if model.stack[0].input_size != model.label_dim:
            raise ContractError("first layer input size differs from label_dim")
        if model.node_categories and len(model.node_categories) != model.label_dim:
            raise ContractError(
                f"{len(model.node_categories)} node categories for label_dim {model.label_dim}"
            )
        if model.w_phi.shape[1] != model.stack[-1].hidden_size:
            raise ContractError(f"w_phi has shape {model.w_phi.shape}")
        if model.w_out.shape[1] != model.w_phi.shape[0] + 1:
            raise ContractError(f"w_out has shape {model.w_out.shape}")
    except ContractError as exc:
        raise ModelFormatError(f"inconsistent model container: {exc}") from exc
