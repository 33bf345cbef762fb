from __future__ import annotations

import numpy as np
import numpy.typing as npt
from sklearn.model_selection import StratifiedKFold

from fdgnn.reservoir.weights import derive_seed
from fdgnn.state.models import ContractError, IntArray

FOLD_STREAM = 2

Split = tuple[IntArray, IntArray]


class StratificationError(ValueError):
    def __init__(self, class_index: int, members: int, k_folds: int) -> None:
        super().__init__(
            f"class {class_index} has {members} member(s), fewer than {k_folds} folds"
        )
        self.class_index = class_index
        self.members = members
        self.k_folds = k_folds


def stratified_folds(targets: npt.ArrayLike, k_folds: int, seed: int) -> list[Split]:
    """Shuffled stratified (train, test) splits; the test parts partition the samples."""
    classes = np.asarray(targets, dtype=np.int64)
    if k_folds < 2:
        raise ContractError(f"k_folds must be >= 2, got {k_folds}")
    values, counts = np.unique(classes, return_counts=True)
    for value, count in zip(values, counts):
        if count < k_folds:
            raise StratificationError(int(value), int(count), k_folds)
    splitter = StratifiedKFold(
        n_splits=k_folds,
        shuffle=True,
        random_state=derive_seed(seed, FOLD_STREAM) % 2**32,
    )
    placeholder = np.zeros(len(classes))
    return [
        (np.asarray(train, dtype=np.int64), np.asarray(test, dtype=np.int64))
        for train, test in splitter.split(placeholder, classes)
    ]
