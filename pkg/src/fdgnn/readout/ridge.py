from __future__ import annotations

import warnings

import numpy as np
from scipy import linalg

from fdgnn.state.models import ContractError, FloatArray, TargetMatrix


class RidgeSolveError(RuntimeError):
    pass


def with_bias_row(features: FloatArray) -> FloatArray:
    return np.vstack([features, np.ones((1, features.shape[1]), dtype=np.float64)])


def fit_ridge(
    features: FloatArray,
    targets: TargetMatrix,
    ridge_lambda: float,
    regularize_bias: bool = True,
) -> FloatArray:
    """Closed-form Tikhonov readout.

    Returns W of shape Y x (P + 1) minimizing ||W [features; 1] - T||_F^2 +
    lambda ||W||_F^2. With ``regularize_bias=False`` the last column of W is
    left out of the penalty.
    """
    if features.ndim != 2 or features.shape[1] < 1:
        raise ContractError(f"features must be a P x M matrix with M >= 1, got {features.shape}")
    if targets.num_samples != features.shape[1]:
        raise ContractError(
            f"{features.shape[1]} feature columns but {targets.num_samples} targets"
        )
    if ridge_lambda < 0:
        raise ContractError(f"ridge_lambda must be >= 0, got {ridge_lambda}")
    if not np.all(np.isfinite(features)):
        raise ContractError("features contain non-finite values")

    design = with_bias_row(features)
    if ridge_lambda == 0.0:
        try:
            return np.asarray(targets.values @ linalg.pinv(design))
        except (linalg.LinAlgError, ValueError) as exc:
            raise RidgeSolveError(
                "readout system is singular at lambda=0; use ridge_lambda > 0"
            ) from exc

    gram = design @ design.T
    penalty = np.full(gram.shape[0], ridge_lambda, dtype=np.float64)
    if not regularize_bias:
        penalty[-1] = 0.0
    gram[np.diag_indices_from(gram)] += penalty
    rhs = design @ targets.values.T
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", linalg.LinAlgWarning)
            solution = linalg.solve(gram, rhs, assume_a="pos")
    except linalg.LinAlgError as exc:
        raise RidgeSolveError(
            f"readout system is singular at lambda={ridge_lambda}; increase ridge_lambda"
        ) from exc
    if not np.all(np.isfinite(solution)):
        raise RidgeSolveError(
            f"readout solve produced non-finite weights at lambda={ridge_lambda}"
        )
    return np.asarray(solution.T)


def ridge_objective(
    w_out: FloatArray,
    features: FloatArray,
    targets: TargetMatrix,
    ridge_lambda: float,
) -> float:
    residual = w_out @ with_bias_row(features) - targets.values
    return float(np.sum(residual**2) + ridge_lambda * np.sum(w_out**2))
