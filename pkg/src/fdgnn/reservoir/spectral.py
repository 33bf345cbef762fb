from __future__ import annotations

import logging

import numpy as np
import numpy.typing as npt
from scipy import sparse
from scipy.sparse import linalg as splinalg

from fdgnn.state.models import ContractError, FloatArray

DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 10_000
DEFAULT_RESTARTS = 3
DENSE_FALLBACK_LIMIT = 1000
STAGNATION_WINDOW = 64


class SpectralRadiusError(RuntimeError):
    def __init__(self, message: str, last_estimate: float, iterations: int) -> None:
        super().__init__(message)
        self.last_estimate = last_estimate
        self.iterations = iterations


def _as_square_csr(m: sparse.spmatrix | npt.ArrayLike) -> sparse.csr_matrix:
    matrix = sparse.csr_matrix(m, dtype=np.float64)
    rows, cols = matrix.shape
    if rows != cols:
        raise ContractError(f"spectral radius needs a square matrix, got {matrix.shape}")
    return matrix


def _start_vector(size: int, attempt: int) -> FloatArray:
    if attempt == 0:
        vector = np.ones(size, dtype=np.float64)
    else:
        vector = np.random.default_rng(attempt).standard_normal(size)
    return vector / np.linalg.norm(vector)


def power_iteration(
    m: sparse.spmatrix | npt.ArrayLike,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    restarts: int = DEFAULT_RESTARTS,
) -> float:
    """Estimate rho(m) with the Rayleigh quotient of normalized iterates.

    An estimate ``mu`` is accepted only when both hold:

    - the iterate is an eigenvector to within ``tol``,
      ``||m v - mu v|| <= tol * |mu|``;
    - the geometric tail of the remaining changes of ``mu`` is below
      ``tol * |mu|``.

    Complex-dominant spectra fail the first check and slowly converging
    non-normal ones fail the second, so both end in ``SpectralRadiusError``
    rather than in an inaccurate value. An attempt whose residual sets no new
    minimum for ``STAGNATION_WINDOW`` steps, or whose iterate vanishes, is
    restarted from the next deterministic start vector.
    """
    if tol <= 0:
        raise ContractError(f"tol must be positive, got {tol}")
    matrix = _as_square_csr(m)
    size = matrix.shape[0]
    if size == 0 or matrix.count_nonzero() == 0:
        return 0.0

    estimate = 0.0
    total = 0
    for attempt in range(restarts + 1):
        vector = _start_vector(size, attempt)
        previous: float | None = None
        previous_delta: float | None = None
        best_residual = np.inf
        since_best = 0
        while total < max_iter:
            total += 1
            image = matrix @ vector
            norm = float(np.linalg.norm(image))
            if norm == 0.0:
                break
            estimate = norm
            rayleigh = float(vector @ image)
            residual = float(np.linalg.norm(image - rayleigh * vector))
            if residual == 0.0:
                return abs(rayleigh)
            delta = None if previous is None else abs(rayleigh - previous)
            if residual <= tol * abs(rayleigh) and delta is not None:
                if delta == 0.0:
                    return abs(rayleigh)
                if previous_delta:
                    ratio = delta / previous_delta
                    if ratio < 1.0 and delta * ratio / (1.0 - ratio) <= tol * abs(rayleigh):
                        return abs(rayleigh)
            previous = rayleigh
            previous_delta = delta
            vector = image / norm
            if residual < best_residual:
                best_residual = residual
                since_best = 0
            else:
                since_best += 1
                if since_best >= STAGNATION_WINDOW:
                    break
        if total >= max_iter:
            break
    raise SpectralRadiusError(
        f"power iteration did not converge after {total} iterations",
        last_estimate=estimate,
        iterations=total,
    )


def dense_spectral_radius(m: sparse.spmatrix | npt.ArrayLike) -> float:
    matrix = _as_square_csr(m)
    if matrix.shape[0] == 0:
        return 0.0
    eigenvalues = np.linalg.eigvals(matrix.toarray())
    return float(np.max(np.abs(eigenvalues)))


def spectral_radius(
    m: sparse.spmatrix | npt.ArrayLike,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    dense_limit: int = DENSE_FALLBACK_LIMIT,
    logger: logging.Logger | None = None,
) -> float:
    matrix = _as_square_csr(m)
    try:
        return power_iteration(matrix, tol=tol, max_iter=max_iter)
    except SpectralRadiusError as exc:
        logger = logger or logging.getLogger("fdgnn")
        size = matrix.shape[0]
        logger.debug(
            "spectral_radius_fallback",
            extra={
                "size": size,
                "iterations": exc.iterations,
                "last_estimate": exc.last_estimate,
                "method": "dense" if size <= dense_limit else "arpack",
            },
        )
        if size <= dense_limit:
            return dense_spectral_radius(matrix)
        try:
            eigenvalues = splinalg.eigs(
                matrix,
                k=1,
                which="LM",
                v0=np.ones(size, dtype=np.float64),
                return_eigenvectors=False,
            )
        except splinalg.ArpackNoConvergence as arpack_exc:
            raise SpectralRadiusError(
                f"ARPACK did not converge for a {size}x{size} matrix",
                last_estimate=exc.last_estimate,
                iterations=exc.iterations,
            ) from arpack_exc
        return float(np.abs(eigenvalues[0]))


def spectral_norm(m: sparse.spmatrix | npt.ArrayLike, dense_limit: int = DENSE_FALLBACK_LIMIT) -> float:
    matrix = sparse.csr_matrix(m, dtype=np.float64)
    if matrix.count_nonzero() == 0:
        return 0.0
    if min(matrix.shape) <= dense_limit:
        return float(np.linalg.norm(matrix.toarray(), 2))
    singular = splinalg.svds(matrix, k=1, return_singular_vectors=False)
    return float(singular[0])
