from __future__ import annotations

import logging

import numpy as np
import pytest
from scipy import sparse

from fdgnn.reservoir.spectral import (
    SpectralRadiusError,
    dense_spectral_radius,
    power_iteration,
    spectral_norm,
    spectral_radius,
)
from fdgnn.reservoir.weights import sparse_uniform_rows
from fdgnn.state.models import ContractError


def _oracle(matrix: sparse.spmatrix) -> float:
    return float(np.max(np.abs(np.linalg.eigvals(matrix.toarray()))))


def _rotation_like(theta: float = 1.0) -> sparse.csr_matrix:
    # non-normal, complex eigenvalues of modulus 1: iterate norms oscillate
    return sparse.csr_matrix(
        np.array(
            [
                [np.cos(theta), -2.0 * np.sin(theta)],
                [0.5 * np.sin(theta), np.cos(theta)],
            ]
        )
    )


def test_diagonal_matrix() -> None:
    assert spectral_radius(sparse.diags([0.5, -0.2])) == pytest.approx(0.5, rel=1e-8)


def test_symmetric_permutation() -> None:
    matrix = sparse.csr_matrix(np.array([[0.0, 1.0], [1.0, 0.0]]))
    assert spectral_radius(matrix) == pytest.approx(1.0, rel=1e-8)


def test_zero_matrix() -> None:
    assert power_iteration(sparse.csr_matrix((4, 4))) == 0.0
    assert spectral_radius(np.zeros((3, 3))) == 0.0


def test_rejects_non_square() -> None:
    with pytest.raises(ContractError):
        spectral_radius(np.ones((2, 3)))


def test_rejects_non_positive_tolerance() -> None:
    with pytest.raises(ContractError):
        power_iteration(np.eye(2), tol=0.0)


def test_power_iteration_converges_on_dominant_eigenvalue() -> None:
    rng = np.random.default_rng(11)
    matrix = rng.uniform(0.0, 1.0, size=(30, 30))
    assert power_iteration(matrix) == pytest.approx(_oracle(sparse.csr_matrix(matrix)), rel=1e-6)


def test_power_iteration_error_carries_last_estimate() -> None:
    with pytest.raises(SpectralRadiusError) as excinfo:
        power_iteration(_rotation_like(), max_iter=200)
    assert excinfo.value.last_estimate > 0.0
    assert 0 < excinfo.value.iterations <= 200


def test_fallback_to_dense_is_logged(caplog: pytest.LogCaptureFixture) -> None:
    matrix = _rotation_like()
    with caplog.at_level(logging.DEBUG, logger="fdgnn"):
        value = spectral_radius(matrix, max_iter=200)
    assert value == pytest.approx(1.0, rel=1e-10)
    assert any(record.message == "spectral_radius_fallback" for record in caplog.records)


def test_fallback_to_arpack_above_dense_limit() -> None:
    matrix = sparse.random(40, 40, density=0.3, random_state=5, format="csr")
    expected = dense_spectral_radius(matrix)
    value = spectral_radius(matrix, max_iter=1, dense_limit=10)
    assert value == pytest.approx(expected, rel=1e-6)


def test_matches_dense_oracle_on_random_sparse_matrices() -> None:
    rng = np.random.default_rng(2024)
    for trial in range(200):
        size = int(rng.integers(2, 101))
        per_row = int(rng.integers(1, min(size, 5) + 1))
        matrix = sparse_uniform_rows(rng, size, size, per_row, 1.0)
        expected = _oracle(matrix)
        value = spectral_radius(matrix)
        if expected == 0.0:
            assert value == pytest.approx(0.0, abs=1e-12), trial
        else:
            assert abs(value - expected) / expected <= 1e-6, trial


def test_spectral_norm_matches_dense() -> None:
    rng = np.random.default_rng(9)
    matrix = sparse_uniform_rows(rng, 20, 20, 3, 1.0)
    assert spectral_norm(matrix) == pytest.approx(np.linalg.norm(matrix.toarray(), 2), rel=1e-10)
    assert spectral_norm(sparse.csr_matrix((3, 3))) == 0.0


def test_negative_dominant_eigenvalue() -> None:
    assert power_iteration(sparse.diags([-3.0, 1.0])) == pytest.approx(3.0, rel=1e-8)


def test_near_defective_matrix_is_not_cut_short() -> None:
    # slow non-normal convergence: the iterate looks like an eigenvector long
    # before the Rayleigh quotient has settled
    matrix = sparse.csr_matrix(np.array([[1.0, 50.0], [0.0, 0.999]]))
    try:
        value = power_iteration(matrix)
    except SpectralRadiusError:
        value = None
    if value is not None:
        assert value == pytest.approx(1.0, rel=1e-7)
    assert spectral_radius(matrix) == pytest.approx(1.0, rel=1e-7)


@pytest.mark.slow
def test_power_iteration_never_returns_inaccurate_value() -> None:
    rng = np.random.default_rng(3000)
    for trial in range(1000):
        size = int(rng.integers(2, 101))
        per_row = int(rng.integers(1, min(size, 5) + 1))
        matrix = sparse_uniform_rows(rng, size, size, per_row, 1.0)
        expected = _oracle(matrix)
        if expected == 0.0:
            continue
        try:
            value = power_iteration(matrix)
        except SpectralRadiusError:
            value = spectral_radius(matrix)
        assert abs(value - expected) / expected <= 1e-6, trial
