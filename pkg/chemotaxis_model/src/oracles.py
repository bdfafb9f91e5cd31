"""
Dense reference computations for small grids: explicit Laplacian assembly,
pinned-mean Poisson solves, dense step solves and eigen-decompositions.
Used by the verify command and the tests to check the sparse code paths.
"""

import numpy as np

from src.errors import DomainError
from src.grid import Grid

DENSE_LIMIT = 1024


def _neumann_1d_dense(n: int, h: float) -> np.ndarray:
    A = np.zeros((n, n))
    for i in range(n):
        # reflected ghost cells: a missing neighbour contributes nothing
        if i > 0:
            A[i, i - 1] += 1.0
            A[i, i] -= 1.0
        if i < n - 1:
            A[i, i + 1] += 1.0
            A[i, i] -= 1.0
    return A / h**2


def dense_laplacian(grid: Grid) -> np.ndarray:
    if grid.size > DENSE_LIMIT:
        raise DomainError(f"dense oracles are limited to {DENSE_LIMIT} cells, grid has {grid.size}")
    blocks = [_neumann_1d_dense(n, h) for n, h in zip(grid.cells, grid.spacing)]
    if grid.dim == 1:
        return blocks[0]
    return np.kron(blocks[0], np.eye(grid.cells[1])) + np.kron(np.eye(grid.cells[0]), blocks[1])


def dense_poisson(grid: Grid, z: np.ndarray) -> np.ndarray:
    """Solve -Lap K = z with K[0] pinned by dense LU, then shift to zero mean."""
    A = -dense_laplacian(grid)
    K = np.zeros(grid.size)
    K[1:] = np.linalg.solve(A[1:, 1:], z[1:] - z.mean())
    return K - K.mean()


def dense_step_u(grid: Grid, u: np.ndarray, gamma: np.ndarray, tau: float) -> np.ndarray:
    A = np.eye(grid.size) - tau * dense_laplacian(grid) @ np.diag(gamma)
    return np.linalg.solve(A, u)


def dense_step_v(grid: Grid, v: np.ndarray, u_new: np.ndarray, tau: float) -> np.ndarray:
    B = np.eye(grid.size) - tau * dense_laplacian(grid) + tau * np.diag(u_new)
    return np.linalg.solve(B, v)


def dense_smallest_eigenvalue(grid: Grid) -> float:
    """Smallest nonzero eigenvalue of -Lap_h from a symmetric eigensolve."""
    eigenvalues = np.linalg.eigvalsh(-dense_laplacian(grid))
    return float(eigenvalues[1])


def neumann_mode(grid: Grid, k: int = 1, axis: int = 0) -> np.ndarray:
    """Discrete Neumann eigenvector cos(pi k (i + 1/2) / N) along one axis, flattened."""
    n = grid.cells[axis]
    profile = np.cos(np.pi * k * (np.arange(n) + 0.5) / n)
    shape = [1] * grid.dim
    shape[axis] = n
    return np.broadcast_to(profile.reshape(shape), grid.shape).reshape(-1).copy()


def neumann_eigenvalue(grid: Grid, k: int = 1, axis: int = 0) -> float:
    n = grid.cells[axis]
    h = grid.spacing[axis]
    return 4.0 / h**2 * np.sin(np.pi * k / (2 * n)) ** 2
