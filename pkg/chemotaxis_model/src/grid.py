"""
Cell-centered tensor grids over an interval or a rectangle, fields living on
them, the homogeneous Neumann Laplacian and the norms used by the diagnostics.

Field values are stored flat in row-major order (axis 0 outermost), so the
Laplacian is assembled as a Kronecker sum of 1D Neumann matrices.
"""

import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp

from src.errors import DomainError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Grid:
    lengths: tuple[float, ...]
    cells: tuple[int, ...]

    def __post_init__(self):
        lengths = tuple(float(x) for x in np.atleast_1d(self.lengths))
        cells = tuple(int(n) for n in np.atleast_1d(self.cells))
        object.__setattr__(self, 'lengths', lengths)
        object.__setattr__(self, 'cells', cells)

        if len(lengths) not in (1, 2) or len(lengths) != len(cells):
            raise DomainError(
                f"grid needs 1 or 2 axes with matching lengths/cells, got {lengths} and {cells}"
            )
        if any(not math.isfinite(L) or L <= 0 for L in lengths):
            raise DomainError(f"domain lengths must be positive, got {lengths}")
        if any(n < 1 for n in cells):
            raise DomainError(f"cell counts must be >= 1, got {cells}")
        if math.prod(cells) < 2:
            raise DomainError("grid needs at least two cells")

    @property
    def dim(self) -> int:
        return len(self.cells)

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(L / n for L, n in zip(self.lengths, self.cells))

    @property
    def shape(self) -> tuple[int, ...]:
        return self.cells

    @property
    def size(self) -> int:
        return math.prod(self.cells)

    @property
    def cell_volume(self) -> float:
        return math.prod(self.spacing)

    @property
    def volume(self) -> float:
        return math.prod(self.lengths)

    def centers(self, axis: int = 0) -> np.ndarray:
        """Cell-center coordinates along one axis."""
        return (np.arange(self.cells[axis]) + 0.5) * self.spacing[axis]

    def mesh(self) -> tuple[np.ndarray, ...]:
        """Cell-center coordinates broadcast to the grid shape."""
        return tuple(np.meshgrid(*(self.centers(k) for k in range(self.dim)), indexing='ij'))


@dataclass(frozen=True, eq=False)
class Field:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float).reshape(-1)
        if values.size != self.grid.size:
            raise DomainError(
                f"field has {values.size} values, grid has {self.grid.size} cells"
            )
        if not np.all(np.isfinite(values)):
            raise DomainError("field contains NaN or infinite values")
        values.setflags(write=False)
        object.__setattr__(self, 'values', values)

    @classmethod
    def constant(cls, grid: Grid, c: float) -> 'Field':
        return cls(grid, np.full(grid.size, float(c)))

    @classmethod
    def zeros(cls, grid: Grid) -> 'Field':
        return cls.constant(grid, 0.0)

    def with_values(self, values) -> 'Field':
        return Field(self.grid, values)

    def as_array(self) -> np.ndarray:
        return self.values.reshape(self.grid.shape)

    def min(self) -> float:
        return float(self.values.min())

    def max(self) -> float:
        return float(self.values.max())


class Norms(NamedTuple):
    l1: float
    l2: float
    linf: float
    grad_l2: float
    h1: float
    h2: float
    lap_l2: float


def _neumann_1d(n: int, h: float) -> sp.spmatrix:
    if n == 1:
        return sp.csr_matrix((1, 1))
    main = np.full(n, -2.0)
    main[0] = main[-1] = -1.0
    off = np.ones(n - 1)
    return sp.diags([off, main, off], [-1, 0, 1]) / h**2


@lru_cache(maxsize=32)
def laplacian_matrix(grid: Grid) -> sp.csr_matrix:
    """Sparse Neumann Laplacian (reflected ghost cells), symmetric with zero row sums."""
    ops = [_neumann_1d(n, h) for n, h in zip(grid.cells, grid.spacing)]
    if grid.dim == 1:
        lap = ops[0]
    else:
        eye0 = sp.identity(grid.cells[0])
        eye1 = sp.identity(grid.cells[1])
        lap = sp.kron(ops[0], eye1) + sp.kron(eye0, ops[1])
    return sp.csr_matrix(lap)


def mean(z: Field) -> float:
    return float(np.sum(z.values)) * z.grid.cell_volume / z.grid.volume


def inner(y: Field, z: Field) -> float:
    """Discrete L2 inner product with the cell quadrature."""
    return float(np.dot(y.values, z.values)) * y.grid.cell_volume


def laplacian_apply(z: Field) -> Field:
    return z.with_values(laplacian_matrix(z.grid) @ z.values)


def grad_l2_squared(z: Field) -> float:
    """||grad z||_2^2 defined through the quadratic form <z, -Lap z>."""
    lap_z = laplacian_matrix(z.grid) @ z.values
    return max(-float(np.dot(z.values, lap_z)) * z.grid.cell_volume, 0.0)


def norms(z: Field) -> Norms:
    vol = z.grid.cell_volume
    values = z.values
    lap_z = laplacian_matrix(z.grid) @ values

    l2_sq = float(np.dot(values, values)) * vol
    grad_sq = max(-float(np.dot(values, lap_z)) * vol, 0.0)
    lap_sq = float(np.dot(lap_z, lap_z)) * vol

    return Norms(
        l1=float(np.sum(np.abs(values))) * vol,
        l2=math.sqrt(l2_sq),
        linf=float(np.max(np.abs(values))),
        grad_l2=math.sqrt(grad_sq),
        h1=math.sqrt(l2_sq + grad_sq),
        h2=math.sqrt(l2_sq + grad_sq + lap_sq),
        lap_l2=math.sqrt(lap_sq),
    )


def write_snapshot(path, z: Field, t: float):
    """Write a field as a text snapshot: header lines, then one value per line."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = '\n'.join([
        f"dim {z.grid.dim}",
        "cells " + ' '.join(str(n) for n in z.grid.cells),
        "spacing " + ' '.join(repr(h) for h in z.grid.spacing),
        f"time {t!r}",
    ])
    np.savetxt(path, z.values, fmt='%.17g', header=header, comments='# ')
    logger.debug("Wrote snapshot %s", path)


def read_snapshot(path) -> tuple[Field, float]:
    meta = {}
    with open(path, 'r', encoding='utf-8') as f:
        for line in f:
            if not line.startswith('#'):
                break
            key, *rest = line[1:].split()
            meta[key] = rest

    try:
        dim = int(meta['dim'][0])
        cells = tuple(int(n) for n in meta['cells'])
        spacing = tuple(float(h) for h in meta['spacing'])
        t = float(meta['time'][0])
    except (KeyError, IndexError, ValueError) as e:
        raise DomainError(f"malformed snapshot header in {path}: {e}") from e
    if dim != len(cells) or dim != len(spacing):
        raise DomainError(f"inconsistent snapshot header in {path}")

    grid = Grid(tuple(h * n for h, n in zip(spacing, cells)), cells)
    values = np.loadtxt(path, comments='#', ndmin=1)
    return Field(grid, values), t
