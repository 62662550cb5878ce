"""Amari-index for block-permutation quality of a global matrix."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import DimensionError, LinearMap


class DegenerateMatrixError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class GlobalMatrix:
    matrix: np.ndarray
    block_dim: int

    def __post_init__(self):
        G = np.asarray(self.matrix, dtype=float)
        if G.ndim != 2 or G.shape[0] != G.shape[1]:
            raise DimensionError(f"global matrix must be square, got {G.shape}")
        if self.block_dim < 1 or G.shape[0] % self.block_dim:
            raise DimensionError(f"size {G.shape[0]} is not a multiple of block_dim={self.block_dim}")
        object.__setattr__(self, "matrix", G)

    @property
    def num_blocks(self) -> int:
        return self.matrix.shape[0] // self.block_dim


def global_matrix(w_isa: LinearMap, w_pca: LinearMap, h0: LinearMap, block_dim: int) -> GlobalMatrix:
    """``G = W_isa W_pca H0``."""
    return GlobalMatrix((w_isa @ w_pca @ h0).matrix, block_dim)


def block_sums(G: np.ndarray, d: int) -> np.ndarray:
    """``g[i, j]`` = sum of absolute values in block (i, j)."""
    M = G.shape[0] // d
    return np.abs(G).reshape(M, d, M, d).sum(axis=(1, 3))


def amari_index(G: GlobalMatrix) -> float:
    """Normalized Amari-error adapted to d x d blocks; 0 for block permutations, at most 1."""
    M = G.num_blocks
    if M < 2:
        raise DimensionError("Amari-index needs at least two blocks")
    g = block_sums(G.matrix, G.block_dim)
    row_max = g.max(axis=1)
    col_max = g.max(axis=0)
    if np.any(row_max == 0) or np.any(col_max == 0):
        raise DegenerateMatrixError("global matrix has an all-zero block row or column")
    rows = (g.sum(axis=1) / row_max - 1).sum()
    cols = (g.sum(axis=0) / col_max - 1).sum()
    r = (rows + cols) / (2 * M * (M - 1))
    return float(min(max(r, 0.0), 1.0))


def is_block_permutation(G: GlobalMatrix, tol: float = 1e-3) -> bool:
    """True iff every block row and block column has exactly one dominant block.

    A block is dominant when its Frobenius mass exceeds ``tol`` times the
    average mass per block row (total mass / M).
    """
    M, d = G.num_blocks, G.block_dim
    mass = np.sqrt((G.matrix ** 2).reshape(M, d, M, d).sum(axis=(1, 3)))
    total = mass.sum()
    if total == 0:
        return False
    big = mass > tol * total / M
    return bool(np.all(big.sum(axis=0) == 1) and np.all(big.sum(axis=1) == 1))


def format_percent(r: float) -> str:
    return f"{100 * r:.2f}"
