from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.io
import scipy.sparse as sp


@dataclass(frozen=True)
class LinearOperator:
    """``x -> A x + u (v . x)`` with sparse ``A`` and optional rank-one ``(u, v)``."""

    matrix: sp.csr_matrix
    rank_one: Optional[tuple[np.ndarray, np.ndarray]] = None

    @classmethod
    def from_system(cls, system) -> "LinearOperator":
        return cls(system.matrix, system.rank_one)

    @property
    def shape(self) -> tuple[int, int]:
        return self.matrix.shape

    def __matmul__(self, x: np.ndarray) -> np.ndarray:
        return self.apply(x)

    def apply(self, x: np.ndarray) -> np.ndarray:
        y = self.matrix @ x
        if self.rank_one is not None:
            u, v = self.rank_one
            y = y + u * (v @ x)
        return y

    def to_dense(self) -> np.ndarray:
        D = self.matrix.toarray()
        if self.rank_one is not None:
            u, v = self.rank_one
            D += np.outer(u, v)
        return D


def spmv(A: sp.csr_matrix, x: np.ndarray) -> np.ndarray:
    return A @ x


def write_matrix_market(path, A, comment: str = "") -> None:
    scipy.io.mmwrite(str(path), sp.coo_matrix(A), comment=comment, precision=17)


def read_matrix_market(path) -> sp.csr_matrix:
    A = sp.csr_matrix(scipy.io.mmread(str(path)))
    A.sort_indices()
    return A
