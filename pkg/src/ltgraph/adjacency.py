"""Symmetric adjacency normalization for graph convolutions.

Builds A_hat = D_tilde^{-1/2} (A + I) D_tilde^{-1/2} with D_tilde = D + I.
The self-loop term keeps isolated nodes well defined (their row is just
the 1.0 diagonal entry), and the matrix satisfies the eigenpair identity
A_hat (D_tilde^{1/2} 1) = D_tilde^{1/2} 1, which the tests use as the
normalization oracle.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .data import GraphBundle


@dataclass(frozen=True)
class NormalizedAdjacency:
    """Sparse CSR A_hat plus the self-loop-augmented degree vector."""

    matrix: sp.csr_matrix
    degrees: np.ndarray  # d_tilde = degree + 1, float64

    @property
    def num_nodes(self) -> int:
        return self.matrix.shape[0]

    def dot(self, dense: np.ndarray) -> np.ndarray:
        """A_hat @ dense, preserving the dense operand's dtype."""
        mat = self.matrix
        if dense.dtype != mat.dtype:
            mat = mat.astype(dense.dtype)
        return mat @ dense

    def astype(self, dtype) -> "NormalizedAdjacency":
        return NormalizedAdjacency(self.matrix.astype(dtype), self.degrees)


def normalized_adjacency(bundle: GraphBundle) -> NormalizedAdjacency:
    """Compute A_hat for a bundle.

    Every stored edge (u, v) contributes the symmetric pair of entries
    1/sqrt(d_tilde_u * d_tilde_v); every node contributes the diagonal
    entry 1/d_tilde_i from its self-loop.
    """
    n = bundle.num_nodes
    d_tilde = (bundle.degrees() + 1).astype(np.float64)
    inv_sqrt = 1.0 / np.sqrt(d_tilde)

    u = bundle.edges[:, 0]
    v = bundle.edges[:, 1]
    rows = np.concatenate([u, v, np.arange(n)])
    cols = np.concatenate([v, u, np.arange(n)])
    vals = np.concatenate(
        [inv_sqrt[u] * inv_sqrt[v], inv_sqrt[u] * inv_sqrt[v], 1.0 / d_tilde]
    )
    mat = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    return NormalizedAdjacency(matrix=mat, degrees=d_tilde)
