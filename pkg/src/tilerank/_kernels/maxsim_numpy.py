"""Pure-NumPy MaxSim kernels.

Similarities are computed with `np.einsum(optimize=False)` rather than a
BLAS matmul: einsum reduces each output element independently, so the
similarity of a (query token, doc token) pair does not depend on how many
other doc tokens sit in the matrix. That keeps prefix scores exactly
monotone in the prefix length.
"""

from __future__ import annotations

import numpy as np


def sim_matrix(q64: np.ndarray, d64: np.ndarray) -> np.ndarray:
    return np.einsum("ik,jk->ij", q64, d64, optimize=False)


def maxsim_score(q64: np.ndarray, d64: np.ndarray) -> float:
    """Sum over query tokens of the max dot product against doc tokens."""
    sims = sim_matrix(q64, d64)
    return float(np.sum(sims.max(axis=1)))


def maxsim_argmax(q64: np.ndarray, d64: np.ndarray):
    """Per query token: (max similarity, index of the first maximizing doc token)."""
    sims = sim_matrix(q64, d64)
    idx = sims.argmax(axis=1)
    vals = sims[np.arange(sims.shape[0]), idx]
    return vals, idx.astype(np.int64)
