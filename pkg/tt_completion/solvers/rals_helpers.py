"""
Design matrices for one TT-RALS core update.

With every core except G_k fixed, both the masked TT values and each random
projection P_k'(X) are linear in g_k = vec(G_k) (C order over (i_k, r_{k-1}, r_k)):

    Omega   (n x I_k R_{k-1} R_k):        Omega g_k        = X(S)
    Gamma_k' (D1 D2 x I_k R_{k-1} R_k):   Gamma_k' g_k     = vec(P_k'(X))
"""
import logging

import numpy as np

from ..config.settings import settings
from ..tensor.projection import (
    SparseProjectionPair,
    project_tt,
    projected_left_factor,
    projected_right_factor,
    scatter_rows,
)
from ..tensor.tt_core import TTTensor, chain_cols, chain_rows, left_vectors, right_vectors, validate_indices

logger = logging.getLogger(__name__)

# Upper bound on the elements of one per-chunk contribution block.
_BLOCK_ELEMENTS = 4_000_000


def build_omega(tt: TTTensor, k: int, s_idx) -> np.ndarray:
    """Rows are (left interface row) x (right interface column) placed at the observed i_k slot."""
    idx = validate_indices(s_idx, tt.shape)
    n = idx.shape[0]
    dim, r_left, r_right = tt.cores[k - 1].shape
    left = left_vectors(tt, k, idx)
    right = right_vectors(tt, k, idx)
    omega = np.zeros((n, dim, r_left, r_right))
    omega[np.arange(n), idx[:, k - 1]] = left[:, :, None] * right[:, None, :]
    return omega.reshape(n, -1)


def _chunk_size(width: int) -> int:
    return max(1, min(settings.CONTRACTION_CHUNK, _BLOCK_ELEMENTS // max(width, 1)))


def _gamma_left(tt: TTTensor, k: int, p: SparseProjectionPair) -> np.ndarray:
    """Core k sits among modes 1..k' (the left projection side)."""
    kp = p.k
    dim, r_left, r_right = tt.cores[k - 1].shape
    right = projected_right_factor(p, tt.cores[kp:])
    width = r_left * r_right * p.d2
    total = np.zeros((p.d1 * dim, width))
    values = p.left_values
    chunk = _chunk_size(width)
    for start in range(0, p.left_rows.size, chunk):
        stop = start + chunk
        idx = p.left_index[start:stop]
        count = idx.shape[0]
        head = chain_rows(tt.cores[: k - 1], idx[:, : k - 1]) * values[start:stop, None]
        tail = np.broadcast_to(right.T, (count,) + right.T.shape)
        for m in range(kp - 1, k - 1, -1):
            tail = np.einsum("nrs,nsd->nrd", tt.cores[m][idx[:, m]], tail)
        block = (head[:, :, None, None] * tail[:, None, :, :]).reshape(count, width)
        keys = p.left_rows[start:stop] * dim + idx[:, k - 1]
        total += scatter_rows(keys, np.ones(count), p.d1 * dim) @ block
    gamma = total.reshape(p.d1, dim, r_left, r_right, p.d2).transpose(0, 4, 1, 2, 3)
    return gamma.reshape(p.d1 * p.d2, dim * r_left * r_right)


def _gamma_right(tt: TTTensor, k: int, p: SparseProjectionPair) -> np.ndarray:
    """Core k sits among modes k'+1..K (the right projection side)."""
    kp = p.k
    dim, r_left, r_right = tt.cores[k - 1].shape
    left = projected_left_factor(p, tt.cores[:kp])
    width = p.d1 * r_left * r_right
    total = np.zeros((p.d2 * dim, width))
    values = p.right_values
    chunk = _chunk_size(width)
    slot = k - kp - 1
    for start in range(0, p.right_rows.size, chunk):
        stop = start + chunk
        idx = p.right_index[start:stop]
        count = idx.shape[0]
        head = np.broadcast_to(left, (count,) + left.shape)
        for m in range(kp, k - 1):
            head = np.einsum("ndr,nrs->nds", head, tt.cores[m][idx[:, m - kp]])
        tail = chain_cols(tt.cores[k:], idx[:, slot + 1:]) * values[start:stop, None]
        block = (head[:, :, :, None] * tail[:, None, None, :]).reshape(count, width)
        keys = p.right_rows[start:stop] * dim + idx[:, slot]
        total += scatter_rows(keys, np.ones(count), p.d2 * dim) @ block
    gamma = total.reshape(p.d2, dim, p.d1, r_left, r_right).transpose(2, 0, 1, 3, 4)
    return gamma.reshape(p.d1 * p.d2, dim * r_left * r_right)


def build_gamma_columns(tt: TTTensor, k: int, p: SparseProjectionPair) -> np.ndarray:
    """Reference construction: project the TT once per unit vector of core k."""
    core_shape = tt.cores[k - 1].shape
    size = int(np.prod(core_shape))
    gamma = np.zeros((p.d1 * p.d2, size))
    for j in range(size):
        unit = np.zeros(size)
        unit[j] = 1.0
        gamma[:, j] = project_tt(p, tt.with_core(k, unit.reshape(core_shape))).reshape(-1)
    return gamma


def build_gamma(tt: TTTensor, k: int, kp: int, p: SparseProjectionPair, method: str = "contracted") -> np.ndarray:
    """
    Matrix of g_k -> vec(P_k'(X(g_k; other cores))).

    Args:
        tt: Current TT; core k is the varying one
        k: Core position (1-based)
        kp: Unfolding the projection belongs to; must match p.k
        p: Projection pair for unfolding kp
        method: "contracted" (chain contractions over nonzeros) or "columns"
    """
    if p.k != kp:
        raise ValueError(f"projection was drawn for unfolding {p.k}, not {kp}")
    if method == "columns":
        return build_gamma_columns(tt, k, p)
    if k <= kp:
        return _gamma_left(tt, k, p)
    return _gamma_right(tt, k, p)
