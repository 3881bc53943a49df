"""
Very sparse random projections of a tensor's k-th unfolding.

P_k(X) = Pi_{k,1} Q_k(X) Pi_{k,2}^T, where both projection tensors have i.i.d.
entries +-sqrt(s/d) with probability 1/(2s) each and zero otherwise. Only the
nonzeros are stored, so TT inputs can be projected through chain products of
core slices without ever forming Q_k(X).
"""
from dataclasses import dataclass
import logging
import math
from typing import Sequence, Tuple, Union

import numpy as np
import scipy.sparse

from ..config.settings import settings
from ..errors import ShapeError
from ..data.model import SandwichReport
from .proximal import schatten1
from .tt_core import (
    Stream,
    TTTensor,
    chain_cols,
    chain_rows,
    derive_seed,
    element_count,
    make_rng,
    random_tt,
    tt_to_dense,
    unfold,
    validate_shape,
)

logger = logging.getLogger(__name__)

Sparsity = Union[float, str]

_GAP_CHUNK = 1 << 18
_SIGNS = np.array([-1.0, 1.0])


@dataclass(frozen=True)
class SparseProjectionPair:
    """
    Nonzeros of Pi_{k,1} (left, over modes 1..k) and Pi_{k,2} (right, over modes k+1..K).

    Row arrays hold the projected coordinate (d1 or d2), index arrays the
    multi-index into the corresponding modes, signs are +-1.
    """

    shape: Tuple[int, ...]
    k: int
    d1: int
    d2: int
    s_left: float
    s_right: float
    left_rows: np.ndarray
    left_index: np.ndarray
    left_signs: np.ndarray
    right_rows: np.ndarray
    right_index: np.ndarray
    right_signs: np.ndarray

    @property
    def s(self) -> float:
        return self.s_left

    @property
    def left_magnitude(self) -> float:
        return math.sqrt(self.s_left / self.d1)

    @property
    def right_magnitude(self) -> float:
        return math.sqrt(self.s_right / self.d2)

    @property
    def left_values(self) -> np.ndarray:
        return self.left_signs * self.left_magnitude

    @property
    def right_values(self) -> np.ndarray:
        return self.right_signs * self.right_magnitude

    @property
    def nnz(self) -> Tuple[int, int]:
        return int(self.left_rows.size), int(self.right_rows.size)

    def left_matrix(self) -> scipy.sparse.csr_matrix:
        """Pi_{k,1} as a (d1 x I_{<=k}) sparse matrix."""
        cols = np.ravel_multi_index(self.left_index.T, self.shape[: self.k]) if self.left_rows.size else np.zeros(0, np.int64)
        return scipy.sparse.csr_matrix(
            (self.left_values, (self.left_rows, cols)),
            shape=(self.d1, element_count(self.shape[: self.k])),
        )

    def right_matrix(self) -> scipy.sparse.csr_matrix:
        """Pi_{k,2} as a (d2 x I_{k<}) sparse matrix."""
        cols = np.ravel_multi_index(self.right_index.T, self.shape[self.k:]) if self.right_rows.size else np.zeros(0, np.int64)
        return scipy.sparse.csr_matrix(
            (self.right_values, (self.right_rows, cols)),
            shape=(self.d2, element_count(self.shape[self.k:])),
        )


def resolve_sparsity(s: Sparsity, side_size: int) -> float:
    """
    Fixed s, or a rule evaluated per projection side:

    'sqrt': max(3, sqrt(side_size)), about d * sqrt(side_size) nonzeros
    'log':  max(3, side_size / ln(side_size)), about d * ln(side_size) nonzeros,
            which keeps the count linear in the order for a constant mode size
    """
    if s == "sqrt":
        return max(3.0, math.sqrt(side_size))
    if s == "log":
        return max(3.0, side_size / math.log(side_size)) if side_size > 1 else 3.0
    s = float(s)
    if not s > 1.0:
        raise ShapeError(f"sparsity s must be > 1, got {s}")
    return s


def _bernoulli_positions(rng: np.random.Generator, population: int, p: float) -> np.ndarray:
    """Sorted positions of i.i.d. Bernoulli(p) successes in range(population), drawn as geometric gaps."""
    expected = population * p
    chunk = int(min(max(expected + 4.0 * math.sqrt(expected) + 16.0, 1024.0), _GAP_CHUNK))
    parts = []
    last = -1
    while True:
        positions = last + np.cumsum(rng.geometric(p, size=chunk))
        if positions[-1] >= population:
            parts.append(positions[positions < population])
            break
        parts.append(positions)
        last = int(positions[-1])
    return np.concatenate(parts).astype(np.int64, copy=False)


def _sample_side(rng: np.random.Generator, dims: Sequence[int], d: int, s: float):
    # memory is O(nonzeros); the d * prod(dims) potential entries are never enumerated
    side = element_count(dims)
    rows, rem = np.divmod(_bernoulli_positions(rng, d * side, 1.0 / s), side)
    count = rows.size
    index = np.empty((count, len(dims)), dtype=np.int64)
    for j in range(len(dims) - 1, -1, -1):
        rem, index[:, j] = np.divmod(rem, int(dims[j]))
    del rem
    signs = rng.choice(_SIGNS, size=count)
    return rows, index, signs


def sample_projection(shape: Sequence[int], k: int, d1: int, d2: int, s: Sparsity, seed: int) -> SparseProjectionPair:
    """
    Draw Pi_{k,1} and Pi_{k,2} for the k-th unfolding.

    Each potential entry is nonzero with probability 1/s, independently. The
    nonzeros are reached by geometric jumps between successes, so the work
    and memory follow the number of nonzeros, not the unfolding size.
    """
    shape = validate_shape(shape)
    if not 1 <= k <= len(shape) - 1:
        raise ShapeError(f"projection mode k must lie in [1, {len(shape) - 1}], got {k}")
    if d1 < 1 or d2 < 1:
        raise ShapeError(f"projected sizes must be >= 1, got ({d1}, {d2})")
    s_left = resolve_sparsity(s, element_count(shape[:k]))
    s_right = resolve_sparsity(s, element_count(shape[k:]))
    rng = make_rng(seed, Stream.PROJECTION, k)
    left_rows, left_index, left_signs = _sample_side(rng, shape[:k], d1, s_left)
    right_rows, right_index, right_signs = _sample_side(rng, shape[k:], d2, s_right)
    logger.debug(f"projection k={k}: {left_rows.size} left / {right_rows.size} right nonzeros")
    return SparseProjectionPair(
        shape=shape,
        k=k,
        d1=int(d1),
        d2=int(d2),
        s_left=s_left,
        s_right=s_right,
        left_rows=left_rows,
        left_index=left_index,
        left_signs=left_signs,
        right_rows=right_rows,
        right_index=right_index,
        right_signs=right_signs,
    )


def scatter_rows(rows: np.ndarray, weights: np.ndarray, n_rows: int) -> scipy.sparse.csr_matrix:
    """Sparse (n_rows x nnz) matrix summing weighted nonzero contributions into their rows."""
    return scipy.sparse.csr_matrix(
        (weights, (rows, np.arange(rows.size))),
        shape=(n_rows, rows.size),
    )


def _check_shape(p: SparseProjectionPair, shape: Sequence[int]) -> None:
    if tuple(shape) != p.shape:
        raise ShapeError(f"projection drawn for shape {p.shape}, applied to {tuple(shape)}")


def project_dense(p: SparseProjectionPair, x) -> np.ndarray:
    """P_k(X) for a dense tensor, as Pi_1 Q_k(X) Pi_2^T with sparse factors."""
    x = np.asarray(x, dtype=np.float64)
    _check_shape(p, x.shape)
    left = p.left_matrix() @ unfold(x, p.k)
    return np.asarray((p.right_matrix() @ left.T).T)


def projected_left_factor(p: SparseProjectionPair, cores: Sequence[np.ndarray]) -> np.ndarray:
    """Sum over left nonzeros of value * G_1[j_1] ... G_k[j_k]: (d1 x R_k)."""
    chunk = settings.CONTRACTION_CHUNK
    rank = cores[-1].shape[2]
    out = np.zeros((p.d1, rank))
    values = p.left_values
    for start in range(0, p.left_rows.size, chunk):
        stop = start + chunk
        vec = chain_rows(cores, p.left_index[start:stop])
        out += scatter_rows(p.left_rows[start:stop], values[start:stop], p.d1) @ vec
    return out


def projected_right_factor(p: SparseProjectionPair, cores: Sequence[np.ndarray]) -> np.ndarray:
    """Sum over right nonzeros of value * G_{k+1}[j_{k+1}] ... G_K[j_K]: (d2 x R_k)."""
    chunk = settings.CONTRACTION_CHUNK
    rank = cores[0].shape[1]
    out = np.zeros((p.d2, rank))
    values = p.right_values
    for start in range(0, p.right_rows.size, chunk):
        stop = start + chunk
        vec = chain_cols(cores, p.right_index[start:stop])
        out += scatter_rows(p.right_rows[start:stop], values[start:stop], p.d2) @ vec
    return out


def project_tt(p: SparseProjectionPair, tt: TTTensor) -> np.ndarray:
    """P_k(X) for a TT tensor, contracting core slices only along stored nonzeros."""
    _check_shape(p, tt.shape)
    left = projected_left_factor(p, tt.cores[: p.k])
    right = projected_right_factor(p, tt.cores[p.k:])
    return left @ right.T


def sandwich_dimension(rank: int, eps: float) -> int:
    """Projected size needed for the Schatten norm sandwich: max{R, 4(log 6R + log 1/eps)/eps^2}."""
    if not 0 < eps < 1:
        raise ShapeError(f"epsilon must lie in (0, 1), got {eps}")
    return int(math.ceil(max(rank, 4.0 * (math.log(6 * rank) + math.log(1.0 / eps)) / eps ** 2)))


def audit_norm_sandwich(
    shape: Sequence[int],
    ranks: Sequence[int],
    d: int,
    s: Sparsity,
    eps: float,
    trials: int,
    seed: int,
) -> SandwichReport:
    """
    Monte Carlo audit of (1-eps)/R_k ||Q_k||_s <= ||P_k||_s <= (1+eps) ||Q_k||_s.

    The well-spread singular vector condition is not checked per instance;
    random TT tensors are treated as satisfying it and violations show up in
    the reported fractions instead.
    """
    shape = validate_shape(shape)
    ranks = [int(r) for r in ranks]
    if d < max(ranks):
        raise ShapeError(f"projected size {d} is below the largest rank {max(ranks)}")
    if trials < 1:
        raise ShapeError(f"trials must be >= 1, got {trials}")
    threshold = max(sandwich_dimension(r, eps) for r in ranks)

    ratios_by_mode = {k: [] for k in range(1, len(shape))}
    satisfied = upper = 0
    for trial in range(trials):
        tt = random_tt(shape, ranks, seed=derive_seed(seed, trial))
        dense = tt_to_dense(tt)
        for k in range(1, len(shape)):
            exact = schatten1(unfold(dense, k))
            p = sample_projection(shape, k, d, d, s, seed=derive_seed(seed, trial, k))
            ratio = schatten1(project_tt(p, tt)) / exact
            ratios_by_mode[k].append(ratio)
            within_upper = ratio <= 1.0 + eps
            upper += within_upper
            satisfied += within_upper and ratio >= (1.0 - eps) / ranks[k - 1]

    pairs = trials * (len(shape) - 1)
    all_ratios = [r for values in ratios_by_mode.values() for r in values]
    report = SandwichReport(
        pairs=pairs,
        satisfied_fraction=satisfied / pairs,
        upper_fraction=upper / pairs,
        min_ratio=float(min(all_ratios)),
        max_ratio=float(max(all_ratios)),
        threshold_d=threshold,
        threshold_met=d >= threshold,
        epsilon=eps,
        ratios_by_mode=ratios_by_mode,
    )
    logger.info(
        f"Schatten sandwich held for {report.satisfied_fraction:.3f} of {pairs} (mode, trial) pairs; "
        f"ratios in [{report.min_ratio:.3f}, {report.max_ratio:.3f}]"
    )
    return report
