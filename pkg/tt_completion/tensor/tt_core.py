"""
Tensor-train (TT) data structure and the contractions both solvers rely on.

A TT tensor of order K stores one order-3 core per mode. Core k has shape
(I_k, R_{k-1}, R_k) with R_0 = R_K = 1, and element (i_1, ..., i_K) is the
matrix product G_1[i_1] G_2[i_2] ... G_K[i_K] of the core slices.

Dense tensors and matrices are plain C-ordered numpy arrays, so every
linearisation in the package is row-major with the last index fastest.
"""
from dataclasses import dataclass
from enum import IntEnum
import logging
import math
from typing import Sequence, Tuple, Union

import numpy as np

from ..config.settings import settings
from ..errors import ResourceCapError, ShapeError

logger = logging.getLogger(__name__)

_INT64_MAX = np.iinfo(np.int64).max


class Stream(IntEnum):
    """Sub-stream labels so independent random draws never share a generator."""

    TT_CORES = 1
    MASK = 2
    NOISE = 3
    PROJECTION = 4
    RESTART = 5
    CHAIN = 6
    KERNEL = 7
    MARKOV_SAMPLE = 8


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """Counter-based (Philox) generator keyed by a seed and an optional stream path."""
    entropy = [int(seed)] + [int(s) for s in stream]
    if any(e < 0 for e in entropy):
        raise ShapeError(f"seeds and stream ids must be non-negative, got {entropy}")
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


def validate_shape(dims: Sequence[int]) -> Tuple[int, ...]:
    """Check K >= 2 and every I_k >= 1; return the shape as a tuple of ints."""
    shape = tuple(int(d) for d in dims)
    if len(shape) < 2:
        raise ShapeError(f"tensor order must be at least 2, got shape {shape}")
    if any(d < 1 for d in shape):
        raise ShapeError(f"every mode size must be >= 1, got shape {shape}")
    return shape


def element_count(dims: Sequence[int]) -> int:
    """Total number of elements, checked against int64 overflow."""
    total = math.prod(int(d) for d in dims)
    if total > _INT64_MAX:
        raise ResourceCapError(f"element count of shape {tuple(dims)} overflows int64", requested=total)
    return total


def ensure_dense_fits(count: int, what: str, cap: int = None) -> None:
    """Refuse dense materialisations above the configured cap."""
    cap = settings.DENSE_CAP if cap is None else cap
    if count > cap:
        raise ResourceCapError(
            f"{what} needs {count} dense elements, above the cap of {cap} (TTC_DENSE_CAP)",
            requested=count,
            cap=cap,
        )


def validate_indices(indices, shape: Sequence[int]) -> np.ndarray:
    """Return indices as an (n, K) int64 array after range checks."""
    idx = np.asarray(indices, dtype=np.int64)
    if idx.ndim == 1:
        idx = idx.reshape(1, -1)
    if idx.ndim != 2 or idx.shape[1] != len(shape):
        raise ShapeError(f"indices must have shape (n, {len(shape)}), got {idx.shape}")
    if idx.size and (np.any(idx < 0) or np.any(idx >= np.asarray(shape, dtype=np.int64))):
        raise ShapeError(f"index out of range for shape {tuple(shape)}")
    return idx


@dataclass(frozen=True)
class TTTensor:
    """
    Immutable TT tensor.

    Attributes
    ----------
    cores : tuple of np.ndarray
        K read-only cores, cores[k] of shape (I_k, R_{k-1}, R_k)
    """

    cores: Tuple[np.ndarray, ...]

    def __post_init__(self):
        cores = tuple(np.array(core, dtype=np.float64, copy=True) for core in self.cores)
        if len(cores) < 2:
            raise ShapeError(f"a TT tensor needs at least 2 cores, got {len(cores)}")
        for k, core in enumerate(cores):
            if core.ndim != 3:
                raise ShapeError(f"core {k} must be 3-dimensional, got shape {core.shape}")
            if min(core.shape) < 1:
                raise ShapeError(f"core {k} is empty: {core.shape}")
            if not np.all(np.isfinite(core)):
                raise ShapeError(f"core {k} has non-finite entries")
        if cores[0].shape[1] != 1 or cores[-1].shape[2] != 1:
            raise ShapeError("boundary ranks R_0 and R_K must be 1")
        for k in range(len(cores) - 1):
            if cores[k].shape[2] != cores[k + 1].shape[1]:
                raise ShapeError(
                    f"rank mismatch between cores {k} and {k + 1}: "
                    f"{cores[k].shape[2]} != {cores[k + 1].shape[1]}"
                )
        for core in cores:
            core.setflags(write=False)
        object.__setattr__(self, "cores", cores)

    @property
    def order(self) -> int:
        return len(self.cores)

    @property
    def shape(self) -> Tuple[int, ...]:
        return tuple(core.shape[0] for core in self.cores)

    @property
    def ranks(self) -> Tuple[int, ...]:
        """Internal TT ranks (R_1, ..., R_{K-1})."""
        return tuple(core.shape[2] for core in self.cores[:-1])

    def with_core(self, k: int, core: np.ndarray) -> "TTTensor":
        """Copy with core k (1-based) replaced."""
        cores = list(self.cores)
        cores[k - 1] = core
        return TTTensor(tuple(cores))

    def __repr__(self) -> str:
        return f"TTTensor(shape={self.shape}, ranks={self.ranks})"


def _check_mode(k: int, low: int, high: int, what: str) -> None:
    if not low <= k <= high:
        raise ShapeError(f"{what} must lie in [{low}, {high}], got {k}")


def tt_element(tt: TTTensor, index: Sequence[int]) -> float:
    """Evaluate one element as the product of core slices."""
    idx = validate_indices([index], tt.shape)[0]
    row = np.ones((1, 1))
    for core, i in zip(tt.cores, idx):
        row = row @ core[i]
    return float(row[0, 0])


def tt_values(tt: TTTensor, indices) -> np.ndarray:
    """Evaluate the TT at a batch of (n, K) indices without densifying."""
    idx = validate_indices(indices, tt.shape)
    return chain_rows(tt.cores, idx)[:, 0]


def tt_to_dense(tt: TTTensor) -> np.ndarray:
    """Materialise the full tensor (subject to the dense cap)."""
    ensure_dense_fits(element_count(tt.shape), "tt_to_dense")
    out = np.ones((1, 1))
    for core in tt.cores:
        out = np.einsum("ar,irs->ais", out, core).reshape(-1, core.shape[2])
    return out.reshape(tt.shape)


def unfold(x: np.ndarray, k: int) -> np.ndarray:
    """Q_k(X): modes 1..k index rows, modes k+1..K index columns."""
    x = np.asarray(x)
    _check_mode(k, 1, x.ndim - 1, "unfolding mode k")
    rows = math.prod(x.shape[:k])
    return np.ascontiguousarray(x).reshape(rows, -1)


def fold(m: np.ndarray, k: int, shape: Sequence[int]) -> np.ndarray:
    """Inverse of unfold for the given shape."""
    shape = validate_shape(shape)
    _check_mode(k, 1, len(shape) - 1, "unfolding mode k")
    m = np.asarray(m)
    expected = (math.prod(shape[:k]), math.prod(shape[k:]))
    if m.shape != expected:
        raise ShapeError(f"matrix of shape {m.shape} cannot fold at k={k}; expected {expected}")
    return np.ascontiguousarray(m).reshape(shape)


def left_interface(tt: TTTensor, k: int) -> np.ndarray:
    """G_{<k}: (I_{<k} x R_{k-1}) contraction of cores 1..k-1; ((1)) for k=1."""
    _check_mode(k, 1, tt.order, "interface position k")
    rows = element_count(tt.shape[: k - 1])
    ensure_dense_fits(rows * tt.cores[k - 1].shape[1], f"left_interface(k={k})")
    out = np.ones((1, 1))
    for core in tt.cores[: k - 1]:
        out = np.einsum("ar,irs->ais", out, core).reshape(-1, core.shape[2])
    return out


def right_interface(tt: TTTensor, k: int) -> np.ndarray:
    """G_{k<}: (R_k x I_{k<}) contraction of cores k+1..K; ((1)) for k=K."""
    _check_mode(k, 1, tt.order, "interface position k")
    cols = element_count(tt.shape[k:])
    ensure_dense_fits(cols * tt.cores[k - 1].shape[2], f"right_interface(k={k})")
    out = np.ones((1, 1))
    for core in reversed(tt.cores[k:]):
        out = np.einsum("irs,sb->rib", core, out).reshape(core.shape[1], -1)
    return out


def left_vectors(tt: TTTensor, k: int, indices) -> np.ndarray:
    """Rows of G_{<k} selected by the first k-1 coordinates of each index: (n, R_{k-1})."""
    idx = np.asarray(indices, dtype=np.int64)
    return chain_rows(tt.cores[: k - 1], idx[:, : k - 1])


def right_vectors(tt: TTTensor, k: int, indices) -> np.ndarray:
    """Columns of G_{k<} selected by coordinates k+1..K of each index: (n, R_k)."""
    idx = np.asarray(indices, dtype=np.int64)
    return chain_cols(tt.cores[k:], idx[:, k:])


def random_tt(shape: Sequence[int], ranks: Sequence[int], seed: int) -> TTTensor:
    """Gaussian cores, each scaled to unit Frobenius norm."""
    shape = validate_shape(shape)
    ranks = [int(r) for r in ranks]
    if len(ranks) != len(shape) - 1 or any(r < 1 for r in ranks):
        raise ShapeError(f"need {len(shape) - 1} positive ranks for shape {shape}, got {ranks}")
    full = [1] + ranks + [1]
    rng = make_rng(seed, Stream.TT_CORES)
    cores = []
    for k, dim in enumerate(shape):
        core = rng.standard_normal((dim, full[k], full[k + 1]))
        cores.append(core / np.linalg.norm(core))
    return TTTensor(tuple(cores))


def tt_inner(a: TTTensor, b: TTTensor) -> float:
    """<A, B> through the chain of transfer matrices."""
    if a.shape != b.shape:
        raise ShapeError(f"shape mismatch: {a.shape} vs {b.shape}")
    transfer = np.ones((1, 1))
    for ca, cb in zip(a.cores, b.cores):
        transfer = np.einsum("ab,iac,ibd->cd", transfer, ca, cb)
    return float(transfer[0, 0])


def frobenius_distance(a: Union[np.ndarray, TTTensor], b: Union[np.ndarray, TTTensor]) -> float:
    """||A - B||_F for any mix of dense and TT operands."""
    shape_a = a.shape if isinstance(a, TTTensor) else np.shape(a)
    shape_b = b.shape if isinstance(b, TTTensor) else np.shape(b)
    if tuple(shape_a) != tuple(shape_b):
        raise ShapeError(f"shape mismatch: {tuple(shape_a)} vs {tuple(shape_b)}")
    if isinstance(a, TTTensor) and isinstance(b, TTTensor):
        try:
            return float(np.linalg.norm(tt_to_dense(a) - tt_to_dense(b)))
        except ResourceCapError:
            logger.debug("TT distance above the dense cap; using transfer-matrix inner products")
            squared = tt_inner(a, a) + tt_inner(b, b) - 2.0 * tt_inner(a, b)
            return float(np.sqrt(max(squared, 0.0)))
    dense_a = tt_to_dense(a) if isinstance(a, TTTensor) else np.asarray(a, dtype=np.float64)
    dense_b = tt_to_dense(b) if isinstance(b, TTTensor) else np.asarray(b, dtype=np.float64)
    return float(np.linalg.norm(dense_a - dense_b))


def derive_seed(seed: int, *keys: int) -> int:
    """Deterministic 63-bit child seed for (seed, *keys)."""
    state = np.random.SeedSequence([int(seed)] + [int(k) for k in keys]).generate_state(2, dtype=np.uint32)
    return int((int(state[0]) << 31) ^ int(state[1]))


def chain_rows(cores: Sequence[np.ndarray], indices, start: np.ndarray = None) -> np.ndarray:
    """Row vectors start[n] @ cores[0][i_0] @ ... for each index row: (n, R_last)."""
    idx = np.asarray(indices, dtype=np.int64)
    vec = np.ones((idx.shape[0], 1)) if start is None else start
    for m, core in enumerate(cores):
        vec = np.einsum("nr,nrs->ns", vec, core[idx[:, m]])
    return vec


def chain_cols(cores: Sequence[np.ndarray], indices, end: np.ndarray = None) -> np.ndarray:
    """Column vectors cores[0][i_0] @ ... @ end[n] for each index row: (n, R_first)."""
    idx = np.asarray(indices, dtype=np.int64)
    vec = np.ones((idx.shape[0], 1)) if end is None else end
    for m in range(len(cores) - 1, -1, -1):
        vec = np.einsum("nrs,ns->nr", cores[m][idx[:, m]], vec)
    return vec
