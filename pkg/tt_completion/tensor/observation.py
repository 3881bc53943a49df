"""
Observation model: uniform masks, the rearranging operator and its adjoint,
additive Gaussian noise, and the lambda calibration floor.
"""
from dataclasses import dataclass
import logging
from typing import Sequence, Tuple, Union

import numpy as np

from ..errors import ShapeError
from .tt_core import (
    Stream,
    TTTensor,
    element_count,
    ensure_dense_fits,
    make_rng,
    tt_values,
    validate_indices,
    validate_shape,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ObservationSet:
    """
    Observed entries Y at the index set S.

    Attributes
    ----------
    shape : tuple of int
        Shape of the underlying tensor
    indices : np.ndarray
        (n, K) int64 array of distinct multi-indices
    values : np.ndarray
        (n,) observed values
    """

    shape: Tuple[int, ...]
    indices: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        shape = validate_shape(self.shape)
        indices = validate_indices(self.indices, shape).copy()
        values = np.array(self.values, dtype=np.float64, copy=True).reshape(-1)
        n = indices.shape[0]
        if n < 1:
            raise ShapeError("an observation set needs at least one entry")
        if n > element_count(shape):
            raise ShapeError(f"{n} observations exceed the {element_count(shape)} cells of {shape}")
        if values.shape[0] != n:
            raise ShapeError(f"{values.shape[0]} values for {n} indices")
        if not np.all(np.isfinite(values)):
            raise ShapeError("observed values must be finite")
        flat = np.ravel_multi_index(indices.T, shape)
        if np.unique(flat).size != n:
            raise ShapeError("observation indices must be pairwise distinct")
        indices.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "indices", indices)
        object.__setattr__(self, "values", values)

    @property
    def n(self) -> int:
        return int(self.indices.shape[0])

    def flat_indices(self) -> np.ndarray:
        return np.ravel_multi_index(self.indices.T, self.shape)


def sample_mask(shape: Sequence[int], n: int, seed: int) -> np.ndarray:
    """n distinct indices drawn uniformly without replacement, as an (n, K) array."""
    shape = validate_shape(shape)
    total = element_count(shape)
    if not 1 <= n <= total:
        raise ShapeError(f"mask size must lie in [1, {total}], got {n}")
    rng = make_rng(seed, Stream.MASK)
    flat = rng.choice(total, size=n, replace=False)
    return np.stack(np.unravel_index(flat, shape), axis=1).astype(np.int64)


def apply_mask(x: Union[np.ndarray, TTTensor], s) -> np.ndarray:
    """X(S): the values of X at the index set, TT inputs evaluated without densifying."""
    if isinstance(x, TTTensor):
        return tt_values(x, s)
    x = np.asarray(x, dtype=np.float64)
    idx = validate_indices(s, x.shape)
    return x[tuple(idx.T)]


def adjoint_mask(v, s, shape: Sequence[int]) -> np.ndarray:
    """Embed v at the index set into an otherwise zero tensor."""
    shape = validate_shape(shape)
    idx = validate_indices(s, shape)
    v = np.asarray(v, dtype=np.float64).reshape(-1)
    if v.shape[0] != idx.shape[0]:
        raise ShapeError(f"{v.shape[0]} values for {idx.shape[0]} indices")
    ensure_dense_fits(element_count(shape), "adjoint_mask")
    out = np.zeros(shape)
    np.add.at(out, tuple(idx.T), v)
    return out


def observe(x_true: Union[np.ndarray, TTTensor], s, sigma: float, seed: int) -> ObservationSet:
    """Y = X*(S) + eps with eps ~ N(0, sigma^2) i.i.d."""
    if sigma < 0:
        raise ShapeError(f"noise level must be non-negative, got {sigma}")
    shape = x_true.shape if isinstance(x_true, TTTensor) else np.shape(x_true)
    clean = apply_mask(x_true, s)
    if sigma > 0:
        clean = clean + sigma * make_rng(seed, Stream.NOISE).standard_normal(clean.shape[0])
    return ObservationSet(shape=tuple(shape), indices=np.asarray(s), values=clean)


def lambda_floor(noise, s, shape: Sequence[int]) -> float:
    """||X*(E)||_inf / n for distinct indices, i.e. max |noise_i| / n."""
    shape = validate_shape(shape)
    idx = validate_indices(s, shape)
    noise = np.asarray(noise, dtype=np.float64).reshape(-1)
    if noise.shape[0] != idx.shape[0]:
        raise ShapeError(f"{noise.shape[0]} noise values for {idx.shape[0]} indices")
    if noise.size == 0:
        return 0.0
    return float(np.max(np.abs(noise)) / noise.shape[0])
