"""SVD shrinkage, Schatten-1 norms and the Schatten TT norm."""
from dataclasses import dataclass
import logging

import numpy as np
import scipy.linalg

from ..config.settings import settings
from ..errors import NumericalFailureError, ShapeError
from .tt_core import element_count, ensure_dense_fits, unfold

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SvdResult:
    u: np.ndarray
    s: np.ndarray
    vt: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.u * self.s) @ self.vt


def _as_matrix(m) -> np.ndarray:
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2:
        raise ShapeError(f"expected a matrix, got an array of shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise NumericalFailureError("matrix has non-finite entries")
    return m


def svd(m) -> SvdResult:
    """
    Thin SVD with singular values in descending order.

    gesdd is tried first; on non-convergence the slower gesvd driver is used
    before giving up with NumericalFailureError.
    """
    m = _as_matrix(m)
    try:
        u, s, vt = scipy.linalg.svd(m, full_matrices=False, lapack_driver="gesdd", check_finite=False)
    except np.linalg.LinAlgError:
        logger.warning(f"gesdd did not converge on a {m.shape} matrix, retrying with gesvd")
        try:
            u, s, vt = scipy.linalg.svd(m, full_matrices=False, lapack_driver="gesvd", check_finite=False)
        except np.linalg.LinAlgError as e:
            raise NumericalFailureError(f"SVD failed on a {m.shape} matrix: {e}") from e
    return SvdResult(u=u, s=s, vt=vt)


def singular_values(m) -> np.ndarray:
    m = _as_matrix(m)
    try:
        return scipy.linalg.svd(m, compute_uv=False, check_finite=False)
    except np.linalg.LinAlgError as e:
        raise NumericalFailureError(f"SVD failed on a {m.shape} matrix: {e}") from e


def numerical_rank(m, tol: float = None) -> int:
    """Number of singular values above tol * sigma_max (RANK_TOL by default)."""
    s = singular_values(m)
    if s.size == 0 or s[0] == 0.0:
        return 0
    tol = settings.RANK_TOL if tol is None else tol
    return int(np.count_nonzero(s > tol * s[0]))


def prox_schatten(w, b: float) -> np.ndarray:
    """U max(S - b, 0) V^T, the proximal map of b * ||.||_s."""
    if b < 0:
        raise ShapeError(f"threshold must be non-negative, got {b}")
    w = _as_matrix(w)
    if b == 0:
        return w.copy()
    result = svd(w)
    shrunk = np.maximum(result.s - b, 0.0)
    keep = shrunk > 0
    return (result.u[:, keep] * shrunk[keep]) @ result.vt[keep]


def schatten1(m) -> float:
    return float(np.sum(singular_values(m)))


def schatten_tt_norm(x) -> float:
    """Average Schatten-1 norm of the K-1 unfoldings."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim < 2:
        raise ShapeError(f"Schatten TT norm needs an order >= 2 tensor, got shape {x.shape}")
    ensure_dense_fits(element_count(x.shape), "schatten_tt_norm")
    order = x.ndim
    return sum(schatten1(unfold(x, k)) for k in range(1, order)) / (order - 1)
