import numpy as np
import pytest
from hypothesis import given, settings as hyp_settings, strategies as st
from hypothesis.extra.numpy import arrays

from tt_completion.errors import NumericalFailureError, ShapeError
from tt_completion.tensor.proximal import (
    numerical_rank,
    prox_schatten,
    schatten1,
    schatten_tt_norm,
    singular_values,
    svd,
)
from tt_completion.tensor.tt_core import random_tt, tt_to_dense

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


def prox_objective(z, w, b):
    """(1/2)||Z - W||_F^2 + b ||Z||_s, batched over leading axes."""
    sv = np.linalg.svd(z, compute_uv=False)
    return 0.5 * np.sum((z - w) ** 2, axis=(-2, -1)) + b * np.sum(sv, axis=-1)


def grid_beats(w, b, points, width=0.5):
    """True when prox_schatten(w, b) is no worse than every point of a grid around it."""
    z = prox_schatten(w, b)
    offsets = np.linspace(-width, width, points)
    grid = np.stack(np.meshgrid(offsets, offsets, offsets, offsets, indexing="ij"), axis=-1).reshape(-1, 2, 2)
    best_grid = np.min(prox_objective(z + grid, w, b))
    return prox_objective(z, w, b) <= best_grid + 1e-12


class TestSvd:
    """Thin SVD wrapper"""

    def test_identity(self):
        assert np.allclose(svd(np.eye(3)).s, [1, 1, 1])

    def test_diagonal(self):
        assert np.allclose(svd(np.diag([5.0, 2.0])).s, [5, 2])

    def test_reconstruction(self):
        m = np.random.default_rng(0).standard_normal((6, 4))
        result = svd(m)
        assert np.linalg.norm(result.reconstruct() - m) <= 1e-10 * np.linalg.norm(m)
        assert np.all(np.diff(result.s) <= 0)
        assert np.allclose(result.u.T @ result.u, np.eye(4), atol=1e-8)

    def test_non_finite_input(self):
        with pytest.raises(NumericalFailureError):
            svd(np.array([[np.nan, 1.0], [0.0, 1.0]]))

    def test_not_a_matrix(self):
        with pytest.raises(ShapeError):
            svd(np.zeros(3))

    def test_numerical_rank(self):
        u = np.random.default_rng(1).standard_normal((6, 2))
        assert numerical_rank(u @ u.T) == 2
        assert numerical_rank(np.zeros((3, 3))) == 0


class TestProxSchatten:
    """Singular value shrinkage"""

    def test_diagonal_threshold(self):
        assert np.allclose(prox_schatten(np.diag([3.0, 1.0]), 2.0), np.diag([1.0, 0.0]))

    def test_zero_threshold_is_identity(self):
        w = np.random.default_rng(2).standard_normal((5, 3))
        assert np.allclose(prox_schatten(w, 0.0), w, atol=1e-10)

    def test_negative_threshold(self):
        with pytest.raises(ShapeError):
            prox_schatten(np.eye(2), -1.0)

    def test_singular_values_shrink(self):
        w = np.random.default_rng(3).standard_normal((5, 3))
        s = singular_values(w)
        out = singular_values(prox_schatten(w, 0.5))
        assert np.allclose(np.sort(out)[::-1], np.maximum(s - 0.5, 0.0), atol=1e-10)

    def test_large_threshold_kills_everything(self):
        w = np.random.default_rng(4).standard_normal((4, 4))
        assert np.all(prox_schatten(w, 100.0) == 0)

    def test_beats_grid_on_random_problems(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            w = rng.standard_normal((2, 2))
            assert grid_beats(w, 0.5, points=21)

    @pytest.mark.slow
    def test_beats_fine_grid(self):
        rng = np.random.default_rng(6)
        for _ in range(5):
            assert grid_beats(rng.standard_normal((2, 2)), 0.5, points=41)

    @hyp_settings(max_examples=50, deadline=None)
    @given(arrays(np.float64, (4, 3), elements=finite), arrays(np.float64, (4, 3), elements=finite),
           st.floats(0, 5))
    def test_nonexpansive(self, a, b, threshold):
        gap = np.linalg.norm(prox_schatten(a, threshold) - prox_schatten(b, threshold))
        assert gap <= np.linalg.norm(a - b) + 1e-9


class TestSchattenNorms:
    """Schatten-1 and Schatten TT norms"""

    def test_diagonal(self):
        assert schatten1(np.diag([3.0, 1.0])) == pytest.approx(4.0)

    def test_rank_one_unit(self):
        u = np.array([0.6, 0.8])
        v = np.array([1.0, 0.0, 0.0])
        assert schatten1(np.outer(u, v)) == pytest.approx(1.0)

    def test_matches_eigen_oracle(self):
        m = np.random.default_rng(7).standard_normal((4, 4))
        eig = np.linalg.eigvalsh(m.T @ m)
        assert schatten1(m) == pytest.approx(np.sum(np.sqrt(np.maximum(eig, 0))), abs=1e-8)

    def test_at_least_frobenius(self):
        m = np.random.default_rng(8).standard_normal((5, 4))
        assert schatten1(m) >= np.linalg.norm(m) - 1e-12
        r1 = np.outer(np.arange(1.0, 4.0), np.arange(1.0, 3.0))
        assert schatten1(r1) == pytest.approx(np.linalg.norm(r1))

    def test_order_two_is_schatten1(self):
        m = np.random.default_rng(9).standard_normal((3, 5))
        assert schatten_tt_norm(m) == pytest.approx(schatten1(m))

    def test_zero_tensor(self):
        assert schatten_tt_norm(np.zeros((2, 3, 4))) == 0.0

    def test_rank_one_unit_tensor(self):
        x = tt_to_dense(random_tt((3, 3, 3), (1, 1), seed=4))
        x = x / np.linalg.norm(x)
        assert schatten_tt_norm(x) == pytest.approx(1.0, abs=1e-10)

    def test_norm_axioms(self):
        rng = np.random.default_rng(10)
        for _ in range(20):
            a = rng.standard_normal((3, 4, 2))
            b = rng.standard_normal((3, 4, 2))
            c = rng.uniform(-3, 3)
            assert schatten_tt_norm(a + b) <= schatten_tt_norm(a) + schatten_tt_norm(b) + 1e-8
            assert schatten_tt_norm(c * a) == pytest.approx(abs(c) * schatten_tt_norm(a), abs=1e-8)
