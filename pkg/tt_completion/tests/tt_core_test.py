import numpy as np
import pytest
from hypothesis import given, settings as hyp_settings, strategies as st

from tt_completion.errors import ResourceCapError, ShapeError
from tt_completion.tensor.proximal import numerical_rank
from tt_completion.tensor.tt_core import (
    TTTensor,
    derive_seed,
    element_count,
    ensure_dense_fits,
    fold,
    frobenius_distance,
    left_interface,
    left_vectors,
    make_rng,
    random_tt,
    right_interface,
    right_vectors,
    tt_element,
    tt_inner,
    tt_to_dense,
    tt_values,
    unfold,
)


@st.composite
def tt_instances(draw, max_order=5, max_dim=6, max_rank=4):
    order = draw(st.integers(2, max_order))
    shape = draw(st.lists(st.integers(1, max_dim), min_size=order, max_size=order))
    ranks = draw(st.lists(st.integers(1, max_rank), min_size=order - 1, max_size=order - 1))
    seed = draw(st.integers(0, 2**31))
    return random_tt(shape, ranks, seed=seed)


class TestTTTensor:
    """Construction and validation of TT tensors"""

    @pytest.fixture
    def small_tt(self):
        return random_tt((3, 4, 5), (2, 3), seed=7)

    def test_shape_and_ranks(self, small_tt):
        assert small_tt.order == 3
        assert small_tt.shape == (3, 4, 5)
        assert small_tt.ranks == (2, 3)

    def test_cores_are_read_only(self, small_tt):
        with pytest.raises(ValueError):
            small_tt.cores[0][0, 0, 0] = 1.0

    def test_boundary_ranks_must_be_one(self):
        with pytest.raises(ShapeError):
            TTTensor((np.ones((2, 2, 1)), np.ones((2, 1, 1))))

    def test_rank_mismatch_rejected(self):
        with pytest.raises(ShapeError):
            TTTensor((np.ones((2, 1, 2)), np.ones((2, 3, 1))))

    def test_single_core_rejected(self):
        with pytest.raises(ShapeError):
            TTTensor((np.ones((2, 1, 1)),))

    def test_with_core_replaces_one_core(self, small_tt):
        replaced = small_tt.with_core(2, np.zeros((4, 2, 3)))
        assert np.all(replaced.cores[1] == 0)
        assert np.array_equal(replaced.cores[0], small_tt.cores[0])
        assert np.all(tt_to_dense(replaced) == 0)


class TestEvaluation:
    """Element evaluation against the dense oracle"""

    def test_rank_one_all_ones(self):
        tt = TTTensor((np.ones((2, 1, 1)), np.ones((3, 1, 1)), np.ones((2, 1, 1))))
        assert tt_element(tt, (1, 2, 0)) == 1.0
        assert np.all(tt_to_dense(tt) == 1.0)

    def test_out_of_range_index(self):
        tt = random_tt((2, 2), (1,), seed=0)
        with pytest.raises(ShapeError):
            tt_element(tt, (2, 0))

    def test_dense_cap_refused(self):
        tt = TTTensor(tuple(np.ones((10, 1, 1)) for _ in range(9)))
        with pytest.raises(ResourceCapError):
            tt_to_dense(tt)

    def test_element_count_overflow(self):
        with pytest.raises(ResourceCapError):
            element_count([10] * 20)

    def test_ensure_dense_fits_custom_cap(self):
        ensure_dense_fits(10, "scratch buffer", cap=10)
        with pytest.raises(ResourceCapError):
            ensure_dense_fits(11, "scratch buffer", cap=10)

    @hyp_settings(max_examples=100, deadline=None)
    @given(tt_instances())
    def test_values_match_dense(self, tt):
        dense = tt_to_dense(tt)
        idx = np.stack(np.unravel_index(np.arange(dense.size), tt.shape), axis=1)
        scale = max(np.linalg.norm(dense), 1.0)
        assert np.max(np.abs(tt_values(tt, idx) - dense.reshape(-1))) <= 1e-10 * scale
        assert abs(tt_element(tt, idx[-1]) - dense.reshape(-1)[-1]) <= 1e-10 * scale


class TestUnfolding:
    """Unfolding bijection and TT rank bound"""

    @hyp_settings(max_examples=50, deadline=None)
    @given(st.lists(st.integers(1, 4), min_size=2, max_size=5), st.data())
    def test_fold_unfold_identity(self, shape, data):
        k = data.draw(st.integers(1, len(shape) - 1))
        x = np.arange(np.prod(shape), dtype=float).reshape(shape)
        assert np.array_equal(fold(unfold(x, k), k, shape), x)

    def test_unfold_is_row_major(self):
        x = np.arange(24).reshape(2, 3, 4)
        assert unfold(x, 2).shape == (6, 4)
        assert unfold(x, 1)[1, 0] == 12

    def test_bad_fold_shape(self):
        with pytest.raises(ShapeError):
            fold(np.zeros((3, 3)), 1, (2, 4))

    def test_bad_mode(self):
        with pytest.raises(ShapeError):
            unfold(np.zeros((2, 2)), 2)

    def test_rank_bound_of_random_tt(self):
        for seed in range(50):
            tt = random_tt((4, 5, 4, 5), (2, 3, 2), seed=seed)
            dense = tt_to_dense(tt)
            for k, r in enumerate(tt.ranks, start=1):
                assert numerical_rank(unfold(dense, k), tol=1e-8) <= r

    def test_grid_ranks_exact(self):
        tt = random_tt((8, 8, 10, 10), (3, 5, 7), seed=3)
        dense = tt_to_dense(tt)
        assert [numerical_rank(unfold(dense, k), tol=1e-8) for k in (1, 2, 3)] == [3, 5, 7]


class TestInterfaces:
    """Left/right interfaces and their per-index rows"""

    @pytest.fixture
    def tt(self):
        return random_tt((3, 2, 4, 3), (2, 3, 2), seed=11)

    @pytest.mark.parametrize("k", [1, 2, 3, 4])
    def test_interfaces_reconstruct_dense(self, tt, k):
        left = left_interface(tt, k)
        right = right_interface(tt, k)
        core = tt.cores[k - 1]
        rebuilt = np.einsum("ar,irs,sb->aib", left, core, right).reshape(tt.shape)
        dense = tt_to_dense(tt)
        assert np.linalg.norm(rebuilt - dense) <= 1e-10 * np.linalg.norm(dense)

    def test_boundary_interfaces_are_scalar_one(self, tt):
        assert left_interface(tt, 1).shape == (1, 1)
        assert right_interface(tt, 4).shape == (1, 1)

    def test_interface_shapes(self, tt):
        assert left_interface(tt, 3).shape == (6, 3)
        assert right_interface(tt, 2).shape == (3, 12)

    @pytest.mark.parametrize("k", [1, 2, 3, 4])
    def test_vectors_select_interface_rows(self, tt, k):
        idx = np.stack(np.unravel_index(np.arange(72), tt.shape), axis=1)
        left_rows = np.ravel_multi_index(idx[:, : k - 1].T, tt.shape[: k - 1]) if k > 1 else np.zeros(72, int)
        right_cols = np.ravel_multi_index(idx[:, k:].T, tt.shape[k:]) if k < 4 else np.zeros(72, int)
        assert np.allclose(left_vectors(tt, k, idx), left_interface(tt, k)[left_rows], atol=1e-12)
        assert np.allclose(right_vectors(tt, k, idx), right_interface(tt, k)[:, right_cols].T, atol=1e-12)


class TestRandomTT:
    """Seeded construction"""

    def test_unit_core_norms(self):
        tt = random_tt((5, 6, 7), (3, 2), seed=123)
        for core in tt.cores:
            assert abs(np.linalg.norm(core) - 1.0) <= 1e-12

    def test_deterministic(self):
        a = random_tt((4, 4, 4), (2, 2), seed=9)
        b = random_tt((4, 4, 4), (2, 2), seed=9)
        assert all(np.array_equal(x, y) for x, y in zip(a.cores, b.cores))

    def test_wrong_rank_count(self):
        with pytest.raises(ShapeError):
            random_tt((4, 4, 4), (2,), seed=0)

    def test_streams_are_independent(self):
        a = make_rng(5, 1).standard_normal(4)
        b = make_rng(5, 2).standard_normal(4)
        assert not np.allclose(a, b)

    def test_derive_seed_is_stable_and_distinct(self):
        assert derive_seed(42, 1, 2) == derive_seed(42, 1, 2)
        assert derive_seed(42, 1, 2) != derive_seed(42, 2, 1)
        assert 0 <= derive_seed(42, 7) < 2**63


class TestDistance:
    """Frobenius distance over dense and TT operands"""

    def test_zero_vs_ones(self):
        assert frobenius_distance(np.zeros((2, 2)), np.ones((2, 2))) == 2.0

    def test_tt_vs_its_dense(self):
        tt = random_tt((3, 4, 5), (2, 2), seed=1)
        assert frobenius_distance(tt, tt_to_dense(tt)) <= 1e-12

    def test_inner_matches_dense(self):
        a = random_tt((3, 4, 5), (2, 2), seed=1)
        b = random_tt((3, 4, 5), (3, 1), seed=2)
        assert abs(tt_inner(a, b) - np.sum(tt_to_dense(a) * tt_to_dense(b))) <= 1e-12

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            frobenius_distance(np.zeros((2, 2)), np.zeros((2, 3)))
