import itertools

import numpy as np
import pytest

from tt_completion.data.model import MarkovSpec, RalsConfig, SolverConfig
from tt_completion.errors import ResourceCapError, ShapeError
from tt_completion.experiments.markov import (
    MARKOV_COLUMNS,
    build_markov_tensor,
    discretize,
    kernel_values,
    load_symbols,
    markov_tensor_from_symbols,
    prediction_error,
    random_kernel,
    run_markov_cell,
    simulate_chain,
)


def all_indices(shape):
    return np.array(list(itertools.product(*(range(d) for d in shape))))


class TestDiscretize:
    """Equal-mass binning"""

    def test_balanced_bins(self):
        series = np.random.default_rng(0).uniform(size=10_000)
        symbols, edges = discretize(series, 4)
        assert edges.shape == (3,)
        counts = np.bincount(symbols, minlength=4)
        assert np.all(np.abs(counts - 2500) <= 100)

    def test_constant_series_single_symbol(self):
        symbols, _ = discretize(np.full(50, 3.0), 5)
        assert np.unique(symbols).size == 1

    def test_edges_reused_for_held_out_split(self):
        _, edges = discretize(np.arange(100.0), 4)
        held_out, _ = discretize([-1.0, 200.0], 4, edges=edges)
        assert list(held_out) == [0, 3]

    def test_invalid(self):
        with pytest.raises(ShapeError):
            discretize([1.0, 2.0], 1)
        with pytest.raises(ShapeError):
            discretize([1.0, np.nan], 2)


class TestMarkovTensor:
    """Sparse empirical transition tensors"""

    def test_alternating_chain(self):
        tensor = markov_tensor_from_symbols([0, 1, 0, 1, 0, 1], bins=2, order=2)
        assert list(tensor.values_at([[0, 1], [0, 0], [1, 0], [1, 1]])) == [1.0, 0.0, 1.0, 0.0]

    def test_visited_slices_sum_to_one(self):
        symbols = np.random.default_rng(1).integers(0, 3, size=500)
        tensor = markov_tensor_from_symbols(symbols, bins=3, order=3)
        values = tensor.values_at(tensor.history_slices()).reshape(-1, 3)
        assert np.allclose(values.sum(axis=1), 1.0)

    def test_unvisited_history_is_uniform(self):
        tensor = markov_tensor_from_symbols([0, 0, 0, 0], bins=3, order=2)
        assert np.allclose(tensor.values_at([[2, 0], [2, 1], [2, 2]]), 1.0 / 3)
        assert tensor.histories.tolist() == [0]

    def test_constant_series_point_mass(self):
        tensor = build_markov_tensor(np.full(30, 1.0), 4, 3)
        slices = tensor.history_slices()
        values = tensor.values_at(slices)
        assert tensor.histories.size == 1
        assert sorted(values) == [0.0, 0.0, 0.0, 1.0]

    def test_iid_symbols_near_uniform(self):
        symbols = np.random.default_rng(2).integers(0, 3, size=200_000)
        tensor = markov_tensor_from_symbols(symbols, bins=3, order=2)
        values = tensor.values_at(all_indices(tensor.shape))
        assert np.all(np.abs(values - 1.0 / 3) <= 0.02)

    def test_dense_matches_values(self):
        symbols = np.random.default_rng(3).integers(0, 3, size=60)
        tensor = markov_tensor_from_symbols(symbols, bins=3, order=3)
        idx = all_indices(tensor.shape)
        assert np.allclose(tensor.to_dense()[tuple(idx.T)], tensor.values_at(idx))

    def test_dense_cap(self):
        tensor = markov_tensor_from_symbols(np.arange(12) % 10, bins=10, order=9)
        with pytest.raises(ResourceCapError):
            tensor.to_dense()

    def test_too_short(self):
        with pytest.raises(ShapeError):
            markov_tensor_from_symbols([0, 1], bins=2, order=3)

    def test_symbols_out_of_range(self):
        with pytest.raises(ShapeError):
            markov_tensor_from_symbols([0, 1, 5], bins=3, order=2)


class TestSampling:
    """Observed entries drawn from the transition tensor"""

    @pytest.fixture
    def tensor(self):
        symbols = np.random.default_rng(4).integers(0, 4, size=40)
        return markov_tensor_from_symbols(symbols, bins=4, order=3)

    def test_exclude_draws_only_visited(self, tensor):
        obs = tensor.sample_observations(20, seed=0, unvisited="exclude")
        history = np.ravel_multi_index(obs.indices[:, :2].T, tensor.history_shape)
        assert np.all(np.isin(history, tensor.histories))
        assert np.allclose(obs.values, tensor.values_at(obs.indices))

    def test_uniform_draws_whole_tensor(self, tensor):
        obs = tensor.sample_observations(64, seed=0)
        assert obs.n == 64
        assert np.allclose(obs.values, tensor.values_at(obs.indices))

    def test_too_many(self, tensor):
        with pytest.raises(ShapeError):
            tensor.sample_observations(tensor.histories.size * 4 + 1, seed=0, unvisited="exclude")


class TestSimulatedChains:
    """Known kernels for end-to-end checks"""

    def test_kernel_rows_are_distributions(self):
        kernel = random_kernel(3, 2, seed=0)
        assert kernel.shape == (3, 3, 3)
        assert np.allclose(kernel.sum(axis=-1), 1.0)
        assert np.all(kernel >= 0)

    def test_chain_follows_kernel(self):
        kernel = random_kernel(3, 1, seed=1)
        symbols = simulate_chain(kernel, 100_000, seed=1)
        tensor = markov_tensor_from_symbols(symbols, bins=3, order=2)
        idx = all_indices((3, 3))
        assert np.all(np.abs(tensor.values_at(idx) - kernel[tuple(idx.T)]) <= 0.05)

    def test_chain_deterministic(self):
        kernel = random_kernel(4, 2, seed=2)
        assert np.array_equal(simulate_chain(kernel, 500, seed=3), simulate_chain(kernel, 500, seed=3))

    def test_kernel_values_use_latest_history(self):
        kernel = random_kernel(2, 1, seed=4)
        idx = np.array([[0, 1, 0], [1, 0, 1]])
        assert np.allclose(kernel_values(kernel, idx), [kernel[1, 0], kernel[0, 1]])

    def test_kernel_values_order_too_high(self):
        with pytest.raises(ShapeError):
            kernel_values(random_kernel(2, 3, seed=0), [[0, 1]])

    def test_prediction_error(self):
        assert prediction_error(np.array([1.0, 0.0]), np.array([0.0, 0.0])) == pytest.approx(np.sqrt(0.5))


class TestMarkovCell:
    """Completion of a transition tensor and its held-out score"""

    @pytest.fixture
    def spec(self):
        return MarkovSpec(
            simulate_order=1,
            simulate_length=2000,
            bins=3,
            orders=[3],
            n_observed=15,
            seed=5,
            admm=SolverConfig(lam=1e-4, max_iter=200),
            rals=RalsConfig(lam=1e-4, eta=1e-3, max_rank=2, d1=3, d2=3, s=2.0, outer_sweeps=3, inner_iters=2),
        )

    def test_load_simulated_symbols(self, spec):
        train, test, edges = load_symbols(spec)
        assert edges is None
        assert train.size == 1600 and test.size == 400

    def test_load_series_uses_train_edges(self, spec):
        series = np.concatenate([np.arange(80.0), np.full(20, 1000.0)])
        spec = spec.model_copy(update={"input": "unused.csv", "simulate_order": None})
        train, test, edges = load_symbols(spec, series)
        assert train.size == 80
        assert np.all(test == 2)
        assert edges.shape == (2,)

    @pytest.mark.parametrize("solver", ["admm", "rals"])
    def test_cell_row(self, spec, solver):
        train_symbols, test_symbols, _ = load_symbols(spec)
        train = markov_tensor_from_symbols(train_symbols, spec.bins, 3)
        test = markov_tensor_from_symbols(test_symbols, spec.bins, 3)
        row = run_markov_cell(train, test, spec, solver, 1e-4)
        assert set(row) == set(MARKOV_COLUMNS)
        assert row["status"] == "ok"
        assert row["n"] == 15
        assert np.isfinite(row["error"]) and row["error"] >= 0.0

    def test_observation_count_capped(self, spec):
        spec = spec.model_copy(update={"n_observed": 1000})
        train_symbols, test_symbols, _ = load_symbols(spec)
        train = markov_tensor_from_symbols(train_symbols, spec.bins, 2)
        test = markov_tensor_from_symbols(test_symbols, spec.bins, 2)
        row = run_markov_cell(train, test, spec, "admm", 1e-4)
        assert row["n"] == 9
