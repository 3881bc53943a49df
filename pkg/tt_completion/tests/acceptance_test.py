"""Desk-scale end-to-end runs; enable with TTC_RUN_SLOW=1."""
import itertools
import tracemalloc

import numpy as np
import pytest

from tt_completion.cli import main
from tt_completion.data.model import MarkovSpec, RalsConfig, SolverConfig
from tt_completion.experiment_manager import ExperimentManager
from tt_completion.experiments.markov import kernel_values, markov_tensor_from_symbols, simulate_chain
from tt_completion.solvers import tt_admm_solve, tt_rals_solve
from tt_completion.tensor import observe, random_tt, tt_to_dense, tt_values

pytestmark = pytest.mark.slow


@pytest.fixture(scope="module")
def full_observation():
    truth = random_tt((8, 8, 10, 10), (3, 5, 7), seed=2024)
    dense = tt_to_dense(truth)
    idx = np.stack(np.unravel_index(np.arange(dense.size), dense.shape), axis=1)
    return dense, observe(truth, idx, 0.0, seed=2024)


class TestInterpolation:
    """Full noiseless data with a vanishing regulariser"""

    def test_admm(self, full_observation):
        dense, obs = full_observation
        estimate, _ = tt_admm_solve(obs, SolverConfig(lam=1e-8, eta=1.0 / obs.n, max_iter=5000))
        assert np.linalg.norm(estimate - dense) <= 1e-2 * np.linalg.norm(dense)

    def test_rals(self, full_observation):
        dense, obs = full_observation
        cfg = RalsConfig(lam=1e-8, eta=1e-6, max_rank=10, d1=10, d2=10, s=3.0, outer_sweeps=30, inner_iters=2)
        tt, _ = tt_rals_solve(obs, cfg)
        assert np.linalg.norm(tt_to_dense(tt) - dense) <= 1e-2 * np.linalg.norm(dense)


class TestMarkovRecovery:
    """Known chains recovered from a fraction of the transition tensor"""

    def test_concentrated_chain_beats_uniform_guess(self):
        # every history shares one skewed next-symbol law, so the order-4 tensor has TT rank 1
        law = np.array([0.55, 0.25, 0.15, 0.05])
        kernel = np.tile(law, (4, 1))
        symbols = simulate_chain(kernel, 1_000_000, seed=7)
        tensor = markov_tensor_from_symbols(symbols, bins=4, order=4)
        obs = tensor.sample_observations(77, seed=7)
        cfg = RalsConfig(
            lam=1e-6, eta=1e-3, max_rank=1, d1=4, d2=4, s=3.0, outer_sweeps=50, inner_iters=3, restarts=3,
        )
        tt, _ = tt_rals_solve(obs, cfg)

        idx = np.array(list(itertools.product(range(4), repeat=4)))
        truth = kernel_values(kernel, idx)
        baseline = np.sqrt(np.mean((0.25 - truth) ** 2))
        rmse = np.sqrt(np.mean((tt_values(tt, idx) - truth) ** 2))
        assert baseline > 0.15
        assert rmse <= 0.25 * baseline


class TestScalability:
    """Order-8 transition tensor of size 10^8"""

    @pytest.fixture(scope="class")
    def spec(self):
        return MarkovSpec(
            simulate_order=1, simulate_length=200_000, bins=10, orders=[8], n_observed=10_000,
            lambdas=[1e-3], solver="rals",
            rals=RalsConfig(eta=1e-3, max_rank=4, d1=10, d2=10, s="sqrt", outer_sweeps=1, inner_iters=3),
        )

    def test_rals_completes_within_memory(self, spec):
        manager = ExperimentManager(workers=1)
        tracemalloc.start()
        try:
            df = manager.run(manager.run_markov(spec))
            _, peak = tracemalloc.get_traced_memory()
        finally:
            tracemalloc.stop()
        assert list(df["status"]) == ["ok"]
        assert peak < 4e9

    def test_admm_refuses(self, tmp_path):
        code = main([
            "markov", "--simulate-order", "1", "--length", "50000", "--bins", "10", "--orders", "8",
            "--n", "100", "--solver", "admm", "--out", str(tmp_path / "markov.csv"),
        ])
        assert code == 3
