"""
Higher-order Markov transition tensors from discretised time series.

The order-K tensor has K modes of size B: modes 1..K-1 hold the history
(w_{t-K+1}, ..., w_{t-1}) and mode K the current symbol w_t, so each
history slice is the conditional law P(w_t | history). Counts are stored
sparsely as sorted flat keys; the dense B^K tensor is never formed unless
explicitly requested within the dense cap.
"""
from dataclasses import dataclass
import logging
import time
from typing import Any, Dict, Optional

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..data.model import MarkovSpec
from ..errors import ShapeError
from ..solvers.admm_solver import TTADMMSolver
from ..solvers.rals_solver import TTRALSSolver
from ..tensor.observation import ObservationSet
from ..tensor.tt_core import (
    Stream,
    derive_seed,
    element_count,
    ensure_dense_fits,
    make_rng,
    tt_values,
    validate_indices,
)

logger = logging.getLogger(__name__)

MARKOV_COLUMNS = ["solver", "K", "bins", "n", "lambda", "error", "seconds", "iters", "status", "message"]


def discretize(series, bins: int, edges: Optional[np.ndarray] = None):
    """
    Map a numeric series to symbols 0..bins-1 by equal-mass (quantile) bins.

    Returns:
        (symbols, edges); pass edges back in to discretise a held-out split consistently
    """
    series = np.asarray(series, dtype=np.float64).reshape(-1)
    if bins < 2:
        raise ShapeError(f"bins must be >= 2, got {bins}")
    if not np.all(np.isfinite(series)):
        raise ShapeError("series must be finite")
    if edges is None:
        edges = np.quantile(series, np.linspace(0.0, 1.0, bins + 1)[1:-1])
    symbols = np.searchsorted(edges, series, side="right").astype(np.int64)
    return symbols, edges


@dataclass(frozen=True)
class MarkovTensor:
    """
    Sparse empirical conditional distribution tensor.

    Attributes
    ----------
    keys : np.ndarray
        Sorted flat indices of visited (history, symbol) cells
    counts : np.ndarray
        Transition counts per key
    histories : np.ndarray
        Sorted flat indices of visited histories (over the first K-1 modes)
    totals : np.ndarray
        Number of transitions out of each visited history
    """

    bins: int
    order: int
    keys: np.ndarray
    counts: np.ndarray
    histories: np.ndarray
    totals: np.ndarray
    edges: Optional[np.ndarray] = None

    @property
    def shape(self):
        return (self.bins,) * self.order

    @property
    def history_shape(self):
        return (self.bins,) * (self.order - 1)

    def values_at(self, indices) -> np.ndarray:
        """Conditional probabilities at (n, K) indices; unvisited histories give 1/bins."""
        idx = validate_indices(indices, self.shape)
        flat = np.ravel_multi_index(idx.T, self.shape)
        history = flat // self.bins
        out = np.full(flat.shape[0], 1.0 / self.bins)

        h_pos, visited = _lookup(self.histories, history)
        out[visited] = 0.0
        k_pos, hit = _lookup(self.keys, flat)
        out[hit] = self.counts[k_pos[hit]] / self.totals[h_pos[hit]]
        return out

    def history_slices(self) -> np.ndarray:
        """(h * bins, K) indices of every entry of every visited history."""
        hist = np.stack(np.unravel_index(self.histories, self.history_shape), axis=1)
        hist = np.repeat(hist, self.bins, axis=0)
        symbols = np.tile(np.arange(self.bins), self.histories.size)[:, None]
        return np.hstack([hist, symbols]).astype(np.int64)

    def sample_observations(self, n: int, seed: int, unvisited: str = "uniform") -> ObservationSet:
        """
        n distinct entries with their conditional probabilities.

        With unvisited="exclude" only entries of visited histories are eligible.
        """
        rng = make_rng(seed, Stream.MARKOV_SAMPLE)
        if unvisited == "exclude":
            population = self.histories.size * self.bins
            if not 1 <= n <= population:
                raise ShapeError(f"cannot draw {n} entries from {population} visited cells")
            q = rng.choice(population, size=n, replace=False)
            flat = self.histories[q // self.bins] * self.bins + q % self.bins
        else:
            population = element_count(self.shape)
            if not 1 <= n <= population:
                raise ShapeError(f"cannot draw {n} entries from {population} cells")
            flat = rng.choice(population, size=n, replace=False)
        indices = np.stack(np.unravel_index(flat, self.shape), axis=1).astype(np.int64)
        return ObservationSet(shape=self.shape, indices=indices, values=self.values_at(indices))

    def to_dense(self) -> np.ndarray:
        ensure_dense_fits(element_count(self.shape), f"dense Markov tensor of order {self.order}")
        dense = np.full(element_count(self.shape), 1.0 / self.bins)
        start = self.histories * self.bins
        dense[(start[:, None] + np.arange(self.bins)).reshape(-1)] = 0.0
        owner = np.searchsorted(self.histories, self.keys // self.bins)
        dense[self.keys] = self.counts / self.totals[owner]
        return dense.reshape(self.shape)


def _lookup(sorted_keys: np.ndarray, query: np.ndarray):
    """Positions of query in sorted_keys and whether each was found."""
    if sorted_keys.size == 0:
        return np.zeros(query.shape, np.int64), np.zeros(query.shape, bool)
    pos = np.minimum(np.searchsorted(sorted_keys, query), sorted_keys.size - 1)
    return pos, sorted_keys[pos] == query


def markov_tensor_from_symbols(symbols, bins: int, order: int, edges=None) -> MarkovTensor:
    symbols = np.asarray(symbols, dtype=np.int64).reshape(-1)
    if order < 2:
        raise ShapeError(f"tensor order must be >= 2, got {order}")
    if symbols.size < order:
        raise ShapeError(f"series of length {symbols.size} is too short for order {order}")
    if symbols.size and (symbols.min() < 0 or symbols.max() >= bins):
        raise ShapeError(f"symbols must lie in [0, {bins})")
    shape = (bins,) * order
    element_count(shape)  # overflow check
    windows = sliding_window_view(symbols, order)
    flat = np.ravel_multi_index(windows.T, shape)
    keys, counts = np.unique(flat, return_counts=True)
    histories, totals = np.unique(flat // bins, return_counts=True)
    logger.debug(f"order {order}: {windows.shape[0]} transitions, {histories.size} visited histories")
    return MarkovTensor(
        bins=bins,
        order=order,
        keys=keys,
        counts=counts.astype(np.float64),
        histories=histories,
        totals=totals.astype(np.float64),
        edges=edges,
    )


def build_markov_tensor(series, b: int, k_order: int, edges: Optional[np.ndarray] = None) -> MarkovTensor:
    """Quantile-discretise the series into b symbols and count order-k_order transitions."""
    symbols, edges = discretize(series, b, edges=edges)
    return markov_tensor_from_symbols(symbols, b, k_order, edges=edges)


def random_kernel(b: int, order: int, seed: int, concentration: float = 1.0) -> np.ndarray:
    """Transition kernel of shape (b,)*order + (b,) with Dirichlet rows."""
    if b < 2 or order < 1:
        raise ShapeError(f"need b >= 2 and order >= 1, got b={b}, order={order}")
    rng = make_rng(seed, Stream.KERNEL)
    rows = rng.dirichlet(np.full(b, concentration), size=b ** order)
    return rows.reshape((b,) * order + (b,))


def simulate_chain(kernel: np.ndarray, length: int, seed: int) -> np.ndarray:
    kernel = np.asarray(kernel, dtype=np.float64)
    b = kernel.shape[-1]
    order = kernel.ndim - 1
    cumulative = np.cumsum(kernel.reshape(-1, b), axis=1)
    rng = make_rng(seed, Stream.CHAIN)
    symbols = np.empty(length, dtype=np.int64)
    symbols[: min(order, length)] = rng.integers(0, b, size=min(order, length))
    draws = rng.random(length)
    history = int(np.ravel_multi_index(symbols[:order], (b,) * order)) if length >= order else 0
    span = b ** order
    for t in range(order, length):
        symbol = int(np.searchsorted(cumulative[history], draws[t], side="right"))
        symbol = min(symbol, b - 1)
        symbols[t] = symbol
        history = (history * b + symbol) % span
    return symbols


def kernel_values(kernel: np.ndarray, indices) -> np.ndarray:
    """True conditional probabilities at order-K indices for a chain of order m <= K-1."""
    kernel = np.asarray(kernel)
    m = kernel.ndim - 1
    idx = np.asarray(indices, dtype=np.int64)
    if idx.shape[1] - 1 < m:
        raise ShapeError(f"order-{idx.shape[1]} indices cannot hold an order-{m} history")
    return kernel[tuple(idx[:, -(m + 1):].T)]


def prediction_error(predicted: np.ndarray, target: np.ndarray) -> float:
    return float(np.sqrt(np.mean((predicted - target) ** 2)))


def run_markov_cell(
    train: MarkovTensor,
    test: MarkovTensor,
    spec: MarkovSpec,
    solver: str,
    lam: float,
) -> Dict[str, Any]:
    """Complete the train tensor from n sampled entries and score it on the test-visited slices."""
    order = train.order
    population = (
        train.histories.size * train.bins if spec.unvisited == "exclude" else element_count(train.shape)
    )
    n = min(spec.n_observed, population)
    if n < spec.n_observed:
        logger.warning(f"order {order}: only {population} eligible cells, observing {n}")
    obs = train.sample_observations(n, seed=derive_seed(spec.seed, order), unvisited=spec.unvisited)

    started = time.perf_counter()
    seed = derive_seed(spec.seed, order, 1)
    if solver == "admm":
        cfg = spec.admm.model_copy(update={"lam": lam, "seed": seed})
        dense, report = TTADMMSolver(cfg).solve(obs)
    else:
        cfg = spec.rals.model_copy(update={"lam": lam, "seed": seed})
        tt, report = TTRALSSolver(cfg).solve(obs)
    seconds = time.perf_counter() - started

    slices = test.history_slices()
    predicted = dense[tuple(slices.T)] if solver == "admm" else tt_values(tt, slices)
    error = prediction_error(predicted, test.values_at(slices))
    logger.info(f"{solver} K={order} lambda={lam}: prediction error {error:.4e} in {seconds:.2f}s")
    return {
        "solver": solver,
        "K": order,
        "bins": train.bins,
        "n": n,
        "lambda": lam,
        "error": error,
        "seconds": seconds,
        "iters": report.iterations,
        "status": "ok",
        "message": "",
    }


def load_symbols(spec: MarkovSpec, series=None):
    """
    Symbols for the train and test splits, and the bin edges (None for simulated chains).
    """
    if spec.simulate_order is not None and series is None:
        kernel = random_kernel(spec.bins, spec.simulate_order, seed=spec.seed)
        symbols = simulate_chain(kernel, spec.simulate_length, seed=spec.seed)
        cut = int(len(symbols) * spec.split)
        return symbols[:cut], symbols[cut:], None
    series = np.asarray(series, dtype=np.float64)
    cut = int(len(series) * spec.split)
    train, edges = discretize(series[:cut], spec.bins)
    test, _ = discretize(series[cut:], spec.bins, edges=edges)
    return train, test, edges
