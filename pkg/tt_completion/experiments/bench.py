"""
Scaling benchmark: TT-RALS time per sweep against the order K at fixed
I, R, n and D (expected polynomial growth), and TT-ADMM time per iteration
at a small mode size (expected exponential growth).
"""
import logging
import tracemalloc
from typing import Any, Dict, List, Sequence

import numpy as np
import pandas as pd

from ..data.model import BenchSpec, BenchSummary, RalsConfig, SolverConfig
from ..solvers.admm_solver import TTADMMSolver
from ..solvers.rals_solver import TTRALSSolver
from ..tensor.observation import observe, sample_mask
from ..tensor.tt_core import derive_seed, element_count, ensure_dense_fits, random_tt

logger = logging.getLogger(__name__)

BENCH_COLUMNS = ["solver", "K", "I", "R", "n", "D", "seconds_per_sweep", "peak_bytes", "status"]


def _observations(shape, rank: int, n: int, seed: int):
    truth = random_tt(shape, [rank] * (len(shape) - 1), seed=seed)
    n = min(n, element_count(shape))
    return observe(truth, sample_mask(shape, n, seed=seed), 0.0, seed=seed)


def bench_rals(spec: BenchSpec, order: int) -> Dict[str, Any]:
    shape = (spec.dim,) * order
    seed = derive_seed(spec.seed, order)
    obs = _observations(shape, spec.rank, spec.n_observed, seed)
    cfg = RalsConfig(
        d1=spec.d,
        d2=spec.d,
        s=spec.s,
        max_rank=spec.rank,
        outer_sweeps=spec.sweeps,
        inner_iters=spec.inner_iters,
        tol_rel=1e-300,
        seed=seed,
    )
    tracemalloc.start()
    try:
        _, report = TTRALSSolver(cfg).solve(obs)
        _, peak = tracemalloc.get_traced_memory()
    finally:
        tracemalloc.stop()
    seconds = float(np.mean(report.sweep_seconds))
    logger.info(f"TT-RALS K={order}: {seconds:.3f}s per sweep, peak {peak / 2**20:.1f} MiB")
    return {
        "solver": "rals",
        "K": order,
        "I": spec.dim,
        "R": spec.rank,
        "n": obs.n,
        "D": spec.d,
        "seconds_per_sweep": seconds,
        "peak_bytes": int(peak),
        "status": "ok",
    }


def bench_admm(spec: BenchSpec, order: int) -> Dict[str, Any]:
    shape = (spec.admm_dim,) * order
    ensure_dense_fits((2 * order - 1) * element_count(shape), f"TT-ADMM state for order {order}")
    seed = derive_seed(spec.seed, order, 1)
    obs = _observations(shape, min(spec.rank, spec.admm_dim), element_count(shape) // 2 or 1, seed)
    cfg = SolverConfig(max_iter=spec.admm_iters, tol_rel=1e-300, tol_feas=1e-300, seed=seed)
    tracemalloc.start()
    try:
        _, report = TTADMMSolver(cfg).solve(obs)
        _, peak = tracemalloc.get_traced_memory()
    finally:
        tracemalloc.stop()
    seconds = report.wall_time / max(report.iterations, 1)
    logger.info(f"TT-ADMM K={order}: {seconds:.4f}s per iteration")
    return {
        "solver": "admm",
        "K": order,
        "I": spec.admm_dim,
        "R": min(spec.rank, spec.admm_dim),
        "n": obs.n,
        "D": 0,
        "seconds_per_sweep": seconds,
        "peak_bytes": int(peak),
        "status": "ok",
    }


def fit_exponent(orders: Sequence[int], seconds: Sequence[float]) -> float:
    """Slope of log(time) against log(K)."""
    if len(orders) < 2:
        return float("nan")
    return float(np.polyfit(np.log(orders), np.log(seconds), 1)[0])


def fit_log_slope(orders: Sequence[int], seconds: Sequence[float]) -> float:
    """Slope of log(time) against K; positive and stable for exponential growth."""
    if len(orders) < 2:
        return float("nan")
    return float(np.polyfit(np.asarray(orders, dtype=float), np.log(seconds), 1)[0])


def summarize(df: pd.DataFrame) -> BenchSummary:
    ok = df[(df["status"] == "ok") & (df["seconds_per_sweep"] > 0)]
    rals = ok[ok["solver"] == "rals"].sort_values("K")
    admm = ok[ok["solver"] == "admm"].sort_values("K")
    summary = BenchSummary(
        rals_orders=[int(k) for k in rals["K"]],
        rals_seconds_per_sweep=[float(t) for t in rals["seconds_per_sweep"]],
        rals_exponent=fit_exponent(list(rals["K"]), list(rals["seconds_per_sweep"])) if len(rals) > 1 else None,
        admm_orders=[int(k) for k in admm["K"]],
        admm_seconds_per_iter=[float(t) for t in admm["seconds_per_sweep"]],
        admm_log_slope=fit_log_slope(list(admm["K"]), list(admm["seconds_per_sweep"])) if len(admm) > 1 else None,
        peak_bytes={int(k): int(b) for k, b in zip(rals["K"], rals["peak_bytes"])},
    )
    logger.info(f"TT-RALS time ~ K^{summary.rals_exponent}; TT-ADMM log-time slope {summary.admm_log_slope}")
    return summary


def bench_rows(spec: BenchSpec) -> List[tuple]:
    """(solver, K) pairs in execution order."""
    return [("rals", k) for k in spec.orders] + [("admm", k) for k in spec.admm_orders]
