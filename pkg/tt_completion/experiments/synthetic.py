"""
Synthetic validation: random TT truths over a grid of true ranks, noisy
partial observations, and the estimation error of each solver against the
sum of root ranks (SRR).
"""
from dataclasses import dataclass
import itertools
import logging
import math
import time
from typing import Any, Dict, List, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import stats

from ..data.model import ExperimentSpec, SolverName
from ..solvers.admm_solver import TTADMMSolver
from ..solvers.rals_solver import TTRALSSolver
from ..tensor.observation import observe, sample_mask
from ..tensor.tt_core import derive_seed, element_count, frobenius_distance, random_tt

logger = logging.getLogger(__name__)

SYNTH_COLUMNS = [
    "solver", "K", "ranks", "srr", "lambda", "trial", "seed",
    "error", "seconds", "iters", "status", "message",
]

PRESETS: Dict[str, Dict[str, Any]] = {
    "grid-k4": {"shape": [8, 8, 10, 10], "rank_grid": [3, 5, 7]},
    "grid-k5": {"shape": [5, 5, 7, 7, 7], "rank_grid": [2, 4]},
}


def srr(ranks: Sequence[int]) -> float:
    """Sum of root ranks."""
    return float(sum(math.sqrt(r) for r in ranks))


def format_ranks(ranks: Sequence[int]) -> str:
    return "-".join(str(r) for r in ranks)


@dataclass(frozen=True)
class SynthCell:
    """One (solver, rank tuple, lambda, trial) solve; seed is shared across lambdas and solvers."""

    solver: SolverName
    ranks: Tuple[int, ...]
    lam: float
    trial: int
    seed: int

    def base_row(self) -> Dict[str, Any]:
        return {
            "solver": self.solver,
            "K": len(self.ranks) + 1,
            "ranks": format_ranks(self.ranks),
            "srr": srr(self.ranks),
            "lambda": self.lam,
            "trial": self.trial,
            "seed": self.seed,
        }


def rank_tuples(spec: ExperimentSpec) -> List[Tuple[int, ...]]:
    return list(itertools.product(spec.rank_grid, repeat=len(spec.shape) - 1))


def build_cells(spec: ExperimentSpec) -> List[SynthCell]:
    solvers = ["admm", "rals"] if spec.solver == "both" else [spec.solver]
    cells = []
    for t, ranks in enumerate(rank_tuples(spec)):
        for trial in range(spec.trials):
            seed = derive_seed(spec.seed, t, trial)
            for lam in spec.lambdas:
                for solver in solvers:
                    cells.append(SynthCell(solver=solver, ranks=ranks, lam=lam, trial=trial, seed=seed))
    return cells


def run_synth_cell(cell: SynthCell, spec: ExperimentSpec) -> Dict[str, Any]:
    """
    Generate the truth and observations from cell.seed, solve and measure ||X_hat - X*||_F.
    """
    shape = tuple(spec.shape)
    truth = random_tt(shape, cell.ranks, seed=cell.seed)
    n = max(1, int(round(spec.ratio * element_count(shape))))
    obs = observe(truth, sample_mask(shape, n, seed=cell.seed), spec.sigma, seed=cell.seed)

    started = time.perf_counter()
    if cell.solver == "admm":
        cfg = spec.admm.model_copy(update={"lam": cell.lam, "seed": cell.seed})
        estimate, report = TTADMMSolver(cfg).solve(obs)
    else:
        cfg = spec.rals.model_copy(update={"lam": cell.lam, "seed": cell.seed})
        estimate, report = TTRALSSolver(cfg).solve(obs)
    seconds = time.perf_counter() - started

    error = frobenius_distance(estimate, truth)
    logger.info(
        f"{cell.solver} ranks={format_ranks(cell.ranks)} lambda={cell.lam} trial={cell.trial}: "
        f"error={error:.4e} in {seconds:.2f}s"
    )
    return {
        **cell.base_row(),
        "error": error,
        "seconds": seconds,
        "iters": report.iterations,
        "status": "ok",
        "message": "",
    }


def _pearson(x, y) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 2 or np.ptp(x) == 0 or np.ptp(y) == 0:
        return float("nan")
    return float(stats.pearsonr(x, y)[0])


def _grid_steps(errors: pd.Series) -> List[bool]:
    """
    For every rank tuple and every mode whose rank has a next grid value, whether
    the error at the raised tuple is at least the error at the original one.
    """
    tuples = {tuple(int(v) for v in r.split("-")): float(e) for r, e in errors.items()}
    grid = sorted({v for ranks in tuples for v in ranks})
    following = dict(zip(grid, grid[1:]))
    steps = []
    for ranks, error in tuples.items():
        for j, value in enumerate(ranks):
            raised = ranks[:j] + (following.get(value, value),) + ranks[j + 1:]
            if raised != ranks and raised in tuples:
                steps.append(tuples[raised] >= error)
    return steps


def trend_report(df: pd.DataFrame) -> Dict[str, Any]:
    """
    Per solver: Pearson correlation of mean error with SRR (overall and per lambda),
    the lambda-optimal error per rank tuple, and the fraction of rank-grid neighbours
    (one rank raised to the next grid value) whose lambda-optimal error does not decrease.
    """
    report: Dict[str, Any] = {}
    ok = df[df["status"] == "ok"]
    for solver, rows in ok.groupby("solver"):
        by_cell = rows.groupby(["ranks", "lambda"]).agg(srr=("srr", "first"), error=("error", "mean")).reset_index()
        by_ranks = by_cell.groupby("ranks").agg(srr=("srr", "first"), error=("error", "mean"))
        best = by_cell.groupby("ranks").agg(srr=("srr", "first"), error=("error", "min"))

        steps = _grid_steps(best["error"])
        monotone = float(np.mean(steps)) if steps else float("nan")

        report[solver] = {
            "pearson": _pearson(by_ranks["srr"], by_ranks["error"]),
            "pearson_by_lambda": {
                float(lam): _pearson(group["srr"], group["error"])
                for lam, group in by_cell.groupby("lambda")
            },
            "best_error_by_ranks": {str(r): float(e) for r, e in best["error"].items()},
            "monotone_fraction": monotone,
        }
        logger.info(
            f"{solver}: corr(error, SRR)={report[solver]['pearson']:.3f}, "
            f"monotone fraction={monotone:.2f}"
        )
    return report

