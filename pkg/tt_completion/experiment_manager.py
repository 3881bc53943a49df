"""
Experiment Manager
Coordinates completion runs: synthetic grids, Markov pipelines, benchmarks
and single completions
"""
from typing import Any, Awaitable, Callable, Dict, List, Optional, Tuple
from pathlib import Path
import asyncio
import logging

import numpy as np
import pandas as pd

from .config.settings import settings
from .data.model import BenchSpec, BenchSummary, CompleteSpec, ExperimentSpec, MarkovSpec
from .data import tensor_io
from .errors import STATUS_EXIT_CODES, status_for
from .experiments import bench, markov, synthetic
from .solvers.admm_solver import TTADMMSolver
from .solvers.rals_solver import TTRALSSolver
from .tensor.tt_core import tt_values

logger = logging.getLogger(__name__)


def failed_row(base: Dict[str, Any], exc: BaseException, columns: List[str]) -> Dict[str, Any]:
    row = {column: np.nan for column in columns}
    row.update(base)
    row["status"] = status_for(exc)
    row["message"] = str(exc)
    if "iters" in row:
        row["iters"] = 0
    return row


def worst_exit_code(df: pd.DataFrame) -> int:
    if df.empty or "status" not in df:
        return 0
    return max(STATUS_EXIT_CODES.get(status, 1) for status in df["status"])


class ExperimentManager:
    """
    Runs independent experiment cells on a bounded worker pool and folds
    per-cell failures into status rows instead of aborting the table
    """

    def __init__(self, workers: Optional[int] = None):
        self.workers = max(1, workers or settings.WORKERS)
        self.manager_id = "experiment_manager"
        logger.info(f"{self.manager_id} initialized with {self.workers} worker(s)")

    async def _gather(
        self,
        jobs: List[Tuple[Dict[str, Any], Callable[[], Dict[str, Any]]]],
        columns: List[str],
    ) -> pd.DataFrame:
        """
        Run every job in a thread, at most `workers` at a time, keeping input order.

        Args:
            jobs: (base row, callable returning the full row) pairs
            columns: Output column order

        Returns:
            DataFrame with one row per job
        """
        semaphore = asyncio.Semaphore(self.workers)

        async def run(job: Callable[[], Dict[str, Any]]) -> Dict[str, Any]:
            async with semaphore:
                return await asyncio.to_thread(job)

        results = await asyncio.gather(*(run(job) for _, job in jobs), return_exceptions=True)

        rows = []
        for (base, _), result in zip(jobs, results):
            if isinstance(result, Exception):
                logger.error(f"Cell {base} failed: {str(result)}")
                result = failed_row(base, result, columns)
            rows.append(result)
        return pd.DataFrame(rows, columns=columns)

    async def run_synth(self, spec: ExperimentSpec) -> pd.DataFrame:
        """
        Solve every (rank tuple, trial, lambda, solver) cell of a synthetic grid

        Args:
            spec: Synthetic experiment configuration

        Returns:
            Results table with the synth CSV columns
        """
        cells = synthetic.build_cells(spec)
        logger.info(f"Running {len(cells)} synthetic cells on shape {spec.shape}")
        jobs = [(cell.base_row(), lambda cell=cell: synthetic.run_synth_cell(cell, spec)) for cell in cells]
        df = await self._gather(jobs, synthetic.SYNTH_COLUMNS)
        if spec.output is not None:
            tensor_io.write_table(spec.output, df)
        return df

    async def run_markov(self, spec: MarkovSpec, series: Optional[np.ndarray] = None) -> pd.DataFrame:
        """
        Build the train/test transition tensors for every order and complete them

        Args:
            spec: Markov experiment configuration
            series: Numeric series; read from spec.input when omitted

        Returns:
            Results table with the Markov CSV columns
        """
        if series is None and spec.input is not None:
            series = tensor_io.read_series(spec.input)
        train_symbols, test_symbols, edges = markov.load_symbols(spec, series)
        solvers = ["admm", "rals"] if spec.solver == "both" else [spec.solver]

        jobs = []
        for order in spec.orders:
            for lam in spec.lambdas:
                for solver in solvers:
                    base = {"solver": solver, "K": order, "bins": spec.bins, "n": spec.n_observed, "lambda": lam}

                    def job(order=order, lam=lam, solver=solver):
                        train = markov.markov_tensor_from_symbols(train_symbols, spec.bins, order, edges=edges)
                        test = markov.markov_tensor_from_symbols(test_symbols, spec.bins, order, edges=edges)
                        return markov.run_markov_cell(train, test, spec, solver, lam)

                    jobs.append((base, job))
        logger.info(f"Running {len(jobs)} Markov cells for orders {spec.orders}")
        df = await self._gather(jobs, markov.MARKOV_COLUMNS)
        if spec.output is not None:
            tensor_io.write_table(spec.output, df)
        return df

    async def run_bench(self, spec: BenchSpec) -> Tuple[pd.DataFrame, BenchSummary]:
        """
        Time solvers across orders; cells run one at a time so timings do not interfere
        """
        rows = []
        for solver, order in bench.bench_rows(spec):
            base = {"solver": solver, "K": order}
            fn = bench.bench_rals if solver == "rals" else bench.bench_admm
            try:
                rows.append(await asyncio.to_thread(fn, spec, order))
            except Exception as e:
                logger.error(f"Benchmark {solver} K={order} failed: {str(e)}")
                rows.append(failed_row(base, e, bench.BENCH_COLUMNS))
        df = pd.DataFrame(rows, columns=bench.BENCH_COLUMNS)
        summary = bench.summarize(df)
        if spec.output is not None:
            tensor_io.write_table(spec.output, df)
            tensor_io.write_report(Path(spec.output).with_suffix(".json"), summary)
        return df, summary

    async def run_complete(self, spec: CompleteSpec) -> Dict[str, Any]:
        """
        Complete an observation file and write the estimate plus a JSON report

        Returns:
            Dict with the output paths, the report and the masked RMSE
        """
        obs = tensor_io.read_observations(spec.observations, spec.shape)
        out_dir = Path(spec.output_dir)

        if spec.solver == "admm":
            dense, report = await asyncio.to_thread(TTADMMSolver(spec.admm).solve, obs)
            estimate_path = tensor_io.write_dense_tensor(out_dir / f"{spec.prefix}.tensor", dense)
            predictions = dense[tuple(obs.indices.T)]
        else:
            tt, report = await asyncio.to_thread(TTRALSSolver(spec.rals).solve, obs)
            estimate_path = tensor_io.write_tt(out_dir / f"{spec.prefix}.tt", tt)
            predictions = tt_values(tt, obs.indices)

        report_path = tensor_io.write_report(out_dir / f"{spec.prefix}_report.json", report)
        rmse = float(np.sqrt(np.mean((obs.values - predictions) ** 2)))
        logger.info(f"Completion written to {estimate_path} (masked RMSE {rmse:.4e})")
        return {
            "estimate": estimate_path,
            "report": report_path,
            "solver_report": report,
            "masked_rmse": rmse,
        }

    def run(self, coroutine: Awaitable) -> Any:
        return asyncio.run(coroutine)
