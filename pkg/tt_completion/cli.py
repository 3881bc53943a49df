"""
Command-line front-end.

    python run_experiment.py synth --preset grid-k4 --solver both --out results/synth.csv
    python run_experiment.py markov --input series.csv --orders 5,7,8,10 --out results/markov.csv
    python run_experiment.py complete --obs observations.csv --solver rals --out-dir results
    python run_experiment.py bench --orders 4,5,6,7,8,9,10 --out results/bench.csv

Exit codes: 0 success, 1 usage error, 2 numerical failure, 3 resource cap exceeded.
Table commands exit with the worst status among their rows.
"""
import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

from pydantic import ValidationError

from .config.settings import settings
from .data import tensor_io
from .data.model import BenchSpec, CompleteSpec, ExperimentSpec, MarkovSpec, RalsConfig, SolverConfig
from .errors import TTCompletionError
from .experiment_manager import ExperimentManager, worst_exit_code
from .experiments.synthetic import PRESETS, trend_report

logger = logging.getLogger(__name__)


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on usage errors; usage errors map to 1 here."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _int_list(text: str) -> List[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _float_list(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _sparsity(text: str):
    return text if text in ("sqrt", "log") else float(text)


def _add_solver_flags(p: argparse.ArgumentParser, rank_default: Optional[int] = None, s_default=None):
    g = p.add_argument_group("solver")
    g.add_argument("--eta", type=float, help="ADMM step size (default 1.0)")
    g.add_argument("--max-iter", type=int, help="TT-ADMM iteration limit")
    g.add_argument("--tol-rel", type=float, help="relative change tolerance")
    g.add_argument("--tol-feas", type=float, help="TT-ADMM consensus residual tolerance")
    g.add_argument("--rank", type=int, default=rank_default, help="TT-RALS estimation rank")
    g.add_argument("--d", type=int, help="TT-RALS projected size D1 = D2")
    g.add_argument("--s", type=_sparsity, default=s_default, help="projection sparsity (> 1, 'sqrt' or 'log')")
    g.add_argument("--sweeps", type=int, help="TT-RALS outer sweeps")
    g.add_argument("--inner-iters", type=int, help="TT-RALS inner ADMM steps per core")
    g.add_argument("--restarts", type=int, help="TT-RALS random restarts")
    g.add_argument("--sweep-order", choices=["ascending", "descending", "symmetric"])
    g.add_argument("--gamma-method", choices=["contracted", "columns"])


def _solver_configs(args, base_rals: Optional[RalsConfig] = None):
    shared = {
        "eta": args.eta,
        "max_iter": args.max_iter,
        "tol_rel": args.tol_rel,
        "tol_feas": args.tol_feas,
    }
    shared = {k: v for k, v in shared.items() if v is not None}
    rals_only = {
        "max_rank": args.rank,
        "d1": args.d,
        "d2": args.d,
        "s": args.s,
        "outer_sweeps": args.sweeps,
        "inner_iters": args.inner_iters,
        "restarts": args.restarts,
        "sweep_order": args.sweep_order,
        "gamma_method": args.gamma_method,
    }
    rals_only = {k: v for k, v in rals_only.items() if v is not None}
    admm = SolverConfig(**shared)
    rals_base = (base_rals or RalsConfig()).model_dump()
    rals = RalsConfig(**{**rals_base, **shared, **rals_only})
    return admm, rals


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ttc", description="Low-rank tensor train completion")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    synth = sub.add_parser("synth", help="synthetic error-vs-SRR experiment")
    synth.add_argument("--preset", choices=sorted(PRESETS))
    synth.add_argument("--shape", type=_int_list)
    synth.add_argument("--ranks", type=_int_list, help="per-mode true rank grid")
    synth.add_argument("--ratio", type=float, default=0.5)
    synth.add_argument("--sigma2", type=float, default=0.01)
    synth.add_argument("--lambda", dest="lambdas", type=_float_list, default=[1.0, 3.0, 5.0])
    synth.add_argument("--trials", type=int, default=10)
    synth.add_argument("--solver", choices=["admm", "rals", "both"], default="both")
    synth.add_argument("--seed", type=int, default=42)
    synth.add_argument("--out", type=Path, default=settings.OUTPUT_DIR / "synth.csv")
    synth.add_argument("--trend", type=Path, help="write the error/SRR trend report as JSON")
    _add_solver_flags(synth)

    mk = sub.add_parser("markov", help="higher-order Markov transition completion")
    source = mk.add_mutually_exclusive_group(required=True)
    source.add_argument("--input", type=Path, help="single-column numeric CSV")
    source.add_argument("--simulate-order", type=int, help="simulate a random chain of this order")
    mk.add_argument("--length", type=int, default=200_000, help="simulated series length")
    mk.add_argument("--bins", type=int, default=10)
    mk.add_argument("--orders", type=_int_list, default=[5, 7, 8, 10])
    mk.add_argument("--n", type=int, default=10_000, help="observed entries per tensor")
    mk.add_argument("--lambda", dest="lambdas", type=_float_list, default=[1.0])
    mk.add_argument("--split", type=float, default=0.8)
    mk.add_argument("--unvisited", choices=["uniform", "exclude"], default="uniform")
    mk.add_argument("--solver", choices=["admm", "rals", "both"], default="rals")
    mk.add_argument("--seed", type=int, default=42)
    mk.add_argument("--out", type=Path, default=settings.OUTPUT_DIR / "markov.csv")
    _add_solver_flags(mk)

    comp = sub.add_parser("complete", help="complete an observation CSV")
    comp.add_argument("--obs", type=Path, required=True)
    comp.add_argument("--shape", type=_int_list)
    comp.add_argument("--solver", choices=["admm", "rals"], default="rals")
    comp.add_argument("--lambda", dest="lam", type=float, default=0.0)
    comp.add_argument("--seed", type=int, default=0)
    comp.add_argument("--out-dir", type=Path, default=settings.OUTPUT_DIR)
    comp.add_argument("--prefix", default="completion")
    _add_solver_flags(comp)

    b = sub.add_parser("bench", help="solver cost against tensor order")
    b.add_argument("--orders", type=_int_list, default=list(range(4, 11)))
    b.add_argument("--dim", type=int, default=10)
    b.add_argument("--rank", type=int, default=4)
    b.add_argument("--n", type=int, default=10_000)
    b.add_argument("--d", type=int, default=10)
    b.add_argument("--s", type=_sparsity, default="log")
    b.add_argument("--sweeps", type=int, default=1)
    b.add_argument("--inner-iters", type=int, default=5)
    b.add_argument("--admm-dim", type=int, default=4)
    b.add_argument("--admm-orders", type=_int_list, default=[2, 3, 4, 5, 6, 7])
    b.add_argument("--admm-iters", type=int, default=5)
    b.add_argument("--seed", type=int, default=42)
    b.add_argument("--out", type=Path, default=settings.OUTPUT_DIR / "bench.csv")
    return parser


def _synth_spec(args) -> ExperimentSpec:
    fields: Dict[str, Any] = dict(PRESETS.get(args.preset, {}))
    if args.shape:
        fields["shape"] = args.shape
    if args.ranks:
        fields["rank_grid"] = args.ranks
    admm, rals = _solver_configs(args)
    return ExperimentSpec(
        **fields,
        ratio=args.ratio,
        sigma2=args.sigma2,
        lambdas=args.lambdas,
        trials=args.trials,
        solver=args.solver,
        seed=args.seed,
        admm=admm,
        rals=rals,
        output=args.out,
    )


def _markov_spec(args) -> MarkovSpec:
    admm, rals = _solver_configs(args, base_rals=MarkovSpec.model_fields["rals"].default_factory())
    return MarkovSpec(
        input=args.input,
        simulate_order=args.simulate_order,
        simulate_length=args.length,
        bins=args.bins,
        orders=args.orders,
        n_observed=args.n,
        lambdas=args.lambdas,
        split=args.split,
        unvisited=args.unvisited,
        solver=args.solver,
        seed=args.seed,
        admm=admm,
        rals=rals,
        output=args.out,
    )


def _complete_spec(args) -> CompleteSpec:
    admm, rals = _solver_configs(args)
    admm = admm.model_copy(update={"lam": args.lam, "seed": args.seed})
    rals = rals.model_copy(update={"lam": args.lam, "seed": args.seed})
    return CompleteSpec(
        observations=args.obs,
        shape=args.shape,
        solver=args.solver,
        admm=admm,
        rals=rals,
        output_dir=args.out_dir,
        prefix=args.prefix,
    )


def _bench_spec(args) -> BenchSpec:
    return BenchSpec(
        orders=args.orders,
        dim=args.dim,
        rank=args.rank,
        n_observed=args.n,
        d=args.d,
        s=args.s,
        sweeps=args.sweeps,
        inner_iters=args.inner_iters,
        admm_dim=args.admm_dim,
        admm_orders=args.admm_orders,
        admm_iters=args.admm_iters,
        seed=args.seed,
        output=args.out,
    )


def _dispatch(args, manager: ExperimentManager) -> int:
    if args.command == "synth":
        spec = _synth_spec(args)
        df = manager.run(manager.run_synth(spec))
        if args.trend:
            tensor_io.write_report(args.trend, trend_report(df))
        print(df.groupby(["solver", "ranks"])["error"].mean().to_string())
        return worst_exit_code(df)

    if args.command == "markov":
        df = manager.run(manager.run_markov(_markov_spec(args)))
        print(df.to_string(index=False))
        return worst_exit_code(df)

    if args.command == "complete":
        result = manager.run(manager.run_complete(_complete_spec(args)))
        print(json.dumps(
            {"estimate": str(result["estimate"]), "report": str(result["report"]), "masked_rmse": result["masked_rmse"]},
            indent=2,
        ))
        return 0

    df, summary = manager.run(manager.run_bench(_bench_spec(args)))
    print(df.to_string(index=False))
    print(summary.model_dump_json(indent=2))
    return worst_exit_code(df)


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else settings.LOG_LEVEL,
        format=settings.LOG_FORMAT,
    )
    try:
        return _dispatch(args, ExperimentManager())
    except ValidationError as e:
        logger.error(f"Invalid configuration: {e}")
        return 1
    except TTCompletionError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return e.exit_code
    except OSError as e:
        logger.error(f"Cannot access {e.filename or 'file'}: {e.strerror or e}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
