from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from typing import Optional, List, Dict, Literal, Union
from pathlib import Path

from ..config.settings import settings

SolverName = Literal["admm", "rals"]
SolverChoice = Literal["admm", "rals", "both"]


class SolverConfig(BaseModel):
    """
    Hyperparameters shared by both completion solvers
    """
    model_config = ConfigDict(populate_by_name=True, extra="forbid")

    lam: float = Field(0.0, ge=0.0, alias="lambda")
    eta: float = Field(1.0, gt=0.0)
    max_iter: int = Field(2000, ge=1)
    tol_rel: float = Field(1e-6, gt=0.0)
    tol_feas: float = Field(1e-5, gt=0.0)
    seed: int = 0


class RalsConfig(SolverConfig):
    """
    TT-RALS hyperparameters: projection sizes, sparsity, estimation rank and loop counts
    """
    d1: int = Field(10, ge=1)
    d2: int = Field(10, ge=1)
    s: Union[float, Literal["sqrt", "log"]] = 20.0
    max_rank: int = Field(10, ge=1)
    outer_sweeps: int = Field(20, ge=1)
    inner_iters: int = Field(10, ge=1)
    sweep_order: Literal["ascending", "descending", "symmetric"] = "ascending"
    restarts: int = Field(1, ge=1)
    gamma_method: Literal["contracted", "columns"] = "contracted"

    @field_validator("s")
    @classmethod
    def _sparsity_above_one(cls, value):
        if value not in ("sqrt", "log") and not value > 1.0:
            raise ValueError("sparsity s must be > 1, 'sqrt' or 'log'")
        return value


class SolverReport(BaseModel):
    """
    Per-iteration diagnostics of one solve; emitted as the JSON report
    """
    schema_version: str = settings.REPORT_SCHEMA_VERSION
    solver: SolverName
    objective: List[float] = Field(default_factory=list)
    primal_residual: List[float] = Field(default_factory=list)
    relative_change: List[float] = Field(default_factory=list)
    masked_rmse: List[float] = Field(default_factory=list)
    sweep_seconds: List[float] = Field(default_factory=list)
    iterations: int = 0
    converged: bool = False
    wall_time: float = 0.0
    notes: List[str] = Field(default_factory=list)

    def record(self, objective: float, primal_residual: float, relative_change: float):
        self.objective.append(float(objective))
        self.primal_residual.append(float(primal_residual))
        self.relative_change.append(float(relative_change))
        self.iterations = len(self.objective)


class SandwichReport(BaseModel):
    """
    Empirical audit of the projected Schatten norm sandwich
    """
    schema_version: str = settings.REPORT_SCHEMA_VERSION
    pairs: int
    satisfied_fraction: float
    upper_fraction: float
    min_ratio: float
    max_ratio: float
    threshold_d: int
    threshold_met: bool
    epsilon: float
    ratios_by_mode: Dict[int, List[float]] = Field(default_factory=dict)


class ExperimentSpec(BaseModel):
    """
    Synthetic validation run: truth grid, observation model and solver selection
    """
    mode: Literal["synth"] = "synth"
    shape: List[int] = Field(default_factory=lambda: [8, 8, 10, 10])
    rank_grid: List[int] = Field(default_factory=lambda: [3, 5, 7])
    ratio: float = Field(0.5, gt=0.0, le=1.0)
    sigma2: float = Field(0.01, ge=0.0)
    lambdas: List[float] = Field(default_factory=lambda: [1.0, 3.0, 5.0])
    trials: int = Field(10, ge=1)
    seed: int = 42
    solver: SolverChoice = "both"
    admm: SolverConfig = Field(default_factory=SolverConfig)
    rals: RalsConfig = Field(default_factory=RalsConfig)
    output: Optional[Path] = None

    @field_validator("rank_grid", "lambdas", "shape")
    @classmethod
    def _non_empty(cls, value):
        if not value:
            raise ValueError("grids must be non-empty")
        return value

    @property
    def sigma(self) -> float:
        return self.sigma2 ** 0.5


class MarkovSpec(BaseModel):
    """
    Higher-order Markov transition completion on a discretised time series
    """
    input: Optional[Path] = None
    simulate_order: Optional[int] = Field(None, ge=1)
    simulate_length: int = Field(200_000, ge=2)
    bins: int = Field(10, ge=2)
    orders: List[int] = Field(default_factory=lambda: [5, 7, 8, 10])
    n_observed: int = Field(10_000, ge=1)
    lambdas: List[float] = Field(default_factory=lambda: [1.0])
    split: float = Field(0.8, gt=0.0, lt=1.0)
    unvisited: Literal["uniform", "exclude"] = "uniform"
    solver: SolverChoice = "rals"
    seed: int = 42
    admm: SolverConfig = Field(default_factory=SolverConfig)
    rals: RalsConfig = Field(default_factory=lambda: RalsConfig(max_rank=4, s="sqrt", outer_sweeps=5))
    output: Optional[Path] = None

    @field_validator("orders")
    @classmethod
    def _orders_valid(cls, value):
        if not value or any(k < 2 for k in value):
            raise ValueError("orders must be a non-empty list of integers >= 2")
        return value

    @model_validator(mode="after")
    def _one_source(self):
        if self.input is None and self.simulate_order is None:
            raise ValueError("either input or simulate_order is required")
        return self


class BenchSpec(BaseModel):
    """
    Scaling benchmark of TT-RALS sweeps (and TT-ADMM iterations) against the order K
    """
    orders: List[int] = Field(default_factory=lambda: list(range(4, 11)))
    dim: int = Field(10, ge=2)
    rank: int = Field(4, ge=1)
    n_observed: int = Field(10_000, ge=1)
    d: int = Field(10, ge=1)
    s: Union[float, Literal["sqrt", "log"]] = "log"
    sweeps: int = Field(1, ge=1)
    inner_iters: int = Field(5, ge=1)
    admm_dim: int = Field(4, ge=2)
    admm_orders: List[int] = Field(default_factory=lambda: [2, 3, 4, 5, 6, 7])
    admm_iters: int = Field(5, ge=1)
    seed: int = 42
    output: Optional[Path] = None


class CompleteSpec(BaseModel):
    """
    General-purpose completion of an observation CSV
    """
    observations: Path
    shape: Optional[List[int]] = None
    solver: SolverName = "rals"
    admm: SolverConfig = Field(default_factory=SolverConfig)
    rals: RalsConfig = Field(default_factory=RalsConfig)
    output_dir: Path = settings.OUTPUT_DIR
    prefix: str = "completion"


class BenchSummary(BaseModel):
    """
    Fitted growth of solver cost with the tensor order
    """
    schema_version: str = settings.REPORT_SCHEMA_VERSION
    rals_orders: List[int] = Field(default_factory=list)
    rals_seconds_per_sweep: List[float] = Field(default_factory=list)
    rals_exponent: Optional[float] = None
    admm_orders: List[int] = Field(default_factory=list)
    admm_seconds_per_iter: List[float] = Field(default_factory=list)
    admm_log_slope: Optional[float] = None
    peak_bytes: Dict[int, int] = Field(default_factory=dict)
