from .model import (
    BenchSpec,
    BenchSummary,
    CompleteSpec,
    ExperimentSpec,
    MarkovSpec,
    RalsConfig,
    SolverConfig,
    SolverReport,
    SandwichReport,
)

__all__ = [
    'BenchSpec', 'BenchSummary', 'CompleteSpec', 'ExperimentSpec', 'MarkovSpec',
    'RalsConfig', 'SolverConfig', 'SolverReport', 'SandwichReport',
]
