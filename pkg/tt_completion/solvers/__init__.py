from .admm_solver import TTADMMSolver, tt_admm_solve
from .rals_solver import TTRALSSolver, tt_rals_solve

__all__ = ['TTADMMSolver', 'tt_admm_solve', 'TTRALSSolver', 'tt_rals_solve']
