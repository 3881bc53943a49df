"""
TT-RALS: alternating minimisation over TT cores with randomly projected
Schatten regularisers.

Each core subproblem

    min_g (1/2n)||Y - Omega g||^2 + (lambda/(K-1)) sum_k' ||P_k'(X(g))||_s

is convex in g and solved with a few ADMM steps on the split W_k' = Gamma_k' g:

    g     <- (Omega'Omega/n + c sum Gamma'Gamma)^-1 (Omega'Y/n + c sum Gamma'(W - beta)),  c = eta/(K-1)
    W_k'  <- prox_{lambda/eta}(Gamma_k' g + beta_k')
    beta  <- beta_k' + Gamma_k' g - W_k'

Only the TT cores, the n observed entries and the D1 x D2 sketches are ever
held, so memory does not scale with prod(I_k).
"""
from dataclasses import dataclass
import logging
import time
from typing import List, Optional, Tuple

import numpy as np
import scipy.linalg

from ..data.model import RalsConfig, SolverReport
from ..errors import NumericalFailureError, ShapeError
from ..tensor.observation import ObservationSet
from ..tensor.projection import SparseProjectionPair, project_tt, sample_projection
from ..tensor.proximal import numerical_rank, prox_schatten, schatten1, svd
from ..tensor.tt_core import (
    Stream,
    TTTensor,
    derive_seed,
    element_count,
    ensure_dense_fits,
    random_tt,
    tt_values,
    unfold,
)
from .rals_helpers import build_gamma, build_omega

logger = logging.getLogger(__name__)

_EIG_FLOOR = 1e-12
_RIDGE = 1e-10
_ORACLE_TOL = 1e-9


@dataclass
class RalsState:
    tt: TTTensor
    projections: List[SparseProjectionPair]
    w: List[np.ndarray]
    beta: List[np.ndarray]
    sweep: int = 0


@dataclass
class CoreUpdate:
    core: np.ndarray
    w: List[np.ndarray]
    beta: List[np.ndarray]
    objective_entry: float
    objective: float
    ridge: bool = False


def initial_state(obs: ObservationSet, cfg: RalsConfig, seed: int) -> RalsState:
    """Random cores at the estimation rank, frozen projections, W = P(X0) and beta = 0."""
    order = len(obs.shape)
    ranks = [cfg.max_rank] * (order - 1)
    tt = random_tt(obs.shape, ranks, seed=seed)
    projections = [
        sample_projection(obs.shape, kp, cfg.d1, cfg.d2, cfg.s, seed=seed)
        for kp in range(1, order)
    ]
    w = [project_tt(p, tt) for p in projections]
    beta = [np.zeros(cfg.d1 * cfg.d2) for _ in projections]
    return RalsState(tt=tt, projections=projections, w=w, beta=beta)


def sweep_sequence(order: int, sweep_order: str) -> List[int]:
    ascending = list(range(1, order + 1))
    if sweep_order == "descending":
        return ascending[::-1]
    if sweep_order == "symmetric":
        return ascending + ascending[-2::-1]
    return ascending


def _factor(system: np.ndarray) -> Tuple[tuple, bool]:
    """Cholesky factor of the g-system, with a small ridge when it is near singular."""
    eigvals = scipy.linalg.eigvalsh(system)
    top = float(eigvals[-1]) if eigvals.size else 0.0
    ridge = top <= 0.0 or float(eigvals[0]) < _EIG_FLOOR * top
    if ridge:
        diag = float(np.max(np.diag(system)))
        bump = _RIDGE * (diag if diag > 0 else 1.0)
        system = system + bump * np.eye(system.shape[0])
    try:
        return scipy.linalg.cho_factor(system), ridge
    except np.linalg.LinAlgError as e:
        raise NumericalFailureError(f"g-update system is not positive definite: {e}") from e


def _inner_objective(g, omega, values, gammas, cfg: RalsConfig, order: int) -> float:
    residual = values - omega @ g
    loss = 0.5 * float(residual @ residual) / values.shape[0]
    if cfg.lam == 0:
        return loss
    penalty = sum(schatten1((gamma @ g).reshape(cfg.d1, cfg.d2)) for gamma in gammas)
    return loss + cfg.lam / (order - 1) * penalty


def rals_core_update(
    state: RalsState,
    obs: ObservationSet,
    k: int,
    cfg: RalsConfig,
    check_oracles: bool = False,
) -> CoreUpdate:
    """
    Run inner_iters ADMM steps on the convex subproblem of core k.

    The W and beta duals advance in any case; the core itself is only replaced
    when the subproblem objective did not increase.

    Args:
        state: Current cores, projections and duals
        obs: Observed entries
        k: Core position (1-based)
        cfg: Solver hyperparameters
        check_oracles: Verify Omega g = X(S) and Gamma g = P(X) before solving
    """
    order = state.tt.order
    if not 1 <= k <= order:
        raise ShapeError(f"core index must lie in [1, {order}], got {k}")
    n = obs.n
    weight = cfg.eta / (order - 1)
    core_shape = state.tt.cores[k - 1].shape
    g_entry = state.tt.cores[k - 1].reshape(-1)

    omega = build_omega(state.tt, k, obs.indices)
    gammas = [
        build_gamma(state.tt, k, p.k, p, method=cfg.gamma_method) for p in state.projections
    ]
    if check_oracles:
        _check_oracles(state, k, g_entry, omega, gammas, obs)

    system = omega.T @ omega / n + weight * sum(gamma.T @ gamma for gamma in gammas)
    data = omega.T @ obs.values / n
    factor, ridge = _factor(system)
    if ridge:
        logger.warning(f"core {k}: g-update system near singular, added ridge {_RIDGE:g} x max(diag)")

    threshold = cfg.lam / cfg.eta
    w = [m.reshape(-1).copy() for m in state.w]
    beta = [b.copy() for b in state.beta]
    g = g_entry
    for _ in range(cfg.inner_iters):
        rhs = data + weight * sum(gamma.T @ (wk - bk) for gamma, wk, bk in zip(gammas, w, beta))
        g = scipy.linalg.cho_solve(factor, rhs)
        for j, gamma in enumerate(gammas):
            projected = gamma @ g
            w[j] = prox_schatten((projected + beta[j]).reshape(cfg.d1, cfg.d2), threshold).reshape(-1)
            beta[j] = beta[j] + projected - w[j]

    if not np.all(np.isfinite(g)):
        raise NumericalFailureError(f"core {k} update produced non-finite values")

    entry_value = _inner_objective(g_entry, omega, obs.values, gammas, cfg, order)
    value = _inner_objective(g, omega, obs.values, gammas, cfg, order)
    if value > entry_value:
        logger.debug(f"core {k}: inner objective rose {entry_value:.6e} -> {value:.6e}, keeping entry core")
        g, value = g_entry, entry_value

    return CoreUpdate(
        core=g.reshape(core_shape),
        w=[wk.reshape(cfg.d1, cfg.d2) for wk in w],
        beta=beta,
        objective_entry=entry_value,
        objective=value,
        ridge=ridge,
    )


def _check_oracles(state: RalsState, k: int, g, omega, gammas, obs: ObservationSet) -> None:
    masked = tt_values(state.tt, obs.indices)
    scale = max(float(np.linalg.norm(masked)), 1.0)
    if np.linalg.norm(omega @ g - masked) > _ORACLE_TOL * scale:
        raise NumericalFailureError(f"Omega oracle mismatch at core {k}")
    for gamma, p in zip(gammas, state.projections):
        projected = project_tt(p, state.tt).reshape(-1)
        scale = max(float(np.linalg.norm(projected)), 1.0)
        if np.linalg.norm(gamma @ g - projected) > _ORACLE_TOL * scale:
            raise NumericalFailureError(f"Gamma oracle mismatch at core {k}, unfolding {p.k}")


def projected_objective(tt: TTTensor, obs: ObservationSet, projections, lam: float) -> float:
    """(1/2n)||Y - X(S)||^2 + (lambda/(K-1)) sum_k ||P_k(X)||_s."""
    residual = obs.values - tt_values(tt, obs.indices)
    loss = 0.5 * float(residual @ residual) / obs.n
    if lam == 0:
        return loss
    penalty = sum(schatten1(project_tt(p, tt)) for p in projections)
    return loss + lam / (tt.order - 1) * penalty


class TTRALSSolver:
    """
    Randomized alternating least squares solver for TT completion
    """

    def __init__(self, config: RalsConfig = None, check_oracles: bool = False):
        self.config = config or RalsConfig()
        self.check_oracles = check_oracles
        self.solver_id = "tt_rals"
        self.report = None
        logger.debug(
            f"{self.solver_id} solver initialized (lambda={self.config.lam}, rank={self.config.max_rank}, "
            f"D=({self.config.d1}, {self.config.d2}), s={self.config.s})"
        )

    def _run(self, obs: ObservationSet, seed: int) -> Tuple[TTTensor, SolverReport]:
        cfg = self.config
        order = len(obs.shape)
        report = SolverReport(solver="rals")
        report.notes.append(
            "g-update weights each projected block by eta/(K-1); W-update threshold lambda/eta"
        )
        state = initial_state(obs, cfg, seed)
        sequence = sweep_sequence(order, cfg.sweep_order)
        predictions = tt_values(state.tt, obs.indices)
        ridge_count = 0

        for sweep in range(1, cfg.outer_sweeps + 1):
            started = time.perf_counter()
            for k in sequence:
                update = rals_core_update(state, obs, k, cfg, check_oracles=self.check_oracles)
                state.tt = state.tt.with_core(k, update.core)
                state.w, state.beta = update.w, update.beta
                ridge_count += update.ridge
            state.sweep = sweep
            report.sweep_seconds.append(time.perf_counter() - started)

            previous = predictions
            predictions = tt_values(state.tt, obs.indices)
            change = float(np.linalg.norm(predictions - previous)) / max(float(np.linalg.norm(previous)), 1e-30)
            residual = max(
                float(np.linalg.norm(project_tt(p, state.tt) - w))
                for p, w in zip(state.projections, state.w)
            )
            report.masked_rmse.append(float(np.sqrt(np.mean((obs.values - predictions) ** 2))))
            report.record(projected_objective(state.tt, obs, state.projections, cfg.lam), residual, change)
            logger.debug(
                f"TT-RALS sweep {sweep}: objective={report.objective[-1]:.6e} "
                f"rmse={report.masked_rmse[-1]:.3e} change={change:.3e}"
            )
            if change <= cfg.tol_rel:
                report.converged = True
                break

        if ridge_count:
            report.notes.append(f"ridge fallback used in {ridge_count} core updates")
        return state.tt, report

    def solve(self, obs: ObservationSet) -> Tuple[TTTensor, SolverReport]:
        """
        Sweep over the cores until the masked predictions stop changing or
        outer_sweeps is reached, keeping the best of cfg.restarts runs.

        Args:
            obs: Observed entries

        Returns:
            (completed TT tensor, per-sweep report)
        """
        cfg = self.config
        started = time.perf_counter()
        logger.info(
            f"TT-RALS started on shape {obs.shape} with n={obs.n}, lambda={cfg.lam}, restarts={cfg.restarts}"
        )
        best: Optional[Tuple[TTTensor, SolverReport]] = None
        for restart in range(cfg.restarts):
            seed = cfg.seed if restart == 0 else derive_seed(cfg.seed, Stream.RESTART, restart)
            tt, report = self._run(obs, seed)
            if best is None or report.objective[-1] < best[1].objective[-1]:
                best = (tt, report)
            if cfg.restarts > 1:
                logger.info(f"TT-RALS restart {restart}: final objective {report.objective[-1]:.6e}")

        tt, report = best
        report.wall_time = time.perf_counter() - started
        self.report = report
        logger.info(
            f"TT-RALS finished after {report.iterations} sweeps in {report.wall_time:.2f}s "
            f"(converged={report.converged}, rmse={report.masked_rmse[-1]:.3e})"
        )
        return tt, report


def tt_rals_solve(obs: ObservationSet, cfg: RalsConfig) -> Tuple[TTTensor, SolverReport]:
    return TTRALSSolver(cfg).solve(obs)


def incoherence_diagnostic(x, k: int, r: int) -> float:
    """
    Smallest mu with max_i ||U_i||^2 <= mu r / I_<=k and max_j ||V_j||^2 <= mu r / I_k<
    for the top-r singular subspaces of the k-th unfolding.
    """
    x = np.asarray(x, dtype=np.float64)
    ensure_dense_fits(element_count(x.shape), "incoherence_diagnostic")
    m = unfold(x, k)
    if r < 1:
        raise ShapeError(f"rank must be >= 1, got {r}")
    rank = numerical_rank(m)
    if r > rank:
        raise ShapeError(f"requested rank {r} exceeds the numerical rank {rank} of unfolding {k}")
    result = svd(m)
    u = result.u[:, :r]
    v = result.vt[:r].T
    rows, cols = m.shape
    left = rows / r * float(np.max(np.sum(u ** 2, axis=1)))
    right = cols / r * float(np.max(np.sum(v ** 2, axis=1)))
    return max(left, right)
