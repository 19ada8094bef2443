"""Steady states ``mu A u + B(u) + beta C(u) = f`` and their a priori bounds."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .integrator import SolverConfig, simulate
from .operators import PhysicsParams, combined_G, convective_B, eta_constant, forchheimer_C, RegimeError
from .spectral_space import SpectralSpace


class NotConverged(RuntimeError):
    """Raised with the best iterate attached as ``result``."""

    def __init__(self, result: "StationaryResult"):
        super().__init__(
            f"stationary solve stopped after {result.iterations} iterations "
            f"with residual {result.residual_dual_norm:.3e}")
        self.result = result


@dataclass(frozen=True)
class StationaryResult:
    u_star: np.ndarray
    residual_dual_norm: float
    iterations: int
    converged: bool
    marched: bool = False


def stationary_residual(space: SpectralSpace, uh: np.ndarray, f: np.ndarray, params: PhysicsParams) -> float:
    """``|mu A u + B(u) + beta C(u) - f|_{V'}``."""
    return float(np.sqrt(space.dual_norm_sq(combined_G(space, uh, params) - f)))


def solve_stationary(space: SpectralSpace, f: np.ndarray, params: PhysicsParams, tol: float = 1e-8,
                     max_iter: int = 10_000, omega: float = 0.7, u_init: np.ndarray | None = None,
                     march_time: float = 20.0, march_dt: float = 1e-3,
                     raise_on_failure: bool = True) -> StationaryResult:
    """Damped Picard iteration ``u <- (1-w) u + w (mu A)^{-1}(f - B(u) - beta C(u))``.

    The default initial guess is the Stokes solution ``(mu A)^{-1} f``.  A
    step that increases the residual is rejected and ``w`` is halved.  When
    ``w`` falls below ``1e-6`` the iteration stagnates; the state is then
    relaxed by deterministic time marching and the iteration restarts once.
    """
    f = np.asarray(f, dtype=complex)
    mu, beta, r = params.mu, params.beta, params.r
    f_dual = float(np.sqrt(space.dual_norm_sq(f)))
    target_res = tol * f_dual
    u = space.inverse_stokes(f) / mu if u_init is None else np.array(u_init, dtype=complex)

    def picard_map(v):
        rhs = f - convective_B(space, v)
        if beta:
            rhs = rhs - beta * forchheimer_C(space, v, r)
        return space.enforce_hermitian(space.inverse_stokes(rhs) / mu)

    res = stationary_residual(space, u, f, params)
    iterations, marched, w = 0, False, omega
    while res > target_res and iterations < max_iter:
        candidate = (1 - w) * u + w * picard_map(u)
        cand_res = stationary_residual(space, candidate, f, params)
        iterations += 1
        if cand_res < res:
            u, res = candidate, cand_res
            continue
        w *= 0.5
        if w < 1e-6:
            if marched:
                break
            u = _march(space, u, params.with_forcing(f), march_time, march_dt)
            res = stationary_residual(space, u, f, params)
            marched, w = True, omega

    result = StationaryResult(u, res, iterations, bool(res <= target_res), marched)
    if not result.converged and raise_on_failure:
        raise NotConverged(result)
    return result


def _march(space, u, params, t_end, dt):
    record = simulate(space, u, params, None, SolverConfig(dt, t_end, record_every=int(round(t_end / dt))))
    if not record.ok:
        return u
    return record.final


def stationary_bound_check(space: SpectralSpace, result: StationaryResult, f: np.ndarray,
                           params: PhysicsParams, rtol: float = 1e-9):
    """``mu |u|_V^2 + 2 beta |u|_{L^{r+1}}^{r+1} <= |f|_{V'}^2 / mu``.

    Returns ``(holds, lhs, rhs)``.
    """
    u = result.u_star
    lhs = params.mu * float(space.v_norm_sq(u))
    if params.beta:
        lhs += 2 * params.beta * float(space.lp_integral(u, params.r + 1))
    rhs = float(space.dual_norm_sq(f)) / params.mu
    return lhs <= rhs + rtol * max(rhs, 1e-300), lhs, rhs


def uniqueness_condition(params: PhysicsParams, lambda1: float = 1.0) -> bool:
    """Sufficient condition for a unique steady state.

    ``mu > 2 eta / lambda1`` for ``r > 3`` and ``2 beta mu >= 1`` for ``r = 3``.
    """
    if params.r > 3:
        try:
            return params.mu > 2 * eta_constant(params) / lambda1
        except RegimeError:
            return False
    return params.globally_monotone


def relaxation_rate_bound(params: PhysicsParams, lambda1: float = 1.0) -> float:
    """Decay rate ``kappa = lambda1 mu - 2 eta`` of ``|u(t) - u_inf|_H^2``."""
    return lambda1 * params.mu - 2 * eta_constant(params)
