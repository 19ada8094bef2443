"""Monte-Carlo checks of exponential decay and noise stabilization.

Decay rates are fitted by ordinary least squares of ``log E|.|^2`` against
time over ``[0.2 T, T]``.  The confidence half-width is 1.96 times the
standard deviation of the fitted rate under a path bootstrap (200
resamples); for a single path it is 1.96 times the OLS standard error.  A
theoretical rate is an upper envelope, so the verdict only asks that the
fitted decay be at least the theoretical rate minus that half-width.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .integrator import Integrator, SolverConfig, TrajectoryRecord, simulate_ensemble
from .noise import ScalarStationary, path_stream
from .operators import PhysicsParams, RegimeError, eta_constant
from .spectral_space import SpectralSpace
from .stationary import relaxation_rate_bound, solve_stationary
from .verify import RandomFieldLaw, random_field

BURN_IN_FRACTION = 0.2
BOOTSTRAP_RESAMPLES = 200
Z_95 = 1.96


class ConditionNotMet(ValueError):
    """The parameters fall outside the regime where a decay rate is guaranteed."""


@dataclass(frozen=True)
class EnsembleStats:
    """Ensemble mean of a squared deviation and its fitted decay."""

    times: np.ndarray
    mean: np.ndarray
    ci_half_width: np.ndarray
    log_norms: np.ndarray
    rate: float
    rate_ci: float
    fit_window: tuple[float, float]

    @property
    def n_paths(self) -> int:
        return self.log_norms.shape[0]

    @classmethod
    def from_series(cls, times, deviation, burn_in: float = BURN_IN_FRACTION, seed: int = 0):
        """Aggregate ``deviation[path, time]``; paths containing NaN are dropped."""
        deviation = np.atleast_2d(np.asarray(deviation, dtype=float))
        deviation = deviation[np.isfinite(deviation).all(axis=1)]
        if deviation.shape[0] == 0:
            raise ValueError("no finite paths to aggregate")
        m = deviation.shape[0]
        mean = deviation.mean(axis=0)
        half = Z_95 * deviation.std(axis=0, ddof=1) / math.sqrt(m) if m > 1 else np.zeros_like(mean)
        with np.errstate(divide="ignore"):
            logs = np.log(deviation)
        rate, ci, window = fit_decay_rate(times, deviation, burn_in, seed)
        return cls(np.asarray(times), mean, half, logs, rate, ci, window)


VERDICTS = ("satisfied", "violated", "inconclusive")


@dataclass(frozen=True)
class RateReport:
    theoretical_rate: float
    fitted_rate: float
    rate_ci: float
    fit_window: tuple[float, float]
    verdict: str
    n_paths: int = 1
    n_failed: int = 0
    stats: EnsembleStats | None = None

    def to_dict(self) -> dict:
        return {"theoretical_rate": self.theoretical_rate, "fitted_rate": self.fitted_rate,
                "ci": self.rate_ci, "fit_window": list(self.fit_window), "verdict": self.verdict,
                "n_paths": self.n_paths, "n_failed": self.n_failed}

    @property
    def passed(self) -> bool:
        return self.verdict == "satisfied"


def judge(theoretical: float, fitted: float, ci: float, n_failed: int = 0) -> str:
    if n_failed or not np.isfinite(ci) or math.isnan(fitted):
        return "inconclusive"
    return "satisfied" if fitted >= theoretical - ci else "violated"


def _ols_slope(t, y):
    tc = t - t.mean()
    return (tc * (y - y.mean(axis=-1, keepdims=True))).sum(axis=-1) / (tc**2).sum()


def fit_decay_rate(times, deviation, burn_in: float = BURN_IN_FRACTION, seed: int = 0):
    """Decay rate of ``log mean(deviation)`` over ``[burn_in T, T]``.

    Returns ``(rate, ci_half_width, window)``.  An identically zero mean has
    rate ``inf`` and zero width.
    """
    times = np.asarray(times, dtype=float)
    deviation = np.atleast_2d(np.asarray(deviation, dtype=float))
    t_end = times[-1]
    sel = times >= times[0] + burn_in * (t_end - times[0]) - 1e-12
    t = times[sel]
    window = (float(t[0]), float(t[-1]))
    if t.size < 3:
        raise ValueError("fit window needs at least three recorded times")
    dev = deviation[:, sel]
    mean = dev.mean(axis=0)
    if np.all(mean == 0):
        return math.inf, 0.0, window
    if np.any(mean <= 0):
        return math.nan, math.inf, window
    rate = -float(_ols_slope(t, np.log(mean)))
    m = dev.shape[0]
    if m == 1:
        y = np.log(mean)
        resid = y - (y.mean() - rate * (t - t.mean()))
        se = math.sqrt((resid**2).sum() / (t.size - 2) / ((t - t.mean()) ** 2).sum())
        return rate, Z_95 * se, window
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, m, size=(BOOTSTRAP_RESAMPLES, m))
    boot = dev[idx].mean(axis=1)
    with np.errstate(divide="ignore"):
        slopes = -_ols_slope(t, np.log(boot))
    slopes = slopes[np.isfinite(slopes)]
    ci = Z_95 * float(slopes.std(ddof=1)) if slopes.size > 1 else math.inf
    return rate, ci, window


def decay_rate(params: PhysicsParams, model, lambda1: float = 1.0) -> float:
    """``theta = mu lambda1 - (2 eta + L)``; raises when it is not positive."""
    try:
        eta = eta_constant(params)
    except RegimeError as exc:
        raise ConditionNotMet(str(exc)) from exc
    lip = 0.0 if model is None else model.lipschitz_constant
    theta = params.mu * lambda1 - (2 * eta + lip)
    if theta <= 0:
        raise ConditionNotMet(
            f"mu*lambda1 = {params.mu * lambda1:g} must exceed 2*eta + L = {2 * eta + lip:g}")
    return theta


def _steady_state(space, params):
    f = params.forcing
    if f is None or not np.any(f):
        return space.zeros()
    return solve_stationary(space, f, params, tol=1e-11).u_star


def _deviation_observer(space, ref):
    return lambda t, u: {"deviation": space.h_norm_sq(u - ref)}


def _report(theta, record: TrajectoryRecord, deviation, seed) -> RateReport:
    failed = int(np.sum(record.status != "ok"))
    stats = EnsembleStats.from_series(record.times, deviation, seed=seed)
    return RateReport(theta, stats.rate, stats.rate_ci, stats.fit_window,
                      judge(theta, stats.rate, stats.rate_ci, failed),
                      n_paths=deviation.shape[0], n_failed=failed, stats=stats)


def initial_ensemble(space: SpectralSpace, law: RandomFieldLaw, n_paths: int, center=None) -> np.ndarray:
    """``n_paths`` draws of ``law`` shifted by ``center``; reproducible from ``law.seed``."""
    u0 = random_field(space, law, law.rng(), batch=(n_paths,))
    return u0 if center is None else u0 + center


def ms_stability_experiment(space: SpectralSpace, params: PhysicsParams, model, u0_law,
                            n_paths: int, config: SolverConfig, seed: int = 0) -> RateReport:
    """Decay of ``E|u(t) - u_inf|^2`` against ``theta = mu lambda1 - (2 eta + L)``.

    ``u0_law`` is a :class:`RandomFieldLaw` for ``u_0 - u_inf`` or an array of
    initial fields with a leading path axis.
    """
    theta = decay_rate(params, model, space.lambda1)
    u_inf = _steady_state(space, params)
    if model is not None and not model.vanishes_at(u_inf):
        raise ConditionNotMet("the diffusion coefficient must vanish at the steady state")
    if isinstance(u0_law, RandomFieldLaw):
        u0 = initial_ensemble(space, u0_law, n_paths, u_inf)
    else:
        u0 = np.asarray(u0_law, dtype=complex)
    streams = [path_stream(seed, i) for i in range(len(u0))] if model is not None else None
    record = simulate_ensemble(space, u0, params, model, config, streams=streams,
                               observer=_deviation_observer(space, u_inf))
    return _report(theta, record, record.observed["deviation"], seed)


def contraction_experiment(space: SpectralSpace, params: PhysicsParams, model, u0, v0,
                           n_paths: int, config: SolverConfig, seed: int = 0) -> RateReport:
    """Decay of ``E|u(t) - v(t)|^2`` for two solutions driven by the same noise path."""
    theta = decay_rate(params, model, space.lambda1)
    u0, v0 = np.asarray(u0, dtype=complex), np.asarray(v0, dtype=complex)
    batch = np.concatenate([np.broadcast_to(u0, (n_paths,) + space.field_shape),
                            np.broadcast_to(v0, (n_paths,) + space.field_shape)])
    stream_of = np.tile(np.arange(n_paths), 2)
    streams = [path_stream(seed, i) for i in range(n_paths)] if model is not None else None

    def observer(t, u):
        return {"pair_deviation": space.h_norm_sq(u[:n_paths] - u[n_paths:])}

    record = simulate_ensemble(space, batch, params, model, config, streams=streams,
                               stream_of=stream_of if model is not None else None, observer=observer)
    report = _report(theta, record, record.observed["pair_deviation"], seed)
    return report


def discrete_equilibrium(space: SpectralSpace, params: PhysicsParams, config: SolverConfig,
                         u_start: np.ndarray, tol: float = 1e-14, max_steps: int = 200_000) -> np.ndarray:
    """Fixed point of the deterministic step map, found by iterating it from ``u_start``.

    The time-stepping scheme has its own equilibrium, which differs from the
    steady state by ``O(dt)``.  Decay toward the latter flattens once the
    deviation reaches that offset, so relaxation rates are measured against
    the former.
    """
    stepper = Integrator(space, params, None, config)
    u = np.array(u_start, dtype=complex)
    scale = max(float(np.sqrt(space.h_norm_sq(u))), 1e-300)
    for _ in range(max_steps):
        u_next, _ = stepper.advance(u, 0.0, None)
        change = float(np.sqrt(space.h_norm_sq(u_next - u)))
        u = u_next
        if change <= tol * scale:
            return u
    raise RuntimeError("the step map did not settle to a fixed point")


@dataclass(frozen=True)
class RelaxationReport:
    rate: RateReport
    equilibrium_offset: float

    def to_dict(self) -> dict:
        return {**self.rate.to_dict(), "equilibrium_offset_sq": self.equilibrium_offset}

    @property
    def passed(self) -> bool:
        return self.rate.passed


def relaxation_experiment(space: SpectralSpace, params: PhysicsParams, u0: np.ndarray,
                          config: SolverConfig, u_inf: np.ndarray | None = None) -> RelaxationReport:
    """Deterministic decay of ``|u(t) - u_inf|^2`` against ``kappa = lambda1 mu - 2 eta``.

    The deviation is measured from the scheme's equilibrium next to
    ``u_inf``; ``equilibrium_offset`` is the squared H distance between the
    two.
    """
    try:
        kappa = relaxation_rate_bound(params, space.lambda1)
    except RegimeError as exc:
        raise ConditionNotMet(str(exc)) from exc
    if kappa <= 0:
        raise ConditionNotMet(f"kappa = {kappa:g} is not positive")
    u_inf = _steady_state(space, params) if u_inf is None else u_inf
    ref = discrete_equilibrium(space, params, config, u_inf)
    record = simulate_ensemble(space, np.asarray(u0)[None], params, None, config,
                               observer=_deviation_observer(space, ref))
    rate = _report(kappa, record, record.observed["deviation"], 0)
    return RelaxationReport(rate, float(space.h_norm_sq(ref - u_inf)))


# ----------------------------------------------------------------------
# stabilization by multiplicative noise
# ----------------------------------------------------------------------
def stabilization_rate(params: PhysicsParams, sigma: float, lambda1: float = 1.0) -> float:
    """``zeta = (sigma^2 + 2 mu lambda1 - 2 eta) / 2``."""
    return 0.5 * (sigma**2 + 2 * params.mu * lambda1 - 2 * eta_constant(params))


@dataclass(frozen=True)
class StabilizationCheck:
    """Pointwise outcome of the pathwise logarithmic bound.

    ``holds[path, time]`` is True where the bound holds within the slack.
    The initial time and paths whose deviation vanishes initially are
    excluded from the violation fraction.
    """

    times: np.ndarray
    holds: np.ndarray
    checked: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray
    slack: np.ndarray
    zeta: float

    @property
    def violation_fraction(self) -> float:
        n = int(self.checked.sum())
        return float((~self.holds & self.checked).sum() / n) if n else 0.0

    def fraction_at(self, times) -> float:
        """Violation fraction restricted to the recorded times in ``times``."""
        sel = np.isin(np.round(self.times, 12), np.round(np.asarray(times), 12))
        checked = self.checked[:, sel]
        n = int(checked.sum())
        return float((~self.holds[:, sel] & checked).sum() / n) if n else 0.0


SLACK_CONSTANT = 3.0


def stabilization_pathwise_check(params: PhysicsParams, sigma: float, record: TrajectoryRecord,
                                 deviation: np.ndarray, dt: float, lambda1: float = 1.0,
                                 slack_constant: float = SLACK_CONSTANT) -> StabilizationCheck:
    """Test ``log D(t) <= log D(0) + (2 eta - 2 mu lambda1 - sigma^2) t + 2 sigma W(t)``.

    ``D = |u - u_star|_H^2`` comes from ``deviation[path, time]`` and ``W``
    from the record of a :class:`ScalarStationary` run.  The slack
    ``c sigma^2 sqrt(2 t dt)`` is ``c`` standard deviations of the gap
    between the discrete quadratic variation of ``W`` and ``t``, which is
    how Euler-Maruyama perturbs the Ito correction along a path.
    """
    if record.wiener is None:
        raise TypeError("the pathwise bound needs a scalar Wiener path")
    eta = eta_constant(params)
    times = np.asarray(record.times)
    dev = np.atleast_2d(deviation)
    w = np.atleast_2d(record.wiener)
    with np.errstate(divide="ignore", invalid="ignore"):
        lhs = np.log(dev)
        log0 = lhs[:, :1]
        rhs = log0 + (2 * eta - 2 * params.mu * lambda1 - sigma**2) * times + 2 * sigma * w
    slack = slack_constant * sigma**2 * np.sqrt(2 * times * dt)
    with np.errstate(invalid="ignore"):
        holds = (lhs <= rhs + slack) | (lhs == -np.inf)
    checked = np.isfinite(log0) & np.isfinite(w) & (times > 0)
    checked = checked & np.isfinite(rhs)
    return StabilizationCheck(times, holds, checked, lhs, rhs, slack,
                              stabilization_rate(params, sigma, lambda1))


@dataclass(frozen=True)
class StabilizationReport:
    zeta: float
    violation_fraction: float
    n_paths: int
    n_failed: int
    check: StabilizationCheck
    record: TrajectoryRecord

    def to_dict(self) -> dict:
        return {"zeta": self.zeta, "violation_fraction": self.violation_fraction,
                "n_paths": self.n_paths, "n_failed": self.n_failed}


def stabilization_experiment(space: SpectralSpace, params: PhysicsParams, sigma: float, u0_law,
                             n_paths: int, config: SolverConfig, seed: int = 0) -> StabilizationReport:
    """Run ``sigma (u - u_star) dW`` noise from random data and check the pathwise bound.

    ``u_star`` is the steady state for the forcing in ``params`` (zero when
    there is none).  ``zeta`` may be negative; the pathwise bound holds
    regardless.
    """
    u_star = _steady_state(space, params)
    model = ScalarStationary(space, sigma, u_star)
    if isinstance(u0_law, RandomFieldLaw):
        u0 = initial_ensemble(space, u0_law, n_paths, u_star)
    else:
        u0 = np.asarray(u0_law, dtype=complex)
    streams = [path_stream(seed, i) for i in range(len(u0))]
    record = simulate_ensemble(space, u0, params, model, config, streams=streams,
                               observer=_deviation_observer(space, u_star))
    check = stabilization_pathwise_check(params, sigma, record, record.observed["deviation"],
                                         config.dt, space.lambda1)
    return StabilizationReport(check.zeta, check.violation_fraction, len(u0),
                               int(np.sum(record.status != "ok")), check, record)


def as_lyapunov_estimate(times, deviation_sq) -> float:
    """Slope of ``log |u(t) - ref|_H`` against ``t`` over the second half of the run.

    ``deviation_sq`` is ``|u(t) - ref|_H^2`` along one path.  Returns ``-inf``
    when the deviation vanishes anywhere in that window.
    """
    times = np.asarray(times, dtype=float)
    dev = np.asarray(deviation_sq, dtype=float)
    sel = times >= times[0] + 0.5 * (times[-1] - times[0])
    if sel.sum() < 2:
        raise ValueError("need at least two recorded times in the second half")
    tail = dev[sel]
    if np.any(tail <= 0):
        return -math.inf
    return float(_ols_slope(times[sel], 0.5 * np.log(tail)))
