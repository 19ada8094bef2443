"""Time stepping of the Galerkin system with pathwise energy bookkeeping.

One step of the exponential Euler-Maruyama scheme reads::

    u_{n+1} = exp(-mu A dt) (u_n + dt (f - B(u_n) - beta C(u_n)) + Phi(u_n) dW_n)

and the semi-implicit variant replaces the exponential by
``(I + mu dt A)^{-1}``.  Paths are advanced together as one batch; each path
draws its increments from its own stream.

Along the way the integrator accumulates every term of the energy balance::

    |u(t)|^2 + 2 mu int |u|_V^2 + 2 beta int |u|_{L^{r+1}}^{r+1}
        = |u_0|^2 + 2 int (f, u) + int |Phi|_{L_Q}^2 + 2 int (Phi dW, u)

using trapezoid sums for the ``dt`` integrals and left-point sums for the
stochastic integral.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .noise import ScalarStationary, WienerIncrement
from .operators import PhysicsParams, absorption_padding, absorption_samples, convective_B
from .spectral_space import SpectralSpace

SCHEMES = ("exponential_euler_maruyama", "semi_implicit_em")


class BlowUp(RuntimeError):
    def __init__(self, time: float, norm: float):
        super().__init__(f"|u|_H = {norm:.3g} exceeded the guard at t = {time:g}")
        self.time = time


class NonFinite(RuntimeError):
    def __init__(self, time: float):
        super().__init__(f"non-finite state at t = {time:g}")
        self.time = time


@dataclass(frozen=True)
class SolverConfig:
    """Time step, horizon and recording options.

    ``noise_substeps`` draws that many Brownian increments per step and sums
    them, so a run at ``dt`` with ``noise_substeps=2`` sees the same Wiener
    path as a run at ``dt/2`` with the same seed.
    """

    dt: float
    t_end: float
    scheme: str = "exponential_euler_maruyama"
    record_every: int = 1
    clip_threshold: float = 1e6
    noise_substeps: int = 1
    snapshot_every: int = 0

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.t_end < self.dt:
            raise ValueError("t_end must be at least dt")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; choose from {SCHEMES}")
        if self.record_every < 1 or self.noise_substeps < 1 or self.snapshot_every < 0:
            raise ValueError("record_every and noise_substeps must be >= 1")
        if not self.clip_threshold > 0:
            raise ValueError("clip_threshold must be positive")
        n = self.t_end / self.dt
        if abs(n - round(n)) > 1e-9 * max(1.0, n):
            raise ValueError("t_end must be an integer multiple of dt")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))


@dataclass
class TrajectoryRecord:
    """Recorded diagnostics, with a leading path axis for ensembles.

    The ``*_int`` arrays are running trapezoid integrals; ``martingale`` is
    ``sum 2 (Phi dW, u)``; ``hs`` is the running integral of
    ``|Phi|_{L_Q}^2``; ``quadratic_variation`` is ``sum |Phi dW|^2``.
    """

    times: np.ndarray
    h_norm_sq: np.ndarray
    v_norm_sq: np.ndarray
    lr1_norm: np.ndarray
    martingale: np.ndarray
    hs: np.ndarray
    v_int: np.ndarray
    lr1_int: np.ndarray
    forcing_work: np.ndarray
    quadratic_variation: np.ndarray
    wiener: np.ndarray | None
    status: np.ndarray
    failure_time: np.ndarray
    final: np.ndarray
    snapshot_times: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    observed: dict = field(default_factory=dict)

    @property
    def n_paths(self) -> int:
        return 1 if self.h_norm_sq.ndim == 1 else self.h_norm_sq.shape[0]

    @property
    def ok(self) -> bool:
        return bool(np.all(self.status == "ok"))

    def path(self, i: int) -> "TrajectoryRecord":
        """Single path view of an ensemble record."""
        pick = lambda a: None if a is None else a[i]  # noqa: E731
        return TrajectoryRecord(
            self.times, *(pick(getattr(self, n)) for n in _SERIES),
            wiener=pick(self.wiener), status=self.status[i], failure_time=self.failure_time[i],
            final=self.final[i],
            snapshot_times=self.snapshot_times, snapshots=[s[i] for s in self.snapshots],
            observed={k: v[i] for k, v in self.observed.items()})


_SERIES = ("h_norm_sq", "v_norm_sq", "lr1_norm", "martingale", "hs", "v_int", "lr1_int",
           "forcing_work", "quadratic_variation")


@dataclass(frozen=True)
class StepDiagnostics:
    """Point values at the start of a step and stochastic increments over it."""

    h_norm_sq: np.ndarray
    v_norm_sq: np.ndarray
    lr1_norm: np.ndarray
    hs: np.ndarray
    forcing_work: np.ndarray
    martingale_increment: np.ndarray
    qv_increment: np.ndarray
    scalar_increment: np.ndarray | None


class Integrator:
    """Precomputed multipliers and the single-step update for one configuration."""

    def __init__(self, space: SpectralSpace, params: PhysicsParams, model, config: SolverConfig):
        self.space, self.params, self.model, self.config = space, params, model, config
        dt, mu = config.dt, params.mu
        if config.scheme == "exponential_euler_maruyama":
            self.linear = space.stokes_exponential(mu * dt)
        else:
            self.linear = space.mask / (1.0 + mu * dt * space.k2)
        self.forcing = params.forcing
        if self.forcing is not None:
            projected = space.leray(self.forcing)
            if np.abs(projected - self.forcing).max() > 1e-12 * max(1.0, np.abs(self.forcing).max()):
                raise ValueError("forcing must be divergence-free and zero-mean")
        self.c_padding = absorption_padding(params.r)

    def point_values(self, uh: np.ndarray):
        """Drift ``f - B(u) - beta C(u)`` and ``|u|_{L^{r+1}}^{r+1}``."""
        space, p = self.space, self.params
        drift = -convective_B(space, uh)
        u, g = absorption_samples(space, uh, p.r, self.c_padding)
        if p.beta:
            drift = drift - p.beta * space.leray(space.to_spectral(g))
        lr1 = space.volume * (g * u).sum(axis=-space.dim - 1).mean(axis=tuple(range(-space.dim, 0)))
        if self.forcing is not None:
            drift = drift + self.forcing
        return space.enforce_hermitian(drift), lr1

    def advance(self, uh: np.ndarray, t: float, incr: WienerIncrement | None):
        """One step from ``(t, u)``; returns ``(u_next, StepDiagnostics)``."""
        space, dt = self.space, self.config.dt
        drift, lr1 = self.point_values(uh)
        batch = uh.shape[: -space.dim - 1]
        zeros = np.zeros(batch)
        fw = zeros if self.forcing is None else space.inner(self.forcing, uh)
        pre = uh + dt * drift
        if self.model is None or incr is None:
            hs, dm, dq, dw = zeros, zeros, zeros, None
        else:
            noise = self.model.apply(t, uh, incr)
            hs = self.model.hs_norm_sq(t, uh) * np.ones(batch)
            dm = 2.0 * space.inner(noise, uh)
            dq = space.h_norm_sq(noise)
            dw = incr.value if isinstance(self.model, ScalarStationary) else None
            pre = pre + noise
        diag = StepDiagnostics(space.h_norm_sq(uh), space.v_norm_sq(uh), lr1, hs, fw, dm, dq, dw)
        return self.linear * pre, diag


def step(space: SpectralSpace, uh: np.ndarray, t: float, params: PhysicsParams, model,
         config: SolverConfig, rng: np.random.Generator | None = None):
    """Advance a single field by one step.

    Raises :class:`BlowUp` or :class:`NonFinite` when the new state violates
    the guard.
    """
    stepper = Integrator(space, params, model, config)
    incr = None
    if model is not None:
        incr = _draw(model, [rng], np.array([0]), config.dt, config.noise_substeps)
        incr = WienerIncrement(incr.dt, incr.value[0], incr.normals[0])
    u_next, diag = stepper.advance(uh, t, incr)
    _guard(space, u_next, t + config.dt, config.clip_threshold)
    return u_next, diag


def _guard(space, uh, t, threshold):
    if not np.all(np.isfinite(uh)):
        raise NonFinite(t)
    norm = float(np.sqrt(space.h_norm_sq(uh)))
    if norm > threshold:
        raise BlowUp(t, norm)


def _draw(model, streams, stream_of, dt, substeps) -> WienerIncrement:
    """Increments for every batch member; members sharing a stream share draws."""
    shape = (substeps,) + tuple(model.normal_shape)
    draws = np.stack([rng.standard_normal(shape).sum(axis=0) for rng in streams])
    draws /= np.sqrt(substeps)
    return model.increment(draws[stream_of], dt)


def simulate(space: SpectralSpace, u0: np.ndarray, params: PhysicsParams, model,
             config: SolverConfig, rng: np.random.Generator | None = None,
             observer=None) -> TrajectoryRecord:
    """Integrate one path; ``rng`` may be omitted when ``model`` is ``None``."""
    record = simulate_ensemble(space, u0[None], params, model, config,
                               streams=None if rng is None else [rng], observer=observer)
    return record.path(0)


def simulate_ensemble(space: SpectralSpace, u0: np.ndarray, params: PhysicsParams, model,
                      config: SolverConfig, streams=None, stream_of=None,
                      observer=None) -> TrajectoryRecord:
    """Integrate a batch of paths ``u0[i]``.

    ``streams`` lists one generator per independent noise path and
    ``stream_of[i]`` says which stream drives member ``i`` (identity by
    default).  Members sharing a stream receive bit-identical increments,
    which realizes synchronous coupling.

    A path that leaves the guard or turns non-finite is stopped; its status
    and failure time are reported and its later records are NaN.

    ``observer(t, u)`` is called at every recorded time with the batch state
    (failed paths set to NaN) and returns a dict of arrays with a leading path
    axis; the results are stacked along a time axis into ``record.observed``.
    """
    u = np.array(u0, dtype=complex)
    space._check(u)
    n_paths = u.shape[0]
    if model is not None:
        if streams is None:
            raise ValueError("a noise model needs random streams")
        stream_of = np.arange(n_paths) if stream_of is None else np.asarray(stream_of)
        if stream_of.shape != (n_paths,) or stream_of.max() >= len(streams):
            raise ValueError("stream_of must map every path to a stream")

    stepper = Integrator(space, params, model, config)
    dt, n_steps, every = config.dt, config.n_steps, config.record_every
    record_steps = list(range(0, n_steps + 1, every))
    if record_steps[-1] != n_steps:
        record_steps.append(n_steps)
    n_rec = len(record_steps)
    series = {name: np.full((n_paths, n_rec), np.nan) for name in _SERIES}
    scalar = isinstance(model, ScalarStationary)
    wiener = np.full((n_paths, n_rec), np.nan) if scalar else None
    status = np.array(["ok"] * n_paths, dtype=object)
    failure_time = np.full(n_paths, np.nan)
    alive = np.ones(n_paths, dtype=bool)
    snapshot_times, snapshots = [], []
    observed: dict[str, list] = {}

    acc = {name: np.zeros(n_paths) for name in ("martingale", "hs", "v_int", "lr1_int",
                                                 "forcing_work", "quadratic_variation")}
    w_path = np.zeros(n_paths)
    prev = None
    rec = 0

    def trapezoid(diag):
        if prev is None:
            return
        acc["v_int"] += 0.5 * dt * (prev.v_norm_sq + diag.v_norm_sq)
        acc["lr1_int"] += 0.5 * dt * (prev.lr1_norm + diag.lr1_norm)
        acc["hs"] += 0.5 * dt * (prev.hs + diag.hs)
        acc["forcing_work"] += 0.5 * dt * (prev.forcing_work + diag.forcing_work)

    def store(diag):
        nonlocal rec
        for name, value in (("h_norm_sq", diag.h_norm_sq), ("v_norm_sq", diag.v_norm_sq),
                            ("lr1_norm", diag.lr1_norm)):
            series[name][alive, rec] = value[alive]
        for name, value in acc.items():
            series[name][alive, rec] = value[alive]
        if scalar:
            wiener[alive, rec] = w_path[alive]
        if observer is not None:
            for name, value in observer(record_steps[rec] * dt, _masked(u, alive)).items():
                observed.setdefault(name, []).append(np.asarray(value))
        rec += 1

    with np.errstate(over="ignore", invalid="ignore"):
        for n in range(n_steps + 1):
            t = n * dt
            if n == n_steps:
                diag = _final_diagnostics(stepper, u, model, t)
                u_next = None
            else:
                incr = None
                if model is not None:
                    incr = _draw(model, streams, stream_of, dt, config.noise_substeps)
                u_next, diag = stepper.advance(u, t, incr)
            trapezoid(diag)
            if config.snapshot_every and n % config.snapshot_every == 0:
                snapshot_times.append(t)
                snapshots.append(_masked(u, alive))
            if rec < n_rec and record_steps[rec] == n:
                store(diag)
            if u_next is None:
                break
            acc["martingale"] += diag.martingale_increment
            acc["quadratic_variation"] += diag.qv_increment
            if scalar:
                w_path += diag.scalar_increment
            prev = diag
            u = u_next
            failed = _failed(space, u, alive, config.clip_threshold)
            for i in np.flatnonzero(failed):
                norm = space.h_norm_sq(u[i])
                status[i] = "nonfinite" if not np.isfinite(norm) else "blowup"
                failure_time[i] = t + dt
            if failed.any():
                alive &= ~failed
                u[failed] = 0.0

    final = _masked(u, alive)
    return TrajectoryRecord(
        np.array(record_steps) * dt, **series, wiener=wiener, status=status,
        failure_time=failure_time, final=final,
        snapshot_times=snapshot_times, snapshots=snapshots,
        observed={k: np.stack(v, axis=1) for k, v in observed.items()})


def _masked(u, alive):
    out = u.copy()
    out[~alive] = np.nan
    return out


def _failed(space, u, alive, threshold):
    norms = space.h_norm_sq(u)
    bad = ~np.isfinite(norms) | (norms > threshold**2)
    bad |= ~np.isfinite(u).reshape(len(u), -1).all(axis=1)
    return bad & alive


def _final_diagnostics(stepper: Integrator, u, model, t):
    space = stepper.space
    _, lr1 = stepper.point_values(u)
    zeros = np.zeros(u.shape[0])
    fw = zeros if stepper.forcing is None else space.inner(stepper.forcing, u)
    hs = zeros if model is None else model.hs_norm_sq(t, u) * np.ones(u.shape[0])
    return StepDiagnostics(space.h_norm_sq(u), space.v_norm_sq(u), lr1, hs, fw,
                           zeros, zeros, None)


def energy_residual(record: TrajectoryRecord, params: PhysicsParams) -> np.ndarray:
    """Left side minus right side of the energy balance at every recorded time."""
    h0 = record.h_norm_sq[..., :1]
    return (record.h_norm_sq + 2 * params.mu * record.v_int
            + 2 * params.beta * record.lr1_int
            - h0 - record.hs - record.martingale - 2 * record.forcing_work)


@dataclass(frozen=True)
class BoundCheck:
    lhs: float
    rhs: float

    @property
    def holds(self) -> bool:
        return bool(self.lhs <= self.rhs)

    def __bool__(self) -> bool:
        return self.holds


def apriori_bound_check(record: TrajectoryRecord, params: PhysicsParams, model) -> BoundCheck:
    """Monte-Carlo check of the a priori energy estimate.

    With noise and no forcing, the estimate is
    ``E[sup |u|^2 + 4 mu int |u|_V^2 + 4 beta int |u|^{r+1}]
    <= (2 E|u_0|^2 + 14 K T) exp(28 K T)``.  Without noise the pathwise energy
    balance gives ``sup |u|^2 + mu int |u|_V^2 + 2 beta int |u|^{r+1}
    <= |u_0|^2 + T |f|_{V'}^2 / mu`` instead.
    """
    h = np.atleast_2d(record.h_norm_sq)
    v_int = np.atleast_2d(record.v_int)[:, -1]
    lr1_int = np.atleast_2d(record.lr1_int)[:, -1]
    t_end = float(record.times[-1])
    mu, beta = params.mu, params.beta
    k = 0.0 if model is None else model.growth_constant
    forcing = params.forcing
    if forcing is not None and np.any(forcing != 0):
        if k:
            raise ValueError("the stochastic estimate is stated without forcing")
        space = _space_of(forcing)
        f_dual = float(space.dual_norm_sq(forcing))
        lhs = np.max(h.max(axis=1) + mu * v_int + 2 * beta * lr1_int)
        rhs = float(h[:, 0].max()) + t_end * f_dual / mu
        return BoundCheck(float(lhs), rhs)
    lhs = float(np.mean(h.max(axis=1) + 4 * mu * v_int + 4 * beta * lr1_int))
    rhs = (2 * float(h[:, 0].mean()) + 14 * k * t_end) * np.exp(28 * k * t_end)
    return BoundCheck(lhs, float(rhs))


def _space_of(uh: np.ndarray) -> SpectralSpace:
    dim = uh.shape[0]
    return SpectralSpace(dim, uh.shape[-1])
