"""Long-time averages, tightness of the energy, and mixing between initial data.

Time averages discard the first 20% of the run and estimate their standard
error from 20 batch means.  Lipschitz constants of unbounded observables
hold on the ball ``|u|_H <= R``; the mixing test takes ``R`` as the largest
norm seen among the initial data and the sampled final states.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .integrator import SolverConfig, TrajectoryRecord, simulate_ensemble
from .noise import path_stream
from .operators import PhysicsParams, absorption_padding
from .spectral_space import SpectralSpace
from .stability_lab import ConditionNotMet, decay_rate
from .verify import RandomFieldLaw, random_field

N_BATCHES = 20
BURN_IN_FRACTION = 0.2
MIXING_SE_FACTOR = 3.0


class InsufficientSamples(ValueError):
    pass


@dataclass(frozen=True)
class ObservableSet:
    """Functionals of the field evaluated on batches.

    Contents: ``h_norm_sq``, ``v_norm_sq``, ``lr1`` (``|u|_{L^{r+1}}^{r+1}``),
    ``mode_<k>`` (energy in the ``+-k`` pair for every ``|k|^2 <= 4``) and
    ``probe_<j>`` (``tanh <u, g_j>`` for unit probes ``g_j``).
    """

    space: SpectralSpace
    r: float
    probes: tuple = field(default=(), repr=False)
    low_mode_k2: float = 4.0

    @classmethod
    def default(cls, space: SpectralSpace, r: float, seed: int = 0) -> "ObservableSet":
        """A shear probe along ``e_1`` and one smooth random probe, both of unit H norm."""
        k = (1,) + (0,) * (space.dim - 1)
        a = (0, 1) + (0,) * (space.dim - 2)
        shear = space.shear_mode(k, a)
        rand = random_field(space, RandomFieldLaw(decay=2.0, seed=seed, cutoff=3))
        probes = tuple(g / np.sqrt(space.h_norm_sq(g)) for g in (shear, rand))
        return cls(space, r, probes)

    @property
    def low_modes(self) -> np.ndarray:
        ks = self.space.canonical_wavevectors
        return np.flatnonzero((ks**2).sum(axis=1) <= self.low_mode_k2)

    @property
    def names(self) -> list[str]:
        ks = self.space.canonical_wavevectors
        modes = ["mode_" + "_".join(str(int(c)) for c in ks[i]) for i in self.low_modes]
        return ["h_norm_sq", "v_norm_sq", "lr1"] + modes + [f"probe_{j}" for j in range(len(self.probes))]

    def bounded(self, name: str) -> bool:
        return name.startswith("probe_")

    def evaluate(self, uh: np.ndarray) -> dict[str, np.ndarray]:
        space = self.space
        out = {
            "h_norm_sq": space.h_norm_sq(uh),
            "v_norm_sq": space.v_norm_sq(uh),
            "lr1": space.lp_integral(uh, self.r + 1, padding=absorption_padding(self.r)),
        }
        energy = (np.abs(space.to_modal(uh)) ** 2).sum(axis=-1)
        ks = space.canonical_wavevectors
        for i in self.low_modes:
            out["mode_" + "_".join(str(int(c)) for c in ks[i])] = energy[..., i]
        for j, g in enumerate(self.probes):
            out[f"probe_{j}"] = np.tanh(space.inner(uh, g))
        return out

    def observer(self, t, uh):
        return self.evaluate(uh)

    def lipschitz_constants(self, radius: float) -> dict[str, float]:
        """Lipschitz constants in the H norm on ``|u|_H <= radius``.

        The ``lr1`` constant uses ``|u|_inf <= sqrt(n / |T|) |u|_H`` with ``n``
        the number of retained wavevectors.
        """
        space, r = self.space, self.r
        sup = math.sqrt(space.n_retained / space.volume) * radius
        consts = {
            "h_norm_sq": 2 * radius,
            "v_norm_sq": 2 * radius * space.max_eigenvalue,
            "lr1": (r + 1) * sup**r * math.sqrt(space.volume),
        }
        for name in self.names:
            if name.startswith("mode_"):
                consts[name] = 2 * radius
        for j, g in enumerate(self.probes):
            consts[f"probe_{j}"] = float(np.sqrt(space.h_norm_sq(g)))
        return consts


@dataclass(frozen=True)
class TimeAverageReport:
    """Running averages and batch-means errors per observable.

    ``values`` maps observable names to the time average after burn-in;
    ``running`` holds the cumulative averages over the retained samples.
    """

    values: dict
    standard_errors: dict
    running: dict
    times: np.ndarray
    burn_in: float
    n_batches: int

    def to_dict(self) -> dict:
        return {"burn_in": self.burn_in, "n_batches": self.n_batches,
                "values": {k: float(v) for k, v in self.values.items()},
                "standard_errors": {k: float(v) for k, v in self.standard_errors.items()}}


def time_average(times, series: dict, burn_in: float = BURN_IN_FRACTION,
                 n_batches: int = N_BATCHES) -> TimeAverageReport:
    """Average equally spaced samples after discarding the first ``burn_in`` fraction.

    ``series`` maps names to one-dimensional arrays aligned with ``times``;
    a :class:`TrajectoryRecord` for one path may be passed instead, in which
    case its ``observed`` series are used.
    """
    if isinstance(series, TrajectoryRecord):
        series = series.observed
    times = np.asarray(times, dtype=float)
    keep = times >= times[0] + burn_in * (times[-1] - times[0]) - 1e-12
    n = int(keep.sum())
    if n < 2 * n_batches:
        raise InsufficientSamples(f"{n} samples after burn-in; need at least {2 * n_batches}")
    size = n // n_batches
    values, errors, running = {}, {}, {}
    for name, data in series.items():
        x = np.asarray(data, dtype=float)
        if x.shape != times.shape:
            raise ValueError(f"series {name!r} must be one-dimensional and match the times")
        x = x[keep]
        means = x[-size * n_batches:].reshape(n_batches, size).mean(axis=1)
        values[name] = float(x.mean())
        errors[name] = float(means.std(ddof=1) / math.sqrt(n_batches))
        running[name] = np.cumsum(x) / np.arange(1, n + 1)
    return TimeAverageReport(values, errors, running, times[keep], burn_in, n_batches)


@dataclass(frozen=True)
class TightnessReport:
    """Time-averaged ``E|u|_V^2`` against its a priori bound.

    ``exceedance(R)`` bounds the time-averaged probability of ``|u|_V > R``.
    """

    average_v_norm_sq: float
    standard_error: float
    bound: float

    @property
    def holds(self) -> bool:
        return self.average_v_norm_sq <= self.bound + self.standard_error

    def __bool__(self) -> bool:
        return self.holds

    def exceedance(self, radius: float) -> float:
        return min(1.0, self.bound / radius**2)

    def to_dict(self) -> dict:
        return {"average_v_norm_sq": self.average_v_norm_sq, "standard_error": self.standard_error,
                "bound": self.bound, "holds": self.holds}


def tightness_bound(h0: float, growth: float, mu: float, t_end: float, lambda1: float = 1.0) -> float:
    """``(|u_0|^2 + K T) / ((2 mu - K / lambda1) T)``."""
    if not mu > growth / (2 * lambda1):
        raise ConditionNotMet(f"mu = {mu:g} must exceed K / (2 lambda1) = {growth / (2 * lambda1):g}")
    return (h0 + growth * t_end) / ((2 * mu - growth / lambda1) * t_end)


def tightness_diagnostic(record: TrajectoryRecord, params: PhysicsParams, model,
                         lambda1: float = 1.0) -> TightnessReport:
    """Compare ``(1/T) int_0^T E|u|_V^2`` from an unforced ensemble with its bound.

    The bound keeps the ``K T`` growth of the noise.  It comes from the energy
    balance with ``|Phi|_{L_Q}^2 <= K (1 + |u|^2)`` and ``lambda1 |u|^2 <= |u|_V^2``.
    """
    if params.forcing is not None and np.any(params.forcing):
        raise ValueError("the tightness bound is stated for unforced runs")
    k = 0.0 if model is None else model.growth_constant
    t_end = float(record.times[-1])
    v_int = np.atleast_2d(record.v_int)[:, -1]
    h0 = np.atleast_2d(record.h_norm_sq)[:, 0]
    v_int, h0 = v_int[np.isfinite(v_int)], h0[np.isfinite(v_int)]
    avg = v_int / t_end
    se = float(avg.std(ddof=1) / math.sqrt(len(avg))) if len(avg) > 1 else 0.0
    bound = tightness_bound(float(h0.mean()), k, params.mu, t_end, lambda1)
    return TightnessReport(float(avg.mean()), se, bound)


@dataclass(frozen=True)
class MixingPair:
    observable: str
    estimate_u: float
    estimate_v: float
    discrepancy: float
    standard_error: float
    envelope: float
    lipschitz: float

    @property
    def holds(self) -> bool:
        return self.discrepancy <= self.envelope + MIXING_SE_FACTOR * self.standard_error


@dataclass(frozen=True)
class MixingReport:
    """Per-observable comparison of ``P_T phi(u_0)`` and ``P_T phi(v_0)`` for every pair."""

    t_end: float
    rate: float
    radius: float
    pairs: dict

    @property
    def holds(self) -> bool:
        return all(p.holds for entries in self.pairs.values() for p in entries)

    def to_dict(self) -> dict:
        return {"t_end": self.t_end, "rate": self.rate, "radius": self.radius, "holds": self.holds,
                "pairs": {f"{i}-{j}": [vars(p) | {"holds": p.holds} for p in entries]
                          for (i, j), entries in self.pairs.items()}}


def mixing_test(space: SpectralSpace, u0_list, params: PhysicsParams, model,
                observables: ObservableSet, t_end: float, n_paths: int, dt: float = 1e-3,
                seed: int = 0, scheme: str = "exponential_euler_maruyama") -> MixingReport:
    """Estimate ``P_T phi(u_0)`` for each initial field with common random numbers.

    Every initial field is driven by the same ``n_paths`` noise paths, so a
    pairwise discrepancy has the standard error of the path-wise
    differences.  Each pair must satisfy
    ``|P_T phi(u_0) - P_T phi(v_0)| <= L_phi exp(-theta T / 2) (|u_0| + |v_0|) + 3 SE``
    with ``theta = mu lambda1 - (2 eta + L)``.
    """
    theta = decay_rate(params, model, space.lambda1)
    u0_list = [np.asarray(u, dtype=complex) for u in u0_list]
    n_ic = len(u0_list)
    if n_ic < 2:
        raise ValueError("need at least two initial fields")
    batch = np.concatenate([np.broadcast_to(u, (n_paths,) + space.field_shape) for u in u0_list])
    stream_of = np.tile(np.arange(n_paths), n_ic)
    streams = [path_stream(seed, i) for i in range(n_paths)] if model is not None else None
    config = SolverConfig(dt, t_end, scheme=scheme, record_every=SolverConfig(dt, t_end).n_steps)
    record = simulate_ensemble(space, batch, params, model, config, streams=streams,
                               stream_of=stream_of if model is not None else None)
    if not record.ok:
        raise ConditionNotMet("a path left the guard during the mixing run")
    final = record.final
    values = observables.evaluate(final)
    norms0 = [float(np.sqrt(space.h_norm_sq(u))) for u in u0_list]
    radius = max(max(norms0), float(np.sqrt(space.h_norm_sq(final)).max()))
    lips = observables.lipschitz_constants(radius)
    decay = math.exp(-theta * t_end / 2)
    pairs = {}
    for i in range(n_ic):
        for j in range(i + 1, n_ic):
            entries = []
            for name in observables.names:
                a = values[name][i * n_paths:(i + 1) * n_paths]
                b = values[name][j * n_paths:(j + 1) * n_paths]
                diff = a - b
                se = float(diff.std(ddof=1) / math.sqrt(n_paths)) if n_paths > 1 else 0.0
                entries.append(MixingPair(name, float(a.mean()), float(b.mean()), abs(float(diff.mean())),
                                          se, lips[name] * decay * (norms0[i] + norms0[j]), lips[name]))
            pairs[(i, j)] = entries
    return MixingReport(t_end, theta, radius, pairs)


@dataclass(frozen=True)
class ConsistencyEntry:
    observable: str
    time_average: float
    ensemble_average: float
    combined_se: float

    @property
    def holds(self) -> bool:
        return abs(self.time_average - self.ensemble_average) <= 3 * self.combined_se


def ergodic_consistency(time_report: TimeAverageReport, final_values: dict) -> list[ConsistencyEntry]:
    """Compare a long-path time average with the ensemble mean at the final time.

    ``final_values`` maps observable names to samples of ``phi(u(T))`` across
    independent paths.
    """
    out = []
    for name, value in time_report.values.items():
        samples = np.asarray(final_values[name], dtype=float)
        se_e = samples.std(ddof=1) / math.sqrt(len(samples))
        se = math.hypot(time_report.standard_errors[name], se_e)
        out.append(ConsistencyEntry(name, value, float(samples.mean()), float(se)))
    return out
