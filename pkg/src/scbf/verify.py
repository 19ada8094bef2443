"""Random fields, brute-force oracles, and the property battery.

The oracles avoid the FFT code path entirely: the convective oracle is a
direct double sum over mode pairs, and the absorption oracle evaluates the
field by explicit exponential sums on an 8x padded grid.  Both apply the
Leray projection mode by mode with an explicit matrix.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import operators as ops
from .operators import PhysicsParams
from .spectral_space import SpectralSpace

ORACLE_MAX_MODES = 8


@dataclass(frozen=True)
class RandomFieldLaw:
    """Gaussian random fields with modal standard deviation ``|k|^{-decay}``.

    Each draw is rescaled so its root-mean-square velocity equals
    ``amplitude``, i.e. ``|u|_H^2 = amplitude^2 |T|``.  ``cutoff`` limits the
    active modes to ``max_i |k_i| <= cutoff``.
    """

    decay: float = 1.0
    amplitude: float = 1.0
    seed: int = 0
    cutoff: int | None = None

    def rng(self) -> np.random.Generator:
        return np.random.default_rng(self.seed)


def random_field(space: SpectralSpace, law: RandomFieldLaw = RandomFieldLaw(),
                 rng: np.random.Generator | None = None, batch: tuple[int, ...] = ()) -> np.ndarray:
    rng = law.rng() if rng is None else rng
    ks = space.canonical_wavevectors
    std = np.linalg.norm(ks, axis=1) ** -law.decay
    if law.cutoff is not None:
        std = std * (np.abs(ks).max(axis=1) <= law.cutoff)
    shape = tuple(batch) + (len(ks), space.dim - 1)
    z = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) * std[:, None]
    uh = space.from_modal(z)
    norm = np.sqrt(space.h_norm_sq(uh))
    target = law.amplitude * math.sqrt(space.volume)
    scale = np.where(norm > 0, target / np.where(norm > 0, norm, 1.0), 0.0)
    return uh * np.expand_dims(scale, tuple(range(-space.dim - 1, 0)))


# ----------------------------------------------------------------------
# oracles
# ----------------------------------------------------------------------
def _guard(space: SpectralSpace):
    if space.n_modes > ORACLE_MAX_MODES:
        raise ValueError(f"oracles are limited to {ORACLE_MAX_MODES} modes per axis")


def _explicit_leray(space: SpectralSpace, vh: np.ndarray) -> np.ndarray:
    out = np.zeros_like(vh)
    for k in space.retained_wavevectors():
        pos = (slice(None),) + space.index_of(k)
        kk = k.astype(float)
        proj = np.eye(space.dim) - np.outer(kk, kk) / (kk @ kk)
        out[pos] = proj @ vh[pos]
    return out


def convolution_oracle_B(space: SpectralSpace, uh: np.ndarray, vh: np.ndarray | None = None) -> np.ndarray:
    """``P_H (u . grad) v`` by a direct sum over wavevector pairs ``p + q = k``."""
    _guard(space)
    vh = uh if vh is None else vh
    ks = space.retained_wavevectors()
    n, kmax = space.n_modes, space.kmax
    vq = vh[(slice(None),) + tuple((ks % n).T)]  # (dim, n_k)
    raw = np.zeros(space.field_shape, dtype=complex)
    for p in ks:
        up = uh[(slice(None),) + space.index_of(p)]
        k = p + ks
        keep = k.any(axis=1) & (np.abs(k).max(axis=1) <= kmax)
        terms = (1j * (ks[keep] @ up)) * vq[:, keep]
        for c in range(space.dim):
            np.add.at(raw[c], tuple((k[keep] % n).T), terms[c])
    return _explicit_leray(space, raw)


def pointwise_oracle_C(space: SpectralSpace, uh: np.ndarray, r: float) -> np.ndarray:
    """``P_H(|u|^{r-1} u)`` from explicit exponential sums on an 8x padded grid."""
    _guard(space)
    m = 8 * space.n_modes
    kr = np.arange(-space.kmax, space.kmax + 1)
    x = 2 * np.pi * np.arange(m) / m
    e = np.exp(1j * np.outer(x, kr))  # (m, 2kmax+1)
    block = uh[(slice(None),) + np.ix_(*([kr % space.n_modes] * space.dim))]
    letters = "abc"[: space.dim]
    grid_ix = "xyz"[: space.dim]
    evaluate = ",".join(f"{g}{a}" for g, a in zip(grid_ix, letters))
    u = np.einsum(f"{evaluate},n{letters}->n{grid_ix}", *([e] * space.dim), block).real
    mag = np.sqrt((u**2).sum(axis=0))
    g = mag ** (r - 1) * u if r != 1 else u
    coeffs = np.einsum(f"{evaluate},n{grid_ix}->n{letters}", *([e.conj()] * space.dim), g) / m**space.dim
    raw = np.zeros(space.field_shape, dtype=complex)
    raw[(slice(None),) + np.ix_(*([kr % space.n_modes] * space.dim))] = coeffs
    raw = raw * space.mask
    return _explicit_leray(space, raw)


def relative_deviation(a: np.ndarray, b: np.ndarray) -> float:
    scale = float(np.abs(b).max(initial=0.0))
    diff = float(np.abs(a - b).max(initial=0.0))
    if scale == 0.0:
        return diff
    return diff / scale


# ----------------------------------------------------------------------
# battery
# ----------------------------------------------------------------------
@dataclass(frozen=True)
class OracleReport:
    """Outcome of one battery entry.

    ``max_deviation`` is the largest normalized violation; the entry passes
    when it does not exceed ``tolerance``.
    """

    name: str
    trials: int
    max_deviation: float
    tolerance: float
    seed: int
    skipped: bool = False
    detail: str = ""
    worst_trial: int = -1

    @property
    def passed(self) -> bool:
        return self.skipped or self.max_deviation <= self.tolerance

    @property
    def status(self) -> str:
        if self.skipped:
            return "skipped"
        return "pass" if self.passed else "fail"


def sample_fields(space: SpectralSpace, rng: np.random.Generator, trials: int,
                  amplitude_range=(1e-3, 10.0), zero_fraction: float = 0.03) -> np.ndarray:
    """Fields with log-uniform amplitudes and random spectral slopes.

    A few exact zeros and near-zero fields are mixed in to exercise
    degenerate inputs.
    """
    out = space.zeros((trials,))
    lo, hi = np.log(amplitude_range[0]), np.log(amplitude_range[1])
    for i in range(trials):
        u = rng.uniform()
        if u < zero_fraction:
            continue
        amp = 1e-9 if u < 2 * zero_fraction else float(np.exp(rng.uniform(lo, hi)))
        law = RandomFieldLaw(decay=float(rng.uniform(0.25, 2.0)), amplitude=amp,
                             cutoff=int(rng.integers(1, space.kmax + 1)))
        out[i] = random_field(space, law, rng)
    return out


def _violation(lhs, rhs, scale):
    """Normalized amount by which ``lhs <= rhs`` fails."""
    lhs, rhs, scale = map(np.asarray, (lhs, rhs, scale))
    excess = lhs - rhs
    return np.where(excess > 0, excess / np.maximum(scale, 1e-300), 0.0)


def _report(name, values, tol, seed, detail=""):
    values = np.atleast_1d(np.asarray(values, dtype=float))
    worst = int(np.nanargmax(values)) if values.size else -1
    dev = float(np.nanmax(values)) if values.size else 0.0
    if np.isnan(values).any():
        dev = float("inf")
    return OracleReport(name, int(values.size), dev, tol, seed, detail=detail, worst_trial=worst)


STRUCTURAL_TOL = 1e-11
INEQUALITY_TOL = 1e-9


def check_convective_oracle(space, rng, trials, seed):
    u = sample_fields(space, rng, trials)
    v = sample_fields(space, rng, trials)
    fast = ops.convective_B(space, u, v)
    devs = [relative_deviation(fast[i], convolution_oracle_B(space, u[i], v[i])) for i in range(trials)]
    return _report("convective_oracle", devs, 1e-10, seed)


def check_absorption_oracle(space, rng, trials, seed, r=5):
    u = sample_fields(space, rng, trials)
    fast = ops.forchheimer_C(space, u, r)
    devs = [relative_deviation(fast[i], pointwise_oracle_C(space, u[i], r)) for i in range(trials)]
    return _report(f"absorption_oracle_r{r:g}", devs, 1e-10, seed)


def check_trilinear_skew(space, rng, trials, seed):
    u, v, w = (sample_fields(space, rng, trials) for _ in range(3))
    l4 = lambda x: space.lp_norm(x, 4)  # noqa: E731
    scale_vv = l4(u) * np.sqrt(space.v_norm_sq(v)) * l4(v)
    b_vv = np.abs(ops.trilinear_b(space, u, v, v))
    b_vw = ops.trilinear_b(space, u, v, w)
    b_wv = ops.trilinear_b(space, u, w, v)
    scale_vw = l4(u) * (np.sqrt(space.v_norm_sq(v)) * l4(w) + np.sqrt(space.v_norm_sq(w)) * l4(v))
    devs = np.maximum(b_vv / np.maximum(scale_vv, 1e-300), np.abs(b_vw + b_wv) / np.maximum(scale_vw, 1e-300))
    return _report("trilinear_skew", devs, STRUCTURAL_TOL, seed)


def check_convective_energy(space, rng, trials, seed):
    u = sample_fields(space, rng, trials)
    val = np.abs(space.inner(ops.convective_B(space, u), u))
    scale = np.sqrt(space.v_norm_sq(u)) * space.lp_norm(u, 4) ** 2
    return _report("convective_energy", val / np.maximum(scale, 1e-300), STRUCTURAL_TOL, seed)


def check_absorption_energy(space, rng, trials, seed):
    u = sample_fields(space, rng, trials)
    devs = []
    for r in (1, 3, 5, 7):
        lhs = space.inner(ops.forchheimer_C(space, u, r), u)
        rhs = space.lp_integral(u, r + 1)
        devs.append(np.abs(lhs - rhs) / np.maximum(np.abs(rhs), 1e-300))
    return _report("absorption_energy", np.max(devs, axis=0), STRUCTURAL_TOL, seed)


def check_projection(space, rng, trials, seed):
    raw = space.to_spectral(rng.standard_normal((trials, space.dim) + (space.n_modes,) * space.dim))
    p1 = space.leray(raw)
    devs = []
    for i in range(trials):
        scale = max(float(np.abs(raw[i]).max()), 1e-300)
        idem = np.abs(space.leray(p1[i]) - p1[i]).max() / scale
        commute = np.abs(space.stokes(space.leray(raw[i])) - space.leray(space.stokes(raw[i]))).max()
        commute /= scale * space.max_eigenvalue
        div = space.divergence_defect(p1[i]) / (scale * space.kmax)
        devs.append(max(idem, commute, div))
    return _report("projection", devs, STRUCTURAL_TOL, seed)


def check_poincare(space, rng, trials, seed):
    u = sample_fields(space, rng, trials)
    h = space.h_norm_sq(u)
    return _report("poincare", _violation(space.lambda1 * h, space.v_norm_sq(u), h), INEQUALITY_TOL, seed)


def check_parseval(space, rng, trials, seed):
    u = sample_fields(space, rng, trials)
    h = space.h_norm_sq(u)
    quad = space.volume * (space.to_physical(u) ** 2).sum(axis=1).mean(axis=(-2, -1)) \
        if space.dim == 2 else space.lp_integral(u, 2)
    return _report("parseval", np.abs(h - quad) / np.maximum(h, 1e-300), 1e-12, seed)


def check_interpolation(space, rng, trials, seed):
    u = sample_fields(space, rng, trials)
    devs = []
    for i in range(trials):
        s, t = sorted(rng.uniform(1.0, 12.0, size=2))
        r = float(rng.uniform(s, t))
        theta = (1 / r - 1 / t) / (1 / s - 1 / t) if t > s else 1.0
        norm = lambda p: float(space.lp_norm(u[i], p, padding=4))  # noqa: E731
        lhs, rhs = norm(r), norm(s) ** theta * norm(t) ** (1 - theta)
        devs.append(max(0.0, lhs - rhs - 1e-10) / max(rhs, 1e-300))
    return _report("interpolation", devs, INEQUALITY_TOL, seed)


def check_convective_dual_bound(space, rng, trials, seed):
    u, v = sample_fields(space, rng, trials), sample_fields(space, rng, trials)
    devs = []
    for r in (5, 7):
        lhs, rhs = ops.b_operator_bound_check(space, u, v, r)
        devs.append(_violation(lhs, rhs + 1e-10, rhs))
    return _report("convective_dual_bound", np.max(devs, axis=0), INEQUALITY_TOL, seed)


def check_convective_growth_bound(space, rng, trials, seed):
    u = sample_fields(space, rng, trials)
    devs = []
    for r in (5, 7):
        lhs, rhs = ops.b_growth_bound_check(space, u, r)
        devs.append(_violation(lhs, rhs + 1e-10, rhs))
    return _report("convective_growth_bound", np.max(devs, axis=0), INEQUALITY_TOL, seed)


def check_absorption_lipschitz(space, rng, trials, seed):
    u, v = sample_fields(space, rng, trials), sample_fields(space, rng, trials)
    devs = []
    for r in (3, 5):
        lhs, rhs = ops.lipschitz_check_C(space, u, v, r)
        devs.append(_violation(lhs, rhs, rhs))
    return _report("absorption_lipschitz", np.max(devs, axis=0), INEQUALITY_TOL, seed)


def check_absorption_monotone(space, rng, trials, seed):
    u, v = sample_fields(space, rng, trials), sample_fields(space, rng, trials)
    devs = []
    for r in (1, 3, 5, 7):
        lhs, rhs = ops.absorption_monotone_check(space, u, v, r)
        scale = np.maximum(np.abs(lhs), rhs)
        devs.append(_violation(rhs, lhs, scale))
        devs.append(_violation(0.0, lhs, scale))
    return _report("absorption_monotone", np.max(devs, axis=0), INEQUALITY_TOL, seed)


def check_shifted_monotone(space, rng, trials, seed, params=None):
    params = params or PhysicsParams(1.0, 1.0, 5)
    u, v = sample_fields(space, rng, trials), sample_fields(space, rng, trials)
    rep = ops.monotonicity_gap(space, u, v, params)
    devs = _violation(0.0, rep.gap, rep.scale)
    return _report("shifted_monotone", devs, INEQUALITY_TOL, seed,
                   detail=f"mu={params.mu:g} beta={params.beta:g} r={params.r:g}")


def check_critical_monotone(space, rng, trials, seed, params=None):
    params = params or PhysicsParams(1.0, 1.0, 3)
    name = "critical_monotone"
    if not params.globally_monotone:
        return OracleReport(name, 0, 0.0, INEQUALITY_TOL, seed, skipped=True,
                            detail=f"2*beta*mu = {2 * params.beta * params.mu:g} < 1")
    u, v = sample_fields(space, rng, trials), sample_fields(space, rng, trials)
    rep = ops.monotonicity_gap(space, u, v, params)
    scale = (params.mu * space.v_norm_sq(u - v) + np.abs(rep.lhs))
    return _report(name, _violation(0.0, rep.gap, scale), INEQUALITY_TOL, seed,
                   detail=f"mu={params.mu:g} beta={params.beta:g}")


def check_local_monotone_2d(space, rng, trials, seed):
    if space.dim != 2:
        return OracleReport("local_monotone_2d", 0, 0.0, INEQUALITY_TOL, seed, skipped=True,
                            detail="two-dimensional estimate")
    u, v = sample_fields(space, rng, trials), sample_fields(space, rng, trials)
    devs = []
    for beta in (0.0, 0.1, 1.0):
        value, scale = ops.local_monotonicity_2d(space, u, v, PhysicsParams(1.0, beta, 3))
        devs.append(_violation(0.0, value, scale))
    return _report("local_monotone_2d", np.max(devs, axis=0), INEQUALITY_TOL, seed)


def check_regularity_chain(space, rng, trials, seed):
    u = sample_fields(space, rng, trials)
    devs = []
    for r in (1, 3, 5):
        i1, i2, i3 = ops.periodic_regularity_bounds(space, u, r)
        scale = np.maximum(i3, 1e-300)
        devs.append(np.maximum(_violation(i1, i2, scale), _violation(i2, i3, scale)))
        devs.append(_violation(0.0, i1, scale))
    return _report("regularity_chain", np.max(devs, axis=0), INEQUALITY_TOL, seed)


def check_embedding_ratio(space, rng, trials, seed):
    """Finite ratio for the ``L^{3(r+1)}`` embedding; the constant is reported, not tested."""
    u = sample_fields(space, rng, trials, zero_fraction=0.0)
    ratios = np.concatenate([ops.embedding_ratio(space, u, r) for r in (3, 5)])
    finite = np.isfinite(ratios)
    return OracleReport("embedding_ratio", len(ratios), 0.0 if finite.all() else float("inf"),
                        0.0, seed, detail=f"max ratio {np.nanmax(ratios):.4g}")


def check_smoothing(space, rng, trials, seed):
    u = sample_fields(space, rng, trials)
    devs = []
    for n in (0.5, 1.0, 2.0, 5.0, 1e3):
        p = space.smoothing_projection(u, n)
        h, v = space.h_norm_sq(u), space.v_norm_sq(u)
        devs.append(_violation(space.h_norm_sq(p), h, h))
        devs.append(_violation(space.v_norm_sq(p), v, v))
    return _report("smoothing_contraction", np.max(devs, axis=0), INEQUALITY_TOL, seed)


def check_demicontinuity(space, rng, trials, seed):
    params = PhysicsParams(1.0, 1.0, 5)
    tests = [space.shear_mode((1, 0) + (0,) * (space.dim - 2), (0, 1.0) + (0,) * (space.dim - 2)),
             random_field(space, RandomFieldLaw(amplitude=1.0), rng)]
    devs = []
    for u in sample_fields(space, rng, trials, amplitude_range=(0.1, 2.0), zero_fraction=0.0):
        seq = ops.demicontinuity_sequence(space, u, params, tests, range(1, space.kmax + 1))
        scale = max(float(seq[0]), 1e-300)
        devs.append(seq[-1] / scale)
    return _report("demicontinuity", devs, STRUCTURAL_TOL, seed,
                   detail="pairing with truncations reaches zero at full resolution")


BATTERY = {
    "convective_oracle": check_convective_oracle,
    "absorption_oracle": check_absorption_oracle,
    "trilinear_skew": check_trilinear_skew,
    "convective_energy": check_convective_energy,
    "absorption_energy": check_absorption_energy,
    "projection": check_projection,
    "poincare": check_poincare,
    "parseval": check_parseval,
    "interpolation": check_interpolation,
    "convective_dual_bound": check_convective_dual_bound,
    "convective_growth_bound": check_convective_growth_bound,
    "absorption_lipschitz": check_absorption_lipschitz,
    "absorption_monotone": check_absorption_monotone,
    "shifted_monotone": check_shifted_monotone,
    "critical_monotone": check_critical_monotone,
    "local_monotone_2d": check_local_monotone_2d,
    "regularity_chain": check_regularity_chain,
    "embedding_ratio": check_embedding_ratio,
    "smoothing_contraction": check_smoothing,
    "demicontinuity": check_demicontinuity,
}

ORACLE_ENTRIES = ("convective_oracle", "absorption_oracle")
SMOKE_3D = ("trilinear_skew", "convective_energy", "absorption_energy", "projection",
            "shifted_monotone", "critical_monotone", "regularity_chain")


def run_property_battery(seed: int = 0, trials: int = 200, n_modes: int = 16,
                         smoke_3d: bool = True, names=None) -> list[OracleReport]:
    """Run every battery entry in two dimensions and a smoke subset in three.

    Oracle entries run on an 8x8 grid.  Each entry uses its own generator
    derived from ``seed`` and its name, so reports do not depend on order.
    """
    names = list(BATTERY) if names is None else list(names)
    reports = []
    for name in names:
        space = SpectralSpace(2, ORACLE_MAX_MODES if name in ORACLE_ENTRIES else n_modes)
        reports.append(BATTERY[name](space, _entry_rng(seed, name), trials, seed))
    extra = [PhysicsParams(0.5, 0.5, 3)]
    for p in extra:
        reports.append(check_critical_monotone(SpectralSpace(2, n_modes), _entry_rng(seed, "subcritical"),
                                               trials, seed, p))
        reports[-1] = _rename(reports[-1], "critical_monotone_subcritical")
    if smoke_3d:
        space3 = SpectralSpace(3, 8)
        smoke_trials = max(4, trials // 10)
        for name in SMOKE_3D:
            if name in names:
                rep = BATTERY[name](space3, _entry_rng(seed, name + "_3d"), smoke_trials, seed)
                reports.append(_rename(rep, rep.name + "_3d"))
    return reports


def _rename(rep: OracleReport, name: str) -> OracleReport:
    return OracleReport(name, rep.trials, rep.max_deviation, rep.tolerance, rep.seed,
                        rep.skipped, rep.detail, rep.worst_trial)


def _entry_rng(seed: int, name: str) -> np.random.Generator:
    return np.random.default_rng([seed, *name.encode()])
