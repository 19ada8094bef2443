"""Nonlinear operators of the damped Navier-Stokes system and their estimates.

All functions accept coefficient arrays with optional leading batch axes and
return arrays (or per-batch scalars) of matching shape.

Products are evaluated on padded collocation grids large enough that the
Galerkin projection of the product is exact:

* the convective term uses 3/2 padding (quadratic product);
* the absorption term ``|u|^{r-1} u`` uses ``(r+1)/2`` padding for odd
  integer ``r`` and 4x padding otherwise, where the result is a quadrature
  approximation.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .spectral_space import SpectralSpace

CONVECTIVE_PADDING = 1.5
GUARANTEED_EXPONENTS = (3, 5, 7, 9)


class RegimeError(ValueError):
    """Parameters fall outside the regime where a result is available."""


@dataclass(frozen=True)
class PhysicsParams:
    """Viscosity ``mu``, absorption coefficient ``beta``, exponent ``r``, forcing ``f``."""

    mu: float
    beta: float
    r: float
    forcing: np.ndarray | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError(f"mu must be positive, got {self.mu}")
        if self.beta < 0:
            raise ValueError(f"beta must be nonnegative, got {self.beta}")
        if self.r < 1:
            raise ValueError(f"r must be >= 1, got {self.r}")

    @property
    def globally_monotone(self) -> bool:
        """Critical exponent with ``2 beta mu >= 1``."""
        return self.r == 3 and 2 * self.beta * self.mu >= 1

    @property
    def guaranteed_exponent(self) -> bool:
        return self.r in GUARANTEED_EXPONENTS

    def forcing_or_zero(self, space: SpectralSpace) -> np.ndarray:
        return space.zeros() if self.forcing is None else self.forcing

    def with_forcing(self, forcing) -> "PhysicsParams":
        return PhysicsParams(self.mu, self.beta, self.r, forcing)


def eta_constant(params: PhysicsParams) -> float:
    """Shift ``eta`` making ``G + eta I`` monotone.

    ``eta = (r-3)/(2 mu (r-1)) * (2/(beta mu (r-1)))^{2/(r-3)}`` for ``r > 3``,
    and zero for ``r = 3`` with ``2 beta mu >= 1``.
    """
    mu, beta, r = params.mu, params.beta, params.r
    if r > 3:
        if beta <= 0:
            raise RegimeError("eta requires beta > 0")
        return (r - 3) / (2 * mu * (r - 1)) * (2 / (beta * mu * (r - 1))) ** (2 / (r - 3))
    if params.globally_monotone:
        return 0.0
    raise RegimeError(
        f"no monotonicity constant for r={r}, 2*beta*mu={2 * beta * mu:g}: "
        "needs r > 3, or r = 3 with 2*beta*mu >= 1")


def absorption_padding(r: float) -> float:
    """Grid padding that evaluates ``|u|^{r-1} u`` without aliasing when possible."""
    if float(r).is_integer() and int(r) % 2 == 1:
        return (int(r) + 1) / 2
    return 4


# ----------------------------------------------------------------------
# operators
# ----------------------------------------------------------------------
def advection(space: SpectralSpace, uh: np.ndarray, vh: np.ndarray | None = None) -> np.ndarray:
    """Galerkin truncation of ``(u . grad) v`` without projection.

    Evaluated as ``div(v u^T)``, which equals ``(u . grad) v`` because ``u``
    is divergence-free and needs fewer transforms.
    """
    d = space.dim
    u = space.to_physical(uh, CONVECTIVE_PADDING)
    v = u if vh is None else space.to_physical(vh, CONVECTIVE_PADDING)
    # flux[..., i, j] = v_i u_j
    flux = space.to_spectral(np.expand_dims(v, -d - 1) * np.expand_dims(u, -d - 2))
    return (1j * space._kf * flux).sum(axis=-d - 1)


def convective_B(space: SpectralSpace, uh: np.ndarray, vh: np.ndarray | None = None) -> np.ndarray:
    """``B(u, v) = P_H (u . grad) v``; ``B(u) = B(u, u)``."""
    return space.leray(advection(space, uh, vh))


def trilinear_b(space: SpectralSpace, uh, vh, wh):
    """``b(u, v, w) = int (u . grad) v . w dx``."""
    return space.inner(advection(space, uh, vh), wh)


def absorption_samples(space: SpectralSpace, uh: np.ndarray, r: float, padding: float | None = None):
    """Samples of ``u`` and ``|u|^{r-1} u`` on the padded grid."""
    if padding is None:
        padding = absorption_padding(r)
    u = space.to_physical(uh, padding)
    if r == 1:
        return u, u
    mag_sq = (u**2).sum(axis=-space.dim - 1, keepdims=True)
    return u, mag_sq ** (0.5 * (r - 1)) * u


def forchheimer_C(space: SpectralSpace, uh: np.ndarray, r: float) -> np.ndarray:
    """``C(u) = P_H(|u|^{r-1} u)``."""
    if r < 1:
        raise ValueError("r must be >= 1")
    _, g = absorption_samples(space, uh, r)
    return space.leray(space.to_spectral(g))


def combined_G(space: SpectralSpace, uh: np.ndarray, params: PhysicsParams) -> np.ndarray:
    """``G(u) = mu A u + B(u) + beta C(u)``."""
    out = params.mu * space.stokes(uh) + convective_B(space, uh)
    if params.beta:
        out = out + params.beta * forchheimer_C(space, uh, params.r)
    return out


# ----------------------------------------------------------------------
# monotonicity
# ----------------------------------------------------------------------
@dataclass(frozen=True)
class MonotonicityReport:
    """``gap = lhs + eta_term - v_term`` with ``lhs = <G(u) - G(v), u - v>``."""

    gap: np.ndarray | float
    lhs: np.ndarray | float
    eta_term: np.ndarray | float
    v_term: np.ndarray | float

    @property
    def scale(self):
        return np.maximum.reduce([np.abs(self.lhs), np.abs(self.eta_term), np.abs(self.v_term)])

    def holds(self, rtol: float = 1e-9) -> bool:
        return bool(np.all(self.gap >= -rtol * np.maximum(self.scale, 1e-300)))


def monotonicity_gap(space: SpectralSpace, uh, vh, params: PhysicsParams) -> MonotonicityReport:
    """Monotonicity defect of ``G``.

    For ``r > 3`` the gap is ``<G(u)-G(v), w> + eta |w|_H^2 - mu/2 |w|_V^2``
    with ``w = u - v``.  For ``r = 3`` with ``2 beta mu >= 1`` the shift and
    the dissipation term are dropped and the gap is the plain inner product.
    """
    eta = eta_constant(params)
    w = uh - vh
    lhs = space.inner(combined_G(space, uh, params) - combined_G(space, vh, params), w)
    if params.r > 3:
        eta_term = eta * space.h_norm_sq(w)
        v_term = 0.5 * params.mu * space.v_norm_sq(w)
    else:
        eta_term = np.zeros_like(lhs)
        v_term = np.zeros_like(lhs)
    return MonotonicityReport(lhs + eta_term - v_term, lhs, eta_term, v_term)


def local_monotonicity_2d(space: SpectralSpace, uh, vh, params: PhysicsParams):
    """Two-dimensional local monotonicity on ``L^4`` balls.

    Returns ``(value, scale)`` with
    ``value = <G(u)-G(v), w> + 27/(32 mu^3) |v|_{L^4}^4 |w|_H^2``.
    """
    if space.dim != 2:
        raise ValueError("local monotonicity estimate is two-dimensional")
    w = uh - vh
    lhs = space.inner(combined_G(space, uh, params) - combined_G(space, vh, params), w)
    shift = 27.0 / (32.0 * params.mu**3) * space.lp_integral(vh, 4) * space.h_norm_sq(w)
    return lhs + shift, np.maximum(np.abs(lhs), shift)


# ----------------------------------------------------------------------
# operator bounds, each returning (lhs, rhs)
# ----------------------------------------------------------------------
def b_operator_bound_check(space: SpectralSpace, uh, vh, r: float):
    """``|B(u,v)|_{V'}`` against ``|u|_{L^{r+1}} |v|_{L^{2(r+1)/(r-1)}}``."""
    if r <= 1:
        raise ValueError("bound needs r > 1")
    lhs = np.sqrt(space.dual_norm_sq(convective_B(space, uh, vh)))
    rhs = space.lp_norm(uh, r + 1) * space.lp_norm(vh, 2 * (r + 1) / (r - 1))
    return lhs, rhs


def b_growth_bound_check(space: SpectralSpace, uh, r: float):
    """``|B(u)|_{V'}`` against ``|u|_{L^{r+1}}^{(r+1)/(r-1)} |u|_H^{(r-3)/(r-1)}``.

    Uses the single-term dual norm of V, which is stronger than the infimum
    norm of the sum space.
    """
    if r <= 3:
        raise ValueError("growth bound needs r > 3")
    lhs = np.sqrt(space.dual_norm_sq(convective_B(space, uh)))
    rhs = (space.lp_norm(uh, r + 1) ** ((r + 1) / (r - 1))
           * np.sqrt(space.h_norm_sq(uh)) ** ((r - 3) / (r - 1)))
    return lhs, rhs


def _quadrature(space: SpectralSpace, values: np.ndarray):
    return space.volume * values.mean(axis=tuple(range(-space.dim, 0)))


def lipschitz_check_C(space: SpectralSpace, uh, vh, r: float, padding: float = 4):
    """Local Lipschitz bound of the absorption map.

    ``lhs`` is the ``L^{(r+1)/r}`` norm of ``|u|^{r-1}u - |v|^{r-1}v``, which
    dominates the dual pairing with any ``w`` in ``L^{r+1}``; ``rhs`` is
    ``r (|u| + |v|)^{r-1} |u - v|`` in ``L^{r+1}`` norms.  All norms use the
    same quadrature grid so the discrete inequality is exact.
    """
    _, gu = absorption_samples(space, uh, r, padding)
    _, gv = absorption_samples(space, vh, r, padding)
    q = (r + 1) / r
    diff = np.sqrt(((gu - gv) ** 2).sum(axis=-space.dim - 1))
    lhs = _quadrature(space, diff**q) ** (1 / q)
    norm = lambda x: space.lp_norm(x, r + 1, padding)  # noqa: E731
    rhs = r * (norm(uh) + norm(vh)) ** (r - 1) * norm(uh - vh)
    return lhs, rhs


def absorption_monotone_check(space: SpectralSpace, uh, vh, r: float):
    """``<C(u) - C(v), u - v>`` against the weighted lower bound.

    Returns ``(lhs, rhs)`` with
    ``rhs = 1/2 | |u|^{(r-1)/2} w |^2 + 1/2 | |v|^{(r-1)/2} w |^2 >= 0``.
    """
    padding = absorption_padding(r)
    u, gu = absorption_samples(space, uh, r, padding)
    v, gv = absorption_samples(space, vh, r, padding)
    w = u - v
    ax = -space.dim - 1
    lhs = _quadrature(space, ((gu - gv) * w).sum(axis=ax))
    w2 = (w**2).sum(axis=ax)
    mu_ = (u**2).sum(axis=ax) ** (0.5 * (r - 1))
    mv_ = (v**2).sum(axis=ax) ** (0.5 * (r - 1))
    rhs = 0.5 * _quadrature(space, (mu_ + mv_) * w2)
    return lhs, rhs


def periodic_regularity_bounds(space: SpectralSpace, uh, r: float):
    """``(I1, I2, r I1)`` with ``I1 = int |grad u|^2 |u|^{r-1}`` and
    ``I2 = int |u|^{r-1} u . Au``.

    On the torus ``I1 <= I2 <= r I1``.
    """
    padding = absorption_padding(r)
    d = space.dim
    _, g = absorption_samples(space, uh, r, padding)
    u = space.to_physical(uh, padding)
    grad = space.to_physical(space.gradient(uh), padding)
    au = space.to_physical(space.stokes(uh), padding)
    mag = (u**2).sum(axis=-d - 1) ** (0.5 * (r - 1))
    i1 = _quadrature(space, mag * (grad**2).sum(axis=(-d - 2, -d - 1)))
    i2 = _quadrature(space, (g * au).sum(axis=-d - 1))
    return i1, i2, r * i1


def embedding_ratio(space: SpectralSpace, uh, r: float):
    """``|u|_{L^{3(r+1)}}^{r+1}`` divided by ``int |grad u|^2 |u|^{r-1}``."""
    i1, _, _ = periodic_regularity_bounds(space, uh, r)
    num = space.lp_integral(uh, 3 * (r + 1)) ** (1 / 3)
    return num / np.maximum(i1, 1e-300)


def demicontinuity_sequence(space: SpectralSpace, uh, params: PhysicsParams, tests, cutoffs):
    """``max_w |<G(u_n) - G(u), w>| / |w|_V`` for spectral truncations ``u_n``.

    ``cutoffs`` are the largest retained ``|k|_inf`` of each ``u_n``.
    """
    g = combined_G(space, uh, params)
    kinf = np.abs(space.wavevectors).max(axis=0)
    out = []
    for n in cutoffs:
        un = uh * (kinf <= n)
        dg = combined_G(space, un, params) - g
        vals = [abs(float(space.inner(dg, w))) / np.sqrt(float(space.v_norm_sq(w))) for w in tests]
        out.append(max(vals))
    return np.array(out)
