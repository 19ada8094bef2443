"""Trace-class Wiener noise and diffusion coefficients.

The covariance ``Q`` is diagonal in the real orthonormal basis of
:meth:`SpectralSpace.to_modal`.  Each canonical wavevector and polarization
carries two basis functions (cosine and sine) sharing one eigenvalue, so the
trace is twice the sum of the stored eigenvalues.

Random numbers come from one Philox stream per path, keyed by
``(master_seed, path_index)``, so a path's increments do not depend on how
many other paths run or in which order.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .spectral_space import SpectralSpace


def path_stream(master_seed: int, path_index: int) -> np.random.Generator:
    """Independent counter-based generator for one sample path."""
    seq = np.random.SeedSequence([int(master_seed), int(path_index)])
    return np.random.Generator(np.random.Philox(seq))


@dataclass(frozen=True)
class QSpectrum:
    """Eigenvalues of ``Q``, one per canonical wavevector and polarization."""

    space: SpectralSpace
    q: np.ndarray

    def __post_init__(self):
        shape = (len(self.space.canonical_wavevectors), self.space.dim - 1)
        if self.q.shape != shape:
            raise ValueError(f"spectrum shape {self.q.shape} != {shape}")
        if np.any(self.q < 0) or not np.all(np.isfinite(self.q)):
            raise ValueError("eigenvalues must be finite and nonnegative")

    @property
    def trace(self) -> float:
        return float(2.0 * self.q.sum())

    @classmethod
    def power_law(cls, space: SpectralSpace, c: float = 1.0, gamma: float | None = None,
                  trace: float | None = None) -> "QSpectrum":
        """``q_k = c |k|^{-gamma}``, rescaled to ``trace`` when given.

        The default ``gamma = dim + 2`` keeps the trace bounded as the grid
        is refined.
        """
        if gamma is None:
            gamma = space.dim + 2
        k = np.linalg.norm(space.canonical_wavevectors, axis=1)
        q = np.repeat((c * k**-gamma)[:, None], space.dim - 1, axis=1)
        if trace is not None:
            q *= trace / (2.0 * q.sum())
        return cls(space, q)

    @classmethod
    def single_mode(cls, space: SpectralSpace, k, q: float = 1.0, polarization: int = 0) -> "QSpectrum":
        arr = np.zeros((len(space.canonical_wavevectors), space.dim - 1))
        arr[space.canonical_index(k), polarization] = q
        return cls(space, arr)

    @classmethod
    def zero(cls, space: SpectralSpace) -> "QSpectrum":
        return cls(space, np.zeros((len(space.canonical_wavevectors), space.dim - 1)))


@dataclass(frozen=True)
class WienerIncrement:
    """Noise increment over ``dt`` for a batch of paths.

    ``value`` holds modal coordinates ``(..., n_canonical, dim - 1)`` for
    Q-Wiener models and one scalar per path for the scalar model; ``normals``
    are the standard normal draws that produced it.
    """

    dt: float
    value: np.ndarray
    normals: np.ndarray


class _QWienerNoise:
    """Shared sampling for models driven by the Q-Wiener process."""

    spectrum: QSpectrum

    @property
    def space(self) -> SpectralSpace:
        return self.spectrum.space

    @property
    def normal_shape(self) -> tuple[int, ...]:
        return self.spectrum.q.shape + (2,)

    def increment(self, normals: np.ndarray, dt: float) -> WienerIncrement:
        """Map standard normals of shape ``(..., *normal_shape)`` to an increment."""
        amp = np.sqrt(self.spectrum.q * dt)
        z = amp * (normals[..., 0] - 1j * normals[..., 1])
        return WienerIncrement(dt, z, normals)

    def sample_increment(self, dt: float, rng: np.random.Generator) -> WienerIncrement:
        if dt < 0:
            raise ValueError("dt must be nonnegative")
        return self.increment(rng.standard_normal(self.normal_shape), dt)

    def wiener_field(self, incr: WienerIncrement) -> np.ndarray:
        return self.space.from_modal(incr.value)


@dataclass(frozen=True)
class Additive(_QWienerNoise):
    """``Phi = I``: the state receives the Q-Wiener increment directly."""

    spectrum: QSpectrum

    @property
    def growth_constant(self) -> float:
        return self.spectrum.trace

    @property
    def lipschitz_constant(self) -> float:
        return 0.0

    @property
    def regularity_constant(self) -> float:
        """Bound on ``|A^{1/2} Phi|_{L_Q}^2``, here the exact value ``Tr(AQ)``."""
        k2 = (self.space.canonical_wavevectors**2).sum(axis=1)
        return float(2.0 * (self.spectrum.q * k2[:, None]).sum())

    def vanishes_at(self, uh: np.ndarray) -> bool:
        return self.spectrum.trace == 0.0

    def apply(self, t: float, uh: np.ndarray, incr: WienerIncrement) -> np.ndarray:
        return self.wiener_field(incr)

    def hs_norm_sq(self, t: float, uh: np.ndarray):
        batch = uh.shape[: -self.space.dim - 1]
        return np.full(batch, self.spectrum.trace) if batch else self.spectrum.trace

    def hs_norm_sq_difference(self, t: float, uh: np.ndarray, vh: np.ndarray):
        return np.zeros(uh.shape[: -self.space.dim - 1])


@dataclass(frozen=True)
class ScalarStationary:
    """``Phi(u) dW = sigma (u - u_star) dW`` with a one-dimensional Wiener process."""

    space: SpectralSpace
    sigma: float
    u_star: np.ndarray | None = field(default=None, repr=False)

    normal_shape = ()

    def _star(self) -> np.ndarray:
        return self.space.zeros() if self.u_star is None else self.u_star

    @property
    def growth_constant(self) -> float:
        """``sigma^2`` when ``u_star = 0``, else ``2 sigma^2 max(1, |u_star|^2)``."""
        star_sq = float(self.space.h_norm_sq(self._star()))
        if star_sq == 0.0:
            return self.sigma**2
        return 2.0 * self.sigma**2 * max(1.0, star_sq)

    @property
    def lipschitz_constant(self) -> float:
        return self.sigma**2

    @property
    def regularity_constant(self) -> float:
        star_sq = float(self.space.v_norm_sq(self._star()))
        if star_sq == 0.0:
            return self.sigma**2
        return 2.0 * self.sigma**2 * max(1.0, star_sq)

    def vanishes_at(self, uh: np.ndarray) -> bool:
        return self.sigma == 0.0 or np.array_equal(uh, self._star())

    def increment(self, normals: np.ndarray, dt: float) -> WienerIncrement:
        return WienerIncrement(dt, np.sqrt(dt) * normals, normals)

    def sample_increment(self, dt: float, rng: np.random.Generator) -> WienerIncrement:
        if dt < 0:
            raise ValueError("dt must be nonnegative")
        return self.increment(rng.standard_normal(), dt)

    def apply(self, t: float, uh: np.ndarray, incr: WienerIncrement) -> np.ndarray:
        dw = np.asarray(incr.value)
        dw = dw.reshape(dw.shape + (1,) * (self.space.dim + 1))
        return self.sigma * (uh - self._star()) * dw

    def hs_norm_sq(self, t: float, uh: np.ndarray):
        return self.sigma**2 * self.space.h_norm_sq(uh - self._star())

    def hs_norm_sq_difference(self, t: float, uh: np.ndarray, vh: np.ndarray):
        return self.sigma**2 * self.space.h_norm_sq(uh - vh)


@dataclass(frozen=True)
class LinearDiagonal(_QWienerNoise):
    """Mode-wise multiplicative noise.

    Each real basis function ``e`` receives ``sigma_e <u - u_star, e> <dW, e> e``.
    """

    spectrum: QSpectrum
    sigma_k: np.ndarray
    u_star: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if np.shape(self.sigma_k) != self.spectrum.q.shape:
            raise ValueError("sigma_k must match the spectrum shape")

    def _star(self) -> np.ndarray:
        return self.space.zeros() if self.u_star is None else self.u_star

    @property
    def lipschitz_constant(self) -> float:
        return float((self.spectrum.q * np.asarray(self.sigma_k) ** 2).max(initial=0.0))

    @property
    def growth_constant(self) -> float:
        lip = self.lipschitz_constant
        star_sq = float(self.space.h_norm_sq(self._star()))
        if star_sq == 0.0:
            return lip
        return 2.0 * lip * max(1.0, star_sq)

    @property
    def regularity_constant(self) -> float:
        lip = self.lipschitz_constant
        star_sq = float(self.space.v_norm_sq(self._star()))
        if star_sq == 0.0:
            return lip
        return 2.0 * lip * max(1.0, star_sq)

    def vanishes_at(self, uh: np.ndarray) -> bool:
        return np.array_equal(uh, self._star()) or self.lipschitz_constant == 0.0

    def apply(self, t: float, uh: np.ndarray, incr: WienerIncrement) -> np.ndarray:
        w = self.space.to_modal(uh - self._star())
        z = incr.value
        out = self.sigma_k * (w.real * z.real - 1j * (w.imag * z.imag))
        return self.space.from_modal(out)

    def hs_norm_sq(self, t: float, uh: np.ndarray):
        return self._weighted(self.space.to_modal(uh - self._star()))

    def hs_norm_sq_difference(self, t: float, uh: np.ndarray, vh: np.ndarray):
        return self._weighted(self.space.to_modal(uh - vh))

    def _weighted(self, w: np.ndarray):
        weights = self.spectrum.q * np.asarray(self.sigma_k) ** 2
        return (weights * np.abs(w) ** 2).sum(axis=(-2, -1))


NoiseModel = Additive | ScalarStationary | LinearDiagonal


def sample_increment(model, dt: float, rng: np.random.Generator) -> WienerIncrement:
    return model.sample_increment(dt, rng)


def phi_apply_increment(model, t: float, uh: np.ndarray, incr: WienerIncrement) -> np.ndarray:
    return model.apply(t, uh, incr)


def hs_norm_sq(model, t: float, uh: np.ndarray):
    return model.hs_norm_sq(t, uh)
