"""Fourier discretization of divergence-free fields on the periodic torus.

Fields are stored as complex coefficient arrays in ``numpy.fft`` layout with
shape ``(..., dim, n, ..., n)``: any leading batch axes, one axis for the
velocity component, then ``dim`` wavenumber axes.  The coefficients are the
true Fourier coefficients, ``u(x) = sum_k u_k exp(i k.x)`` on ``[0, 2pi)^dim``.

Only wavevectors with ``0 < max_i |k_i| <= n/2 - 1`` are retained.  Dropping
the Nyquist plane keeps the retained set closed under ``k -> -k``; dropping
``k = 0`` enforces zero mean, so the Stokes operator is invertible with
smallest eigenvalue 1.

Norms are unnormalized integrals over the torus, e.g.
``h_norm_sq(u) = int |u|^2 dx``.
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy import fft

DOMAIN_LENGTH = 2.0 * np.pi
SNAPSHOT_MAGIC = b"SCBF"
SNAPSHOT_VERSION = 1


@dataclass(frozen=True)
class SpectralSpace:
    """Retained Fourier modes of a ``dim``-torus with ``n_modes`` points per axis.

    Parameters
    ----------
    dim : int
        Spatial dimension, 2 or 3.
    n_modes : int
        Collocation points per axis, a power of two >= 4.
    """

    dim: int
    n_modes: int

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise ValueError(f"dim must be 2 or 3, got {self.dim}")
        n = self.n_modes
        if n < 4 or n & (n - 1):
            raise ValueError(f"n_modes must be a power of two >= 4, got {n}")

    # ------------------------------------------------------------------
    # lattice data
    # ------------------------------------------------------------------
    @property
    def kmax(self) -> int:
        return self.n_modes // 2 - 1

    @property
    def lambda1(self) -> float:
        return 1.0

    @property
    def volume(self) -> float:
        return DOMAIN_LENGTH**self.dim

    @property
    def grid_shape(self) -> tuple[int, ...]:
        return (self.n_modes,) * self.dim

    @property
    def field_shape(self) -> tuple[int, ...]:
        return (self.dim,) + self.grid_shape

    @cached_property
    def wavevectors(self) -> np.ndarray:
        """Integer wavevectors, shape ``(dim, n, ..., n)``."""
        freqs = np.fft.fftfreq(self.n_modes, 1.0 / self.n_modes).round().astype(int)
        return np.stack(np.meshgrid(*([freqs] * self.dim), indexing="ij"))

    @cached_property
    def k2(self) -> np.ndarray:
        """Stokes eigenvalue ``|k|^2`` per grid position."""
        return (self.wavevectors**2).sum(axis=0).astype(float)

    @cached_property
    def mask(self) -> np.ndarray:
        """Boolean mask of retained wavevectors."""
        k = self.wavevectors
        return (np.abs(k).max(axis=0) <= self.kmax) & (self.k2 > 0)

    @cached_property
    def _kf(self) -> np.ndarray:
        return self.wavevectors.astype(float)

    @cached_property
    def _inv_k2(self) -> np.ndarray:
        return np.where(self.mask, 1.0 / np.where(self.k2 > 0, self.k2, 1.0), 0.0)

    @cached_property
    def _k2_masked(self) -> np.ndarray:
        return np.where(self.mask, self.k2, 0.0)

    @cached_property
    def _mask_f(self) -> np.ndarray:
        return self.mask.astype(float)

    @property
    def n_retained(self) -> int:
        return int(self.mask.sum())

    @property
    def max_eigenvalue(self) -> float:
        return float(self.k2[self.mask].max())

    def retained_wavevectors(self) -> np.ndarray:
        """Retained wavevectors in lexicographic order, shape ``(count, dim)``."""
        r = np.arange(-self.kmax, self.kmax + 1)
        grid = np.stack(np.meshgrid(*([r] * self.dim), indexing="ij"), axis=-1)
        ks = grid.reshape(-1, self.dim)
        return ks[np.any(ks != 0, axis=1)]

    def index_of(self, k) -> tuple[int, ...]:
        """Grid position of wavevector ``k`` in the coefficient layout."""
        k = tuple(int(c) for c in k)
        if len(k) != self.dim or max(abs(c) for c in k) > self.kmax or not any(k):
            raise ValueError(f"wavevector {k} is not retained")
        return tuple(c % self.n_modes for c in k)

    # ------------------------------------------------------------------
    # linear operators
    # ------------------------------------------------------------------
    def zeros(self, batch: tuple[int, ...] = ()) -> np.ndarray:
        return np.zeros(tuple(batch) + self.field_shape, dtype=complex)

    def _check(self, uh: np.ndarray) -> None:
        if uh.shape[-self.dim - 1:] != self.field_shape:
            raise ValueError(
                f"field shape {uh.shape} does not end with {self.field_shape}")

    def leray(self, vh: np.ndarray) -> np.ndarray:
        """Project onto divergence-free, zero-mean retained modes."""
        self._check(vh)
        kdotv = (self._kf * vh).sum(axis=-self.dim - 1)
        out = vh - self._kf * np.expand_dims(kdotv * self._inv_k2, -self.dim - 1)
        return out * self._mask_f

    def stokes(self, uh: np.ndarray) -> np.ndarray:
        """Apply the Stokes operator, a multiplication by ``|k|^2``."""
        return uh * self._k2_masked

    def inverse_stokes(self, uh: np.ndarray) -> np.ndarray:
        return uh * self._inv_k2

    def stokes_exponential(self, scale: float) -> np.ndarray:
        """Multiplier ``exp(-scale |k|^2)`` on retained modes."""
        return np.exp(-scale * self._k2_masked) * self._mask_f

    def smoothing_projection(self, uh: np.ndarray, n: float) -> np.ndarray:
        """Scale mode ``k`` by ``exp(-|k|^2/n)`` when ``|k|^2 < n^2``, zero it otherwise."""
        if n <= 0:
            raise ValueError("n must be positive")
        weights = np.where(self.k2 < n * n, np.exp(-self.k2 / n), 0.0) * self._mask_f
        return uh * weights

    def gradient(self, uh: np.ndarray) -> np.ndarray:
        """Spectral gradient, shape ``(..., dim_derivative, dim_component, n...)``."""
        ik = 1j * self._kf
        return np.stack([ik[j] * uh for j in range(self.dim)], axis=-self.dim - 2)

    # ------------------------------------------------------------------
    # structure checks
    # ------------------------------------------------------------------
    def reflect(self, uh: np.ndarray) -> np.ndarray:
        """Return the array indexed at ``-k``."""
        rev = (-np.arange(self.n_modes)) % self.n_modes
        out = uh
        for ax in range(-self.dim, 0):
            out = np.take(out, rev, axis=ax)
        return out

    def enforce_hermitian(self, uh: np.ndarray) -> np.ndarray:
        return 0.5 * (uh + np.conj(self.reflect(uh)))

    def hermitian_defect(self, uh: np.ndarray) -> float:
        return float(np.abs(uh - np.conj(self.reflect(uh))).max(initial=0.0))

    def divergence_defect(self, uh: np.ndarray) -> float:
        return float(np.abs((self._kf * uh).sum(axis=-self.dim - 1)).max(initial=0.0))

    def outside_defect(self, uh: np.ndarray) -> float:
        """Largest coefficient on a non-retained position."""
        return float(np.abs(uh * (~self.mask)).max(initial=0.0))

    # ------------------------------------------------------------------
    # collocation transforms
    # ------------------------------------------------------------------
    def grid_size(self, padding: float = 1) -> int:
        if padding < 1:
            raise ValueError(f"padding must be >= 1, got {padding}")
        m = round(padding * self.n_modes)
        if abs(m - padding * self.n_modes) > 1e-9:
            raise ValueError(f"padding {padding} does not give an integer grid")
        return int(m)

    def grid(self, padding: float = 1) -> list[np.ndarray]:
        """Collocation coordinates, one ``(m, ..., m)`` array per axis."""
        m = self.grid_size(padding)
        x = DOMAIN_LENGTH * np.arange(m) / m
        return np.meshgrid(*([x] * self.dim), indexing="ij")

    def _blocks(self, m: int):
        """Slices of nonnegative and negative retained wavenumbers on an ``m``-point axis."""
        k = self.kmax
        return slice(0, k + 1), slice(m - k, m)

    def to_physical(self, uh: np.ndarray, padding: float = 1) -> np.ndarray:
        """Sample the field on a grid with ``padding * n_modes`` points per axis.

        Works on any array whose trailing ``dim`` axes are wavenumbers.  The
        inverse transform is applied one axis at a time so that only lines
        holding retained modes are transformed.
        """
        m = self.grid_size(padding)
        d, kmax, n = self.dim, self.kmax, self.n_modes
        arr = uh[..., : kmax + 1]
        for ax in range(arr.ndim - d, arr.ndim - 1):
            shape = list(arr.shape)
            shape[ax] = m
            big = np.zeros(shape, dtype=complex)
            lead = (slice(None),) * ax
            for src, dst in zip(self._blocks(n), self._blocks(m)):
                big[lead + (dst,)] = arr[lead + (src,)]
            arr = fft.ifft(big, axis=ax, norm="forward", overwrite_x=True)
        big = np.zeros(arr.shape[:-1] + (m // 2 + 1,), dtype=complex)
        big[..., : kmax + 1] = arr
        return fft.irfft(big, n=m, axis=-1, norm="forward", overwrite_x=True)

    def to_spectral(self, p: np.ndarray) -> np.ndarray:
        """Fourier coefficients of real samples, truncated to retained modes.

        No projection is applied; gradient parts survive.
        """
        d, n, kmax = self.dim, self.n_modes, self.kmax
        m = p.shape[-1]
        if p.shape[-d:] != (m,) * d or m < n:
            raise ValueError(f"samples of shape {p.shape} do not match this space")
        arr = fft.rfft(p, axis=-1, norm="forward")[..., : kmax + 1]
        for ax in range(arr.ndim - 2, arr.ndim - d - 1, -1):
            full = fft.fft(arr, axis=ax, norm="forward")
            shape = list(full.shape)
            shape[ax] = n
            arr = np.zeros(shape, dtype=complex)
            lead = (slice(None),) * ax
            for src, dst in zip(self._blocks(n), self._blocks(m)):
                arr[lead + (src,)] = full[lead + (dst,)]
        out = np.zeros(p.shape[:-d] + (n,) * d, dtype=complex)
        out[..., : kmax + 1] = arr
        # negative last-axis wavenumbers from conjugate symmetry
        rev = (-np.arange(n)) % n
        tail = out[..., 1: kmax + 1]
        for ax in range(-d, -1):
            tail = np.take(tail, rev, axis=ax)
        out[..., n - kmax:] = np.conj(tail[..., ::-1])
        out[(Ellipsis,) + (0,) * d] = 0.0
        return out

    # ------------------------------------------------------------------
    # inner products and norms
    # ------------------------------------------------------------------
    def _sum_field(self, a: np.ndarray) -> np.ndarray:
        return a.sum(axis=tuple(range(-self.dim - 1, 0)))

    def inner(self, uh: np.ndarray, vh: np.ndarray):
        """``int u . v dx``."""
        return self.volume * self._sum_field((uh * np.conj(vh)).real)

    def h_norm_sq(self, uh: np.ndarray):
        return self.volume * self._sum_field(np.abs(uh) ** 2)

    def v_norm_sq(self, uh: np.ndarray):
        """``int |grad u|^2 dx``, equal to ``<Au, u>``."""
        return self.volume * self._sum_field(self._k2_masked * np.abs(uh) ** 2)

    def dual_norm_sq(self, uh: np.ndarray):
        """Squared dual norm of V, realized as ``|A^{-1/2} u|_H^2``."""
        return self.volume * self._sum_field(self._inv_k2 * np.abs(uh) ** 2)

    def default_lp_padding(self, p: float) -> int:
        if float(p).is_integer() and int(p) % 2 == 0:
            return max(1, math.ceil(p / 2))
        return 4

    def lp_integral(self, uh: np.ndarray, p: float, padding: float | None = None):
        """``int |u|^p dx`` by collocation quadrature.

        The default grid is exact for even integer ``p``; other exponents use a
        4x padded grid.
        """
        if p < 1:
            raise ValueError("p must be >= 1")
        if padding is None:
            padding = self.default_lp_padding(p)
        u = self.to_physical(uh, padding)
        mag_sq = (u**2).sum(axis=-self.dim - 1)
        axes = tuple(range(-self.dim, 0))
        if p == 2:
            vals = mag_sq
        else:
            vals = mag_sq ** (0.5 * p)
        return self.volume * vals.mean(axis=axes)

    def lp_norm(self, uh: np.ndarray, p: float, padding: float | None = None):
        return self.lp_integral(uh, p, padding) ** (1.0 / p)

    # ------------------------------------------------------------------
    # orthonormal real basis
    # ------------------------------------------------------------------
    @cached_property
    def _canonical(self):
        ks = self.retained_wavevectors()
        first_nonzero = np.array([k[np.flatnonzero(k)[0]] for k in ks])
        ks = ks[first_nonzero > 0]
        n = self.n_modes
        flat = np.ravel_multi_index(tuple((ks % n).T), self.grid_shape)
        flat_neg = np.ravel_multi_index(tuple(((-ks) % n).T), self.grid_shape)
        return ks, flat, flat_neg, _polarizations(ks)

    @property
    def canonical_wavevectors(self) -> np.ndarray:
        """One representative of each ``+-k`` pair, first nonzero component positive."""
        return self._canonical[0]

    @property
    def polarizations(self) -> np.ndarray:
        """Unit vectors orthogonal to ``k``, shape ``(n_canonical, dim - 1, dim)``."""
        return self._canonical[3]

    @property
    def n_basis(self) -> int:
        """Real dimension of the discrete divergence-free space."""
        ks = self._canonical[0]
        return 2 * len(ks) * (self.dim - 1)

    def to_modal(self, uh: np.ndarray) -> np.ndarray:
        """Coordinates in the orthonormal basis, packed as complex numbers.

        For the canonical wavevector ``k`` and polarization ``p`` the basis
        functions are ``sqrt(2) cos(k.x) p / |T|^{1/2}`` and
        ``sqrt(2) sin(k.x) p / |T|^{1/2}``.  Their coordinates ``c`` and ``s``
        are returned as ``z = c - i s``, so ``h_norm_sq(u) = sum |z|^2``.
        Output shape ``(..., n_canonical, dim - 1)``.
        """
        _, flat, _, pol = self._canonical
        batch = uh.shape[: -self.dim - 1]
        coeffs = uh.reshape(batch + (self.dim, -1))[..., flat]
        scale = math.sqrt(2.0 * self.volume)
        return scale * np.einsum("...ck,kjc->...kj", coeffs, pol)

    def from_modal(self, z: np.ndarray) -> np.ndarray:
        """Inverse of :meth:`to_modal`."""
        _, flat, flat_neg, pol = self._canonical
        batch = z.shape[:-2]
        coeffs = np.einsum("...kj,kjc->...ck", z, pol) / math.sqrt(2.0 * self.volume)
        out = np.zeros(batch + (self.dim, self.n_modes**self.dim), dtype=complex)
        out[..., flat] = coeffs
        out[..., flat_neg] = np.conj(coeffs)
        return out.reshape(batch + self.field_shape)

    def canonical_index(self, k) -> int:
        """Position of ``k`` or ``-k`` among the canonical wavevectors."""
        ks = self._canonical[0]
        k = np.asarray(k)
        hit = np.flatnonzero(np.all(ks == k, axis=1) | np.all(ks == -k, axis=1))
        if hit.size == 0:
            raise ValueError(f"wavevector {tuple(k)} is not retained")
        return int(hit[0])

    def shear_mode(self, k, amplitude) -> np.ndarray:
        """The field ``a cos(k.x)``; ``a`` must be orthogonal to ``k``."""
        k = np.asarray(k)
        a = np.asarray(amplitude, dtype=float)
        if abs(float(a @ k)) > 1e-12 * max(1.0, float(np.linalg.norm(a))):
            raise ValueError("amplitude must be orthogonal to k")
        uh = self.zeros()
        uh[(slice(None),) + self.index_of(k)] += 0.5 * a
        uh[(slice(None),) + self.index_of(-k)] += 0.5 * a
        return uh


def _polarizations(ks: np.ndarray) -> np.ndarray:
    """Real orthonormal basis of the plane orthogonal to each ``k``.

    Two dimensions: ``(-k2, k1)/|k|``.  Three dimensions:
    ``p1 = a x k / |a x k|`` with ``a = e3`` (``e1`` when ``k`` is parallel to
    ``e3``), and ``p2 = k x p1 / |k|``.
    """
    ks = ks.astype(float)
    norms = np.linalg.norm(ks, axis=1)
    if ks.shape[1] == 2:
        p = np.stack([-ks[:, 1], ks[:, 0]], axis=1) / norms[:, None]
        return p[:, None, :]
    axis = np.zeros_like(ks)
    parallel = (ks[:, 0] == 0) & (ks[:, 1] == 0)
    axis[~parallel, 2] = 1.0
    axis[parallel, 0] = 1.0
    p1 = np.cross(axis, ks)
    p1 /= np.linalg.norm(p1, axis=1)[:, None]
    p2 = np.cross(ks, p1) / norms[:, None]
    return np.stack([p1, p2], axis=1)


@dataclass(frozen=True)
class SpectralField:
    """A divergence-free field together with the space it lives in."""

    space: SpectralSpace
    coeffs: np.ndarray

    def __post_init__(self):
        self.space._check(self.coeffs)
        if self.coeffs.shape != self.space.field_shape:
            raise ValueError("SpectralField holds a single field; use arrays for batches")

    def defects(self) -> dict[str, float]:
        s, c = self.space, self.coeffs
        return {
            "divergence": s.divergence_defect(c),
            "hermitian": s.hermitian_defect(c),
            "outside": s.outside_defect(c),
        }

    def is_valid(self, tol: float = 1e-12) -> bool:
        scale = max(1.0, float(np.abs(self.coeffs).max(initial=0.0)))
        return all(v <= tol * scale for v in self.defects().values())

    def h_norm_sq(self) -> float:
        return float(self.space.h_norm_sq(self.coeffs))

    def v_norm_sq(self) -> float:
        return float(self.space.v_norm_sq(self.coeffs))

    def lp_norm(self, p: float) -> float:
        return float(self.space.lp_norm(self.coeffs, p))


# ----------------------------------------------------------------------
# snapshot files
# ----------------------------------------------------------------------
_HEADER = struct.Struct("<4sIIII")


def snapshot_bytes(space: SpectralSpace, uh: np.ndarray) -> bytes:
    """Binary snapshot: header, then ``(re, im)`` float64 per mode per component."""
    ks = space.retained_wavevectors()
    idx = tuple((ks % space.n_modes).T)
    values = uh[(slice(None),) + idx].T  # (count, dim)
    pairs = np.stack([values.real, values.imag], axis=-1).astype("<f8")
    header = _HEADER.pack(SNAPSHOT_MAGIC, SNAPSHOT_VERSION, space.dim, space.n_modes, len(ks))
    return header + pairs.tobytes()


def snapshot_from_bytes(data: bytes) -> tuple[SpectralSpace, np.ndarray]:
    if len(data) < _HEADER.size:
        raise ValueError("snapshot truncated")
    magic, version, dim, n_modes, count = _HEADER.unpack_from(data)
    if magic != SNAPSHOT_MAGIC:
        raise ValueError("not a snapshot file")
    if version != SNAPSHOT_VERSION:
        raise ValueError(f"unsupported snapshot version {version}")
    space = SpectralSpace(dim, n_modes)
    ks = space.retained_wavevectors()
    if count != len(ks):
        raise ValueError("mode count does not match the header grid")
    body = np.frombuffer(data, dtype="<f8", offset=_HEADER.size)
    if body.size != count * dim * 2:
        raise ValueError("snapshot body has the wrong length")
    pairs = body.reshape(count, dim, 2)
    uh = space.zeros()
    uh[(slice(None),) + tuple((ks % n_modes).T)] = (pairs[..., 0] + 1j * pairs[..., 1]).T
    return space, uh


def write_snapshot(path, space: SpectralSpace, uh: np.ndarray) -> None:
    Path(path).write_bytes(snapshot_bytes(space, uh))


def read_snapshot(path) -> tuple[SpectralSpace, np.ndarray]:
    return snapshot_from_bytes(Path(path).read_bytes())


def snapshot_text(space: SpectralSpace, uh: np.ndarray) -> str:
    """Debug dump, one ``k component re im`` line per coefficient."""
    lines = []
    for k in space.retained_wavevectors():
        pos = space.index_of(k)
        for c in range(space.dim):
            v = uh[(c,) + pos]
            lines.append(f"{' '.join(str(int(x)) for x in k)} {c} {v.real:.17g} {v.imag:.17g}")
    return "\n".join(lines) + "\n"
