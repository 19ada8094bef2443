import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from scbf.spectral_space import (
    SpectralField, SpectralSpace, read_snapshot, snapshot_bytes, snapshot_from_bytes,
    snapshot_text, write_snapshot,
)

from conftest import make_field

PI2 = math.pi**2


def shear(space, k=(1, 0), a=(0, 1.0)):
    return space.shear_mode(k, a)


class TestConstruction:
    @pytest.mark.parametrize("dim, n", [(1, 16), (4, 16), (2, 12), (2, 2), (3, 6)])
    def test_rejects_bad_shapes(self, dim, n):
        with pytest.raises(ValueError):
            SpectralSpace(dim, n)

    def test_lattice_facts(self, space):
        assert space.kmax == 7
        assert space.lambda1 == 1.0
        assert space.volume == pytest.approx(4 * PI2)
        assert space.n_retained == 15**2 - 1
        assert space.max_eigenvalue == 98
        ks = space.retained_wavevectors()
        assert len(ks) == space.n_retained
        assert not np.any(np.all(ks == 0, axis=1))
        assert np.abs(ks).max() == space.kmax

    def test_canonical_pairs_cover_retained_set(self, space3):
        ks = space3.canonical_wavevectors
        assert 2 * len(ks) == space3.n_retained
        first = ks[np.arange(len(ks)), np.argmax(ks != 0, axis=1)]
        assert np.all(first > 0)

    @pytest.mark.parametrize("padding", [0.5, 1.3])
    def test_grid_size_rejects_fractional_or_small_padding(self, space, padding):
        with pytest.raises(ValueError):
            space.grid_size(padding)


class TestNormOracles:
    """Closed-form integrals of trigonometric fields."""

    def test_shear_h_and_v_norms(self, space):
        u = shear(space)
        assert space.h_norm_sq(u) == pytest.approx(2 * PI2, rel=1e-14)
        assert space.v_norm_sq(u) == pytest.approx(2 * PI2, rel=1e-14)
        assert space.dual_norm_sq(u) == pytest.approx(2 * PI2, rel=1e-14)

    def test_two_mode_norms(self, space):
        u = shear(space) + space.shear_mode((0, 2), (1.0, 0))
        assert space.h_norm_sq(u) == pytest.approx(4 * PI2, rel=1e-14)
        assert space.v_norm_sq(u) == pytest.approx(10 * PI2, rel=1e-14)

    @pytest.mark.parametrize("p, expected", [(2, 2 * PI2), (4, 1.5 * PI2), (6, 1.25 * PI2)])
    def test_even_lp_integrals_of_cosine_are_exact(self, space, p, expected):
        assert space.lp_integral(shear(space), p) == pytest.approx(expected, rel=1e-13)

    @pytest.mark.parametrize("p", [3, 5.5])
    def test_other_lp_integrals_of_cosine(self, space, p):
        # |cos|^p is not smooth for odd or fractional p, so quadrature converges slowly
        one_d = 2 * math.sqrt(math.pi) * math.gamma((p + 1) / 2) / math.gamma(p / 2 + 1)
        assert space.lp_integral(shear(space), p) == pytest.approx(2 * math.pi * one_d, rel=1e-5)

    def test_physical_samples_match_cosine(self, space):
        x, y = space.grid()
        u = space.to_physical(shear(space, a=(0, 2.5)))
        np.testing.assert_allclose(u[0], 0.0, atol=1e-14)
        np.testing.assert_allclose(u[1], 2.5 * np.cos(x) * np.ones_like(y), atol=1e-13)


class TestTransforms:
    @pytest.mark.parametrize("padding", [1, 1.5, 2, 3, 4])
    def test_round_trip(self, space, padding):
        u = make_field(space, seed=3, batch=(4,))
        back = space.to_spectral(space.to_physical(u, padding))
        np.testing.assert_allclose(back, u, atol=1e-14)

    def test_round_trip_3d(self, space3):
        u = make_field(space3, seed=1)
        np.testing.assert_allclose(space3.to_spectral(space3.to_physical(u, 1.5)), u, atol=1e-14)

    def test_real_data_gives_hermitian_coefficients(self, space, rng):
        uh = space.to_spectral(rng.standard_normal((2, 16, 16)))
        assert space.hermitian_defect(uh) < 1e-15
        assert space.outside_defect(uh) == 0.0

    def test_random_fields_are_valid(self, space, space3):
        for sp in (space, space3):
            f = SpectralField(sp, make_field(sp, seed=2))
            assert f.is_valid()

    def test_field_wrapper_rejects_batches(self, space):
        with pytest.raises(ValueError):
            SpectralField(space, space.zeros((2,)))


class TestProjections:
    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**31 - 1))
    def test_leray_idempotent_and_divergence_free(self, seed):
        space = SpectralSpace(2, 8)
        raw = space.to_spectral(np.random.default_rng(seed).standard_normal((2, 8, 8)))
        p = space.leray(raw)
        np.testing.assert_allclose(space.leray(p), p, atol=1e-15)
        assert space.divergence_defect(p) < 1e-13

    def test_leray_kills_gradients(self, space):
        x, y = space.grid()
        grad = np.stack([np.cos(x + 2 * y), 2 * np.cos(x + 2 * y)])
        assert np.abs(space.leray(space.to_spectral(grad))).max() < 1e-15

    def test_leray_commutes_with_stokes(self, space, rng):
        raw = space.to_spectral(rng.standard_normal((2, 16, 16)))
        np.testing.assert_allclose(space.stokes(space.leray(raw)), space.leray(space.stokes(raw)), atol=1e-13)

    def test_inverse_stokes(self, space):
        u = make_field(space, seed=4)
        np.testing.assert_allclose(space.stokes(space.inverse_stokes(u)), u, atol=1e-15)

    def test_poincare(self, space):
        u = make_field(space, seed=5, batch=(20,))
        assert np.all(space.v_norm_sq(u) >= space.lambda1 * space.h_norm_sq(u))

    @pytest.mark.parametrize("n", [0.5, 1, 3, 100])
    def test_smoothing_projection_contracts(self, space, n):
        u = make_field(space, seed=6, batch=(5,))
        p = space.smoothing_projection(u, n)
        assert np.all(space.h_norm_sq(p) <= space.h_norm_sq(u))
        assert np.all(space.v_norm_sq(p) <= space.v_norm_sq(u))

    def test_stokes_exponential_decays_each_mode(self, space):
        u = shear(space, k=(1, 2), a=(2.0, -1.0))
        np.testing.assert_allclose(space.stokes_exponential(0.1) * u, np.exp(-0.5) * u, atol=1e-15)


class TestModalBasis:
    @pytest.mark.parametrize("dim", [2, 3])
    def test_isometry_and_inverse(self, dim):
        space = SpectralSpace(dim, 8)
        u = make_field(space, seed=7)
        z = space.to_modal(u)
        assert (np.abs(z) ** 2).sum() == pytest.approx(space.h_norm_sq(u), rel=1e-13)
        np.testing.assert_allclose(space.from_modal(z), u, atol=1e-15)

    def test_polarizations_orthonormal(self, space3):
        ks = space3.canonical_wavevectors.astype(float)
        p = space3.polarizations
        np.testing.assert_allclose(np.einsum("kd,kpd->kp", ks, p), 0, atol=1e-14)
        np.testing.assert_allclose(np.einsum("kpd,kqd->kpq", p, p), np.broadcast_to(np.eye(2), (len(ks), 2, 2)),
                                   atol=1e-14)

    def test_cosine_basis_function(self, space):
        z = np.zeros((len(space.canonical_wavevectors), 1), complex)
        z[space.canonical_index((1, 0)), 0] = 1.0
        u = space.from_modal(z)
        assert space.h_norm_sq(u) == pytest.approx(1.0)
        x, _ = space.grid()
        pol = space.polarizations[space.canonical_index((1, 0)), 0]
        expected = math.sqrt(2) * np.cos(x) / math.sqrt(space.volume)
        np.testing.assert_allclose(space.to_physical(u)[1], pol[1] * expected * np.ones((16, 16)), atol=1e-14)

    def test_shear_requires_orthogonal_amplitude(self, space):
        with pytest.raises(ValueError):
            space.shear_mode((1, 0), (1.0, 0.0))


class TestSnapshots:
    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 2**31 - 1), st.sampled_from([(2, 8), (2, 16), (3, 4)]))
    def test_bytes_round_trip_is_exact(self, seed, shape):
        space = SpectralSpace(*shape)
        u = make_field(space, seed=seed)
        sp2, u2 = snapshot_from_bytes(snapshot_bytes(space, u))
        assert sp2 == space
        assert np.array_equal(u2, u)

    def test_file_round_trip(self, tmp_path, space):
        u = make_field(space, seed=8)
        write_snapshot(tmp_path / "u.scbf", space, u)
        sp2, u2 = read_snapshot(tmp_path / "u.scbf")
        assert sp2 == space and np.array_equal(u2, u)

    @pytest.mark.parametrize("mutate", [lambda b: b[:10], lambda b: b"XXXX" + b[4:], lambda b: b + b"\0" * 8])
    def test_corrupt_input(self, space, mutate):
        with pytest.raises(ValueError):
            snapshot_from_bytes(mutate(snapshot_bytes(space, make_field(space))))

    def test_text_dump_lists_every_coefficient(self, small_space):
        text = snapshot_text(small_space, make_field(small_space))
        assert len(text.strip().splitlines()) == small_space.n_retained * small_space.dim
