import numpy as np
import pytest

from scbf import operators as ops
from scbf.spectral_space import SpectralSpace
from scbf.verify import (
    BATTERY, ORACLE_ENTRIES, SMOKE_3D, RandomFieldLaw, convolution_oracle_B, pointwise_oracle_C,
    random_field, relative_deviation, run_property_battery, sample_fields,
)

from conftest import make_field


class TestRandomField:
    def test_rms_amplitude(self, space):
        u = random_field(space, RandomFieldLaw(amplitude=2.0, seed=3), batch=(5,))
        np.testing.assert_allclose(space.h_norm_sq(u), 4.0 * space.volume, rtol=1e-13)
        assert space.divergence_defect(u) < 1e-13 and space.hermitian_defect(u) == 0

    def test_cutoff(self, space):
        u = random_field(space, RandomFieldLaw(cutoff=2))
        ks = space.wavevectors
        outside = np.abs(ks).max(axis=0) > 2
        assert np.abs(u[:, outside]).max() == 0

    def test_reproducible_from_seed(self, space):
        law = RandomFieldLaw(seed=11)
        assert np.array_equal(random_field(space, law), random_field(space, law))

    def test_sample_fields_include_degenerate_inputs(self, small_space):
        u = sample_fields(small_space, np.random.default_rng(0), 400)
        norms = np.sqrt(small_space.h_norm_sq(u) / small_space.volume)
        assert np.any(norms == 0) and np.any((norms > 0) & (norms < 1e-6)) and norms.max() > 1


class TestOracles:
    def test_shear_gives_zero(self, small_space):
        u = small_space.shear_mode((1, 0), (0, 1.0))
        assert np.abs(convolution_oracle_B(small_space, u)).max() < 1e-15

    def test_zero_field(self, small_space):
        z = small_space.zeros()
        assert np.abs(convolution_oracle_B(small_space, z)).max() == 0
        assert np.abs(pointwise_oracle_C(small_space, z, 5)).max() == 0

    @pytest.mark.parametrize("dim", [2, 3])
    def test_two_routes_agree(self, dim):
        space = SpectralSpace(dim, 4 if dim == 3 else 8)
        u, v = make_field(space, seed=1), make_field(space, seed=2)
        assert relative_deviation(ops.convective_B(space, u, v), convolution_oracle_B(space, u, v)) < 1e-13
        for r in (1, 3, 5):
            assert relative_deviation(ops.forchheimer_C(space, u, r), pointwise_oracle_C(space, u, r)) < 1e-13

    def test_non_integer_exponent_matches_to_quadrature_error(self, small_space):
        u = make_field(small_space, seed=3)
        assert relative_deviation(ops.forchheimer_C(small_space, u, 2.5), pointwise_oracle_C(small_space, u, 2.5)) < 1e-3

    def test_grid_guard(self, space):
        with pytest.raises(ValueError):
            convolution_oracle_B(space, space.zeros())

    def test_relative_deviation(self):
        assert relative_deviation(np.array([1.0, 2.0]), np.array([1.0, 4.0])) == 0.5
        assert relative_deviation(np.zeros(2), np.zeros(2)) == 0.0


class TestBattery:
    @pytest.fixture(scope="class")
    @classmethod
    def reports(cls):
        return {r.name: r for r in run_property_battery(seed=0, trials=20, n_modes=8)}

    def test_manifest(self, reports):
        assert len(reports) == len(BATTERY) + 1 + len(SMOKE_3D)
        assert "critical_monotone_subcritical" in reports
        assert {n + "_3d" for n in SMOKE_3D} <= set(reports)
        assert set(ORACLE_ENTRIES) <= set(BATTERY)

    def test_all_pass(self, reports):
        failing = [n for n, r in reports.items() if not r.passed]
        assert not failing

    def test_subcritical_is_skipped(self, reports):
        rep = reports["critical_monotone_subcritical"]
        assert rep.skipped and rep.status == "skipped"

    def test_reports_are_independent_of_selection(self, reports):
        alone = run_property_battery(seed=0, trials=20, n_modes=8, smoke_3d=False, names=["poincare"])
        assert alone[0].max_deviation == reports["poincare"].max_deviation

    def test_trial_counts(self, reports):
        assert reports["projection"].trials >= 20
        assert reports["projection_3d"].trials >= 4
