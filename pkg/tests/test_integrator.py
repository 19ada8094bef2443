import numpy as np
import pytest

from scbf.integrator import (
    BlowUp, SolverConfig, apriori_bound_check, energy_residual, simulate, simulate_ensemble, step,
)
from scbf.noise import Additive, QSpectrum, ScalarStationary, path_stream
from scbf.operators import PhysicsParams

from conftest import make_field

PARAMS = PhysicsParams(1.0, 1.0, 5)


def streams(n, seed=0):
    return [path_stream(seed, i) for i in range(n)]


class TestConfig:
    @pytest.mark.parametrize("kwargs", [
        dict(dt=0, t_end=1), dict(dt=0.1, t_end=0.05), dict(dt=0.1, t_end=1, scheme="rk4"),
        dict(dt=0.1, t_end=1, record_every=0), dict(dt=0.1, t_end=1, noise_substeps=0),
        dict(dt=0.3, t_end=1), dict(dt=0.1, t_end=1, clip_threshold=0),
    ])
    def test_rejects(self, kwargs):
        with pytest.raises(ValueError):
            SolverConfig(**kwargs)

    def test_n_steps(self):
        assert SolverConfig(1e-3, 0.5).n_steps == 500


class TestDeterministic:
    def test_shear_decays_exactly(self, space):
        # B vanishes on a shear, so with beta = 0 the scheme is the exact heat flow
        u0 = space.shear_mode((1, 2), (2.0, -1.0))
        rec = simulate(space, u0, PhysicsParams(0.5, 0.0, 3), None, SolverConfig(0.01, 1.0))
        np.testing.assert_allclose(rec.h_norm_sq, rec.h_norm_sq[0] * np.exp(-5.0 * rec.times), rtol=1e-12)

    @pytest.mark.parametrize("scheme", ["exponential_euler_maruyama", "semi_implicit_em"])
    def test_energy_residual_is_first_order(self, space, scheme):
        u0 = make_field(space, seed=1)
        res = []
        for dt in (2e-3, 1e-3):
            rec = simulate(space, u0, PARAMS, None, SolverConfig(dt, 0.5, scheme=scheme))
            res.append(np.abs(energy_residual(rec, PARAMS)).max())
        assert res[1] < 0.6 * res[0]
        assert res[1] < 1e-2 * rec.h_norm_sq[0]

    def test_energy_decreases_without_forcing(self, space):
        rec = simulate(space, make_field(space, seed=2), PARAMS, None, SolverConfig(1e-3, 0.3))
        assert np.all(np.diff(rec.h_norm_sq) < 0)

    def test_forcing_must_be_divergence_free(self, space):
        x, y = space.grid()
        grad = space.to_spectral(np.stack([np.cos(x) + 0 * y, 0 * x]))
        with pytest.raises(ValueError):
            simulate(space, space.zeros(), PARAMS.with_forcing(grad), None, SolverConfig(0.1, 0.1))

    def test_forcing_work_recorded(self, space):
        f = space.shear_mode((1, 0), (0, 1.0))
        rec = simulate(space, space.zeros(), PhysicsParams(1.0, 0.0, 3, f), None, SolverConfig(1e-3, 1.0))
        assert rec.forcing_work[-1] > 0
        assert abs(energy_residual(rec, PhysicsParams(1.0, 0.0, 3, f))[-1]) < 1e-3 * rec.h_norm_sq[-1]

    def test_record_every_and_observer(self, space):
        obs = lambda t, u: {"t": np.full(len(u), t)}  # noqa: E731
        rec = simulate(space, make_field(space), PARAMS, None, SolverConfig(0.01, 0.1, record_every=3), observer=obs)
        np.testing.assert_allclose(rec.times, [0, 0.03, 0.06, 0.09, 0.1])
        np.testing.assert_allclose(rec.observed["t"], rec.times)


class TestStochastic:
    def test_ornstein_uhlenbeck_oracle(self, small_space):
        # one forced shear mode with beta = 0 is a linear OU process:
        # E|z_n|^2 = 2 q dt e^{-2a dt} (1 - e^{-2a dt n}) / (1 - e^{-2a dt})
        q, mu, dt, t_end, n = 0.5, 1.0, 0.05, 1.0, 4000
        model = Additive(QSpectrum.single_mode(small_space, (1, 0), q))
        rec = simulate_ensemble(small_space, small_space.zeros((n,)), PhysicsParams(mu, 0.0, 3), model,
                                SolverConfig(dt, t_end), streams=streams(n))
        decay = np.exp(-2 * mu * dt)
        steps = rec.times / dt
        expected = 2 * q * dt * decay * (1 - decay**steps) / (1 - decay)
        mean = rec.h_norm_sq.mean(axis=0)
        se = rec.h_norm_sq.std(axis=0) / np.sqrt(n)
        assert np.all(np.abs(mean - expected)[1:] < 4 * se[1:])

    def test_path_independent_of_batch(self, small_space):
        model = Additive(QSpectrum.power_law(small_space, trace=0.1))
        u0 = make_field(small_space, seed=3, batch=(4,))
        cfg = SolverConfig(1e-2, 0.2)
        batch = simulate_ensemble(small_space, u0, PARAMS, model, cfg, streams=streams(4, 9))
        alone = simulate(small_space, u0[2], PARAMS, model, cfg, rng=path_stream(9, 2))
        np.testing.assert_allclose(batch.path(2).h_norm_sq, alone.h_norm_sq, rtol=1e-13)
        np.testing.assert_allclose(batch.final[2], alone.final, atol=1e-14)

    def test_shared_stream_gives_identical_paths(self, small_space):
        model = ScalarStationary(small_space, 0.5)
        u0 = np.stack([make_field(small_space, seed=4)] * 2)
        rec = simulate_ensemble(small_space, u0, PARAMS, model, SolverConfig(1e-2, 0.2),
                                streams=streams(1), stream_of=[0, 0])
        assert np.array_equal(rec.final[0], rec.final[1])
        assert rec.wiener.shape == rec.h_norm_sq.shape

    def test_substeps_share_the_brownian_path(self, small_space):
        model = Additive(QSpectrum.power_law(small_space, trace=0.1))
        u0 = make_field(small_space, seed=5, batch=(8,))
        coarse = simulate_ensemble(small_space, u0, PARAMS, model, SolverConfig(2e-3, 0.2, noise_substeps=2),
                                   streams=streams(8))
        fine = simulate_ensemble(small_space, u0, PARAMS, model, SolverConfig(1e-3, 0.2), streams=streams(8))
        other = simulate_ensemble(small_space, u0, PARAMS, model, SolverConfig(1e-3, 0.2), streams=streams(8, 1))
        gap = small_space.h_norm_sq(coarse.final - fine.final).mean()
        assert gap < 0.01 * small_space.h_norm_sq(other.final - fine.final).mean()

    def test_martingale_has_zero_mean(self, small_space):
        model = Additive(QSpectrum.power_law(small_space, trace=0.5))
        n = 400
        rec = simulate_ensemble(small_space, make_field(small_space, seed=6, batch=(n,)), PARAMS, model,
                                SolverConfig(1e-2, 0.5), streams=streams(n))
        m = rec.martingale[:, -1]
        assert abs(m.mean()) < 4 * m.std() / np.sqrt(n)
        np.testing.assert_allclose(rec.hs[:, -1], 0.25, rtol=1e-12)

    def test_apriori_bound(self, small_space):
        model = ScalarStationary(small_space, 0.5)
        rec = simulate_ensemble(small_space, make_field(small_space, seed=7, batch=(16,)), PARAMS, model,
                                SolverConfig(1e-2, 0.5), streams=streams(16))
        assert apriori_bound_check(rec, PARAMS, model)

    def test_noise_requires_streams(self, small_space):
        with pytest.raises(ValueError):
            simulate_ensemble(small_space, small_space.zeros((2,)), PARAMS, ScalarStationary(small_space, 1.0),
                              SolverConfig(0.1, 0.1))


class TestFailures:
    def test_blowup_is_reported_per_path(self, small_space):
        u0 = np.stack([make_field(small_space, seed=8, amplitude=0.01), make_field(small_space, seed=8, amplitude=10)])
        rec = simulate_ensemble(small_space, u0, PARAMS, None, SolverConfig(1e-3, 0.01, clip_threshold=1.0))
        assert list(rec.status) == ["ok", "blowup"]
        assert np.isnan(rec.h_norm_sq[1, -1]) and np.isfinite(rec.h_norm_sq[0, -1])
        assert rec.failure_time[1] == pytest.approx(1e-3)
        assert not rec.ok

    def test_single_step_guard(self, small_space):
        u0 = make_field(small_space, amplitude=10)
        with pytest.raises(BlowUp):
            step(small_space, u0, 0.0, PARAMS, None, SolverConfig(1e-3, 1e-3, clip_threshold=1.0))
