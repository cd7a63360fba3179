# tests/test_dynamics.py
import unittest
import os
import sys

import numpy as np

# Add the project root to sys.path to allow importing photonpaths_components
project_root = os.path.abspath(os.path.join(os.path.dirname(__file__), '..'))
if project_root not in sys.path:
    sys.path.insert(0, project_root)

from photonpaths_components.dynamics import (
    COMPLETED,
    CURRENT_DENSITY,
    KG_CURRENT,
    METRIC_NULL,
    PSEUDORANDOM,
    QUANTILE,
    TWO_PHOTON,
    DensityGrid2D,
    EnsembleConfig,
    VelocityField,
    WindowTooSmallError,
    default_window,
    density_grid,
    integrate_trajectory,
    joint_density,
    ks_distance,
    run_ensemble,
    sample_initial_single,
    sample_initial_two,
    single_density,
    tabulated_cdf,
)
from photonpaths_components.geometry import SpacetimeParams, tortoise_from_radial
from photonpaths_components.wavefunction import WavepacketSpec, negative_frequency_leakage


class TestEnsembleConfig(unittest.TestCase):

    def test_validation(self):
        with self.assertRaises(ValueError):
            EnsembleConfig(n_traj=0)
        with self.assertRaises(ValueError):
            EnsembleConfig(t0=1.0, t1=1.0)
        with self.assertRaises(ValueError):
            EnsembleConfig(route='geodesic')
        with self.assertRaises(ValueError):
            EnsembleConfig(sampling='sobol')

    def test_sample_times(self):
        times = EnsembleConfig(t0=-1.0, t1=1.0, n_times=5).sample_times()
        np.testing.assert_array_equal(times, [-1.0, -0.5, 0.0, 0.5, 1.0])

    def test_default_window(self):
        spec = WavepacketSpec.from_ratio(15.0, sigma=2.0)
        self.assertEqual(default_window(-3.0, 1.0, spec), (-5.5, 5.5))


class TestInitialSampling(unittest.TestCase):

    def setUp(self):
        self.balanced = WavepacketSpec.from_ratio(15.0, alpha=0.5)

    def test_quantile_median_of_symmetric_density(self):
        samples = sample_initial_single(0.0, self.balanced, 3, QUANTILE, seed=0)
        self.assertEqual(samples.shape, (3,))
        self.assertAlmostEqual(samples[1], 0.0, places=6)
        self.assertAlmostEqual(samples[0], -samples[2], places=6)

    def test_outgoing_packet_moments(self):
        spec = self.balanced.with_alpha(1.0)
        samples = sample_initial_single(-2.0, spec, 500, QUANTILE, seed=0)
        # density exp(-2 sigma^2 (r* - t)^2) has standard deviation 1/(2 sigma)
        self.assertAlmostEqual(np.mean(samples), -2.0, places=3)
        self.assertAlmostEqual(np.std(samples), 0.5, delta=0.01)

    def test_pseudorandom_is_deterministic(self):
        first = sample_initial_single(-2.0, self.balanced, 50, PSEUDORANDOM, seed=42)
        second = sample_initial_single(-2.0, self.balanced, 50, PSEUDORANDOM, seed=42)
        other = sample_initial_single(-2.0, self.balanced, 50, PSEUDORANDOM, seed=43)
        self.assertTrue(np.array_equal(first, second))
        self.assertFalse(np.array_equal(first, other))

    def test_quantile_samples_fit_their_density(self):
        grid = np.linspace(-6.0, 6.0, 4001)
        cdf = tabulated_cdf(grid, single_density(-2.0, grid, self.balanced))
        samples = sample_initial_single(-2.0, self.balanced, 400, QUANTILE, seed=0)
        self.assertLess(ks_distance(samples, grid, cdf), 0.01)

    def test_window_too_small(self):
        with self.assertRaises(WindowTooSmallError):
            sample_initial_single(0.0, self.balanced, 10, QUANTILE, seed=0, window=(-0.5, 0.5))

    def test_two_photon_pairs(self):
        spec = WavepacketSpec.from_ratio(20.0)
        pairs = sample_initial_two(-1.0, spec, 64, QUANTILE, seed=0, resolution_2d=128)
        self.assertEqual(pairs.shape, (64, 2))
        lo, hi = default_window(-1.0, -1.0, spec)
        self.assertTrue(np.all((pairs >= lo) & (pairs <= hi)))
        again = sample_initial_two(-1.0, spec, 64, PSEUDORANDOM, seed=9, resolution_2d=128)
        self.assertTrue(np.array_equal(again, sample_initial_two(-1.0, spec, 64, PSEUDORANDOM, seed=9,
                                                                 resolution_2d=128)))

    def test_joint_density_kinds(self):
        spec = WavepacketSpec.from_ratio(20.0)
        grid = np.linspace(-3.0, 3.0, 41)
        psi_dens = joint_density(-1.0, grid[:, None], grid[None, :], spec)
        cur_dens = joint_density(-1.0, grid[:, None], grid[None, :], spec, CURRENT_DENSITY)
        self.assertTrue(np.all(psi_dens >= 0))
        self.assertTrue(np.all(cur_dens >= 0))
        with self.assertRaises(ValueError):
            joint_density(-1.0, 0.0, 0.0, spec, 'amplitude')


class TestTrajectories(unittest.TestCase):

    def setUp(self):
        self.params = SpacetimeParams(m=1.0)
        self.spec = WavepacketSpec.from_ratio(15.0, alpha=0.5)

    # --- Tests for single worldlines ---
    def test_pure_outgoing_is_a_null_ray(self):
        field = VelocityField(self.spec.with_alpha(1.0), self.params)
        traj = integrate_trajectory(0.3, -1.0, 1.0, field)
        self.assertEqual(traj.status, COMPLETED)
        np.testing.assert_allclose(traj.r_star[:, 0], 0.3 + (traj.t + 1.0), atol=1e-9)

    def test_balanced_axis_stays_put(self):
        field = VelocityField(self.spec, self.params)
        traj = integrate_trajectory(0.0, -2.0, -0.5, field)
        np.testing.assert_array_equal(traj.r_star[:, 0], 0.0)

    def test_flat_space_limit(self):
        flat = SpacetimeParams(m=0.0)
        field = VelocityField(self.spec.with_alpha(1.0), flat, route=METRIC_NULL)
        traj = integrate_trajectory(1.0, 0.0, 2.0, field, sample_times=np.linspace(0.0, 2.0, 5))
        np.testing.assert_allclose(traj.r[:, 0], [1.0, 1.5, 2.0, 2.5, 3.0], atol=1e-9)
        np.testing.assert_allclose(traj.v[:, 0], 1.0, atol=1e-12)

    def test_radius_column_matches_tortoise(self):
        field = VelocityField(self.spec.with_alpha(0.7), self.params)
        traj = integrate_trajectory(-0.5, -2.0, -1.0, field, sample_times=np.linspace(-2.0, -1.0, 6))
        np.testing.assert_allclose(tortoise_from_radial(traj.r[:, 0], self.params), traj.r_star[:, 0],
                                   atol=1e-10)

    def test_scipy_solvers_match_lockstep(self):
        field = VelocityField(self.spec.with_alpha(0.7), self.params)
        times = np.linspace(-2.0, -1.0, 11)
        lockstep = integrate_trajectory(-0.5, -2.0, -1.0, field, tol=(1e-10, 1e-12), sample_times=times)
        for solver in ('RK45', 'DOP853'):
            reference = integrate_trajectory(-0.5, -2.0, -1.0, field, tol=(1e-10, 1e-12), sample_times=times,
                                             solver=solver)
            self.assertEqual(reference.status, COMPLETED)
            self.assertLess(np.max(np.abs(reference.r_star - lockstep.r_star)), 1e-7, msg=solver)

    def test_backward_span_rejected(self):
        with self.assertRaises(ValueError):
            integrate_trajectory(0.0, 1.0, 0.0, VelocityField(self.spec, self.params))

    def test_unknown_route(self):
        with self.assertRaises(ValueError):
            VelocityField(self.spec, self.params, route='bohm')

    # --- Tests for ensembles ---
    def test_routes_agree_and_ordering_holds(self):
        config = EnsembleConfig(n_traj=20, t0=-3.0, t1=-1.0, n_times=11)
        kg = run_ensemble(config, self.spec, self.params)
        null = run_ensemble(EnsembleConfig(n_traj=20, t0=-3.0, t1=-1.0, n_times=11, route=METRIC_NULL),
                            self.spec, self.params)
        self.assertEqual(len(kg.trajectories), 20)
        self.assertEqual(kg.failures, [])
        for a, b in zip(kg.trajectories, null.trajectories):
            self.assertLess(np.max(np.abs(a.r_star - b.r_star)), 1e-6)
        final = kg.positions_at(10)[:, 0]
        self.assertTrue(np.all(np.diff(final) > 0))

    def test_ensemble_is_deterministic(self):
        config = EnsembleConfig(n_traj=8, t0=-3.0, t1=-2.0, n_times=5, sampling=PSEUDORANDOM, seed=3)
        first = run_ensemble(config, self.spec, self.params)
        second = run_ensemble(config, self.spec, self.params)
        for a, b in zip(first.trajectories, second.trajectories):
            self.assertTrue(np.array_equal(a.r_star, b.r_star))
        self.assertEqual(first.provenance['route'], KG_CURRENT)
        self.assertEqual(first.provenance['window'], list(default_window(-3.0, -2.0, self.spec)))
        self.assertEqual(first.provenance['negative_frequency_leakage'], negative_frequency_leakage(self.spec))

    def test_explicit_initial_positions(self):
        config = EnsembleConfig(n_traj=3, t0=-3.0, t1=-2.5, n_times=3)
        bundle = run_ensemble(config, self.spec, self.params, initial=np.array([-3.2, -3.0, 2.9]))
        np.testing.assert_array_equal(bundle.initial_positions()[:, 0], [-3.2, -3.0, 2.9])

    def test_two_photon_ensemble(self):
        spec = WavepacketSpec.from_ratio(20.0)
        config = EnsembleConfig(n_traj=6, t0=-1.0, t1=-0.5, n_times=3, scenario=TWO_PHOTON, resolution_2d=128)
        bundle = run_ensemble(config, spec, self.params)
        self.assertEqual(len(bundle.trajectories), 6)
        for traj in bundle.trajectories:
            self.assertEqual(traj.dimension, 2)
            self.assertEqual(traj.r.shape[1], 2)


class TestDensityGrid(unittest.TestCase):

    def setUp(self):
        self.spec = WavepacketSpec.from_ratio(15.0, alpha=0.5)

    def test_mass_conserved(self):
        before = density_grid(-1.0, (-8.0, 8.0), 4001, self.spec)
        after = density_grid(1.0, (-8.0, 8.0), 4001, self.spec)
        self.assertAlmostEqual(after.mass() / before.mass(), 1.0, places=6)

    def test_outgoing_peak_moves(self):
        grid = density_grid(1.0, (-4.0, 4.0), 801, self.spec.with_alpha(1.0))
        self.assertAlmostEqual(grid.r_star[np.argmax(grid.j0)], 1.0, places=2)
        self.assertTrue(np.all(grid.r > 2.0))

    def test_velocity_masked_where_density_not_positive(self):
        grid = density_grid(0.0, (-3.0, 3.0), 601, self.spec)
        self.assertTrue(np.all(np.isnan(grid.v[grid.j0 <= 0])))

    def test_two_photon_grid_symmetric(self):
        spec = WavepacketSpec.from_ratio(20.0)
        grid = density_grid(0.0, (-3.0, 3.0), 64, spec, scenario=TWO_PHOTON)
        self.assertIsInstance(grid, DensityGrid2D)
        self.assertTrue(np.array_equal(grid.density, grid.density.T))

    def test_resolution_validated(self):
        with self.assertRaises(ValueError):
            density_grid(0.0, (-3.0, 3.0), 1, self.spec)


if __name__ == '__main__':
    unittest.main()
