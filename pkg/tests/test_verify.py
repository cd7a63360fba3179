# tests/test_verify.py
import unittest
import os
import sys

import numpy as np

# Add the project root to sys.path to allow importing photonpaths_components
project_root = os.path.abspath(os.path.join(os.path.dirname(__file__), '..'))
if project_root not in sys.path:
    sys.path.insert(0, project_root)

from photonpaths_components.currents import CurrentSample, single_current
from photonpaths_components.dynamics import (
    TWO_PHOTON,
    EnsembleConfig,
    Trajectory,
    TrajectoryBundle,
    VelocityField,
    integrate_trajectory,
)
from photonpaths_components.geometry import SpacetimeParams
from photonpaths_components.verify import (
    DISCREPANCY,
    FAIL,
    LIGHT_SPEED,
    PASS,
    CheckReport,
    SuiteConfig,
    _scaled_error,
    check_continuity,
    check_density_transport,
    check_exchange_symmetry,
    check_limiting_trajectories,
    check_metric_determinant,
    check_no_crossing,
    check_null_geodesic_equivalence,
    check_null_interval,
    check_null_interval_bundle,
    check_optical_validity,
    check_printed_forms,
    check_superluminal_existence,
    check_two_photon_weakvalue_equivalence,
    check_weakvalue_kg_equivalence,
    integrate_both_routes,
    run_suite,
    suite_failures,
)
from photonpaths_components.wavefunction import WavepacketSpec, negative_frequency_leakage


def flipped_current(t, r_star, spec):
    """Deliberately wrong current: radial component with the opposite sign."""
    cur = single_current(t, r_star, spec)
    return CurrentSample(j0=cur.j0, j1=-cur.j1)


def stub_trajectory(traj_id, positions):
    positions = np.asarray(positions, dtype=float)[:, None]
    zeros = np.zeros_like(positions)
    return Trajectory(traj_id=traj_id, t=np.arange(positions.shape[0], dtype=float), r_star=positions,
                      r=positions, v=zeros, j0=zeros, j1=zeros, status='completed')


def stub_bundle(route, failed_ids):
    trajectories = [stub_trajectory(0, [0.0, 1.0, 2.0]), stub_trajectory(1, [0.5, 1.5, 2.5])]
    return TrajectoryBundle(trajectories=trajectories, sample_times=np.arange(3, dtype=float),
                            failures=[{"traj_id": i, "status": "node-aborted"} for i in failed_ids],
                            provenance={"route": route})


class TestCheckReport(unittest.TestCase):

    def test_status_from_error(self):
        self.assertEqual(CheckReport.from_error('x', 1e-7, 1e-6, 3).status, PASS)
        self.assertEqual(CheckReport.from_error('x', 1e-6, 1e-6, 3).status, PASS)
        self.assertEqual(CheckReport.from_error('x', 2e-6, 1e-6, 3).status, FAIL)
        documented = CheckReport.from_error('x', 1.0, 1e-6, 3, on_failure=DISCREPANCY)
        self.assertEqual(documented.status, DISCREPANCY)
        self.assertFalse(documented.failed)

    def test_to_dict(self):
        report = CheckReport.from_error('x', 0.5, 1.0, 7, notes='n', details={'a': 1})
        self.assertEqual(set(report.to_dict()),
                         {'name', 'status', 'max_error', 'tolerance', 'probe_count', 'notes', 'details'})
        self.assertEqual(report.to_dict()['probe_count'], 7)

    def test_velocity_error_relative_above_light_speed(self):
        self.assertAlmostEqual(float(_scaled_error(110.0, 100.0, LIGHT_SPEED)), 0.1, places=12)
        self.assertAlmostEqual(float(_scaled_error(-2.2, -2.0, LIGHT_SPEED)), 0.1, places=12)
        # below the light speed the error is absolute
        self.assertAlmostEqual(float(_scaled_error(1e-3, 2e-3, LIGHT_SPEED)), 1e-3, places=15)


class TestWeakValueChecks(unittest.TestCase):

    def setUp(self):
        self.params = SpacetimeParams(m=1.0)
        self.spec = WavepacketSpec.from_ratio(15.0)

    def test_weak_and_kg_agree(self):
        for alpha in (0.0, 0.5, 1.0):
            report = check_weakvalue_kg_equivalence(self.spec.with_alpha(alpha), self.params)
            self.assertEqual(report.status, PASS, report.to_dict())
            self.assertGreater(report.probe_count, 0)

    def test_corrupted_current_is_caught(self):
        report = check_weakvalue_kg_equivalence(self.spec.with_alpha(1.0), self.params, current_fn=flipped_current)
        self.assertEqual(report.status, FAIL)
        self.assertGreater(report.max_error, 1.0)

    def test_two_photon_identity(self):
        report = check_two_photon_weakvalue_equivalence(WavepacketSpec.from_ratio(20.0), n_events=200)
        self.assertEqual(report.status, PASS, report.to_dict())

    def test_empty_grid_rejected(self):
        with self.assertRaises(ValueError):
            check_weakvalue_kg_equivalence(self.spec, self.params, grid=([], [0.0]))


class TestRouteChecks(unittest.TestCase):

    def setUp(self):
        self.params = SpacetimeParams(m=1.0)
        self.spec = WavepacketSpec.from_ratio(15.0)

    def test_routes_agree_on_short_span(self):
        config = EnsembleConfig(n_traj=10, t0=-3.0, t1=-1.0, n_times=5)
        kg_bundle, null_bundle = integrate_both_routes(config, self.spec, self.params)
        np.testing.assert_array_equal(kg_bundle.initial_positions(), null_bundle.initial_positions())
        self.assertEqual(check_null_geodesic_equivalence(self.spec, self.params, (kg_bundle, null_bundle)).status,
                         PASS)
        self.assertEqual(check_null_interval_bundle(null_bundle, self.spec, self.params).status, PASS)
        self.assertEqual(check_no_crossing(kg_bundle).status, PASS)

    def test_null_interval_single_trajectory(self):
        spec = self.spec.with_alpha(0.75)
        traj = integrate_trajectory(-0.4, -2.0, -0.5, VelocityField(spec, self.params), traj_id=4)
        report = check_null_interval(traj, spec, self.params)
        self.assertEqual(report.status, PASS)
        self.assertIn('traj=4', report.name)

    def test_crossing_detected(self):
        bundle = TrajectoryBundle(trajectories=[stub_trajectory(0, [0.0, 1.0, 2.0]),
                                                stub_trajectory(1, [0.5, 0.8, 1.5])],
                                  sample_times=np.arange(3, dtype=float))
        report = check_no_crossing(bundle)
        self.assertEqual(report.status, FAIL)
        self.assertEqual(report.max_error, 2.0)

    def test_metric_determinant(self):
        self.assertEqual(check_metric_determinant(self.params).status, PASS)
        self.assertEqual(check_metric_determinant(SpacetimeParams(m=0.0)).status, PASS)

    def test_limiting_trajectories(self):
        report = check_limiting_trajectories(self.spec, self.params)
        self.assertEqual(report.status, PASS, report.details)
        self.assertEqual(set(report.details), {'outgoing', 'ingoing', 'axis', 'flat'})

    def test_density_transport(self):
        report = check_density_transport(self.spec, self.params, n=400)
        self.assertEqual(report.status, PASS, report.to_dict())
        for failure in report.details['failures']:
            self.assertEqual(failure['ensemble'], report.name)
            self.assertEqual(failure['route'], 'kg-current')

    def test_failures_listed_once_per_trajectory(self):
        kg_bundle, null_bundle = stub_bundle('kg-current', [1]), stub_bundle('metric-null', [0, 1])
        equivalence = check_null_geodesic_equivalence(self.spec, self.params, (kg_bundle, null_bundle), 'stub')
        self.assertEqual(len(equivalence.details['failures']), 3)
        self.assertIn('3 node-aborted', equivalence.notes)
        interval = CheckReport.from_error('null-interval[stub]', 0.0, 1.0, 6, details={'failures': [
            {'ensemble': 'stub', 'route': 'metric-null', 'traj_id': 1, 'status': 'node-aborted'},
            {'ensemble': 'other', 'route': 'metric-null', 'traj_id': 1, 'status': 'node-aborted'}]})
        failures = suite_failures([equivalence, interval, check_metric_determinant(self.params)])
        self.assertEqual(len(failures), 4)
        self.assertEqual(sorted((f['route'], f['traj_id']) for f in failures if f['ensemble'] == 'stub'),
                         [('kg-current', 1), ('metric-null', 0), ('metric-null', 1)])
        self.assertEqual(failures[-1]['check'], 'null-interval[stub]')
        self.assertTrue(all(f['check'] == equivalence.name for f in failures[:3]))


class TestFieldChecks(unittest.TestCase):

    def setUp(self):
        self.params = SpacetimeParams(m=1.0)
        self.spec = WavepacketSpec.from_ratio(15.0)

    def test_printed_forms(self):
        radial, density, two_photon = check_printed_forms(self.spec, n_events=50)
        self.assertEqual(radial.status, PASS)
        self.assertEqual(density.status, DISCREPANCY)
        self.assertEqual(two_photon.status, PASS)
        self.assertEqual(np.shape(density.details['deviation']), (20, 20))
        self.assertIn('worst_event', density.details)

    def test_continuity_orders(self):
        for alpha in (0.5, 1.0):
            report = check_continuity(self.spec.with_alpha(alpha))
            self.assertEqual(report.status, PASS, report.to_dict())
        report = check_continuity(WavepacketSpec.from_ratio(20.0), TWO_PHOTON)
        self.assertEqual(report.status, PASS, report.to_dict())

    def test_continuity_needs_sample_points(self):
        with self.assertRaises(ValueError):
            check_continuity(self.spec, probes=np.empty((0, 2)))

    def test_superluminal_points_exist(self):
        report = check_superluminal_existence(self.spec, self.params)
        self.assertEqual(report.status, PASS)
        self.assertGreater(report.details['superluminal_points'], 0)

    def test_exchange_symmetry(self):
        currents, samples = check_exchange_symmetry(WavepacketSpec.from_ratio(20.0), n_events=200, n_samples=2000)
        self.assertEqual(currents.status, PASS)
        self.assertEqual(currents.max_error, 0.0)
        self.assertEqual(samples.status, PASS, samples.details)

    def test_optical_validity(self):
        report = check_optical_validity(self.spec, self.params)
        self.assertEqual(report.status, PASS)
        self.assertLess(report.max_error, 2e-4)
        leakage = negative_frequency_leakage(self.spec)
        self.assertEqual(report.details['negative_frequency_leakage'], leakage)
        self.assertIn('leakage', report.notes)
        flat = check_optical_validity(self.spec, SpacetimeParams(m=0.0))
        self.assertEqual(flat.max_error, 0.0)
        self.assertEqual(flat.details['negative_frequency_leakage'], leakage)
        narrow = WavepacketSpec.from_ratio(6.0)
        self.assertGreater(check_optical_validity(narrow, self.params).details['negative_frequency_leakage'],
                           leakage)


class TestRunSuite(unittest.TestCase):

    def test_small_suite_covers_every_family(self):
        config = SuiteConfig(n_traj=5, n_transport=200, n_events=50, n_printed_events=10, n_probes=5)
        reports = run_suite(SpacetimeParams(m=1.0), config)
        names = [r.name for r in reports]
        for prefix in ('weakvalue-kg-equivalence', 'null-geodesic-equivalence', 'null-interval',
                       'metric-determinant', 'printed-forms', 'continuity', 'density-transport',
                       'limiting-trajectories', 'superluminal-existence', 'exchange-symmetry',
                       'optical-validity', 'no-crossing'):
            self.assertTrue(any(name.startswith(prefix) for name in names), prefix)
        self.assertTrue(all(r.status in (PASS, FAIL, DISCREPANCY) for r in reports))
        by_name = {r.name: r for r in reports}
        self.assertEqual(by_name['printed-forms[single J0]'].status, DISCREPANCY)
        self.assertEqual(by_name['metric-determinant[m=1]'].status, PASS)
        for failure in suite_failures(reports):
            self.assertEqual(set(failure), {'check', 'ensemble', 'route', 'traj_id', 'status'})


if __name__ == '__main__':
    unittest.main()
