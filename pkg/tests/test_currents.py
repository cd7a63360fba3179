# tests/test_currents.py
import unittest
import os
import sys

import numpy as np

# Add the project root to sys.path to allow importing photonpaths_components
project_root = os.path.abspath(os.path.join(os.path.dirname(__file__), '..'))
if project_root not in sys.path:
    sys.path.insert(0, project_root)

from photonpaths_components.currents import (
    NodeProximityError,
    continuity_residual,
    current_scale,
    printed_single_current,
    printed_two_photon_currents,
    single_current,
    two_photon_continuity_residual,
    two_photon_current_scale,
    two_photon_currents,
    velocity_single,
    velocity_two,
)
from photonpaths_components.geometry import SpacetimeParams, metric_function, metric_function_from_tortoise
from photonpaths_components.wavefunction import TwoPhotonEvent, WavepacketSpec, psi_single, psi_single_gradient


class TestSingleCurrent(unittest.TestCase):

    def setUp(self):
        self.params = SpacetimeParams(m=1.0)
        self.balanced = WavepacketSpec.from_ratio(15.0, alpha=0.5)
        self.t = np.linspace(-2.0, 2.0, 21)[:, None]
        self.r = np.linspace(-3.0, 3.0, 31)[None, :]

    # --- Tests for the pure-mode limits ---
    def test_pure_outgoing_moves_at_unit_rate(self):
        cur = single_current(self.t, self.r, self.balanced.with_alpha(1.0))
        self.assertTrue(np.array_equal(cur.j0, cur.j1))
        self.assertTrue(np.all(cur.j0 > 0))
        np.testing.assert_array_equal(cur.ratio, 1.0)

    def test_pure_ingoing_moves_at_minus_unit_rate(self):
        cur = single_current(self.t, self.r, self.balanced.with_alpha(0.0))
        np.testing.assert_allclose(cur.ratio, -1.0, rtol=1e-14)

    def test_outgoing_velocity_is_metric_function(self):
        v = velocity_single(5.0, 5.0, self.params, self.balanced.with_alpha(1.0))
        self.assertAlmostEqual(v, metric_function(5.0, self.params), places=12)

    def test_balanced_state_is_at_rest_on_axis(self):
        cur = single_current(np.array([-1.0, 0.5]), 0.0, self.balanced)
        np.testing.assert_array_equal(cur.j1, 0.0)

    def test_balanced_density_beside_nodes(self):
        """
        j0 at alpha = 1/2 is not sign-definite: it dips below zero in thin bands beside
        each interference node, never deeper than 2 sigma^2 A^2 / (e k0), and only where
        |psi|^2 < 4 sigma^2 A^2 / (e k0^2). At t = 0 it has the closed form
        4 A^2 exp(-2 sigma^2 r*^2) cos(k0 r*) (k0 cos(k0 r*) - 2 sigma^2 r* sin(k0 r*)).
        """
        spec = self.balanced
        k0, sigma, a2 = spec.k0, spec.sigma, spec.amplitude ** 2
        depth = 2.0 * sigma ** 2 * a2 / (np.e * k0)
        r = np.linspace(-3.0, 3.0, 20001)
        cur = single_current(0.0, r, spec)
        phase = k0 * r
        expected = (4.0 * a2 * np.exp(-2.0 * sigma ** 2 * r ** 2) * np.cos(phase)
                    * (k0 * np.cos(phase) - 2.0 * sigma ** 2 * r * np.sin(phase)))
        np.testing.assert_allclose(cur.j0, expected, rtol=0, atol=1e-12 * current_scale(spec))
        self.assertLess(np.min(cur.j0), 0.0)
        self.assertGreater(np.min(cur.j0), -depth * (1.0 + 1e-9))

        for t, r_star in ((0.0, r), (self.t, self.r)):
            j0 = single_current(t, r_star, spec).j0
            density = np.abs(psi_single(t, r_star, spec)) ** 2
            self.assertGreater(np.min(j0), -depth * (1.0 + 1e-9))
            self.assertTrue(np.all(j0[density >= 1e-2 * a2] > 0))

    def test_ratio_invariant_under_rescaling(self):
        spec = WavepacketSpec.from_ratio(15.0, alpha=0.3)
        c = 3.7 - 1.2j
        psi = c * psi_single(self.t, self.r, spec)
        dpsi_dt, dpsi_dr = psi_single_gradient(self.t, self.r, spec)
        j0 = -2.0 * np.imag(np.conj(psi) * c * dpsi_dt)
        j1 = 2.0 * np.imag(np.conj(psi) * c * dpsi_dr)
        ratio = single_current(self.t, self.r, spec).ratio
        mask = np.abs(j0) > 1e-8 * current_scale(spec) * abs(c) ** 2
        np.testing.assert_allclose((j1 / j0)[mask], ratio[mask], rtol=1e-9, atol=1e-12)

    def test_node_floor_raises(self):
        with self.assertRaises(NodeProximityError):
            velocity_single(0.0, 3.0, self.params, self.balanced, node_floor=1e6)

    def test_velocity_rejects_interior(self):
        with self.assertRaises(ValueError):
            velocity_single(0.0, 1.5, self.params, self.balanced)

    # --- Tests for continuity ---
    def test_continuity_pure_outgoing(self):
        spec = self.balanced.with_alpha(1.0)
        tt, rr = np.meshgrid(np.linspace(-1, 1, 7), np.linspace(-1, 1, 7), indexing='ij')
        residual = continuity_residual(tt, rr, spec, 1e-2)
        self.assertLess(np.max(np.abs(residual)), 1e-10 * current_scale(spec))

    def test_continuity_second_order(self):
        rng = np.random.default_rng(3)
        t = rng.uniform(-1.0, 1.0, 10)
        r = rng.uniform(-1.0, 1.0, 10)
        coarse = continuity_residual(t, r, self.balanced, 1e-2)
        fine = continuity_residual(t, r, self.balanced, 5e-3)
        self.assertLess(np.sqrt(np.mean(fine ** 2)), np.sqrt(np.mean(coarse ** 2)) / 3.5)

    def test_continuity_rejects_bad_step(self):
        with self.assertRaises(ValueError):
            continuity_residual(0.0, 0.0, self.balanced, 0.0)

    # --- Tests for the printed closed forms ---
    def test_printed_radial_current_matches(self):
        printed = printed_single_current(self.t, self.r, self.balanced)
        computed = single_current(self.t, self.r, self.balanced)
        scale = current_scale(self.balanced)
        self.assertLess(np.max(np.abs(printed.j1 - computed.j1)), 1e-10 * scale)

    def test_printed_density_deviates(self):
        printed = printed_single_current(self.t, self.r, self.balanced)
        computed = single_current(self.t, self.r, self.balanced)
        scale = current_scale(self.balanced)
        self.assertGreater(np.max(np.abs(printed.j0 - computed.j0)), 1e-3 * scale)


class TestTwoPhotonCurrents(unittest.TestCase):

    def setUp(self):
        self.params = SpacetimeParams(m=1.0)
        self.spec = WavepacketSpec.from_ratio(20.0)
        rng = np.random.default_rng(11)
        t = rng.uniform(-1.0, 0.0, 50)
        self.ev = TwoPhotonEvent.equal_time(t, rng.uniform(-3, 3, 50), rng.uniform(-3, 3, 50))

    def test_exchange_symmetry_is_exact(self):
        cur = two_photon_currents(self.ev, self.spec)
        swapped = two_photon_currents(self.ev.swapped(), self.spec).swapped()
        for name in ('j1_0', 'j1_1', 'j2_0', 'j2_1'):
            self.assertTrue(np.array_equal(getattr(cur, name), getattr(swapped, name)))

    def test_printed_forms_match(self):
        ev = TwoPhotonEvent.equal_time(0.0, 0.2, -0.2)
        printed = printed_two_photon_currents(ev, self.spec)
        computed = two_photon_currents(ev, self.spec)
        scale = two_photon_current_scale(self.spec)
        for name in ('j1_0', 'j1_1', 'j2_0', 'j2_1'):
            self.assertLess(abs(float(getattr(printed, name)) - float(getattr(computed, name))), 1e-10 * scale)

    def test_printed_forms_match_on_random_events(self):
        printed = printed_two_photon_currents(self.ev, self.spec)
        computed = two_photon_currents(self.ev, self.spec)
        scale = two_photon_current_scale(self.spec)
        for name in ('j1_0', 'j1_1', 'j2_0', 'j2_1'):
            self.assertLess(np.max(np.abs(getattr(printed, name) - getattr(computed, name))), 1e-10 * scale)

    def test_separated_photons_follow_their_packets(self):
        ev = TwoPhotonEvent.equal_time(6.0, 6.0, -6.0)
        v1, v2 = velocity_two(ev, self.params, self.spec)
        self.assertAlmostEqual(float(v1), metric_function_from_tortoise(6.0, self.params), places=8)
        self.assertAlmostEqual(float(v2), -metric_function_from_tortoise(-6.0, self.params), places=8)

    def test_velocity_two_requires_common_time(self):
        with self.assertRaises(ValueError):
            velocity_two(TwoPhotonEvent(0.0, 1.0, 0.5, -1.0), self.params, self.spec)

    def test_photon_index(self):
        cur = two_photon_currents(self.ev, self.spec)
        self.assertIs(cur.photon(1).j0, cur.j1_0)
        with self.assertRaises(ValueError):
            cur.photon(3)

    def test_continuity_each_photon(self):
        for photon in (1, 2):
            coarse = two_photon_continuity_residual(self.ev, self.spec, 1e-2, photon)
            fine = two_photon_continuity_residual(self.ev, self.spec, 5e-3, photon)
            self.assertLess(np.sqrt(np.mean(fine ** 2)), np.sqrt(np.mean(coarse ** 2)) / 3.5)


if __name__ == '__main__':
    unittest.main()
