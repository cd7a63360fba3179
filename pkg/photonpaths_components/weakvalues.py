"""
Weak values of momentum and energy under position post-selection.

Everything is kept as amplitude products: for a post-selected overlap <phi|psi>
and operator amplitude <phi|A|psi>, the product 2 Re(<psi|phi><phi|A|psi>) is
finite everywhere and equals the matching Klein-Gordon current component. The
weak value itself is that product over 2 |<phi|psi>|^2.
"""
import logging
from dataclasses import dataclass

import numpy as np

from photonpaths_components.currents import DEFAULT_NODE_FLOOR, NodeProximityError
from photonpaths_components.geometry import metric_function, metric_function_from_tortoise, tortoise_from_radial
from photonpaths_components.wavefunction import TwoPhotonEvent, psi_quadrature_moments, two_photon_components

logger = logging.getLogger(__name__)

SINGLE_POSITION = "single-position"
TWO_PHOTON_COINCIDENCE = "two-photon-coincidence"


@dataclass(frozen=True)
class PostselectionSpec:
    """Where the final strong measurement projects: one radius, or a coincidence pair on one timeslice."""
    kind: str
    t: float
    r_star: float = None
    r1_star: float = None
    r2_star: float = None

    def __post_init__(self):
        if self.kind == SINGLE_POSITION:
            coords = (self.t, self.r_star)
        elif self.kind == TWO_PHOTON_COINCIDENCE:
            coords = (self.t, self.r1_star, self.r2_star)
        else:
            raise ValueError(f"unknown post-selection kind '{self.kind}'")
        if any(c is None or not np.all(np.isfinite(c)) for c in coords):
            raise ValueError(f"post-selection coordinates must be finite: {coords}")


@dataclass(frozen=True)
class WeakValuePair:
    """Weak momentum p_w and energy H_w with the amplitude products they come from."""
    p_w: object
    H_w: object
    momentum_product: object
    energy_product: object
    probability: object

    @classmethod
    def from_amplitudes(cls, overlap, p_amplitude, h_amplitude, node_floor=0.0):
        """
        Builds the pair from <phi|psi>, <phi|p|psi> and <phi|H|psi>.
        Raises:
            NodeProximityError: when |<phi|psi>|^2 is at or below node_floor.
        """
        overlap = np.asarray(overlap)
        probability = np.abs(overlap) ** 2
        low = probability <= node_floor
        if np.any(low):
            raise NodeProximityError(
                f"post-selection probability at or below {node_floor:.3e} "
                f"at {int(np.count_nonzero(low))} point(s)")
        conj = np.conj(overlap)
        momentum_product = 2.0 * np.real(conj * p_amplitude)
        energy_product = 2.0 * np.real(conj * h_amplitude)
        return cls(
            p_w=momentum_product / (2.0 * probability),
            H_w=energy_product / (2.0 * probability),
            momentum_product=momentum_product,
            energy_product=energy_product,
            probability=probability,
        )

    @property
    def velocity_ratio(self):
        """p_w / H_w, formed from the products so the overlap cancels exactly."""
        with np.errstate(divide='ignore', invalid='ignore'):
            return np.asarray(self.momentum_product) / np.asarray(self.energy_product)


def probability_scale(spec, photons=1):
    """Peak post-selection probability: A^2 for one packet, A^4 for a photon product."""
    return spec.amplitude ** (2 * photons)


def weak_single(t, r_star, spec, quad_cfg=None, node_floor=None):
    """
    Single-photon weak values with post-selection on r*.

    The momentum and energy amplitudes are the momentum integrals of k f(k) and
    |k| f(k) against exp(-i|k|t + ikr*).
    Args:
        t (float or ndarray): time of the post-selection.
        r_star (float or ndarray): post-selected tortoise coordinate.
        spec (WavepacketSpec): wavepacket parameters.
        quad_cfg (QuadratureConfig, optional): quadrature settings.
        node_floor (float, optional): minimum post-selection probability; defaults to
            1e-12 of the single-packet peak A^2.
    Returns:
        WeakValuePair
    """
    overlap, p_amplitude, h_amplitude = psi_quadrature_moments(t, r_star, spec, quad_cfg)
    floor = DEFAULT_NODE_FLOOR * probability_scale(spec) if node_floor is None else node_floor
    return WeakValuePair.from_amplitudes(overlap, p_amplitude, h_amplitude, floor)


def weak_velocity_single(t, r, params, spec, quad_cfg=None, node_floor=None):
    """Operational velocity f(r) p_w / H_w at Schwarzschild radius r."""
    f = metric_function(r, params)
    pair = weak_single(t, tortoise_from_radial(r, params), spec, quad_cfg, node_floor)
    return f * pair.velocity_ratio


def _detector_a_amplitudes(c):
    root2 = np.sqrt(2.0)
    return ((c.psi1k_at_1 * c.psi2_at_2 - c.psi1_at_2 * c.psi2k_at_1) / root2,
            (c.psi1k_at_1 * c.psi2_at_2 + c.psi1_at_2 * c.psi2k_at_1) / root2)


def two_photon_amplitudes(components):
    """
    Symmetrised momentum and energy amplitudes for detectors A and B.

    Detector B sees detector A's amplitudes with the two events relabelled.
    Returns:
        dict: overlap, p_A, H_A, p_B, H_B.
    """
    p_a, h_a = _detector_a_amplitudes(components)
    p_b, h_b = _detector_a_amplitudes(components.swapped())
    return {"overlap": components.symmetrised_psi(), "p_A": p_a, "H_A": h_a, "p_B": p_b, "H_B": h_b}


def weak_two(ev, spec, quad_cfg=None, node_floor=None):
    """
    Weak values for the coincidence post-selection of two photons on one timeslice.
    Args:
        ev (TwoPhotonEvent): detector positions, t1 == t2 required.
        spec (WavepacketSpec): shared k0 and sigma.
        quad_cfg (QuadratureConfig, optional): evaluate the components by quadrature;
            closed form when omitted.
        node_floor (float, optional): minimum post-selection probability; defaults to
            1e-12 of the photon-product peak A^4.
    Returns:
        tuple: (WeakValuePair for detector A, WeakValuePair for detector B).
    """
    if not ev.is_equal_time:
        raise ValueError("coincidence post-selection requires both detectors on one timeslice")
    floor = DEFAULT_NODE_FLOOR * probability_scale(spec, photons=2) if node_floor is None else node_floor
    amps = two_photon_amplitudes(two_photon_components(ev, spec, quad_cfg))
    detector_a = WeakValuePair.from_amplitudes(amps["overlap"], amps["p_A"], amps["H_A"], floor)
    detector_b = WeakValuePair.from_amplitudes(amps["overlap"], amps["p_B"], amps["H_B"], floor)
    return detector_a, detector_b


def weak_velocity_two(ev, params, spec, quad_cfg=None, node_floor=None):
    """(v1, v2) = (f(r1) p_A/H_A, f(r2) p_B/H_B)."""
    detector_a, detector_b = weak_two(ev, spec, quad_cfg, node_floor)
    f1 = metric_function_from_tortoise(ev.r1_star, params)
    f2 = metric_function_from_tortoise(ev.r2_star, params)
    return f1 * detector_a.velocity_ratio, f2 * detector_b.velocity_ratio


def weak_values_for(selection, spec, quad_cfg=None, node_floor=None):
    """Dispatches on the post-selection kind; returns a pair, or an (A, B) tuple for coincidences."""
    if selection.kind == SINGLE_POSITION:
        return weak_single(selection.t, selection.r_star, spec, quad_cfg, node_floor)
    ev = TwoPhotonEvent.equal_time(selection.t, selection.r1_star, selection.r2_star)
    return weak_two(ev, spec, quad_cfg, node_floor)
