"""
Klein-Gordon conserved currents j = (j0, j1) and the velocity fields they define.

j0 = -2 Im(psi* d_t psi) is the density and j1 = 2 Im(psi* d_r* psi) the radial
current, both taken from the analytic gradients of the closed-form wavefunctions.
The flow velocity in tortoise coordinates is j1/j0; Schwarzschild velocities
carry the extra factor f(r).
"""
import logging
from dataclasses import dataclass

import numpy as np

from photonpaths_components.geometry import metric_function, metric_function_from_tortoise, tortoise_from_radial
from photonpaths_components.wavefunction import (
    TwoPhotonEvent,
    event_arrays,
    gaussian_term,
    envelope_rate,
    psi_single,
    psi_single_gradient,
)

logger = logging.getLogger(__name__)

DEFAULT_NODE_FLOOR = 1e-12


class NodeProximityError(ArithmeticError):
    """Raised when the density (or post-selection probability) is below the node floor."""
    pass


@dataclass(frozen=True)
class CurrentSample:
    j0: object
    j1: object

    @property
    def ratio(self):
        """dr*/dt = j1/j0."""
        with np.errstate(divide='ignore', invalid='ignore'):
            return np.asarray(self.j1) / np.asarray(self.j0)


@dataclass(frozen=True)
class TwoPhotonCurrents:
    """Time and radial components of the two conserved currents j_1 and j_2."""
    j1_0: object
    j1_1: object
    j2_0: object
    j2_1: object

    def swapped(self):
        return TwoPhotonCurrents(self.j2_0, self.j2_1, self.j1_0, self.j1_1)

    def photon(self, index):
        if index == 1:
            return CurrentSample(self.j1_0, self.j1_1)
        if index == 2:
            return CurrentSample(self.j2_0, self.j2_1)
        raise ValueError(f"photon index must be 1 or 2, got {index}")


def current_scale(spec):
    """Peak density 2 k0 A^2 of a single outgoing packet."""
    return 2.0 * spec.k0 * spec.amplitude ** 2


def two_photon_current_scale(spec):
    return 2.0 * spec.sigma ** 2 * spec.k0 / np.pi


def _check_floor(j0, floor, what):
    low = np.abs(np.asarray(j0)) < floor
    if np.any(low):
        raise NodeProximityError(
            f"{what}: |j0| below node floor {floor:.3e} at {int(np.count_nonzero(low))} point(s)")


def single_current(t, r_star, spec):
    """
    Klein-Gordon current of the single-photon state at (t, r*).

    j0 is not sign-definite for superposed packets: beside each interference node
    there is a thin band where it is negative, at most 2 sigma^2 A^2 / (e k0) deep.
    Args:
        t (float or ndarray): coordinate time.
        r_star (float or ndarray): tortoise coordinate.
        spec (WavepacketSpec): wavepacket parameters, any alpha in [0, 1].
    Returns:
        CurrentSample: (j0, j1) arrays shaped like the broadcast inputs.
    """
    psi = psi_single(t, r_star, spec)
    dpsi_dt, dpsi_dr = psi_single_gradient(t, r_star, spec)
    conj = np.conj(psi)
    return CurrentSample(j0=-2.0 * np.imag(conj * dpsi_dt), j1=2.0 * np.imag(conj * dpsi_dr))


def velocity_single(t, r, params, spec, node_floor=None):
    """
    Schwarzschild coordinate velocity dr/dt = f(r) j1/j0.
    Args:
        t (float or ndarray): coordinate time.
        r (float or ndarray): Schwarzschild radius, r > 2m.
        params (SpacetimeParams): black-hole mass.
        spec (WavepacketSpec): wavepacket parameters.
        node_floor (float, optional): absolute floor on |j0|; defaults to
            1e-12 of the peak single-packet density.
    Returns:
        float or ndarray: velocity.
    Raises:
        NodeProximityError: when |j0| falls below the floor.
    """
    floor = DEFAULT_NODE_FLOOR * current_scale(spec) if node_floor is None else node_floor
    f = metric_function(r, params)
    cur = single_current(t, tortoise_from_radial(r, params), spec)
    _check_floor(cur.j0, floor, "velocity_single")
    v = f * cur.ratio
    return float(v) if np.ndim(v) == 0 else v


def two_photon_currents(ev, spec):
    """
    Both conserved currents of the symmetrised two-photon state.

    Accepts general (t1, t2); each current is differentiated in its own photon's
    (t_i, r_i*) with the other event held fixed.
    Args:
        ev (TwoPhotonEvent): the two events.
        spec (WavepacketSpec): shared k0 and sigma.
    Returns:
        TwoPhotonCurrents
    """
    t1, r1, t2, r2 = event_arrays(ev)
    u1, v1, u2, v2 = t1 - r1, t1 + r1, t2 - r2, t2 + r2
    direct = gaussian_term(u1, spec) * gaussian_term(v2, spec)
    exchanged = gaussian_term(u2, spec) * gaussian_term(v1, spec)
    psi = (direct + exchanged) / np.sqrt(2.0)
    conj = np.conj(psi)

    direct_u1 = envelope_rate(u1, spec) * direct
    exchanged_v1 = envelope_rate(v1, spec) * exchanged
    direct_v2 = envelope_rate(v2, spec) * direct
    exchanged_u2 = envelope_rate(u2, spec) * exchanged
    scale = np.sqrt(2.0)
    d_t1 = (-direct_u1 - exchanged_v1) / scale
    d_r1 = (direct_u1 - exchanged_v1) / scale
    d_t2 = (-exchanged_u2 - direct_v2) / scale
    d_r2 = (exchanged_u2 - direct_v2) / scale
    return TwoPhotonCurrents(
        j1_0=-2.0 * np.imag(conj * d_t1),
        j1_1=2.0 * np.imag(conj * d_r1),
        j2_0=-2.0 * np.imag(conj * d_t2),
        j2_1=2.0 * np.imag(conj * d_r2),
    )


def velocity_two(ev, params, spec, node_floor=None):
    """
    Per-photon Schwarzschild velocities v_i = f(r_i) j_i^1 / j_i^0 on a common timeslice.
    Returns:
        tuple: (v1, v2).
    Raises:
        NodeProximityError: when either |j_i^0| is below the floor.
    """
    if not ev.is_equal_time:
        raise ValueError("velocity_two evaluates both photons on a single timeslice (t1 == t2)")
    floor = DEFAULT_NODE_FLOOR * two_photon_current_scale(spec) if node_floor is None else node_floor
    cur = two_photon_currents(ev, spec)
    _check_floor(cur.j1_0, floor, "velocity_two photon 1")
    _check_floor(cur.j2_0, floor, "velocity_two photon 2")
    f1 = metric_function_from_tortoise(ev.r1_star, params)
    f2 = metric_function_from_tortoise(ev.r2_star, params)
    return f1 * cur.photon(1).ratio, f2 * cur.photon(2).ratio


def continuity_residual(t, r_star, spec, h):
    """
    Central-difference estimate of d_t j0 + d_r* j1 at (t, r*).
    Args:
        h (float): step in both t and r*, h > 0.
    Returns:
        float or ndarray: residual; zero up to O(h^2) truncation and rounding.
    """
    if h <= 0:
        raise ValueError(f"step must be positive, got {h}")
    t = np.asarray(t, dtype=float)
    r_star = np.asarray(r_star, dtype=float)
    dj0 = single_current(t + h, r_star, spec).j0 - single_current(t - h, r_star, spec).j0
    dj1 = single_current(t, r_star + h, spec).j1 - single_current(t, r_star - h, spec).j1
    residual = (dj0 + dj1) / (2.0 * h)
    return float(residual) if residual.ndim == 0 else residual


def two_photon_continuity_residual(ev, spec, h, photon):
    """Residual of d_{t_i} j_i^0 + d_{r_i*} j_i^1 with the other photon's event fixed."""
    if h <= 0:
        raise ValueError(f"step must be positive, got {h}")
    if photon not in (1, 2):
        raise ValueError(f"photon index must be 1 or 2, got {photon}")
    t1, r1, t2, r2 = event_arrays(ev)

    def current_at(dt, dr):
        if photon == 1:
            shifted = TwoPhotonEvent(t1 + dt, r1 + dr, t2, r2)
        else:
            shifted = TwoPhotonEvent(t1, r1, t2 + dt, r2 + dr)
        return two_photon_currents(shifted, spec).photon(photon)

    dj0 = current_at(h, 0.0).j0 - current_at(-h, 0.0).j0
    dj1 = current_at(0.0, h).j1 - current_at(0.0, -h).j1
    return (dj0 + dj1) / (2.0 * h)


def printed_single_current(t, r_star, spec):
    """
    Balanced-superposition closed forms as printed, scaled by k0.

    j1 = sqrt(2/pi) sigma [rho+ - rho- + J1 sqrt(rho+ rho-)] and
    j0 = sqrt(2/pi) sigma [rho+ + rho- + J0 sqrt(rho+ rho-)] with
    rho+- = exp(-2 (t -+ r*)^2 sigma^2), J1 = (4 sigma^2 t / k0) sin(2 k0 r*),
    J0 = cos(2 k0 r*) - (2 sigma^2 t / k0) sin(2 k0 r*). No alpha enters.
    """
    t = np.asarray(t, dtype=float)
    r_star = np.asarray(r_star, dtype=float)
    k0, sigma = spec.k0, spec.sigma
    rho_out = np.exp(-2.0 * (t - r_star) ** 2 * sigma ** 2)
    rho_in = np.exp(-2.0 * (t + r_star) ** 2 * sigma ** 2)
    cross = np.sqrt(rho_out * rho_in)
    phase = 2.0 * k0 * r_star
    big_j1 = 4.0 * sigma ** 2 * t / k0 * np.sin(phase)
    big_j0 = np.cos(phase) - 2.0 * sigma ** 2 * t / k0 * np.sin(phase)
    prefactor = k0 * np.sqrt(2.0 / np.pi) * sigma
    return CurrentSample(
        j0=prefactor * (rho_out + rho_in + big_j0 * cross),
        j1=prefactor * (rho_out - rho_in + big_j1 * cross),
    )


def printed_two_photon_currents(ev, spec):
    """Printed two-photon current components in U_i = t_i - r_i*, V_i = t_i + r_i*."""
    t1, r1, t2, r2 = event_arrays(ev)
    u1, v1, u2, v2 = t1 - r1, t1 + r1, t2 - r2, t2 + r2
    k0, s2 = spec.k0, spec.sigma ** 2
    pref = 2.0 * s2 * k0 / np.pi
    coupling = np.exp(-(v1 ** 2 + v2 ** 2) * s2 - (u1 ** 2 + u2 ** 2) * s2)
    phase = k0 * (u1 - u2 - v1 + v2)
    lobe_a = np.exp(-2.0 * s2 * (v1 ** 2 + u2 ** 2))
    lobe_b = np.exp(-2.0 * s2 * (v2 ** 2 + u1 ** 2))
    j1_0 = pref * (lobe_a + lobe_b + 2.0 * coupling * np.cos(phase)
                   + 2.0 * s2 / k0 * coupling * (v1 - u1) * np.sin(phase))
    j2_0 = pref * (lobe_b + lobe_a + 2.0 * coupling * np.cos(phase)
                   - 2.0 * s2 / k0 * coupling * (v2 - u2) * np.sin(phase))
    j1_1 = pref * (lobe_b - lobe_a + 2.0 * s2 / k0 * coupling * (v1 + u1) * np.sin(-phase))
    j2_1 = pref * (lobe_a - lobe_b - 2.0 * s2 / k0 * coupling * (v2 + u2) * np.sin(-phase))
    return TwoPhotonCurrents(j1_0=j1_0, j1_1=j1_1, j2_0=j2_0, j2_1=j2_1)
