"""
Single- and two-photon wavefunctions in tortoise coordinates.

In the optical approximation the radial modes are plane waves in (t, r*), so a
Gaussian momentum profile gives closed-form Gaussian wavepackets. The same
amplitudes are also available by direct quadrature over the momentum profile,
which the weak-value route uses as an independent oracle.
"""
import logging
import warnings
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np
from scipy.special import erfc

logger = logging.getLogger(__name__)

OPTICAL_RATIO_THRESHOLD = 5.0
_SQRT2 = np.sqrt(2.0)
_UNITARY_MEASURE = 1.0 / np.sqrt(2.0 * np.pi)
_CHUNK = 2048


class WavepacketSpecError(ValueError):
    """Raised for non-physical wavepacket parameters."""
    pass


class QuadratureConvergenceError(ArithmeticError):
    """Raised when doubling the quadrature nodes moves the result above tolerance."""
    pass


class OpticalApproximationWarning(UserWarning):
    pass


@dataclass(frozen=True)
class WavepacketSpec:
    """Gaussian momentum profile: central frequency k0, bandwidth sigma, outgoing weight alpha."""
    k0: float
    sigma: float = 1.0
    alpha: float = 0.5

    def __post_init__(self):
        if not (np.isfinite(self.k0) and self.k0 > 0):
            raise WavepacketSpecError(f"k0 must be positive, got {self.k0}")
        if not (np.isfinite(self.sigma) and self.sigma > 0):
            raise WavepacketSpecError(f"sigma must be positive, got {self.sigma}")
        if not 0.0 <= self.alpha <= 1.0:
            raise WavepacketSpecError(f"alpha must lie in [0, 1], got {self.alpha}")
        if self.k0 / self.sigma < OPTICAL_RATIO_THRESHOLD:
            message = (f"k0/sigma = {self.k0 / self.sigma:.3g} is below {OPTICAL_RATIO_THRESHOLD}; "
                       "the optical approximation is poorly justified")
            logger.warning(message)
            warnings.warn(message, OpticalApproximationWarning, stacklevel=3)

    @classmethod
    def from_ratio(cls, k0_over_sigma, sigma=1.0, alpha=0.5):
        return cls(k0=k0_over_sigma * sigma, sigma=sigma, alpha=alpha)

    @property
    def ratio(self):
        return self.k0 / self.sigma

    @property
    def amplitude(self):
        """Envelope peak (2 sigma^2 / pi)^(1/4) of each Gaussian term."""
        return (2.0 * self.sigma ** 2 / np.pi) ** 0.25

    def with_alpha(self, alpha):
        return replace(self, alpha=alpha)


@dataclass(frozen=True)
class QuadratureConfig:
    """Gauss-Legendre settings for momentum integrals.

    support_halfwidth is in units of sigma around each peak.
    """
    nodes: int = 512
    support_halfwidth: float = 12.0
    tolerance: float = 1e-9
    check_convergence: bool = True

    def __post_init__(self):
        if self.nodes < 8:
            raise ValueError(f"quadrature needs at least 8 nodes, got {self.nodes}")
        if self.support_halfwidth <= 0:
            raise ValueError("support_halfwidth must be positive")


@dataclass(frozen=True)
class TwoPhotonEvent:
    """Two events (t1, r1*) and (t2, r2*); fields may be arrays of equal shape."""
    t1: object
    r1_star: object
    t2: object
    r2_star: object

    @classmethod
    def equal_time(cls, t, r1_star, r2_star):
        return cls(t, r1_star, t, r2_star)

    def swapped(self):
        return TwoPhotonEvent(self.t2, self.r2_star, self.t1, self.r1_star)

    @property
    def is_equal_time(self):
        return bool(np.all(np.asarray(self.t1) == np.asarray(self.t2)))


@dataclass(frozen=True)
class TwoPhotonComponents:
    """psi1, psi2 and their frequency-weighted integrals psi1k, psi2k at both events."""
    psi1_at_1: object
    psi1_at_2: object
    psi2_at_1: object
    psi2_at_2: object
    psi1k_at_1: object
    psi1k_at_2: object
    psi2k_at_1: object
    psi2k_at_2: object

    def swapped(self):
        """Relabels the events: the components of the swapped TwoPhotonEvent."""
        return TwoPhotonComponents(
            self.psi1_at_2, self.psi1_at_1, self.psi2_at_2, self.psi2_at_1,
            self.psi1k_at_2, self.psi1k_at_1, self.psi2k_at_2, self.psi2k_at_1,
        )

    def symmetrised_psi(self):
        return (self.psi1_at_1 * self.psi2_at_2 + self.psi1_at_2 * self.psi2_at_1) / _SQRT2


def momentum_profile(k, sign, spec):
    """
    Gaussian profile f(k) = (2 pi sigma^2)^(-1/4) exp(-(k - sign k0)^2 / 4 sigma^2).
    Args:
        k (float or ndarray): frequency.
        sign (int): +1 for the outgoing profile, -1 for the ingoing one.
        spec (WavepacketSpec): wavepacket parameters.
    Returns:
        float or ndarray: profile value, unit L2 norm in k.
    """
    if sign not in (1, -1):
        raise ValueError(f"sign must be +1 or -1, got {sign}")
    k = np.asarray(k, dtype=float)
    norm = (2.0 * np.pi * spec.sigma ** 2) ** -0.25
    value = norm * np.exp(-(k - sign * spec.k0) ** 2 / (4.0 * spec.sigma ** 2))
    return float(value) if value.ndim == 0 else value


def gaussian_term(x, spec):
    """A exp(-x (i k0 + x sigma^2)) for a null coordinate x."""
    return spec.amplitude * np.exp(-x * (1j * spec.k0 + x * spec.sigma ** 2))


def envelope_rate(x, spec):
    return 1j * spec.k0 + 2.0 * spec.sigma ** 2 * x


def psi_single_components(t, r_star, spec):
    """Outgoing and ingoing terms of psi, weighted by sqrt(alpha) and sqrt(1 - alpha)."""
    t = np.asarray(t, dtype=float)
    r_star = np.asarray(r_star, dtype=float)
    outgoing = np.sqrt(spec.alpha) * gaussian_term(t - r_star, spec)
    ingoing = np.sqrt(1.0 - spec.alpha) * gaussian_term(t + r_star, spec)
    return outgoing, ingoing


def psi_single(t, r_star, spec):
    """Closed-form single-photon wavefunction at (t, r*)."""
    outgoing, ingoing = psi_single_components(t, r_star, spec)
    return outgoing + ingoing


def psi_single_gradient(t, r_star, spec):
    """
    Analytic (d/dt psi, d/dr* psi).
    Args:
        t (float or ndarray): coordinate time.
        r_star (float or ndarray): tortoise coordinate.
        spec (WavepacketSpec): wavepacket parameters.
    Returns:
        tuple: complex arrays (dpsi_dt, dpsi_drstar).
    """
    t = np.asarray(t, dtype=float)
    r_star = np.asarray(r_star, dtype=float)
    outgoing, ingoing = psi_single_components(t, r_star, spec)
    out_term = envelope_rate(t - r_star, spec) * outgoing
    in_term = envelope_rate(t + r_star, spec) * ingoing
    return -out_term - in_term, out_term - in_term


@lru_cache(maxsize=16)
def _legendre_rule(n):
    nodes, weights = np.polynomial.legendre.leggauss(n)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def _momentum_intervals(spec, cfg):
    """Integration intervals covering both profile peaks, split at k = 0."""
    half = cfg.support_halfwidth * spec.sigma
    upper = (spec.k0 - half, spec.k0 + half)
    if upper[0] <= -upper[0]:
        merged = [(-upper[1], upper[1])]
    else:
        merged = [(-upper[1], -upper[0]), upper]
    intervals = []
    for a, b in merged:
        if a < 0.0 < b:
            intervals.extend([(a, 0.0), (0.0, b)])
        else:
            intervals.append((a, b))
    return intervals


def _interval_nodes(intervals, n):
    x, w = _legendre_rule(n)
    ks, ws = [], []
    for a, b in intervals:
        half = 0.5 * (b - a)
        ks.append(0.5 * (a + b) + half * x)
        ws.append(half * w)
    return np.concatenate(ks), np.concatenate(ws)


def _single_moments(t, r_star, spec, intervals, n):
    """Returns (psi, p-amplitude, H-amplitude) integrals with n nodes per interval."""
    k, w = _interval_nodes(intervals, n)
    profile = (np.sqrt(spec.alpha) * momentum_profile(k, 1, spec)
               + np.sqrt(1.0 - spec.alpha) * momentum_profile(k, -1, spec))
    weights = w * profile * _UNITARY_MEASURE
    abs_k = np.abs(k)
    t_flat = t.ravel()
    r_flat = r_star.ravel()
    psi = np.empty(t_flat.shape, dtype=complex)
    p_amp = np.empty_like(psi)
    h_amp = np.empty_like(psi)
    for start in range(0, t_flat.size, _CHUNK):
        stop = start + _CHUNK
        phase = np.exp(-1j * np.outer(t_flat[start:stop], abs_k) + 1j * np.outer(r_flat[start:stop], k))
        psi[start:stop] = phase @ weights
        p_amp[start:stop] = phase @ (weights * k)
        h_amp[start:stop] = phase @ (weights * abs_k)
    return psi.reshape(t.shape), p_amp.reshape(t.shape), h_amp.reshape(t.shape)


def _converged(coarse, fine, cfg, scale, label):
    worst = max(float(np.max(np.abs(a - b), initial=0.0)) for a, b in zip(coarse, fine))
    if worst > cfg.tolerance * scale:
        raise QuadratureConvergenceError(
            f"{label}: node doubling changed the result by {worst:.3e} "
            f"(tolerance {cfg.tolerance:.1e} x {scale:.3e})")
    logger.debug("%s converged, doubling change %.3e", label, worst)


def psi_quadrature_moments(t, r_star, spec, quad_cfg=None):
    """
    Momentum-space integrals of psi, k psi and |k| psi at (t, r*).

    The phase is exp(-i|k|t + ikr*) with the unitary measure dk/sqrt(2 pi), so the
    three results equal psi, -i d/dr* psi and i d/dt psi of the closed form up to
    the truncated Gaussian tails.
    Args:
        t (float or ndarray): coordinate time.
        r_star (float or ndarray): tortoise coordinate.
        spec (WavepacketSpec): wavepacket parameters.
        quad_cfg (QuadratureConfig, optional): node count and support.
    Returns:
        tuple: complex arrays (psi, p_amplitude, h_amplitude).
    Raises:
        QuadratureConvergenceError: if node doubling disagrees above tolerance.
    """
    cfg = quad_cfg or QuadratureConfig()
    t, r_star = np.broadcast_arrays(np.asarray(t, dtype=float), np.asarray(r_star, dtype=float))
    intervals = _momentum_intervals(spec, cfg)
    result = _single_moments(t, r_star, spec, intervals, cfg.nodes)
    if cfg.check_convergence:
        fine = _single_moments(t, r_star, spec, intervals, 2 * cfg.nodes)
        _converged(result, fine, cfg, spec.amplitude * (1.0 + spec.k0), "single-photon quadrature")
        result = fine
    return result


def psi_quadrature(t, r_star, spec, quad_cfg=None):
    """Momentum-space quadrature of the single-photon wavefunction."""
    return psi_quadrature_moments(t, r_star, spec, quad_cfg)[0]


def negative_frequency_leakage(spec):
    """Probability mass of the outgoing profile on k < 0, 1/2 erfc(k0 / (sqrt(2) sigma))."""
    return float(0.5 * erfc(spec.k0 / (_SQRT2 * spec.sigma)))


def _profile_integrals(x, spec, cfg, n):
    """(int f+(k) e^{-ikx} dk, int k f+(k) e^{-ikx} dk) with the unitary measure."""
    half = cfg.support_halfwidth * spec.sigma
    k, w = _interval_nodes([(spec.k0 - half, spec.k0 + half)], n)
    weights = w * momentum_profile(k, 1, spec) * _UNITARY_MEASURE
    x_flat = x.ravel()
    plain = np.empty(x_flat.shape, dtype=complex)
    weighted = np.empty_like(plain)
    for start in range(0, x_flat.size, _CHUNK):
        stop = start + _CHUNK
        phase = np.exp(-1j * np.outer(x_flat[start:stop], k))
        plain[start:stop] = phase @ weights
        weighted[start:stop] = phase @ (weights * k)
    return plain.reshape(x.shape), weighted.reshape(x.shape)


def event_arrays(ev):
    return np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (ev.t1, ev.r1_star, ev.t2, ev.r2_star)))


def two_photon_psi(ev, spec):
    """
    Exchange-symmetric two-photon amplitude (psi1(R1) psi2(R2) + psi1(R2) psi2(R1)) / sqrt(2).

    psi1 is the outgoing packet in t - r*, psi2 the ingoing one in t + r*; both share k0 and sigma.
    """
    t1, r1, t2, r2 = event_arrays(ev)
    direct = gaussian_term(t1 - r1, spec) * gaussian_term(t2 + r2, spec)
    exchanged = gaussian_term(t2 - r2, spec) * gaussian_term(t1 + r1, spec)
    return (direct + exchanged) / _SQRT2


def two_photon_components(ev, spec, quad_cfg=None):
    """
    psi1, psi2, psi1k = -i d/dr* psi1 and psi2k = +i d/dr* psi2 at both events.
    Args:
        ev (TwoPhotonEvent): the two events.
        spec (WavepacketSpec): shared wavepacket parameters (alpha is not used).
        quad_cfg (QuadratureConfig, optional): evaluate by momentum quadrature instead
            of the closed form.
    Returns:
        TwoPhotonComponents
    """
    t1, r1, t2, r2 = event_arrays(ev)
    u1, v1, u2, v2 = t1 - r1, t1 + r1, t2 - r2, t2 + r2
    if quad_cfg is None:
        psi1_1, psi1_2 = gaussian_term(u1, spec), gaussian_term(u2, spec)
        psi2_1, psi2_2 = gaussian_term(v1, spec), gaussian_term(v2, spec)
        def weight(x):
            return spec.k0 - 2j * spec.sigma ** 2 * x

        return TwoPhotonComponents(
            psi1_1, psi1_2, psi2_1, psi2_2,
            weight(u1) * psi1_1, weight(u2) * psi1_2,
            weight(v1) * psi2_1, weight(v2) * psi2_2,
        )

    nulls = np.stack([u1, u2, v1, v2])
    plain, weighted = _profile_integrals(nulls, spec, quad_cfg, quad_cfg.nodes)
    if quad_cfg.check_convergence:
        fine = _profile_integrals(nulls, spec, quad_cfg, 2 * quad_cfg.nodes)
        _converged((plain, weighted), fine, quad_cfg, spec.amplitude * (1.0 + spec.k0),
                   "two-photon quadrature")
        plain, weighted = fine
    return TwoPhotonComponents(
        plain[0], plain[1], plain[2], plain[3],
        weighted[0], weighted[1], weighted[2], weighted[3],
    )
