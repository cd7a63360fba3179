"""
Radial Schwarzschild geometry in geometric units (G = c = 1).

Covers the metric function f(r) = 1 - 2m/r, the tortoise coordinate and its
Lambert-W inverse, and the (t, r) block of the Schwarzschild-Alcubierre
guiding metric together with its null coordinate velocities.
"""
import logging
from dataclasses import dataclass

import numpy as np

logger = logging.getLogger(__name__)

_INV_E = float(np.exp(-1.0))
# Above this argument the inverse tortoise map works with log(W) instead of W(e^y).
_LOG_SPACE_THRESHOLD = 1.0


class DomainError(ValueError):
    """Raised when an evaluation falls outside the exterior region or a function's domain."""
    pass


@dataclass(frozen=True)
class SpacetimeParams:
    """Black-hole mass m (a length). The horizon sits at r = 2m."""
    m: float = 1.0

    def __post_init__(self):
        if not np.isfinite(self.m) or self.m < 0:
            raise DomainError(f"mass must be finite and non-negative, got m={self.m}")

    @property
    def horizon(self):
        return 2.0 * self.m

    @property
    def is_flat(self):
        return self.m == 0


@dataclass(frozen=True)
class MetricComponents:
    """(g_tt, g_rr, g_tr) of the 2D (t, r) block plus the shift scalar v_s.

    Fields may be floats or equally shaped numpy arrays.
    """
    g_tt: object
    g_rr: object
    g_tr: object
    v_s: object

    def determinant(self):
        return self.g_tt * self.g_rr - self.g_tr ** 2


@dataclass(frozen=True)
class RadialEvent:
    """An event (t, r) carrying its tortoise coordinate.

    Build with from_radius or from_tortoise so that r and r_star stay consistent.
    """
    t: float
    r: float
    r_star: float

    @classmethod
    def from_radius(cls, t, r, params):
        return cls(t=float(t), r=float(r), r_star=float(tortoise_from_radial(r, params)))

    @classmethod
    def from_tortoise(cls, t, r_star, params):
        return cls(t=float(t), r=float(radial_from_tortoise(r_star, params)), r_star=float(r_star))


def _as_output(values, like):
    """Returns a Python float for scalar input, the array otherwise."""
    return float(values) if np.ndim(like) == 0 else values


def _require_exterior(r, params):
    r_arr = np.asarray(r, dtype=float)
    bound = params.horizon
    if np.any(~np.isfinite(r_arr)):
        raise DomainError("radius must be finite")
    if np.any(r_arr <= bound):
        worst = float(np.min(r_arr))
        if params.is_flat:
            raise DomainError(f"radius must be positive in flat space, got r={worst}")
        raise DomainError(f"radius r={worst} is not outside the horizon r=2m={bound}")
    return r_arr


def horizon_radius(params):
    return params.horizon


def metric_function(r, params):
    """
    Evaluates f(r) = 1 - 2m/r on the exterior.
    Args:
        r (float or ndarray): Schwarzschild radius, r > 2m (r > 0 when m = 0).
        params (SpacetimeParams): Mass of the black hole.
    Returns:
        float or ndarray: f(r) in (0, 1].
    Raises:
        DomainError: if any r lies on or inside the horizon.
    """
    r_arr = _require_exterior(r, params)
    f = (r_arr - params.horizon) / r_arr
    return _as_output(f, r)


def tortoise_from_radial(r, params):
    """
    Maps Schwarzschild r to the tortoise coordinate r* = r + 2m ln(r/2m - 1).
    Args:
        r (float or ndarray): Schwarzschild radius, r > 2m.
        params (SpacetimeParams): Mass of the black hole.
    Returns:
        float or ndarray: tortoise coordinate, strictly increasing in r.
    """
    r_arr = _require_exterior(r, params)
    if params.is_flat:
        return _as_output(r_arr.copy(), r)
    two_m = params.horizon
    # r - 2m is exact near the horizon, r/2m - 1 is not
    r_star = r_arr + two_m * np.log((r_arr - two_m) / two_m)
    return _as_output(r_star, r)


def lambert_w0(x, tol=1e-16, max_iter=64):
    """
    Principal branch of the Lambert W function by Halley iteration.
    Args:
        x (float or ndarray): argument, x >= -1/e.
        tol (float): stopping threshold on the relative Halley correction.
        max_iter (int): iteration cap.
    Returns:
        float or ndarray: w with w * exp(w) = x and w >= -1.
    Raises:
        DomainError: if any x < -1/e or is NaN.
    """
    x_arr = np.asarray(x, dtype=float)
    if np.any(np.isnan(x_arr)):
        raise DomainError("lambert_w0 argument is NaN")
    if np.any(x_arr < -_INV_E):
        raise DomainError(f"lambert_w0 requires x >= -1/e, got {float(np.min(x_arr))}")

    x_flat = np.atleast_1d(x_arr).ravel()
    with np.errstate(divide='ignore', invalid='ignore', over='ignore'):
        # distance from the branch point; p -> 0 at x = -1/e, inf for x near the float maximum
        p = np.sqrt(np.maximum(2.0 * (np.e * x_flat + 1.0), 0.0))
        branch_series = -1.0 + p - p ** 2 / 3.0 + 11.0 / 72.0 * p ** 3 - 43.0 / 540.0 * p ** 4
        log1px = np.log1p(np.maximum(x_flat, -0.3))
        winitzki = log1px * (1.0 - np.log1p(log1px) / (2.0 + log1px))
    w = np.where(x_flat < -0.3, branch_series, winitzki)
    w = np.where(np.isinf(x_flat), np.inf, w)

    active = (p >= 1e-4) & np.isfinite(x_flat)
    w = np.where(active, w, np.where(np.isinf(x_flat), np.inf, branch_series))
    with np.errstate(divide='ignore', invalid='ignore', over='ignore'):
        for _ in range(max_iter):
            if not np.any(active):
                break
            wa = w[active]
            ew = np.exp(wa)
            resid = wa * ew - x_flat[active]
            wp1 = wa + 1.0
            step = resid / (ew * wp1 - (wa + 2.0) * resid / (2.0 * wp1))
            step = np.where(np.isfinite(step), step, 0.0)
            w[active] = wa - step
            still = np.abs(step) > tol * (2.0 + np.abs(w[active]))
            idx = np.flatnonzero(active)
            active[idx[~still]] = False
        else:
            logger.debug("lambert_w0 hit the iteration cap for %d points", int(active.sum()))

    w = w.reshape(np.shape(x_arr)) if np.ndim(x_arr) else w[0]
    return _as_output(w, x)


def _log_space_w0_of_exp(y):
    """W0(e^y) for y > 1 via Newton on w + ln w = y (never forms e^y)."""
    w = y - np.log(y)
    for _ in range(32):
        step = (w + np.log(w) - y) / (1.0 + 1.0 / w)
        w = w - step
        if np.all(np.abs(step) <= 1e-16 * np.abs(w)):
            break
    return w


def _w0_of_exp(y):
    y = np.asarray(y, dtype=float)
    flat = np.atleast_1d(y).ravel()
    out = np.empty_like(flat)
    large = flat > _LOG_SPACE_THRESHOLD
    if np.any(large):
        out[large] = _log_space_w0_of_exp(flat[large])
    if np.any(~large):
        out[~large] = lambert_w0(np.exp(flat[~large]))
    return out.reshape(y.shape)


def radial_from_tortoise(r_star, params):
    """
    Inverts the tortoise map on the exterior branch, r = 2m (1 + W0(exp(r*/2m - 1))).
    Args:
        r_star (float or ndarray): any finite tortoise coordinate.
        params (SpacetimeParams): Mass of the black hole.
    Returns:
        float or ndarray: Schwarzschild radius r > 2m (equal to r_star when m = 0).
    """
    rs_arr = np.asarray(r_star, dtype=float)
    if np.any(~np.isfinite(rs_arr)):
        raise DomainError("tortoise coordinate must be finite")
    if params.is_flat:
        return _as_output(rs_arr.copy(), r_star)
    two_m = params.horizon
    w = _w0_of_exp(rs_arr / two_m - 1.0)
    r = two_m * (1.0 + w)
    # far below the horizon scale W underflows; keep the result on the exterior
    r = np.maximum(r, np.nextafter(two_m, np.inf))
    return _as_output(r, r_star)


def metric_function_from_tortoise(r_star, params):
    """f(r(r*)) computed as W/(1+W), accurate where r - 2m is below rounding of r."""
    rs_arr = np.asarray(r_star, dtype=float)
    if params.is_flat:
        return _as_output(np.ones_like(rs_arr), r_star)
    w = _w0_of_exp(rs_arr / params.horizon - 1.0)
    return _as_output(w / (1.0 + w), r_star)


def effective_potential(r, params):
    """Radial potential U(r) = f'(r) f(r) / r = 2m f(r) / r^3 of the optical reduction."""
    r_arr = _require_exterior(r, params)
    f = (r_arr - params.horizon) / r_arr
    return _as_output(2.0 * params.m * f / r_arr ** 3, r)


def optical_parameter(r, k, params):
    """U(r)/k^2; the plane-wave reduction holds while this stays small."""
    return effective_potential(r, params) / np.asarray(k, dtype=float) ** 2


def shift_from_velocity_ratio(rho):
    """v_s = (|rho| - 1) sgn(rho) with sgn(0) = +1."""
    rho_arr = np.asarray(rho, dtype=float)
    v_s = (np.abs(rho_arr) - 1.0) * root_sign(rho_arr)
    return _as_output(v_s, rho)


def root_sign(rho):
    """Sign selecting the null root that carries the flow; sgn(0) = +1."""
    return np.where(np.asarray(rho) >= 0, 1.0, -1.0)


def _warp_components(v_s, f):
    v_s, f = np.broadcast_arrays(np.asarray(v_s, dtype=float), np.asarray(f, dtype=float))
    return -(1.0 - v_s ** 2) * f, 1.0 / f, -v_s, v_s.copy()


def warp_metric(v_s, r, params):
    """
    Hybrid metric block (g_tt, g_rr, g_tr) = (-(1 - v_s^2) f, 1/f, -v_s).
    Args:
        v_s (float or ndarray): shift scalar.
        r (float or ndarray): Schwarzschild radius, r > 2m.
        params (SpacetimeParams): Mass of the black hole.
    Returns:
        MetricComponents: determinant of the block is -1 for every (v_s, r).
    """
    f = np.asarray(metric_function(r, params))
    g_tt, g_rr, g_tr, v = _warp_components(v_s, f)
    if np.ndim(v_s) == 0 and np.ndim(r) == 0:
        return MetricComponents(float(g_tt), float(g_rr), float(g_tr), float(v))
    return MetricComponents(g_tt, g_rr, g_tr, v)


def warp_metric_at_tortoise(v_s, r_star, params):
    """warp_metric evaluated from the tortoise coordinate, f taken from W/(1+W)."""
    f = np.asarray(metric_function_from_tortoise(r_star, params))
    return MetricComponents(*_warp_components(v_s, f))


def schwarzschild_block(r, params):
    return warp_metric(0.0, r, params)


def adm_warp_general(u, b, lapse, base):
    """
    Warp construction g = (1 - a^2 + <b,b>) u u - u b - b u + g_base on the (t, r) block.
    Args:
        u (sequence): observer covector (u_t, u_r).
        b (sequence): shift covector (b_t, b_r); <b,b> uses the inverse base metric.
        lapse (float): warp lapse a.
        base (MetricComponents): Lorentzian base block.
    Returns:
        MetricComponents: with v_s read off as -g_tr.
    Raises:
        DomainError: if the base block is singular or not Lorentzian.
    """
    u_t, u_r = (np.asarray(c, dtype=float) for c in u)
    b_t, b_r = (np.asarray(c, dtype=float) for c in b)
    det = np.asarray(base.determinant(), dtype=float)
    if np.any(det == 0):
        raise DomainError("base metric block is singular")
    if np.any(det > 0):
        raise DomainError("base metric block is not Lorentzian")

    inv_tt = base.g_rr / det
    inv_rr = base.g_tt / det
    inv_tr = -base.g_tr / det
    b_norm = b_t * b_t * inv_tt + 2.0 * b_t * b_r * inv_tr + b_r * b_r * inv_rr
    coeff = 1.0 - np.asarray(lapse, dtype=float) ** 2 + b_norm

    g_tt = coeff * u_t * u_t - 2.0 * u_t * b_t + base.g_tt
    g_rr = coeff * u_r * u_r - 2.0 * u_r * b_r + base.g_rr
    g_tr = coeff * u_t * u_r - u_t * b_r - b_t * u_r + base.g_tr
    if np.ndim(g_tt) == 0:
        return MetricComponents(float(g_tt), float(g_rr), float(g_tr), float(-g_tr))
    return MetricComponents(g_tt, g_rr, g_tr, -g_tr)


def null_velocity_roots(components, r=None, params=None):
    """
    Both roots of g_tt + 2 g_tr v + g_rr v^2 = 0 for v = dr/dt.
    Args:
        components (MetricComponents): hybrid metric block.
        r (float or ndarray, optional): radius; checked against the exterior when given.
        params (SpacetimeParams, optional): needed with r.
    Returns:
        tuple: (lower, upper) roots, f (v_s - 1) and f (v_s + 1) for the warp block.
    """
    if r is not None and params is not None:
        _require_exterior(r, params)
    g_tt = np.asarray(components.g_tt, dtype=float)
    g_rr = np.asarray(components.g_rr, dtype=float)
    g_tr = np.asarray(components.g_tr, dtype=float)
    disc = np.sqrt(np.maximum(g_tr * g_tr - g_tt * g_rr, 0.0))
    # q never cancels: it takes the sign of g_tr (+ for g_tr = 0)
    q = -(g_tr + np.where(g_tr >= 0, 1.0, -1.0) * disc)
    with np.errstate(divide='ignore', invalid='ignore'):
        first = q / g_rr
        second = np.where(q != 0, g_tt / q, -first)
    lower = np.minimum(first, second)
    upper = np.maximum(first, second)
    if np.ndim(lower) == 0:
        return float(lower), float(upper)
    return lower, upper


def null_interval(components, dr_dt):
    """Line element per dt^2 along dr/dt; zero on null curves."""
    v = np.asarray(dr_dt, dtype=float)
    return components.g_tt + 2.0 * components.g_tr * v + components.g_rr * v * v
