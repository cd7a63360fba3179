"""
Trajectory ensembles for the single- and two-photon velocity fields.

Initial conditions are drawn from the quantum density by inverse-CDF sampling on
a tortoise-coordinate grid, then integrated in (t, r*) where the flow is O(1)
everywhere on the exterior. Schwarzschild r, velocities and currents are attached
per stored sample.
"""
import logging
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.integrate import cumulative_trapezoid, trapezoid
from scipy.interpolate import interp1d
from scipy.stats import kstest
from tqdm import tqdm

from photonpaths_components.currents import single_current, two_photon_currents
from photonpaths_components.geometry import (
    SpacetimeParams,
    metric_function_from_tortoise,
    null_velocity_roots,
    radial_from_tortoise,
    root_sign,
    shift_from_velocity_ratio,
    warp_metric_at_tortoise,
)
from photonpaths_components.integrator import COMPLETED, NODE_ABORTED, integrate_lockstep, integrate_reference
from photonpaths_components.wavefunction import TwoPhotonEvent, negative_frequency_leakage, two_photon_psi

logger = logging.getLogger(__name__)

HORIZON_ASYMPTOTIC = "horizon-asymptotic"
# below this f(r) the radius is no longer resolvable from r* in double precision
HORIZON_F_FLOOR = 1e-12

SINGLE = "single"
TWO_PHOTON = "two-photon"
KG_CURRENT = "kg-current"
METRIC_NULL = "metric-null"
QUANTILE = "quantile"
PSEUDORANDOM = "pseudorandom"
PSI_DENSITY = "psi"
CURRENT_DENSITY = "current"

SCENARIOS = (SINGLE, TWO_PHOTON)
ROUTES = (KG_CURRENT, METRIC_NULL)
STRATEGIES = (QUANTILE, PSEUDORANDOM)
TWO_PHOTON_DENSITIES = (PSI_DENSITY, CURRENT_DENSITY)

WINDOW_LEAKAGE_LIMIT = 1e-6
_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


class WindowTooSmallError(ValueError):
    """Raised when more than the allowed density mass lies outside the sampling window."""
    pass


@dataclass(frozen=True)
class EnsembleConfig:
    n_traj: int = 200
    t0: float = -3.0
    t1: float = 3.0
    seed: int = 0
    sampling: str = QUANTILE
    route: str = KG_CURRENT
    scenario: str = SINGLE
    n_times: int = 61
    window: tuple = None
    resolution: int = 2048
    resolution_2d: int = 256
    rtol: float = 1e-9
    atol: float = 1e-12
    node_floor: float = 1e-12
    two_photon_density: str = PSI_DENSITY

    def __post_init__(self):
        if self.n_traj < 1:
            raise ValueError(f"n_traj must be at least 1, got {self.n_traj}")
        if not self.t1 > self.t0:
            raise ValueError(f"t1 must exceed t0, got t0={self.t0}, t1={self.t1}")
        if self.n_times < 2:
            raise ValueError("n_times must be at least 2")
        for name, value, allowed in (("sampling", self.sampling, STRATEGIES),
                                     ("route", self.route, ROUTES),
                                     ("scenario", self.scenario, SCENARIOS),
                                     ("two_photon_density", self.two_photon_density, TWO_PHOTON_DENSITIES)):
            if value not in allowed:
                raise ValueError(f"{name} must be one of {allowed}, got '{value}'")

    def sample_times(self):
        return np.linspace(self.t0, self.t1, self.n_times)


@dataclass
class Trajectory:
    """One integrated worldline, or a coupled photon pair when r_star has two columns.

    Sample columns t (k,) and r_star, r, v, j0, j1 (k, d).
    """
    traj_id: int
    t: np.ndarray
    r_star: np.ndarray
    r: np.ndarray
    v: np.ndarray
    j0: np.ndarray
    j1: np.ndarray
    status: str

    @property
    def dimension(self):
        return self.r_star.shape[1]

    def samples(self, photon=0):
        """Yields (t, r_star, r, v, j0, j1) tuples for one photon column."""
        for i in range(self.t.size):
            yield (self.t[i], self.r_star[i, photon], self.r[i, photon],
                   self.v[i, photon], self.j0[i, photon], self.j1[i, photon])


@dataclass
class TrajectoryBundle:
    trajectories: list
    sample_times: np.ndarray
    failures: list = field(default_factory=list)
    provenance: dict = field(default_factory=dict)

    def initial_positions(self):
        return np.array([tr.r_star[0] for tr in self.trajectories])

    def positions_at(self, index):
        """r* of every trajectory at sample index; NaN for trajectories that stopped earlier."""
        dim = self.trajectories[0].dimension if self.trajectories else 1
        result = np.full((len(self.trajectories), dim), np.nan)
        for i, tr in enumerate(self.trajectories):
            if index < tr.t.size:
                result[i] = tr.r_star[index]
        return result


@dataclass(frozen=True)
class DensityGrid:
    t: float
    r_star: np.ndarray
    r: np.ndarray
    j0: np.ndarray
    j1: np.ndarray
    v: np.ndarray

    def mass(self):
        return float(trapezoid(self.j0, self.r_star))


@dataclass(frozen=True)
class DensityGrid2D:
    t: float
    r1_star: np.ndarray
    r2_star: np.ndarray
    density: np.ndarray


class VelocityField:
    """
    Tortoise-coordinate flow dr*/dt for the ensemble integrator.

    The kg-current route returns j1/j0 directly. The metric-null route builds the
    guiding metric with v_s = (|j1/j0| - 1) sgn(j1/j0) and takes the null root
    selected by sgn(j1/j0), divided by f(r).
    """

    def __init__(self, spec, params, scenario=SINGLE, route=KG_CURRENT):
        if scenario not in SCENARIOS:
            raise ValueError(f"unknown scenario '{scenario}'")
        if route not in ROUTES:
            raise ValueError(f"unknown route '{route}'")
        self.spec = spec
        self.params = params
        self.scenario = scenario
        self.route = route

    @property
    def dimension(self):
        return 1 if self.scenario == SINGLE else 2

    def currents(self, t, y):
        t = np.asarray(t, dtype=float)
        y = np.asarray(y, dtype=float)
        if self.scenario == SINGLE:
            cur = single_current(t[:, None], y, self.spec)
            return cur.j0, cur.j1
        cur = two_photon_currents(TwoPhotonEvent.equal_time(t, y[:, 0], y[:, 1]), self.spec)
        return np.stack([cur.j1_0, cur.j2_0], axis=1), np.stack([cur.j1_1, cur.j2_1], axis=1)

    def tortoise_rate(self, j0, j1, y):
        with np.errstate(divide='ignore', invalid='ignore'):
            rho = j1 / j0
        if self.route == KG_CURRENT:
            return rho
        v_s = shift_from_velocity_ratio(rho)
        components = warp_metric_at_tortoise(v_s, y, self.params)
        lower, upper = null_velocity_roots(components)
        dr_dt = np.where(np.asarray(rho) >= 0, upper, lower)
        f = metric_function_from_tortoise(y, self.params)
        with np.errstate(divide='ignore', invalid='ignore'):
            return np.where(f > 0, dr_dt / f, v_s + root_sign(rho))

    def __call__(self, t, y):
        j0, j1 = self.currents(t, y)
        return self.tortoise_rate(j0, j1, y), j0

    def diagnostics(self, t, y):
        """(r, v, j0, j1) at stored samples; v = f(r) j1/j0 is the Schwarzschild velocity."""
        j0, j1 = self.currents(t, y)
        r = radial_from_tortoise(y, self.params)
        f = metric_function_from_tortoise(y, self.params)
        with np.errstate(divide='ignore', invalid='ignore'):
            v = f * (j1 / j0)
        return r, v, j0, j1


def default_window(t0, t1, spec):
    """Symmetric r* window holding both packets over [t0, t1] with 3/sigma of margin."""
    half = 3.0 / spec.sigma + max(abs(t1 - t0), abs(t0), abs(t1))
    return (-half, half)


def _uniforms(n, strategy, seed, per_draw=1):
    """(n, per_draw) uniforms; each draw owns a seed-derived substream."""
    if strategy == QUANTILE:
        u = (np.arange(n) + 0.5) / n
        if per_draw == 1:
            return u[:, None]
        return np.column_stack([u, np.mod((np.arange(n) + 0.5) * _GOLDEN, 1.0)])
    if strategy == PSEUDORANDOM:
        children = np.random.SeedSequence(seed).spawn(n)
        return np.array([np.random.default_rng(child).random(per_draw) for child in children])
    raise ValueError(f"unknown sampling strategy '{strategy}'")


def tabulated_cdf(grid, density):
    """Normalised cumulative trapezoid of a non-negative density."""
    cdf = cumulative_trapezoid(np.clip(density, 0.0, None), grid, initial=0.0)
    if cdf[-1] <= 0:
        raise WindowTooSmallError("density has no mass on the window")
    return cdf / cdf[-1]


def inverse_cdf(grid, cdf, u):
    cdf_unique, first = np.unique(cdf, return_index=True)
    lookup = interp1d(cdf_unique, grid[first], bounds_error=False,
                      fill_value=(grid[first[0]], grid[first[-1]]), assume_sorted=True)
    return lookup(u)


def _invert_rows(grid, cdf_rows, v):
    res = grid.size
    idx = np.clip(np.sum(cdf_rows < v[:, None], axis=1), 1, res - 1)
    rows = np.arange(cdf_rows.shape[0])
    lo = cdf_rows[rows, idx - 1]
    hi = cdf_rows[rows, idx]
    with np.errstate(divide='ignore', invalid='ignore'):
        frac = np.where(hi > lo, (v - lo) / (hi - lo), 0.5)
    return grid[idx - 1] + frac * (grid[idx] - grid[idx - 1])


def ks_distance(samples, grid, cdf):
    """One-sample Kolmogorov-Smirnov distance against a tabulated CDF."""
    return float(kstest(np.asarray(samples, dtype=float), lambda x: np.interp(x, grid, cdf)).statistic)


def _check_window_1d(density_fn, window, resolution):
    lo, hi = window
    pad = 0.5 * (hi - lo)
    wide = np.linspace(lo - pad, hi + pad, 2 * resolution)
    dens = np.clip(density_fn(wide), 0.0, None)
    total = trapezoid(dens, wide)
    inside = (wide >= lo) & (wide <= hi)
    outside = 1.0 - trapezoid(dens[inside], wide[inside]) / total
    if outside > WINDOW_LEAKAGE_LIMIT:
        raise WindowTooSmallError(
            f"{outside:.2e} of the density lies outside window {window} (limit {WINDOW_LEAKAGE_LIMIT:g})")


def single_density(t, r_star, spec):
    return single_current(t, r_star, spec).j0


def sample_initial_single(t0, spec, n, strategy, seed, window=None, resolution=2048):
    """
    Draws n tortoise positions from the normalised density j0(t0, r*).
    Args:
        t0 (float): sampling time.
        spec (WavepacketSpec): wavepacket parameters.
        n (int): number of samples.
        strategy (str): 'quantile' places sample i at CDF quantile (i + 1/2)/n,
            'pseudorandom' inverts seeded uniforms.
        seed (int): root seed for the pseudorandom substreams.
        window (tuple, optional): (lo, hi) in r*; defaults to default_window(t0, t0, spec).
        resolution (int): grid points.
    Returns:
        ndarray: shape (n,).
    Raises:
        WindowTooSmallError: if more than 1e-6 of the mass lies outside the window.
    """
    window = window or default_window(t0, t0, spec)
    _check_window_1d(lambda x: single_density(t0, x, spec), window, resolution)
    grid = np.linspace(window[0], window[1], resolution)
    cdf = tabulated_cdf(grid, single_density(t0, grid, spec))
    return inverse_cdf(grid, cdf, _uniforms(n, strategy, seed)[:, 0])


def joint_density(t, r1_star, r2_star, spec, kind=PSI_DENSITY):
    """|psi_M|^2, or the exchange-symmetric current density (j1^0 + j2^0)/2 clipped at zero."""
    ev = TwoPhotonEvent.equal_time(t, r1_star, r2_star)
    if kind == PSI_DENSITY:
        return np.abs(two_photon_psi(ev, spec)) ** 2
    if kind == CURRENT_DENSITY:
        cur = two_photon_currents(ev, spec)
        return np.clip(0.5 * (cur.j1_0 + cur.j2_0), 0.0, None)
    raise ValueError(f"unknown two-photon density '{kind}'")


def sample_initial_two(t0, spec, n, strategy, seed, window=None, resolution_2d=256, density=PSI_DENSITY):
    """
    Draws n photon pairs (r1*, r2*) from the joint density at t0.

    r1* comes from the grid marginal, r2* from the exact conditional row at the
    drawn r1*. The quantile strategy pairs marginal quantiles with a golden-ratio
    sequence for the conditional.
    Returns:
        ndarray: shape (n, 2).
    """
    window = window or default_window(t0, t0, spec)
    lo, hi = window
    pad = 0.5 * (hi - lo)
    wide = np.linspace(lo - pad, hi + pad, 2 * resolution_2d)
    wide_dens = joint_density(t0, wide[:, None], wide[None, :], spec, density)
    total = trapezoid(trapezoid(wide_dens, wide, axis=1), wide)
    inside = (wide >= lo) & (wide <= hi)
    inner = trapezoid(trapezoid(wide_dens[np.ix_(inside, inside)], wide[inside], axis=1), wide[inside])
    outside = 1.0 - inner / total
    if outside > WINDOW_LEAKAGE_LIMIT:
        raise WindowTooSmallError(
            f"{outside:.2e} of the joint density lies outside window {window} (limit {WINDOW_LEAKAGE_LIMIT:g})")

    grid = np.linspace(lo, hi, resolution_2d)
    dens = joint_density(t0, grid[:, None], grid[None, :], spec, density)
    marginal = trapezoid(dens, grid, axis=1)
    u = _uniforms(n, strategy, seed, per_draw=2)
    r1 = inverse_cdf(grid, tabulated_cdf(grid, marginal), u[:, 0])
    rows = joint_density(t0, r1[:, None], grid[None, :], spec, density)
    row_cdf = cumulative_trapezoid(rows, grid, axis=1, initial=0.0)
    row_cdf /= row_cdf[:, -1:]
    r2 = _invert_rows(grid, row_cdf, u[:, 1])
    return np.column_stack([r1, r2])


def _node_floor(config, spec, window):
    grid = np.linspace(window[0], window[1], config.resolution)
    if config.scenario == SINGLE:
        peak = np.max(single_density(config.t0, grid, spec))
    else:
        coarse = np.linspace(window[0], window[1], config.resolution_2d)
        ev = TwoPhotonEvent.equal_time(config.t0, coarse[:, None], coarse[None, :])
        cur = two_photon_currents(ev, spec)
        peak = max(np.max(cur.j1_0), np.max(cur.j2_0))
    return config.node_floor * float(peak)


def _build_trajectories(result, times, field_fn, ids):
    trajectories = []
    for i, traj_id in enumerate(ids):
        k = int(result.recorded[i])
        t = times[:k]
        ys = result.y[i, :k, :]
        r, v, j0, j1 = field_fn.diagnostics(t, ys)
        status = result.status[i]
        if status == COMPLETED and np.any(metric_function_from_tortoise(ys, field_fn.params) < HORIZON_F_FLOOR):
            status = HORIZON_ASYMPTOTIC
        trajectories.append(Trajectory(traj_id=int(traj_id), t=t.copy(), r_star=ys.copy(), r=r, v=v,
                                       j0=j0, j1=j1, status=status))
    return trajectories


def integrate_trajectory(r_star0, t0, t1, field_fn, tol=(1e-9, 1e-12), sample_times=None,
                         node_floor=0.0, traj_id=0, solver=None):
    """
    Integrates one worldline (or one coupled pair) of dr*/dt from field_fn.
    Args:
        r_star0 (float or sequence): initial r*, one entry per photon.
        t0, t1 (float): time span, t1 > t0.
        field_fn (VelocityField): velocity field.
        tol (tuple): (rtol, atol) local error tolerances.
        sample_times (ndarray, optional): output times from t0 to t1; 101 evenly spaced by default.
        node_floor (float): absolute floor on j0.
        solver (str, optional): a solve_ivp method name ('RK45', 'DOP853', ...) to integrate
            with scipy instead of the lockstep Dormand-Prince engine.
    Returns:
        Trajectory
    """
    if not t1 > t0:
        raise ValueError("integration runs forward in time only (t1 > t0)")
    times = np.linspace(t0, t1, 101) if sample_times is None else np.asarray(sample_times, dtype=float)
    y0 = np.atleast_1d(np.asarray(r_star0, dtype=float)).reshape(1, -1)
    rtol, atol = tol
    if solver is None:
        result = integrate_lockstep(field_fn, y0, times, rtol=rtol, atol=atol, node_floor=node_floor)
    else:
        result = integrate_reference(field_fn, y0, times, rtol=rtol, atol=atol, node_floor=node_floor,
                                     method=solver)
    return _build_trajectories(result, times, field_fn, [traj_id])[0]


def run_ensemble(config, spec, params, progress=False, initial=None):
    """
    Samples initial conditions and integrates every trajectory independently.
    Args:
        config (EnsembleConfig): ensemble settings.
        spec (WavepacketSpec): wavepacket parameters.
        params (SpacetimeParams): black-hole mass.
        progress (bool): show a tqdm bar on stderr.
        initial (ndarray, optional): explicit initial r* of shape (n,) or (n, 2), bypassing sampling.
    Returns:
        TrajectoryBundle: failures list the node-aborted trajectories without aborting the bundle.
    """
    window = config.window or default_window(config.t0, config.t1, spec)
    if initial is not None:
        y0 = np.asarray(initial, dtype=float).reshape(len(initial), -1)
    elif config.scenario == SINGLE:
        y0 = sample_initial_single(config.t0, spec, config.n_traj, config.sampling, config.seed,
                                   window, config.resolution)[:, None]
    else:
        y0 = sample_initial_two(config.t0, spec, config.n_traj, config.sampling, config.seed,
                                window, config.resolution_2d, config.two_photon_density)

    floor = _node_floor(config, spec, window)
    field_fn = VelocityField(spec, params, config.scenario, config.route)
    times = config.sample_times()
    logger.info("Integrating %d %s trajectories (%s route) over t in [%g, %g]",
                y0.shape[0], config.scenario, config.route, config.t0, config.t1)

    with tqdm(total=y0.shape[0], desc=f"{config.scenario}/{config.route}", unit="traj",
              disable=not progress, leave=False) as bar:
        result = integrate_lockstep(field_fn, y0, times, rtol=config.rtol, atol=config.atol,
                                    node_floor=floor, progress=bar.update)

    trajectories = _build_trajectories(result, times, field_fn, range(y0.shape[0]))
    failures = [{"traj_id": tr.traj_id, "status": tr.status}
                for tr in trajectories if tr.status == NODE_ABORTED]
    if failures:
        logger.warning("%d of %d trajectories were node-aborted", len(failures), len(trajectories))
    logger.info("Ensemble done: %d steps, %d rejected", int(result.steps.sum()), int(result.rejected.sum()))

    provenance = asdict(config)
    provenance.update({
        "window": list(window),
        "node_floor_absolute": floor,
        "mass": params.m,
        "k0": spec.k0,
        "sigma": spec.sigma,
        "alpha": spec.alpha,
        "negative_frequency_leakage": negative_frequency_leakage(spec),
    })
    return TrajectoryBundle(trajectories=trajectories, sample_times=times, failures=failures,
                            provenance=provenance)


def density_grid(t, window, resolution, spec, scenario=SINGLE, params=None, density=PSI_DENSITY):
    """
    Current samples on a uniform r* grid for plotting underlays.
    Returns:
        DensityGrid for the single photon (with Schwarzschild r and velocity columns),
        DensityGrid2D holding the joint density for two photons.
    """
    if resolution < 2:
        raise ValueError(f"resolution must be at least 2, got {resolution}")
    params = params or SpacetimeParams()
    grid = np.linspace(window[0], window[1], resolution)
    if scenario == TWO_PHOTON:
        dens = joint_density(t, grid[:, None], grid[None, :], spec, density)
        return DensityGrid2D(t=float(t), r1_star=grid, r2_star=grid.copy(), density=dens)
    cur = single_current(t, grid, spec)
    f = metric_function_from_tortoise(grid, params)
    with np.errstate(divide='ignore', invalid='ignore'):
        v = np.where(cur.j0 > 0, f * cur.j1 / cur.j0, np.nan)
    return DensityGrid(t=float(t), r_star=grid, r=radial_from_tortoise(grid, params),
                       j0=cur.j0, j1=cur.j1, v=v)
