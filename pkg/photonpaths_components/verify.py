"""
Verification checks for the weak-value, Klein-Gordon and guiding-metric routes.

Each check returns a CheckReport whose status is "pass" exactly when max_error is
within tolerance. Audits of externally printed closed forms report
"discrepancy-documented" instead of "fail" when they disagree with the derivation.
"""
import logging
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.stats import ks_2samp
from tqdm import tqdm

from photonpaths_components.currents import (
    continuity_residual,
    current_scale,
    printed_single_current,
    printed_two_photon_currents,
    single_current,
    two_photon_continuity_residual,
    two_photon_current_scale,
    two_photon_currents,
    velocity_single,
)
from photonpaths_components.dynamics import (
    QUANTILE,
    PSEUDORANDOM,
    SINGLE,
    TWO_PHOTON,
    KG_CURRENT,
    METRIC_NULL,
    EnsembleConfig,
    VelocityField,
    default_window,
    integrate_trajectory,
    ks_distance,
    run_ensemble,
    sample_initial_two,
    single_density,
    tabulated_cdf,
)
from photonpaths_components.geometry import (
    SpacetimeParams,
    metric_function_from_tortoise,
    optical_parameter,
    radial_from_tortoise,
    shift_from_velocity_ratio,
    warp_metric,
    warp_metric_at_tortoise,
    null_interval,
)
from photonpaths_components.integrator import COMPLETED
from photonpaths_components.wavefunction import (
    QuadratureConfig,
    TwoPhotonEvent,
    WavepacketSpec,
    negative_frequency_leakage,
)
from photonpaths_components.weakvalues import weak_single, weak_two

logger = logging.getLogger(__name__)

PASS = "pass"
FAIL = "fail"
DISCREPANCY = "discrepancy-documented"

# weak vs Klein-Gordon velocity: error relative to max(|v|, LIGHT_SPEED)
WEAK_KG_TOLERANCE = 1e-6
LIGHT_SPEED = 1.0
TWO_PHOTON_IDENTITY_TOLERANCE = 1e-10
ROUTE_TOLERANCE = 1e-6
NULL_INTERVAL_TOLERANCE = 1e-10
DETERMINANT_TOLERANCE = 1e-12
PRINTED_TOLERANCE = 1e-10
ORDER_TARGET = 2.0
ORDER_SLACK = 0.2
TRANSPORT_TOLERANCE = 0.02
EXCHANGE_TOLERANCE = 1e-12
EXCHANGE_KS_TOLERANCE = 0.03
OPTICAL_TOLERANCE = 1e-2
DENSITY_MASK = 1e-8


@dataclass
class CheckReport:
    name: str
    status: str
    max_error: float
    tolerance: float
    probe_count: int
    notes: str = ""
    details: dict = field(default_factory=dict)

    @classmethod
    def from_error(cls, name, max_error, tolerance, probe_count, notes="", details=None, on_failure=FAIL):
        status = PASS if max_error <= tolerance else on_failure
        report = cls(name=name, status=status, max_error=float(max_error), tolerance=float(tolerance),
                     probe_count=int(probe_count), notes=notes, details=details or {})
        level = logging.INFO if status == PASS else logging.WARNING
        logger.log(level, "%s: %s (max error %.3e, tolerance %.1e, %d probes)",
                   name, status, report.max_error, report.tolerance, report.probe_count)
        return report

    @property
    def failed(self):
        return self.status == FAIL

    def to_dict(self):
        return {
            "name": self.name,
            "status": self.status,
            "max_error": self.max_error,
            "tolerance": self.tolerance,
            "probe_count": self.probe_count,
            "notes": self.notes,
            "details": self.details,
        }


@dataclass(frozen=True)
class SuiteConfig:
    """Sizes and seeds for run_suite; the defaults are the acceptance sizes."""
    n_traj: int = 200
    n_transport: int = 5000
    n_events: int = 1000
    n_printed_events: int = 100
    n_probes: int = 20
    seed: int = 0
    rtol: float = 1e-9
    atol: float = 1e-12
    node_floor: float = 1e-12
    quad_cfg: QuadratureConfig = None
    progress: bool = False


def default_weak_grid(spec):
    """20 x 20 (t, r*) audit grid in units of 1/sigma."""
    return np.linspace(-2.0, 2.0, 20) / spec.sigma, np.linspace(-4.0, 4.0, 20) / spec.sigma


def _scaled_error(a, b, scale):
    """|a - b| / max(|b|, scale): relative where |b| exceeds scale, absolute in units of scale below it."""
    return np.abs(a - b) / np.maximum(np.abs(b), scale)


def check_weakvalue_kg_equivalence(spec, params, grid=None, current_fn=single_current, quad_cfg=None):
    """
    Compares the weak-value velocity f p_w/H_w with the Klein-Gordon velocity f j1/j0.
    Args:
        spec (WavepacketSpec): wavepacket parameters.
        params (SpacetimeParams): black-hole mass.
        grid (tuple, optional): (t values, r* values); default_weak_grid(spec) when omitted.
        current_fn (callable): current evaluator for the Klein-Gordon side.
        quad_cfg (QuadratureConfig, optional): quadrature settings for the weak side.
    Returns:
        CheckReport: |v_weak - v_kg| / max(|v_kg|, 1) where |psi|^2 exceeds 1e-8 of the grid
            peak; points below that mask are skipped rather than refused by the node floor.
    """
    t_values, r_values = grid if grid is not None else default_weak_grid(spec)
    tt, rr = np.meshgrid(np.asarray(t_values, dtype=float), np.asarray(r_values, dtype=float), indexing='ij')
    if tt.size == 0:
        raise ValueError("weak-value audit grid is empty")
    pair = weak_single(tt, rr, spec, quad_cfg, node_floor=0.0)
    mask = pair.probability > DENSITY_MASK * np.max(pair.probability)
    f = metric_function_from_tortoise(rr, params)
    weak_v = f * pair.velocity_ratio
    cur = current_fn(tt, rr, spec)
    kg_v = f * cur.ratio
    err = _scaled_error(weak_v[mask], kg_v[mask], LIGHT_SPEED)
    max_error = float(np.max(err)) if err.size else 0.0
    return CheckReport.from_error(
        f"weakvalue-kg-equivalence[alpha={spec.alpha:g}]", max_error, WEAK_KG_TOLERANCE, int(mask.sum()),
        notes="weak side by momentum quadrature, Klein-Gordon side from analytic gradients; "
              "error relative to max(|v|, 1)")


def random_two_photon_events(spec, n, seed, times=(-1.0, 0.0), half_width=3.0):
    """n equal-time events with t drawn from times and r_i* uniform on +-half_width/sigma."""
    rng = np.random.default_rng(seed)
    t = rng.choice(np.asarray(times, dtype=float), size=n) / spec.sigma
    r = rng.uniform(-half_width, half_width, size=(2, n)) / spec.sigma
    return TwoPhotonEvent.equal_time(t, r[0], r[1])


def check_two_photon_weakvalue_equivalence(spec, n_events=1000, seed=0, quad_cfg=None):
    """Weak-value numerator products for detectors A and B against the two conserved currents."""
    ev = random_two_photon_events(spec, n_events, seed)
    detector_a, detector_b = weak_two(ev, spec, quad_cfg, node_floor=0.0)
    cur = two_photon_currents(ev, spec)
    scale = two_photon_current_scale(spec)
    errors = [
        _scaled_error(detector_a.momentum_product, cur.j1_1, scale),
        _scaled_error(detector_a.energy_product, cur.j1_0, scale),
        _scaled_error(detector_b.momentum_product, cur.j2_1, scale),
        _scaled_error(detector_b.energy_product, cur.j2_0, scale),
    ]
    max_error = float(max(np.max(e) for e in errors))
    return CheckReport.from_error(
        "weakvalue-kg-equivalence[two-photon]", max_error, TWO_PHOTON_IDENTITY_TOLERANCE, n_events,
        notes="relative to max(|j|, 2 sigma^2 k0 / pi)")


def integrate_both_routes(config, spec, params, progress=False):
    """Runs kg-current and metric-null ensembles from the same sampled initial data."""
    kg_bundle = run_ensemble(replace(config, route=KG_CURRENT), spec, params, progress=progress)
    initial = kg_bundle.initial_positions()
    null_bundle = run_ensemble(replace(config, route=METRIC_NULL), spec, params, progress=progress,
                               initial=initial)
    return kg_bundle, null_bundle


def _bundle_failures(bundle, ensemble):
    """Node-aborted trajectories of a bundle, tagged with the ensemble label and route."""
    route = bundle.provenance.get("route", "")
    return [{"ensemble": ensemble, "route": route, **failure} for failure in bundle.failures]


def check_null_geodesic_equivalence(spec, params, ensemble, label=""):
    """
    Max |r*_kg - r*_null| over matched trajectories and shared samples.
    Args:
        ensemble (tuple): (kg-current bundle, metric-null bundle) with identical initial data.
    """
    kg_bundle, null_bundle = ensemble
    worst = 0.0
    compared = 0
    for a, b in zip(kg_bundle.trajectories, null_bundle.trajectories):
        k = min(a.t.size, b.t.size)
        if k == 0:
            continue
        worst = max(worst, float(np.max(np.abs(a.r_star[:k] - b.r_star[:k]))))
        compared += k * a.dimension
    ensemble = label or f"alpha={spec.alpha:g}, m={params.m:g}"
    failures = _bundle_failures(kg_bundle, ensemble) + _bundle_failures(null_bundle, ensemble)
    return CheckReport.from_error(f"null-geodesic-equivalence[{ensemble}]", worst, ROUTE_TOLERANCE, compared,
                                  notes=f"{len(kg_bundle.trajectories)} trajectory pairs, {len(failures)} node-aborted",
                                  details={"failures": failures})


def _interval_residuals(trajectory, spec, params):
    scenario = SINGLE if trajectory.dimension == 1 else TWO_PHOTON
    field_fn = VelocityField(spec, params, scenario)
    j0, j1 = field_fn.currents(trajectory.t, trajectory.r_star)
    with np.errstate(divide='ignore', invalid='ignore'):
        rho = j1 / j0
    v_s = shift_from_velocity_ratio(rho)
    components = warp_metric_at_tortoise(v_s, trajectory.r_star, params)
    f = metric_function_from_tortoise(trajectory.r_star, params)
    residual = null_interval(components, trajectory.v)
    return np.abs(residual) / (f * (1.0 + v_s ** 2 + rho ** 2))


def check_null_interval(trajectory, spec, params):
    """Line element of the guiding metric along one stored trajectory, scaled by f(1 + v_s^2 + rho^2)."""
    scaled = _interval_residuals(trajectory, spec, params)
    max_error = float(np.max(scaled)) if scaled.size else 0.0
    notes = "" if trajectory.status == COMPLETED else f"trajectory status {trajectory.status}"
    return CheckReport.from_error(f"null-interval[traj={trajectory.traj_id}]", max_error,
                                  NULL_INTERVAL_TOLERANCE, scaled.size, notes=notes)


def check_null_interval_bundle(bundle, spec, params, label=""):
    worst = 0.0
    compared = 0
    for trajectory in bundle.trajectories:
        scaled = _interval_residuals(trajectory, spec, params)
        if scaled.size:
            worst = max(worst, float(np.max(scaled)))
            compared += scaled.size
    name = "null-interval" + (f"[{label}]" if label else "")
    failures = _bundle_failures(bundle, label or f"alpha={spec.alpha:g}, m={params.m:g}")
    return CheckReport.from_error(name, worst, NULL_INTERVAL_TOLERANCE, compared,
                                  notes=f"{len(bundle.trajectories)} trajectories, {len(failures)} node-aborted",
                                  details={"failures": failures})


def check_metric_determinant(params, v_s_values=None, r_values=None):
    """det of the (t, r) block against -1, relative to 1 + v_s^2."""
    v_s = np.linspace(-5.0, 5.0, 41) if v_s_values is None else np.asarray(v_s_values, dtype=float)
    if r_values is None:
        r_values = params.horizon + np.geomspace(1e-6, 100.0, 60) if not params.is_flat else np.geomspace(1e-3, 100.0, 60)
    vv, rr = np.meshgrid(v_s, np.asarray(r_values, dtype=float), indexing='ij')
    det = warp_metric(vv, rr, params).determinant()
    err = np.abs(det + 1.0) / (1.0 + vv ** 2)
    return CheckReport.from_error(f"metric-determinant[m={params.m:g}]", float(np.max(err)),
                                  DETERMINANT_TOLERANCE, err.size)


def default_printed_grid(spec):
    return np.linspace(-2.0, 2.0, 20) / spec.sigma, np.linspace(-2.0, 2.0, 20) / spec.sigma


def check_printed_forms(spec, grid=None, n_events=100, seed=0):
    """
    Audits the printed balanced-case closed forms and the printed two-photon components.
    Args:
        spec (WavepacketSpec): evaluated at alpha = 1/2 whatever alpha it carries.
        grid (tuple, optional): (t values, r* values) for the single-photon audit.
        n_events (int): random events for the two-photon audit.
    Returns:
        list: CheckReports for the radial component, the time component and the two-photon forms,
            each with its deviation map in details.
    """
    balanced = spec.with_alpha(0.5)
    t_values, r_values = grid if grid is not None else default_printed_grid(balanced)
    tt, rr = np.meshgrid(np.asarray(t_values, dtype=float), np.asarray(r_values, dtype=float), indexing='ij')
    derived = single_current(tt, rr, balanced)
    printed = printed_single_current(tt, rr, balanced)
    scale = current_scale(balanced)
    grid_details = {"t": tt[:, 0].tolist(), "r_star": rr[0, :].tolist()}

    reports = []
    for label, ours, theirs in (("J1", derived.j1, printed.j1), ("J0", derived.j0, printed.j0)):
        deviation = np.abs(ours - theirs) / scale
        worst = np.unravel_index(np.argmax(deviation), deviation.shape)
        details = dict(grid_details, deviation=deviation.tolist(),
                       worst_event={"t": float(tt[worst]), "r_star": float(rr[worst])})
        reports.append(CheckReport.from_error(
            f"printed-forms[single {label}]", float(deviation[worst]), PRINTED_TOLERANCE, deviation.size,
            notes="deviation relative to 2 k0 A^2", details=details, on_failure=DISCREPANCY))

    ev = random_two_photon_events(balanced, n_events, seed)
    derived_two = two_photon_currents(ev, balanced)
    printed_two = printed_two_photon_currents(ev, balanced)
    scale_two = two_photon_current_scale(balanced)
    components = {}
    for name in ("j1_0", "j1_1", "j2_0", "j2_1"):
        components[name] = float(np.max(np.abs(getattr(derived_two, name) - getattr(printed_two, name))) / scale_two)
    reports.append(CheckReport.from_error(
        "printed-forms[two-photon]", max(components.values()), PRINTED_TOLERANCE, n_events,
        notes="deviation relative to 2 sigma^2 k0 / pi", details={"per_component": components},
        on_failure=DISCREPANCY))
    return reports


def default_probes(spec, scenario, n=20, seed=0):
    """Random continuity probes: (t, r*) rows, or (t1, r1*, t2, r2*) rows for two photons."""
    rng = np.random.default_rng(seed)
    if scenario == SINGLE:
        return np.column_stack([rng.uniform(-2.0, 2.0, n), rng.uniform(-2.0, 2.0, n)]) / spec.sigma
    t = rng.uniform(-1.0, 1.0, n)
    return np.column_stack([t, rng.uniform(-2.0, 2.0, n), t, rng.uniform(-2.0, 2.0, n)]) / spec.sigma


def _continuity_table(spec, scenario, probes, steps):
    """Residuals (n_steps, n_probes), local current magnitude and coordinate scale per probe."""
    if scenario == SINGLE:
        t, r = probes[:, 0], probes[:, 1]
        residuals = np.array([np.abs(continuity_residual(t, r, spec, h)) for h in steps])
        cur = single_current(t, r, spec)
        magnitude = np.maximum(np.abs(cur.j0), np.abs(cur.j1))
        extent = np.abs(t) + np.abs(r)
        return residuals, magnitude, extent
    ev = TwoPhotonEvent(probes[:, 0], probes[:, 1], probes[:, 2], probes[:, 3])
    cur = two_photon_currents(ev, spec)
    rows = []
    for h in steps:
        rows.append(np.concatenate([np.abs(two_photon_continuity_residual(ev, spec, h, photon))
                                    for photon in (1, 2)]))
    magnitude = np.concatenate([np.maximum(np.abs(cur.j1_0), np.abs(cur.j1_1)),
                                np.maximum(np.abs(cur.j2_0), np.abs(cur.j2_1))])
    extent = np.max(np.abs(probes), axis=1)
    return np.array(rows), magnitude, np.concatenate([2.0 * extent, 2.0 * extent])


def check_continuity(spec, scenario=SINGLE, probes=None, h=None):
    """
    Estimates the convergence order of the central-difference continuity residual.

    The step is halved three times from h (default 0.01/sigma). Probes whose residual
    at the finest step is already at rounding level are excluded; the order is the
    least-squares slope of log RMS residual against log h over the rest.
    Returns:
        CheckReport: max_error = 2 - order, passing for order >= 1.8.
    """
    probes = default_probes(spec, scenario) if probes is None else np.atleast_2d(np.asarray(probes, dtype=float))
    if probes.size == 0:
        raise ValueError("continuity check needs at least one probe")
    h = 0.01 / spec.sigma if h is None else h
    steps = h * 0.5 ** np.arange(4)
    residuals, magnitude, extent = _continuity_table(spec, scenario, probes, steps)

    eps = np.finfo(float).eps
    floor = 1e3 * eps * magnitude * (1.0 + spec.k0 * (extent + 1.0 / spec.sigma)) / steps[-1]
    kept = residuals[-1] > floor
    name = f"continuity[{scenario}, alpha={spec.alpha:g}]" if scenario == SINGLE else f"continuity[{scenario}]"
    if not np.any(kept):
        return CheckReport.from_error(name, 0.0, ORDER_SLACK, residuals.shape[1],
                                      notes="all residuals at rounding level; no truncation error to measure",
                                      details={"max_residual": float(np.max(residuals))})
    rms = np.sqrt(np.mean(residuals[:, kept] ** 2, axis=1))
    order = float(np.polyfit(np.log(steps), np.log(rms), 1)[0])
    return CheckReport.from_error(
        name, ORDER_TARGET - order, ORDER_SLACK, int(kept.sum()),
        notes=f"estimated order {order:.3f} from steps {steps[0]:.3g}..{steps[-1]:.3g}",
        details={"order": order, "steps": steps.tolist(), "rms": rms.tolist(),
                 "excluded_at_rounding": int((~kept).sum())})


def check_no_crossing(bundle):
    """Counts ordering violations between single-photon trajectories at stored samples."""
    start = bundle.initial_positions()[:, 0]
    order = np.argsort(start, kind='stable')
    violations = 0
    compared = 0
    for index in range(bundle.sample_times.size):
        positions = bundle.positions_at(index)[order, 0]
        present = positions[np.isfinite(positions)]
        compared += present.size
        violations += int(np.count_nonzero(np.diff(present) <= 0))
    return CheckReport.from_error("no-crossing", float(violations), 0.0, compared,
                                  notes=f"{len(bundle.trajectories)} trajectories, strict ordering")


def check_density_transport(spec, params, n=5000, t0=None, t1=None, rtol=1e-9, atol=1e-12,
                            node_floor=1e-12, progress=False):
    """KS distance between quantile samples evolved from t0 to t1 and the density j0(t1, .)."""
    t0 = -2.0 / spec.sigma if t0 is None else t0
    t1 = 2.0 / spec.sigma if t1 is None else t1
    config = EnsembleConfig(n_traj=n, t0=t0, t1=t1, sampling=QUANTILE, n_times=2,
                            rtol=rtol, atol=atol, node_floor=node_floor)
    bundle = run_ensemble(config, spec, params, progress=progress)
    final = bundle.positions_at(1)[:, 0]
    final = final[np.isfinite(final)]
    window = default_window(t0, t1, spec)
    grid = np.linspace(window[0], window[1], 4 * config.resolution)
    cdf = tabulated_cdf(grid, single_density(t1, grid, spec))
    distance = ks_distance(final, grid, cdf)
    name = f"density-transport[alpha={spec.alpha:g}]"
    failures = _bundle_failures(bundle, name)
    return CheckReport.from_error(name, distance, TRANSPORT_TOLERANCE, final.size,
                                  notes=f"{n - final.size} trajectories did not reach t1",
                                  details={"failures": failures})


def check_limiting_trajectories(spec, params, tol=(1e-9, 1e-12)):
    """
    Closed-form limits: alpha = 1 and alpha = 0 move at +-1 in r*, the balanced flow keeps
    r* = 0 fixed, and m = 0 reproduces the flat field with r = r*.
    """
    t0, t1 = -3.0 / spec.sigma, 3.0 / spec.sigma
    errors = {}

    outgoing = spec.with_alpha(1.0)
    traj = integrate_trajectory(t0, t0, t1, VelocityField(outgoing, params), tol)
    errors["outgoing"] = float(np.max(np.abs(traj.r_star[:, 0] - traj.t)))

    ingoing = spec.with_alpha(0.0)
    traj = integrate_trajectory(-t0, t0, t1, VelocityField(ingoing, params), tol)
    errors["ingoing"] = float(np.max(np.abs(traj.r_star[:, 0] + traj.t)))

    balanced = spec.with_alpha(0.5)
    traj = integrate_trajectory(0.0, t0, t1, VelocityField(balanced, params), tol)
    errors["axis"] = float(np.max(np.abs(traj.r_star[:, 0])))

    flat = SpacetimeParams(m=0.0)
    r_flat = np.linspace(0.5, 4.0, 25) / spec.sigma
    t_flat = np.full_like(r_flat, 0.3 / spec.sigma)
    v_flat = velocity_single(t_flat, r_flat, flat, balanced, node_floor=0.0)
    ratio = single_current(t_flat, r_flat, balanced).ratio
    coordinate_gap = np.max(np.abs(radial_from_tortoise(r_flat, flat) - r_flat))
    errors["flat"] = float(max(np.max(_scaled_error(v_flat, ratio, LIGHT_SPEED)), coordinate_gap))

    return CheckReport.from_error("limiting-trajectories", max(errors.values()), tol[0], len(errors),
                                  details=errors)


def check_superluminal_existence(spec, params, t=-0.5, window=(-4.0, 4.0), resolution=4096):
    """
    Looks for grid points with |v| > f(r). max_error = 1 - max |v|/f, so the check
    passes when the field exceeds the local light speed somewhere.
    """
    balanced = spec.with_alpha(0.5)
    r_star = np.linspace(window[0], window[1], resolution) / balanced.sigma
    cur = single_current(t / balanced.sigma, r_star, balanced)
    positive = cur.j0 > 0
    ratio = np.abs(cur.ratio[positive])
    peak = float(np.max(ratio)) if ratio.size else 0.0
    count = int(np.count_nonzero(ratio > 1.0))
    return CheckReport.from_error("superluminal-existence", 1.0 - peak, 0.0, int(positive.sum()),
                                  notes=f"{count} grid points with |v| > f(r)",
                                  details={"max_speed_over_light": peak, "superluminal_points": count})


def check_exchange_symmetry(spec, n_events=1000, n_samples=5000, seed=0, t0=-1.0):
    """j1(R1, R2) = j2(R2, R1) at random events, plus marginal symmetry of a sampled pair cloud."""
    ev = random_two_photon_events(spec, n_events, seed)
    direct = two_photon_currents(ev, spec)
    mirrored = two_photon_currents(ev.swapped(), spec).swapped()
    scale = two_photon_current_scale(spec)
    current_error = max(float(np.max(_scaled_error(getattr(direct, name), getattr(mirrored, name), scale)))
                        for name in ("j1_0", "j1_1", "j2_0", "j2_1"))
    current_report = CheckReport.from_error("exchange-symmetry[currents]", current_error, EXCHANGE_TOLERANCE,
                                            n_events)

    pairs = sample_initial_two(t0 / spec.sigma, spec, n_samples, QUANTILE, seed)
    marginal = ks_2samp(pairs[:, 0], pairs[:, 1]).statistic
    difference = ks_2samp(pairs[:, 0] - pairs[:, 1], pairs[:, 1] - pairs[:, 0]).statistic
    cloud_report = CheckReport.from_error("exchange-symmetry[samples]", float(max(marginal, difference)),
                                          EXCHANGE_KS_TOLERANCE, n_samples,
                                          details={"marginal_ks": float(marginal), "difference_ks": float(difference)})
    return [current_report, cloud_report]


def check_optical_validity(spec, params, r_values=None):
    """
    Largest U(r)/k0^2 on the exterior; the plane-wave reduction needs it small.

    The probability mass of the outgoing profile at negative frequency is measured
    alongside and reported in details; it does not enter max_error.
    """
    leakage = negative_frequency_leakage(spec)
    details = {"negative_frequency_leakage": leakage}
    leakage_note = f"negative-frequency leakage {leakage:.3e}"
    if params.is_flat:
        return CheckReport.from_error("optical-validity", 0.0, OPTICAL_TOLERANCE, 0,
                                      notes=f"flat space: U = 0; {leakage_note}", details=details)
    r = params.horizon * (1.0 + np.geomspace(1e-6, 1e3, 2000)) if r_values is None else np.asarray(r_values)
    values = optical_parameter(r, spec.k0, params)
    details["max_optical_parameter_at_r"] = float(r[np.argmax(values)])
    return CheckReport.from_error(f"optical-validity[k0/sigma={spec.ratio:g}]", float(np.max(values)),
                                  OPTICAL_TOLERANCE, values.size, notes=leakage_note, details=details)


def run_suite(params, config=None):
    """
    Runs every check family at the reference parameter points.

    Single photon: k0/sigma = 15, alpha in {0, 1/4, 1/2, 3/4, 1}. Two photons:
    k0/sigma = 20 at t in {-1, 0}.
    Args:
        params (SpacetimeParams): black-hole mass.
        config (SuiteConfig, optional): sizes, seed and tolerances.
    Returns:
        list: CheckReports in execution order.
    """
    config = config or SuiteConfig()
    single = WavepacketSpec.from_ratio(15.0)
    pair = WavepacketSpec.from_ratio(20.0)
    ensemble_cfg = EnsembleConfig(n_traj=config.n_traj, t0=-3.0, t1=3.0, seed=config.seed,
                                  rtol=config.rtol, atol=config.atol, node_floor=config.node_floor)

    def weak_family():
        reports = [check_weakvalue_kg_equivalence(single.with_alpha(a), params, quad_cfg=config.quad_cfg)
                   for a in (0.0, 0.25, 0.5, 0.75, 1.0)]
        reports.append(check_two_photon_weakvalue_equivalence(pair, config.n_events, config.seed))
        return reports

    def run_and_compare(spec, spacetime, cfg, label):
        kg_bundle, null_bundle = integrate_both_routes(cfg, spec, spacetime, config.progress)
        reports = [check_null_geodesic_equivalence(spec, spacetime, (kg_bundle, null_bundle), label),
                   check_null_interval_bundle(null_bundle, spec, spacetime, label)]
        if label == "alpha=0.5":
            reports.append(check_no_crossing(kg_bundle))
        return reports

    def route_family():
        balanced = run_and_compare(single, params, ensemble_cfg, "alpha=0.5")
        flat_cfg = replace(ensemble_cfg, n_traj=min(config.n_traj, 20))
        flat = run_and_compare(single, SpacetimeParams(m=0.0), flat_cfg, "alpha=0.5, m=0")
        outgoing = run_and_compare(single.with_alpha(1.0), params, flat_cfg, "alpha=1")
        return balanced + flat + outgoing

    def interval_family():
        cfg = replace(ensemble_cfg, n_traj=min(config.n_traj, 100), sampling=PSEUDORANDOM)
        bundle = run_ensemble(cfg, single.with_alpha(0.75), params, progress=config.progress)
        return [check_null_interval_bundle(bundle, single.with_alpha(0.75), params, "alpha=0.75"),
                check_metric_determinant(params)]

    def printed_family():
        return check_printed_forms(single, n_events=config.n_printed_events, seed=config.seed)

    def continuity_family():
        return [check_continuity(single.with_alpha(0.5), SINGLE, default_probes(single, SINGLE, config.n_probes, config.seed)),
                check_continuity(single.with_alpha(1.0), SINGLE, default_probes(single, SINGLE, config.n_probes, config.seed)),
                check_continuity(pair, TWO_PHOTON, default_probes(pair, TWO_PHOTON, config.n_probes, config.seed))]

    def extra_family():
        return [check_density_transport(single.with_alpha(0.5), params, config.n_transport,
                                        rtol=config.rtol, atol=config.atol, node_floor=config.node_floor,
                                        progress=config.progress),
                check_limiting_trajectories(single, params),
                check_superluminal_existence(single, params),
                *check_exchange_symmetry(pair, config.n_events, config.n_transport, config.seed),
                check_optical_validity(single, params)]

    families = (("weak values", weak_family), ("routes", route_family), ("null interval", interval_family),
                ("printed forms", printed_family), ("continuity", continuity_family), ("properties", extra_family))
    reports = []
    for label, family in tqdm(families, desc="verify", unit="family", disable=not config.progress, leave=False):
        logger.info("Running %s checks", label)
        reports.extend(family())
    failed = sum(r.failed for r in reports)
    logger.info("Verification finished: %d checks, %d failed, %d trajectory failures",
                len(reports), failed, len(suite_failures(reports)))
    return reports


def suite_failures(reports):
    """
    Per-trajectory failures collected from the reports' details, each listed once.

    A bundle shared by two checks contributes its failures under the first check's name.
    Returns:
        list: dicts with check, ensemble, route, traj_id and status.
    """
    seen = set()
    failures = []
    for report in reports:
        for failure in report.details.get("failures", ()):
            key = (failure["ensemble"], failure["route"], failure["traj_id"])
            if key in seen:
                continue
            seen.add(key)
            failures.append({"check": report.name, **failure})
    return failures
