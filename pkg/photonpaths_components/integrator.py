"""
Dormand-Prince 5(4) advancing many independent ODE systems in lockstep.

Each system keeps its own time, step size, error estimate and status; the only
shared work is the vectorised right-hand-side call. The tableau and the quartic
dense-output interpolant are scipy's RK45 ones, so sample times are read off the
interpolant of whichever accepted step covers them. `integrate_reference` runs the
same problem one system at a time through `scipy.integrate.solve_ivp`.
"""
import logging
from dataclasses import dataclass

import numpy as np
from scipy.integrate import RK45, solve_ivp

logger = logging.getLogger(__name__)

COMPLETED = "completed"
NODE_ABORTED = "node-aborted"
_RUNNING = "running"

# FSAL: the seventh stage is the rate at the accepted state
_N_STAGES = RK45.n_stages
_C = np.append(RK45.C, 1.0)
_ERROR_EXPONENT = -1.0 / (RK45.error_estimator_order + 1)

_SAFETY = 0.9
_MIN_FACTOR = 0.2
_MAX_FACTOR = 5.0


@dataclass
class LockstepResult:
    """y has shape (n_systems, n_samples, dim); samples never reached are NaN."""
    y: np.ndarray
    recorded: np.ndarray
    status: np.ndarray
    steps: np.ndarray
    rejected: np.ndarray


def _combine(K, coefficients):
    """Sum of coefficients[j] * K[j] over the leading stage axis."""
    return np.tensordot(np.asarray(coefficients, dtype=float), K[:len(coefficients)], axes=(0, 0))


def dense_output(y_old, h, K, theta):
    """
    Evaluates the RK45 interpolant of one step at fractions theta of the step.
    Args:
        y_old (ndarray): states at the start of the step, shape (a, d).
        h (ndarray): step sizes, shape (a,).
        K (ndarray): the seven stage rates, shape (7, a, d).
        theta (ndarray): fractions in [0, 1], shape (a,).
    Returns:
        ndarray: interpolated states, shape (a, d).
    """
    Q = np.einsum('sad,sk->adk', K, RK45.P)
    powers = theta[:, None] ** np.arange(1, RK45.P.shape[1] + 1)
    return y_old + h[:, None] * np.einsum('adk,ak->ad', Q, powers)


def _node_hit(j0, floor, shape):
    return np.any(np.asarray(j0).reshape(shape) < floor, axis=1)


def integrate_lockstep(field, y0, sample_times, rtol=1e-9, atol=1e-12, node_floor=0.0,
                       h0=None, max_bisections=40, max_iterations=2_000_000, progress=None):
    """
    Integrates dy/dt = rate(t, y) for every row of y0 over the sample times.
    Args:
        field (callable): field(t, y) -> (rate, j0) for t of shape (k,) and y of shape (k, d);
            a stage with any j0 component below node_floor is treated as a node hit.
        y0 (ndarray): initial states, shape (n, d).
        sample_times (ndarray): strictly increasing output times; y0 sits at sample_times[0].
        rtol, atol (float): per-component local error tolerances.
        node_floor (float): absolute floor on j0.
        h0 (float, optional): initial step; defaults to 1e-3 of the span.
        max_bisections (int): consecutive node halvings before a system is abandoned.
        max_iterations (int): cap on lockstep iterations.
        progress (callable, optional): called with the number of systems that finished.
    Returns:
        LockstepResult
    """
    y0 = np.array(y0, dtype=float, copy=True)
    if y0.ndim != 2:
        raise ValueError(f"y0 must have shape (n, d), got {y0.shape}")
    times = np.asarray(sample_times, dtype=float)
    if times.ndim != 1 or times.size < 1 or np.any(np.diff(times) <= 0):
        raise ValueError("sample times must be a non-empty strictly increasing sequence")

    n, dim = y0.shape
    n_samples = times.size
    t_end = times[-1]
    out = np.full((n, n_samples, dim), np.nan)
    out[:, 0, :] = y0
    recorded = np.ones(n, dtype=int)
    status = np.full(n, _RUNNING, dtype=object)
    steps = np.zeros(n, dtype=int)
    rejected = np.zeros(n, dtype=int)
    bisections = np.zeros(n, dtype=int)

    t = np.full(n, times[0])
    y = y0.copy()
    k1, j0 = field(t, y)
    k1 = np.asarray(k1, dtype=float).reshape(n, dim)
    start_bad = _node_hit(j0, node_floor, (n, dim)) | np.any(~np.isfinite(k1), axis=1)
    status[start_bad] = NODE_ABORTED
    if np.any(start_bad):
        logger.warning("%d system(s) start inside the node floor", int(start_bad.sum()))

    span = t_end - times[0]
    h = np.full(n, h0 if h0 is not None else 1e-3 * max(span, 1e-12))
    min_step = 1e-14 * max(1.0, float(np.max(np.abs(times))))
    if n_samples == 1:
        status[status == _RUNNING] = COMPLETED

    finished_before = int(np.count_nonzero(status != _RUNNING))
    if progress is not None and finished_before:
        progress(finished_before)

    iteration = 0
    while True:
        active = np.flatnonzero(status == _RUNNING)
        if active.size == 0:
            break
        iteration += 1
        if iteration > max_iterations:
            logger.warning("iteration cap reached; abandoning %d system(s)", active.size)
            status[active] = NODE_ABORTED
            break

        ti, yi = t[active], y[active]
        gap = t_end - ti
        hi = np.minimum(h[active], gap)
        hi = np.where(hi >= 0.99 * gap, gap, hi)
        final = hi == gap

        K = np.empty((_N_STAGES + 1, active.size, dim))
        K[0] = k1[active]
        node_hit = np.zeros(active.size, dtype=bool)
        for s in range(1, _N_STAGES):
            ys = yi + hi[:, None] * _combine(K, RK45.A[s, :s])
            rate, js = field(ti + _C[s] * hi, ys)
            K[s] = np.asarray(rate, dtype=float).reshape(active.size, dim)
            node_hit |= _node_hit(js, node_floor, (active.size, dim))
        y_new = yi + hi[:, None] * _combine(K, RK45.B)
        rate, js = field(ti + hi, y_new)
        K[_N_STAGES] = np.asarray(rate, dtype=float).reshape(active.size, dim)
        node_hit |= _node_hit(js, node_floor, (active.size, dim))

        err_vec = hi[:, None] * _combine(K, RK45.E)
        scale = atol + rtol * np.maximum(np.abs(yi), np.abs(y_new))
        with np.errstate(invalid='ignore'):
            err = np.max(np.abs(err_vec) / scale, axis=1)
        finite = np.isfinite(err) & np.all(np.isfinite(K), axis=(0, 2))
        node_hit |= ~finite
        accept = ~node_hit & (err <= 1.0)

        with np.errstate(divide='ignore'):
            factor = np.clip(_SAFETY * np.where(err > 0, err, 1e-300) ** _ERROR_EXPONENT,
                             _MIN_FACTOR, _MAX_FACTOR)

        acc = active[accept]
        if acc.size:
            t_old = ti[accept]
            t_new = np.where(final[accept], t_end, t_old + hi[accept])
            _record_samples(out, recorded, times, acc, t_old, t_new, yi[accept], y_new[accept],
                            hi[accept], K[:, accept], final[accept])
            t[acc] = t_new
            y[acc] = y_new[accept]
            k1[acc] = K[_N_STAGES][accept]
            steps[acc] += 1
            bisections[acc] = 0
            h[acc] = hi[accept] * factor[accept]
            status[acc[recorded[acc] == n_samples]] = COMPLETED

        err_rej = active[~accept & ~node_hit]
        if err_rej.size:
            rejected[err_rej] += 1
            h[err_rej] = hi[~accept & ~node_hit] * np.minimum(factor[~accept & ~node_hit], 1.0)

        node_rej = active[node_hit]
        if node_rej.size:
            rejected[node_rej] += 1
            bisections[node_rej] += 1
            h[node_rej] = 0.5 * hi[node_hit]
            gave_up = node_rej[bisections[node_rej] > max_bisections]
            status[gave_up] = NODE_ABORTED
            if gave_up.size:
                logger.debug("abandoned %d system(s) after %d node bisections", gave_up.size, max_bisections)

        tiny = active[(h[active] < min_step) & (status[active] == _RUNNING)]
        if tiny.size:
            status[tiny] = NODE_ABORTED
            logger.debug("step size underflow for %d system(s)", tiny.size)

        if progress is not None:
            finished = int(np.count_nonzero(status != _RUNNING))
            if finished > finished_before:
                progress(finished - finished_before)
                finished_before = finished

    return LockstepResult(y=out, recorded=recorded, status=status, steps=steps, rejected=rejected)


def _record_samples(out, recorded, times, systems, t_old, t_new, y_old, y_new, h, K, final):
    """Fills every sample time covered by the accepted steps of `systems`."""
    n_samples = times.size
    pending = np.ones(systems.size, dtype=bool)
    while True:
        idx = recorded[systems]
        pending &= idx < n_samples
        target = times[np.minimum(idx, n_samples - 1)]
        pending &= (target <= t_new) | (final & (idx == n_samples - 1))
        if not np.any(pending):
            return
        rows = np.flatnonzero(pending)
        sys_rows = systems[rows]
        last = final[rows] & (idx[rows] == n_samples - 1)
        theta = np.clip((target[rows] - t_old[rows]) / h[rows], 0.0, 1.0)
        values = dense_output(y_old[rows], h[rows], K[:, rows], theta)
        values[last] = y_new[rows][last]
        out[sys_rows, idx[rows], :] = values
        recorded[sys_rows] += 1


def integrate_reference(field, y0, sample_times, rtol=1e-9, atol=1e-12, node_floor=0.0, method='DOP853'):
    """
    Integrates each row of y0 separately with scipy's solve_ivp.

    Sample times come from t_eval; a terminal event stops a system where any j0
    component falls through node_floor, which is reported as node-aborted.
    Returns:
        LockstepResult shaped like integrate_lockstep's; rejected counts are not available.
    """
    y0 = np.array(y0, dtype=float, copy=True)
    if y0.ndim != 2:
        raise ValueError(f"y0 must have shape (n, d), got {y0.shape}")
    times = np.asarray(sample_times, dtype=float)
    if times.ndim != 1 or times.size < 2 or np.any(np.diff(times) <= 0):
        raise ValueError("sample times must be a strictly increasing sequence of at least two times")

    n, dim = y0.shape
    out = np.full((n, times.size, dim), np.nan)
    recorded = np.zeros(n, dtype=int)
    status = np.full(n, COMPLETED, dtype=object)
    steps = np.zeros(n, dtype=int)

    def rhs(t, state):
        rate, _ = field(np.array([t]), state[None, :])
        return np.asarray(rate, dtype=float).reshape(dim)

    def node_event(t, state):
        _, j0 = field(np.array([t]), state[None, :])
        return float(np.min(j0)) - node_floor
    node_event.terminal = True
    node_event.direction = -1

    for i in range(n):
        if node_event(times[0], y0[i]) < 0.0:
            out[i, 0] = y0[i]
            recorded[i] = 1
            status[i] = NODE_ABORTED
            continue
        sol = solve_ivp(rhs, (times[0], times[-1]), y0[i], method=method, t_eval=times,
                        dense_output=True, events=node_event, rtol=rtol, atol=atol)
        k = sol.t.size
        out[i, :k] = sol.y.T
        recorded[i] = k
        steps[i] = sol.sol.ts.size - 1
        if sol.status != 0:
            status[i] = NODE_ABORTED
            logger.debug("reference system %d stopped at t=%g: %s", i, sol.t[-1] if k else times[0], sol.message)

    return LockstepResult(y=out, recorded=recorded, status=status, steps=steps, rejected=np.zeros(n, dtype=int))
