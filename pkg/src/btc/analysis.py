"""Signal analysis on mean-field trajectories: damped-oscillation envelopes, decay-rate
scans, oscillation onset, and basins of attraction.
"""

import logging
from typing import List, Optional, Sequence, Tuple

import numpy as np  # type: ignore[import]
from btc import core, fixedpoints, meanfield
from btc.registry import Defaults
from btc.workers import WorkerPool
from scipy import signal, stats  # type: ignore[import]

LOGGER = logging.getLogger()

########################################################################################
# PEAKS AND ENVELOPES ##################################################################
########################################################################################


def _upward_crossings(times: np.ndarray, values: np.ndarray) -> np.ndarray:
    idx = np.nonzero((values[:-1] < 0) & (values[1:] >= 0))[0]
    frac = values[idx] / (values[idx] - values[idx + 1])
    return times[idx] + frac * (times[idx + 1] - times[idx])


def _estimate_period(times: np.ndarray, values: np.ndarray) -> Optional[float]:
    crossings = _upward_crossings(times, values)
    if len(crossings) < 2:
        return None
    return float(np.mean(np.diff(crossings)))


def _refined_peaks(
    times: np.ndarray, values: np.ndarray, min_separation: float
) -> Tuple[np.ndarray, np.ndarray]:
    """Local maxima, refined by a parabola through the three samples around each."""
    dt = float(np.median(np.diff(times)))
    distance = max(1, int(min_separation / dt))
    idx, _ = signal.find_peaks(values, distance=distance)
    peak_t, peak_v = [], []
    for i in idx:
        lo, mid, hi = values[i - 1], values[i], values[i + 1]
        curv = lo - 2 * mid + hi
        shift = 0.0 if curv == 0 else 0.5 * (lo - hi) / curv
        peak_t.append(times[i] + shift * dt)
        peak_v.append(mid - 0.25 * (lo - hi) * shift)
    return np.array(peak_t), np.array(peak_v)


def fit_envelope_decay(
    traj: core.Trajectory, asymptote: float, component: int = 2
) -> core.EnvelopeFit:
    """Fits A(t) = A0 exp(-B t) to the maxima of (m - asymptote) by linear regression of
    the log peak height on Jt.

    Raises:
        InsufficientDataError: fewer than Defaults.MIN_PEAKS positive maxima
    """
    times = np.asarray(traj.times)
    deviation = traj.states[:, component] - asymptote
    if len(times) < 3:
        raise core.InsufficientDataError("trajectory too short to find peaks")
    period = _estimate_period(times, deviation)
    min_sep = 0.25 * period if period is not None else 0.0
    peak_t, peak_v = _refined_peaks(times, deviation, min_sep)
    keep = peak_v > 0
    peak_t, peak_v = peak_t[keep], peak_v[keep]
    if len(peak_t) < Defaults.MIN_PEAKS:
        raise core.InsufficientDataError(
            f"need {Defaults.MIN_PEAKS} envelope peaks, found {len(peak_t)}"
        )

    log_v = np.log(peak_v)
    reg = stats.linregress(peak_t, log_v)
    resid = log_v - (reg.intercept + reg.slope * peak_t)
    B_refit = None
    if len(peak_t) > Defaults.MIN_PEAKS:
        B_refit = float(-stats.linregress(peak_t[1:], log_v[1:]).slope)
    fit = core.EnvelopeFit(
        A0=float(np.exp(reg.intercept)),
        B=float(-reg.slope),
        B_stderr=float(reg.stderr),
        residual=float(np.sqrt(np.mean(resid**2))),
        peak_times=peak_t.tolist(),
        peak_values=peak_v.tolist(),
        B_refit=B_refit,
    )
    if not fit.stationary:
        LOGGER.debug(f"Envelope decay drifts: B={fit.B:.6g} without first {B_refit=}")
    return fit


def measure_period(traj: core.Trajectory, component: int = 2) -> Optional[float]:
    """Mean spacing of the maxima of one component, or None with fewer than two."""
    values = traj.states[:, component] - np.mean(traj.states[:, component])
    period = _estimate_period(np.asarray(traj.times), values)
    min_sep = 0.25 * period if period is not None else 0.0
    peak_t, _ = _refined_peaks(np.asarray(traj.times), values, min_sep)
    if len(peak_t) < 2:
        return None
    return float(np.mean(np.diff(peak_t)))


########################################################################################
# DECAY-RATE SCAN ######################################################################
########################################################################################


def _gas_point(params: core.ModelParams) -> core.FixedPoint:
    points = fixedpoints.fixed_points(params)
    if len(points) != 1:
        raise core.PreconditionError(f"expected a single fixed point at {params=}")
    return points[0]


def linear_decay_rate(params: core.ModelParams) -> float:
    """Envelope decay rate per unit Jt of small oscillations about the single fixed
    point, from the slowest oscillating Jacobian mode.
    """
    eig = _gas_point(params).eigvals
    oscillating = eig[np.abs(eig.imag) > Defaults.STABILITY_TOL]
    if oscillating.size == 0:
        raise core.PreconditionError(f"no oscillating mode at {params=}")
    return float(-np.max(oscillating.real) / params.J)


def scan_decay_rate(
    eta_samples: Sequence[float],
    chi: float,
    t_max: float = 300.0,
    kick: Optional[float] = None,
    tol: Optional[core.ToleranceSpec] = None,
    n_samples: Optional[int] = None,
    threads: Optional[int] = None,
) -> core.DecayScan:
    """Decay rate B(eta) of the damped oscillations at fixed chi, plus the fit
    B = beta (eta - 1)^2 + intercept.

    With kick set, each run starts from the fixed point displaced by kick along z
    rather than from Defaults.INIT. Rows whose fit fails carry the error instead of B.
    """
    etas = [float(e) for e in eta_samples]
    if not etas:
        raise core.DomainError("eta_samples must not be empty")
    if any(e <= 1 for e in etas):
        raise core.PreconditionError(f"the decay scan needs eta > 1, got {etas=}")
    if chi >= 1:
        raise core.PreconditionError(f"the decay scan needs chi < 1, got {chi=}")
    n = n_samples if n_samples is not None else int(20 * t_max) + 1

    def _row(eta: float) -> core.DecayRow:
        params = core.ModelParams(chi=chi, eta=eta)
        point = _gas_point(params)
        init = Defaults.INIT
        if kick is not None:
            m = point.m
            init = core.MagState(mx=m.mx, my=m.my, mz=m.mz + kick)
        traj = meanfield.integrate_mf(params, init, t_max, tol, n)
        fit = fit_envelope_decay(traj, point.m.mz)
        linear = linear_decay_rate(params)
        LOGGER.debug(f"Decay fit {eta=}: B={fit.B:.6g} +- {fit.B_stderr:.2g} {linear=}")
        return core.DecayRow(eta=eta, B=fit.B, B_stderr=fit.B_stderr, B_linear=linear)

    with WorkerPool(threads) as pool:
        outcomes = pool.map_ordered(_row, etas)
    rows = []
    for eta, out in zip(etas, outcomes):
        if out.errored:
            last = (out.traceback_str or "").strip().splitlines()[-1]
            LOGGER.warning(f"Decay fit failed at {eta=}: {last}")
            rows.append(core.DecayRow(eta=eta, error=last))
        else:
            rows.append(out.return_val)

    scan = core.DecayScan(chi=chi, rows=rows)
    good = [r for r in rows if r.B is not None]
    if len(good) < 2:
        return scan
    x = np.array([(r.eta - 1) ** 2 for r in good])
    reg = stats.linregress(x, np.array([r.B for r in good]))
    beta_stderr = float(reg.stderr) if len(good) > 2 else None
    return scan.model_copy(
        update={
            "beta": float(reg.slope),
            "beta_stderr": beta_stderr,
            "intercept": float(reg.intercept),
        }
    )


########################################################################################
# ONSET AND BASINS #####################################################################
########################################################################################


def detect_oscillation_onset(
    traj: core.Trajectory,
    window: float = Defaults.ONSET_WINDOW,
    hysteresis: float = Defaults.ONSET_HYSTERESIS,
    component: int = 2,
) -> Optional[float]:
    """Earliest crossing of the component about its trailing running mean that is
    followed by two more crossings within window (Jt). None if there is none.

    Crossings are counted with a hysteresis band so that numerical noise around a
    converged value does not register.
    """
    times = np.asarray(traj.times)
    values = traj.states[:, component]
    if len(times) < 2:
        return None
    csum = np.concatenate([[0.0], np.cumsum(values)])
    start = np.searchsorted(times, times - window, side="left")
    idx = np.arange(len(times))
    running = (csum[idx + 1] - csum[start]) / (idx + 1 - start)
    excess = values - running

    crossings: List[float] = []
    side = 0
    for t, d in zip(times, excess):
        if d > hysteresis:
            if side < 0:
                crossings.append(float(t))
            side = 1
        elif d < -hysteresis:
            if side > 0:
                crossings.append(float(t))
            side = -1
    for k in range(len(crossings) - 2):
        if crossings[k + 2] - crossings[k] <= window:
            return crossings[k]
    return None


def basin_grid(n: int, radius: float = 0.95) -> List[core.MagState]:
    """Uniform n x n grid of (my, mz) on the mx = 0 plane, kept inside the disk."""
    if n < 1:
        raise core.DomainError(f"grid needs at least one point per axis, got {n=}")
    axis = np.linspace(-radius, radius, n)
    return [
        core.MagState(mx=0.0, my=float(my), mz=float(mz))
        for my in axis
        for mz in axis
        if my * my + mz * mz <= radius * radius
    ]


def _entry_time(
    times: np.ndarray, states: np.ndarray, target: np.ndarray, radius: float
) -> Optional[float]:
    inside = np.linalg.norm(states - target, axis=1) < radius
    if not inside[-1]:
        return None
    outside = np.nonzero(~inside)[0]
    first = 0 if outside.size == 0 else outside[-1] + 1
    return float(times[first])


def trace_basin(
    params: core.ModelParams,
    inits: Sequence[core.MagState],
    t_max: float = 800.0,
    tol: Optional[core.ToleranceSpec] = None,
    radius: float = Defaults.ATTRACTOR_RADIUS,
    n_samples: Optional[int] = None,
    threads: Optional[int] = None,
) -> List[core.BasinTrace]:
    """Integrates every initial state and records which attractive fixed point it
    ends within radius of. Runs that end elsewhere are unresolved.
    """
    attractors = [fp for fp in fixedpoints.fixed_points(params) if fp.attractive]
    if not attractors:
        raise core.PreconditionError(f"no attractive fixed point at {params=}")
    targets = [fp.m.as_array() for fp in attractors]
    n = n_samples if n_samples is not None else int(10 * t_max) + 1

    def _trace(init: core.MagState) -> core.BasinTrace:
        traj = meanfield.integrate_mf(params, init, t_max, tol, n)
        final = traj.states[-1]
        dists = [float(np.linalg.norm(final - tgt)) for tgt in targets]
        k = int(np.argmin(dists))
        if dists[k] >= radius:
            return core.BasinTrace(init=init)
        return core.BasinTrace(
            init=init,
            attractor=k,
            attractor_branch=attractors[k].branch,
            transit_time=_entry_time(traj.times, traj.states, targets[k], radius),
            spiraled=detect_oscillation_onset(traj) is not None,
        )

    with WorkerPool(threads) as pool:
        outcomes = pool.map_ordered(_trace, list(inits))
    traces = []
    for init, out in zip(inits, outcomes):
        trace = out.return_val if out.completed else core.BasinTrace(init=init)
        if not trace.resolved:
            LOGGER.warning(f"Unresolved basin run from {init=}")
        traces.append(trace)
    return traces
