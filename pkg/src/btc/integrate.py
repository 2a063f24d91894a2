"""Adaptive time integration shared by the mean-field, Gaussian and exact engines.

Steps scipy's RK45 / BDF solver objects by hand so that rejected steps can be counted
and the method switched mid-run when the problem turns out to be stiff.
"""

import collections
import logging
import os
from typing import Callable, Deque, Optional, Sequence, Tuple

import numpy as np  # type: ignore[import]
import pydantic
from btc import core
from scipy import integrate as sp_integrate  # type: ignore[import]

LOGGER = logging.getLogger()


# Stiffness detection
SWITCH_WINDOW = int(os.environ.get("BTC_LAB_SWITCH_WINDOW", "50"))  # accepted steps
SWITCH_REJECT_RATE = float(
    os.environ.get("BTC_LAB_SWITCH_REJECT_RATE", "0.3")
)  # rejected / attempted

STRATEGIES = ("auto", "rk45", "bdf")


class IntegrationResult(pydantic.BaseModel):
    """Samples reached by an integration. If truncated, times and y stop at the last
    sample before the failure.
    """

    model_config = pydantic.ConfigDict(arbitrary_types_allowed=True)

    times: np.ndarray
    y: np.ndarray  # shape (len(times), dim)
    truncated: bool = False
    message: Optional[str] = None
    stats: core.IntegrationStats


def _make_solver(
    method: str,
    fun: Callable,
    t0: float,
    y0: np.ndarray,
    t_bound: float,
    tol: core.ToleranceSpec,
    jac: Optional[Callable],
) -> sp_integrate.OdeSolver:
    if method == "bdf":
        return sp_integrate.BDF(
            fun,
            t0,
            y0,
            t_bound,
            rtol=tol.rtol,
            atol=tol.atol,
            max_step=tol.max_step,
            jac=jac,
        )
    return sp_integrate.RK45(
        fun, t0, y0, t_bound, rtol=tol.rtol, atol=tol.atol, max_step=tol.max_step
    )


def integrate(
    fun: Callable,
    t_span: Tuple[float, float],
    y0: np.ndarray,
    sample_times: Sequence[float],
    tol: core.ToleranceSpec,
    jac: Optional[Callable] = None,
    strategy: str = "auto",
    bound: Optional[Callable[[np.ndarray], bool]] = None,
) -> IntegrationResult:
    """Integrates y' = fun(t, y) and returns the dense-output values at sample_times.

    Args:
        fun: right-hand side, called as fun(t, y)
        t_span: (t0, t1) in integrator time units
        y0: initial state (real or complex)
        sample_times: increasing times within t_span at which to report y
        tol: local error tolerances and max step
        jac: analytic Jacobian jac(t, y), used by BDF only
        strategy: "auto" (RK45, switching to BDF on frequent step rejection), "rk45" or
            "bdf"
        bound: admissibility check on the state; the run stops (truncated) as soon as
            it returns False
    """
    if strategy not in STRATEGIES:
        raise core.DomainError(f"unknown integration strategy: {strategy=}")
    t0, t1 = float(t_span[0]), float(t_span[1])
    samples = np.asarray(sample_times, dtype=float)
    if samples.size == 0 or np.any(np.diff(samples) <= 0):
        raise core.DomainError("sample times must be non-empty and strictly increasing")
    if samples[0] < t0 or samples[-1] > t1:
        raise core.DomainError(f"sample times outside {t_span=}")

    y0 = np.asarray(y0)
    out = np.empty((samples.size, y0.size), dtype=y0.dtype)
    stats = core.IntegrationStats()
    n_done = 0
    while n_done < samples.size and samples[n_done] <= t0:
        out[n_done] = y0
        n_done += 1

    if bound is not None and not bound(y0):
        return IntegrationResult(
            times=samples[:0],
            y=out[:0],
            truncated=True,
            message="initial state outside admissible bounds",
            stats=stats,
        )

    method = "bdf" if strategy == "bdf" else "rk45"
    solver = _make_solver(method, fun, t0, y0, t1, tol, jac)
    window: Deque[int] = collections.deque(maxlen=SWITCH_WINDOW)
    nfev_prior = 0
    truncated, message = False, None

    while n_done < samples.size and solver.status == "running":
        nfev_before = solver.nfev
        step_msg = solver.step()
        if solver.status == "failed":
            truncated, message = True, step_msg
            LOGGER.warning(f"Integration failed at t={solver.t}: {step_msg}")
            break

        n_attempts = 1
        if isinstance(solver, sp_integrate.RK45):
            # Every RK45 attempt costs n_stages evaluations; dense output costs none
            n_attempts = max(1, (solver.nfev - nfev_before) // solver.n_stages)
        stats.n_accepted += 1
        stats.n_rejected += n_attempts - 1
        window.append(n_attempts - 1)

        hi = int(np.searchsorted(samples, solver.t, side="right"))
        if hi > n_done:
            vals = solver.dense_output()(samples[n_done:hi]).T
            if bound is not None:
                bad = [k for k, row in enumerate(vals) if not bound(row)]
                if bad:
                    out[n_done : n_done + bad[0]] = vals[: bad[0]]
                    n_done += bad[0]
                    truncated, message = True, "state left admissible bounds"
                    LOGGER.warning(f"Integration stopped near t={solver.t}: {message}")
                    break
            out[n_done:hi] = vals
            n_done = hi
        if bound is not None and not bound(solver.y):
            truncated, message = True, "state left admissible bounds"
            LOGGER.warning(f"Integration stopped at t={solver.t}: {message}")
            break

        if (
            strategy == "auto"
            and isinstance(solver, sp_integrate.RK45)
            and len(window) == window.maxlen
        ):
            rejected = sum(window)
            rate = rejected / (rejected + len(window))
            if rate > SWITCH_REJECT_RATE:
                LOGGER.info(f"Switching RK45 -> BDF at t={solver.t} ({rate=:.2f})")
                stats.switched_at = float(solver.t)
                nfev_prior += solver.nfev
                solver = _make_solver("bdf", fun, solver.t, solver.y, t1, tol, jac)

    stats.nfev = nfev_prior + solver.nfev
    stats.njev = solver.njev
    stats.final_method = "bdf" if isinstance(solver, sp_integrate.BDF) else "rk45"
    if not truncated and n_done < samples.size:
        truncated, message = True, f"solver stopped early with {solver.status=}"
    return IntegrationResult(
        times=samples[:n_done],
        y=out[:n_done],
        truncated=truncated,
        message=message,
        stats=stats,
    )
