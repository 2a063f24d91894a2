"""Closed three-variable dynamics for the magnetization.

With a = gamma / 2 and F the dissipation weight:

    dmx/dt = -a F mx - a (1 - F) mx mz
    dmy/dt = 2 J mz - a F my - a (1 - F) my mz
    dmz/dt = -2 J my + gamma F (1 - mz) + a (1 - F) (mx^2 + my^2)

F is the thermodynamic-limit weight unless params.n_sites is set. For F = 0 the total
magnetization N = |m|^2 and M = mx / (my - 1/chi) are conserved.
"""

import logging
from typing import Optional, Sequence, Tuple, Union

import numpy as np  # type: ignore[import]
from btc import core, coupling, integrate
from btc.registry import Defaults

LOGGER = logging.getLogger()

SINGULAR_TOL = 1e-14  # |my - 1/chi| below which M is reported as singular

StateLike = Union[core.MagState, Sequence[float], np.ndarray]


def _vec(state: StateLike) -> np.ndarray:
    if isinstance(state, core.MagState):
        return state.as_array()
    return np.asarray(state, dtype=float).reshape(3)


def _rhs_array(m: np.ndarray, J: float, gamma: float, F: float) -> np.ndarray:
    mx, my, mz = m
    a = 0.5 * gamma
    g = 1.0 - F
    return np.array(
        [
            -a * F * mx - a * g * mx * mz,
            2 * J * mz - a * F * my - a * g * my * mz,
            -2 * J * my + gamma * F * (1 - mz) + a * g * (mx * mx + my * my),
        ]
    )


def _jacobian_array(m: np.ndarray, J: float, gamma: float, F: float) -> np.ndarray:
    mx, my, mz = m
    a = 0.5 * gamma
    g = 1.0 - F
    diag = -a * F - a * g * mz
    return np.array(
        [
            [diag, 0.0, -a * g * mx],
            [0.0, diag, 2 * J - a * g * my],
            [2 * a * g * mx, -2 * J + 2 * a * g * my, -gamma * F],
        ]
    )


def mf_rhs(state: StateLike, params: core.ModelParams) -> np.ndarray:
    F = coupling.dissipation_weight(params)
    return _rhs_array(_vec(state), params.J, params.gamma, F)


def mf_jacobian(state: StateLike, params: core.ModelParams) -> np.ndarray:
    F = coupling.dissipation_weight(params)
    return _jacobian_array(_vec(state), params.J, params.gamma, F)


def conserved_quantities(
    state: StateLike, params: core.ModelParams
) -> core.ConservedPair:
    m = _vec(state)
    n_total = float(m @ m)
    if params.chi == 0:
        # M -> mx / (my - inf)
        return core.ConservedPair(n_total=n_total, m_ratio=0.0)
    denom = m[1] - 1.0 / params.chi
    if abs(denom) < SINGULAR_TOL:
        return core.ConservedPair(n_total=n_total, m_ratio=None, singular=True)
    return core.ConservedPair(n_total=n_total, m_ratio=float(m[0] / denom))


def _conserved_series(
    states: np.ndarray, chi: float
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    n_total = np.einsum("ij,ij->i", states, states)
    if chi == 0:
        zeros = np.zeros(len(states))
        return n_total, zeros, zeros.astype(bool)
    denom = states[:, 1] - 1.0 / chi
    singular = np.abs(denom) < SINGULAR_TOL
    ratio = np.ma.masked_array(states[:, 0], singular) / np.ma.masked_array(
        denom, singular
    )
    return n_total, np.ma.filled(ratio, np.nan), singular


def sample_grid(t_max: float, n_samples: Optional[int] = None) -> np.ndarray:
    if t_max <= 0:
        raise core.DomainError(f"need a positive horizon, got {t_max=}")
    n = n_samples if n_samples is not None else Defaults.N_SAMPLES
    if n < 2:
        raise core.DomainError(f"need at least two samples, got {n=}")
    return np.linspace(0.0, t_max, n)


def integrate_mf(
    params: core.ModelParams,
    init: Optional[core.MagState] = None,
    t_max: float = 100.0,
    tol: Optional[core.ToleranceSpec] = None,
    n_samples: Optional[int] = None,
    strategy: str = "auto",
) -> core.Trajectory:
    """Integrates the mean-field equations from init over [0, t_max] (Jt units).

    Raises:
        IntegrationError: carrying the truncated Trajectory as .partial
    """
    init = init if init is not None else Defaults.INIT
    tol = tol if tol is not None else Defaults.TOL
    jt = sample_grid(t_max, n_samples)
    J, gamma = params.J, params.gamma
    F = coupling.dissipation_weight(params)
    LOGGER.debug(f"Mean-field run: {params=} {F=} {init=}")

    result = integrate.integrate(
        lambda t, y: _rhs_array(y, J, gamma, F),
        (0.0, t_max / J),
        init.as_array(),
        jt / J,
        tol,
        jac=lambda t, y: _jacobian_array(y, J, gamma, F),
        strategy=strategy,
    )
    n_total, ratio, singular = _conserved_series(result.y, params.chi)
    if np.any(singular):
        LOGGER.warning(f"M undefined at {int(np.sum(singular))} samples (my = 1/chi)")
    traj = core.Trajectory(
        times=result.times * J,
        states=result.y,
        params=params,
        n_total=n_total,
        m_ratio=ratio,
        m_ratio_singular=singular,
        truncated=result.truncated,
        message=result.message,
        stats=result.stats,
    )
    if result.truncated:
        raise core.IntegrationError(
            f"mean-field integration stopped early: {result.message}", partial=traj
        )
    if F == 0 and len(traj.times) > 1:
        n_drift, m_drift = traj.drift()
        LOGGER.debug(f"Conserved-pair drift: {n_drift=:.3e} {m_drift=:.3e}")
    return traj
