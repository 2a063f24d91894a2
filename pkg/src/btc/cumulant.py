"""Gaussian closure: magnetization plus two-site correlators with third cumulants set to
zero.

Two engines share the per-distance pair equations in pair_rhs:

* thermodynamic limit: nine variables (m, and the six entries of one symmetric C), with
  the explicit right-hand side in gaussian_rhs_limit;
* finite N: m plus one symmetric C_r per distance r = 1..floor(N/2), coupled through the
  Gram coefficients of the jump operators.

Correlators are C^ab = <sigma_j^a sigma_l^b> for j != l, so an uncorrelated product
state has C = m m^T.
"""

import functools
import logging
from typing import Optional, Union

import numpy as np  # type: ignore[import]
import pydantic
from btc import core, coupling, integrate
from btc.meanfield import sample_grid
from btc.registry import Defaults

LOGGER = logging.getLogger()

X, Y, Z = 0, 1, 2
CORR_BOUND = 1 + 1e-6  # Pauli products have operator norm one

# Levi-Civita symbol
LEVI_CIVITA = np.zeros((3, 3, 3))
for _a, _b, _c in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
    LEVI_CIVITA[_a, _b, _c] = 1.0
    LEVI_CIVITA[_a, _c, _b] = -1.0

GaussLike = Union[core.GaussState, core.FiniteGaussState]

########################################################################################
# RIGHT-HAND SIDES #####################################################################
########################################################################################


def _limit_rhs(y: np.ndarray, J: float, gamma: float, F: float) -> np.ndarray:
    mx, my, mz, cxx, cxy, cxz, cyy, cyz, czz = y
    g = 1.0 - F
    h = 2.0 - F
    half = 0.5 * gamma
    pump = 2 * F * (1 - mz) + (cxx + cyy) * g
    return np.array(
        [
            -half * F * mx - half * g * cxz,
            2 * J * mz - half * F * my - half * g * cyz,
            -2 * J * my + gamma * F * (1 - mz) + half * g * (cxx + cyy),
            -gamma * (mx * (F * mx + h * cxz - 2 * mx * mz) + mz * cxx),
            2 * J * cxz
            - half
            * (
                mx * (F * my + h * cyz - 2 * my * mz)
                + my * (F * mx + h * cxz - 2 * mx * mz)
                + 2 * mz * cxy
            ),
            -2 * J * cxy
            + half
            * (
                mx * (pump + 2 * cxx - 2 * mx * mx + 2 * mz * mz - czz)
                + my * (2 * cxy - 2 * mx * my)
                - mz * (F * mx + h * cxz)
            ),
            4 * J * cyz - gamma * (my * (F * my + h * cyz - 2 * my * mz) + mz * cyy),
            2 * J * (czz - cyy)
            + half
            * (
                mx * (2 * cxy - 2 * mx * my)
                + my * (pump + 2 * cyy - 2 * my * my + 2 * mz * mz - czz)
                - mz * (F * my + h * cyz)
            ),
            -4 * J * cyz
            + gamma
            * (
                2 * mx * (cxz - mx * mz)
                + 2 * my * (cyz - my * mz)
                + mz * pump
            ),
        ]
    )


def gaussian_rhs_limit(state: core.GaussState, params: core.ModelParams) -> np.ndarray:
    """Time derivative of (mx, my, mz, Cxx, Cxy, Cxz, Cyy, Cyz, Czz) in the N -> inf
    limit.
    """
    if not params.thermodynamic_limit:
        raise core.PreconditionError("use gaussian_rhs_finite when n_sites is set")
    F = coupling.f_coeff_limit(params.eta)
    return _limit_rhs(state.as_array(), params.J, params.gamma, F)


def magnetization_rhs(
    m: np.ndarray, f_self: float, b_sum: np.ndarray, J: float, gamma: float
) -> np.ndarray:
    """dm/dt given the Gram-weighted correlator sum B = sum_{s != 0} G(s) C(s)."""
    mx, my, mz = m
    half = 0.5 * gamma
    return np.array(
        [
            -half * f_self * mx - half * b_sum[X, Z],
            2 * J * mz - half * f_self * my - half * b_sum[Y, Z],
            -2 * J * my
            + gamma * f_self * (1 - mz)
            + half * (b_sum[X, X] + b_sum[Y, Y]),
        ]
    )


def pair_rhs(
    m: np.ndarray,
    corr: np.ndarray,
    f_pair: np.ndarray,
    f_self: float,
    a_sum: np.ndarray,
    b_sum: np.ndarray,
    J: float,
    gamma: float,
) -> np.ndarray:
    """dC_r/dt for a stack of distances.

    Args:
        m: magnetization (3,)
        corr: C_r, shape (R, 3, 3)
        f_pair: Gram coefficient at each distance r, shape (R,)
        f_self: Gram coefficient at distance 0 (i.e., F^(N))
        a_sum: sum_{s != 0} G(s - r) C(s) for each r, shape (R, 3, 3)
        b_sum: sum_{s != 0} G(s) C(s), shape (3, 3)
    """
    mx, my, mz = m
    u_y = np.array([0.0, 1 - mz, my])
    u_x = np.array([1 - mz, 0.0, mx])
    cov = corr - 2 * np.outer(m, m)

    def _moment(comp: int, u: np.ndarray) -> np.ndarray:
        # P[r, a, t] for the jump direction comp
        left = (f_pair[:, None] * u[None, :] + a_sum[:, :, comp])[:, :, None]
        right = (f_self * u + b_sum[comp, :])[None, None, :]
        return m[comp] * cov + m[None, None, :] * left + m[None, :, None] * right

    p_y = _moment(Y, u_y)
    p_x = _moment(X, u_x)
    dissipative = np.einsum("bt,rat->rab", LEVI_CIVITA[:, X, :], p_y) - np.einsum(
        "bt,rat->rab", LEVI_CIVITA[:, Y, :], p_x
    )
    rot = LEVI_CIVITA[X]
    coherent = np.einsum("at,rtb->rab", rot, corr) + np.einsum("bt,rat->rab", rot, corr)
    return 2 * J * coherent + 0.5 * gamma * (
        dissipative + dissipative.transpose(0, 2, 1)
    )


class FiniteKernel(pydantic.BaseModel):
    """Index tables turning distance-resolved correlators into the Gram-weighted sums
    needed by pair_rhs.
    """

    model_config = pydantic.ConfigDict(frozen=True, arbitrary_types_allowed=True)

    n_sites: int
    eta: float
    f_self: float
    f_pair: np.ndarray  # (R,)
    weights: np.ndarray  # (R, N), G(s - r) with the s = 0 column zeroed
    self_weights: np.ndarray  # (N,), G(s) with s = 0 zeroed
    dist_index: np.ndarray  # (N,), distance of s from 0 minus one; -1 at s = 0

    def gather(self, corr: np.ndarray) -> np.ndarray:
        """C(s) for every s = 0..N-1 relative to site 0 (zero at s = 0)."""
        full = corr[np.maximum(self.dist_index, 0)]
        full[self.dist_index < 0] = 0.0
        return full


@functools.lru_cache(maxsize=32)
def finite_kernel(n_sites: int, eta: float) -> FiniteKernel:
    table = coupling.coupling_table(n_sites, eta)
    gram = table.gram_row()
    n_dist = n_sites // 2
    shifts = np.arange(n_sites)
    weights = np.stack([gram[(shifts - r) % n_sites] for r in range(1, n_dist + 1)])
    weights[:, 0] = 0.0
    self_weights = gram.copy()
    self_weights[0] = 0.0
    dist_index = np.array(
        [coupling.site_distance(0, s, n_sites) - 1 for s in range(n_sites)]
    )
    return FiniteKernel(
        n_sites=n_sites,
        eta=eta,
        f_self=float(table.gram[0]),
        f_pair=np.array(table.gram[1:]),
        weights=weights,
        self_weights=self_weights,
        dist_index=dist_index,
    )


def _unpack_finite(y: np.ndarray, n_dist: int) -> tuple:
    return y[:3], core.sym_from_flat(y[3:].reshape(n_dist, 6))


def _finite_rhs(
    y: np.ndarray, kernel: FiniteKernel, J: float, gamma: float
) -> np.ndarray:
    n_dist = kernel.n_sites // 2
    m, corr = _unpack_finite(y, n_dist)
    full = kernel.gather(corr)
    a_sum = np.einsum("rs,sab->rab", kernel.weights, full)
    b_sum = np.einsum("s,sab->ab", kernel.self_weights, full)
    dm = magnetization_rhs(m, kernel.f_self, b_sum, J, gamma)
    dcorr = pair_rhs(m, corr, kernel.f_pair, kernel.f_self, a_sum, b_sum, J, gamma)
    return np.concatenate([dm, core.sym_to_flat(dcorr).reshape(-1)])


def gaussian_rhs_finite(
    state: core.FiniteGaussState, params: core.ModelParams
) -> np.ndarray:
    """Time derivative of the finite-N state in FiniteGaussState.as_array layout."""
    if params.n_sites is None or params.n_sites < 2:
        raise core.PreconditionError("the finite-size closure needs n_sites >= 2")
    if state.n_sites != params.n_sites:
        raise core.DomainError(f"state is for {state.n_sites} sites, {params.n_sites=}")
    kernel = finite_kernel(params.n_sites, params.eta)
    return _finite_rhs(state.as_array(), kernel, params.J, params.gamma)


########################################################################################
# FLUCTUATIONS #########################################################################
########################################################################################


def pair_multiplicity(n_sites: int) -> np.ndarray:
    """Number of partners at each distance r = 1..floor(N/2) of one site."""
    mult = np.full(n_sites // 2, 2.0)
    if n_sites % 2 == 0 and n_sites >= 2:
        mult[-1] = 1.0
    return mult


def _delta_z(mz: np.ndarray, czz: np.ndarray, n_sites: Optional[int]) -> np.ndarray:
    """Delta_z from mz (n,) and Czz per distance (n, R)."""
    if n_sites is None:
        return czz[:, 0] - mz**2
    mult = pair_multiplicity(n_sites)
    return czz @ mult / (n_sites - 1) - mz**2


def variance_z(state: GaussLike) -> float:
    """Delta_z = Czz - mz^2, with Czz averaged over all distinct pairs at finite N."""
    if isinstance(state, core.GaussState):
        return float(state.c[5] - state.m.mz**2)
    czz = state.corr[None, :, Z, Z]
    return float(_delta_z(np.array([state.m.mz]), czz, state.n_sites)[0])


########################################################################################
# INTEGRATION ##########################################################################
########################################################################################


def _within_bounds(y: np.ndarray) -> bool:
    return bool(np.all(np.abs(y) <= CORR_BOUND))


def integrate_gaussian(
    params: core.ModelParams,
    init: Optional[Union[GaussLike, core.MagState]] = None,
    t_max: float = 20.0,
    tol: Optional[core.ToleranceSpec] = None,
    n_samples: Optional[int] = None,
    strategy: str = "bdf",
    raise_on_truncation: bool = False,
) -> core.GaussTrajectory:
    """Integrates the Gaussian closure (thermodynamic limit unless params.n_sites).

    The run stops at the first sample where the solver fails or a variable leaves
    [-1, 1] (plus slack). By default the partial trajectory is returned with truncated
    set; raise_on_truncation turns that into an IntegrationError carrying it.
    """
    tol = tol if tol is not None else Defaults.TOL
    n_sites = params.n_sites
    if init is None:
        init = Defaults.INIT_UP
    if isinstance(init, core.MagState):
        if n_sites is None:
            init = core.GaussState.uncorrelated(init)
        else:
            init = core.FiniteGaussState.uncorrelated(init, n_sites)

    J, gamma = params.J, params.gamma
    if n_sites is None:
        if not isinstance(init, core.GaussState):
            raise core.DomainError("thermodynamic-limit runs need a GaussState init")
        F = coupling.f_coeff_limit(params.eta)

        def fun(t: float, y: np.ndarray) -> np.ndarray:
            return _limit_rhs(y, J, gamma, F)

        n_dist = 1
    else:
        if not isinstance(init, core.FiniteGaussState) or init.n_sites != n_sites:
            raise core.DomainError(
                f"finite runs need a FiniteGaussState for {n_sites=}"
            )
        if n_sites < 2:
            raise core.PreconditionError("the finite-size closure needs n_sites >= 2")
        kernel = finite_kernel(n_sites, params.eta)

        def fun(t: float, y: np.ndarray) -> np.ndarray:
            return _finite_rhs(y, kernel, J, gamma)

        n_dist = n_sites // 2

    jt = sample_grid(t_max, n_samples)
    result = integrate.integrate(
        fun,
        (0.0, t_max / J),
        init.as_array(),
        jt / J,
        tol,
        strategy=strategy,
        bound=_within_bounds,
    )
    m = result.y[:, :3]
    corr = core.sym_from_flat(result.y[:, 3:].reshape(len(result.times), n_dist, 6))
    traj = core.GaussTrajectory(
        times=result.times * J,
        m=m,
        corr=corr,
        delta_z=_delta_z(m[:, Z], corr[:, :, Z, Z], n_sites),
        params=params,
        truncated=result.truncated,
        message=result.message,
        stats=result.stats,
    )
    if result.truncated:
        t_end = traj.times[-1] if len(traj.times) else 0.0
        LOGGER.warning(f"Gaussian run truncated at Jt={t_end}: {result.message}")
        if raise_on_truncation:
            raise core.IntegrationError(
                f"Gaussian integration stopped early: {result.message}", partial=traj
            )
    return traj
