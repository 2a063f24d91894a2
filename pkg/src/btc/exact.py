"""Brute-force Lindblad evolution of small spin chains, used as the reference for the
closed equations.

Conventions: site 0 is the most significant tensor factor, |up> is basis index 0 and
sigma^+ = |up><down|. The Hamiltonian is H = -2 J S_x, the sign for which
<S> follows dm_y/dt = +2 J m_z.
"""

import functools
import logging
import os
import string
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np  # type: ignore[import]
import pydantic
from btc import core, coupling, integrate
from btc.cumulant import pair_multiplicity
from btc.meanfield import sample_grid
from btc.registry import Defaults
from scipy import sparse  # type: ignore[import]

LOGGER = logging.getLogger()

MAX_EXACT_SITES = int(os.environ.get("BTC_LAB_MAX_EXACT_SITES", "12"))  # 4^N complex

AXES = {"x": 0, "y": 1, "z": 2}

PAULI = np.array(
    [
        [[0, 1], [1, 0]],
        [[0, -1j], [1j, 0]],
        [[1, 0], [0, -1]],
    ],
    dtype=complex,
)
SIGMA_PLUS = np.array([[0, 1], [0, 0]], dtype=complex)
# <sigma^a (x) sigma^b> on a two-site reduced density matrix
PAIR_PAULI = np.einsum("aij,bkl->abikjl", PAULI, PAULI).reshape(3, 3, 4, 4)

########################################################################################
# STATES ###############################################################################
########################################################################################


class DensityMatrix(pydantic.BaseModel):
    model_config = pydantic.ConfigDict(frozen=True, arbitrary_types_allowed=True)

    data: np.ndarray  # complex (2^N, 2^N)

    @pydantic.field_validator("data")
    @classmethod
    def _square_power_of_two(cls, data: np.ndarray) -> np.ndarray:
        data = np.asarray(data, dtype=complex)
        dim = data.shape[0]
        if data.ndim != 2 or data.shape[1] != dim or dim < 2 or dim & (dim - 1):
            raise ValueError(f"density matrix must be 2^N x 2^N, got {data.shape}")
        return data

    @property
    def dim(self) -> int:
        return int(self.data.shape[0])

    @property
    def n_sites(self) -> int:
        return self.dim.bit_length() - 1

    @classmethod
    def all_up(cls, n_sites: int) -> "DensityMatrix":
        data = np.zeros((2**n_sites, 2**n_sites), dtype=complex)
        data[0, 0] = 1.0
        return cls(data=data)

    @classmethod
    def maximally_mixed(cls, n_sites: int) -> "DensityMatrix":
        return cls(data=np.eye(2**n_sites, dtype=complex) / 2**n_sites)

    @classmethod
    def product(
        cls, bloch_vectors: Sequence[Union[core.MagState, Sequence[float]]]
    ) -> "DensityMatrix":
        """Product state with site j in (I + m_j . sigma) / 2."""
        data = np.ones((1, 1), dtype=complex)
        for vec in bloch_vectors:
            m = vec.as_array() if isinstance(vec, core.MagState) else np.asarray(vec)
            site = 0.5 * (np.eye(2) + np.einsum("a,aij->ij", m, PAULI))
            data = np.kron(data, site)
        return cls(data=data)

    @classmethod
    def from_pure(cls, psi: np.ndarray) -> "DensityMatrix":
        psi = np.asarray(psi, dtype=complex)
        return cls(data=np.outer(psi, psi.conj()) / np.vdot(psi, psi).real)

    def trace_error(self) -> float:
        return float(abs(np.trace(self.data) - 1))

    def hermiticity_error(self) -> float:
        return float(np.max(np.abs(self.data - self.data.conj().T)))

    def min_eigenvalue(self) -> float:
        herm = 0.5 * (self.data + self.data.conj().T)
        return float(np.linalg.eigvalsh(herm)[0])


########################################################################################
# OPERATORS ############################################################################
########################################################################################


class OperatorSet(pydantic.BaseModel):
    """Sparse operators for one (N, eta, J)."""

    model_config = pydantic.ConfigDict(frozen=True, arbitrary_types_allowed=True)

    n_sites: int
    eta: float
    J: float
    hamiltonian: sparse.csr_matrix
    jumps: List[sparse.csr_matrix]
    jumps_adj: List[sparse.csr_matrix]
    jump_sum: sparse.csr_matrix  # sum_i L_i^dagger L_i
    spin: List[sparse.csr_matrix]  # S_x, S_y, S_z
    s2: sparse.csr_matrix


def site_operator(op: np.ndarray, site: int, n_sites: int) -> sparse.csr_matrix:
    """op acting on one site (0-based) of an n_sites chain."""
    left = sparse.identity(2**site, format="csr")
    right = sparse.identity(2 ** (n_sites - site - 1), format="csr")
    return sparse.kron(sparse.kron(left, sparse.csr_matrix(op)), right, format="csr")


def _check_sites(n_sites: int) -> None:
    if n_sites < 1:
        raise core.DomainError(f"need at least one site, got {n_sites=}")
    if n_sites > MAX_EXACT_SITES:
        raise core.ResourceError(
            f"exact engine is limited to {MAX_EXACT_SITES} sites, got {n_sites=}"
        )


def _total(ops: Sequence[sparse.csr_matrix]) -> sparse.csr_matrix:
    return functools.reduce(lambda a, b: a + b, ops).tocsr()


def build_operators(
    n_sites: int, eta: float, params: Optional[core.ModelParams] = None
) -> OperatorSet:
    _check_sites(n_sites)
    J = params.J if params is not None else 0.5
    table = coupling.coupling_table(n_sites, eta)

    pauli = [
        [site_operator(PAULI[a], j, n_sites) for j in range(n_sites)] for a in range(3)
    ]
    plus = [site_operator(SIGMA_PLUS, j, n_sites) for j in range(n_sites)]
    jumps = []
    for i in range(1, n_sites + 1):
        row = table.row(i)
        jumps.append(_total([row[j] * plus[j] for j in range(n_sites)]))
    jumps_adj = [op.conj().T.tocsr() for op in jumps]
    spin = [0.5 * _total(pauli[a]) for a in range(3)]
    LOGGER.debug(f"Built operators for {n_sites=} {eta=} (dim {2**n_sites})")
    return OperatorSet(
        n_sites=n_sites,
        eta=eta,
        J=J,
        hamiltonian=(-2 * J * spin[0]).tocsr(),
        jumps=jumps,
        jumps_adj=jumps_adj,
        jump_sum=_total([adj @ op for adj, op in zip(jumps_adj, jumps)]),
        spin=spin,
        s2=_total([s @ s for s in spin]),
    )


########################################################################################
# DYNAMICS #############################################################################
########################################################################################


def _times_op(x: np.ndarray, op_adj: sparse.csr_matrix) -> np.ndarray:
    # x @ op for op = op_adj^dagger, as (op_adj x^dagger)^dagger so the sparse factor
    # stays on the left
    return (op_adj @ x.conj().T).conj().T


def _lindblad_array(data: np.ndarray, ops: OperatorSet, gamma: float) -> np.ndarray:
    H, K = ops.hamiltonian, ops.jump_sum
    out = -1j * (H @ data - _times_op(data, H))
    out -= 0.5 * gamma * (K @ data + _times_op(data, K))
    for L in ops.jumps:
        out += gamma * _times_op(L @ data, L)
    return out


def lindblad_rhs(
    rho: Union[DensityMatrix, np.ndarray], ops: OperatorSet, gamma: float
) -> np.ndarray:
    """-i[H, rho] + gamma sum_i (L_i rho L_i^dagger - {L_i^dagger L_i, rho} / 2)."""
    data = rho.data if isinstance(rho, DensityMatrix) else np.asarray(rho)
    if data.shape != (2**ops.n_sites, 2**ops.n_sites):
        raise core.DomainError(f"shape mismatch: {data.shape=} for {ops.n_sites=}")
    return _lindblad_array(data, ops, gamma)


def _expect(op: sparse.csr_matrix, data: np.ndarray) -> complex:
    return complex(op.multiply(data.T).sum())


def s2_rate(
    rho: Union[DensityMatrix, np.ndarray], ops: OperatorSet, gamma: float
) -> float:
    """d<S^2>/dt = Tr(S^2 L[rho])."""
    return _expect(ops.s2, lindblad_rhs(rho, ops, gamma)).real


########################################################################################
# OBSERVABLES ##########################################################################
########################################################################################


def reduced_density_matrix(
    rho: Union[DensityMatrix, np.ndarray], n_sites: int, sites: Sequence[int]
) -> np.ndarray:
    """Partial trace keeping the given 0-based sites, in the given order."""
    data = rho.data if isinstance(rho, DensityMatrix) else np.asarray(rho)
    if len(set(sites)) != len(sites) or any(not 0 <= s < n_sites for s in sites):
        raise core.DomainError(f"invalid site selection {sites=} for {n_sites=}")
    letters = string.ascii_letters
    rows = list(letters[:n_sites])
    cols = list(letters[n_sites : 2 * n_sites])
    for s in range(n_sites):
        if s not in sites:
            cols[s] = rows[s]
    out = "".join(rows[s] for s in sites) + "".join(cols[s] for s in sites)
    tensor = data.reshape((2,) * (2 * n_sites))
    red = np.einsum("".join(rows) + "".join(cols) + "->" + out, tensor)
    k = len(sites)
    return red.reshape(2**k, 2**k)


def distance_correlators(data: np.ndarray, n_sites: int) -> np.ndarray:
    """C_r^ab averaged over the N ordered pairs (j, j + r), r = 1..floor(N/2)."""
    out = np.zeros((n_sites // 2, 3, 3))
    for r in range(1, n_sites // 2 + 1):
        for j in range(n_sites):
            pair = reduced_density_matrix(data, n_sites, [j, (j + r) % n_sites])
            out[r - 1] += np.einsum("abij,ji->ab", PAIR_PAULI, pair).real
        out[r - 1] /= n_sites
    return out


def observables(
    rho: Union[DensityMatrix, np.ndarray], ops: OperatorSet, t: float = 0.0
) -> core.ExactObservables:
    data = rho.data if isinstance(rho, DensityMatrix) else np.asarray(rho)
    n = ops.n_sites
    m = np.array([2 * _expect(s, data).real / n for s in ops.spin])
    c_r = distance_correlators(data, n)
    if n > 1:
        czz = float(pair_multiplicity(n) @ c_r[:, 2, 2]) / (n - 1)
        delta_z = czz - m[2] ** 2
    else:
        delta_z = float("nan")
    return core.ExactObservables(
        t=t,
        m=core.MagState.from_array(m),
        c_r=c_r.tolist(),
        delta_z=delta_z,
        s2_norm=4 * _expect(ops.s2, data).real / n**2,
        trace_err=float(abs(np.trace(data) - 1)),
        herm_err=float(np.max(np.abs(data - data.conj().T))),
    )


def third_cumulant(
    rho: Union[DensityMatrix, np.ndarray],
    n_sites: int,
    sites: Tuple[int, int, int],
    axes: Tuple[str, str, str],
) -> float:
    """Joint third cumulant of sigma_j^a, sigma_l^b, sigma_m^c (0-based sites)."""
    if len(set(sites)) != 3:
        raise core.DomainError(
            f"third cumulant needs three distinct sites, got {sites=}"
        )
    red = reduced_density_matrix(rho, n_sites, list(sites))
    paulis = [PAULI[AXES[a]] for a in axes]
    eye = np.eye(2)

    def moment(mask: Tuple[int, int, int]) -> float:
        op = np.ones((1, 1))
        for keep, p in zip(mask, paulis):
            op = np.kron(op, p if keep else eye)
        return float(np.trace(red @ op).real)

    a, b, c = moment((1, 0, 0)), moment((0, 1, 0)), moment((0, 0, 1))
    ab, ac, bc = moment((1, 1, 0)), moment((1, 0, 1)), moment((0, 1, 1))
    abc = moment((1, 1, 1))
    return abc - ab * c - ac * b - bc * a + 2 * a * b * c


def integrate_exact(
    n_sites: int,
    eta: float,
    chi: float,
    init: Optional[DensityMatrix] = None,
    t_max: float = 30.0,
    tol: Optional[core.ToleranceSpec] = None,
    J: float = 0.5,
    n_samples: int = 301,
    strategy: str = "rk45",
    keep_states: bool = False,
) -> core.ExactSeries:
    """Evolves rho under the full Lindbladian and records observables per sample.

    Raises:
        IntegrationError: carrying the partial ExactSeries as .partial
    """
    _check_sites(n_sites)
    params = core.ModelParams(J=J, chi=chi, eta=eta, n_sites=n_sites)
    ops = build_operators(n_sites, eta, params)
    init = init if init is not None else DensityMatrix.all_up(n_sites)
    if init.n_sites != n_sites:
        raise core.DomainError(f"initial state has {init.n_sites} sites, {n_sites=}")
    tol = tol if tol is not None else Defaults.EXACT_TOL
    dim = init.dim
    gamma = params.gamma

    def fun(t: float, y: np.ndarray) -> np.ndarray:
        return _lindblad_array(y.reshape(dim, dim), ops, gamma).reshape(-1)

    jt = sample_grid(t_max, n_samples)
    result = integrate.integrate(
        fun, (0.0, t_max / J), init.data.reshape(-1), jt / J, tol, strategy=strategy
    )
    states = [y.reshape(dim, dim) for y in result.y]
    samples = [observables(s, ops, t * J) for s, t in zip(states, result.times)]
    series = core.ExactSeries(
        params=params,
        samples=samples,
        snapshots=states if keep_states else None,
        truncated=result.truncated,
        message=result.message,
        stats=result.stats,
    )
    worst = max((s.trace_err for s in samples), default=0.0)
    LOGGER.debug(f"Exact run {n_sites=} {eta=} {chi=}: max trace error {worst:.2e}")
    if result.truncated:
        raise core.IntegrationError(
            f"exact integration stopped early: {result.message}", partial=series
        )
    return series


########################################################################################
# COLLECTIVE MODEL #####################################################################
########################################################################################


def collective_spin_operators(n_sites: int) -> Tuple[sparse.csr_matrix, ...]:
    """(S_+, S_-, S_x, S_y, S_z) on the N + 1 symmetric Dicke states, indexed by
    k = S_z + N / 2 (so the all-up state is the last index).
    """
    spin = n_sites / 2
    m_vals = np.arange(n_sites + 1) - spin
    s_z = sparse.diags(m_vals, format="csr")
    raise_vals = np.sqrt(spin * (spin + 1) - m_vals[:-1] * (m_vals[:-1] + 1))
    s_plus = sparse.diags(raise_vals, -1, format="csr")
    s_minus = s_plus.conj().T.tocsr()
    s_x = ((s_plus + s_minus) / 2).tocsr()
    s_y = ((s_plus - s_minus) / 2j).tocsr()
    return s_plus, s_minus, s_x, s_y, s_z


def integrate_collective(
    n_sites: int,
    chi: float,
    t_max: float = 30.0,
    J: float = 0.5,
    tol: Optional[core.ToleranceSpec] = None,
    n_samples: int = 301,
) -> Tuple[np.ndarray, np.ndarray]:
    """All-to-all model H = -2 J S_x, rate gamma / N on S_+, from the all-up state.

    Returns:
        times (Jt) and magnetizations of shape (n, 3)
    """
    gamma = 4 * J * chi
    s_plus, s_minus, s_x, s_y, s_z = collective_spin_operators(n_sites)
    H = (-2 * J * s_x).tocsr()
    L = s_plus * np.sqrt(gamma / n_sites)
    L_adj = L.conj().T.tocsr()
    K = (L_adj @ L).tocsr()
    dim = n_sites + 1

    def fun(t: float, y: np.ndarray) -> np.ndarray:
        rho = y.reshape(dim, dim)
        out = -1j * (H @ rho - _times_op(rho, H))
        out += _times_op(L @ rho, L) - 0.5 * (K @ rho + _times_op(rho, K))
        return out.reshape(-1)

    rho0 = np.zeros((dim, dim), dtype=complex)
    rho0[-1, -1] = 1.0
    jt = sample_grid(t_max, n_samples)
    result = integrate.integrate(
        fun,
        (0.0, t_max / J),
        rho0.reshape(-1),
        jt / J,
        tol if tol is not None else Defaults.EXACT_TOL,
        strategy="rk45",
    )
    if result.truncated:
        raise core.IntegrationError(f"collective run stopped early: {result.message}")
    spin = (s_x, s_y, s_z)
    mags = np.array(
        [[2 * _expect(s, y.reshape(dim, dim)).real for s in spin] for y in result.y]
    )
    mags /= n_sites
    return result.times * J, mags
