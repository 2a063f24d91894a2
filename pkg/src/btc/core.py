"""Primary data types and errors that every part of the lab depends on.

Value types (parameters, states, fixed points) are frozen pydantic models so they can be
shared across worker threads. Series containers hold numpy arrays and are treated as
read-only once returned.
"""

import enum
import math
from typing import Any, List, Optional, Tuple

import numpy as np  # type: ignore[import]
import pydantic

########################################################################################
# ERRORS ###############################################################################
########################################################################################


class BTCError(Exception):
    """Base exception for this package."""

    pass


class DomainError(BTCError, ValueError):
    """Raised for arguments outside an operation's mathematical domain."""

    pass


class PreconditionError(BTCError, ValueError):
    """Raised when an input does not satisfy an operation's stated precondition."""

    pass


class ResourceError(BTCError):
    """Raised when a request would exceed the dense-memory limits of an engine."""

    pass


class InsufficientDataError(BTCError):
    """Raised when a signal does not carry enough features for a fit."""

    pass


class ConfigError(BTCError):
    """Raised for invalid run configurations. The message names the offending key."""

    pass


class NumericalFailure(BTCError):
    """Base class for failures of a numerical procedure. Carries whatever was computed
    before the failure so that callers can still write partial outputs.
    """

    def __init__(self, message: str, partial: Any = None):
        super().__init__(message)
        self.partial = partial


class IntegrationError(NumericalFailure):
    """Raised when a time integration cannot continue (e.g., step-size underflow)."""

    pass


class FitError(NumericalFailure):
    """Raised when a least-squares fit diverges or cannot be set up."""

    pass


########################################################################################
# ENUMS ################################################################################
########################################################################################


class Stability(str, enum.Enum):
    ATTRACTIVE = "attractive"
    REPULSIVE = "repulsive"
    SADDLE = "saddle"
    ELLIPTIC = "elliptic"


class Branch(str, enum.Enum):
    BTC = "btc"
    FERROMAGNETIC = "ferromagnetic"
    GAS = "gas"
    LIQUID = "liquid"
    UNSTABLE_MIDDLE = "unstable-middle"


class Phase(str, enum.Enum):
    BTC = "BTC"
    MAGNETIZED = "magnetized"
    GAS = "gas"
    LIQUID = "liquid"
    COEXISTENCE = "coexistence"


class Engine(str, enum.Enum):
    MEANFIELD = "mf"
    GAUSSIAN = "gauss"
    EXACT = "exact"


########################################################################################
# PARAMETERS AND STATES ################################################################
########################################################################################


class ModelParams(pydantic.BaseModel):
    """Physical parameter set. Exactly one of gamma and chi needs to be given; the other
    is derived as chi = gamma / (4 J). Giving both is allowed only if they agree (e.g.,
    when reloading an echoed config).

    eta may be math.inf, which selects the zero-range limit f_ij = delta_ij.
    """

    model_config = pydantic.ConfigDict(frozen=True)

    J: float = pydantic.Field(0.5, gt=0)  # drive amplitude, energy units
    gamma: float = math.nan  # dissipation rate, energy units
    chi: float = math.nan  # gamma / (4 J), dimensionless
    eta: float = pydantic.Field(0.0, ge=0)  # power-law exponent
    n_sites: Optional[int] = pydantic.Field(None, ge=1)  # None means N -> infinity

    @pydantic.model_validator(mode="before")
    @classmethod
    def _derive_rate_pair(cls, data: Any) -> Any:
        if not isinstance(data, dict):
            return data
        data = dict(data)
        J = float(data.get("J", 0.5))
        if J <= 0:
            raise ValueError(f"J must be positive, got {J=}")

        def _given(key: str) -> bool:
            val = data.get(key)
            return val is not None and not math.isnan(float(val))

        if not _given("gamma") and not _given("chi"):
            raise ValueError("one of gamma or chi is required")
        if not _given("gamma"):
            data["gamma"] = 4 * J * float(data["chi"])
        elif not _given("chi"):
            data["chi"] = float(data["gamma"]) / (4 * J)
        else:
            gamma, chi = float(data["gamma"]), float(data["chi"])
            if not math.isclose(gamma, 4 * J * chi, rel_tol=1e-12, abs_tol=1e-300):
                raise ValueError(f"gamma and chi disagree: {gamma=} {chi=} {J=}")
        return data

    @pydantic.field_validator("gamma", "chi")
    @classmethod
    def _non_negative(cls, val: float) -> float:
        if val < 0:
            raise ValueError(f"rates must be non-negative, got {val}")
        return val

    @property
    def thermodynamic_limit(self) -> bool:
        return self.n_sites is None

    @property
    def long_range(self) -> bool:
        """Long-range regime in the sense of the thermodynamic limit (F_eta = 0)."""
        return self.eta <= 1.0


class MagState(pydantic.BaseModel):
    """Magnetization components m_a = 2 <S_a> / N."""

    model_config = pydantic.ConfigDict(frozen=True)

    mx: float
    my: float
    mz: float

    @classmethod
    def from_array(cls, arr: Any) -> "MagState":
        vec = np.asarray(arr, dtype=float).reshape(3)
        return cls(mx=float(vec[0]), my=float(vec[1]), mz=float(vec[2]))

    def as_array(self) -> np.ndarray:
        return np.array([self.mx, self.my, self.mz], dtype=float)

    @property
    def n_total(self) -> float:
        return self.mx**2 + self.my**2 + self.mz**2


class ToleranceSpec(pydantic.BaseModel):
    model_config = pydantic.ConfigDict(frozen=True)

    rtol: float = pydantic.Field(1e-9, gt=0)
    atol: float = pydantic.Field(1e-12, gt=0)
    max_step: float = pydantic.Field(math.inf, gt=0)  # integrator time units


class ConservedPair(pydantic.BaseModel):
    """The long-range constants of motion. m_ratio is None when m_y == 1/chi, in which
    case singular is set rather than letting a NaN propagate.
    """

    model_config = pydantic.ConfigDict(frozen=True)

    n_total: float
    m_ratio: Optional[float]
    singular: bool = False


########################################################################################
# FIXED POINTS AND PHASES ##############################################################
########################################################################################


class FixedPoint(pydantic.BaseModel):
    model_config = pydantic.ConfigDict(frozen=True)

    m: MagState
    eigenvalues: List[Tuple[float, float]]  # (real, imag) pairs of the Jacobian
    stability: Stability
    branch: Branch

    @property
    def eigvals(self) -> np.ndarray:
        return np.array([complex(re, im) for re, im in self.eigenvalues])

    @property
    def attractive(self) -> bool:
        return self.stability == Stability.ATTRACTIVE


class PhaseDiagramGrid(pydantic.BaseModel):
    chi_axis: List[float]
    eta_axis: List[float]
    labels: List[List[Phase]]  # indexed [eta][chi]
    fixed_points: List[List[List[FixedPoint]]]  # indexed [eta][chi]


class PhasePoint(pydantic.BaseModel):
    """A named location in the (chi, eta) plane."""

    model_config = pydantic.ConfigDict(frozen=True)

    name: str
    chi: float
    eta: float


class CuspPoint(pydantic.BaseModel):
    model_config = pydantic.ConfigDict(frozen=True)

    chi: float
    eta: float
    mz: float
    method: str  # how the point was obtained


class NonanalyticFit(pydantic.BaseModel):
    """Parameters of m_z(eta) = a exp(-b / (eta - 1)^c)."""

    model_config = pydantic.ConfigDict(frozen=True)

    a: float
    b: float
    c: float
    residual_norm: float  # l2 norm of log-space residuals
    max_rel_err: float


########################################################################################
# TIME SERIES ##########################################################################
########################################################################################


class IntegrationStats(pydantic.BaseModel):
    n_accepted: int = 0
    n_rejected: int = 0
    nfev: int = 0
    njev: int = 0
    switched_at: Optional[float] = None  # integrator time of the RK45 -> BDF switch
    final_method: str = ""


class Trajectory(pydantic.BaseModel):
    """Mean-field time series. times are dimensionless (Jt); states has shape (n, 3)."""

    model_config = pydantic.ConfigDict(frozen=True, arbitrary_types_allowed=True)

    times: np.ndarray
    states: np.ndarray
    params: ModelParams
    n_total: np.ndarray
    m_ratio: np.ndarray  # NaN where singular, see m_ratio_singular
    m_ratio_singular: np.ndarray
    truncated: bool = False
    message: Optional[str] = None
    stats: IntegrationStats = pydantic.Field(default_factory=IntegrationStats)

    @property
    def mx(self) -> np.ndarray:
        return self.states[:, 0]

    @property
    def my(self) -> np.ndarray:
        return self.states[:, 1]

    @property
    def mz(self) -> np.ndarray:
        return self.states[:, 2]

    def state_at(self, idx: int) -> MagState:
        return MagState.from_array(self.states[idx])

    def drift(self) -> Tuple[float, float]:
        """Max deviations of the conserved pair from their initial values. Singular
        samples of the ratio are skipped.
        """
        n_drift = float(np.max(np.abs(self.n_total - self.n_total[0])))
        ok = ~self.m_ratio_singular
        if not ok[0] or not np.any(ok):
            return n_drift, math.nan
        m_drift = float(np.max(np.abs(self.m_ratio[ok] - self.m_ratio[0])))
        return n_drift, m_drift


class GaussState(pydantic.BaseModel):
    """Magnetization plus the site-independent two-site correlators, stored as the six
    independent entries (xx, xy, xz, yy, yz, zz).
    """

    model_config = pydantic.ConfigDict(frozen=True)

    m: MagState
    c: Tuple[float, float, float, float, float, float]

    @classmethod
    def uncorrelated(cls, m: MagState) -> "GaussState":
        outer = np.outer(m.as_array(), m.as_array())
        return cls.from_matrix(m, outer)

    @classmethod
    def from_matrix(cls, m: MagState, corr: np.ndarray) -> "GaussState":
        c = [float(corr[a, b]) for a, b in SYM_INDEX]
        return cls(m=m, c=tuple(c))  # type: ignore[arg-type]

    @property
    def matrix(self) -> np.ndarray:
        return sym_from_flat(np.asarray(self.c))

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.m.as_array(), np.asarray(self.c, dtype=float)])


class FiniteGaussState(pydantic.BaseModel):
    """Magnetization plus distance-resolved correlators C_r for r = 1..floor(N/2).
    corr has shape (floor(N/2), 3, 3) and every slice is symmetric.
    """

    model_config = pydantic.ConfigDict(frozen=True, arbitrary_types_allowed=True)

    m: MagState
    n_sites: int
    corr: np.ndarray

    @classmethod
    def uncorrelated(cls, m: MagState, n_sites: int) -> "FiniteGaussState":
        outer = np.outer(m.as_array(), m.as_array())
        corr = np.repeat(outer[None, :, :], n_sites // 2, axis=0)
        return cls(m=m, n_sites=n_sites, corr=corr)

    def as_array(self) -> np.ndarray:
        flat = np.stack([self.corr[:, a, b] for a, b in SYM_INDEX], axis=1)
        return np.concatenate([self.m.as_array(), flat.reshape(-1)])


class VarianceSample(pydantic.BaseModel):
    model_config = pydantic.ConfigDict(frozen=True)

    t: float  # Jt
    delta_z: float


class GaussTrajectory(pydantic.BaseModel):
    """Gaussian-closure time series. corr has shape (n, R, 3, 3) with R = 1 in the
    thermodynamic limit and R = floor(N/2) at finite size.
    """

    model_config = pydantic.ConfigDict(frozen=True, arbitrary_types_allowed=True)

    times: np.ndarray
    m: np.ndarray
    corr: np.ndarray
    delta_z: np.ndarray
    params: ModelParams
    truncated: bool = False
    message: Optional[str] = None
    stats: IntegrationStats = pydantic.Field(default_factory=IntegrationStats)

    def variance_samples(self) -> List[VarianceSample]:
        return [
            VarianceSample(t=float(t), delta_z=float(d))
            for t, d in zip(self.times, self.delta_z)
        ]


class ExactObservables(pydantic.BaseModel):
    model_config = pydantic.ConfigDict(frozen=True)

    t: float  # Jt
    m: MagState
    c_r: List[List[List[float]]]  # [r - 1][a][b], distance-resolved correlators
    delta_z: float
    s2_norm: float  # 4 <S^2> / N^2
    trace_err: float  # |Tr rho - 1|
    herm_err: float  # max |rho - rho^dagger|


class ExactSeries(pydantic.BaseModel):
    model_config = pydantic.ConfigDict(frozen=True, arbitrary_types_allowed=True)

    params: ModelParams
    samples: List[ExactObservables]
    snapshots: Optional[List[np.ndarray]] = None  # density matrices, if requested
    truncated: bool = False
    message: Optional[str] = None
    stats: IntegrationStats = pydantic.Field(default_factory=IntegrationStats)


########################################################################################
# ANALYSIS RESULTS #####################################################################
########################################################################################


class EnvelopeFit(pydantic.BaseModel):
    model_config = pydantic.ConfigDict(frozen=True)

    A0: float
    B: float  # decay rate per unit Jt
    B_stderr: float
    residual: float  # rms of log-amplitude residuals
    peak_times: List[float]
    peak_values: List[float]
    B_refit: Optional[float] = None  # B with the first peak left out

    @property
    def stationary(self) -> bool:
        """Leaving out the first peak moves B by less than one standard error."""
        if self.B_refit is None:
            return True
        return abs(self.B_refit - self.B) < self.B_stderr


class DecayRow(pydantic.BaseModel):
    eta: float
    B: Optional[float] = None
    B_stderr: Optional[float] = None
    B_linear: Optional[float] = None  # small-oscillation rate from the Jacobian
    error: Optional[str] = None  # set if the per-eta fit failed


class DecayScan(pydantic.BaseModel):
    """B(eta) table at fixed chi plus the fit B = beta (eta - 1)^2 + intercept."""

    chi: float
    rows: List[DecayRow]
    beta: Optional[float] = None
    beta_stderr: Optional[float] = None
    intercept: Optional[float] = None


class BasinTrace(pydantic.BaseModel):
    model_config = pydantic.ConfigDict(frozen=True)

    init: MagState
    attractor: Optional[int] = None  # index into the attractive fixed points
    attractor_branch: Optional[Branch] = None
    transit_time: Optional[float] = None  # Jt at which the neighborhood is entered
    spiraled: bool = False  # whether the oscillation-onset detector fired

    @property
    def resolved(self) -> bool:
        return self.attractor is not None


########################################################################################
# WORKERS ##############################################################################
########################################################################################


class TaskOutcome(pydantic.BaseModel):
    """Result of a single task in a parallel map. Never raises; failures are carried as
    a formatted traceback so that one bad cell does not sink a whole sweep.
    """

    model_config = pydantic.ConfigDict(arbitrary_types_allowed=True)

    index: int  # position of the task's input in the submitted sequence
    return_val: Any = None
    duration: Optional[float] = None  # seconds
    traceback_str: Optional[str] = None  # Only set if the task errors

    @property
    def errored(self) -> bool:
        return self.traceback_str is not None

    @property
    def completed(self) -> bool:
        return not self.errored


########################################################################################
# HELPERS ##############################################################################
########################################################################################

# Order of the six independent entries of a symmetric 3x3 correlator
SYM_INDEX = ((0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2))


def sym_from_flat(flat: np.ndarray) -> np.ndarray:
    """Rebuilds symmetric 3x3 matrices from (..., 6) arrays in SYM_INDEX order."""
    flat = np.asarray(flat)
    out = np.empty(flat.shape[:-1] + (3, 3), dtype=flat.dtype)
    for k, (a, b) in enumerate(SYM_INDEX):
        out[..., a, b] = flat[..., k]
        out[..., b, a] = flat[..., k]
    return out


def sym_to_flat(mat: np.ndarray) -> np.ndarray:
    mat = np.asarray(mat)
    return np.stack([mat[..., a, b] for a, b in SYM_INDEX], axis=-1)
