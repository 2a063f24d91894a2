"""Steady states of the mean-field dynamics, their stability, and the phase diagram.

For eta <= 1 the fixed points are known in closed form. For eta > 1 every fixed point
has mx = 0 and its mz solves the cubic

    g^2 m^3 - (g^2 - 2 F g) m^2 + (F^2 - 2 F g + 1 / (2 chi^2)) m - F^2 = 0,  g = 1 - F,

with my = mz / (chi (F + g mz)). The discriminant of that cubic decides between one and
three real roots, which is what separates the gas / liquid phases from coexistence.
"""

import logging
import math
from typing import List, Optional, Sequence, Tuple

import numpy as np  # type: ignore[import]
import pydantic
from btc import core, coupling, meanfield
from btc.registry import Defaults
from btc.workers import WorkerPool
from scipy import optimize  # type: ignore[import]

LOGGER = logging.getLogger()

CUSP_F = 1.0 / 9.0  # F at the cusp, where the cubic becomes a perfect cube
CUSP_MZ = 0.25
CUSP_CHI = math.sqrt(1.5)

########################################################################################
# STEADY-STATE CUBIC ###################################################################
########################################################################################


def steady_cubic_coefficients(chi: float, F: float) -> np.ndarray:
    """Coefficients [a3, a2, a1, a0] of the steady-state cubic in mz, highest first."""
    if chi <= 0:
        raise core.DomainError(f"the steady-state cubic needs chi > 0, got {chi=}")
    g = 1.0 - F
    return np.array(
        [g * g, -(g * g - 2 * F * g), F * F - 2 * F * g + 1 / (2 * chi * chi), -F * F]
    )


def cubic_discriminant(coeffs: Sequence[float]) -> float:
    a3, a2, a1, a0 = coeffs
    return (
        18 * a3 * a2 * a1 * a0
        - 4 * a2**3 * a0
        + a2**2 * a1**2
        - 4 * a3 * a1**3
        - 27 * a3**2 * a0**2
    )


def _polish(coeffs: np.ndarray, root: float) -> float:
    deriv = np.polyder(coeffs)
    val = np.polyval(coeffs, root)
    for _ in range(8):
        slope = np.polyval(deriv, root)
        if slope == 0 or val == 0:
            break
        trial = root - val / slope
        trial_val = np.polyval(coeffs, trial)
        if abs(trial_val) >= abs(val):
            break
        root, val = trial, trial_val
    return float(root)


def _real_roots(coeffs: np.ndarray) -> np.ndarray:
    trimmed = np.trim_zeros(np.asarray(coeffs, dtype=float), "f")
    if len(trimmed) == 2:
        # F = 1 leaves a linear equation
        return np.array([-trimmed[1] / trimmed[0]])
    roots = np.roots(trimmed)
    if len(trimmed) == 4 and cubic_discriminant(trimmed) > 0:
        candidates = roots.real
    else:
        candidates = np.array([roots[np.argmin(np.abs(roots.imag))].real])
    return np.sort([_polish(trimmed, r) for r in candidates])


def solve_steady_cubic(chi: float, eta: float) -> np.ndarray:
    """Real mz roots of the steady-state cubic in increasing order (1 or 3 of them).
    chi = 0 has no steady state with mx = 0 and gives an empty array.
    """
    if eta <= 1:
        raise core.DomainError(f"the steady-state cubic needs eta > 1, got {eta=}")
    if chi == 0:
        return np.array([])
    F = coupling.f_coeff_limit(eta)
    return _real_roots(steady_cubic_coefficients(chi, F))


def _my_from_mz(mz: float, chi: float, F: float) -> float:
    return mz / (chi * (F + (1 - F) * mz))


########################################################################################
# FIXED POINTS #########################################################################
########################################################################################


def classify_stability(
    state: meanfield.StateLike, params: core.ModelParams
) -> Tuple[np.ndarray, core.Stability]:
    """Eigenvalues of the Jacobian at a fixed point and the resulting stability.

    For F = 0 the conserved pair forces zero modes; eigenvalues with |lambda| below
    the stability tolerance are dropped before classifying.
    """
    m = meanfield._vec(state)
    residual = float(np.linalg.norm(meanfield.mf_rhs(m, params)))
    if residual > 1e-8:
        raise core.PreconditionError(f"not a fixed point: {residual=:.3e} at {m=}")

    eig = np.linalg.eigvals(meanfield.mf_jacobian(m, params))
    eig = eig[np.lexsort((eig.imag, eig.real))]
    tol = Defaults.STABILITY_TOL
    considered = eig
    if coupling.dissipation_weight(params) == 0:
        considered = eig[np.abs(eig) >= tol]
    if considered.size == 0:
        return eig, core.Stability.ELLIPTIC

    re = considered.real
    if np.any(re > tol):
        if np.all(re > tol):
            return eig, core.Stability.REPULSIVE
        return eig, core.Stability.SADDLE
    if np.all(np.abs(re) < tol) and np.any(np.abs(considered.imag) > tol):
        return eig, core.Stability.ELLIPTIC
    if np.all(re < -tol):
        return eig, core.Stability.ATTRACTIVE
    return eig, core.Stability.SADDLE


def _make_fixed_point(
    m: np.ndarray, branch: core.Branch, params: core.ModelParams
) -> core.FixedPoint:
    eig, stability = classify_stability(m, params)
    return core.FixedPoint(
        m=core.MagState.from_array(m),
        eigenvalues=[(float(e.real), float(e.imag)) for e in eig],
        stability=stability,
        branch=branch,
    )


def _short_range_branches(roots: np.ndarray, chi: float, F: float) -> List[core.Branch]:
    if len(roots) == 3:
        return [core.Branch.GAS, core.Branch.UNSTABLE_MIDDLE, core.Branch.LIQUID]
    mz = roots[0]
    my = _my_from_mz(mz, chi, F)
    if my * my + mz * mz < Defaults.GAS_LIQUID_THRESHOLD:
        return [core.Branch.GAS]
    return [core.Branch.LIQUID]


def fixed_points(params: core.ModelParams) -> List[core.FixedPoint]:
    """All fixed points of the thermodynamic-limit mean-field dynamics, with stability.

    For eta > 1 they are ordered by mz (gas first).
    """
    if not params.thermodynamic_limit:
        raise core.PreconditionError(
            "fixed points are only tabulated in the N -> inf limit"
        )
    chi = params.chi

    if params.long_range:
        if chi >= 1:
            m = np.array([0.0, 1 / chi, math.sqrt(chi * chi - 1) / chi])
            return [_make_fixed_point(m, core.Branch.FERROMAGNETIC, params)]
        m = np.array([math.sqrt(1 - chi * chi), chi, 0.0])
        return [_make_fixed_point(m, core.Branch.BTC, params)]

    roots = solve_steady_cubic(chi, params.eta)
    if roots.size == 0:
        return []
    F = coupling.f_coeff_limit(params.eta)
    branches = _short_range_branches(roots, chi, F)
    points = []
    for mz, branch in zip(roots, branches):
        m = np.array([0.0, _my_from_mz(mz, chi, F), mz])
        points.append(_make_fixed_point(m, branch, params))
    return points


########################################################################################
# PHASES ###############################################################################
########################################################################################


def phase_classify(chi: float, eta: float) -> core.Phase:
    if chi < 0 or eta < 0:
        raise core.DomainError(f"parameters must be non-negative: {chi=} {eta=}")
    if eta <= 1:
        return core.Phase.BTC if chi <= 1 else core.Phase.MAGNETIZED
    roots = solve_steady_cubic(chi, eta)
    if roots.size == 0:
        return core.Phase.GAS
    if roots.size == 3:
        return core.Phase.COEXISTENCE
    F = coupling.f_coeff_limit(eta)
    branch = _short_range_branches(roots, chi, F)[0]
    return core.Phase.GAS if branch == core.Branch.GAS else core.Phase.LIQUID


def _scan_cell(cell: Tuple[float, float]) -> Tuple[core.Phase, List[core.FixedPoint]]:
    chi, eta = cell
    label = phase_classify(chi, eta)
    return label, fixed_points(core.ModelParams(chi=chi, eta=eta))


def scan_phase_diagram(
    chi_grid: Sequence[float], eta_grid: Sequence[float], threads: Optional[int] = None
) -> core.PhaseDiagramGrid:
    chi_axis = [float(c) for c in chi_grid]
    eta_axis = [float(e) for e in eta_grid]
    if not chi_axis or not eta_axis:
        raise core.DomainError("phase-diagram grids must be non-empty")
    cells = [(chi, eta) for eta in eta_axis for chi in chi_axis]
    LOGGER.info(f"Scanning {len(cells)} phase-diagram cells")
    with WorkerPool(threads) as pool:
        values = pool.map_values(_scan_cell, cells)

    n_chi = len(chi_axis)
    rows = [values[i : i + n_chi] for i in range(0, len(values), n_chi)]
    return core.PhaseDiagramGrid(
        chi_axis=chi_axis,
        eta_axis=eta_axis,
        labels=[[label for label, _ in row] for row in rows],
        fixed_points=[[fps for _, fps in row] for row in rows],
    )


class BranchRow(pydantic.BaseModel):
    """Fixed points at one chi of a branch-curve sweep."""

    model_config = pydantic.ConfigDict(frozen=True)

    chi: float
    points: List[core.FixedPoint]


def branch_curves(eta: float, chi_grid: Sequence[float]) -> List[BranchRow]:
    """mz of every fixed point against chi at fixed eta."""
    return [
        BranchRow(
            chi=float(chi), points=fixed_points(core.ModelParams(chi=chi, eta=eta))
        )
        for chi in chi_grid
    ]


########################################################################################
# COEXISTENCE AND CUSP #################################################################
########################################################################################


def coexistence_interval(eta: float) -> Optional[Tuple[float, float]]:
    """Open chi interval with three real roots at this eta, or None.

    The discriminant is a cubic in a1 = F^2 - 2 F g + 1 / (2 chi^2); three real roots
    exist between the two zeros around its local maximum.
    """
    if eta <= 1:
        raise core.DomainError(f"coexistence needs eta > 1, got {eta=}")
    F = coupling.f_coeff_limit(eta)
    g = 1.0 - F
    a3, a2, a0 = g * g, -(g * g - 2 * F * g), -F * F
    base = F * F - 2 * F * g
    rad = 4 * a2**4 + 864 * a3 * a3 * a2 * a0
    if a3 == 0 or rad < 0:
        return None
    a1_peak = (2 * a2 * a2 + math.sqrt(rad)) / (24 * a3)
    if a1_peak <= base or cubic_discriminant([a3, a2, a1_peak, a0]) <= 0:
        return None

    def disc_chi(chi: float) -> float:
        return cubic_discriminant([a3, a2, base + 1 / (2 * chi * chi), a0])

    chi_peak = 1 / math.sqrt(2 * (a1_peak - base))
    lo = chi_peak / 2
    while disc_chi(lo) >= 0:
        lo /= 2
    hi = 2 * chi_peak
    while disc_chi(hi) >= 0:
        hi *= 2
        if hi > 1e12:
            raise core.NumericalFailure(f"cannot bracket the upper endpoint at {eta=}")
    lower = optimize.brentq(disc_chi, lo, chi_peak, xtol=1e-12)
    upper = optimize.brentq(disc_chi, chi_peak, hi, xtol=1e-12)
    return float(lower), float(upper)


def locate_cusp(
    eta_lo: float = 1.05, eta_hi: float = 2.0, tol: float = 1e-5
) -> core.CuspPoint:
    """Bisects on eta for the end of the coexistence region."""
    if coexistence_interval(eta_lo) is None or coexistence_interval(eta_hi) is not None:
        raise core.NumericalFailure(f"cusp not bracketed by {eta_lo=} {eta_hi=}")
    interval = coexistence_interval(eta_lo)
    while eta_hi - eta_lo > tol:
        mid = 0.5 * (eta_lo + eta_hi)
        found = coexistence_interval(mid)
        if found is None:
            eta_hi = mid
        else:
            eta_lo, interval = mid, found
    assert interval is not None
    chi = 0.5 * (interval[0] + interval[1])
    roots = solve_steady_cubic(chi, eta_lo)
    mz = float(roots[len(roots) // 2])
    LOGGER.info(f"Cusp by bisection: {chi=:.4f} eta={eta_lo:.4f} {mz=:.4f}")
    return core.CuspPoint(
        chi=chi, eta=0.5 * (eta_lo + eta_hi), mz=mz, method="bisection"
    )


def cusp_closed_form() -> core.CuspPoint:
    """The cusp from the triple-root condition: F = 1/9, mz = 1/4, chi = sqrt(3/2)."""
    eta = optimize.brentq(
        lambda e: coupling.f_coeff_limit(e) - CUSP_F, 1.2, 2.0, xtol=1e-14
    )
    return core.CuspPoint(
        chi=CUSP_CHI, eta=float(eta), mz=CUSP_MZ, method="closed-form"
    )


########################################################################################
# NONANALYTIC GAS BRANCH ###############################################################
########################################################################################


def _log_model(x: np.ndarray, log_a: float, b: float, c: float) -> np.ndarray:
    return log_a - b * np.power(x, -c)


def fit_nonanalytic(eta: Sequence[float], mz: Sequence[float]) -> core.NonanalyticFit:
    """Fits mz = a exp(-b / (eta - 1)^c) in log space.

    The linear parameters (log a, b) are profiled out over a grid of c to seed the
    nonlinear fit.
    """
    x = np.asarray(eta, dtype=float) - 1.0
    vals = np.asarray(mz, dtype=float)
    if x.size < 3 or x.size != vals.size:
        raise core.DomainError(f"need at least three (eta, mz) pairs, got {x.size}")
    if np.any(x <= 0):
        raise core.DomainError("the nonanalytic form needs eta > 1 throughout")
    if np.any(vals <= 0):
        raise core.FitError("mz must be positive to fit in log space")
    y = np.log(vals)

    best: Optional[Tuple[float, float, np.ndarray]] = None
    for c in np.linspace(0.1, 3.0, 59):
        design = np.column_stack([np.ones_like(x), -np.power(x, -c)])
        coef = np.linalg.lstsq(design, y, rcond=None)[0]
        sse = float(np.sum((design @ coef - y) ** 2))
        if best is None or sse < best[0]:
            best = (sse, float(c), coef)
    assert best is not None
    p0 = (best[2][0], best[2][1], best[1])

    try:
        popt, _ = optimize.curve_fit(_log_model, x, y, p0=p0, maxfev=20000)
    except (RuntimeError, ValueError) as err:
        raise core.FitError(
            f"nonanalytic fit did not converge: {err}", partial=p0
        ) from err
    if not np.all(np.isfinite(popt)):
        raise core.FitError("nonanalytic fit diverged", partial=p0)

    pred = _log_model(x, *popt)
    return core.NonanalyticFit(
        a=float(np.exp(popt[0])),
        b=float(popt[1]),
        c=float(popt[2]),
        residual_norm=float(np.linalg.norm(pred - y)),
        max_rel_err=float(np.max(np.abs(np.exp(pred - y) - 1))),
    )


def gas_branch_mz(chi: float, eta_samples: Sequence[float]) -> np.ndarray:
    """mz of the gas fixed point (smallest root) at each eta."""
    if chi >= 1:
        raise core.PreconditionError(f"the gas branch needs chi < 1, got {chi=}")
    return np.array([solve_steady_cubic(chi, eta)[0] for eta in eta_samples])


def fit_mz_vs_eta(chi: float, eta_samples: Sequence[float]) -> core.NonanalyticFit:
    """Nonanalytic fit to the gas branch mz(eta) at fixed chi."""
    fit = fit_nonanalytic(eta_samples, gas_branch_mz(chi, eta_samples))
    LOGGER.info(
        f"Gas-branch fit at {chi=}: a={fit.a:.4g} b={fit.b:.4g} c={fit.c:.4g} "
        f"max_rel_err={fit.max_rel_err:.2g}"
    )
    return fit
