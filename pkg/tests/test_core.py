import math

import numpy as np  # type: ignore[import]
import pydantic
import pytest
from btc import core


def test_chi_and_gamma_derive_each_other() -> None:
    assert core.ModelParams(chi=0.7).gamma == pytest.approx(1.4)
    assert core.ModelParams(gamma=2.0, J=1.0).chi == pytest.approx(0.5)
    # An echoed config carries both
    params = core.ModelParams(chi=0.7, gamma=1.4)
    assert params.chi == 0.7


@pytest.mark.parametrize(
    "kwargs",
    [
        {"chi": 0.7, "gamma": 1.0},
        {"chi": 0.7, "eta": -0.1},
        {"chi": 0.7, "J": 0.0},
        {"gamma": -1.0},
        {"chi": 0.7, "n_sites": 0},
        {"eta": 1.0},
    ],
)
def test_invalid_params_rejected(kwargs: dict) -> None:
    with pytest.raises(pydantic.ValidationError):
        core.ModelParams(**kwargs)


def test_infinite_eta_is_zero_range() -> None:
    params = core.ModelParams(chi=1.0, eta=math.inf)
    assert not params.long_range
    assert params.thermodynamic_limit
    assert not core.ModelParams(chi=1.0, n_sites=4).thermodynamic_limit


def test_error_hierarchy() -> None:
    assert issubclass(core.DomainError, ValueError)
    assert issubclass(core.PreconditionError, core.BTCError)
    assert issubclass(core.FitError, core.NumericalFailure)
    err = core.IntegrationError("stopped", partial=[1, 2])
    assert err.partial == [1, 2]
    assert str(err) == "stopped"


def test_magstate_array_round_trip() -> None:
    state = core.MagState(mx=0.1, my=-0.2, mz=0.3)
    assert core.MagState.from_array(state.as_array()) == state
    assert state.n_total == pytest.approx(0.14)


def test_symmetric_flat_layout() -> None:
    mat = np.array([[1.0, 2.0, 3.0], [2.0, 4.0, 5.0], [3.0, 5.0, 6.0]])
    flat = core.sym_to_flat(mat)
    np.testing.assert_array_equal(flat, [1, 2, 3, 4, 5, 6])
    np.testing.assert_array_equal(core.sym_from_flat(flat), mat)
    stacked = core.sym_from_flat(np.stack([flat, 2 * flat]))
    assert stacked.shape == (2, 3, 3)


def test_uncorrelated_gauss_states() -> None:
    m = core.MagState(mx=0.2, my=0.3, mz=0.5)
    state = core.GaussState.uncorrelated(m)
    np.testing.assert_allclose(state.matrix, np.outer(m.as_array(), m.as_array()))
    assert state.as_array().shape == (9,)

    finite = core.FiniteGaussState.uncorrelated(m, n_sites=5)
    assert finite.corr.shape == (2, 3, 3)
    assert finite.as_array().shape == (3 + 2 * 6,)


def test_drift_skips_singular_samples() -> None:
    traj = core.Trajectory(
        times=np.array([0.0, 1.0, 2.0]),
        states=np.zeros((3, 3)),
        params=core.ModelParams(chi=0.7),
        n_total=np.array([1.0, 1.0 + 1e-9, 1.0]),
        m_ratio=np.array([0.5, math.nan, 0.5 + 2e-9]),
        m_ratio_singular=np.array([False, True, False]),
    )
    n_drift, m_drift = traj.drift()
    assert n_drift == pytest.approx(1e-9)
    assert m_drift == pytest.approx(2e-9)


def test_fixed_point_properties() -> None:
    point = core.FixedPoint(
        m=core.MagState(mx=0.0, my=0.1, mz=0.2),
        eigenvalues=[(-1.0, 0.5), (-1.0, -0.5), (-2.0, 0.0)],
        stability=core.Stability.ATTRACTIVE,
        branch=core.Branch.GAS,
    )
    assert point.attractive
    np.testing.assert_allclose(point.eigvals, [-1 + 0.5j, -1 - 0.5j, -2])


def test_task_outcome_flags() -> None:
    assert core.TaskOutcome(index=0, return_val=3).completed
    assert core.TaskOutcome(index=1, traceback_str="Traceback ...").errored
