import math

import numpy as np  # type: ignore[import]
import pytest
from btc import core, coupling, meanfield


def test_btc_point_is_stationary(btc_params: core.ModelParams) -> None:
    chi = btc_params.chi
    m = [math.sqrt(1 - chi * chi), chi, 0.0]
    np.testing.assert_allclose(meanfield.mf_rhs(m, btc_params), 0.0, atol=1e-15)


@pytest.mark.parametrize("eta", [0.5, 1.5, math.inf])
def test_jacobian_matches_finite_differences(eta: float) -> None:
    params = core.ModelParams(chi=0.8, eta=eta)
    m = np.array([0.3, -0.4, 0.5])
    h = 1e-6
    numeric = np.column_stack(
        [
            (meanfield.mf_rhs(m + h * e, params) - meanfield.mf_rhs(m - h * e, params))
            / (2 * h)
            for e in np.eye(3)
        ]
    )
    np.testing.assert_allclose(meanfield.mf_jacobian(m, params), numeric, atol=1e-8)


def test_finite_size_uses_finite_weight() -> None:
    params = core.ModelParams(chi=0.8, eta=1.5, n_sites=10)
    F = coupling.f_coeff_finite(10, 1.5)
    m = np.array([0.1, 0.2, 0.3])
    a = 0.5 * params.gamma
    expected_x = -a * F * m[0] - a * (1 - F) * m[0] * m[2]
    assert meanfield.mf_rhs(m, params)[0] == pytest.approx(expected_x)


def test_conserved_pair_holds_in_long_range_phase(btc_params: core.ModelParams) -> None:
    traj = meanfield.integrate_mf(btc_params, t_max=100.0)
    n_drift, m_drift = traj.drift()
    assert n_drift < 1e-6
    assert m_drift < 1e-6
    assert traj.n_total[0] == pytest.approx(1.0)

    # Persistent oscillation: amplitude in the last quarter matches the first
    quarter = len(traj.times) // 4
    first = np.ptp(traj.mz[:quarter])
    last = np.ptp(traj.mz[-quarter:])
    assert first > 0.1
    assert abs(last - first) < 0.01 * first


def test_dynamics_independent_of_eta_below_one() -> None:
    low = meanfield.integrate_mf(core.ModelParams(chi=0.7, eta=0.2), t_max=30.0)
    high = meanfield.integrate_mf(core.ModelParams(chi=0.7, eta=0.9), t_max=30.0)
    np.testing.assert_allclose(low.states, high.states, atol=1e-8)


def test_conserved_quantities() -> None:
    params = core.ModelParams(chi=0.5)
    pair = meanfield.conserved_quantities([0.3, 0.0, 0.4], params)
    assert pair.n_total == pytest.approx(0.25)
    assert pair.m_ratio == pytest.approx(0.3 / -2.0)

    singular = meanfield.conserved_quantities(
        [0.2, 0.5, 0.1], core.ModelParams(chi=2.0)
    )
    assert singular.singular
    assert singular.m_ratio is None

    undriven = meanfield.conserved_quantities(
        [0.2, 0.5, 0.1], core.ModelParams(chi=0.0)
    )
    assert undriven.m_ratio == 0.0


def test_zero_range_relaxes_to_steady_state() -> None:
    params = core.ModelParams(chi=1.0, eta=math.inf)
    traj = meanfield.integrate_mf(params, t_max=100.0)
    np.testing.assert_allclose(traj.states[-1], [0.0, 2 / 3, 2 / 3], atol=1e-6)


def test_custom_initial_state_and_samples() -> None:
    init = core.MagState(mx=0.0, my=0.0, mz=1.0)
    traj = meanfield.integrate_mf(
        core.ModelParams(chi=0.7, eta=1.5), init=init, t_max=5.0, n_samples=11
    )
    assert traj.times.shape == (11,)
    assert traj.times[-1] == pytest.approx(5.0)
    assert traj.state_at(0) == init


@pytest.mark.parametrize("t_max,n_samples", [(0.0, 10), (-1.0, 10), (5.0, 1)])
def test_invalid_sampling(t_max: float, n_samples: int) -> None:
    with pytest.raises(core.DomainError):
        meanfield.sample_grid(t_max, n_samples)
