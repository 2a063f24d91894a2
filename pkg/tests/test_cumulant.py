import numpy as np  # type: ignore[import]
import pytest
from btc import core, coupling, cumulant, exact, meanfield


def _random_state(seed: int) -> core.GaussState:
    rng = np.random.default_rng(seed)
    m = core.MagState.from_array(rng.uniform(-0.5, 0.5, 3))
    raw = rng.uniform(-0.3, 0.3, (3, 3))
    return core.GaussState.from_matrix(m, raw + raw.T)


@pytest.mark.parametrize("eta", [0.5, 1.5])
def test_tensor_form_matches_explicit_limit(eta: float) -> None:
    params = core.ModelParams(chi=0.9, eta=eta)
    state = _random_state(7)
    F = coupling.f_coeff_limit(eta)
    m, corr = state.m.as_array(), state.matrix

    dm = cumulant.magnetization_rhs(m, F, (1 - F) * corr, params.J, params.gamma)
    dcorr = cumulant.pair_rhs(
        m,
        corr[None],
        np.array([0.0]),
        F,
        corr[None],
        (1 - F) * corr,
        params.J,
        params.gamma,
    )[0]
    explicit = cumulant.gaussian_rhs_limit(state, params)
    np.testing.assert_allclose(dm, explicit[:3], atol=1e-13)
    np.testing.assert_allclose(core.sym_to_flat(dcorr), explicit[3:], atol=1e-13)


def test_finite_rhs_layout() -> None:
    params = core.ModelParams(chi=0.9, eta=1.5, n_sites=7)
    rng = np.random.default_rng(3)
    m = core.MagState.from_array(rng.uniform(-0.5, 0.5, 3))
    raw = rng.uniform(-0.3, 0.3, (3, 3, 3))
    state = core.FiniteGaussState(m=m, n_sites=7, corr=raw + raw.transpose(0, 2, 1))
    flat = cumulant.gaussian_rhs_finite(state, params)
    assert flat.shape == (3 + 3 * 6,)
    assert np.all(np.isfinite(flat))


def test_uncorrelated_finite_state_follows_mean_field() -> None:
    params = core.ModelParams(chi=0.8, eta=1.5, n_sites=8)
    m = core.MagState(mx=0.3, my=0.4, mz=0.5)
    state = core.FiniteGaussState.uncorrelated(m, 8)
    np.testing.assert_allclose(
        cumulant.gaussian_rhs_finite(state, params)[:3],
        meanfield.mf_rhs(m, params),
        atol=1e-13,
    )


@pytest.mark.parametrize("n_sites,eta", [(4, 0.8), (5, 1.5), (6, 2.5), (5, 0.0)])
def test_finite_closure_is_exact_at_product_states(n_sites: int, eta: float) -> None:
    params = core.ModelParams(chi=0.9, eta=eta, n_sites=n_sites)
    m = core.MagState(mx=0.3, my=0.4, mz=0.5)
    state = core.FiniteGaussState.uncorrelated(m, n_sites)
    closure = cumulant.gaussian_rhs_finite(state, params)

    rho = exact.DensityMatrix.product([m] * n_sites)
    ops = exact.build_operators(n_sites, eta, params)
    drho = exact.lindblad_rhs(rho, ops, params.gamma)
    dm = [2 * np.trace(s @ drho).real / n_sites for s in ops.spin]
    dcorr = exact.distance_correlators(drho, n_sites)
    np.testing.assert_allclose(closure[:3], dm, atol=1e-12)
    np.testing.assert_allclose(
        closure[3:], core.sym_to_flat(dcorr).reshape(-1), atol=1e-12
    )


def test_uniform_coupling_ignores_distance() -> None:
    params = core.ModelParams(chi=0.9, eta=0.0, n_sites=7)
    rng = np.random.default_rng(11)
    m = core.MagState.from_array(rng.uniform(-0.5, 0.5, 3))
    raw = rng.uniform(-0.3, 0.3, (3, 3))
    corr = np.repeat((raw + raw.T)[None], 3, axis=0)
    state = core.FiniteGaussState(m=m, n_sites=7, corr=corr)
    rates = cumulant.gaussian_rhs_finite(state, params)[3:].reshape(3, 6)
    np.testing.assert_allclose(rates[1:], rates[[0, 0]], atol=1e-13)


def test_finite_closure_approaches_limit() -> None:
    m = core.MagState(mx=0.3, my=0.4, mz=0.5)
    limit_params = core.ModelParams(chi=0.9, eta=0.5)
    limit = cumulant.gaussian_rhs_limit(core.GaussState.uncorrelated(m), limit_params)
    gaps = []
    for n_sites in (8, 32, 128):
        params = core.ModelParams(chi=0.9, eta=0.5, n_sites=n_sites)
        state = core.FiniteGaussState.uncorrelated(m, n_sites)
        rates = cumulant.gaussian_rhs_finite(state, params)[3:].reshape(-1, 6)
        gaps.append(float(np.max(np.abs(rates - limit[3:]))))
    assert gaps[0] > gaps[1] > gaps[2]
    assert gaps[2] < gaps[0] / 2


@pytest.mark.parametrize(
    "n_sites,expected", [(2, [1.0]), (5, [2.0, 2.0]), (8, [2.0, 2.0, 2.0, 1.0])]
)
def test_pair_multiplicity(n_sites: int, expected: list) -> None:
    mult = cumulant.pair_multiplicity(n_sites)
    np.testing.assert_array_equal(mult, expected)
    assert mult.sum() == n_sites - 1


def test_variance_vanishes_for_product_states() -> None:
    m = core.MagState(mx=0.1, my=0.6, mz=-0.3)
    assert cumulant.variance_z(core.GaussState.uncorrelated(m)) == pytest.approx(0.0)
    finite = core.FiniteGaussState.uncorrelated(m, 9)
    assert cumulant.variance_z(finite) == pytest.approx(0.0, abs=1e-15)


@pytest.mark.parametrize("chi", [0.7, 1.0, 1.3, 2.0])
def test_long_range_closure_keeps_fluctuations_small(chi: float) -> None:
    params = core.ModelParams(chi=chi, eta=0.5)
    traj = cumulant.integrate_gaussian(params, t_max=20.0, n_samples=201)
    assert not traj.truncated
    assert np.max(np.abs(traj.delta_z)) <= 0.02

    mf = meanfield.integrate_mf(
        params, init=core.MagState(mx=0.0, my=0.0, mz=1.0), t_max=20.0, n_samples=201
    )
    assert np.max(np.abs(traj.m - mf.states)) < 0.05


def test_finite_size_run() -> None:
    params = core.ModelParams(chi=0.7, eta=1.5, n_sites=6)
    traj = cumulant.integrate_gaussian(params, t_max=5.0, n_samples=51)
    assert traj.corr.shape == (51, 3, 3, 3)
    assert traj.delta_z[0] == pytest.approx(0.0, abs=1e-12)
    assert np.all(np.isfinite(traj.delta_z))
    samples = traj.variance_samples()
    assert samples[-1].t == pytest.approx(5.0)


def test_invalid_requests() -> None:
    m = core.MagState(mx=0.0, my=0.0, mz=1.0)
    with pytest.raises(core.PreconditionError):
        cumulant.gaussian_rhs_limit(
            core.GaussState.uncorrelated(m), core.ModelParams(chi=1.0, n_sites=4)
        )
    with pytest.raises(core.PreconditionError):
        cumulant.gaussian_rhs_finite(
            core.FiniteGaussState.uncorrelated(m, 4), core.ModelParams(chi=1.0)
        )
    with pytest.raises(core.DomainError):
        cumulant.gaussian_rhs_finite(
            core.FiniteGaussState.uncorrelated(m, 4),
            core.ModelParams(chi=1.0, n_sites=6),
        )
    with pytest.raises(core.DomainError):
        cumulant.integrate_gaussian(
            core.ModelParams(chi=1.0), init=core.FiniteGaussState.uncorrelated(m, 4)
        )
    with pytest.raises(core.PreconditionError):
        cumulant.integrate_gaussian(core.ModelParams(chi=1.0, n_sites=1), init=m)


def test_inadmissible_initial_state_truncates() -> None:
    params = core.ModelParams(chi=1.0, eta=1.5)
    m = core.MagState(mx=0.0, my=0.0, mz=1.0)
    bad = core.GaussState(m=m, c=(2.0, 0.0, 0.0, 0.0, 0.0, 1.0))
    traj = cumulant.integrate_gaussian(params, init=bad, t_max=1.0)
    assert traj.truncated
    assert traj.times.size == 0
    with pytest.raises(core.IntegrationError) as info:
        cumulant.integrate_gaussian(
            params, init=bad, t_max=1.0, raise_on_truncation=True
        )
    assert isinstance(info.value.partial, core.GaussTrajectory)
