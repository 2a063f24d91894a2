import functools
import itertools
import math
from typing import Any, Tuple

import numpy as np  # type: ignore[import]
import pytest
from btc import core, exact

REFERENCE_TOL = core.ToleranceSpec(rtol=1e-10, atol=1e-12)


def test_single_site_steady_state() -> None:
    series = exact.integrate_exact(1, 1.5, 1.0, t_max=60.0, n_samples=61)
    final = series.samples[-1].m.as_array()
    np.testing.assert_allclose(final, [0.0, 2 / 3, 2 / 3], atol=1e-5)
    assert math.isnan(series.samples[-1].delta_z)


def test_evolution_preserves_trace_and_hermiticity() -> None:
    series = exact.integrate_exact(4, 1.5, 0.7, t_max=5.0, n_samples=11)
    assert len(series.samples) == 11
    assert max(s.trace_err for s in series.samples) < 1e-9
    assert max(s.herm_err for s in series.samples) < 1e-9
    assert series.snapshots is None


def test_uniform_coupling_matches_collective_model() -> None:
    series = exact.integrate_exact(
        6, 0.0, 0.7, t_max=5.0, tol=REFERENCE_TOL, n_samples=21
    )
    times, mags = exact.integrate_collective(
        6, 0.7, t_max=5.0, tol=REFERENCE_TOL, n_samples=21
    )
    np.testing.assert_allclose([s.t for s in series.samples], times)
    exact_mags = np.array([s.m.as_array() for s in series.samples])
    np.testing.assert_allclose(exact_mags, mags, atol=1e-8)


@pytest.mark.parametrize("n_sites", [2, 3, 4, 5, 6])
def test_finite_size_fluctuations_grow(n_sites: int) -> None:
    series = exact.integrate_exact(n_sites, 0.5, 0.7, n_samples=61)
    assert max(s.delta_z for s in series.samples) > 0.1
    assert series.samples[0].delta_z == pytest.approx(0.0, abs=1e-12)


def test_total_spin_conserved_only_for_uniform_coupling() -> None:
    rho = exact.DensityMatrix.product([[0.6, 0.0, 0.8]] * 4)
    uniform = exact.build_operators(4, 0.0)
    assert abs(exact.s2_rate(rho, uniform, 1.4)) < 1e-12
    power_law = exact.build_operators(4, 1.0)
    assert abs(exact.s2_rate(rho, power_law, 1.4)) > 1e-6


def test_density_matrix_constructors() -> None:
    up = exact.DensityMatrix.all_up(3)
    assert up.n_sites == 3 and up.dim == 8
    assert up.trace_error() == 0.0
    mixed = exact.DensityMatrix.maximally_mixed(2)
    assert mixed.min_eigenvalue() == pytest.approx(0.25)
    pure = exact.DensityMatrix.from_pure(np.array([1.0, 1.0j]))
    assert pure.hermiticity_error() == pytest.approx(0.0)
    with pytest.raises(ValueError):
        exact.DensityMatrix(data=np.eye(3))


def test_product_state_observables() -> None:
    vec = [0.6, 0.0, 0.8]
    rho = exact.DensityMatrix.product([vec] * 3)
    ops = exact.build_operators(3, 1.5)
    obs = exact.observables(rho, ops)
    np.testing.assert_allclose(obs.m.as_array(), vec, atol=1e-14)
    np.testing.assert_allclose(obs.c_r[0], np.outer(vec, vec), atol=1e-14)
    assert obs.delta_z == pytest.approx(0.0, abs=1e-14)

    red = exact.reduced_density_matrix(rho, 3, [2])
    expected = 0.5 * (np.eye(2) + 0.6 * exact.PAULI[0] + 0.8 * exact.PAULI[2])
    np.testing.assert_allclose(red, expected, atol=1e-14)
    with pytest.raises(core.DomainError):
        exact.reduced_density_matrix(rho, 3, [0, 0])


def test_third_cumulant() -> None:
    rho = exact.DensityMatrix.product([[0.6, 0.0, 0.8]] * 3)
    value = exact.third_cumulant(rho, 3, (0, 1, 2), ("x", "z", "z"))
    assert value == pytest.approx(0.0, abs=1e-14)
    with pytest.raises(core.DomainError):
        exact.third_cumulant(rho, 3, (0, 1, 1), ("x", "y", "z"))


def _full_space_third_cumulant(
    rho: np.ndarray, n_sites: int, sites: Tuple[int, int, int], axes: str
) -> float:
    ops = [
        exact.site_operator(exact.PAULI[exact.AXES[a]], s, n_sites)
        for s, a in zip(sites, axes)
    ]

    def mean(*factors: Any) -> float:
        prod = functools.reduce(lambda x, y: x @ y, factors)
        return float(np.trace(prod @ rho).real)

    a, b, c = ops
    return (
        mean(a, b, c)
        - mean(a, b) * mean(c)
        - mean(a, c) * mean(b)
        - mean(b, c) * mean(a)
        + 2 * mean(a) * mean(b) * mean(c)
    )


def test_third_cumulant_of_correlated_state() -> None:
    series = exact.integrate_exact(
        4, 0.5, 0.7, t_max=5.0, tol=REFERENCE_TOL, n_samples=11, keep_states=True
    )
    assert series.snapshots is not None
    rho = series.snapshots[-1]
    combos = list(itertools.product("xyz", repeat=3))
    values = [exact.third_cumulant(rho, 4, (0, 1, 2), axes) for axes in combos]
    assert max(abs(v) for v in values) > 1e-6
    for axes in (("z", "z", "z"), ("x", "y", "z"), ("y", "y", "x")):
        expected = _full_space_third_cumulant(rho, 4, (0, 1, 2), "".join(axes))
        assert exact.third_cumulant(rho, 4, (0, 1, 2), axes) == pytest.approx(
            expected, abs=1e-12
        )
    assert exact.third_cumulant(rho, 4, (0, 1, 3), ("x", "y", "z")) == (
        pytest.approx(exact.third_cumulant(rho, 4, (3, 0, 1), ("z", "x", "y")))
    )


def test_dicke_operators_satisfy_spin_algebra() -> None:
    s_plus, s_minus, s_x, s_y, s_z = exact.collective_spin_operators(5)
    commutator = (s_x @ s_y - s_y @ s_x).toarray()
    np.testing.assert_allclose(commutator, 1j * s_z.toarray(), atol=1e-12)
    casimir = (s_x @ s_x + s_y @ s_y + s_z @ s_z).toarray()
    np.testing.assert_allclose(casimir, 2.5 * 3.5 * np.eye(6), atol=1e-12)


def test_limits_and_shapes() -> None:
    with pytest.raises(core.ResourceError):
        exact.build_operators(exact.MAX_EXACT_SITES + 1, 1.0)
    with pytest.raises(core.DomainError):
        exact.build_operators(0, 1.0)
    ops = exact.build_operators(2, 1.0)
    with pytest.raises(core.DomainError):
        exact.lindblad_rhs(np.eye(8), ops, 1.0)
    with pytest.raises(core.DomainError):
        exact.integrate_exact(3, 1.0, 0.7, init=exact.DensityMatrix.all_up(2))


def test_snapshots_are_kept_on_request() -> None:
    series = exact.integrate_exact(
        2, 1.0, 0.7, t_max=1.0, n_samples=5, keep_states=True
    )
    assert series.snapshots is not None
    assert len(series.snapshots) == 5
    assert series.snapshots[0].shape == (4, 4)
