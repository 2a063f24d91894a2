import math

import numpy as np  # type: ignore[import]
import pytest
from btc import core, coupling

SIZES = [1, 2, 3, 4, 7, 10, 64, 101]
ETAS = [0.0, 0.5, 1.0, 1.5, 2.0, 3.0]


@pytest.mark.parametrize("n_sites", SIZES)
@pytest.mark.parametrize("eta", ETAS)
def test_rows_are_normalized(n_sites: int, eta: float) -> None:
    table = coupling.coupling_table(n_sites, eta)
    for i in (1, n_sites):
        assert abs(math.fsum(table.row(i)) - 1) < 1e-12


@pytest.mark.parametrize("n_sites", [1, 2, 5, 8])
def test_uniform_coupling_at_eta_zero(n_sites: int) -> None:
    assert coupling.kac_factor(n_sites, 0.0) == pytest.approx(1 / n_sites)
    assert coupling.f_coeff_finite(n_sites, 0.0) == pytest.approx(1 / n_sites)


def test_harmonic_number() -> None:
    assert coupling.harmonic_number(0, 2.0) == 0.0
    assert coupling.harmonic_number(4, 1.0) == pytest.approx(25 / 12)
    with pytest.raises(core.DomainError):
        coupling.harmonic_number(-1, 1.0)


def test_periodic_distance_and_symmetry() -> None:
    table = coupling.coupling_table(9, 1.5)
    assert table.distance(1, 9) == 1
    assert table.distance(2, 6) == 4
    assert coupling.coupling(table, 1, 9) == coupling.coupling(table, 9, 1)
    assert coupling.coupling(table, 1, 1) == pytest.approx(table.kac)
    np.testing.assert_allclose(table.row(3), np.roll(table.row(1), 2))


@pytest.mark.parametrize("site", [0, 10])
def test_site_out_of_range(site: int) -> None:
    table = coupling.coupling_table(9, 1.5)
    with pytest.raises(core.DomainError):
        table.row(site)


def test_table_is_read_only() -> None:
    table = coupling.coupling_table(6, 1.2)
    with pytest.raises(ValueError):
        table.f[0] = 1.0


def test_gram_matches_direct_sum() -> None:
    n_sites, eta = 7, 1.3
    table = coupling.coupling_table(n_sites, eta)
    f = np.array([table.row(i) for i in range(1, n_sites + 1)])
    direct = f.T @ f
    for k in range(1, n_sites + 1):
        assert coupling.coupling_gram(table, 1, k) == pytest.approx(direct[0, k - 1])
    profile = coupling.gram_profile(table)
    assert profile[0] == pytest.approx(coupling.f_coeff_finite(n_sites, eta))
    assert table.gram_row().sum() == pytest.approx(1.0)


@pytest.mark.parametrize("n_sites", [6, 9])
def test_finite_coefficient_is_site_independent(n_sites: int) -> None:
    table = coupling.coupling_table(n_sites, 1.4)
    per_site = [float(np.sum(table.row(i) ** 2)) for i in range(1, n_sites + 1)]
    np.testing.assert_allclose(
        per_site, coupling.f_coeff_finite(n_sites, 1.4), rtol=1e-13
    )


def test_zeta_closed_forms() -> None:
    assert abs(coupling.zeta(2.0) - math.pi**2 / 6) < 1e-12
    assert abs(coupling.zeta(4.0) - math.pi**4 / 90) < 1e-12
    with pytest.raises(core.DomainError):
        coupling.zeta(1.0)


def test_limit_coefficient() -> None:
    for eta in (0.0, 0.3, 1.0):
        assert coupling.f_coeff_limit(eta) == 0.0
    expected = (2 * math.pi**4 / 90 - 1) / (2 * math.pi**2 / 6 - 1) ** 2
    assert abs(coupling.f_coeff_limit(2.0) - expected) < 1e-12
    assert coupling.f_coeff_limit(math.inf) == 1.0
    with pytest.raises(core.DomainError):
        coupling.f_coeff_limit(-1.0)


def test_finite_coefficient_decreases_to_limit() -> None:
    limit = coupling.f_coeff_limit(2.0)
    values = [coupling.f_coeff_finite(n, 2.0) for n in (4, 16, 64, 256)]
    assert all(a > b for a, b in zip(values, values[1:]))
    assert values[-1] > limit
    assert values[-1] - limit < 1e-2


def test_finite_coefficient_vanishes_slowly_for_long_range() -> None:
    assert 1e-4 < coupling.f_coeff_finite(2**14, 0.5) < 2e-4


def test_dissipation_weight_picks_size() -> None:
    assert coupling.dissipation_weight(
        core.ModelParams(chi=1.0, eta=2.0)
    ) == coupling.f_coeff_limit(2.0)
    assert coupling.dissipation_weight(
        core.ModelParams(chi=1.0, eta=2.0, n_sites=10)
    ) == coupling.f_coeff_finite(10, 2.0)


def test_coefficient_curves() -> None:
    etas = [0.0, 0.5, 1.0, 2.0]
    curves = coupling.coefficient_curves([10, 0], etas)
    assert curves[1][:3] == [0.0, 0.0, 0.0]
    assert curves[1][3] == pytest.approx(coupling.f_coeff_limit(2.0))
    assert curves[0][0] == pytest.approx(0.1)
