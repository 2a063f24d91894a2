import math

import pytest
from btc import registry


def test_registries_are_not_instantiable() -> None:
    with pytest.raises(registry.RegistryError):
        registry.CsvSchemas()


def test_items_lists_public_constants_in_order() -> None:
    names = [name for name, _ in registry.Landmarks.items()]
    assert names == ["A", "B", "C"]
    assert registry.Landmarks.B.chi == pytest.approx(math.sqrt(2))
    assert dict(registry.Defaults.items())["MIN_PEAKS"] == registry.Defaults.MIN_PEAKS


def test_lookup_by_name() -> None:
    assert registry.Landmarks.lookup("C") is registry.Landmarks.C
    with pytest.raises(registry.RegistryError, match="known: A, B, C"):
        registry.Landmarks.lookup("D")


@pytest.mark.parametrize("name,header", registry.CsvSchemas.items())
def test_csv_headers_have_unique_columns(name: str, header: tuple) -> None:
    assert len(set(header)) == len(header), name


def test_default_initial_states_are_normalized() -> None:
    assert registry.Defaults.INIT.n_total == pytest.approx(1.0)
    assert registry.Defaults.INIT_UP.mz == 1.0
