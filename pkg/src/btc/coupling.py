"""Power-law coupling coefficients f_ij = K / D(|i - j|)^eta with Kac normalization, and
the dissipation weights built from them.

Sites are 1-based in the public functions to match the usual lattice notation. Tables
are translation invariant, so only the distance-indexed values are stored.
"""

import functools
import math
from typing import List

import numpy as np  # type: ignore[import]
import pydantic
from btc import core
from scipy import special  # type: ignore[import]


def harmonic_number(n: int, order: float) -> float:
    """Generalized harmonic number H_n^(order) = sum_{j=1}^n j^-order, accumulated with
    compensated summation.
    """
    if n < 0:
        raise core.DomainError(f"harmonic number needs n >= 0, got {n=}")
    return math.fsum(j**-order for j in range(1, n + 1))


def kac_factor(n_sites: int, eta: float) -> float:
    """Normalization K^(N)(eta) making every row of f sum to one, from the even-N and
    odd-N closed forms.
    """
    if n_sites < 1:
        raise core.DomainError(f"need at least one site, got {n_sites=}")
    if eta < 0:
        raise core.DomainError(f"power-law exponent must be >= 0, got {eta=}")

    if n_sites % 2 == 0:
        top = 1 + n_sites // 2
        denom = math.fsum([2 * harmonic_number(top, eta), -1.0, -(top**-eta)])
    else:
        top = 1 + (n_sites - 1) // 2
        denom = math.fsum([2 * harmonic_number(top, eta), -1.0])
    return 1.0 / denom


def site_distance(i: int, j: int, n_sites: int) -> int:
    """Periodic lattice distance min(|i - j|, N - |i - j|)."""
    r = abs(i - j) % n_sites
    return min(r, n_sites - r)


class CouplingTable(pydantic.BaseModel):
    """Distance-indexed coefficients for one (N, eta).

    Attributes:
        n_sites: lattice size N
        eta: power-law exponent
        kac: normalization factor K^(N)(eta)
        f: f_r for r = 0..floor(N/2), read-only
        gram: Gram coefficients (sum_i f_ij f_ik) for |j - k| = 0..floor(N/2), read-only
    """

    model_config = pydantic.ConfigDict(frozen=True, arbitrary_types_allowed=True)

    n_sites: int
    eta: float
    kac: float
    f: np.ndarray
    gram: np.ndarray

    @classmethod
    def build(cls, n_sites: int, eta: float) -> "CouplingTable":
        kac = kac_factor(n_sites, eta)
        dist = np.arange(n_sites // 2 + 1, dtype=float)
        f = kac * np.power(dist + 1.0, -eta)
        gram = _circular_autocorrelation(_expand_row(f, n_sites))[: n_sites // 2 + 1]
        f.setflags(write=False)
        gram.setflags(write=False)
        return cls(n_sites=n_sites, eta=eta, kac=kac, f=f, gram=gram)

    def check_site(self, i: int) -> None:
        if not 1 <= i <= self.n_sites:
            raise core.DomainError(f"site index out of range: {i=} {self.n_sites=}")

    def distance(self, i: int, j: int) -> int:
        self.check_site(i)
        self.check_site(j)
        return site_distance(i, j, self.n_sites)

    def row(self, i: int) -> np.ndarray:
        """Full row f_{i, 1..N}."""
        self.check_site(i)
        return np.roll(_expand_row(self.f, self.n_sites), i - 1)

    def gram_row(self) -> np.ndarray:
        """Gram coefficients against site 1 for every site, as a length-N array."""
        return _expand_row(self.gram, self.n_sites)


def _expand_row(profile: np.ndarray, n_sites: int) -> np.ndarray:
    idx = [site_distance(0, k, n_sites) for k in range(n_sites)]
    return np.asarray(profile)[idx]


def _circular_autocorrelation(row: np.ndarray) -> np.ndarray:
    spectrum = np.fft.rfft(row)
    return np.fft.irfft(np.abs(spectrum) ** 2, n=len(row))


@functools.lru_cache(maxsize=256)
def coupling_table(n_sites: int, eta: float) -> CouplingTable:
    """Cached CouplingTable.build; tables are immutable so sharing them is safe."""
    return CouplingTable.build(n_sites, eta)


def coupling(table: CouplingTable, i: int, j: int) -> float:
    return float(table.f[table.distance(i, j)])


def coupling_gram(table: CouplingTable, j: int, k: int) -> float:
    """Gram coefficient sum_i f_ij f_ik, which depends on |j - k| only."""
    return float(table.gram[table.distance(j, k)])


def gram_profile(table: CouplingTable) -> np.ndarray:
    return np.array(table.gram)


@functools.lru_cache(maxsize=1024)
def f_coeff_finite(n_sites: int, eta: float) -> float:
    """F_eta^(N) = sum_i f_ij^2, independent of j."""
    row = coupling_table(n_sites, eta).row(1)
    return math.fsum(row**2)


def zeta(s: float) -> float:
    if s <= 1:
        raise core.DomainError(f"zeta is only needed for s > 1, got {s=}")
    return float(special.zeta(s))


def f_coeff_limit(eta: float) -> float:
    """Thermodynamic-limit weight: 0 for eta <= 1, else (2 zeta(2 eta) - 1) /
    (2 zeta(eta) - 1)^2.
    """
    if eta < 0:
        raise core.DomainError(f"power-law exponent must be >= 0, got {eta=}")
    if eta <= 1:
        return 0.0
    if math.isinf(eta):
        return 1.0
    return (2 * zeta(2 * eta) - 1) / (2 * zeta(eta) - 1) ** 2


def dissipation_weight(params: core.ModelParams) -> float:
    """The F coefficient entering the closed equations: F^(N) at finite size, else the
    thermodynamic limit.
    """
    if params.n_sites is None:
        return f_coeff_limit(params.eta)
    return f_coeff_finite(params.n_sites, params.eta)


def coefficient_curves(sizes: List[int], etas: List[float]) -> List[List[float]]:
    """F_eta^(N) for each size (rows) and eta (columns). A size of 0 stands for the
    thermodynamic limit.
    """
    return [
        [f_coeff_limit(eta) if n == 0 else f_coeff_finite(n, eta) for eta in etas]
        for n in sizes
    ]
