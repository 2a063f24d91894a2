"""Listings for commonly recognized constants: phase-diagram landmarks, output
schemas and run defaults.

Keeps producers and consumers of files in agreement (e.g., the exporters and the tests
both read the CSV headers from here).
"""

import math
from typing import Any, Tuple

from btc import core


class RegistryError(Exception):
    pass


class Registry:
    """Namespace of named constants, read straight off the class.

    Subclasses are scanned once when defined; their public attributes become the
    members, in definition order. Instances cannot be created.
    """

    _members: Tuple[Tuple[str, Any], ...] = ()

    def __init_subclass__(cls, **kwargs: Any) -> None:
        super().__init_subclass__(**kwargs)
        cls._members = tuple(
            (name, val) for name, val in vars(cls).items() if not name.startswith("_")
        )

    def __new__(cls, *args: Any, **kwargs: Any) -> "Registry":
        raise RegistryError(f"{cls.__name__} is a namespace, use the class directly")

    @classmethod
    def items(cls) -> Tuple[Tuple[str, Any], ...]:
        return cls._members

    @classmethod
    def lookup(cls, name: str) -> Any:
        for key, val in cls._members:
            if key == name:
                return val
        known = ", ".join(key for key, _ in cls._members)
        raise RegistryError(f"{cls.__name__} has no {name!r} (known: {known})")


class Landmarks(Registry):
    """Points marked on the mean-field phase diagram."""

    # End of the BTC / magnetized line on the eta = 1 boundary
    A = core.PhasePoint(name="A", chi=1.0, eta=1.0)
    # Where the first-order line leaves eta = 1
    B = core.PhasePoint(name="B", chi=math.sqrt(2.0), eta=1.0)
    # Cusp terminating the coexistence region
    C = core.PhasePoint(name="C", chi=1.225, eta=1.625)


class CsvSchemas(Registry):
    TRAJECTORY = ("t", "mx", "my", "mz", "N", "M")
    GAUSSIAN = (
        "t",
        "mx",
        "my",
        "mz",
        "Cxx",
        "Cxy",
        "Cxz",
        "Cyy",
        "Cyz",
        "Czz",
        "delta_z",
    )
    GAUSSIAN_DISTANCE = ("t", "r", "Cxx", "Cxy", "Cxz", "Cyy", "Cyz", "Czz")
    EXACT = ("t", "mx", "my", "mz", "delta_z", "s2_norm", "trace_err")
    PHASE_DIAGRAM = ("chi", "eta", "label", "n_roots", "mz_1", "mz_2", "mz_3")
    BRANCHES = (
        "chi",
        "n_roots",
        "mz_1",
        "mz_2",
        "mz_3",
        "stability_1",
        "stability_2",
        "stability_3",
    )
    DECAY = ("eta", "B", "B_stderr")
    BASIN = ("mx0", "my0", "mz0", "attractor", "transit_time")
    COEFF = ("eta", "n_sites", "F")
    CUSP = ("method", "chi", "eta", "mz")


class Defaults(Registry):
    # Default start for magnetization dynamics
    INIT = core.MagState(
        mx=1 / math.sqrt(3.0), my=1 / math.sqrt(3.0), mz=1 / math.sqrt(3.0)
    )
    # Initial state for the fluctuation studies (all spins up)
    INIT_UP = core.MagState(mx=0.0, my=0.0, mz=1.0)

    TOL = core.ToleranceSpec(rtol=1e-9, atol=1e-12)
    EXACT_TOL = core.ToleranceSpec(rtol=1e-8, atol=1e-10)

    N_SAMPLES = 2001  # samples per trajectory including t = 0
    STABILITY_TOL = 1e-9  # eigenvalue real parts below this count as zero
    RESIDUAL_TOL = 1e-10  # max |rhs| at a returned fixed point
    GAS_LIQUID_THRESHOLD = 0.5  # on the total magnetization N
    ATTRACTOR_RADIUS = 1e-4  # Euclidean distance in m-space
    ONSET_WINDOW = 10.0  # Jt
    ONSET_HYSTERESIS = 1e-3
    MIN_PEAKS = 4
