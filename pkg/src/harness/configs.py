"""Run configurations, one per command.

A config is the complete description of a run: it is echoed next to the outputs and
reloading the echo with --config reproduces the outputs byte for byte. Thread counts
and log levels are therefore not part of it.
"""

import json
import pathlib
from typing import Any, Dict, List, Optional, Type, TypeVar

import numpy as np  # type: ignore[import]
import pydantic
from btc import core, integrate

ConfigT = TypeVar("ConfigT", bound="RunConfig")


class RunConfig(pydantic.BaseModel):
    model_config = pydantic.ConfigDict(frozen=True, extra="forbid")

    out: str = "out"  # output directory
    stem: str = "run"  # output file prefix


def _linspace(lo: float, hi: float, n: int) -> List[float]:
    return np.linspace(lo, hi, n).tolist()


def _check_range(lo: float, hi: float, key: str) -> None:
    if not hi > lo:
        raise ValueError(f"{key}: upper end must exceed lower end, got [{lo}, {hi}]")


########################################################################################
# SIMULATE #############################################################################
########################################################################################


class SimulateConfig(RunConfig):
    stem: str = "simulate"
    engine: core.Engine = core.Engine.MEANFIELD
    eta: float = pydantic.Field(0.5, ge=0)
    chi: float = pydantic.Field(0.7, ge=0)
    J: float = pydantic.Field(0.5, gt=0)
    n_sites: Optional[int] = pydantic.Field(None, ge=1)  # required by the exact engine
    # Jt; None picks the engine default
    tmax: Optional[float] = pydantic.Field(None, gt=0)
    # Unset components default to 0 unless all three are unset, in which case the
    # engine's usual initial state is used
    mx0: Optional[float] = None
    my0: Optional[float] = None
    mz0: Optional[float] = None
    samples: Optional[int] = pydantic.Field(None, ge=2)
    rtol: Optional[float] = pydantic.Field(None, gt=0)
    atol: Optional[float] = pydantic.Field(None, gt=0)
    strategy: Optional[str] = None
    dump_rho: bool = False

    @pydantic.field_validator("strategy")
    @classmethod
    def _known_strategy(cls, val: Optional[str]) -> Optional[str]:
        if val is not None and val not in integrate.STRATEGIES:
            raise ValueError(
                f"unknown strategy {val!r}, expected one of {integrate.STRATEGIES}"
            )
        return val

    @pydantic.model_validator(mode="after")
    def _engine_requirements(self) -> "SimulateConfig":
        if self.engine == core.Engine.EXACT and self.n_sites is None:
            raise ValueError("n_sites: the exact engine needs a site count")
        if self.dump_rho and self.engine != core.Engine.EXACT:
            raise ValueError("dump_rho: only the exact engine has a density matrix")
        if self.engine == core.Engine.GAUSSIAN and self.n_sites == 1:
            raise ValueError("n_sites: the Gaussian closure needs at least two sites")
        init = self.initial_state()
        if init is not None and init.n_total > 1 + 1e-12:
            raise ValueError(f"mx0: initial state outside the unit ball: {init}")
        return self

    def params(self) -> core.ModelParams:
        return core.ModelParams(
            J=self.J, chi=self.chi, eta=self.eta, n_sites=self.n_sites
        )

    def initial_state(self) -> Optional[core.MagState]:
        comps = (self.mx0, self.my0, self.mz0)
        if all(c is None for c in comps):
            return None
        mx, my, mz = (0.0 if c is None else c for c in comps)
        return core.MagState(mx=mx, my=my, mz=mz)

    def tolerances(self, default: core.ToleranceSpec) -> core.ToleranceSpec:
        return core.ToleranceSpec(
            rtol=self.rtol if self.rtol is not None else default.rtol,
            atol=self.atol if self.atol is not None else default.atol,
        )


########################################################################################
# FIXED POINTS AND PHASE DIAGRAM #######################################################
########################################################################################


class FixedPointsConfig(RunConfig):
    stem: str = "fixed_points"
    eta: float = pydantic.Field(1.2, ge=0)
    chi_min: float = pydantic.Field(0.05, ge=0)
    chi_max: float = 3.0
    chi_points: int = pydantic.Field(600, ge=2)

    @pydantic.model_validator(mode="after")
    def _ordered(self) -> "FixedPointsConfig":
        _check_range(self.chi_min, self.chi_max, "chi_max")
        return self

    def chi_grid(self) -> List[float]:
        return _linspace(self.chi_min, self.chi_max, self.chi_points)


class PhaseDiagramConfig(RunConfig):
    stem: str = "phase_diagram"
    chi_min: float = pydantic.Field(0.02, ge=0)
    chi_max: float = 3.0
    chi_points: int = pydantic.Field(100, ge=1)
    eta_min: float = pydantic.Field(0.0, ge=0)
    eta_max: float = 3.0
    eta_points: int = pydantic.Field(100, ge=1)

    @pydantic.model_validator(mode="after")
    def _ordered(self) -> "PhaseDiagramConfig":
        _check_range(self.chi_min, self.chi_max, "chi_max")
        _check_range(self.eta_min, self.eta_max, "eta_max")
        return self

    def chi_grid(self) -> List[float]:
        return _linspace(self.chi_min, self.chi_max, self.chi_points)

    def eta_grid(self) -> List[float]:
        return _linspace(self.eta_min, self.eta_max, self.eta_points)


class CuspConfig(RunConfig):
    stem: str = "cusp"
    eta_lo: float = pydantic.Field(1.05, gt=1)
    eta_hi: float = pydantic.Field(2.0, gt=1)
    tol: float = pydantic.Field(1e-5, gt=0)

    @pydantic.model_validator(mode="after")
    def _ordered(self) -> "CuspConfig":
        _check_range(self.eta_lo, self.eta_hi, "eta_hi")
        return self


########################################################################################
# DYNAMICS STUDIES #####################################################################
########################################################################################


class FitDecayConfig(RunConfig):
    stem: str = "fit_decay"
    etas: List[float] = pydantic.Field(
        default_factory=lambda: _linspace(1.05, 1.2, 7), min_length=1
    )
    chi: float = pydantic.Field(0.7, ge=0, lt=1)
    tmax: float = pydantic.Field(300.0, gt=0)
    kick: Optional[float] = 1e-3  # None starts every run from the default init
    samples: Optional[int] = pydantic.Field(None, ge=2)

    @pydantic.field_validator("etas")
    @classmethod
    def _short_range(cls, val: List[float]) -> List[float]:
        bad = [e for e in val if not e > 1]
        if bad:
            raise ValueError(f"every eta must exceed 1, got {bad}")
        return val


class BasinConfig(RunConfig):
    stem: str = "basin"
    eta: float = pydantic.Field(1.1, ge=0)
    chi: float = pydantic.Field(2.0, ge=0)
    grid: int = pydantic.Field(9, ge=1)  # points per axis
    radius: float = pydantic.Field(0.95, gt=0, le=1)
    tmax: float = pydantic.Field(800.0, gt=0)
    samples: Optional[int] = pydantic.Field(None, ge=2)


class CoeffConfig(RunConfig):
    stem: str = "coeff"
    sizes: List[int] = pydantic.Field(
        default_factory=lambda: [10, 100, 1000, 0], min_length=1
    )  # 0 is the N -> infinity curve
    eta_min: float = pydantic.Field(0.0, ge=0)
    eta_max: float = 3.0
    eta_points: int = pydantic.Field(61, ge=1)

    @pydantic.field_validator("sizes")
    @classmethod
    def _non_negative(cls, val: List[int]) -> List[int]:
        if any(n < 0 for n in val):
            raise ValueError(f"sizes must be non-negative, got {val}")
        return val

    @pydantic.model_validator(mode="after")
    def _ordered(self) -> "CoeffConfig":
        if self.eta_points > 1:
            _check_range(self.eta_min, self.eta_max, "eta_max")
        return self

    def eta_grid(self) -> List[float]:
        return _linspace(self.eta_min, self.eta_max, self.eta_points)


########################################################################################
# LOADING ##############################################################################
########################################################################################


def build_config(cls: Type[ConfigT], values: Dict[str, Any]) -> ConfigT:
    """Validates values into cls.

    Raises:
        ConfigError: naming the first offending key
    """
    try:
        return cls.model_validate(values)
    except pydantic.ValidationError as e:
        err = e.errors()[0]
        msg = str(err["msg"]).replace("Value error, ", "", 1)
        if err["loc"]:
            key = ".".join(str(part) for part in err["loc"])
            msg = f"{key}: {msg}"
        # Model-level checks already lead with the key they concern
        raise core.ConfigError(msg) from e


def load_config_file(path: str) -> Dict[str, Any]:
    try:
        data = json.loads(pathlib.Path(path).read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise core.ConfigError(f"config: cannot read {path}: {e}") from e
    if not isinstance(data, dict):
        raise core.ConfigError(f"config: {path} must hold a JSON object")
    return data
