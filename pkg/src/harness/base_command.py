"""Provides a base class for all btc-lab commands.

Generally BaseCommand should be subclassed by the workflows in harness.commands.
"""

import enum
import logging
import math
import pathlib
from typing import Any, ClassVar, Dict, List, Optional, Type

import numpy as np  # type: ignore[import]
import pydantic
from btc import core, export
from harness import configs

LOGGER = logging.getLogger()

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERICAL = 3


class BaseCommand:
    """Base class for all our commands.

    Primarily designed to make output handling uniform. Subclass commands only compute
    their results and hand them to the add_* methods; the base class takes care of the
    file layout under <out>/<stem>, the config echo, the summary and exit codes.

    Every run writes:
        <stem>.csv            the main table
        <stem>.config.json    the config echo, reloadable with --config
        <stem>.summary.json   scalar results, outputs written and the truncated flag
    """

    name: ClassVar[str] = ""
    config_cls: ClassVar[Type[configs.RunConfig]] = configs.RunConfig

    def __init__(self, config: configs.RunConfig, threads: Optional[int] = None):
        if not isinstance(config, self.config_cls):
            raise core.ConfigError(
                f"config: {self.name} needs {self.config_cls.__name__}, "
                f"got {type(config).__name__}"
            )
        self._config = config
        self._threads = threads
        self._summary: Dict[str, Any] = {}
        self._outputs: List[pathlib.Path] = []

    @property
    def config(self) -> Any:
        return self._config

    @property
    def threads(self) -> Optional[int]:
        return self._threads

    def path(self, suffix: str = ".csv") -> pathlib.Path:
        return pathlib.Path(self._config.out) / f"{self._config.stem}{suffix}"

    def add_output(self, path: pathlib.Path) -> None:
        self._outputs.append(path)

    def add_summary(self, **items: Any) -> None:
        self._summary.update(items)

    def execute(self) -> None:
        """Computes the results and writes them through add_output / add_summary."""
        raise NotImplementedError

    def salvage(self, partial: Any) -> None:
        """Writes whatever a failed computation left behind. No-op by default."""

    def _finish(self, truncated: bool, error: Optional[str] = None) -> None:
        summary = {
            "command": self.name,
            "truncated": truncated,
            "outputs": [p.name for p in self._outputs],
            **{k: _jsonable(v) for k, v in self._summary.items()},
        }
        if error is not None:
            summary["error"] = error
        export.write_json(self.path(".summary.json"), summary)

    def run(self) -> int:
        """Runs this command and returns the process exit code."""
        export.write_json(self.path(".config.json"), self._config)
        LOGGER.info(f"Running {self.name} into {self.path('')}*")

        # Cascading excepts map the library's error hierarchy onto exit codes
        try:
            self.execute()
        except core.NumericalFailure as e:
            LOGGER.error(f"{self.name} failed numerically: {e}")
            if e.partial is not None:
                self.salvage(e.partial)
            self._finish(truncated=True, error=str(e))
            return EXIT_NUMERICAL
        except core.InsufficientDataError as e:
            LOGGER.error(f"{self.name} had too little data: {e}")
            self._finish(truncated=True, error=str(e))
            return EXIT_NUMERICAL
        except (
            core.ConfigError,
            core.DomainError,
            core.PreconditionError,
            core.ResourceError,
        ) as e:
            # Requests the library rejects up front, so nothing partial to keep
            LOGGER.error(f"{self.name}: {e}")
            return EXIT_USAGE

        self._finish(truncated=False)
        LOGGER.info(f"{self.name} wrote {len(self._outputs)} output file(s)")
        return EXIT_OK


def _jsonable(val: Any) -> Any:
    """Plain JSON value with non-finite floats as null."""
    if isinstance(val, enum.Enum):
        return val.value
    if isinstance(val, pydantic.BaseModel):
        return _jsonable(val.model_dump(mode="json"))
    if isinstance(val, dict):
        return {str(k): _jsonable(v) for k, v in val.items()}
    if isinstance(val, (list, tuple)):
        return [_jsonable(v) for v in val]
    if isinstance(val, np.ndarray):
        return _jsonable(val.tolist())
    if isinstance(val, (bool, np.bool_)):
        return bool(val)
    if isinstance(val, (int, np.integer)):
        return int(val)
    if isinstance(val, (float, np.floating)):
        return float(val) if math.isfinite(val) else None
    return val
