import pathlib
import sys
from typing import Callable, Optional

import numpy as np  # type: ignore[import]
import pytest

SRC_DIR = pathlib.Path(__file__).resolve().parents[1] / "src"
if str(SRC_DIR) not in sys.path:
    sys.path.insert(0, str(SRC_DIR))

from btc import core  # noqa: E402

TrajectoryFactory = Callable[..., core.Trajectory]


@pytest.fixture
def btc_params() -> core.ModelParams:
    """Deep in the BTC phase: persistent oscillations, conserved pair."""
    return core.ModelParams(chi=0.7, eta=0.5)


@pytest.fixture
def make_trajectory() -> TrajectoryFactory:
    """Wraps synthetic signals in a Trajectory for the analysis routines."""

    def _make(
        times: np.ndarray,
        mz: np.ndarray,
        my: Optional[np.ndarray] = None,
        params: Optional[core.ModelParams] = None,
    ) -> core.Trajectory:
        times = np.asarray(times, dtype=float)
        mz = np.asarray(mz, dtype=float)
        my = np.zeros_like(mz) if my is None else np.asarray(my, dtype=float)
        states = np.column_stack([np.zeros_like(mz), my, mz])
        return core.Trajectory(
            times=times,
            states=states,
            params=params if params is not None else core.ModelParams(chi=0.7, eta=1.1),
            n_total=np.einsum("ij,ij->i", states, states),
            m_ratio=np.zeros(len(times)),
            m_ratio_singular=np.zeros(len(times), dtype=bool),
        )

    return _make
