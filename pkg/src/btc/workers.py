"""Thread pool for parameter sweeps.

numpy and scipy release the GIL inside their kernels, so threads give real speedups on
the fixed-point scans and the per-eta integrations without any pickling.
"""

import concurrent.futures
import logging
import os
import time
import traceback
from typing import Any, Callable, List, Optional, Sequence

from btc import core

LOGGER = logging.getLogger()

DEFAULT_THREADS = int(os.environ.get("BTC_LAB_THREADS", str(os.cpu_count() or 1)))


class WorkerPool:
    """Maps a function over inputs, returning results in input order.

    Usage:
        with WorkerPool(threads=4) as pool:
            outcomes = pool.map_ordered(task, inputs)
    """

    def __init__(self, threads: Optional[int] = None):
        self.threads = threads if threads is not None else DEFAULT_THREADS
        if self.threads < 1:
            raise core.ConfigError(f"threads: need at least one, got {self.threads}")
        self._executor: Optional[concurrent.futures.ThreadPoolExecutor] = None

    def __enter__(self) -> "WorkerPool":
        self._executor = concurrent.futures.ThreadPoolExecutor(
            max_workers=self.threads, thread_name_prefix="btc-worker"
        )
        return self

    def __exit__(self, *exc_info: Any) -> None:
        self.close()

    def close(self) -> None:
        if self._executor is not None:
            self._executor.shutdown(wait=True)
            self._executor = None

    def map_ordered(
        self, task: Callable[[Any], Any], inputs: Sequence[Any]
    ) -> List[core.TaskOutcome]:
        """Runs task on every input. Exceptions are caught per input and returned as
        errored outcomes.
        """
        if self.threads == 1:
            outcomes = [_run_task(task, idx, arg) for idx, arg in enumerate(inputs)]
        elif self._executor is None:
            # Single-use pool when called outside a with block
            with WorkerPool(self.threads) as pool:
                return pool.map_ordered(task, inputs)
        else:
            futures = [
                self._executor.submit(_run_task, task, idx, arg)
                for idx, arg in enumerate(inputs)
            ]
            outcomes = [fut.result() for fut in futures]
        n_errored = sum(out.errored for out in outcomes)
        if n_errored:
            LOGGER.warning(f"{n_errored} of {len(outcomes)} tasks errored")
        return outcomes

    def map_values(
        self, task: Callable[[Any], Any], inputs: Sequence[Any]
    ) -> List[Any]:
        """Like map_ordered but returns bare values. The first failure (in input order)
        is re-raised unchanged.
        """
        if self.threads == 1:
            return [task(arg) for arg in inputs]
        if self._executor is None:
            with WorkerPool(self.threads) as pool:
                return pool.map_values(task, inputs)
        futures = [self._executor.submit(task, arg) for arg in inputs]
        return [fut.result() for fut in futures]


def _run_task(task: Callable[[Any], Any], idx: int, arg: Any) -> core.TaskOutcome:
    start = time.perf_counter()
    try:
        val = task(arg)
    except Exception:
        LOGGER.debug(f"Task {idx} errored")
        return core.TaskOutcome(
            index=idx,
            duration=time.perf_counter() - start,
            traceback_str=traceback.format_exc(),
        )
    return core.TaskOutcome(
        index=idx, return_val=val, duration=time.perf_counter() - start
    )
