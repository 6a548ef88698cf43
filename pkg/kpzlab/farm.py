"""Trajectory farms.

A farm evaluates one picklable task per trajectory index, either in process
or on a :py:class:`multiprocessing.Pool`. Each task draws its random numbers
from :py:func:`kpzlab.rng.substream` keyed by its own index, so the collected
results do not depend on the worker count.
"""
import logging
import multiprocessing
import os
from typing import Any, Callable, List, Sequence, Tuple

from . import signals
from .errors import ArgumentError

__log = logging.getLogger(__name__)


def _setup_multiprocessing_worker(log_level):
    from .cmdline import _setup_logging
    if log_level == logging.DEBUG:
        _setup_logging(debug=True, verbose=False)
    elif log_level == logging.INFO:
        _setup_logging(debug=False, verbose=True)
    else:
        _setup_logging(debug=False, verbose=False)


def resolve_workers(workers: int) -> int:
    """Map the configured worker count to an actual one; ``0`` means one
    worker per CPU."""
    if workers < 0:
        raise ArgumentError(f'Worker count must be >= 0, got {workers}',
                            workers=workers)
    if workers == 0:
        return os.cpu_count() or 1
    return workers


def run_farm(task: Callable[[Any], Tuple[int, Any]],
             arguments: Sequence[Any],
             workers: int = 1,
             kind: str = '') -> List[Any]:
    """Run ``task`` on every element of ``arguments``.

    ``task`` must be a module level function returning ``(index, result)``.
    Results are returned sorted by index.

    :param workers: ``1`` runs in process, ``0`` uses all CPUs.
    :param kind: passed on to :py:data:`kpzlab.signals.trajectory_completed`.
    """
    workers = resolve_workers(workers)
    results = []

    if workers == 1 or len(arguments) <= 1:
        for argument in arguments:
            index, result = task(argument)
            signals.trajectory_completed.send(index=index, kind=kind)
            results.append((index, result,))
    else:
        __log.debug('Farming %d tasks out to %d workers',
                    len(arguments), workers)
        chunksize = max(1, len(arguments) // (4 * workers))
        with multiprocessing.Pool(
                processes=workers,
                initializer=_setup_multiprocessing_worker,
                initargs=(logging.root.level,)) as pool:
            for index, result in pool.imap_unordered(task, arguments,
                                                     chunksize=chunksize):
                signals.trajectory_completed.send(index=index, kind=kind)
                results.append((index, result,))

    results.sort(key=lambda r: r[0])
    return [r[1] for r in results]
