"""Threading library."""

import logging
from collections.abc import Callable, Sequence
from threading import Event, Thread
from typing import TypeVar

from lib.errors import NumericalError

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


def make_runner(
    target: Callable[..., None],
    *args: object,
    stop_event: Event,
    exceptions: list[BaseException],
) -> Callable[[], None]:
    """Wrap a function to be used for threading.

    Parameters
    ----------
    target : Callable[..., None]
        Function to be called in a thread. It receives `*args` followed by
        `stop_event`.
    *args : object
        Arguments to be passed in the function.
    stop_event : Event
        Event telling every worker to stop.
    exceptions: list[BaseException]
        List containing all exceptions caught.

    Returns
    -------
    Callable[[], None]
        Wrapped function.

    """
    name = getattr(target, "__name__", repr(target))

    def runner():
        logger.debug(f"Thread {name} has started")
        try:
            target(*args, stop_event)
        except Exception as e:
            logger.exception(f"Thread {name} crashed")
            exceptions.append(e)
            stop_event.set()
        finally:
            logger.debug(f"Thread {name} stopped")

    return runner


def resolve_threads(cli_value: int | None, config_value: int | None = None) -> int:
    """Pick the worker count: CLI flag, then `DRESSED_THERMO_THREADS`, then config.

    Parameters
    ----------
    cli_value : int | None
        Value given with `--threads`.
    config_value : int | None
        Value read from `[scenario] threads`.

    Returns
    -------
    int
        Number of worker threads, at least 1.

    """
    import os

    if cli_value is not None:
        threads = cli_value
    elif env := os.environ.get("DRESSED_THERMO_THREADS"):
        threads = int(env)
    elif config_value is not None:
        threads = config_value
    else:
        threads = 1

    return max(1, threads)


def parallel_map(
    fn: Callable[[T], R],
    items: Sequence[T],
    threads: int = 1,
    stop_event: Event | None = None,
) -> list[R]:
    """Apply `fn` to every item, spreading the work over threads.

    Items are dealt round-robin to the workers and the results come back in
    input order. Workers check `stop_event` between items.

    Parameters
    ----------
    fn : Callable[[T], R]
        Function applied to each item.
    items : Sequence[T]
        Inputs.
    threads : int
        Number of worker threads; 1 runs in the calling thread.
    stop_event : Event | None
        Event set by a signal handler or a failing worker.

    Returns
    -------
    list[R]
        Results, in input order.

    Raises
    ------
    NumericalError
        If the work was interrupted through `stop_event`.

    """
    stop_event = stop_event or Event()
    results: list = [None] * len(items)
    done = [False] * len(items)

    def work(indices: list[int], stop: Event):
        for i in indices:
            if stop.is_set():
                return
            results[i] = fn(items[i])
            done[i] = True

    threads = max(1, min(threads, len(items)))
    exceptions: list[BaseException] = []
    if threads == 1:
        work(list(range(len(items))), stop_event)
    else:
        workers = [
            Thread(
                target=make_runner(
                    work,
                    list(range(k, len(items), threads)),
                    stop_event=stop_event,
                    exceptions=exceptions,
                )
            )
            for k in range(threads)
        ]
        logger.debug(f"Spreading {len(items)} items over {threads} threads")
        for worker in workers:
            worker.start()
        for worker in workers:
            worker.join()

    if exceptions:
        raise exceptions[0]
    if not all(done):
        raise NumericalError("interrupted")

    return results
