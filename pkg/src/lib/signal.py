"""System signal library."""

import logging
from signal import SIGINT, SIGTERM, Signals, signal
from threading import Event
from types import FrameType

logger = logging.getLogger(__name__)


def setup_signal_handler(stop_event: Event):
    """Interrupt running sweeps on SIGTERM and SIGINT.

    Workers of `lib.threading.parallel_map` poll `stop_event` between grid
    points, so a run stops after the points already in flight.

    Parameters
    ----------
    stop_event : Event
        Event polled by the sweep workers

    """

    def signal_handler(signum: int, frame: FrameType | None):
        logger.warning(f"Received {Signals(signum).name}, stopping after current points")
        stop_event.set()

    signal(SIGTERM, signal_handler)
    signal(SIGINT, signal_handler)
