"""Pump-probe photon counting pipeline.

A cycle is six consecutive frequency slots f_A … f_F. Every slot carries one
heating pulse `heat_offset` after its start, so delays are measured from that
trigger. Counts are binned; the first `dead` μs of every slot are discarded
while the source settles, and the rest is stacked over cycles, box-averaged
and converted with the six-point formula.
"""

import logging
from collections.abc import Callable
from dataclasses import dataclass, field, fields, replace
from math import isclose, sqrt

import numpy as np

from lib.errors import ShapeMismatchError
from lib.odmr_analysis import (
    LorentzianFit,
    Response,
    SixPointSet,
    lorentzian_response,
    six_point_temperature,
)
from lib.thermal_sim import ProbeTrace

logger = logging.getLogger(__name__)

STREAM_HEADER = "# dressed-thermo tagstream v1"
SLOTS = 6

Profile = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class TimingConfig:
    """Timing of the frequency-modulation cycle.

    Attributes
    ----------
    cycle : float
        Total period (μs).
    slot : float
        Dwell on each frequency (μs).
    bin_ns : float
        Accumulation bin (ns).
    dead : float
        Discarded window at the start of each slot (μs).
    heat_offset : float
        Heating trigger after the slot start (μs).
    heat_duration : float
        Heating pulse length (μs).
    heat_period : float
        Heating repetition period (μs).
    box : int
        Box-average width (bins).
    rise_time : float
        Settling time of the frequency source (μs), informative only.
    """

    cycle: float = 60.0
    slot: float = 10.0
    bin_ns: float = 16.0
    dead: float = 4.0
    heat_offset: float = 5.0
    heat_duration: float = 3.0
    heat_period: float = 10.0
    box: int = 3
    rise_time: float = 3.5

    def __post_init__(self):
        if not isclose(self.cycle, SLOTS * self.slot):
            raise ValueError(f"cycle ({self.cycle}) must equal 6·slot ({SLOTS * self.slot})")
        if not 0 <= self.dead < self.slot:
            raise ValueError(f"dead ({self.dead}) must lie in [0, slot)")
        bins = self.slot * 1000 / self.bin_ns
        if self.bin_ns <= 0 or not isclose(bins, round(bins)):
            raise ValueError(f"bin ({self.bin_ns} ns) must divide the slot")
        dead_bins = self.dead * 1000 / self.bin_ns
        if not isclose(dead_bins, round(dead_bins)):
            raise ValueError(f"bin ({self.bin_ns} ns) must divide the dead time")
        if not 0 < self.heat_duration <= self.heat_period:
            raise ValueError("heat_duration must lie in (0, heat_period]")
        if self.box < 1:
            raise ValueError(f"box must be at least 1 (got {self.box})")

    @property
    def bins_per_slot(self) -> int:
        """Bins in one slot (625 for the defaults)."""
        return round(self.slot * 1000 / self.bin_ns)

    @property
    def dead_bins(self) -> int:
        """Bins discarded at the start of each slot (250 for the defaults)."""
        return round(self.dead * 1000 / self.bin_ns)

    @property
    def resolution_ns(self) -> float:
        """Time step of the temperature trace (48 ns for the defaults)."""
        return self.box * self.bin_ns


@dataclass(frozen=True, eq=False)
class TagStream:
    """Binned counts of a run.

    Attributes
    ----------
    counts : np.ndarray
        Shape (cycles, 6, bins). Integers, or expected values for a noiseless
        stream.
    n : int
        Accumulations per cycle entry.
    seed : int | None
        Seed of a synthetic stream.
    timing : TimingConfig
        Timing the counts follow.
    offset_bins : int
        Bins removed at the start of every slot.
    """

    counts: np.ndarray
    n: int
    seed: int | None
    timing: TimingConfig = field(default_factory=TimingConfig)
    offset_bins: int = 0

    def __post_init__(self):
        counts = np.asarray(self.counts)
        expected = (SLOTS, self.timing.bins_per_slot - self.offset_bins)
        if counts.ndim != 3 or counts.shape[1:] != expected:
            raise ShapeMismatchError(
                f"counts have shape {counts.shape}, expected (cycles, {expected[0]}, {expected[1]})"
            )
        if np.any(counts < 0):
            raise ValueError("counts must be non-negative")
        object.__setattr__(self, "counts", counts)

    @property
    def cycles(self) -> int:
        """Number of recorded cycles."""
        return self.counts.shape[0]


@dataclass(frozen=True, eq=False)
class StackedCounts:
    """Counts summed over cycles, per slot and delay.

    Attributes
    ----------
    counts : np.ndarray
        Shape (6, bins).
    delay_ns : np.ndarray
        Bin start relative to the heating trigger (ns).
    """

    counts: np.ndarray
    delay_ns: np.ndarray

    def __post_init__(self):
        if self.counts.shape != (SLOTS, self.delay_ns.size):
            raise ShapeMismatchError(
                f"stacked counts have shape {self.counts.shape}, "
                f"expected ({SLOTS}, {self.delay_ns.size})"
            )


@dataclass(frozen=True, eq=False)
class TemperatureTrace:
    """δT against delay.

    Attributes
    ----------
    delay_ns : np.ndarray
        Delay of each box from the heating trigger (ns).
    dT : np.ndarray
        Temperature change (K); NaN where unstable.
    unstable : np.ndarray
        Six-point denominator at the noise floor.
    resolution_ns : float
        Box length (ns).
    """

    delay_ns: np.ndarray
    dT: np.ndarray
    unstable: np.ndarray
    resolution_ns: float

    @property
    def unstable_fraction(self) -> float:
        """Share of flagged delays."""
        return float(np.mean(self.unstable))


@dataclass(frozen=True)
class PipelineStats:
    """Noise figures of a temperature trace."""

    rms: float
    snr: float
    sensitivity: float
    amplitude: float


def pulse_profile(
    amplitude: float, duration_us: float, tau_rise_us: float = 0.0, tau_fall_us: float = 0.0
) -> Profile:
    """First-order heating response to a pulse of `duration_us`.

    Parameters
    ----------
    amplitude : float
        Plateau temperature change (K).
    duration_us : float
        Pulse length (μs).
    tau_rise_us : float
        Heating time constant; 0 gives a step.
    tau_fall_us : float
        Cooling time constant; 0 gives an instant return.

    Returns
    -------
    Profile
        δT as a function of the time since the trigger (μs).

    """

    def rise(t: np.ndarray) -> np.ndarray:
        if tau_rise_us == 0:
            return np.full_like(t, amplitude)
        return amplitude * (1 - np.exp(-t / tau_rise_us))

    end = float(rise(np.array([duration_us]))[0])

    def profile(t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        during = (t >= 0) & (t < duration_us)
        after = t >= duration_us
        out = np.zeros_like(t)
        out[during] = rise(t[during])
        if tau_fall_us > 0:
            out[after] = end * np.exp(-(t[after] - duration_us) / tau_fall_us)
        return out

    return profile


def trace_profile(trace: ProbeTrace, trigger_us: float) -> Profile:
    """δT after a trigger, read from a simulated probe trace."""
    base = float(np.interp(trigger_us, trace.t_us, trace.T))
    return lambda t: np.interp(np.asarray(t) + trigger_us, trace.t_us, trace.T) - base


def slot_times(timing: TimingConfig) -> np.ndarray:
    """Bin centres of one slot (μs from the slot start)."""
    return (np.arange(timing.bins_per_slot) + 0.5) * timing.bin_ns * 1e-3


def expected_counts(
    profile: Profile,
    response: LorentzianFit | Response,
    six: SixPointSet,
    timing: TimingConfig,
    n: int,
    dD_dT: float,
) -> np.ndarray:
    """Mean counts of one cycle, shape (6, bins).

    The dip is shifted by dD_dT·δT(t) with t the time since the last
    heating trigger, and the rate is integrated over a bin and `n`
    accumulations.
    """
    rate_of = lorentzian_response(response) if isinstance(response, LorentzianFit) else response
    within = slot_times(timing)
    means = np.empty((SLOTS, within.size))
    for i, f in enumerate(six.freqs):
        since = (i * timing.slot + within - timing.heat_offset) % timing.heat_period
        shift = dD_dT * profile(since)
        means[i] = rate_of(f - shift) * timing.bin_ns * 1e-9 * n
    return means


def synthesize_stream(
    profile: Profile | ProbeTrace,
    response: LorentzianFit | Response,
    six: SixPointSet,
    timing: TimingConfig,
    n: int,
    seed: int,
    dD_dT: float,
    cycles: int = 1,
    noiseless: bool = False,
    trigger_us: float = 0.0,
) -> TagStream:
    """Synthetic binned photon counts.

    Parameters
    ----------
    profile : Profile | ProbeTrace
        δT against time since the heating trigger, or a probe trace whose
        pulse starts at `trigger_us`.
    response : LorentzianFit | Response
        Photon rate against frequency.
    six : SixPointSet
        Slot frequencies.
    timing : TimingConfig
        Cycle timing.
    n : int
        Accumulations per cycle entry.
    seed : int
        Seed; each cycle draws from its own child of `SeedSequence(seed)`.
    dD_dT : float
        Thermal shift coefficient (MHz/K).
    cycles : int
        Number of cycles.
    noiseless : bool
        Store the expected counts instead of Poisson draws.
    trigger_us : float
        Pulse start of a probe trace.

    Returns
    -------
    TagStream
        Shape (cycles, 6, bins).

    """
    if n < 1:
        raise ValueError(f"n must be at least 1 (got {n})")
    if isinstance(profile, ProbeTrace):
        profile = trace_profile(profile, trigger_us)

    means = expected_counts(profile, response, six, timing, n, dD_dT)
    if noiseless:
        counts = np.broadcast_to(means, (cycles, *means.shape)).copy()
    else:
        children = np.random.SeedSequence(seed).spawn(cycles)
        counts = np.stack([np.random.default_rng(c).poisson(means) for c in children])

    logger.debug(f"Synthesized {cycles} cycles, mean {means.mean():.3g} counts per bin")
    return TagStream(counts, n, seed, timing)


def remove_dead_time(raw: TagStream, timing: TimingConfig) -> TagStream:
    """Drop the first `dead` μs of every slot."""
    if raw.offset_bins != 0 or raw.counts.shape[2] != timing.bins_per_slot:
        raise ShapeMismatchError(
            f"expected {timing.bins_per_slot} bins per slot, got {raw.counts.shape[2]}"
        )
    if timing.dead_bins == 0:
        return raw
    return replace(raw, counts=raw.counts[:, :, timing.dead_bins :], offset_bins=timing.dead_bins)


def concatenate_streams(a: TagStream, b: TagStream) -> TagStream:
    """Append the cycles of `b` to `a`."""
    if a.timing != b.timing or a.offset_bins != b.offset_bins:
        raise ShapeMismatchError("streams follow different timings")
    if a.n != b.n:
        raise ShapeMismatchError(f"streams accumulate different n ({a.n} and {b.n})")
    return replace(a, counts=np.concatenate([a.counts, b.counts]), n=a.n, seed=None)


def stack_by_delay(clean: TagStream, timing: TimingConfig) -> StackedCounts:
    """Sum counts over cycles, per slot and delay from the heating trigger."""
    if clean.offset_bins != timing.dead_bins:
        raise ShapeMismatchError("dead time has not been removed")

    start = clean.offset_bins + np.arange(clean.counts.shape[2])
    delay_ns = start * timing.bin_ns - timing.heat_offset * 1000
    return StackedCounts(clean.counts.sum(axis=0), delay_ns)


def to_temperature(
    st: StackedCounts,
    six: SixPointSet,
    dD_dT: float,
    timing: TimingConfig,
    unstable_sigma: float = 3.0,
) -> TemperatureTrace:
    """Box-average and convert with the six-point formula.

    Parameters
    ----------
    st : StackedCounts
        Stacked counts.
    six : SixPointSet
        Slot frequencies.
    dD_dT : float
        Thermal shift coefficient (MHz/K).
    timing : TimingConfig
        Provides the box width.
    unstable_sigma : float
        A delay is flagged when the slope denominator is within this many
        shot-noise standard deviations of zero.

    Returns
    -------
    TemperatureTrace
        One sample per box.

    """
    n_box = st.counts.shape[1] // timing.box
    used = n_box * timing.box
    boxed = st.counts[:, :used].reshape(SLOTS, n_box, timing.box).sum(axis=2)
    delay_ns = st.delay_ns[:used].reshape(n_box, timing.box)[:, 0]

    pA, _, pC, pD, _, pF = boxed
    floor = unstable_sigma * np.sqrt(pA + pC + pD + pF)
    result = six_point_temperature(boxed, six.d_omega, dD_dT, floor)
    unstable = np.asarray(result.unstable)
    if unstable.any():
        logger.warning(f"{int(unstable.sum())} of {unstable.size} delays are unstable")

    return TemperatureTrace(delay_ns, np.asarray(result.dT), unstable, timing.resolution_ns)


def point_integration_time(timing: TimingConfig, n: int) -> float:
    """Total time behind one trace sample, 6·n·box·bin (s)."""
    return SLOTS * n * timing.box * timing.bin_ns * 1e-9


def _window(trace: TemperatureTrace, window: tuple[float, float]) -> np.ndarray:
    lo, hi = window
    selected = trace.dT[(trace.delay_ns >= lo) & (trace.delay_ns < hi)]
    selected = selected[np.isfinite(selected)]
    if selected.size == 0:
        raise ValueError(f"window {window} ns holds no stable samples")
    return selected


def step_amplitude(
    trace: TemperatureTrace, baseline: tuple[float, float], plateau: tuple[float, float]
) -> float:
    """Mean δT over `plateau` minus mean over `baseline` (windows in ns)."""
    return float(np.mean(_window(trace, plateau)) - np.mean(_window(trace, baseline)))


def pipeline_stats(
    trace: TemperatureTrace,
    window: tuple[float, float],
    integration_time_s: float,
    plateau: tuple[float, float] | None = None,
) -> PipelineStats:
    """RMS, SNR and sensitivity of a trace.

    Parameters
    ----------
    trace : TemperatureTrace
        Converted trace.
    window : tuple[float, float]
        Pre-heating delays (ns) used for the RMS and the baseline.
    integration_time_s : float
        Time behind one sample (s).
    plateau : tuple[float, float] | None
        Heated delays (ns); the maximum of the trace is used when omitted.

    Returns
    -------
    PipelineStats
        RMS (K), SNR = amplitude/RMS, sensitivity RMS·√t (K/√Hz) and the
        step amplitude (K).

    """
    quiet = _window(trace, window)
    rms = float(np.std(quiet))
    if plateau is None:
        amplitude = float(np.nanmax(trace.dT) - np.mean(quiet))
    else:
        amplitude = step_amplitude(trace, window, plateau)

    snr = amplitude / rms if rms > 0 else float("inf")
    return PipelineStats(rms, snr, rms * sqrt(integration_time_s), amplitude)


def write_tag_stream(path: str, stream: TagStream) -> str:
    """Write a stream as text.

    Layout: the line `# dressed-thermo tagstream v1`, then one `# key = value`
    line per timing field followed by n, seed, cycles and offset_bins, then
    six rows per cycle (slots A to F) of space-separated counts.
    """
    from lib.file import ensure_parent

    target = ensure_parent(path)
    integral = np.issubdtype(stream.counts.dtype, np.integer)
    with open(target, "w") as f:
        f.write(f"{STREAM_HEADER}\n")
        for fld in fields(TimingConfig):
            f.write(f"# {fld.name} = {getattr(stream.timing, fld.name)!r}\n")
        f.write(f"# n = {stream.n}\n")
        f.write(f"# seed = {stream.seed}\n")
        f.write(f"# cycles = {stream.cycles}\n")
        f.write(f"# offset_bins = {stream.offset_bins}\n")
        for cycle in stream.counts:
            for row in cycle:
                f.write(" ".join(str(int(v)) if integral else repr(float(v)) for v in row))
                f.write("\n")

    logger.debug(f"Wrote {stream.cycles} cycles to {path}")
    return target


def read_tag_stream(path: str) -> TagStream:
    """Read a stream written by `write_tag_stream`."""
    from ast import literal_eval

    with open(path) as f:
        first = f.readline().strip()
        if first != STREAM_HEADER:
            raise ShapeMismatchError(f"{path}: not a tag stream")
        header: dict[str, str] = {}
        rows = []
        for line in f:
            if line.startswith("#"):
                key, _, value = line.lstrip("#").partition("=")
                header[key.strip()] = value.strip()
            elif line.strip():
                rows.append(line.split())

    timing = TimingConfig(**{s.name: literal_eval(header[s.name]) for s in fields(TimingConfig)})
    integral = all("." not in v and "e" not in v.lower() for r in rows[:SLOTS] for v in r)
    counts = np.array(rows, dtype=np.int64 if integral else float)
    cycles = int(header["cycles"])
    seed = None if header["seed"] == "None" else int(header["seed"])
    return TagStream(
        counts.reshape(cycles, SLOTS, -1),
        int(header["n"]),
        seed,
        timing,
        int(header["offset_bins"]),
    )


def write_trace_csv(path: str, trace: TemperatureTrace) -> str:
    """Write `delay_ns,dT_K,flag`; flag is 1 on unstable delays."""
    from lib.file import write_columns

    return write_columns(
        path,
        ["delay_ns", "dT_K", "flag"],
        [trace.delay_ns, trace.dT, trace.unstable.astype(int)],
        fmt=["%.1f", "%.10g", "%d"],
    )
