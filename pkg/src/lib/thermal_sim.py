"""Explicit finite-difference heat diffusion on a 2-D nonuniform grid.

The surface is reduced to a sheet of thickness l. A surface loss density Q
(W/m²) heats a cell at Q/l per unit volume and a convective coefficient h
cools it at h(T − T∞)/l. Neighbouring cells exchange heat through the
interface temperature of the two half-cells in series; grid edges are
insulating.

SI units throughout except trace times, which are in μs, and temperatures,
which are in °C.
"""

import logging
from dataclasses import dataclass, field, replace
from math import ceil
from threading import Event
from typing import NamedTuple

import numpy as np

from lib.errors import NumericalError, SourceMapError, StabilityError

logger = logging.getLogger(__name__)

SAFETY = 0.5
MAP_HEADER = "# dressed-thermo matrix v1"


@dataclass(frozen=True)
class MaterialCell:
    """Thermal properties of one material.

    Attributes
    ----------
    sigma : float
        Thermal conductivity (W/(m·K)).
    c_sp : float
        Specific heat (J/(g·K)).
    rho_m : float
        Mass density (g/m³).
    """

    sigma: float
    c_sp: float
    rho_m: float

    def __post_init__(self):
        for name in ("sigma", "c_sp", "rho_m"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive (got {getattr(self, name)})")

    @property
    def heat_capacity(self) -> float:
        """Volumetric heat capacity ρ·C_sp (J/(m³·K))."""
        return self.rho_m * self.c_sp


GOLD = MaterialCell(sigma=310.0, c_sp=0.129, rho_m=19.3e6)
AIR = MaterialCell(sigma=0.026, c_sp=1.006, rho_m=1.18e3)


@dataclass(frozen=True, eq=False)
class ThermalGrid:
    """Temperature field on a rectilinear grid of material cells.

    Attributes
    ----------
    x_edges : np.ndarray
        Cell edges along x (m), strictly increasing.
    y_edges : np.ndarray
        Cell edges along y (m), strictly increasing.
    material_index : np.ndarray
        Shape (nx, ny), index into `palette`.
    palette : tuple[MaterialCell, ...]
        Materials present on the grid.
    T : np.ndarray
        Shape (nx, ny), temperature (°C).
    thickness : float
        Sheet thickness l (m).
    h_convection : np.ndarray
        Shape (nx, ny), convective coefficient (W/(m²·K)); a scalar is broadcast.
    T_inf : float
        Ambient temperature (°C).
    source : np.ndarray
        Shape (nx, ny), surface loss density currently applied (W/m²).
    time : float
        Elapsed time (s).
    """

    x_edges: np.ndarray
    y_edges: np.ndarray
    material_index: np.ndarray
    palette: tuple[MaterialCell, ...]
    T: np.ndarray
    thickness: float = 500e-9
    h_convection: np.ndarray | float = 2e8
    T_inf: float = 26.0
    source: np.ndarray | None = None
    time: float = 0.0

    def __post_init__(self):
        x = np.asarray(self.x_edges, dtype=float)
        y = np.asarray(self.y_edges, dtype=float)
        if x.size < 2 or y.size < 2 or np.any(np.diff(x) <= 0) or np.any(np.diff(y) <= 0):
            raise ValueError("cell edges must be strictly increasing with at least one cell")
        shape = (x.size - 1, y.size - 1)

        index = np.asarray(self.material_index, dtype=int)
        T = np.asarray(self.T, dtype=float)
        if index.shape != shape or T.shape != shape:
            raise ValueError(f"cell arrays must have shape {shape}")
        if index.min() < 0 or index.max() >= len(self.palette):
            raise ValueError("material index outside the palette")
        if not np.all(np.isfinite(T)):
            raise ValueError("temperatures must be finite")
        if self.thickness <= 0:
            raise ValueError(f"thickness must be positive (got {self.thickness})")

        h = np.broadcast_to(np.asarray(self.h_convection, dtype=float), shape).copy()
        if np.any(h < 0):
            raise ValueError("convective coefficients must be non-negative")
        source = (
            np.zeros(shape)
            if self.source is None
            else np.asarray(self.source, dtype=float)
        )
        if source.shape != shape:
            raise ValueError(f"source must have shape {shape}")

        for name, value in (
            ("x_edges", x),
            ("y_edges", y),
            ("material_index", index),
            ("T", T),
            ("h_convection", h),
            ("source", source),
        ):
            object.__setattr__(self, name, value)

    @property
    def shape(self) -> tuple[int, int]:
        """Number of cells (nx, ny)."""
        return self.T.shape

    @property
    def dx(self) -> np.ndarray:
        """Cell widths along x (m)."""
        return np.diff(self.x_edges)

    @property
    def dy(self) -> np.ndarray:
        """Cell widths along y (m)."""
        return np.diff(self.y_edges)

    @property
    def x_centers(self) -> np.ndarray:
        """Cell centres along x (m)."""
        return (self.x_edges[:-1] + self.x_edges[1:]) / 2

    @property
    def y_centers(self) -> np.ndarray:
        """Cell centres along y (m)."""
        return (self.y_edges[:-1] + self.y_edges[1:]) / 2

    @property
    def cell_area(self) -> np.ndarray:
        """Cell areas (m²)."""
        return np.outer(self.dx, self.dy)

    @property
    def sigma(self) -> np.ndarray:
        """Per-cell conductivity (W/(m·K))."""
        return np.array([m.sigma for m in self.palette])[self.material_index]

    @property
    def heat_capacity(self) -> np.ndarray:
        """Per-cell ρ·C_sp (J/(m³·K))."""
        return np.array([m.heat_capacity for m in self.palette])[self.material_index]

    def cell_at(self, x: float, y: float) -> tuple[int, int]:
        """Index of the cell containing point (x, y) in metres."""
        i = int(np.clip(np.searchsorted(self.x_edges, x, side="right") - 1, 0, self.shape[0] - 1))
        j = int(np.clip(np.searchsorted(self.y_edges, y, side="right") - 1, 0, self.shape[1] - 1))
        return i, j


@dataclass(frozen=True, eq=False)
class SourceSchedule:
    """Pulsed heating: a spatial map switched on by a periodic gate.

    Attributes
    ----------
    spatial : np.ndarray
        Surface loss density while the gate is on (W/m²).
    start_us : float
        Start of the first pulse (μs).
    duration_us : float
        Pulse length (μs).
    period_us : float
        Repetition period (μs).
    """

    spatial: np.ndarray
    start_us: float = 0.0
    duration_us: float = 3.0
    period_us: float = 10.0

    def __post_init__(self):
        spatial = np.asarray(self.spatial, dtype=float)
        if np.any(spatial < 0):
            raise ValueError("source power must be non-negative")
        if self.period_us <= 0:
            raise ValueError(f"period must be positive (got {self.period_us})")
        if not 0 <= self.duration_us <= self.period_us:
            raise ValueError(
                f"duration ({self.duration_us}) must lie in [0, period ({self.period_us})]"
            )
        object.__setattr__(self, "spatial", spatial)

    def is_on(self, t_us: float) -> bool:
        """Whether the gate is open at time `t_us`."""
        if t_us < self.start_us:
            return False
        return (t_us - self.start_us) % self.period_us < self.duration_us


class ProbeTrace(NamedTuple):
    """Temperature history of one cell."""

    cell: tuple[int, int]
    t_us: np.ndarray
    T: np.ndarray


@dataclass(frozen=True, eq=False)
class ThermalRun:
    """Outcome of a march: probe traces, final grid and requested snapshots."""

    traces: list[ProbeTrace]
    final: ThermalGrid
    snapshots: list[tuple[float, np.ndarray]] = field(default_factory=list)


class HeatBalance(NamedTuple):
    """Injected and convected power (W)."""

    source: float
    loss: float

    @property
    def imbalance(self) -> float:
        """Relative mismatch |source − loss|/source."""
        return abs(self.source - self.loss) / self.source


@dataclass(frozen=True)
class _Stencil:
    gx: np.ndarray
    gy: np.ndarray
    inv_dx: np.ndarray
    inv_dy: np.ndarray
    heat_capacity: np.ndarray
    h_over_l: np.ndarray
    inv_l: float
    T_inf: float

    def limit(self) -> float:
        total = self.h_over_l.copy()
        total[:-1, :] += self.gx * self.inv_dx[:-1, None]
        total[1:, :] += self.gx * self.inv_dx[1:, None]
        total[:, :-1] += self.gy * self.inv_dy[None, :-1]
        total[:, 1:] += self.gy * self.inv_dy[None, 1:]
        with np.errstate(divide="ignore"):
            return float(SAFETY * np.min(self.heat_capacity / total))

    def advance(self, T: np.ndarray, source: np.ndarray, dt: float) -> np.ndarray:
        flux_x = self.gx * (T[:-1, :] - T[1:, :])
        flux_y = self.gy * (T[:, :-1] - T[:, 1:])

        inflow_x = np.zeros_like(T)
        inflow_x[1:, :] += flux_x
        inflow_x[:-1, :] -= flux_x
        inflow_y = np.zeros_like(T)
        inflow_y[:, 1:] += flux_y
        inflow_y[:, :-1] -= flux_y

        power = (
            inflow_x * self.inv_dx[:, None]
            + inflow_y * self.inv_dy[None, :]
            + source * self.inv_l
            - self.h_over_l * (T - self.T_inf)
        )
        return T + dt * power / self.heat_capacity


def _series_conductance(sigma: np.ndarray, width: np.ndarray, axis: int) -> np.ndarray:
    """Conductance per unit face area between neighbouring cell centres."""
    half = np.expand_dims(width / 2, axis=1 - axis)
    resistance = half / sigma
    if axis == 0:
        return 1 / (resistance[:-1, :] + resistance[1:, :])
    return 1 / (resistance[:, :-1] + resistance[:, 1:])


def _stencil(grid: ThermalGrid) -> _Stencil:
    sigma = grid.sigma
    return _Stencil(
        gx=_series_conductance(sigma, grid.dx, 0),
        gy=_series_conductance(sigma, grid.dy, 1),
        inv_dx=1 / grid.dx,
        inv_dy=1 / grid.dy,
        heat_capacity=grid.heat_capacity,
        h_over_l=grid.h_convection / grid.thickness,
        inv_l=1 / grid.thickness,
        T_inf=grid.T_inf,
    )


def interface_temperature(grid: ThermalGrid, cell: tuple[int, int], direction: str) -> float:
    """Temperature on the face between `cell` and its neighbour.

    Parameters
    ----------
    grid : ThermalGrid
        Grid.
    cell : tuple[int, int]
        Cell index (i, j).
    direction : str
        One of `+x`, `-x`, `+y`, `-y`.

    Returns
    -------
    float
        (σ·T + σₙ·Tₙ)/(σ + σₙ) with n the neighbour. On a grid edge the
        cell's own temperature, as no heat crosses it.

    """
    steps = {"+x": (1, 0), "-x": (-1, 0), "+y": (0, 1), "-y": (0, -1)}
    if direction not in steps:
        raise ValueError(f"unknown direction {direction!r}")

    i, j = cell
    di, dj = steps[direction]
    n_i, n_j = i + di, j + dj
    nx, ny = grid.shape
    if not (0 <= n_i < nx and 0 <= n_j < ny):
        return float(grid.T[i, j])

    sigma = grid.sigma
    s_own, s_other = sigma[i, j], sigma[n_i, n_j]
    return float((s_own * grid.T[i, j] + s_other * grid.T[n_i, n_j]) / (s_own + s_other))


def stability_limit(grid: ThermalGrid) -> float:
    """Largest stable explicit time step (s).

    Half the minimum over cells of ρC_sp divided by the sum of the face
    conductances over the cell width plus h/l.
    """
    return _stencil(grid).limit()


def step(grid: ThermalGrid, dt: float) -> ThermalGrid:
    """Advance the grid by one explicit step of `dt` seconds.

    Parameters
    ----------
    grid : ThermalGrid
        Current state; its `source` is applied during the step.
    dt : float
        Time step (s).

    Returns
    -------
    ThermalGrid
        New state.

    Raises
    ------
    StabilityError
        If `dt` exceeds the stability limit.

    """
    st = _stencil(grid)
    limit = st.limit()
    if dt > limit * (1 + 1e-12):
        raise StabilityError(f"dt = {dt:.3e} s exceeds the stability limit {limit:.3e} s")

    return replace(grid, T=st.advance(grid.T, grid.source, dt), time=grid.time + dt)


def march(
    grid: ThermalGrid,
    schedule: SourceSchedule,
    t_end_us: float,
    probes: list[tuple[int, int]],
    output_interval_us: float | None = None,
    dt: float | None = None,
    snapshot_times_us: list[float] | None = None,
    stop_event: Event | None = None,
) -> ThermalRun:
    """Fixed-step march recording probe temperatures.

    Parameters
    ----------
    grid : ThermalGrid
        Initial state.
    schedule : SourceSchedule
        Heating schedule; its map must match the grid.
    t_end_us : float
        Duration of the march (μs).
    probes : list[tuple[int, int]]
        Cells to record.
    output_interval_us : float | None
        Recording interval; every step when omitted.
    dt : float | None
        Requested step (s); the stability limit when omitted. The step is
        shortened so that the march ends exactly at `t_end_us`.
    snapshot_times_us : list[float] | None
        Times at which a copy of the whole field is kept.
    stop_event : Event | None
        Checked before each step; when set the march raises NumericalError.

    Returns
    -------
    ThermalRun
        Traces, final grid and snapshots.

    """
    if schedule.spatial.shape != grid.shape:
        raise SourceMapError(
            f"source map shape {schedule.spatial.shape} does not match grid {grid.shape}"
        )
    if t_end_us <= 0:
        raise ValueError(f"t_end must be positive (got {t_end_us})")

    st = _stencil(grid)
    limit = st.limit()
    dt = dt or limit
    if dt > limit * (1 + 1e-12):
        raise StabilityError(f"dt = {dt:.3e} s exceeds the stability limit {limit:.3e} s")

    t_end = t_end_us * 1e-6
    n_steps = max(1, ceil(t_end / dt - 1e-9))
    dt = t_end / n_steps
    every = 1 if output_interval_us is None else max(1, round(output_interval_us * 1e-6 / dt))
    pending = sorted(snapshot_times_us or [])
    logger.debug(
        f"Thermal march: grid {grid.shape}, dt = {dt:.3e} s, {n_steps} steps, "
        f"recording every {every}"
    )

    T = grid.T.copy()
    rows, cols = zip(*probes) if probes else ((), ())
    times = [0.0]
    samples = [T[rows, cols].copy()]
    snapshots = []
    zero = np.zeros(grid.shape)
    source = zero

    for k in range(n_steps):
        if stop_event is not None and stop_event.is_set():
            raise NumericalError(f"interrupted at {k * dt * 1e6:.3f} μs")
        t_us = k * dt * 1e6
        source = schedule.spatial if schedule.is_on(t_us) else zero
        T = st.advance(T, source, dt)

        now_us = (k + 1) * dt * 1e6
        while pending and now_us >= pending[0] - 1e-9:
            snapshots.append((now_us, T.copy()))
            pending.pop(0)
        if (k + 1) % every == 0 or k + 1 == n_steps:
            times.append(now_us)
            samples.append(T[rows, cols].copy())

    t_axis = np.array(times)
    values = np.array(samples)
    traces = [ProbeTrace(probe, t_axis, values[:, n]) for n, probe in enumerate(probes)]
    final = replace(grid, T=T, source=source, time=grid.time + t_end)
    return ThermalRun(traces, final, snapshots)


def run(
    grid: ThermalGrid,
    schedule: SourceSchedule,
    t_end_us: float,
    probes: list[tuple[int, int]],
    output_interval_us: float | None = None,
    dt: float | None = None,
    stop_event: Event | None = None,
) -> list[ProbeTrace]:
    """Probe traces of a fixed-step march; see `march`."""
    return march(
        grid, schedule, t_end_us, probes, output_interval_us, dt, stop_event=stop_event
    ).traces


def make_grid(
    x_edges: np.ndarray,
    y_edges: np.ndarray,
    material_index: np.ndarray,
    palette: tuple[MaterialCell, ...],
    T0: float = 26.0,
    thickness: float = 500e-9,
    h_convection: np.ndarray | float = 2e8,
    T_inf: float = 26.0,
) -> ThermalGrid:
    """Grid at a uniform initial temperature `T0`."""
    shape = (len(x_edges) - 1, len(y_edges) - 1)
    return ThermalGrid(
        x_edges=np.asarray(x_edges, dtype=float),
        y_edges=np.asarray(y_edges, dtype=float),
        material_index=material_index,
        palette=palette,
        T=np.full(shape, float(T0)),
        thickness=thickness,
        h_convection=h_convection,
        T_inf=T_inf,
    )


def uniform_grid(
    nx: int,
    ny: int,
    width: float,
    height: float,
    material: MaterialCell = GOLD,
    T0: float = 26.0,
    thickness: float = 500e-9,
    h_convection: float = 2e8,
    T_inf: float = 26.0,
) -> ThermalGrid:
    """Single-material grid of nx × ny equal cells over [0, width] × [0, height]."""
    return make_grid(
        np.linspace(0, width, nx + 1),
        np.linspace(0, height, ny + 1),
        np.zeros((nx, ny), dtype=int),
        (material,),
        T0,
        thickness,
        h_convection,
        T_inf,
    )


def graded_edges(start: float, stop: float, n: int, ratio: float) -> np.ndarray:
    """Edges of `n` cells from `start` to `stop`, each `ratio` times the previous."""
    if ratio == 1:
        return np.linspace(start, stop, n + 1)
    first = (stop - start) * (ratio - 1) / (ratio**n - 1)
    sizes = first * ratio ** np.arange(n)
    edges = start + np.concatenate([[0.0], np.cumsum(sizes)])
    edges[-1] = stop
    return edges


def cpw_grid(
    width_um: float = 60.0,
    height_um: float = 40.0,
    strip_width_um: float = 10.0,
    strip_cells: int = 10,
    air_cells: int = 8,
    ny: int = 40,
    grading: float = 1.3,
    thickness: float = 500e-9,
    h_convection: float = 2e8,
    h_convection_air: float = 0.0,
    T0: float = 26.0,
    T_inf: float = 26.0,
) -> ThermalGrid:
    """Gold strip along y centred in air, with cells refined near its edges.

    Parameters
    ----------
    width_um : float
        Domain width across the strip (μm), centred on x = 0.
    height_um : float
        Domain length along the strip (μm), from y = 0.
    strip_width_um : float
        Strip width (μm).
    strip_cells : int
        Uniform cells across the strip.
    air_cells : int
        Cells on each side of the strip, growing away from it.
    ny : int
        Uniform cells along the strip.
    grading : float
        Growth ratio of the air cells.
    thickness : float
        Sheet thickness (m).
    h_convection : float
        Effective convective coefficient on gold cells (W/(m²·K)).
    h_convection_air : float
        Convective coefficient on air cells (W/(m²·K)).
    T0 : float
        Initial temperature (°C).
    T_inf : float
        Ambient temperature (°C).

    Returns
    -------
    ThermalGrid
        Grid with palette (GOLD, AIR).

    """
    half_strip = strip_width_um * 1e-6 / 2
    outer = graded_edges(half_strip, width_um * 1e-6 / 2, air_cells, grading)
    strip = np.linspace(-half_strip, half_strip, strip_cells + 1)
    x_edges = np.concatenate([-outer[::-1][:-1], strip, outer[1:]])
    y_edges = np.linspace(0, height_um * 1e-6, ny + 1)

    centers = (x_edges[:-1] + x_edges[1:]) / 2
    is_air = np.abs(centers) > half_strip
    material_index = np.repeat(is_air.astype(int)[:, None], ny, axis=1)
    h = np.where(material_index == 0, h_convection, h_convection_air)
    logger.debug(f"CPW grid: {x_edges.size - 1} × {ny} cells")

    return make_grid(
        x_edges, y_edges, material_index, (GOLD, AIR), T0, thickness, h, T_inf
    )


def strip_source(
    grid: ThermalGrid,
    x_range: tuple[float, float],
    y_range: tuple[float, float],
    power_density: float,
    material: int | None = None,
) -> np.ndarray:
    """Uniform loss density on cells whose centres fall in a rectangle.

    Parameters
    ----------
    grid : ThermalGrid
        Grid.
    x_range : tuple[float, float]
        Rectangle bounds along x (m).
    y_range : tuple[float, float]
        Rectangle bounds along y (m).
    power_density : float
        Surface loss density (W/m²).
    material : int | None
        Restrict to cells of this palette index.

    Returns
    -------
    np.ndarray
        Source map (W/m²).

    """
    xc, yc = np.meshgrid(grid.x_centers, grid.y_centers, indexing="ij")
    inside = (
        (xc >= x_range[0]) & (xc <= x_range[1]) & (yc >= y_range[0]) & (yc <= y_range[1])
    )
    if material is not None:
        inside &= grid.material_index == material
    return np.where(inside, float(power_density), 0.0)


def gaussian_source(
    grid: ThermalGrid, x0: float, y0: float, waist: float, peak: float
) -> np.ndarray:
    """Gaussian spot peak·exp(−2r²/waist²) sampled at cell centres (W/m²)."""
    xc, yc = np.meshgrid(grid.x_centers, grid.y_centers, indexing="ij")
    return peak * np.exp(-2 * ((xc - x0) ** 2 + (yc - y0) ** 2) / waist**2)


def total_power(grid: ThermalGrid, source: np.ndarray) -> float:
    """Integrated power of a loss-density map (W)."""
    return float(np.sum(source * grid.cell_area))


def heat_content(grid: ThermalGrid) -> float:
    """Σ ρC_sp·T·area·l (J, relative to 0 °C)."""
    return float(np.sum(grid.heat_capacity * grid.T * grid.cell_area) * grid.thickness)


def heat_balance(grid: ThermalGrid) -> HeatBalance:
    """Injected power of the current source against convective loss."""
    area = grid.cell_area
    return HeatBalance(
        source=float(np.sum(grid.source * area)),
        loss=float(np.sum(grid.h_convection * (grid.T - grid.T_inf) * area)),
    )


def rise_time(
    trace: ProbeTrace,
    lo: float = 0.1,
    hi: float = 0.9,
    start_us: float | None = None,
    end_us: float | None = None,
) -> float:
    """Time to go from `lo` to `hi` of the temperature rise (μs).

    The rise is measured from the value at `start_us` to the maximum reached
    before `end_us`; crossings are linearly interpolated.
    """
    t, T = trace.t_us, trace.T
    mask = np.ones_like(t, dtype=bool)
    if start_us is not None:
        mask &= t >= start_us
    if end_us is not None:
        mask &= t <= end_us
    t, T = t[mask], T[mask]

    base, peak = T[0], T.max()
    if peak <= base:
        raise ValueError("trace does not rise")

    def crossing(level: float) -> float:
        target = base + level * (peak - base)
        k = int(np.argmax(T >= target))
        if k == 0:
            return float(t[0])
        return float(t[k - 1] + (target - T[k - 1]) * (t[k] - t[k - 1]) / (T[k] - T[k - 1]))

    return crossing(hi) - crossing(lo)


def save_source_map(path: str, grid: ThermalGrid, values: np.ndarray) -> str:
    """Write a per-cell matrix with its grid header.

    The file starts with `# dressed-thermo matrix v1`, then `# key = value`
    lines for nx, ny, x_edges and y_edges (space-separated, metres), then nx
    rows of ny comma-separated values. A `.gz` suffix compresses the file.
    """
    import gzip

    from lib.file import ensure_parent

    values = np.asarray(values, dtype=float)
    if values.shape != grid.shape:
        raise SourceMapError(f"map shape {values.shape} does not match grid {grid.shape}")

    target = ensure_parent(path)
    opener = gzip.open if path.endswith(".gz") else open
    with opener(target, "wt") as f:
        f.write(f"{MAP_HEADER}\n")
        f.write(f"# nx = {grid.shape[0]}\n")
        f.write(f"# ny = {grid.shape[1]}\n")
        f.write(f"# x_edges = {' '.join(repr(float(v)) for v in grid.x_edges)}\n")
        f.write(f"# y_edges = {' '.join(repr(float(v)) for v in grid.y_edges)}\n")
        for row in values:
            f.write(",".join(repr(float(v)) for v in row) + "\n")

    logger.debug(f"Wrote {grid.shape} matrix to {path}")
    return target


def write_snapshot_csv(path: str, grid: ThermalGrid, T: np.ndarray | None = None) -> str:
    """Write a temperature field in the matrix format of `save_source_map`."""
    return save_source_map(path, grid, grid.T if T is None else T)


def read_matrix(path: str) -> tuple[dict[str, str], np.ndarray]:
    """Read a matrix file written by `save_source_map`.

    Returns
    -------
    tuple[dict[str, str], np.ndarray]
        Header fields and values.

    """
    import gzip

    opener = gzip.open if path.endswith(".gz") else open
    header: dict[str, str] = {}
    rows: list[list[float]] = []
    try:
        with opener(path, "rt") as f:
            for n, line in enumerate(f, start=1):
                line = line.strip()
                if not line:
                    continue
                if line.startswith("#"):
                    key, sep, value = line.lstrip("#").partition("=")
                    if sep:
                        header[key.strip()] = value.strip()
                    continue
                try:
                    rows.append([float(v) for v in line.split(",")])
                except ValueError as e:
                    raise SourceMapError(f"{path}:{n}: malformed row") from e
    except OSError as e:
        raise SourceMapError(f"cannot read {path}: {e}") from e

    try:
        nx, ny = int(header["nx"]), int(header["ny"])
    except (KeyError, ValueError) as e:
        raise SourceMapError(f"{path}: missing or invalid nx/ny header") from e
    if len(rows) != nx or any(len(r) != ny for r in rows):
        raise SourceMapError(f"{path}: expected {nx} rows of {ny} values")

    return header, np.array(rows, dtype=float).reshape(nx, ny)


def load_source_map(path: str, grid: ThermalGrid | None = None) -> np.ndarray:
    """Read a surface loss density map (W/m²).

    Parameters
    ----------
    path : str
        Matrix file.
    grid : ThermalGrid | None
        When given, the dimensions and edges in the header must match it.

    Returns
    -------
    np.ndarray
        Per-cell map.

    Raises
    ------
    SourceMapError
        On malformed rows, negative or non-finite power, or a grid mismatch.

    """
    header, values = read_matrix(path)
    if not np.all(np.isfinite(values)):
        raise SourceMapError(f"{path}: non-finite power")
    if np.any(values < 0):
        raise SourceMapError(f"{path}: negative power")

    if grid is not None:
        if values.shape != grid.shape:
            raise SourceMapError(
                f"{path}: map shape {values.shape} does not match grid {grid.shape}"
            )
        for key, edges in (("x_edges", grid.x_edges), ("y_edges", grid.y_edges)):
            if key in header:
                stored = np.array([float(v) for v in header[key].split()])
                if stored.shape != edges.shape or not np.allclose(stored, edges, rtol=1e-9, atol=0):
                    raise SourceMapError(f"{path}: {key} do not match the grid")

    logger.debug(f"Loaded source map {values.shape} from {path}")
    return values


def write_traces_csv(path: str, traces: list[ProbeTrace]) -> str:
    """Write `t_us,T_C_<i>_<j>,...`, one temperature column per probe."""
    from lib.file import write_columns

    if not traces:
        raise ValueError("no probe traces to write")

    header = ["t_us"] + [f"T_C_{i}_{j}" for i, j in (tr.cell for tr in traces)]
    return write_columns(path, header, [traces[0].t_us] + [tr.T for tr in traces])
