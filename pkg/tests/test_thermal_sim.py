"""Test lib/thermal_sim.py."""

from math import log

import numpy as np
import pytest


def gold_square(h_convection: float = 0.0, n: int = 20):
    """Gold sheet of n × n one-micrometre cells."""
    from lib.thermal_sim import uniform_grid

    return uniform_grid(n, n, n * 1e-6, n * 1e-6, h_convection=h_convection)


def test_thermal_grid_validation():
    """Test `ThermalGrid` rejects inconsistent cell arrays."""
    from lib.thermal_sim import GOLD, ThermalGrid

    edges = np.linspace(0, 1e-6, 3)
    with pytest.raises(ValueError):
        ThermalGrid(edges[::-1], edges, np.zeros((2, 2), dtype=int), (GOLD,), np.zeros((2, 2)))
    with pytest.raises(ValueError):
        ThermalGrid(edges, edges, np.ones((2, 2), dtype=int), (GOLD,), np.zeros((2, 2)))
    with pytest.raises(ValueError):
        ThermalGrid(edges, edges, np.zeros((2, 2), dtype=int), (GOLD,), np.zeros((3, 2)))
    with pytest.raises(ValueError):
        ThermalGrid(
            edges, edges, np.zeros((2, 2), dtype=int), (GOLD,), np.zeros((2, 2)),
            h_convection=-1.0,
        )


def test_material_cell():
    """Test `MaterialCell` heat capacity and validation."""
    from lib.thermal_sim import GOLD, MaterialCell

    assert GOLD.heat_capacity == pytest.approx(19.3e6 * 0.129)
    with pytest.raises(ValueError):
        MaterialCell(0.0, 1.0, 1.0)


def test_source_schedule():
    """Test `SourceSchedule.is_on` over several periods."""
    from lib.thermal_sim import SourceSchedule

    schedule = SourceSchedule(np.ones((2, 2)), start_us=1.0, duration_us=3.0, period_us=10.0)

    assert not schedule.is_on(0.5)
    assert schedule.is_on(1.0)
    assert schedule.is_on(3.9)
    assert not schedule.is_on(4.0)
    assert schedule.is_on(11.5)

    with pytest.raises(ValueError):
        SourceSchedule(np.ones((2, 2)), duration_us=11.0, period_us=10.0)
    with pytest.raises(ValueError):
        SourceSchedule(-np.ones((2, 2)))


def test_uniform_fixed_point():
    """Test `march`: a grid at ambient temperature without a source stays put."""
    from lib.thermal_sim import SourceSchedule, march

    grid = gold_square(h_convection=1e7, n=8)
    run = march(grid, SourceSchedule(np.zeros(grid.shape)), 0.5, [(4, 4)])

    np.testing.assert_array_equal(run.final.T, grid.T)
    assert np.all(run.traces[0].T == 26.0)


def test_closed_domain_conserves_heat():
    """Test `march` on insulated edges with h = 0: heat grows by the injected energy."""
    from lib.thermal_sim import (
        SourceSchedule,
        gaussian_source,
        heat_content,
        march,
        total_power,
    )

    grid = gold_square()
    spot = gaussian_source(grid, 10e-6, 10e-6, 3e-6, 1e8)
    schedule = SourceSchedule(spot, duration_us=10.0, period_us=10.0)

    run = march(grid, schedule, 1.0, [(10, 10)])
    injected = total_power(grid, spot) * 1e-6
    gained = heat_content(run.final) - heat_content(grid)

    assert abs(gained - injected) / injected < 1e-6
    assert run.final.T.min() >= 26.0


def test_closed_domain_long_march():
    """Test `march` over 1e5 steps without source or convection keeps the heat content."""
    from dataclasses import replace

    from lib.thermal_sim import SourceSchedule, heat_content, march, stability_limit

    grid = gold_square(n=8)
    x = np.arange(8.0)
    grid = replace(grid, T=26.0 + np.add.outer(x, x**2))
    limit = stability_limit(grid)

    run = march(grid, SourceSchedule(np.zeros(grid.shape)), 1e5 * limit * 1e6, [], dt=limit)

    before = heat_content(grid)
    assert abs(heat_content(run.final) - before) / before < 1e-6
    assert np.ptp(run.final.T) < np.ptp(grid.T)


def test_steady_state_balance():
    """Test `march` reaches a steady state where convection removes the source power."""
    from lib.thermal_sim import SourceSchedule, gaussian_source, heat_balance, march

    grid = gold_square(h_convection=1e7)
    spot = gaussian_source(grid, 10e-6, 10e-6, 3e-6, 1e8)
    run = march(grid, SourceSchedule(spot, duration_us=10.0, period_us=10.0), 2.0, [])

    balance = heat_balance(run.final)
    assert balance.source > 0
    assert balance.imbalance < 0.01


def test_stability_error():
    """Test `step` and `march` refuse a step above the stability limit."""
    from lib.errors import StabilityError
    from lib.thermal_sim import SourceSchedule, march, stability_limit, step

    grid = gold_square(n=4)
    limit = stability_limit(grid)
    assert 0 < limit < 1e-6

    with pytest.raises(StabilityError):
        step(grid, 2 * limit)
    with pytest.raises(StabilityError):
        march(grid, SourceSchedule(np.zeros(grid.shape)), 1.0, [], dt=2 * limit)

    assert step(grid, limit).time == pytest.approx(limit)


def test_stability_limit_closed_form():
    """Test `stability_limit` against ρC_sp/(4σ/dx² + h/l)/2 on equal gold cells."""
    from lib.thermal_sim import GOLD, stability_limit, uniform_grid

    dx = 1e-6
    closed = 0.5 * GOLD.heat_capacity / (4 * GOLD.sigma / dx**2)
    assert stability_limit(gold_square(n=8)) == pytest.approx(closed, rel=1e-12)

    finer = uniform_grid(16, 16, 8e-6, 8e-6, h_convection=0.0)
    assert stability_limit(finer) == pytest.approx(closed / 4, rel=1e-12)

    cooled = gold_square(h_convection=1e9, n=8)
    with_h = 0.5 * GOLD.heat_capacity / (4 * GOLD.sigma / dx**2 + 1e9 / 500e-9)
    assert stability_limit(cooled) == pytest.approx(with_h, rel=1e-12)
    assert stability_limit(cooled) < closed


def test_march_maximum_principle():
    """Test `march` without a source keeps every cell within the initial bounds."""
    from dataclasses import replace

    from lib.thermal_sim import SourceSchedule, march

    rng = np.random.default_rng(7)
    grid = gold_square(h_convection=1e7, n=8)
    grid = replace(grid, T=rng.uniform(20.0, 80.0, grid.shape))

    run = march(grid, SourceSchedule(np.zeros(grid.shape)), 0.2, [])

    assert run.final.T.min() >= grid.T.min() - 1e-9
    assert run.final.T.max() <= grid.T.max() + 1e-9
    assert np.ptp(run.final.T) < np.ptp(grid.T)


def test_cpw_mirror_symmetry():
    """Test the heated strip: the temperature field is symmetric about x = 0."""
    from lib.thermal_sim import SourceSchedule, cpw_grid, march, strip_source

    grid = cpw_grid(h_convection=1e7)
    np.testing.assert_allclose(grid.x_edges, -grid.x_edges[::-1], atol=1e-18)

    source = strip_source(grid, (-5e-6, 5e-6), (10e-6, 30e-6), 5e7, material=0)
    run = march(grid, SourceSchedule(source, duration_us=3.0), 1.0, [])

    assert run.final.T.max() > 26.5
    np.testing.assert_allclose(run.final.T, run.final.T[::-1, :], rtol=0, atol=1e-9)


def test_march_schedule_mismatch():
    """Test `march` refuses a source map of the wrong shape."""
    from lib.errors import SourceMapError
    from lib.thermal_sim import SourceSchedule, march

    with pytest.raises(SourceMapError):
        march(gold_square(n=4), SourceSchedule(np.zeros((3, 3))), 1.0, [])


def test_march_interrupted():
    """Test `march` stops with NumericalError once the stop event is set."""
    from threading import Event

    from lib.errors import NumericalError
    from lib.thermal_sim import SourceSchedule, march

    grid = gold_square(n=4)
    stop = Event()
    stop.set()

    with pytest.raises(NumericalError, match="interrupted"):
        march(grid, SourceSchedule(np.zeros(grid.shape)), 1.0, [(0, 0)], stop_event=stop)


def test_march_snapshots_and_sampling():
    """Test `march` recording interval and snapshot times."""
    from lib.thermal_sim import SourceSchedule, march

    grid = gold_square(n=4)
    run = march(
        grid,
        SourceSchedule(np.full(grid.shape, 1e7), duration_us=0.2, period_us=10.0),
        1.0,
        [(0, 0), (3, 3)],
        output_interval_us=0.1,
        snapshot_times_us=[0.5],
    )

    t = run.traces[0].t_us
    assert t[0] == 0.0
    assert t[-1] == pytest.approx(1.0)
    assert len(run.traces) == 2
    assert len(run.snapshots) == 1
    assert run.snapshots[0][0] == pytest.approx(0.5, abs=0.01)
    assert run.final.time == pytest.approx(1e-6)
    assert np.all(run.final.source == 0)


def test_interface_temperature():
    """Test `interface_temperature` inside the grid and on its edge."""
    from dataclasses import replace

    from lib.thermal_sim import interface_temperature, uniform_grid

    grid = uniform_grid(2, 1, 2e-6, 1e-6)
    grid = replace(grid, T=np.array([[20.0], [30.0]]))

    assert interface_temperature(grid, (0, 0), "+x") == pytest.approx(25.0)
    assert interface_temperature(grid, (0, 0), "-x") == 20.0
    assert interface_temperature(grid, (1, 0), "+y") == 30.0

    with pytest.raises(ValueError):
        interface_temperature(grid, (0, 0), "up")


def test_interface_temperature_gold_air():
    """Test `interface_temperature` on a thin gold cell beside a wide air cell."""
    from lib.thermal_sim import AIR, GOLD, ThermalGrid, interface_temperature

    grid = ThermalGrid(
        np.array([0.0, 1e-6, 11e-6]),
        np.array([0.0, 1e-6]),
        np.array([[0], [1]]),
        (GOLD, AIR),
        np.array([[100.0], [20.0]]),
    )
    expected = (310 * 100 + 0.026 * 20) / 310.026

    assert interface_temperature(grid, (0, 0), "+x") == pytest.approx(expected, rel=1e-12)
    assert interface_temperature(grid, (1, 0), "-x") == pytest.approx(expected, rel=1e-12)


def test_graded_edges():
    """Test `graded_edges` growth ratio and endpoints."""
    from lib.thermal_sim import graded_edges

    edges = graded_edges(1.0, 10.0, 4, 2.0)
    sizes = np.diff(edges)

    assert edges[0] == 1.0
    assert edges[-1] == 10.0
    np.testing.assert_allclose(sizes[1:] / sizes[:-1], 2.0)
    np.testing.assert_allclose(graded_edges(0.0, 1.0, 4, 1.0), np.linspace(0, 1, 5))


def test_cpw_grid():
    """Test `cpw_grid` layout: a gold strip in the middle of air cells."""
    from lib.thermal_sim import cpw_grid

    grid = cpw_grid(strip_cells=10, air_cells=8, ny=40)

    assert grid.shape == (26, 40)
    assert grid.x_edges[0] == pytest.approx(-30e-6)
    assert grid.x_edges[-1] == pytest.approx(30e-6)
    assert np.all(grid.material_index[8:18] == 0)
    assert np.all(grid.material_index[:8] == 1)
    assert np.all(grid.h_convection[:8] == 0.0)
    assert np.all(grid.h_convection[8:18] == 2e8)


def test_cpw_rise_time():
    """Test the heated strip: the centre rises within 0.1 to 1 μs toward source/h."""
    from lib.thermal_sim import SourceSchedule, cpw_grid, march, rise_time, strip_source

    grid = cpw_grid(h_convection=1e7)
    source = strip_source(grid, (-5e-6, 5e-6), (10e-6, 30e-6), 5e7, material=0)
    schedule = SourceSchedule(source, duration_us=3.0, period_us=10.0)

    run = march(grid, schedule, 3.0, [grid.cell_at(0.0, 20e-6)], output_interval_us=0.016)
    trace = run.traces[0]

    assert 0.1 <= rise_time(trace, end_us=3.0) <= 1.0
    assert 4.0 < trace.T.max() - 26.0 <= 5.0 + 1e-6


def test_cpw_grid_refinement():
    """Test the heated strip: halving the cell sizes changes the probe rise by < 2%."""
    from lib.thermal_sim import SourceSchedule, cpw_grid, march, strip_source

    def heated(refine: int) -> float:
        grid = cpw_grid(
            strip_cells=10 * refine,
            air_cells=8 * refine,
            ny=40 * refine,
            grading=1.3 ** (1 / refine),
            h_convection=1e7,
        )
        source = strip_source(grid, (-5e-6, 5e-6), (10e-6, 30e-6), 5e7, material=0)
        run = march(grid, SourceSchedule(source, duration_us=10.0), 5.0, [grid.cell_at(0.0, 20e-6)])
        return run.traces[0].T[-1] - 26.0

    coarse, fine = heated(1), heated(2)
    assert fine > 4.0
    assert abs(coarse - fine) / fine < 0.02


def test_rise_time():
    """Test `rise_time` on an exponential approach."""
    from lib.thermal_sim import ProbeTrace, rise_time

    t = np.linspace(0, 2.0, 2001)
    trace = ProbeTrace((0, 0), t, 26 + 5 * (1 - np.exp(-t / 0.124)))
    assert rise_time(trace) == pytest.approx(0.124 * log(9), rel=0.01)

    with pytest.raises(ValueError):
        rise_time(ProbeTrace((0, 0), t, np.full_like(t, 26.0)))


def test_strip_source_and_power():
    """Test `strip_source` selection and `total_power`."""
    from lib.thermal_sim import cpw_grid, strip_source, total_power

    grid = cpw_grid()
    everywhere = strip_source(grid, (-1, 1), (-1, 1), 1e7)
    on_gold = strip_source(grid, (-1, 1), (-1, 1), 1e7, material=0)

    assert total_power(grid, everywhere) == pytest.approx(1e7 * 60e-6 * 40e-6)
    assert total_power(grid, on_gold) == pytest.approx(1e7 * 10e-6 * 40e-6)


def test_source_map_io(tmp_path):
    """Test `save_source_map` and `load_source_map`, plain and compressed."""
    from lib.thermal_sim import load_source_map, save_source_map

    grid = gold_square(n=3)
    values = np.arange(9.0).reshape(3, 3) * 1e6

    for name in ("map.csv", "map.csv.gz"):
        path = save_source_map(str(tmp_path / name), grid, values)
        np.testing.assert_array_equal(load_source_map(path, grid), values)


def test_source_map_errors(tmp_path):
    """Test `load_source_map` on broken files and grid mismatches."""
    from lib.errors import SourceMapError
    from lib.thermal_sim import MAP_HEADER, load_source_map, save_source_map

    grid = gold_square(n=3)

    with pytest.raises(SourceMapError):
        load_source_map(str(tmp_path / "absent.csv"))

    negative = save_source_map(str(tmp_path / "neg.csv"), grid, -np.ones((3, 3)))
    with pytest.raises(SourceMapError, match="negative"):
        load_source_map(negative)

    path = save_source_map(str(tmp_path / "ok.csv"), grid, np.ones((3, 3)))
    with pytest.raises(SourceMapError):
        load_source_map(path, gold_square(n=4))

    malformed = tmp_path / "bad.csv"
    malformed.write_text(f"{MAP_HEADER}\n# nx = 1\n# ny = 2\n1.0,abc\n")
    with pytest.raises(SourceMapError, match="malformed"):
        load_source_map(str(malformed))

    short = tmp_path / "short.csv"
    short.write_text(f"{MAP_HEADER}\n# nx = 2\n# ny = 2\n1.0,2.0\n")
    with pytest.raises(SourceMapError):
        load_source_map(str(short))


def test_write_traces_csv(tmp_path):
    """Test `write_traces_csv` has one column per probe."""
    from lib.file import read_columns
    from lib.thermal_sim import ProbeTrace, write_traces_csv

    t = np.array([0.0, 1.0])
    traces = [ProbeTrace((1, 2), t, np.array([26.0, 27.0])), ProbeTrace((3, 4), t, t)]
    columns = read_columns(write_traces_csv(str(tmp_path / "traces.csv"), traces))

    assert list(columns) == ["t_us", "T_C_1_2", "T_C_3_4"]
    np.testing.assert_array_equal(columns["T_C_1_2"], [26.0, 27.0])

    with pytest.raises(ValueError, match="no probe traces"):
        write_traces_csv(str(tmp_path / "empty.csv"), [])
