import xml.etree.ElementTree as ET

import pytest

from disccool.disc_field import make_grid
from disccool.flows import branching_flow, branching_plan, roll_flow, zero_flow
from disccool.render import COLORS, LEVELS, count_cells, render_streamlines, streamline_svg
from disccool.sources import parse_source

SVG = "{http://www.w3.org/2000/svg}"
FIGURE_SOURCES = ("constant", "gaussian_center", "gaussian_ring", "quadrupole")


def _paths(text):
    return ET.fromstring(text).findall(f"{SVG}path")


@pytest.mark.parametrize("name", FIGURE_SOURCES)
@pytest.mark.parametrize("n", [2, 3, 5])
def test_roll_cells(name, n):
    d = roll_flow(parse_source(name), n, grid=make_grid(32, 32))
    for radius in (0.3, 0.7, 1.0):
        assert count_cells(d, radius) == 2 * n


@pytest.mark.parametrize("name", FIGURE_SOURCES)
def test_branching_cells_double_across_rings(name):
    plan = branching_plan(1e4)
    d = branching_flow(parse_source(name), plan, make_grid(32, 480))
    counts = [count_cells(d, rk) for rk in plan.radii]
    assert counts == [2 * q for q in plan.frequencies]
    assert all(b == 2 * a for a, b in zip(counts, counts[1:]))


def test_roll_picture_levels_and_colors(tmp_path):
    d = roll_flow(parse_source("constant"), 2, grid=make_grid(64, 16))
    text = render_streamlines(d, tmp_path / "roll.svg").read_text()
    paths = _paths(text)
    levels = {float(p.get("data-level")) for p in paths}
    assert len(levels) == LEVELS
    for p in paths:
        level = float(p.get("data-level"))
        want = COLORS["clockwise"] if level > 0 else COLORS["counterclockwise"] if level < 0 else COLORS["separatrix"]
        assert p.get("stroke") == want


def test_picture_is_deterministic(tmp_path):
    plan = branching_plan(1e3)
    d = branching_flow(parse_source("quadrupole"), plan, make_grid(64, 256))
    a = render_streamlines(d, tmp_path / "a.svg").read_bytes()
    b = render_streamlines(branching_flow(parse_source("quadrupole"), plan, make_grid(64, 256)),
                           tmp_path / "b.svg").read_bytes()
    assert a == b


def test_zero_flow_gives_empty_valid_picture():
    text = streamline_svg(zero_flow(parse_source("constant"), make_grid(32, 8)))
    root = ET.fromstring(text)
    assert root.tag == f"{SVG}svg"
    assert _paths(text) == []
    assert count_cells(zero_flow(parse_source("constant"), make_grid(32, 8)), 0.5) == 0


def test_unwritable_path():
    d = roll_flow(parse_source("constant"), 2, grid=make_grid(32, 8))
    with pytest.raises(OSError):
        render_streamlines(d, "/nonexistent-dir/x.svg")


def test_cell_count_radius_validation():
    d = roll_flow(parse_source("constant"), 2, grid=make_grid(32, 8))
    with pytest.raises(ValueError):
        count_cells(d, 0.0)
