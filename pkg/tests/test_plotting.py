"""Bird's-eye SVG export: structure, orientation, and byte stability."""

import xml.etree.ElementTree as ET
from pathlib import Path

import pytest

from rowturn.plotting import PALETTE, TrajectoryView, export_birdseye
from rowturn.world import Pose, RobotState

GOLDEN = Path(__file__).parent / "data" / "golden_birdseye.svg"
SVG_NS = "{http://www.w3.org/2000/svg}"


def _traj(points):
    return TrajectoryView([RobotState(Pose(x, y, 0.0)) for x, y in points])


@pytest.fixture()
def two_trajectories():
    return [
        _traj([(0.5, 0.4), (1.5, 0.4), (2.5, 1.1)]),
        _traj([(0.5, 1.1), (3.0, 1.1)]),
    ]


def test_svg_structure_one_polyline_and_markers_per_trajectory(
    tmp_path, small_stalks, two_trajectories
):
    out = tmp_path / "scene.svg"
    export_birdseye(two_trajectories, small_stalks, out)
    root = ET.parse(out).getroot()
    polylines = root.findall(f"{SVG_NS}polyline")
    circles = root.findall(f"{SVG_NS}circle")
    crosses = root.findall(f"{SVG_NS}path")
    rows = root.findall(f"{SVG_NS}line")
    assert len(polylines) == 2
    assert len(circles) == 2  # one start dot each
    assert len(crosses) == 2  # one end marker each
    assert len(rows) == small_stalks.spec.num_rows
    # trajectories get distinct palette colors in order
    assert [p.get("stroke") for p in polylines] == [PALETTE[0], PALETTE[1]]


def test_svg_y_axis_points_down(tmp_path, small_stalks, two_trajectories):
    out = tmp_path / "scene.svg"
    export_birdseye(two_trajectories, small_stalks, out)
    root = ET.parse(out).getroot()
    circles = root.findall(f"{SVG_NS}circle")
    # both starts share x=0.5; the second trajectory starts at larger world y,
    # which must map to a smaller pixel y
    cy = [float(c.get("cy")) for c in circles]
    assert cy[1] < cy[0]


def test_svg_polyline_points_match_scaled_states(tmp_path, small_stalks):
    out = tmp_path / "scene.svg"
    export_birdseye([_traj([(0.0, 0.0), (1.0, 0.0)])], small_stalks, out)
    root = ET.parse(out).getroot()
    pts = root.find(f"{SVG_NS}polyline").get("points").split()
    x0, y0 = map(float, pts[0].split(","))
    x1, y1 = map(float, pts[1].split(","))
    assert x1 - x0 == pytest.approx(60.0)  # 1 m at 60 px/m
    assert y0 == y1


def test_svg_embeds_config_digest(tmp_path, small_stalks, two_trajectories):
    out = tmp_path / "scene.svg"
    export_birdseye(two_trajectories, small_stalks, out, config_digest="abc123")
    assert "<!-- config:abc123 -->" in out.read_text()


def test_svg_rejects_empty_input(tmp_path, small_stalks):
    with pytest.raises(ValueError, match="no trajectories"):
        export_birdseye([], small_stalks, tmp_path / "x.svg")


def test_svg_bytes_match_golden_file(tmp_path, small_stalks, two_trajectories):
    """Formatting is pinned: the same scene must serialize byte-identically
    across runs and platforms (fixed float formatting, no dict ordering)."""
    out = tmp_path / "scene.svg"
    export_birdseye(two_trajectories, small_stalks, out, config_digest="golden")
    assert out.read_bytes() == GOLDEN.read_bytes()
