"""Bird's-eye SVG export of rollout trajectories over the stalk field.

Hand-assembled SVG text with fixed float formatting so a given input always
produces byte-identical output: green lines along plant rows, one color per
trajectory, a filled dot at each start and an x at each end.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .world import RobotState, StalkMap

PX_PER_M = 60.0
MARGIN_M = 0.5
ROW_COLOR = "#2e7d32"
PALETTE = (
    "#1f77b4",
    "#d62728",
    "#9467bd",
    "#ff7f0e",
    "#8c564b",
    "#e377c2",
    "#7f7f7f",
    "#bcbd22",
    "#17becf",
    "#111111",
)


@dataclass
class TrajectoryView:
    """Minimal adapter so demos and rollouts plot through one entry point."""

    states: Sequence[RobotState]


def _fmt(x: float) -> str:
    return f"{x:.2f}"


def export_birdseye(
    results: Sequence,
    stalks: StalkMap,
    out_path: str | Path,
    config_digest: str = "",
) -> None:
    """Write the scene; anything exposing .states (RobotState list) plots."""
    if not results:
        raise ValueError("no trajectories to plot")

    xs = [0.0, stalks.row_length]
    ys = [0.0, (stalks.spec.num_rows - 1) * stalks.spec.row_pitch]
    for r in results:
        for s in r.states:
            xs.append(s.pose.x)
            ys.append(s.pose.y)
    x0, x1 = min(xs) - MARGIN_M, max(xs) + MARGIN_M
    y0, y1 = min(ys) - MARGIN_M, max(ys) + MARGIN_M
    width = (x1 - x0) * PX_PER_M
    height = (y1 - y0) * PX_PER_M

    def px(x: float) -> str:
        return _fmt((x - x0) * PX_PER_M)

    def py(y: float) -> str:  # SVG y axis points down
        return _fmt((y1 - y) * PX_PER_M)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_fmt(width)}"'
        f' height="{_fmt(height)}" viewBox="0 0 {_fmt(width)} {_fmt(height)}">',
        f"<!-- config:{config_digest} -->",
        f'<rect width="{_fmt(width)}" height="{_fmt(height)}" fill="#ffffff"/>',
    ]
    for row in range(stalks.spec.num_rows):
        y = row * stalks.spec.row_pitch
        out.append(
            f'<line x1="{px(0.0)}" y1="{py(y)}" x2="{px(stalks.row_length)}" y2="{py(y)}"'
            f' stroke="{ROW_COLOR}" stroke-width="2.5"/>'
        )
    for i, r in enumerate(results):
        color = PALETTE[i % len(PALETTE)]
        pts = " ".join(f"{px(s.pose.x)},{py(s.pose.y)}" for s in r.states)
        out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="2"/>')
        start, end = r.states[0], r.states[-1]
        out.append(
            f'<circle cx="{px(start.pose.x)}" cy="{py(start.pose.y)}" r="4" fill="{color}"/>'
        )
        ex, ey, arm = (end.pose.x - x0) * PX_PER_M, (y1 - end.pose.y) * PX_PER_M, 4.0
        out.append(
            f'<path d="M {_fmt(ex - arm)} {_fmt(ey - arm)} L {_fmt(ex + arm)} {_fmt(ey + arm)}'
            f' M {_fmt(ex - arm)} {_fmt(ey + arm)} L {_fmt(ex + arm)} {_fmt(ey - arm)}"'
            f' stroke="{color}" stroke-width="2" fill="none"/>'
        )
    out.append("</svg>")
    Path(out_path).write_text("\n".join(out) + "\n", encoding="utf-8")
