"""SVG Gantt rendering of two-hand plans and demonstrations.

One lane per hand, one bar per action, bars colored by subtask group.
SVG keeps the output diff-friendly for golden-file comparisons; the
px-per-second scale is declared on the root element.
"""
from __future__ import annotations

import xml.etree.ElementTree as ET
from typing import Dict, Optional, Sequence, Tuple

from .model import Action

PALETTE = ("#4e79a7", "#f28e2b", "#59a14f", "#e15759", "#b07aa1",
           "#76b7b2", "#edc948", "#9c755f")

_LANE_HEIGHT = 34
_BAR_HEIGHT = 22
_MARGIN_LEFT = 60
_MARGIN_TOP = 24
_AXIS_HEIGHT = 26


def render_svg(plan, px_per_second: float = 40.0,
               subtask_of: Optional[Dict[Action, int]] = None,
               title: str = "") -> str:
    """Render a plan or demonstration (anything with .left/.right) to SVG."""
    items = list(plan.left) + list(plan.right)
    if not items:
        raise ValueError("nothing to render")
    t_min = min(a.start for a in items)
    t_max = max(a.end for a in items)
    width = _MARGIN_LEFT + (t_max - t_min) * px_per_second + 20
    height = _MARGIN_TOP + 2 * _LANE_HEIGHT + _AXIS_HEIGHT

    svg = ET.Element("svg", {
        "xmlns": "http://www.w3.org/2000/svg",
        "width": f"{width:.1f}",
        "height": f"{height}",
        "data-px-per-second": repr(px_per_second),
        "data-t0": repr(float(t_min)),
        "font-family": "sans-serif",
        "font-size": "11",
    })
    if title:
        ET.SubElement(svg, "text", {"x": str(_MARGIN_LEFT), "y": "14"}).text = title

    def x_of(t: float) -> float:
        return _MARGIN_LEFT + (t - t_min) * px_per_second

    for lane, (name, seq) in enumerate((("L", plan.left), ("R", plan.right))):
        y0 = _MARGIN_TOP + lane * _LANE_HEIGHT
        label = ET.SubElement(svg, "text", {
            "x": "8", "y": f"{y0 + _LANE_HEIGHT / 2 + 4:.1f}", "class": "lane-label"})
        label.text = name
        for a in seq:
            group = subtask_of.get(a.action, 0) if subtask_of else 0
            color = PALETTE[group % len(PALETTE)]
            ET.SubElement(svg, "rect", {
                "x": f"{x_of(a.start):.3f}",
                "y": f"{y0 + (_LANE_HEIGHT - _BAR_HEIGHT) / 2:.1f}",
                "width": f"{(a.end - a.start) * px_per_second:.3f}",
                "height": str(_BAR_HEIGHT),
                "fill": color,
                "class": f"action subtask-{group}",
                "data-verb": a.action.verb,
                "data-object": a.action.object,
                "data-start": repr(a.start),
                "data-end": repr(a.end),
            })
            text = ET.SubElement(svg, "text", {
                "x": f"{x_of(a.start) + 3:.3f}",
                "y": f"{y0 + _LANE_HEIGHT / 2 + 4:.1f}",
                "fill": "#ffffff",
            })
            text.text = str(a.action)

    axis_y = _MARGIN_TOP + 2 * _LANE_HEIGHT + 14
    ET.SubElement(svg, "line", {
        "x1": str(_MARGIN_LEFT), "y1": str(axis_y - 10),
        "x2": f"{x_of(t_max):.3f}", "y2": str(axis_y - 10),
        "stroke": "#444444", "stroke-width": "1",
    })
    tick = int(t_min)
    while tick <= t_max + 1e-9:
        if tick >= t_min:
            x = x_of(tick)
            ET.SubElement(svg, "line", {
                "x1": f"{x:.3f}", "y1": str(axis_y - 13),
                "x2": f"{x:.3f}", "y2": str(axis_y - 7),
                "stroke": "#444444", "stroke-width": "1",
            })
            lbl = ET.SubElement(svg, "text", {"x": f"{x - 4:.3f}", "y": str(axis_y + 2)})
            lbl.text = f"{tick:d}"
        tick += 1
    return ET.tostring(svg, encoding="unicode") + "\n"
