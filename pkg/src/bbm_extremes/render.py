"""
SVG rendering of simulated trees.

The left panel draws every particle's trajectory in the plane of the first
two coordinates (time against position when d = 1), one polyline per
particle. The right panel draws each particle's modulus against time.
"""

import logging
import xml.etree.ElementTree as ET
from pathlib import Path
from typing import Tuple

import numpy as np
from matplotlib import colormaps, colors

from .branching_sim import ParticleTree

logger = logging.getLogger(__name__)

SVG_NS = "http://www.w3.org/2000/svg"
PANEL_GAP = 40.0
MARGIN = 20.0


def _scaler(lo: float, hi: float, start: float, length: float, flip: bool = False):
    span = hi - lo if hi > lo else 1.0

    def scale(v: np.ndarray) -> np.ndarray:
        frac = (np.asarray(v) - lo) / span
        return start + length * ((1.0 - frac) if flip else frac)

    return scale


def _points(xs: np.ndarray, ys: np.ndarray) -> str:
    return " ".join(f"{x:.2f},{y:.2f}" for x, y in zip(xs, ys))


def _plane(tree: ParticleTree) -> Tuple[list, list]:
    """Horizontal and vertical coordinates of each trajectory in the left panel."""
    xs, ys = [], []
    for p in tree.particles:
        values = p.trajectory.values
        if tree.params.d == 1:
            xs.append(p.trajectory.times)
            ys.append(values[:, 0])
        else:
            xs.append(values[:, 0])
            ys.append(values[:, 1])
    return xs, ys


def render_tree_svg(
    tree: ParticleTree,
    width: float = 1000.0,
    height: float = 480.0,
    colormap: str = "viridis",
    stroke_width: float = 0.6,
) -> ET.Element:
    """
    Build the SVG element of a tree. Colors follow birth time.

    Returns:
        The <svg> root element
    """
    ET.register_namespace("", SVG_NS)
    svg = ET.Element(
        f"{{{SVG_NS}}}svg",
        {
            "width": f"{width:g}",
            "height": f"{height:g}",
            "viewBox": f"0 0 {width:g} {height:g}",
        },
    )
    ET.SubElement(svg, f"{{{SVG_NS}}}rect", {"width": "100%", "height": "100%", "fill": "white"})
    panel_w = (width - 2 * MARGIN - PANEL_GAP) / 2
    panel_h = height - 2 * MARGIN
    cmap = colormaps[colormap]
    horizon = tree.horizon if tree.horizon > 0 else 1.0

    def color(birth: float) -> str:
        return colors.to_hex(cmap(min(birth / horizon, 1.0)))

    xs, ys = _plane(tree)
    all_x, all_y = np.concatenate(xs), np.concatenate(ys)
    # equal scaling on both axes of the spatial panel
    if tree.params.d == 1:
        sx = _scaler(0.0, horizon, MARGIN, panel_w)
        sy = _scaler(all_y.min(), all_y.max(), MARGIN, panel_h, flip=True)
    else:
        half = max(np.ptp(all_x), np.ptp(all_y), 1e-9) / 2
        cx, cy = (all_x.max() + all_x.min()) / 2, (all_y.max() + all_y.min()) / 2
        sx = _scaler(cx - half, cx + half, MARGIN, panel_w)
        sy = _scaler(cy - half, cy + half, MARGIN, panel_h, flip=True)
    left = ET.SubElement(svg, f"{{{SVG_NS}}}g", {"id": "trajectories", "fill": "none"})
    for p, x, y in zip(tree.particles, xs, ys):
        ET.SubElement(
            left,
            f"{{{SVG_NS}}}polyline",
            {
                "points": _points(sx(x), sy(y)),
                "stroke": color(p.birth_time),
                "stroke-width": f"{stroke_width:g}",
                "data-id": str(p.id),
            },
        )

    radii = [p.trajectory.radial().values for p in tree.particles]
    r_max = max(float(np.max(r)) for r in radii)
    origin_x = MARGIN + panel_w + PANEL_GAP
    st = _scaler(0.0, horizon, origin_x, panel_w)
    sr = _scaler(0.0, r_max if r_max > 0 else 1.0, MARGIN, panel_h, flip=True)
    right = ET.SubElement(svg, f"{{{SVG_NS}}}g", {"id": "modulus", "fill": "none"})
    for p, r in zip(tree.particles, radii):
        px, py = st(p.trajectory.times), sr(r)
        d = "M " + " L ".join(f"{a:.2f} {b:.2f}" for a, b in zip(px, py))
        ET.SubElement(
            right,
            f"{{{SVG_NS}}}path",
            {"d": d, "stroke": color(p.birth_time), "stroke-width": f"{stroke_width:g}"},
        )
    logger.debug(f"Rendered {len(tree.particles)} trajectories")
    return svg


def write_svg(tree: ParticleTree, path: str | Path, **kwargs) -> Path:
    """Render a tree and write it as an SVG file."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    ET.ElementTree(render_tree_svg(tree, **kwargs)).write(path, encoding="utf-8", xml_declaration=True)
    logger.info(f"Wrote {path} ({len(tree.particles)} particles)")
    return path
