"""Streamline pictures and azimuthal cell counts of flow designs."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from skimage.measure import find_contours

from .flows import FlowDesign

__all__ = ["render_streamlines", "streamline_svg", "count_cells", "LEVELS", "COLORS"]

LEVELS = 15
# psi > 0 turns clockwise, psi < 0 counterclockwise (u = z x grad psi).
COLORS = {"clockwise": "#2b59c3", "counterclockwise": "#7b2d8e", "separatrix": "#9a9a9a"}
MAX_RADIAL = 400
MAX_ANGULAR = 4096
_SIZE = 640


def _max_frequency(design: FlowDesign) -> int:
    return max(design.frequencies)


def _render_grid(design: FlowDesign) -> tuple[np.ndarray, np.ndarray]:
    grid = design.grid
    nr = min(grid.nr, MAX_RADIAL)
    s = np.arange(1, nr + 1) / nr
    r = 1.0 - (1.0 - s) ** grid.stretch
    nt = int(min(MAX_ANGULAR, max(256, 16 * _max_frequency(design))))
    theta = 2 * np.pi * np.arange(nt) / nt
    return r, theta


def _psi_samples(design: FlowDesign, r: np.ndarray, theta: np.ndarray) -> np.ndarray:
    psi = design.evaluate(r, theta)["psi"] * design.scale
    return np.broadcast_to(psi, (len(r), len(theta)))


def _path(points: np.ndarray) -> str:
    head = "M%.5f %.5f" % tuple(points[0])
    return head + "".join("L%.5f %.5f" % (x, y) for x, y in points[1:])


def streamline_svg(design: FlowDesign) -> str:
    """SVG text with ``LEVELS`` equally spaced iso-lines of the streamfunction."""
    r_pos, theta = _render_grid(design)
    psi = _psi_samples(design, r_pos, theta)
    r = np.concatenate(([0.0], r_pos))
    z = np.vstack([np.zeros((1, len(theta))), psi])
    z = np.hstack([z, z[:, :1]])
    dtheta = 2 * np.pi / len(theta)
    peak = float(np.max(np.abs(z)))
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_SIZE}" height="{_SIZE}" viewBox="-1.05 -1.05 2.1 2.1">',
        '<circle cx="0" cy="0" r="1" fill="none" stroke="#000000" stroke-width="0.006"/>',
    ]
    if peak > 0:
        levels = peak * np.linspace(-1.0, 1.0, LEVELS + 2)[1:-1]
        for level in levels:
            if level == 0 or abs(level) < 1e-14 * peak:
                # Exclude the pole and wall rows, where psi vanishes identically.
                contours = [c + [1.0, 0.0] for c in find_contours(z[1:-1], 0.0)]
                color, width = COLORS["separatrix"], 0.002
            else:
                contours = find_contours(z, float(level))
                color = COLORS["clockwise"] if level > 0 else COLORS["counterclockwise"]
                width = 0.003
            paths = []
            for c in contours:
                if len(c) < 2:
                    continue
                rr = np.interp(c[:, 0], np.arange(len(r)), r)
                tt = c[:, 1] * dtheta
                pts = np.column_stack([rr * np.cos(tt), -rr * np.sin(tt)])
                paths.append(_path(pts))
            if paths:
                parts.append(
                    f'<path d="{" ".join(paths)}" fill="none" stroke="{color}" stroke-width="{width}" '
                    f'data-level="{level:.6e}"/>'
                )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def render_streamlines(design: FlowDesign, path) -> Path:
    """Write :func:`streamline_svg` to ``path``; the bytes depend only on the design."""
    path = Path(path)
    path.write_text(streamline_svg(design))
    return path


def count_cells(design: FlowDesign, radius: float, samples: int | None = None, rel_tol: float = 1e-9) -> int:
    """Sign changes of the streamfunction around the circle of given radius.

    Values below ``rel_tol`` times the circle maximum are ignored, so touching
    zeros of the source do not count.
    """
    if not 0 < radius <= 1:
        raise ValueError("radius must lie in (0, 1]")
    n = samples or max(1024, 32 * _max_frequency(design))
    theta = 2 * np.pi * (np.arange(n) + 0.5) / n
    psi = np.asarray(design.evaluate(np.array([float(radius)]), theta)["psi"]).ravel()
    psi = np.broadcast_to(psi, theta.shape)
    peak = np.max(np.abs(psi))
    if peak == 0:
        return 0
    signs = np.sign(psi[np.abs(psi) > rel_tol * peak])
    return int(np.count_nonzero(signs != np.roll(signs, 1)))
