"""Minimal SVG output: set boundaries, kernel heatmaps and disk triples."""

from __future__ import annotations

import math
from pathlib import Path
from typing import Sequence

import numpy as np

from .geometry import Disk, SymmetricSet, boundary_polygon
from .kernels import KernelField, intersection_region

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e")


def _fmt(v: float) -> str:
    return f"{v:.6g}"


class Canvas:
    """World-coordinate canvas; y points up in the input and is flipped once."""

    def __init__(self, bounds: tuple[float, float, float, float], size: int = 480, pad: float = 0.05):
        x0, x1, y0, y1 = bounds
        w, h = x1 - x0, y1 - y0
        m = pad * max(w, h)
        self.x0, self.y1 = x0 - m, y1 + m
        self.w, self.h = w + 2 * m, h + 2 * m
        self.scale = size / max(self.w, self.h)
        self.size = (round(self.w * self.scale), round(self.h * self.scale))
        self.items: list[str] = []

    def pt(self, x: float, y: float) -> str:
        return f"{_fmt((x - self.x0) * self.scale)},{_fmt((self.y1 - y) * self.scale)}"

    def polygon(self, poly: np.ndarray, stroke: str, fill: str = "none", width: float = 1.5) -> None:
        pts = " ".join(self.pt(x, y) for x, y in poly)
        self.items.append(f'<polygon points="{pts}" fill="{fill}" stroke="{stroke}" stroke-width="{width}"/>')

    def circle(self, d: Disk, stroke: str, width: float = 1.5) -> None:
        cx, cy = self.pt(*d.center).split(",")
        r = _fmt(d.radius * self.scale)
        self.items.append(f'<circle cx="{cx}" cy="{cy}" r="{r}" fill="none" stroke="{stroke}" stroke-width="{width}"/>')

    def rect(self, x: float, y: float, w: float, h: float, fill: str) -> None:
        px, py = self.pt(x, y + h).split(",")
        self.items.append(
            f'<rect x="{px}" y="{py}" width="{_fmt(w * self.scale)}" height="{_fmt(h * self.scale)}" fill="{fill}"/>'
        )

    def path(self, d: str, fill: str, stroke: str = "none", opacity: float = 1.0) -> None:
        self.items.append(f'<path d="{d}" fill="{fill}" fill-opacity="{opacity}" stroke="{stroke}"/>')

    def text(self, x: float, y: float, s: str) -> None:
        px, py = self.pt(x, y).split(",")
        self.items.append(f'<text x="{px}" y="{py}" font-family="sans-serif" font-size="13">{s}</text>')

    def svg(self) -> str:
        w, h = self.size
        body = "\n".join(self.items)
        return (
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">\n'
            f'<rect width="{w}" height="{h}" fill="white"/>\n{body}\n</svg>\n'
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.svg())


def _union_bounds(boxes) -> tuple[float, float, float, float]:
    b = np.array(list(boxes))
    return float(b[:, 0].min()), float(b[:, 1].max()), float(b[:, 2].min()), float(b[:, 3].max())


def boundaries_svg(E: Sequence[SymmetricSet], path: str | Path, mode: str = "staircase") -> None:
    """Overlay of the boundaries of several symmetric sets."""
    canvas = Canvas(_union_bounds(s.bounds() for s in E))
    for k, s in enumerate(E):
        canvas.polygon(boundary_polygon(s, mode), PALETTE[k % len(PALETTE)])
    canvas.save(path)


def _heat(v: float) -> str:
    """White to dark blue."""
    v = min(max(v, 0.0), 1.0)
    r = round(255 * (1 - 0.85 * v))
    g = round(255 * (1 - 0.65 * v))
    return f"#{r:02x}{g:02x}ff" if v < 1 else "#264dff"


def heatmap_svg(field: KernelField, path: str | Path, contour: SymmetricSet | None = None, max_cells: int = 96) -> None:
    """Kernel values as block-averaged cells with an optional set boundary."""
    a1, a2 = field.extent
    canvas = Canvas((-a1, a1, -a2, a2))
    V = field.values
    b = max(1, math.ceil(max(V.shape) / max_cells))
    n1, n2 = V.shape[0] // b, V.shape[1] // b
    blocks = V[: n1 * b, : n2 * b].reshape(n1, b, n2, b).mean(axis=(1, 3))
    top = float(blocks.max()) or 1.0
    w = b * field.cell
    x0 = -V.shape[0] * field.cell / 2
    y0 = -V.shape[1] * field.cell / 2
    for i in range(n1):
        for j in range(n2):
            if blocks[i, j] > 0:
                canvas.rect(x0 + i * w, y0 + j * w, w, w, _heat(blocks[i, j] / top))
    if contour is not None:
        canvas.polygon(boundary_polygon(contour, "staircase"), "#d62728", width=2)
    canvas.save(path)


def disks_svg(disks: Sequence[Disk], path: str | Path, title: str = "") -> None:
    """Circles with their common intersection shaded."""
    boxes = [d.bounds() for d in disks]
    canvas = Canvas(_union_bounds(boxes))
    reg = intersection_region(disks)
    arcs = reg.ordered()
    if arcs:
        s = arcs[0].start
        cmds = [f"M {canvas.pt(*s)}"]
        for a in arcs:
            span = a.theta1 - a.theta0
            r = _fmt(a.radius * canvas.scale)
            if span >= 2 * math.pi - 1e-12:
                mid = a.point(a.theta0 + math.pi)
                cmds.append(f"A {r} {r} 0 0 0 {canvas.pt(*mid)}")
                span -= math.pi
            large = 1 if span > math.pi else 0
            # counter-clockwise in world coordinates is sweep 0 after the flip
            cmds.append(f"A {r} {r} 0 {large} 0 {canvas.pt(*a.end)}")
        canvas.path(" ".join(cmds) + " Z", "#9ecae1", opacity=0.8)
    for k, d in enumerate(disks):
        canvas.circle(d, PALETTE[k % len(PALETTE)])
    if title:
        x0, _, _, y1 = _union_bounds(boxes)
        canvas.text(x0, y1, title)
    canvas.save(path)


__all__ = ["Canvas", "boundaries_svg", "heatmap_svg", "disks_svg"]
