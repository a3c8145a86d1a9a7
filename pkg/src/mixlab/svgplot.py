"""Minimal deterministic SVG output: training curves, heatmaps, scatter overlays."""

from __future__ import annotations

import xml.etree.ElementTree as ET

import numpy as np

__all__ = ["svg_curves", "svg_decision_grid"]

_PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2"]
_CLASS_FILL = ["#ffffff", "#aec7e8", "#ff9896", "#98df8a", "#c5b0d5", "#ffbb78"]


def _fmt(v: float) -> str:
    return f"{v:.6g}"


def _canvas(width, height):
    return ET.Element(
        "svg",
        {
            "xmlns": "http://www.w3.org/2000/svg",
            "width": str(width),
            "height": str(height),
            "viewBox": f"0 0 {width} {height}",
        },
    )


def _write(root, path):
    ET.ElementTree(root).write(path, encoding="unicode", xml_declaration=True)


def svg_curves(path, series, title="", xlabel="", ylabel="", width=640, height=420):
    """series: iterable of (label, xs, ys).  Axes are linear with 5 ticks."""
    margin = 56
    root = _canvas(width, height)
    pw, ph = width - 2 * margin, height - 2 * margin
    all_x = np.concatenate([np.asarray(s[1], float) for s in series])
    all_y = np.concatenate([np.asarray(s[2], float) for s in series])
    x0, x1 = float(all_x.min()), float(all_x.max())
    y0, y1 = float(all_y.min()), float(all_y.max())
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y1 = y0 + 1.0

    def sx(v):
        return margin + (v - x0) / (x1 - x0) * pw

    def sy(v):
        return height - margin - (v - y0) / (y1 - y0) * ph

    ET.SubElement(
        root,
        "rect",
        {"x": str(margin), "y": str(margin), "width": str(pw), "height": str(ph),
         "fill": "none", "stroke": "#333333"},
    )
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        xv = x0 + frac * (x1 - x0)
        yv = y0 + frac * (y1 - y0)
        ET.SubElement(root, "text", {
            "x": _fmt(sx(xv)), "y": str(height - margin + 16),
            "font-size": "10", "text-anchor": "middle"}).text = _fmt(xv)
        ET.SubElement(root, "text", {
            "x": str(margin - 6), "y": _fmt(sy(yv) + 3),
            "font-size": "10", "text-anchor": "end"}).text = _fmt(yv)
    for n, (label, xs, ys) in enumerate(series):
        pts = " ".join(f"{_fmt(sx(float(a)))},{_fmt(sy(float(b)))}" for a, b in zip(xs, ys))
        ET.SubElement(root, "polyline", {
            "points": pts, "fill": "none",
            "stroke": _PALETTE[n % len(_PALETTE)], "stroke-width": "1.5"})
        ET.SubElement(root, "text", {
            "x": str(margin + 8), "y": str(margin + 14 + 13 * n),
            "font-size": "11", "fill": _PALETTE[n % len(_PALETTE)]}).text = str(label)
    if title:
        ET.SubElement(root, "text", {
            "x": str(width // 2), "y": "20", "font-size": "13",
            "text-anchor": "middle"}).text = title
    if xlabel:
        ET.SubElement(root, "text", {
            "x": str(width // 2), "y": str(height - 8), "font-size": "11",
            "text-anchor": "middle"}).text = xlabel
    if ylabel:
        ET.SubElement(root, "text", {
            "x": "14", "y": str(height // 2), "font-size": "11",
            "text-anchor": "middle",
            "transform": f"rotate(-90 14 {height // 2})"}).text = ylabel
    _write(root, path)


def svg_decision_grid(path, grid, labels, points=None, point_labels=None,
                      title="", width=560, height=560):
    """Raster of per-cell class labels (0 = undefined) with optional data overlay.

    ``grid`` is an oracle GridSpec; cell (iy, ix) is drawn at its coordinates
    so the numeric content matches the CSV raster exactly.
    """
    margin = 40
    root = _canvas(width, height)
    pw, ph = width - 2 * margin, height - 2 * margin
    xs, ys = grid.xs(), grid.ys()
    cw = pw / len(xs)
    ch = ph / len(ys)

    def sx(v):
        return margin + (v - grid.xmin) / (grid.xmax - grid.xmin) * pw

    def sy(v):
        return height - margin - (v - grid.ymin) / (grid.ymax - grid.ymin) * ph

    cells = ET.SubElement(root, "g", {"stroke": "none"})
    for iy, yv in enumerate(ys):
        for ix, xv in enumerate(xs):
            lab = int(labels[iy, ix])
            if lab == 0:
                continue
            ET.SubElement(cells, "rect", {
                "x": _fmt(sx(float(xv)) - cw / 2), "y": _fmt(sy(float(yv)) - ch / 2),
                "width": _fmt(cw), "height": _fmt(ch),
                "fill": _CLASS_FILL[lab % len(_CLASS_FILL)]})
    if points is not None:
        dots = ET.SubElement(root, "g", {"stroke": "#222222", "stroke-width": "0.5"})
        for pt, lab in zip(points, point_labels):
            ET.SubElement(dots, "circle", {
                "cx": _fmt(sx(float(pt[0]))), "cy": _fmt(sy(float(pt[1]))),
                "r": "3", "fill": _PALETTE[(int(lab) - 1) % len(_PALETTE)]})
    ET.SubElement(root, "rect", {
        "x": str(margin), "y": str(margin), "width": _fmt(pw), "height": _fmt(ph),
        "fill": "none", "stroke": "#333333"})
    if title:
        ET.SubElement(root, "text", {
            "x": str(width // 2), "y": "24", "font-size": "13",
            "text-anchor": "middle"}).text = title
    _write(root, path)
