"""Minimal deterministic SVG output for fitted-curve figures.

No plotting dependency: figures are plain SVG 1.1 text with a scatter of
the data, the fitted curve, and the coefficient-scaled component curves
that sum to it.  Pixel coordinates are written with enough digits that the
sum-of-components identity survives parsing the file back.

The root ``<svg>`` element carries ``data-*`` attributes describing the
axis limits and plot box, so readers can map pixel coordinates back to
data units.
"""

from xml.sax.saxutils import escape

WIDTH = 720
HEIGHT = 480
MARGIN = 54

PALETTE = ["#d62728", "#1f77b4", "#2ca02c", "#ff7f0e", "#9467bd",
           "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"]


class FigureLayout:
    """Affine map from data space to the SVG pixel box (y axis flipped)."""

    def __init__(self, x_min, x_max, y_min, y_max,
                 width=WIDTH, height=HEIGHT, margin=MARGIN):
        x_min, x_max = float(x_min), float(x_max)
        y_min, y_max = float(y_min), float(y_max)
        if x_max <= x_min:
            x_max = x_min + 1.0
        if y_max <= y_min:
            y_max = y_min + 1.0
        self.x_min, self.x_max = x_min, x_max
        self.y_min, self.y_max = y_min, y_max
        self.width, self.height, self.margin = width, height, margin
        self.box_w = width - 2 * margin
        self.box_h = height - 2 * margin

    def px(self, x):
        return self.margin + (x - self.x_min) / (self.x_max - self.x_min) * self.box_w

    def py(self, y):
        return self.margin + (self.y_max - y) / (self.y_max - self.y_min) * self.box_h

    def svg_attrs(self):
        return (f'data-x-min="{self.x_min!r}" data-x-max="{self.x_max!r}" '
                f'data-y-min="{self.y_min!r}" data-y-max="{self.y_max!r}" '
                f'data-margin="{self.margin}" data-box-w="{self.box_w}" '
                f'data-box-h="{self.box_h}"')


def _path(xs, ys, layout, color, klass, label, width="2"):
    pts = [f"{layout.px(float(x)):.10f},{layout.py(float(y)):.10f}"
           for x, y in zip(xs, ys)]
    d = "M" + " L".join(pts)
    return (f'<path class="{klass}" data-label="{escape(label)}" d="{d}" '
            f'fill="none" stroke="{color}" stroke-width="{width}"/>')


def render_fit_figure(data_x, data_y, grid_x, fitted, components, title=""):
    """Scatter + fitted curve + component curves as an SVG string.

    ``components`` is a list of ``(label, values)`` pairs evaluated on
    ``grid_x``; their values sum to ``fitted``.  The fitted curve gets class
    ``fitted-curve``, each component ``component-curve``, data points class
    ``data-point``.
    """
    all_y = list(data_y) + list(fitted)
    for _, vals in components:
        all_y.extend(vals)
    layout = FigureLayout(min(min(data_x), min(grid_x)), max(max(data_x), max(grid_x)),
                          min(all_y), max(all_y))
    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        f'width="{layout.width}" height="{layout.height}" '
        f'viewBox="0 0 {layout.width} {layout.height}" {layout.svg_attrs()}>',
        f'<rect width="{layout.width}" height="{layout.height}" fill="white"/>',
        f'<rect x="{layout.margin}" y="{layout.margin}" width="{layout.box_w}" '
        f'height="{layout.box_h}" fill="none" stroke="#444444" stroke-width="1"/>',
    ]
    if title:
        parts.append(f'<text x="{layout.width / 2:.1f}" y="{layout.margin / 2:.1f}" '
                     f'text-anchor="middle" font-family="sans-serif" '
                     f'font-size="15">{escape(title)}</text>')
    for i, (label, vals) in enumerate(components):
        color = PALETTE[i % len(PALETTE)]
        parts.append(_path(grid_x, vals, layout, color, "component-curve", label,
                           width="1.5"))
    parts.append(_path(grid_x, fitted, layout, "#000000", "fitted-curve", "fitted"))
    for x, y in zip(data_x, data_y):
        parts.append(f'<circle class="data-point" cx="{layout.px(float(x)):.10f}" '
                     f'cy="{layout.py(float(y)):.10f}" r="2.5" fill="#333333" '
                     f'fill-opacity="0.55"/>')
    parts.append("</svg>")
    return "\n".join(parts)


def parse_curves(svg_text):
    """Inverse of :func:`render_fit_figure` for the curve data.

    Returns ``(fitted, components)`` where each curve is ``(xs, ys)`` in
    data units; used to verify figure consistency without a renderer.
    """
    import re
    import xml.etree.ElementTree as ET

    root = ET.fromstring(svg_text)
    x_min = float(root.attrib["data-x-min"])
    x_max = float(root.attrib["data-x-max"])
    y_min = float(root.attrib["data-y-min"])
    y_max = float(root.attrib["data-y-max"])
    margin = float(root.attrib["data-margin"])
    box_w = float(root.attrib["data-box-w"])
    box_h = float(root.attrib["data-box-h"])

    def unmap(px, py):
        x = x_min + (px - margin) / box_w * (x_max - x_min)
        y = y_max - (py - margin) / box_h * (y_max - y_min)
        return x, y

    fitted = None
    components = []
    ns = "{http://www.w3.org/2000/svg}"
    for el in root.iter(f"{ns}path"):
        pairs = re.findall(r"(-?[\d.]+),(-?[\d.]+)", el.attrib["d"])
        xs, ys = [], []
        for sx, sy in pairs:
            x, y = unmap(float(sx), float(sy))
            xs.append(x)
            ys.append(y)
        curve = (xs, ys, el.attrib.get("data-label", ""))
        if el.attrib.get("class") == "fitted-curve":
            fitted = curve
        elif el.attrib.get("class") == "component-curve":
            components.append(curve)
    return fitted, components
