"""Render a calibration assessment as SVG plus JSON/CSV summaries.

The figure follows the conventional layout: dotted ideal diagonal,
dashed GLM calibration curve, solid flexible curve with a grey pointwise
95% band, and a histogram strip of the prediction distribution along the
bottom tenth of the plot area.  SVG generation is hand rolled so output
is byte-stable for golden-file comparison.
"""

import io
import json
from dataclasses import dataclass, field
from typing import Optional


from gencal.errors import DataError


@dataclass(frozen=True)
class PlotSpec:
    width: int = 520
    height: int = 520
    axis_limits: Optional[tuple] = None  # shared (lo, hi) for both axes
    x_label: str = "predicted value"
    y_label: str = "empirical average"
    title: str = ""
    hist_fraction: float = 0.10
    styles: dict = field(default_factory=lambda: {
        "diagonal": 'stroke="#000000" stroke-width="1" stroke-dasharray="1,3" fill="none"',
        "glm": 'stroke="#c03030" stroke-width="1.5" stroke-dasharray="6,4" fill="none"',
        "flexible": 'stroke="#1f4e9c" stroke-width="1.5" fill="none"',
        "band": 'fill="#bbbbbb" fill-opacity="0.45" stroke="none"',
        "binned": 'fill="#222222"',
        "histogram": 'fill="#888888"',
    })


def _fmt(v):
    return f"{v:.2f}"


def _auto_limits(assessment):
    vals = [0.0]
    if assessment.grid.size:
        vals += [float(assessment.grid.min()), float(assessment.grid.max())]
    if assessment.glm is not None:
        vals += [float(assessment.glm.curve.min()), float(assessment.glm.curve.max())]
    if assessment.flexible is not None:
        vals += [float(assessment.flexible.curve.min()), float(assessment.flexible.curve.max())]
    if assessment.binned is not None:
        vals += [float(assessment.binned.mean_predicted.min()),
                 float(assessment.binned.mean_predicted.max()),
                 float(assessment.binned.mean_observed.min()),
                 float(assessment.binned.mean_observed.max())]
    vals += [float(assessment.histogram.edges[0]), float(assessment.histogram.edges[-1])]
    lo, hi = min(vals), max(vals)
    if hi <= lo:
        hi = lo + 1.0
    pad = 0.04 * (hi - lo)
    return lo - pad if lo < 0 else max(0.0, lo - pad), hi + pad


def render_svg(assessment, spec=PlotSpec()):
    """Standalone SVG text for one assessment."""
    if assessment.binned is None and assessment.glm is None and assessment.flexible is None:
        raise DataError("assessment has no drawable components")
    lo, hi = spec.axis_limits if spec.axis_limits is not None else _auto_limits(assessment)
    margin_l, margin_r, margin_t, margin_b = 58, 16, 30, 46
    px_w = spec.width - margin_l - margin_r
    px_h = spec.height - margin_t - margin_b
    span = hi - lo

    def sx(v):
        return margin_l + (v - lo) / span * px_w

    def sy(v):
        return margin_t + px_h - (v - lo) / span * px_h

    def clampv(v):
        return min(max(v, lo), hi)

    def path(xs, ys):
        pts = [f"{sx(clampv(float(x))):.2f},{sy(clampv(float(y))):.2f}"
               for x, y in zip(xs, ys)]
        return "M " + " L ".join(pts)

    out = io.StringIO()
    out.write(f'<svg xmlns="http://www.w3.org/2000/svg" width="{spec.width}" '
              f'height="{spec.height}" viewBox="0 0 {spec.width} {spec.height}">\n')
    out.write('<rect width="100%" height="100%" fill="#ffffff"/>\n')
    if spec.title:
        out.write(f'<text x="{spec.width / 2:.1f}" y="18" text-anchor="middle" '
                  f'font-family="sans-serif" font-size="13">{spec.title}</text>\n')

    # axes box and tick labels
    out.write(f'<rect x="{margin_l}" y="{margin_t}" width="{px_w}" height="{px_h}" '
              f'fill="none" stroke="#333333" stroke-width="1"/>\n')
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        v = lo + frac * span
        out.write(f'<text x="{sx(v):.1f}" y="{margin_t + px_h + 16}" text-anchor="middle" '
                  f'font-family="sans-serif" font-size="10">{_fmt(v)}</text>\n')
        out.write(f'<text x="{margin_l - 6}" y="{sy(v) + 3:.1f}" text-anchor="end" '
                  f'font-family="sans-serif" font-size="10">{_fmt(v)}</text>\n')
    out.write(f'<text x="{margin_l + px_w / 2:.1f}" y="{spec.height - 10}" '
              f'text-anchor="middle" font-family="sans-serif" font-size="11">'
              f'{spec.x_label}</text>\n')
    out.write(f'<text x="14" y="{margin_t + px_h / 2:.1f}" text-anchor="middle" '
              f'font-family="sans-serif" font-size="11" '
              f'transform="rotate(-90 14 {margin_t + px_h / 2:.1f})">{spec.y_label}</text>\n')

    # confidence band polygon (clipped into the axis box)
    if assessment.flexible is not None:
        flex = assessment.flexible
        upper = [f"{sx(clampv(float(x))):.2f},{sy(clampv(float(u))):.2f}"
                 for x, u in zip(flex.grid, flex.upper)]
        lower = [f"{sx(clampv(float(x))):.2f},{sy(clampv(float(v))):.2f}"
                 for x, v in zip(flex.grid[::-1], flex.lower[::-1])]
        out.write(f'<polygon id="flex-band" points="{" ".join(upper + lower)}" '
                  f'{spec.styles["band"]}/>\n')

    # histogram strip along the bottom tenth of the plot area
    hist = assessment.histogram
    max_count = int(hist.counts.max()) if hist.counts.size else 0
    out.write('<g id="histogram">\n')
    if max_count > 0:
        strip = px_h * spec.hist_fraction
        for j in range(hist.counts.shape[0]):
            c = int(hist.counts[j])
            if c == 0:
                continue
            x0 = sx(clampv(float(hist.edges[j])))
            x1 = sx(clampv(float(hist.edges[j + 1])))
            h = strip * c / max_count
            out.write(f'<rect x="{x0:.2f}" y="{margin_t + px_h - h:.2f}" '
                      f'width="{max(x1 - x0, 0.0):.2f}" height="{h:.2f}" '
                      f'{spec.styles["histogram"]}/>\n')
    out.write('</g>\n')

    # ideal diagonal
    out.write(f'<path id="diagonal" d="M {sx(lo):.2f},{sy(lo):.2f} L {sx(hi):.2f},{sy(hi):.2f}" '
              f'{spec.styles["diagonal"]}/>\n')

    if assessment.glm is not None:
        out.write(f'<path id="glm-curve" d="{path(assessment.glm.grid, assessment.glm.curve)}" '
                  f'{spec.styles["glm"]}/>\n')
    if assessment.flexible is not None:
        out.write(f'<path id="flex-curve" '
                  f'd="{path(assessment.flexible.grid, assessment.flexible.curve)}" '
                  f'{spec.styles["flexible"]}/>\n')
    if assessment.binned is not None:
        out.write('<g id="binned-points">\n')
        for mx, my in zip(assessment.binned.mean_predicted, assessment.binned.mean_observed):
            out.write(f'<circle cx="{sx(clampv(float(mx))):.2f}" '
                      f'cy="{sy(clampv(float(my))):.2f}" r="2.5" {spec.styles["binned"]}/>\n')
        out.write('</g>\n')

    # slope / intercept annotation, 2-decimal
    notes = []
    if assessment.glm is not None:
        notes.append(f"slope = {assessment.glm.zeta:.2f}")
    if assessment.intercept is not None:
        notes.append(f"intercept = {assessment.intercept.alpha_c:.2f}")
    for i, note in enumerate(notes):
        out.write(f'<text id="note-{i}" x="{margin_l + 8}" y="{margin_t + 16 + 14 * i}" '
                  f'font-family="sans-serif" font-size="11">{note}</text>\n')
    out.write("</svg>\n")
    return out.getvalue()


def export_summary(assessment):
    """(json_text, csv_text) with full-precision numbers.

    The CSV carries the grid curves in the first five columns and the
    binned points to the right, padded with empty cells so the row count
    equals the grid length.
    """
    doc = {
        "n": assessment.n,
        "slope": None if assessment.glm is None else assessment.glm.zeta,
        "slope_se": None if assessment.glm is None else assessment.glm.zeta_se,
        "intercept_citl": None if assessment.intercept is None else assessment.intercept.alpha_c,
        "intercept_se": None if assessment.intercept is None else assessment.intercept.se,
        "alpha_unconstrained": None if assessment.glm is None else assessment.glm.alpha,
        "clamped_count": assessment.clamped_count,
        "nonpositive_slope": bool(assessment.glm.nonpositive_slope) if assessment.glm else None,
        "merged_bins": bool(assessment.binned.merged_bins) if assessment.binned else None,
        "errors": dict(sorted(assessment.errors.items())),
    }
    json_text = json.dumps(doc, indent=2) + "\n"

    def cell(v):
        return repr(float(v))

    header = "grid,glm_curve,flex,flex_lo,flex_hi,bin_mean_mu,bin_mean_y,bin_count"
    rows = []
    n_grid = assessment.grid.shape[0]
    n_bins = 0 if assessment.binned is None else assessment.binned.counts.shape[0]
    for i in range(max(n_grid, n_bins)):
        parts = []
        parts.append(cell(assessment.grid[i]) if i < n_grid else "")
        parts.append(cell(assessment.glm.curve[i])
                     if assessment.glm is not None and i < n_grid else "")
        if assessment.flexible is not None and i < n_grid:
            parts += [cell(assessment.flexible.curve[i]),
                      cell(assessment.flexible.lower[i]),
                      cell(assessment.flexible.upper[i])]
        else:
            parts += ["", "", ""]
        if assessment.binned is not None and i < n_bins:
            parts += [cell(assessment.binned.mean_predicted[i]),
                      cell(assessment.binned.mean_observed[i]),
                      str(int(assessment.binned.counts[i]))]
        else:
            parts += ["", "", ""]
        rows.append(",".join(parts))
    csv_text = header + "\n" + "\n".join(rows) + "\n"
    return json_text, csv_text
