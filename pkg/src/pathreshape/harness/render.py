"""Static SVG rendering of an environment and paths.

World y points up; the SVG is flipped so the picture matches a plot.
Numbers are written with fixed precision, so output is byte-stable.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from ..env import GridEnvironment
from ..errors import IoError

SCALE = 100.0  # pixels per workspace unit
MARGIN = 10.0


@dataclass(frozen=True)
class PathStyle:
    stroke: str = "#1f4e9c"
    width: float = 2.0
    dash: str | None = None
    markers: bool = False


INITIAL_STYLE = PathStyle(stroke="#7a7a7a", width=1.5, dash="6,4")
FINAL_STYLE = PathStyle(stroke="#c0392b", width=2.0)
PALETTE = ("#c0392b", "#1f4e9c", "#27864a", "#8e44ad", "#d68910", "#17a2b8")


def default_styles(k: int) -> list[PathStyle]:
    return [PathStyle(stroke=PALETTE[i % len(PALETTE)]) for i in range(k)]


def _f(v: float) -> str:
    s = f"{v:.2f}".rstrip("0").rstrip(".")
    return "0" if s == "-0" else s


def _occupied_runs(occ: np.ndarray):
    """Horizontal runs (row, col0, col1) of occupied cells; col1 exclusive."""
    for r in range(occ.shape[0]):
        row = np.r_[False, occ[r], False].astype(np.int8)
        d = np.diff(row)
        for a, b in zip(np.nonzero(d == 1)[0], np.nonzero(d == -1)[0]):
            yield r, int(a), int(b)


def svg_document(env: GridEnvironment, paths: Sequence = (), styles: Sequence[PathStyle] | None = None) -> str:
    ws = env.workspace
    W = ws.width * SCALE + 2 * MARGIN
    H = ws.height * SCALE + 2 * MARGIN

    def X(x):
        return _f(MARGIN + x * SCALE)

    def Y(y):
        return _f(MARGIN + (ws.height - y) * SCALE)

    styles = list(styles) if styles is not None else default_styles(len(paths))
    if len(styles) < len(paths):
        styles += default_styles(len(paths))[len(styles):]
    d = env.delta
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_f(W)}" height="{_f(H)}" '
        f'viewBox="0 0 {_f(W)} {_f(H)}">',
        '<g id="dilated" fill="#f3d9a4" stroke="none">',
    ]
    for r, c0, c1 in _occupied_runs(env.occupied):
        out.append(f'<rect x="{X(c0 * d)}" y="{Y((r + 1) * d)}" width="{_f((c1 - c0) * d * SCALE)}" '
                   f'height="{_f(d * SCALE)}"/>')
    out.append("</g>")
    out.append('<g id="obstacles" fill="#404040" stroke="none">')
    for ob in env.obstacles:
        cx, cy = ob.center
        if ob.kind == "rectangle":
            out.append(f'<rect x="{X(cx - ob.width / 2)}" y="{Y(cy + ob.height / 2)}" '
                       f'width="{_f(ob.width * SCALE)}" height="{_f(ob.height * SCALE)}"/>')
        else:
            out.append(f'<circle cx="{X(cx)}" cy="{Y(cy)}" r="{_f(ob.radius * SCALE)}"/>')
    out.append("</g>")
    out.append(f'<rect id="frame" x="{X(0)}" y="{Y(ws.height)}" width="{_f(ws.width * SCALE)}" '
               f'height="{_f(ws.height * SCALE)}" fill="none" stroke="#000000" stroke-width="1"/>')
    out.append('<g id="paths" fill="none">')
    for k, (p, st) in enumerate(zip(paths, styles)):
        p = np.asarray(p, dtype=float).reshape(-1, 2)
        pts = " ".join(f"{X(x)},{Y(y)}" for x, y in p)
        dash = f' stroke-dasharray="{st.dash}"' if st.dash else ""
        out.append(f'<polyline id="path{k}" points="{pts}" stroke="{st.stroke}" '
                   f'stroke-width="{_f(st.width)}"{dash}/>')
        if st.markers:
            for x, y in p:
                out.append(f'<circle cx="{X(x)}" cy="{Y(y)}" r="2" fill="{st.stroke}"/>')
    out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"


def render_svg(env: GridEnvironment, paths: Sequence = (), out=None,
               styles: Sequence[PathStyle] | None = None) -> str:
    """Write the SVG to ``out`` (if given) and return it."""
    doc = svg_document(env, paths, styles)
    if out is not None:
        try:
            Path(out).write_text(doc)
        except OSError as exc:
            raise IoError(f"cannot write {out}: {exc}") from exc
    return doc
