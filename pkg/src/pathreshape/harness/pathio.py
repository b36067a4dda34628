"""Path files: JSON array of [x, y] pairs or CSV with header ``index,x,y``."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from ..errors import InputError, IoError


def save_path_json(path, out) -> None:
    pts = [[float(x), float(y)] for x, y in np.asarray(path, dtype=float)]
    try:
        with open(out, "w") as fh:
            json.dump(pts, fh)
    except OSError as exc:
        raise IoError(f"cannot write {out}: {exc}") from exc


def save_path_csv(path, out) -> None:
    try:
        with open(out, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["index", "x", "y"])
            for k, (x, y) in enumerate(np.asarray(path, dtype=float)):
                w.writerow([k, repr(float(x)), repr(float(y))])
    except OSError as exc:
        raise IoError(f"cannot write {out}: {exc}") from exc


def save_path(path, out) -> None:
    if Path(out).suffix.lower() == ".csv":
        save_path_csv(path, out)
    else:
        save_path_json(path, out)


def _as_points(data, src) -> np.ndarray:
    try:
        arr = np.asarray(data, dtype=float)
    except (TypeError, ValueError) as exc:
        raise InputError(f"{src}: waypoints must be numeric [x, y] pairs") from exc
    if arr.ndim != 2 or arr.shape[1] != 2 or len(arr) == 0:
        raise InputError(f"{src}: expected a non-empty list of [x, y] pairs")
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{src}: waypoints must be finite")
    return arr


def load_path(src) -> np.ndarray:
    """Read a path file; JSON may also be a planner report with a ``waypoints`` key."""
    p = Path(src)
    try:
        text = p.read_text()
    except OSError as exc:
        raise IoError(f"cannot read {src}: {exc}") from exc
    if p.suffix.lower() == ".csv":
        rows = list(csv.reader(text.splitlines()))
        if not rows or [c.strip() for c in rows[0]] != ["index", "x", "y"]:
            raise InputError(f"{src}: CSV header must be index,x,y")
        body = [r for r in rows[1:] if r]
        try:
            idx = [int(r[0]) for r in body]
            pts = [[float(r[1]), float(r[2])] for r in body]
        except (ValueError, IndexError) as exc:
            raise InputError(f"{src}: malformed CSV row") from exc
        if idx != list(range(len(idx))):
            raise InputError(f"{src}: indices must run 0..n in order")
        return _as_points(pts, src)
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{src}: invalid JSON ({exc})") from exc
    if isinstance(data, dict):
        if "waypoints" not in data:
            raise InputError(f"{src}: JSON object has no 'waypoints'")
        data = data["waypoints"]
    return _as_points(data, src)
