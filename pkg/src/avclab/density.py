"""Head annotations to density maps and back to counts.

Each head deposits a 15x15 Gaussian stamp (sigma 2.0 by default) centered
at its rounded pixel. Stamps clipped by the image border are renormalized
per head, so the map total equals the head count exactly.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import AnnotationError

KERNEL_SIZE = 15
KERNEL_SIGMA = 2.0
_HALF = KERNEL_SIZE // 2


@dataclass
class HeadAnnotations:
    """Head positions as (x, y) pixel coordinates on a (W, H) image."""

    points: np.ndarray  # (N, 2) float, columns x, y
    image_dims: tuple[int, int]  # (W, H)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64).reshape(-1, 2)
        object.__setattr__(self, "points", pts)

    @property
    def count(self) -> int:
        return self.points.shape[0]


def read_annotations(path, image_dims) -> HeadAnnotations:
    points = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [c.strip() for c in header[:2]] != ["x", "y"]:
            raise AnnotationError(f"{path}: expected 'x,y' header, got {header}")
        for row in reader:
            if not row:
                continue
            points.append((float(row[0]), float(row[1])))
    pts = np.array(points, dtype=np.float64).reshape(-1, 2)
    return HeadAnnotations(points=pts, image_dims=tuple(image_dims))


def write_annotations(path, ann: HeadAnnotations):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["x", "y"])
        for x, y in ann.points:
            writer.writerow([f"{x:.3f}", f"{y:.3f}"])


def _gaussian_stamp(sigma: float) -> np.ndarray:
    offsets = np.arange(-_HALF, _HALF + 1, dtype=np.float64)
    d2 = offsets[:, None] ** 2 + offsets[None, :] ** 2
    return np.exp(-d2 / (2.0 * sigma * sigma))


def density_from_heads(ann: HeadAnnotations, sigma: float = KERNEL_SIGMA) -> np.ndarray:
    """(H, W) float64 map summing exactly to the number of heads."""
    w, h = ann.image_dims
    density = np.zeros((h, w), dtype=np.float64)
    stamp = _gaussian_stamp(sigma)
    for idx, (x, y) in enumerate(ann.points):
        if not (0.0 <= x < w and 0.0 <= y < h):
            raise AnnotationError(
                f"head {idx} at ({x}, {y}) outside image bounds {w}x{h}")
        cx = min(int(np.floor(x + 0.5)), w - 1)
        cy = min(int(np.floor(y + 0.5)), h - 1)
        top, bottom = max(0, cy - _HALF), min(h, cy + _HALF + 1)
        left, right = max(0, cx - _HALF), min(w, cx + _HALF + 1)
        piece = stamp[top - cy + _HALF: bottom - cy + _HALF,
                      left - cx + _HALF: right - cx + _HALF]
        density[top:bottom, left:right] += piece / piece.sum()
    return density


def count_from_density(density: np.ndarray) -> float:
    return float(np.asarray(density).sum())
