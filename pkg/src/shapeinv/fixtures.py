"""Synthetic test shapes: small point sets and 28x28 digit-like images."""
from __future__ import annotations

import numpy as np

from .shape_model import Shape

IMAGE_SIZE = 28


def cross() -> Shape:
    """Four unit points on the axes: ``(+-1, 0), (0, +-1)``."""
    return Shape.from_points([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])


def rotation_2d(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


def random_points(rng, n: int, d: int, weighted: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Anisotropic random cloud; weights in ``[0.2, 1]`` when ``weighted``."""
    pts = rng.normal(size=(n, d)) * rng.uniform(0.5, 2.0, size=d) + rng.normal(size=d)
    w = rng.uniform(0.2, 1.0, size=n) if weighted else np.ones(n)
    return pts, w


def random_shape(rng, d: int, n_min: int = 5, n_max: int = 50) -> Shape:
    pts, w = random_points(rng, int(rng.integers(n_min, n_max + 1)), d)
    return Shape.from_points(pts, w)


def asymmetric_2d() -> Shape:
    """Fixed 7-point planar set with no rotational symmetry."""
    pts = np.array(
        [[0.0, 0.0], [2.0, 0.3], [1.1, 1.7], [-0.8, 2.4], [-1.9, -0.4], [0.6, -1.5], [3.1, -0.9]]
    )
    w = np.array([1.0, 0.8, 1.2, 0.5, 0.9, 1.1, 0.7])
    return Shape.from_points(pts, w)


def molecule_3d() -> tuple[list[str], np.ndarray]:
    """Small chiral-looking heavy-atom skeleton with hydrogens (coordinates in Angstrom)."""
    elements = ["C", "C", "O", "N", "C", "H", "H", "H", "Cl"]
    coords = np.array([
        [0.000, 0.000, 0.000],
        [1.520, 0.000, 0.000],
        [2.100, 1.150, 0.300],
        [-0.500, -1.300, 0.400],
        [-0.600, 1.100, -0.900],
        [-0.350, 0.300, 1.000],
        [2.000, -0.900, -0.300],
        [-1.700, 1.050, -0.950],
        [2.300, -0.200, -1.700],
    ])
    return elements, coords


def _gauss(xx, yy, cx, cy, sx, sy, theta=0.0):
    c, s = np.cos(theta), np.sin(theta)
    dx, dy = xx - cx, yy - cy
    u = c * dx + s * dy
    v = -s * dx + c * dy
    return np.exp(-0.5 * ((u / sx) ** 2 + (v / sy) ** 2))


def blob_image(kind: str = "blob", size: int = IMAGE_SIZE) -> np.ndarray:
    """Grayscale ``(rows, cols)`` image in ``[0, 1]``.

    ``kind`` is one of ``blob`` (two lobes), ``wide`` (one broad ellipse),
    ``ring`` and ``stroke`` (a thick "7").
    """
    rows, cols = np.mgrid[0:size, 0:size].astype(float)
    xx, yy = cols, rows
    if kind == "blob":
        img = _gauss(xx, yy, 12, 13, 3, 5, 0.4) + 0.6 * _gauss(xx, yy, 17, 9, 2.5, 2, 0.0)
    elif kind == "wide":
        img = _gauss(xx, yy, 14, 14, 6, 4, 0.3)
    elif kind == "ring":
        r = np.hypot(xx - 13.5, yy - 13.5)
        img = np.exp(-0.5 * ((r - 6.0) / 1.5) ** 2)
    elif kind == "stroke":
        top = _gauss(xx, yy, 14, 6, 6, 1.3)
        # diagonal from the top right down to the bottom middle
        t = np.clip(((xx - 20) * -0.45 + (yy - 6) * 1.0) / (0.45**2 + 1.0), 0.0, 17.0)
        px, py = 20 - 0.45 * t, 6 + t
        diag = np.exp(-0.5 * ((xx - px) ** 2 + (yy - py) ** 2) / 1.4**2)
        img = np.maximum(top, diag)
    else:
        raise ValueError(f"unknown blob kind {kind!r}")
    return img / img.max()


BLOB_KINDS = ("blob", "wide", "ring", "stroke")
