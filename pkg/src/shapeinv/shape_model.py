"""Shapes as normalized measures, and their central moment tensors.

A :class:`Shape` is a weighted point set in ``R^d`` whose weights sum to one,
so that ``E[f] = sum_i w_i f(x_i)``.  Grid densities (images, voxel volumes)
are stored as the equivalent point set of cell centers with weight
``value * cell_volume``; the grid geometry is kept alongside so a shape can be
re-rendered on its own lattice.

Moments are computed only on shapes flagged as centered; :func:`center`
sets that flag.  Pass ``auto_center=True`` to the moment functions to center
on the fly instead.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Iterator

import numpy as np

from .symtensor import SymTensor, multi_indices


class DegenerateShapeError(ValueError):
    """Raised when a shape has no spread (zero covariance trace) or no mass."""


@dataclass(frozen=True)
class Grid:
    """Regular lattice; cell ``i`` along axis ``k`` sits at ``origin[k] + i * spacing[k]``."""

    origin: np.ndarray
    spacing: np.ndarray
    shape: tuple[int, ...]

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    def cell_centers(self) -> np.ndarray:
        axes = [o + s * np.arange(n) for o, s, n in zip(self.origin, self.spacing, self.shape)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.reshape(-1) for m in mesh], axis=1)

    def transformed(self, shift, divisor: float) -> "Grid":
        return Grid((self.origin - shift) / divisor, self.spacing / divisor, self.shape)


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Shape:
    """Weighted point set defining the expectation operator.

    Attributes
    ----------
    points : (n, d) array
    weights : (n,) array, nonnegative, summing to 1
    total_weight : float
        Sum of the raw weights before normalization.
    grid : Grid or None
        Set when the shape came from a lattice density; ``points`` are then
        the cell centers in C order of ``grid.shape``.
    centered, scale_normalized, scale : provenance flags set by
        :func:`center` and :func:`scale_normalize`; ``scale`` is the
        cumulative divisor applied to the coordinates.
    offset : the total shift subtracted from the original coordinates.
    """

    points: np.ndarray
    weights: np.ndarray
    total_weight: float = 1.0
    grid: Grid | None = None
    centered: bool = False
    scale_normalized: bool = False
    scale: float = 1.0
    offset: np.ndarray | None = None

    def __post_init__(self):
        pts = _frozen(self.points)
        if pts.ndim == 1:
            pts = _frozen(pts[:, None])
        w = _frozen(self.weights).reshape(-1)
        if pts.shape[0] != w.shape[0]:
            raise ValueError(f"{pts.shape[0]} points but {w.shape[0]} weights")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite and nonnegative")
        if not np.all(np.isfinite(pts)):
            raise ValueError("coordinates must be finite")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)
        if self.offset is None:
            object.__setattr__(self, "offset", _frozen(np.zeros(pts.shape[1])))

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def __len__(self):
        return self.points.shape[0]

    @classmethod
    def from_points(cls, points, weights=None) -> "Shape":
        """Build a normalized shape; ``weights`` default to uniform."""
        points = np.asarray(points, dtype=float)
        if points.ndim == 1:
            points = points[:, None]
        if weights is None:
            weights = np.ones(points.shape[0])
        return normalize_measure(cls(points, weights))

    @classmethod
    def from_grid(cls, values, origin=None, spacing=None) -> "Shape":
        """Density sampled on a lattice; ``values[i0, i1, ...]`` indexes axes 0, 1, ..."""
        values = np.asarray(values, dtype=float)
        d = values.ndim
        origin = np.zeros(d) if origin is None else np.asarray(origin, dtype=float)
        spacing = np.ones(d) if spacing is None else np.asarray(spacing, dtype=float)
        if np.any(spacing <= 0):
            raise ValueError("grid spacing must be positive")
        grid = Grid(_frozen(origin), _frozen(spacing), tuple(values.shape))
        weights = values.reshape(-1) * grid.cell_volume
        return normalize_measure(cls(grid.cell_centers(), weights, grid=grid))

    def to_points(self) -> "Shape":
        """Drop the grid geometry, keeping the identical weighted point set."""
        return replace(self, grid=None)

    def density_values(self) -> np.ndarray:
        """Lattice density (weight per unit volume) in the current coordinates."""
        if self.grid is None:
            raise ValueError("shape has no grid")
        return (self.weights / self.grid.cell_volume).reshape(self.grid.shape)

    def transformed(self, matrix) -> "Shape":
        """Shape with every point mapped ``x -> matrix @ x`` (grid geometry dropped)."""
        m = np.asarray(matrix, dtype=float)
        orthogonal = m.shape == (self.dim, self.dim) and np.allclose(m.T @ m, np.eye(self.dim), atol=1e-10)
        return replace(
            self,
            points=self.points @ m.T,
            grid=None,
            centered=self.centered,
            scale_normalized=self.scale_normalized and orthogonal,
        )

    def translated(self, t) -> "Shape":
        t = np.asarray(t, dtype=float)
        grid = None if self.grid is None else Grid(self.grid.origin + t, self.grid.spacing, self.grid.shape)
        return replace(self, points=self.points + t, grid=grid, centered=False)

    def scaled(self, c: float) -> "Shape":
        if c <= 0:
            raise ValueError("scale factor must be positive")
        grid = None if self.grid is None else Grid(self.grid.origin * c, self.grid.spacing * c, self.grid.shape)
        return replace(self, points=self.points * c, grid=grid, scale_normalized=False)


def normalize_measure(shape: Shape) -> Shape:
    total = float(np.sum(shape.weights))
    if not total > 0:
        raise DegenerateShapeError("shape has zero total weight")
    return replace(shape, weights=shape.weights / total, total_weight=total * shape.total_weight)


def expectation(shape: Shape, f: Callable[[np.ndarray], np.ndarray]) -> float:
    """``E[f(x)] = sum_i w_i f(x_i)``.

    ``f`` receives the ``(n, d)`` coordinate array and must return ``n``
    values (or a scalar, broadcast to all points).
    """
    vals = np.broadcast_to(np.asarray(f(shape.points), dtype=float), shape.weights.shape)
    return float(np.dot(shape.weights, vals))


def center_of_mass(shape: Shape) -> np.ndarray:
    return shape.weights @ shape.points


def center(shape: Shape) -> Shape:
    """Shift so that ``E[x_a] = 0`` for every axis."""
    mu = center_of_mass(shape)
    pts = shape.points - mu
    # second pass removes the roundoff residue of the first
    mu2 = shape.weights @ pts
    pts = pts - mu2
    shift = mu + mu2
    grid = None if shape.grid is None else shape.grid.transformed(shift, 1.0)
    return replace(
        shape, points=pts, grid=grid, centered=True, offset=shape.offset + shift * shape.scale
    )


def _require_centered(shape: Shape, auto_center: bool) -> Shape:
    if shape.centered:
        return shape
    if auto_center:
        return center(shape)
    raise ValueError("shape is not centered; call center() first or pass auto_center=True")


def covariance(shape: Shape, auto_center: bool = False) -> SymTensor:
    """``p_ab = E[x_a x_b]`` of the centered shape, as an order-2 tensor."""
    s = _require_centered(shape, auto_center)
    x = s.points
    cov = (x * s.weights[:, None]).T @ x
    return SymTensor.from_dense(0.5 * (cov + cov.T), check=False)


def scale_normalize(shape: Shape, target: float | None = None, auto_center: bool = False) -> tuple[Shape, float]:
    """Divide coordinates by ``sqrt(Tr(cov) / target)`` so the trace becomes ``target``.

    ``target`` defaults to the dimension ``d``, which makes each direction
    roughly unit variance.  Returns the new shape and the divisor.
    """
    s = _require_centered(shape, auto_center)
    target = float(s.dim if target is None else target)
    if target <= 0:
        raise ValueError("normalization target must be positive")
    tr = float(np.trace(covariance(s).to_dense()))
    if not tr > 0:
        raise DegenerateShapeError("degenerate shape: covariance trace is zero")
    divisor = float(np.sqrt(tr / target))
    return replace(rescale(s, divisor), scale_normalized=True), divisor


def rescale(shape: Shape, divisor: float) -> Shape:
    """Divide coordinates by ``divisor`` (used for fixed universal scaling)."""
    if not divisor > 0:
        raise ValueError("divisor must be positive")
    grid = None if shape.grid is None else shape.grid.transformed(np.zeros(shape.dim), divisor)
    return replace(
        shape, points=shape.points / divisor, grid=grid, scale=shape.scale * divisor, scale_normalized=False
    )


def central_moment(shape: Shape, r: int, auto_center: bool = False) -> SymTensor:
    """Packed ``E[x_{a1} ... x_{ar}]`` over the centered shape.

    Order 0 is the total mass (1), order 1 is exactly zero, order 2 is the
    covariance.
    """
    if r < 0:
        raise ValueError("order must be nonnegative")
    s = _require_centered(shape, auto_center)
    d = s.dim
    idx = multi_indices(d, r)
    if r == 0:
        return SymTensor(d, 0, [float(np.sum(s.weights))])
    if r == 1:
        # E[x - E[x]] vanishes identically; summing would only add roundoff
        # that signed roots of order-1 invariants blow up
        return SymTensor(d, 1)
    cols = np.asarray(idx, dtype=np.intp)  # (n_packed, r)
    # products of coordinates for every packed multi-index, chunked over points
    out = np.zeros(len(idx))
    x = s.points
    step = max(1, 200_000 // max(1, len(idx)))
    for lo in range(0, x.shape[0], step):
        xs = x[lo:lo + step]
        prod = np.prod(xs[:, cols], axis=2)  # (chunk, n_packed)
        out += s.weights[lo:lo + step] @ prod
    return SymTensor(d, r, out)


@dataclass(frozen=True)
class MomentSet:
    """Central moment tensors of orders ``0..order_max``."""

    dim: int
    order_max: int
    tensors: dict
    centered: bool = True
    scale_normalized: bool = False
    scale: float = 1.0

    def __getitem__(self, r: int) -> SymTensor:
        return self.tensors[r]

    def __iter__(self) -> Iterator[int]:
        return iter(sorted(self.tensors))

    def orders(self) -> list[int]:
        return sorted(self.tensors)

    def rotated(self, O) -> "MomentSet":
        from .symtensor import rotate

        return replace(self, tensors={r: rotate(t, O) for r, t in self.tensors.items()})

    def to_json(self) -> dict:
        return {
            "dim": self.dim,
            "order_max": self.order_max,
            "centered": self.centered,
            "scale_normalized": self.scale_normalized,
            "scale": self.scale,
            "tensors": {str(r): self.tensors[r].to_list() for r in self.orders()},
        }


def moments(shape: Shape, order_max: int, auto_center: bool = False) -> MomentSet:
    s = _require_centered(shape, auto_center)
    tensors = {r: central_moment(s, r) for r in range(order_max + 1)}
    return MomentSet(s.dim, order_max, tensors, centered=True, scale_normalized=s.scale_normalized, scale=s.scale)


def prepare(shape: Shape, scale_mode: str | float = "normalize", target: float | None = None) -> Shape:
    """Standard pipeline: center, then handle scale.

    ``scale_mode`` is ``"normalize"`` (covariance trace -> ``target``),
    ``"off"``, or a positive number used as a fixed universal divisor.
    """
    s = center(shape)
    if scale_mode == "normalize":
        return scale_normalize(s, target)[0]
    if scale_mode == "off" or scale_mode is None:
        return s
    return rescale(s, float(scale_mode))
