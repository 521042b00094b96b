"""Hermite-function expansion of shape densities.

The 1-D basis is ``f_j(x) = h_j(x) exp(-x^2/2) / sqrt(2^j j! sqrt(pi))`` with
physicists' Hermite polynomials ``h_j``; it is orthonormal on the real line.
In ``d`` dimensions we use products ``f_j(x) = f_{j_1}(x_1) ... f_{j_d}(x_d)``
truncated at total degree ``|j| <= m``.  Since the weight is a density, the
least-squares coefficients are plain expectations, ``u_j = E[f_j(x)]``.

Values are computed with the normalized three-term recurrence, which stays
finite for large ``j`` where raw polynomial coefficients overflow.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache
from math import factorial, pi, sqrt

import numpy as np

from .shape_model import Shape
from .symtensor import SymTensor, multi_indices

PI_QUARTER = pi ** -0.25


def hermite_functions(m: int, x) -> np.ndarray:
    """All ``f_0 .. f_m`` at ``x``; returns an array of shape ``(m + 1,) + x.shape``."""
    x = np.asarray(x, dtype=float)
    out = np.empty((m + 1,) + x.shape)
    out[0] = PI_QUARTER * np.exp(-0.5 * x * x)
    if m >= 1:
        out[1] = sqrt(2.0) * x * out[0]
    for j in range(1, m):
        out[j + 1] = sqrt(2.0 / (j + 1)) * x * out[j] - sqrt(j / (j + 1)) * out[j - 1]
    return out


def hermite_fn(j: int, x):
    """Orthonormal Hermite function ``f_j`` at ``x`` (scalar or array)."""
    if j < 0:
        raise ValueError("degree must be nonnegative")
    v = hermite_functions(j, x)[j]
    return float(v) if np.ndim(v) == 0 else v


@lru_cache(maxsize=None)
def hermite_poly_coeffs(j: int) -> tuple[int, ...]:
    """Exact integer coefficients of ``h_j``, lowest power first.

    Uses ``h_{j+1} = 2x h_j - 2j h_{j-1}``.
    """
    if j == 0:
        return (1,)
    prev, cur = [1], [0, 2]
    for k in range(1, j):
        nxt = [0] * (k + 2)
        for p, c in enumerate(cur):
            nxt[p + 1] += 2 * c
        for p, c in enumerate(prev):
            nxt[p] -= 2 * k * c
        prev, cur = cur, nxt
    return tuple(cur)


def normalization(j: int) -> float:
    return 1.0 / sqrt(2.0**j * factorial(j) * sqrt(pi))


@lru_cache(maxsize=None)
def degree_multi_indices(dim: int, m: int) -> tuple[tuple[int, ...], ...]:
    """Multi-degrees with ``|j| <= m``, graded by total degree then lexicographic descending."""
    out = []
    for r in range(m + 1):
        shell = [j for j in itertools.product(range(r + 1), repeat=dim) if sum(j) == r]
        shell.sort(reverse=True)
        out.extend(shell)
    return tuple(out)


@dataclass(frozen=True)
class HermiteCoeffs:
    """Coefficients ``u_j`` over the product basis, ``|j| <= degree_max``.

    ``scale`` and ``center`` record the coordinate normalization applied
    before encoding, mapping original coordinates ``y`` to ``(y - center) / scale``.
    """

    dim: int
    degree_max: int
    values: np.ndarray
    scale: float = 1.0
    center: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        v = np.array(self.values, dtype=float).reshape(-1)
        n = len(degree_multi_indices(self.dim, self.degree_max))
        if v.size != n:
            raise ValueError(f"expected {n} coefficients, got {v.size}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        c = np.zeros(self.dim) if self.center is None else np.array(self.center, dtype=float)
        object.__setattr__(self, "center", c)

    @property
    def indices(self) -> tuple[tuple[int, ...], ...]:
        return degree_multi_indices(self.dim, self.degree_max)

    def __getitem__(self, j) -> float:
        return float(self.values[self.indices.index(tuple(j))])

    def as_dict(self) -> dict:
        return dict(zip(self.indices, self.values.tolist()))

    @classmethod
    def from_dict(cls, dim: int, degree_max: int, coeffs: dict, **kw) -> "HermiteCoeffs":
        idx = degree_multi_indices(dim, degree_max)
        vals = np.zeros(len(idx))
        pos = {j: k for k, j in enumerate(idx)}
        for j, u in coeffs.items():
            if tuple(j) not in pos:
                raise KeyError(f"multi-degree {j} outside |j| <= {degree_max}")
            vals[pos[tuple(j)]] = u
        return cls(dim, degree_max, vals, **kw)

    def shell_energy(self) -> np.ndarray:
        """``sum_{|j| = r} u_j^2`` for ``r = 0..degree_max``."""
        deg = np.array([sum(j) for j in self.indices])
        return np.bincount(deg, weights=self.values**2, minlength=self.degree_max + 1)

    def truncated(self, m: int) -> "HermiteCoeffs":
        if m > self.degree_max:
            raise ValueError("cannot truncate to a higher degree")
        n = len(degree_multi_indices(self.dim, m))
        return HermiteCoeffs(self.dim, m, self.values[:n], self.scale, self.center, dict(self.meta))

    def to_json(self) -> dict:
        return {
            "dim": self.dim,
            "degree_max": self.degree_max,
            "scale": self.scale,
            "center": self.center.tolist(),
            "coeffs": [{"j": list(j), "u": float(u)} for j, u in zip(self.indices, self.values)],
        }

    @classmethod
    def from_json(cls, obj) -> "HermiteCoeffs":
        coeffs = {tuple(e["j"]): e["u"] for e in obj["coeffs"]}
        return cls.from_dict(
            obj["dim"], obj["degree_max"], coeffs, scale=obj.get("scale", 1.0), center=obj.get("center")
        )


def basis_matrix(points, m: int) -> np.ndarray:
    """``B[i, k] = f_{j_k}(points[i])`` for every multi-degree ``j_k`` with ``|j_k| <= m``."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    n, d = pts.shape
    one_d = hermite_functions(m, pts)  # (m+1, n, d)
    idx = np.array(degree_multi_indices(d, m), dtype=np.intp)  # (J, d)
    B = np.ones((n, len(idx)))
    for a in range(d):
        B *= one_d[idx[:, a], :, a].T
    return B


def encode(shape: Shape, m: int, orthogonalize: bool = False) -> HermiteCoeffs:
    """Coefficients ``u_j = E[f_j(x)]`` for ``|j| <= m``.

    The shape should already be centered and scaled (see
    :func:`shapeinv.shape_model.prepare`); this function does not move it.

    With ``orthogonalize`` (grid shapes only) the coefficients are instead the
    discrete least-squares fit of the lattice density, equivalent to
    Gram-Schmidt re-orthogonalizing the basis over the lattice cells.  The fit
    is exact on the lattice but generally less faithful between cells.
    """
    if m < 0:
        raise ValueError("degree must be nonnegative")
    B = basis_matrix(shape.points, m)
    if orthogonalize:
        if shape.grid is None:
            raise ValueError("orthogonalize needs a grid shape")
        sw = np.sqrt(shape.grid.cell_volume)
        rho = shape.weights / shape.grid.cell_volume
        u, *_ = np.linalg.lstsq(B * sw, rho * sw, rcond=None)
    else:
        u = shape.weights @ B
    return HermiteCoeffs(
        shape.dim,
        m,
        u,
        scale=shape.scale,
        center=shape.offset,
        meta={"orthogonalized": bool(orthogonalize)},
    )


def evaluate(coeffs: HermiteCoeffs, points) -> np.ndarray:
    """``sum_j u_j f_j(x)`` at each row of ``points`` (normalized coordinates)."""
    return basis_matrix(points, coeffs.degree_max) @ coeffs.values


def reconstruct(coeffs: HermiteCoeffs, origin, spacing, extents) -> np.ndarray:
    """Evaluate the expansion at the cell centers of a grid.

    Cell ``i`` along axis ``k`` is at ``origin[k] + i * spacing[k]``; the
    result has shape ``extents``.  Values may be negative.
    """
    origin = np.asarray(origin, dtype=float)
    spacing = np.asarray(spacing, dtype=float)
    extents = tuple(int(e) for e in extents)
    d = coeffs.dim
    if origin.shape != (d,) or spacing.shape != (d,) or len(extents) != d:
        raise ValueError(f"grid specification must have {d} axes")
    # separable evaluation: one 1-D table per axis
    tables = [
        hermite_functions(coeffs.degree_max, origin[k] + spacing[k] * np.arange(extents[k])) for k in range(d)
    ]
    out = np.zeros(extents)
    for j, u in zip(coeffs.indices, coeffs.values):
        if u == 0.0:
            continue
        term = tables[0][j[0]]
        for k in range(1, d):
            term = np.multiply.outer(term, tables[k][j[k]])
        out += u * term
    return out


def reconstruct_shape_grid(coeffs: HermiteCoeffs, shape: Shape) -> np.ndarray:
    """Reconstruction on the lattice of a (prepared) grid shape."""
    if shape.grid is None:
        raise ValueError("shape has no grid")
    g = shape.grid
    return reconstruct(coeffs, g.origin, g.spacing, g.shape)


def l2_error(coeffs: HermiteCoeffs, shape: Shape) -> float:
    """Lattice L2 distance between the reconstruction and the source density."""
    rec = reconstruct_shape_grid(coeffs, shape)
    diff = rec - shape.density_values()
    return float(np.sqrt(np.sum(diff * diff) * shape.grid.cell_volume))


# ---------------------------------------------------------------------------
# monomial form


class Polynomial:
    """Polynomial split into homogeneous parts, ``p(x) = sum_r p^r(x)``.

    ``homogeneous[r]`` is a symmetric order-``r`` tensor with
    ``p^r(x) = sum_{a_1..a_r} P[a_1..a_r] x_{a_1} ... x_{a_r}``.
    """

    def __init__(self, dim: int, degree_max: int, homogeneous: dict):
        self.dim = dim
        self.degree_max = degree_max
        self.homogeneous = dict(homogeneous)

    def __getitem__(self, r: int) -> SymTensor:
        return self.homogeneous[r]

    def orders(self) -> list[int]:
        return sorted(self.homogeneous)

    @property
    def tensors(self) -> dict:
        return self.homogeneous

    def homogeneous_part(self, r: int, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        t = self.homogeneous[r]
        if r == 0:
            return np.full(pts.shape[0], t.entries[0])
        idx = np.asarray(multi_indices(self.dim, r), dtype=np.intp)
        mono = np.prod(pts[:, idx], axis=2)
        return mono @ (t.multiplicities * t.entries)

    def __call__(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return sum(self.homogeneous_part(r, pts) for r in self.orders())

    def monomials(self) -> dict:
        """``{alpha: c_alpha}`` with ``alpha`` the exponent tuple."""
        out = {}
        for r, t in self.homogeneous.items():
            for mi, mult, v in zip(multi_indices(self.dim, r), t.multiplicities, t.entries):
                alpha = tuple(int(c) for c in np.bincount(np.asarray(mi, dtype=int), minlength=self.dim)) \
                    if r else (0,) * self.dim
                out[alpha] = mult * v
        return out

    def rotated(self, O) -> "Polynomial":
        from .symtensor import rotate

        return Polynomial(self.dim, self.degree_max, {r: rotate(t, O) for r, t in self.homogeneous.items()})


def to_polynomial(coeffs: HermiteCoeffs) -> Polynomial:
    """Expand ``sum_j u_j f_j(x)`` into monomials, dropping the Gaussian factor.

    Integer Hermite coefficients are multiplied out exactly; each basis
    function contributes with one floating normalization factor.
    """
    d, m = coeffs.dim, coeffs.degree_max
    mono: dict = {}
    for j, u in zip(coeffs.indices, coeffs.values):
        if u == 0.0:
            continue
        scale = u
        for jk in j:
            scale *= normalization(jk)
        # exponents of h_{j_1}(x_1) ... h_{j_d}(x_d)
        per_axis = [[(p, c) for p, c in enumerate(hermite_poly_coeffs(jk)) if c] for jk in j]
        for combo in itertools.product(*per_axis):
            alpha = tuple(p for p, _ in combo)
            c = 1
            for _, ck in combo:
                c *= ck
            mono[alpha] = mono.get(alpha, 0.0) + scale * c
    homogeneous = {}
    for r in range(m + 1):
        entries = []
        for mi in multi_indices(d, r):
            alpha = tuple(int(c) for c in np.bincount(np.asarray(mi, dtype=int), minlength=d)) if r else (0,) * d
            mult = factorial(r)
            for c in alpha:
                mult //= factorial(c)
            entries.append(mono.get(alpha, 0.0) / mult)
        homogeneous[r] = SymTensor(d, r, entries)
    return Polynomial(d, m, homogeneous)
