"""Packed symmetric tensors and contraction-graph evaluation.

A symmetric order-``r`` tensor over ``d`` axes is stored as one entry per
nondecreasing multi-index ``a_1 <= ... <= a_r``, i.e. ``C(d+r-1, r)`` numbers.
Packed offsets follow colexicographic order, so for ``d=2, r=2`` the entries
are ``(0,0), (0,1), (1,1)``.  Axes are zero-based throughout.

Contraction graphs have one vertex per tensor factor and one edge per summed
index; every such graph is invariant under orthogonal transforms applied to
all tensor slots.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from functools import lru_cache
from math import comb, factorial
from typing import Mapping, Sequence

import numpy as np

ORTHO_TOL = 1e-10


def packed_size(dim: int, order: int) -> int:
    return comb(dim + order - 1, order)


def pack_index(multi_index: Sequence[int], dim: int) -> int:
    """Offset of ``multi_index`` in packed storage.

    The index is sorted first, so any permutation maps to the same offset.
    The offset is the colex rank of the sorted tuple, computed with the
    combinatorial number system for multisets.
    """
    idx = sorted(int(a) for a in multi_index)
    for a in idx:
        if a < 0 or a >= dim:
            raise IndexError(f"axis {a} out of range for dim={dim}")
    return sum(comb(a + k, k + 1) for k, a in enumerate(idx))


@lru_cache(maxsize=None)
def multi_indices(dim: int, order: int) -> tuple[tuple[int, ...], ...]:
    """All nondecreasing multi-indices in packed order."""
    out = list(itertools.combinations_with_replacement(range(dim), order))
    out.sort(key=lambda t: pack_index(t, dim))
    return tuple(out)


@lru_cache(maxsize=None)
def multiplicities(dim: int, order: int) -> np.ndarray:
    """Number of distinct index permutations of each packed entry."""
    mult = []
    for t in multi_indices(dim, order):
        counts = np.bincount(np.asarray(t, dtype=int), minlength=dim) if t else []
        m = factorial(order)
        for c in counts:
            m //= factorial(int(c))
        mult.append(m)
    arr = np.asarray(mult, dtype=float)
    arr.setflags(write=False)
    return arr


@lru_cache(maxsize=None)
def _dense_to_packed(dim: int, order: int) -> np.ndarray:
    # offset of every dense index tuple, flattened in C order
    if order == 0:
        return np.zeros(1, dtype=np.intp)
    grids = np.indices((dim,) * order).reshape(order, -1)
    grids = np.sort(grids, axis=0)
    offs = np.zeros(grids.shape[1], dtype=np.intp)
    for k in range(order):
        offs += np.array([comb(int(a) + k, k + 1) for a in range(dim)])[grids[k]]
    offs.setflags(write=False)
    return offs


@lru_cache(maxsize=None)
def _first_occurrence(dim: int, order: int) -> np.ndarray:
    # flat dense position of each packed multi-index
    if order == 0:
        return np.zeros(1, dtype=np.intp)
    idx = np.array(multi_indices(dim, order), dtype=np.intp).T
    return np.ravel_multi_index(tuple(idx), (dim,) * order)


class SymTensor:
    """Symmetric tensor of a given ``order`` over ``dim`` axes, packed."""

    __slots__ = ("dim", "order", "entries")

    def __init__(self, dim: int, order: int, entries=None):
        if dim < 1:
            raise ValueError("dim must be positive")
        if order < 0:
            raise ValueError("order must be nonnegative")
        n = packed_size(dim, order)
        if entries is None:
            entries = np.zeros(n)
        entries = np.array(entries, dtype=float).reshape(-1)
        if entries.size != n:
            raise ValueError(f"expected {n} packed entries for dim={dim}, order={order}, got {entries.size}")
        entries.setflags(write=False)
        self.dim = int(dim)
        self.order = int(order)
        self.entries = entries

    @classmethod
    def from_dense(cls, array, check: bool = True, atol: float = 1e-12, dim: int | None = None) -> "SymTensor":
        """Pack a dense array.  With ``check`` the array must already be symmetric.

        ``dim`` is only needed for scalars, whose shape carries no dimension.
        """
        a = np.asarray(array, dtype=float)
        order = a.ndim
        if order or dim is None:
            dim = a.shape[0] if order else 1
        if any(s != dim for s in a.shape):
            raise ValueError(f"dense tensor must be hypercubic, got shape {a.shape}")
        t = cls(dim, order, a.reshape(-1)[_first_occurrence(dim, order)])
        if check and order > 1:
            err = np.max(np.abs(t.to_dense() - a))
            scale = max(1.0, float(np.max(np.abs(a))))
            if err > atol * scale:
                raise ValueError(f"tensor is not symmetric (max deviation {err:.3g})")
        return t

    @classmethod
    def symmetrize(cls, array) -> "SymTensor":
        """Average a dense tensor over all index permutations and pack it."""
        a = np.asarray(array, dtype=float)
        perms = list(itertools.permutations(range(a.ndim)))
        sym = sum(np.transpose(a, p) for p in perms) / len(perms)
        return cls.from_dense(sym, check=False)

    def to_dense(self) -> np.ndarray:
        flat = self.entries[_dense_to_packed(self.dim, self.order)]
        return flat.reshape((self.dim,) * self.order)

    def __getitem__(self, multi_index) -> float:
        if isinstance(multi_index, (int, np.integer)):
            multi_index = (multi_index,)
        if len(multi_index) != self.order:
            raise IndexError(f"expected {self.order} indices")
        return float(self.entries[pack_index(multi_index, self.dim)])

    def __repr__(self):
        return f"SymTensor(dim={self.dim}, order={self.order}, entries={self.entries.tolist()!r})"

    def __eq__(self, other):
        if not isinstance(other, SymTensor):
            return NotImplemented
        return (self.dim, self.order) == (other.dim, other.order) and np.array_equal(self.entries, other.entries)

    __hash__ = None

    def _check_same(self, other: "SymTensor"):
        if (self.dim, self.order) != (other.dim, other.order):
            raise ValueError(
                f"shape mismatch: (dim={self.dim}, order={self.order}) vs (dim={other.dim}, order={other.order})"
            )

    def __add__(self, other: "SymTensor") -> "SymTensor":
        self._check_same(other)
        return SymTensor(self.dim, self.order, self.entries + other.entries)

    def __sub__(self, other: "SymTensor") -> "SymTensor":
        self._check_same(other)
        return SymTensor(self.dim, self.order, self.entries - other.entries)

    def __mul__(self, c: float) -> "SymTensor":
        return SymTensor(self.dim, self.order, self.entries * float(c))

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    @property
    def multiplicities(self) -> np.ndarray:
        return multiplicities(self.dim, self.order)

    def norm(self) -> float:
        return float(np.sqrt(max(frobenius(self, self), 0.0)))

    def to_list(self) -> list[dict]:
        """Entries labelled by multi-index, for serialization."""
        return [
            {"index": list(t), "value": float(v)}
            for t, v in zip(multi_indices(self.dim, self.order), self.entries)
        ]


def frobenius(p: SymTensor, q: SymTensor) -> float:
    """Full inner product over all index tuples, computed on packed entries."""
    p._check_same(q)
    return float(np.dot(p.multiplicities * p.entries, q.entries))


def check_orthogonal(O, dim: int | None = None, tol: float = ORTHO_TOL) -> np.ndarray:
    O = np.asarray(getattr(O, "matrix", O), dtype=float)
    if O.ndim != 2 or O.shape[0] != O.shape[1]:
        raise ValueError(f"rotation must be a square matrix, got shape {O.shape}")
    if dim is not None and O.shape[0] != dim:
        raise ValueError(f"rotation is {O.shape[0]}x{O.shape[0]}, tensor dim is {dim}")
    err = np.max(np.abs(O.T @ O - np.eye(O.shape[0])))
    if err > tol:
        raise ValueError(f"matrix is not orthogonal (max |O^T O - I| = {err:.3g})")
    return O


def rotate(t: SymTensor, O) -> SymTensor:
    """Apply ``O`` to every slot: ``out[i..] = sum O[i,a] ... t[a..]``.

    This is the push-forward convention: if ``t`` holds moments of a point
    set, ``rotate(t, O)`` holds the moments of the points mapped ``x -> O x``.
    Composition therefore reads ``rotate(rotate(t, A), B) == rotate(t, B @ A)``.
    The pull-back ``q(O x)`` of a polynomial corresponds to ``rotate(q, O.T)``.
    """
    O = check_orthogonal(O, t.dim)
    if t.order == 0:
        return t
    a = t.to_dense()
    for _ in range(t.order):
        # contracting axis 0 and appending the new axis at the end cycles
        # through all slots exactly once
        a = np.tensordot(a, O, axes=([0], [1]))
    return SymTensor.from_dense(a, check=False)


def trace_power(p: SymTensor, i: int) -> float:
    """``Tr(P^i)`` for an order-2 tensor ``P``."""
    if p.order != 2:
        raise ValueError("trace_power needs an order-2 tensor")
    if i < 1:
        raise ValueError("power must be >= 1")
    return float(np.trace(np.linalg.matrix_power(p.to_dense(), int(i))))


# ---------------------------------------------------------------------------
# contraction graphs


@dataclass(frozen=True)
class ContractionGraph:
    """Vertices carry tensor orders; edges pair ``(vertex, port)`` slots.

    ``bind`` names the tensor slot each vertex reads from.  By default a
    vertex of order ``r`` binds to ``"p{r}"``.
    """

    vertices: tuple[int, ...]
    edges: tuple[tuple[int, int, int, int], ...]
    bind: tuple[str, ...] = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "vertices", tuple(int(r) for r in self.vertices))
        object.__setattr__(self, "edges", tuple(tuple(int(x) for x in e) for e in self.edges))
        if not self.bind:
            object.__setattr__(self, "bind", tuple(f"p{r}" for r in self.vertices))
        else:
            object.__setattr__(self, "bind", tuple(self.bind))
        self.validate()

    def validate(self):
        if len(self.bind) != len(self.vertices):
            raise ValueError("bind must name one slot per vertex")
        seen = set()
        for e in self.edges:
            if len(e) != 4:
                raise ValueError(f"edge {e} must be (vi, pi, vj, pj)")
            for v, port in ((e[0], e[1]), (e[2], e[3])):
                if not 0 <= v < len(self.vertices):
                    raise ValueError(f"edge {e} references missing vertex {v}")
                if not 0 <= port < self.vertices[v]:
                    raise ValueError(f"edge {e} references port {port} of an order-{self.vertices[v]} vertex")
                if (v, port) in seen:
                    raise ValueError(f"port {(v, port)} used twice")
                seen.add((v, port))
        total = sum(self.vertices)
        if len(seen) != total:
            missing = [(v, k) for v, r in enumerate(self.vertices) for k in range(r) if (v, k) not in seen]
            raise ValueError(f"dangling ports: {missing}")

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def components(self) -> list[list[int]]:
        parent = list(range(len(self.vertices)))

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for vi, _, vj, _ in self.edges:
            parent[find(vi)] = find(vj)
        groups: dict[int, list[int]] = {}
        for v in range(len(self.vertices)):
            groups.setdefault(find(v), []).append(v)
        return sorted(groups.values())

    @property
    def connected(self) -> bool:
        return len(self.components()) == 1

    def subgraph(self, vertices: Sequence[int]) -> "ContractionGraph":
        remap = {v: k for k, v in enumerate(vertices)}
        edges = [(remap[a], p, remap[b], q) for a, p, b, q in self.edges if a in remap]
        return ContractionGraph(
            tuple(self.vertices[v] for v in vertices), tuple(edges), tuple(self.bind[v] for v in vertices)
        )

    def einsum_subscripts(self) -> list[list[int]]:
        """Per-vertex list of edge labels, one label per port."""
        labels = [[-1] * r for r in self.vertices]
        for k, (vi, pi, vj, pj) in enumerate(self.edges):
            labels[vi][pi] = k
            labels[vj][pj] = k
        return labels

    def to_json(self) -> dict:
        return {"vertices": list(self.vertices), "edges": [list(e) for e in self.edges], "bind": list(self.bind)}

    @classmethod
    def from_json(cls, obj) -> "ContractionGraph":
        if isinstance(obj, str):
            obj = json.loads(obj)
        return cls(tuple(obj["vertices"]), tuple(tuple(e) for e in obj["edges"]), tuple(obj.get("bind", ())))


def _bind(g: ContractionGraph, tensors) -> list[SymTensor]:
    if isinstance(tensors, Mapping):
        try:
            bound = [tensors[name] for name in g.bind]
        except KeyError as exc:
            raise KeyError(f"no tensor bound to slot {exc.args[0]!r}") from None
    else:
        bound = list(tensors)
    if len(bound) != len(g.vertices):
        raise ValueError(f"graph has {len(g.vertices)} vertices, got {len(bound)} tensors")
    for k, (t, r) in enumerate(zip(bound, g.vertices)):
        if t.order != r:
            raise ValueError(f"vertex {k} has order {r}, bound tensor has order {t.order}")
    dims = {t.dim for t in bound}
    if len(dims) > 1:
        raise ValueError(f"dimension mismatch among bound tensors: {sorted(dims)}")
    return bound


_PATHS: dict = {}


def evaluate_graph(g: ContractionGraph, tensors) -> float:
    """Sum over all edge labels of the product of bound tensor entries.

    ``tensors`` is either a sequence aligned with ``g.vertices`` or a mapping
    from slot names in ``g.bind`` to tensors.  Contraction is pairwise with a
    greedy order (smallest intermediate first); the path is cached per graph
    and dimension.
    """
    bound = _bind(g, tensors)
    if not bound:
        return 1.0
    dim = bound[0].dim
    operands = []
    for t, labels in zip(bound, g.einsum_subscripts()):
        operands.append(t.to_dense())
        operands.append(labels)
    operands.append([])
    key = (g.vertices, g.edges, dim)
    path = _PATHS.get(key)
    if path is None:
        path = np.einsum_path(*operands, optimize="greedy")[0]
        _PATHS[key] = path
    return float(np.einsum(*operands, optimize=path))


def contract_dense_bruteforce(g: ContractionGraph, tensors, max_terms: int = 2_000_000) -> float:
    """Reference evaluator: enumerate every edge-label assignment explicitly.

    Looks entries up in packed storage via :func:`pack_index` order, so it
    shares no code path with :func:`evaluate_graph`.  Cost is ``d**n_edges``.
    """
    bound = _bind(g, tensors)
    if not bound:
        return 1.0
    dim = bound[0].dim
    n = g.n_edges
    if dim**n > max_terms:
        raise ValueError(f"{dim}**{n} terms exceeds max_terms={max_terms}")
    labels = g.einsum_subscripts()
    # every row of `assign` is one assignment of axes to edges
    assign = np.indices((dim,) * n).reshape(n, -1) if n else np.zeros((0, 1), dtype=int)
    prod = np.ones(assign.shape[1])
    for t, lab in zip(bound, labels):
        if not lab:
            prod *= t.entries[0]
            continue
        idx = np.sort(assign[lab], axis=0)
        offs = np.zeros(assign.shape[1], dtype=np.intp)
        for k in range(len(lab)):
            offs += np.array([comb(a + k, k + 1) for a in range(dim)])[idx[k]]
        prod *= t.entries[offs]
    return float(prod.sum())
