"""Rotation-invariant features built from contraction graphs.

Every fully contracted product of tensors is unchanged when the same
orthogonal matrix is applied to all of them.  A catalog lists such graphs
with a root (default: number of vertices) that brings each value back to the
scale of a single tensor entry, e.g. ``Tr(P^i) ** (1/i)`` behaves like a
generalized mean of the eigenvalues of ``P``.

Matrices built from higher orders:

* order 3: ``M[a,b] = sum_cd p[a,c,d] p[b,c,d]`` (d x d), invariants ``Tr(M^i)``
* order 4: ``C[(ab),(cd)] = sum_ef p[a,b,e,f] p[c,d,e,f]`` (d^2 x d^2), ``Tr(C^i)``

These invariants are necessary conditions for two tensor sets to differ by a
rotation, not sufficient ones beyond order 2.  They are also blind to
reflections: a shape and its mirror image give identical values.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .symtensor import ContractionGraph, SymTensor, evaluate_graph


@dataclass(frozen=True)
class CatalogEntry:
    name: str
    graph: ContractionGraph
    root: int | None = None
    weight: float = 1.0

    def __post_init__(self):
        if self.root is None:
            object.__setattr__(self, "root", len(self.graph.vertices))
        if self.root < 1:
            raise ValueError(f"{self.name}: root must be a positive integer")

    @property
    def orders(self) -> tuple[int, ...]:
        return tuple(sorted(set(self.graph.vertices)))

    def to_json(self) -> dict:
        return {"name": self.name, "graph": self.graph.to_json(), "root": self.root, "weight": self.weight}

    @classmethod
    def from_json(cls, obj) -> "CatalogEntry":
        return cls(obj["name"], ContractionGraph.from_json(obj["graph"]), obj.get("root"), obj.get("weight", 1.0))


@dataclass(frozen=True)
class InvariantCatalog:
    entries: tuple[CatalogEntry, ...]
    name: str = "custom"

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))
        names = [e.name for e in self.entries]
        if len(set(names)) != len(names):
            raise ValueError("duplicate invariant names in catalog")
        for e in self.entries:
            if not e.graph.connected:
                raise ValueError(f"{e.name}: disconnected graphs factor into smaller invariants")

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    @property
    def names(self) -> list[str]:
        return [e.name for e in self.entries]

    def orders(self) -> list[int]:
        return sorted({r for e in self.entries for r in e.graph.vertices})

    def to_json(self) -> list:
        return [e.to_json() for e in self.entries]

    def dumps(self) -> str:
        return json.dumps({"name": self.name, "entries": self.to_json()}, indent=2)

    @classmethod
    def from_json(cls, obj, name: str | None = None) -> "InvariantCatalog":
        if isinstance(obj, dict):
            name = name or obj.get("name")
            obj = obj["entries"]
        return cls(tuple(CatalogEntry.from_json(e) for e in obj), name or "custom")

    @classmethod
    def load(cls, path) -> "InvariantCatalog":
        with open(path) as fh:
            return cls.from_json(json.load(fh), name=str(path))


# ---------------------------------------------------------------------------
# graph builders


def _ring(order: int, n: int) -> list:
    """``n`` order-2 vertices in a cycle: ``Tr(P^n)``."""
    if n == 1:
        return [(0, 0, 0, 1)]
    return [(k, 1, (k + 1) % n, 0) for k in range(n)]


def trace_power_graph(n: int) -> ContractionGraph:
    return ContractionGraph((2,) * n, tuple(_ring(2, n)))


def mixed_chain_graph(n: int) -> ContractionGraph:
    """``sum_ab v_a (P^n)_ab v_b``: vector, ``n`` matrices, vector."""
    verts = (1,) + (2,) * n + (1,)
    if n == 0:
        return ContractionGraph(verts, ((0, 0, 1, 0),))
    edges = [(0, 0, 1, 0)]
    edges += [(k, 1, k + 1, 0) for k in range(1, n)]
    edges.append((n, 1, n + 1, 0))
    return ContractionGraph(verts, tuple(edges))


def frobenius_graph(r: int) -> ContractionGraph:
    """Two order-``r`` vertices joined port to port: squared Frobenius norm."""
    return ContractionGraph((r, r), tuple((0, k, 1, k) for k in range(r)))


def matrix_trace_graph(r: int, n: int) -> ContractionGraph:
    """``Tr(K^n)`` where ``K`` pairs two order-``r`` tensors over their last ``r - h`` slots.

    ``h = 1`` for odd ``r`` is the d x d matrix ``M``; ``h = r/2`` for even
    ``r`` gives the d^h x d^h matrix (``C`` for ``r = 4``).
    """
    h = 1 if r % 2 else r // 2
    verts = (r,) * (2 * n)
    edges = []
    for k in range(n):
        a, b = 2 * k, 2 * k + 1
        edges += [(a, s, b, s) for s in range(h, r)]
        nxt = (2 * k + 2) % (2 * n)
        edges += [(b, s, nxt, s) for s in range(h)]
    return ContractionGraph(verts, tuple(edges))


def full_trace_graph(r: int) -> ContractionGraph:
    """Single even-order vertex with its ports paired in consecutive self-loops."""
    if r % 2:
        raise ValueError("full trace needs even order")
    return ContractionGraph((r,), tuple((0, 2 * k, 0, 2 * k + 1) for k in range(r // 2)))


def cross_graph(r: int, parts: Sequence[int]) -> ContractionGraph:
    """Order-``r`` vertex with every port joined to one lower-order factor.

    ``parts`` lists the orders of the factors; they must sum to ``r``.
    ``cross_graph(3, (1, 2))`` is ``sum p_abc p_a p_bc``.
    """
    if sum(parts) != r:
        raise ValueError("factor orders must sum to the central order")
    verts = (r,) + tuple(parts)
    edges = []
    port = 0
    for k, q in enumerate(parts, start=1):
        for s in range(q):
            edges.append((0, port, k, s))
            port += 1
    return ContractionGraph(verts, tuple(edges))


def m_weighted_graph() -> ContractionGraph:
    """``sum p_acd p_bcd P_ab = Tr(M P)`` tying order 3 to the covariance frame."""
    return ContractionGraph((3, 3, 2), ((0, 1, 1, 1), (0, 2, 1, 2), (0, 0, 2, 0), (1, 0, 2, 1)))


def default_catalog(d: int, m: int) -> InvariantCatalog:
    """Standard invariants for tensors of orders ``0..m`` in ``d`` dimensions.

    Orders 0-2: value, vector norm, ``Tr(P^i)`` for ``i <= d``, and the
    mixed chains ``v P^i v`` for ``i = 0..d``.  Order 3: Frobenius norm,
    ``Tr(M^i)`` for ``i <= d`` and cross terms with orders 1 and 2.  Order 4:
    Frobenius norm, full trace, ``Tr(C^i)`` for ``i <= d^2`` and cross
    terms.  Each higher order adds its Frobenius norm, plus the full trace when
    even.
    """
    if d < 1:
        raise ValueError("dimension must be positive")
    if m < 2:
        raise ValueError("catalog needs max order >= 2")
    E = []

    def add(name, graph, root=None):
        E.append(CatalogEntry(name, graph, root))

    add("p0", ContractionGraph((0,), ()))
    add("norm1", frobenius_graph(1))
    for i in range(1, d + 1):
        add(f"tr2^{i}", trace_power_graph(i))
    for i in range(0, d + 1):
        add(f"mix12^{i}", mixed_chain_graph(i))
    if m >= 3:
        add("frob3", frobenius_graph(3))
        for i in range(1, d + 1):
            add(f"trM3^{i}", matrix_trace_graph(3, i))
        add("cross3_12", cross_graph(3, (1, 2)))
        add("cross3_111", cross_graph(3, (1, 1, 1)))
        add("trM3P", m_weighted_graph())
    if m >= 4:
        add("frob4", frobenius_graph(4))
        add("trace4", full_trace_graph(4))
        for i in range(1, d * d + 1):
            add(f"trC4^{i}", matrix_trace_graph(4, i))
        add("cross4_22", cross_graph(4, (2, 2)))
        add("cross4_31", cross_graph(4, (3, 1)))
        add("cross4_112", cross_graph(4, (1, 1, 2)))
    for r in range(5, m + 1):
        add(f"frob{r}", frobenius_graph(r))
        if r % 2 == 0:
            add(f"trace{r}", full_trace_graph(r))
    return InvariantCatalog(tuple(E), name=f"default(d={d},m={m})")


# ---------------------------------------------------------------------------
# evaluation


def _tensor_map(source) -> dict:
    """Slot name -> tensor for a MomentSet, Polynomial or plain ``{order: tensor}``."""
    tensors = getattr(source, "tensors", source)
    if not isinstance(tensors, Mapping):
        raise TypeError(f"cannot read tensors from {type(source).__name__}")
    out = {}
    for k, t in tensors.items():
        out[k if isinstance(k, str) else f"p{int(k)}"] = t
    return out


def raw_invariants(source, catalog: InvariantCatalog) -> np.ndarray:
    """Un-rooted graph values, one per catalog entry."""
    tensors = _tensor_map(source)
    vals = []
    for e in catalog:
        missing = [s for s in e.graph.bind if s not in tensors]
        if missing:
            raise KeyError(f"{e.name}: missing tensor for slot(s) {sorted(set(missing))}")
        vals.append(evaluate_graph(e.graph, tensors))
    return np.array(vals)


def signed_root(v, root):
    v = np.asarray(v, dtype=float)
    return np.sign(v) * np.abs(v) ** (1.0 / np.asarray(root, dtype=float))


@dataclass(frozen=True)
class InvariantVector:
    values: np.ndarray
    names: tuple[str, ...]
    catalog: str = ""
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.values)

    def __getitem__(self, name: str) -> float:
        return float(self.values[self.names.index(name)])

    def as_dict(self) -> dict:
        return dict(zip(self.names, self.values.tolist()))

    def to_json(self) -> dict:
        return {
            "catalog": self.catalog,
            "names": list(self.names),
            "values": self.values.tolist(),
            "meta": self.meta,
        }


def feature_vector(source, catalog: InvariantCatalog) -> InvariantVector:
    """Rooted, weighted invariants ``sign(v) |v|^(1/root) * weight``."""
    raw = raw_invariants(source, catalog)
    roots = np.array([e.root for e in catalog], dtype=float)
    weights = np.array([e.weight for e in catalog])
    vals = signed_root(raw, roots) * weights
    meta = {
        "dim": _dim(source),
        "orders": catalog.orders(),
        "scale_normalized": bool(getattr(source, "scale_normalized", False)),
    }
    return InvariantVector(vals, tuple(catalog.names), catalog.name, meta)


def _dim(source) -> int:
    return next(iter(_tensor_map(source).values())).dim


def similarity_distance(f: InvariantVector, g: InvariantVector, norm: str = "L2") -> float:
    if f.names != g.names:
        raise ValueError("feature vectors come from different catalogs")
    diff = f.values - g.values
    if norm.upper() == "L2":
        return float(np.sqrt(np.dot(diff, diff)))
    if norm.upper() == "LINF":
        return float(np.max(np.abs(diff))) if diff.size else 0.0
    raise ValueError(f"unknown norm {norm!r}")


def _mismatch(a: float, b: float) -> float:
    """Relative difference when ``|a| > 1``, absolute otherwise."""
    diff = abs(a - b)
    ref = abs(a)
    return diff / ref if ref > 1.0 else diff


@dataclass
class EquivalenceReport:
    equivalent: bool
    tol: float
    worst: str | None
    worst_error: float
    errors: dict

    def to_json(self) -> dict:
        return {
            "equivalent": self.equivalent,
            "tol": self.tol,
            "worst": self.worst,
            "worst_error": self.worst_error,
            "errors": self.errors,
        }


def rotation_equivalence_test(p, q, tol: float = 1e-8, catalog: InvariantCatalog | None = None) -> EquivalenceReport:
    """Check whether every catalog invariant of ``p`` and ``q`` agrees within ``tol``.

    Agreement is necessary for ``q`` to be a rotated copy of ``p``; beyond
    order 2 it is not proven sufficient, and reflections always pass.
    """
    for flag in ("centered", "scale_normalized"):
        fp, fq = getattr(p, flag, None), getattr(q, flag, None)
        if fp != fq:
            raise ValueError(f"normalization flag {flag!r} differs: {fp} vs {fq}")
    tp, tq = _tensor_map(p), _tensor_map(q)
    if set(tp) != set(tq):
        raise ValueError(f"tensor orders differ: {sorted(tp)} vs {sorted(tq)}")
    d = _dim(p)
    if _dim(q) != d:
        raise ValueError("dimension mismatch")
    if catalog is None:
        m = max(int(k[1:]) for k in tp)
        catalog = default_catalog(d, max(m, 2))
    vp = raw_invariants(tp, catalog)
    vq = raw_invariants(tq, catalog)
    errors = {e.name: _mismatch(a, b) for e, a, b in zip(catalog, vp, vq)}
    worst = max(errors, key=errors.get) if errors else None
    worst_err = errors[worst] if worst else 0.0
    return EquivalenceReport(worst_err <= tol, tol, worst, worst_err, errors)
