import json
from math import sqrt

import numpy as np
import pytest

from shapeinv.fixtures import cross, random_shape
from shapeinv.invariants import (
    CatalogEntry,
    InvariantCatalog,
    default_catalog,
    feature_vector,
    raw_invariants,
    rotation_equivalence_test,
    similarity_distance,
)
from shapeinv.shape_model import MomentSet, Shape, center, moments, prepare
from shapeinv.symtensor import ContractionGraph, SymTensor, evaluate_graph, packed_size, rotate
from conftest import random_orthogonal


def random_tensors(rng, d, m):
    return {r: SymTensor(d, r, rng.normal(size=packed_size(d, r))) for r in range(m + 1)}


def test_catalog_examples():
    cat = default_catalog(2, 2)
    assert cat.names == ["p0", "norm1", "tr2^1", "tr2^2", "mix12^0", "mix12^1", "mix12^2"]
    assert len(cat) == 7
    names3 = default_catalog(3, 2).names
    assert {"tr2^1", "tr2^2", "tr2^3"} <= set(names3)
    with pytest.raises(ValueError):
        default_catalog(2, 1)


def test_catalog_rejects_disconnected_and_duplicates():
    g = ContractionGraph((2, 2), ((0, 0, 0, 1), (1, 0, 1, 1)))
    with pytest.raises(ValueError, match="disconnected"):
        InvariantCatalog((CatalogEntry("bad", g),))
    e = default_catalog(2, 2).entries[0]
    with pytest.raises(ValueError, match="duplicate"):
        InvariantCatalog((e, e))


def test_root_defaults_to_vertex_count():
    for e in default_catalog(3, 4):
        assert e.root == max(1, len(e.graph.vertices))


def test_catalog_json_roundtrip(tmp_path):
    cat = default_catalog(3, 4)
    path = tmp_path / "cat.json"
    path.write_text(cat.dumps())
    back = InvariantCatalog.load(path)
    assert back.names == cat.names
    assert [e.graph for e in back] == [e.graph for e in cat]
    assert [e.root for e in back] == [e.root for e in cat]
    # a hand-written entry with only a graph and a name
    obj = [{"name": "trace2", "graph": {"vertices": [2], "edges": [[0, 0, 0, 1]], "bind": ["p2"]}}]
    path.write_text(json.dumps(obj))
    small = InvariantCatalog.load(path)
    t = {2: SymTensor.from_dense(np.diag([1.0, 2.0, 4.0]))}
    assert raw_invariants(t, small).tolist() == [7.0]


@pytest.mark.parametrize("d", [2, 3])
def test_every_entry_rotation_invariant(rng, d):
    cat = default_catalog(d, 6)
    for _ in range(5):
        t = random_tensors(rng, d, 6)
        O = random_orthogonal(rng, d, proper=bool(rng.integers(2)))
        a = raw_invariants(t, cat)
        b = raw_invariants({r: rotate(x, O) for r, x in t.items()}, cat)
        assert np.all(np.abs(a - b) <= 1e-8 * np.maximum(1.0, np.abs(a)))


def test_m_and_c_matrix_oracles(rng):
    for d in (1, 2, 3):
        t = random_tensors(rng, d, 4)
        cat = default_catalog(d, 4)
        raw = dict(zip(cat.names, raw_invariants(t, cat)))
        P3, P4 = t[3].to_dense(), t[4].to_dense()
        M = np.einsum("acd,bcd->ab", P3, P3)
        C = P4.reshape(d * d, d * d) @ P4.reshape(d * d, d * d).T
        for i in range(1, d + 1):
            ref = np.trace(np.linalg.matrix_power(M, i))
            assert abs(raw[f"trM3^{i}"] - ref) <= 1e-10 * max(1.0, abs(ref))
        for i in range(1, d * d + 1):
            ref = np.trace(np.linalg.matrix_power(C, i))
            assert abs(raw[f"trC4^{i}"] - ref) <= 1e-10 * max(1.0, abs(ref))
        assert raw["frob3"] == pytest.approx(np.sum(P3**2), rel=1e-12)
        assert raw["trace4"] == pytest.approx(np.einsum("aabb->", P4), rel=1e-12, abs=1e-12)


def test_mixed_chain_oracle(rng):
    t = random_tensors(rng, 3, 2)
    v, P = t[1].entries, t[2].to_dense()
    raw = dict(zip(default_catalog(3, 2).names, raw_invariants(t, default_catalog(3, 2))))
    for i in range(4):
        assert raw[f"mix12^{i}"] == pytest.approx(v @ np.linalg.matrix_power(P, i) @ v, rel=1e-12)
    assert raw["norm1"] == pytest.approx(v @ v, rel=1e-14)


def test_disconnected_factorization(rng):
    t = random_tensors(rng, 3, 3)
    cat = default_catalog(3, 3)
    a, b = cat.entries[cat.names.index("tr2^2")].graph, cat.entries[cat.names.index("frob3")].graph
    nv = len(a.vertices)
    joined = ContractionGraph(
        a.vertices + b.vertices,
        a.edges + tuple((i + nv, p, j + nv, q) for i, p, j, q in b.edges),
        a.bind + b.bind,
    )
    slots = {f"p{r}": x for r, x in t.items()}
    val = evaluate_graph(joined, slots)
    prod = evaluate_graph(a, slots) * evaluate_graph(b, slots)
    assert abs(val - prod) <= 1e-10 * max(1.0, abs(prod))


def test_feature_examples():
    cat = default_catalog(2, 2)
    ident = {0: SymTensor(2, 0, [1.0]), 1: SymTensor(2, 1), 2: SymTensor.from_dense(np.eye(2))}
    f = feature_vector(ident, cat)
    assert f["tr2^1"] == 2.0
    assert f["tr2^2"] == pytest.approx(sqrt(2), rel=1e-15)

    point = moments(center(Shape.from_points([[3.0, -1.0]])), 4)
    fp = feature_vector(point, default_catalog(2, 4))
    assert fp["p0"] == 1.0
    assert all(v == 0.0 for n, v in fp.as_dict().items() if n != "p0")

    fc = feature_vector(moments(prepare(cross()), 2), cat)
    assert fc["tr2^1"] == pytest.approx(2.0, rel=1e-15)


def test_feature_vector_deterministic(rng):
    s = random_shape(rng, 3)
    cat = default_catalog(3, 4)
    a = feature_vector(moments(prepare(s), 4), cat).values
    b = feature_vector(moments(prepare(s), 4), cat).values
    assert a.tobytes() == b.tobytes()


def test_missing_order_raises():
    with pytest.raises(KeyError, match="p3"):
        raw_invariants({0: SymTensor(2, 0, [1.0]), 1: SymTensor(2, 1), 2: SymTensor(2, 2)}, default_catalog(2, 3))


def test_distance_examples(rng):
    s = prepare(random_shape(rng, 2))
    cat = default_catalog(2, 4)
    f = feature_vector(moments(s, 4), cat)
    assert similarity_distance(f, f) == 0.0
    quarter = np.array([[0.0, -1.0], [1.0, 0.0]])
    g = feature_vector(moments(prepare(s.transformed(quarter)), 4), cat)
    assert similarity_distance(f, g) <= 1e-9

    c = feature_vector(moments(prepare(cross()), 4), cat)
    st = feature_vector(moments(prepare(cross().transformed(np.diag([2.0, 1.0]))), 4), cat)
    assert similarity_distance(c, st, "Linf") > 0.1
    # shared normalization keeps Tr[p] at d, so the difference shows up in Tr[p]^2
    assert st["tr2^1"] == pytest.approx(c["tr2^1"], rel=1e-14)
    assert abs(st["tr2^2"] - c["tr2^2"]) > 0.1

    with pytest.raises(ValueError, match="catalog"):
        similarity_distance(f, feature_vector(moments(s, 2), default_catalog(2, 2)))


def test_distance_is_pseudometric(rng):
    cat = default_catalog(2, 3)
    fs = [feature_vector(moments(prepare(random_shape(rng, 2)), 3), cat) for _ in range(6)]
    for norm in ("L2", "Linf"):
        for a in fs:
            assert similarity_distance(a, a, norm) == 0.0
            for b in fs:
                assert similarity_distance(a, b, norm) == similarity_distance(b, a, norm)
                for c in fs:
                    assert similarity_distance(a, c, norm) <= similarity_distance(a, b, norm) + similarity_distance(b, c, norm) + 1e-12


def test_equivalence_examples(rng):
    p = moments(prepare(random_shape(rng, 3)), 4)
    assert rotation_equivalence_test(p, p).equivalent
    q = p.rotated(random_orthogonal(rng, 3))
    rep = rotation_equivalence_test(p, q, tol=1e-8)
    assert rep.equivalent, rep.worst_error

    e = q[3].entries.copy()
    e[4] += 0.1
    bent = MomentSet(q.dim, q.order_max, {**q.tensors, 3: SymTensor(3, 3, e)}, q.centered, q.scale_normalized, q.scale)
    rep = rotation_equivalence_test(p, bent, tol=1e-8)
    assert not rep.equivalent
    assert "3" in rep.worst and not rep.worst.startswith(("tr2", "mix12", "frob4", "trC4", "trace4"))

    with pytest.raises(ValueError, match="flag"):
        rotation_equivalence_test(p, moments(center(random_shape(rng, 3)), 4))


def test_scale_coupling(rng):
    s = random_shape(rng, 3)
    cat = default_catalog(3, 4)
    f1 = feature_vector(moments(prepare(s), 4), cat)
    f2 = feature_vector(moments(prepare(s.scaled(3.7)), 4), cat)
    assert similarity_distance(f1, f2) <= 1e-9

    c = 1.9
    r1 = raw_invariants(moments(center(s), 4), cat)
    r2 = raw_invariants(moments(center(s.scaled(c)), 4), cat)
    for e, a, b in zip(cat, r1, r2):
        power = sum(e.graph.vertices)
        assert abs(b - c**power * a) <= 1e-9 * max(1.0, abs(c**power * a))


def test_mirror_image_not_distinguished(rng):
    # documented limitation: invariants are O(d) invariants, so a reflection passes
    p = moments(prepare(random_shape(rng, 3)), 4)
    mirror = p.rotated(np.diag([1.0, 1.0, -1.0]))
    assert rotation_equivalence_test(p, mirror).equivalent
