"""Acceptance criteria, one test per criterion.

Each test prints a ``ACCEPTANCE <n> PASS|FAIL: ...`` line; the lines are
repeated in the pytest terminal summary.  Run standalone with
``python3 tests/test_acceptance.py`` to get only the summary lines.

Reconstructed images for criterion 5 go to ``$SHAPEINV_ARTIFACTS`` (default
``acceptance_artifacts/`` in the repository root).  Set
``$SHAPEINV_MNIST_DIR`` to a directory of averaged-digit PGMs to include them.
"""
import glob
import json
import os
import subprocess
import sys
import tempfile
import time
from pathlib import Path

import numpy as np
from scipy.integrate import trapezoid

from shapeinv import fixtures
from shapeinv.align import AlignConfig, Rotation, grid_oracle_2d, optimize
from shapeinv.hermite import encode, hermite_functions, l2_error, reconstruct_shape_grid
from shapeinv.invariants import default_catalog, feature_vector, raw_invariants
from shapeinv.io import grid_to_image, image_to_grid, load_grid, write_pgm
from shapeinv.shape_model import Shape, moments, prepare
from shapeinv.symtensor import SymTensor, contract_dense_bruteforce, evaluate_graph, packed_size, trace_power

ROOT = Path(__file__).resolve().parents[1]
RESULTS = []


def report(n, ok, detail):
    line = f"ACCEPTANCE {n} {'PASS' if ok else 'FAIL'}: {detail}"
    RESULTS.append(line)
    print(line)
    return ok


def random_orthogonal(rng, d):
    # Haar rotation, reflected half the time: invariants hold over O(d)
    O = Rotation.random(d, rng).matrix
    if rng.uniform() < 0.5:
        O = O @ np.diag([1.0] * (d - 1) + [-1.0])
    return O


def test_1_rotation_invariance():
    rng = np.random.default_rng(101)
    cats = {d: default_catalog(d, 4) for d in (2, 3)}
    t0 = time.perf_counter()
    worst = 0.0
    for k in range(100):
        d = 2 + k % 2
        s = fixtures.random_shape(rng, d, 5, 50)
        O = random_orthogonal(rng, d)
        a = raw_invariants(moments(prepare(s), 4), cats[d])
        b = raw_invariants(moments(prepare(s.transformed(O)), 4), cats[d])
        err = np.abs(a - b) / np.maximum(np.abs(a), 1e-300)
        err[(a == 0) & (b == 0)] = 0.0
        worst = max(worst, float(err.max()))
    dt = time.perf_counter() - t0
    ok = worst <= 1e-8 and dt < 10
    assert report(1, ok, f"rotation invariance, 100 shapes, worst relative error {worst:.2e} (tol 1e-8), {dt:.1f}s (limit 10s)")


def _matrix_oracle(name, tensors):
    # explicit M / C matrices for graphs too large to enumerate
    i = int(name.split("^")[1])
    if name.startswith("trC4"):
        P = tensors["p4"].to_dense()
        n = P.shape[0] ** 2
        C = P.reshape(n, n) @ P.reshape(n, n).T
        return float(np.trace(np.linalg.matrix_power(C, i)))
    P = tensors["p3"].to_dense()
    M = np.einsum("acd,bcd->ab", P, P)
    return float(np.trace(np.linalg.matrix_power(M, i)))


def test_2_oracle_equivalence():
    rng = np.random.default_rng(202)
    t0 = time.perf_counter()
    worst, n_brute, n_matrix = 0.0, 0, 0
    for d in (1, 2, 3):
        for entry in default_catalog(d, 4):
            g = entry.graph
            for _ in range(20):
                tensors = {f"p{r}": SymTensor(d, r, rng.normal(size=packed_size(d, r))) for r in range(5)}
                val = evaluate_graph(g, tensors)
                if d ** g.n_edges <= 2_000_000:
                    ref = contract_dense_bruteforce(g, tensors)
                    n_brute += 1
                else:
                    ref = _matrix_oracle(entry.name, tensors)
                    n_matrix += 1
                worst = max(worst, abs(val - ref) / max(abs(ref), 1e-300) if ref or val else 0.0)
    dt = time.perf_counter() - t0
    ok = worst <= 1e-10 and dt < 30
    assert report(
        2, ok,
        f"packed vs dense oracle, {n_brute} brute-force + {n_matrix} explicit-matrix cases, "
        f"worst relative error {worst:.2e} (tol 1e-10), {dt:.1f}s (limit 30s)",
    )


def test_3_trace_identity():
    rng = np.random.default_rng(303)
    worst = 0.0
    for _ in range(100):
        d = int(rng.integers(1, 7))
        p = SymTensor.symmetrize(rng.normal(size=(d, d)))
        lam = np.linalg.eigvalsh(p.to_dense())
        for i in range(1, d + 1):
            ref = float(np.sum(lam**i))
            worst = max(worst, abs(trace_power(p, i) - ref) / max(abs(ref), 1e-300))
    assert report(3, worst <= 1e-9, f"Tr(P^i) vs eigenvalues, 100 matrices, worst relative error {worst:.2e} (tol 1e-9)")


def test_4_hermite_orthonormality():
    x = np.linspace(-12.0, 12.0, 24001)  # step 1e-3
    f = hermite_functions(20, x)
    gram = trapezoid(f[:, None, :] * f[None, :, :], x, axis=2)
    worst = float(np.max(np.abs(gram - np.eye(21))))
    assert report(4, worst <= 1e-8, f"Hermite orthonormality i,j <= 20, step 1e-3, max |delta - value| {worst:.2e} (tol 1e-8)")


def _fig2_inputs():
    shapes = {kind: Shape.from_grid(image_to_grid(fixtures.blob_image(kind))) for kind in fixtures.BLOB_KINDS}
    mnist = os.environ.get("SHAPEINV_MNIST_DIR")
    if mnist:
        for path in sorted(glob.glob(os.path.join(mnist, "*.pgm"))):
            shapes["mnist_" + Path(path).stem] = load_grid(path)
    return shapes


def test_5_reconstruction_monotone():
    out = Path(os.environ.get("SHAPEINV_ARTIFACTS", ROOT / "acceptance_artifacts"))
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    worst_rise, plain_rise, lines = 0.0, {}, []
    for name, shape in _fig2_inputs().items():
        s = prepare(shape)
        write_pgm(out / f"{name}_source.pgm", grid_to_image(s.density_values()))
        errs, plain = [], []
        for m in range(21):
            c = encode(s, m, orthogonalize=True)
            errs.append(l2_error(c, s))
            plain.append(l2_error(encode(s, m), s))
            if m in (0, 2, 5, 10, 20):
                write_pgm(out / f"{name}_m{m:02d}.pgm", grid_to_image(reconstruct_shape_grid(c, s)))
        rise = max(0.0, float(np.max(np.diff(errs))))
        worst_rise = max(worst_rise, rise)
        plain_rise[name] = max(0.0, float(np.max(np.diff(plain))))
        lines.append(f"{name}: L2 {errs[0]:.4f} -> {errs[-1]:.4f}")
    dt = time.perf_counter() - t0
    ok = worst_rise <= 1e-6 and dt < 60
    print("  " + "; ".join(lines))
    print("  plain lattice sums (not orthogonalized), largest increase per fixture: "
          + ", ".join(f"{k} {v:.1e}" for k, v in plain_rise.items()))
    assert report(
        5, ok,
        f"L2 error non-increasing in m=0..20 (orthogonalized lattice fit), largest increase {worst_rise:.1e} "
        f"(slack 1e-6), {dt:.1f}s (limit 60s), images in {out}",
    )


def test_6_translation_scale_invariance():
    rng = np.random.default_rng(606)
    worst = 0.0
    cats = {d: default_catalog(d, 4) for d in (2, 3)}
    for k in range(50):
        d = 2 + k % 2
        s = fixtures.random_shape(rng, d, 5, 50)
        t = rng.normal(scale=10.0, size=d)
        c = float(rng.uniform(0.1, 10.0))
        f = [feature_vector(moments(prepare(x), 4), cats[d]).values for x in (s, s.translated(t), s.scaled(c))]
        worst = max(worst, float(np.max(np.abs(f[1] - f[0]))), float(np.max(np.abs(f[2] - f[0]))))
    assert report(6, worst <= 1e-9, f"features of s, s+t, c*s, 50 shapes, max difference {worst:.2e} (tol 1e-9)")


def test_7_alignment_recovery():
    rng = np.random.default_rng(707)
    t0 = time.perf_counter()
    worst = {2: 0.0, 3: 0.0}
    oracle_gap = -np.inf
    for d in (2, 3):
        for k in range(50):
            p = moments(prepare(fixtures.random_shape(rng, d, 5, 50)), 3)
            q = p.rotated(Rotation.random(d, rng).matrix)
            res = optimize(p, q, AlignConfig(seed=k))
            worst[d] = max(worst[d], res.residual)
            if d == 2:
                _, oracle = grid_oracle_2d(p, q, 3600)
                oracle_gap = max(oracle_gap, res.residual - oracle)
    dt = time.perf_counter() - t0
    ok = max(worst.values()) < 1e-6 and oracle_gap <= 1e-8 and dt < 120
    assert report(
        7, ok,
        f"alignment, 50 pairs each in 2-D/3-D, worst residual {worst[2]:.1e}/{worst[3]:.1e} (tol 1e-6), "
        f"max(optimized - grid oracle) {oracle_gap:.1e} (tol 1e-8), {dt:.1f}s (limit 120s)",
    )


def test_8_discrimination():
    rng = np.random.default_rng(808)
    suite = {"cross": fixtures.cross(), "asymmetric": fixtures.asymmetric_2d()}
    suite["molecule"] = Shape.from_points(fixtures.molecule_3d()[1])
    for kind in fixtures.BLOB_KINDS:
        suite[kind] = Shape.from_grid(image_to_grid(fixtures.blob_image(kind)))
    for k in range(5):
        suite[f"random{k}"] = fixtures.random_shape(rng, 2 + k % 2, 5, 50)
    dists = {}
    for name, s in suite.items():
        cat = default_catalog(s.dim, 4)
        stretch = np.diag([2.0] + [1.0] * (s.dim - 1))
        a = feature_vector(moments(prepare(s), 4), cat).values
        b = feature_vector(moments(prepare(s.transformed(stretch)), 4), cat).values
        dists[name] = float(np.linalg.norm(a - b))
    low = min(dists, key=dists.get)
    ok = dists[low] > 1e-2
    assert report(8, ok, f"2:1 stretch distance over {len(suite)} fixtures, smallest {dists[low]:.3f} ({low}) (must exceed 1e-2)")


def _cli(args, cwd):
    return subprocess.run([sys.executable, "-m", "shapeinv", *args], cwd=cwd, capture_output=True, check=True).stdout


def test_9_determinism():
    mismatched = []
    with tempfile.TemporaryDirectory() as tmp:
        runs = []
        for k in range(2):
            d = Path(tmp) / f"run{k}"
            _cli(["fixtures", str(d / "fx"), "--seed", "3"], tmp)
            fx = d / "fx"
            outs = {p.name: p.read_bytes() for p in sorted(fx.iterdir())}
            cmds = {
                "moments": ["moments", str(fx / "shape.csv")],
                "invariants": ["invariants", str(fx / "mol.xyz"), "--weights", "mass"],
                "encode": ["encode", str(fx / "blob.pgm"), "--order", "10"],
                "compare": ["compare", str(fx / "shape.csv"), str(fx / "shape_stretch.csv")],
                "align2": ["align", str(fx / "shape.csv"), str(fx / "shape_rot.csv"), "--verify", "--seed", "9"],
                "align3": ["align", str(fx / "mol.xyz"), str(fx / "mol_rot.xyz"), "--seed", "9"],
            }
            for key, args in cmds.items():
                # paths differ between runs, so compare with the run directory blanked out
                outs[key] = _cli(args, tmp).replace(str(d).encode(), b"RUN")
            enc = d / "c.json"
            _cli(["encode", str(fx / "ring.pgm"), "--order", "8", "--out", str(enc)], tmp)
            _cli(["reconstruct", str(enc), "--like", str(fx / "ring.pgm"), "--image", str(d / "r.pgm"), "--out", str(d / "r.json")], tmp)
            outs["reconstruct.pgm"] = (d / "r.pgm").read_bytes()
            outs["reconstruct.json"] = (d / "r.json").read_bytes().replace(str(d).encode(), b"RUN")
            runs.append(outs)
        mismatched = [k for k in runs[0] if runs[0][k] != runs[1][k]]
        n = len(runs[0])
        parsed = json.loads(runs[0]["align3"])
    ok = not mismatched and parsed["config"]["seed"] == 9
    detail = f"{n} CLI outputs byte-identical across two processes" if ok else f"differing outputs: {mismatched}"
    assert report(9, ok, detail)


if __name__ == "__main__":
    import pytest

    code = pytest.main([__file__, "-q", "-p", "no:cacheprovider"])
    print("\n".join(RESULTS))
    sys.exit(code)
