"""Command-line front end.

Exit codes: 0 success, 2 parse error, 3 degenerate shape, 4 dimension
mismatch.
"""
from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import fixtures, hermite
from .align import AlignConfig, grid_oracle_2d, optimize
from .invariants import InvariantCatalog, default_catalog, feature_vector, rotation_equivalence_test, similarity_distance
from .io import FORMAT_VERSION, ParseError, dumps, grid_to_image, load_shape, write_pgm, write_points_csv
from .shape_model import DegenerateShapeError, moments, prepare

EXIT_PARSE = 2
EXIT_DEGENERATE = 3
EXIT_MISMATCH = 4


class DimensionMismatch(ValueError):
    pass


def _scale_mode(text: str):
    if text in ("normalize", "off"):
        return text
    if text.startswith("fixed:"):
        val = float(text.split(":", 1)[1])
        if val <= 0:
            raise argparse.ArgumentTypeError("fixed scale must be positive")
        return val
    raise argparse.ArgumentTypeError("scale must be normalize, off or fixed:SIGMA")


def _config(args) -> dict:
    keys = ("dim", "order", "scale", "catalog", "tol", "seed", "norm", "weights", "orthogonalize", "restarts")
    cfg = {k: getattr(args, k) for k in keys if hasattr(args, k)}
    if isinstance(cfg.get("scale"), float):
        cfg["scale"] = f"fixed:{cfg['scale']!r}"
    return cfg


def _emit(args, payload: dict):
    payload = dict(payload)
    payload["format"] = FORMAT_VERSION
    payload["command"] = args.command
    payload["config"] = _config(args)
    text = dumps(payload)
    if getattr(args, "out", None):
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _load(args, path):
    shape = load_shape(path, dim=args.dim, weights=args.weights)
    if args.dim is not None and shape.dim != args.dim:
        raise DimensionMismatch(f"{path}: shape has dim {shape.dim}, --dim is {args.dim}")
    return shape


def _catalog(args, d: int):
    if args.catalog in (None, "default"):
        return default_catalog(d, max(args.order, 2))
    return InvariantCatalog.load(args.catalog)


def _moments(args, shape):
    return moments(prepare(shape, args.scale), args.order)


def cmd_moments(args):
    ms = _moments(args, _load(args, args.input))
    _emit(args, {"input": args.input, "moments": ms.to_json()})


def cmd_invariants(args):
    shape = _load(args, args.input)
    fv = feature_vector(_moments(args, shape), _catalog(args, shape.dim))
    if args.format == "csv":
        lines = ["name,value"] + [f"{n},{v!r}" for n, v in zip(fv.names, fv.values.tolist())]
        text = "\n".join(lines) + "\n"
        if args.out:
            with open(args.out, "w") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
        return
    _emit(args, {"input": args.input, "features": fv.to_json()})


def cmd_encode(args):
    shape = _load(args, args.input)
    s = prepare(shape, args.scale)
    coeffs = hermite.encode(s, args.order, orthogonalize=args.orthogonalize)
    payload = {"input": args.input, "coeffs": coeffs.to_json()}
    if s.grid is not None:
        payload["grid_shape"] = list(s.grid.shape)
        payload["l2_error"] = hermite.l2_error(coeffs, s)
    _emit(args, payload)


def cmd_reconstruct(args):
    import json

    with open(args.coeffs) as fh:
        obj = json.load(fh)
    coeffs = hermite.HermiteCoeffs.from_json(obj.get("coeffs", obj))
    if coeffs.dim != 2:
        raise DimensionMismatch("image reconstruction needs 2-D coefficients")
    payload = {"coeffs": args.coeffs}
    if args.like:
        src = _load(args, args.like)
        if src.grid is None:
            raise ParseError("--like must be an image", args.like)
        cols, rows = src.grid.shape
    else:
        cols, rows = args.size
    # pixel (row, col) sits at (col, rows-1-row) before centering and scaling
    origin = (np.zeros(2) - coeffs.center) / coeffs.scale
    spacing = np.full(2, 1.0 / coeffs.scale)
    field = hermite.reconstruct(coeffs, origin, spacing, (cols, rows))
    if args.like:
        ref = (src.weights / src.grid.cell_volume).reshape(src.grid.shape) * coeffs.scale**2
        diff = field - ref
        payload["l2_error"] = float(np.sqrt(np.sum(diff * diff) / coeffs.scale**2))
    payload["min"] = float(field.min())
    payload["max"] = float(field.max())
    if args.image:
        write_pgm(args.image, grid_to_image(field), gamma=args.gamma, clip=not args.no_clip)
        payload["image"] = args.image
    _emit(args, payload)


def _load_pair(args):
    a, b = _load(args, args.input_a), _load(args, args.input_b)
    if a.dim != b.dim:
        raise DimensionMismatch(f"dimension mismatch: {a.dim} vs {b.dim}")
    return a, b


def cmd_compare(args):
    a, b = _load_pair(args)
    ma, mb = _moments(args, a), _moments(args, b)
    cat = _catalog(args, a.dim)
    fa, fb = feature_vector(ma, cat), feature_vector(mb, cat)
    report = rotation_equivalence_test(ma, mb, tol=args.tol, catalog=cat)
    _emit(args, {
        "inputs": [args.input_a, args.input_b],
        "features_a": fa.to_json(),
        "features_b": fb.to_json(),
        "deltas": dict(zip(fa.names, (fb.values - fa.values).tolist())),
        "distance": similarity_distance(fa, fb, args.norm),
        "verdict": report.equivalent,
        "worst_invariant": report.worst,
        "worst_error": report.worst_error,
    })


def cmd_align(args):
    a, b = _load_pair(args)
    ma, mb = _moments(args, a), _moments(args, b)
    cfg = AlignConfig(restarts=args.restarts, seed=args.seed, reflect=args.reflect)
    res = optimize(ma, mb, cfg)
    payload = {"inputs": [args.input_a, args.input_b], "optimized": res.to_json()}
    if args.verify:
        if a.dim != 2:
            raise DimensionMismatch("--verify grid oracle needs 2-D inputs")
        angle, resid = grid_oracle_2d(ma, mb, args.n_angles)
        payload["oracle"] = {"angle": angle, "residual": resid, "n_angles": args.n_angles}
        payload["oracle_bound_ok"] = bool(res.residual <= resid + 1e-8)
    _emit(args, payload)


def cmd_fixtures(args):
    out = args.out_dir
    os.makedirs(out, exist_ok=True)
    written = []

    def path(name):
        p = os.path.join(out, name)
        written.append(p)
        return p

    write_points_csv(path("cross.csv"), fixtures.cross(), weights=False)
    s = fixtures.asymmetric_2d()
    write_points_csv(path("shape.csv"), s)
    write_points_csv(path("shape_rot.csv"), s.transformed(fixtures.rotation_2d(np.deg2rad(37.0))))
    write_points_csv(path("shape_stretch.csv"), s.transformed(np.diag([2.0, 1.0])))
    el, xyz = fixtures.molecule_3d()
    rng = np.random.default_rng(args.seed)
    from .align import Rotation

    R = Rotation.random(3, rng).matrix
    for name, coords in (("mol.xyz", xyz), ("mol_rot.xyz", xyz @ R.T + np.array([1.0, -2.0, 0.5]))):
        with open(path(name), "w") as fh:
            fh.write(f"{len(el)}\nfixture\n")
            for e, c in zip(el, coords):
                fh.write(f"{e} {float(c[0])!r} {float(c[1])!r} {float(c[2])!r}\n")
    for kind in fixtures.BLOB_KINDS:
        write_pgm(path(f"{kind}.pgm"), fixtures.blob_image(kind), vmax=1.0)
    _emit(args, {"written": written})


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="shapeinv", description="Rotation-invariant shape descriptors.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, order=4):
        p.add_argument("--dim", type=int, default=None, help="expected dimension (also decides CSV weight column)")
        p.add_argument("--order", type=int, default=order, help="max moment order / Hermite degree")
        p.add_argument("--scale", type=_scale_mode, default="normalize", help="normalize | off | fixed:SIGMA")
        p.add_argument("--weights", choices=("unit", "mass"), default="unit", help="XYZ atom weighting")
        p.add_argument("--out", default=None, help="write output here instead of stdout")

    p = sub.add_parser("moments", help="centered moment tensors")
    p.add_argument("input")
    common(p)
    p.set_defaults(func=cmd_moments)

    p = sub.add_parser("invariants", help="rotation-invariant feature vector")
    p.add_argument("input")
    common(p)
    p.add_argument("--catalog", default="default")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.set_defaults(func=cmd_invariants)

    p = sub.add_parser("encode", help="Hermite-Gaussian coefficients")
    p.add_argument("input")
    common(p, order=8)
    p.add_argument("--orthogonalize", action="store_true", help="discrete least-squares fit on the lattice")
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("reconstruct", help="render coefficients on an image lattice")
    p.add_argument("coeffs", help="JSON written by encode")
    common(p)
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--like", help="source PGM defining the lattice (also enables l2_error)")
    g.add_argument("--size", type=int, nargs=2, metavar=("W", "H"))
    p.add_argument("--image", help="output PGM path")
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--no-clip", action="store_true", help="scale by |max| without clipping negatives first")
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("compare", help="compare two shapes modulo rotation")
    p.add_argument("input_a")
    p.add_argument("input_b")
    common(p)
    p.add_argument("--catalog", default="default")
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--norm", choices=("L2", "Linf"), default="L2")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("align", help="explicit rotation alignment")
    p.add_argument("input_a")
    p.add_argument("input_b")
    common(p, order=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--restarts", type=int, default=None)
    p.add_argument("--reflect", action="store_true", help="also try one reflected start")
    p.add_argument("--verify", action="store_true", help="2-D only: also run the angle grid oracle")
    p.add_argument("--n-angles", type=int, default=3600)
    p.set_defaults(func=cmd_align)

    p = sub.add_parser("fixtures", help="write synthetic test shapes")
    p.add_argument("out_dir")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_fixtures)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except (ParseError, FileNotFoundError, UnicodeDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except DegenerateShapeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except DimensionMismatch as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISMATCH
    return 0


if __name__ == "__main__":
    sys.exit(main())
