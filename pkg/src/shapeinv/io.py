"""File formats: point CSV, XYZ molecules, PGM images, and JSON output."""
from __future__ import annotations

import json
import os
import re

import numpy as np

from .shape_model import Shape

FORMAT_VERSION = "shapeinv/1"


class ParseError(ValueError):
    """Malformed input file.  ``line`` is 1-based when known."""

    def __init__(self, msg, path=None, line=None):
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + msg)
        self.path = path
        self.line = line


# Standard atomic weights for elements common in organic/biomolecules.
ATOMIC_MASS = {
    "H": 1.008, "He": 4.0026, "Li": 6.94, "Be": 9.0122, "B": 10.81, "C": 12.011,
    "N": 14.007, "O": 15.999, "F": 18.998, "Ne": 20.180, "Na": 22.990, "Mg": 24.305,
    "Al": 26.982, "Si": 28.085, "P": 30.974, "S": 32.06, "Cl": 35.45, "Ar": 39.948,
    "K": 39.098, "Ca": 40.078, "Mn": 54.938, "Fe": 55.845, "Co": 58.933, "Ni": 58.693,
    "Cu": 63.546, "Zn": 65.38, "Se": 78.971, "Br": 79.904, "I": 126.90,
}

_WEIGHT_NAMES = {"w", "weight", "weights", "mass"}


def _is_number(tok: str) -> bool:
    try:
        float(tok)
    except ValueError:
        return False
    return True


def read_csv_points(path, dim: int | None = None) -> Shape:
    """One point per line, comma separated, optional trailing weight column.

    Whether the last column is a weight is decided by, in order: a header
    naming it (``w``, ``weight``, ``mass``); ``dim`` when given (``dim + 1``
    columns means weighted); otherwise every column is a coordinate.
    """
    rows = []
    header = None
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            toks = [t.strip() for t in line.split(",")]
            if header is None and not rows and not _is_number(toks[0]):
                header = [t.lower() for t in toks]
                continue
            try:
                vals = [float(t) for t in toks]
            except ValueError:
                raise ParseError(f"non-numeric value in {line!r}", path, lineno) from None
            if rows and len(vals) != len(rows[0][1]):
                raise ParseError(
                    f"inconsistent dimension: expected {len(rows[0][1])} columns, got {len(vals)}", path, lineno
                )
            rows.append((lineno, vals))
    if not rows:
        raise ParseError("no data rows", path)
    ncol = len(rows[0][1])
    if header is not None and len(header) != ncol:
        raise ParseError(f"header has {len(header)} columns, data has {ncol}", path, 1)
    if header is not None and header[-1] in _WEIGHT_NAMES:
        weighted = True
    elif dim is not None:
        if ncol not in (dim, dim + 1):
            raise ParseError(f"expected {dim} or {dim + 1} columns for dim={dim}, got {ncol}", path, rows[0][0])
        weighted = ncol == dim + 1
    else:
        weighted = False
    data = np.array([v for _, v in rows])
    if weighted:
        pts, w = data[:, :-1], data[:, -1]
        bad = np.flatnonzero(w < 0)
        if bad.size:
            raise ParseError("negative weight", path, rows[bad[0]][0])
    else:
        pts, w = data, np.ones(len(data))
    if pts.shape[1] == 0:
        raise ParseError("no coordinate columns", path)
    return Shape.from_points(pts, w)


def read_xyz(path, weights: str = "unit") -> Shape:
    """Standard XYZ: atom count, comment line, then ``element x y z`` rows.

    ``weights`` is ``"unit"`` (every atom 1.0) or ``"mass"`` (atomic masses).
    """
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ParseError("empty file", path, 1)
    try:
        n = int(lines[0].split()[0])
    except (ValueError, IndexError):
        raise ParseError("first line must be the atom count", path, 1) from None
    if len(lines) < n + 2:
        raise ParseError(f"expected {n} atoms, file has {max(0, len(lines) - 2)} atom lines", path, len(lines))
    pts, w = [], []
    for k in range(n):
        lineno = k + 3
        toks = lines[k + 2].split()
        if len(toks) < 4:
            raise ParseError("atom line needs element and 3 coordinates", path, lineno)
        el = toks[0]
        try:
            pts.append([float(t) for t in toks[1:4]])
        except ValueError:
            raise ParseError(f"bad coordinates in {lines[k + 2]!r}", path, lineno) from None
        if weights == "mass":
            sym = el.capitalize() if el.isalpha() else re.sub(r"[^A-Za-z]", "", el).capitalize()
            if sym not in ATOMIC_MASS:
                raise ParseError(f"no atomic mass for element {el!r}", path, lineno)
            w.append(ATOMIC_MASS[sym])
        elif weights == "unit":
            w.append(1.0)
        else:
            raise ValueError(f"unknown weighting {weights!r}")
    return Shape.from_points(np.array(pts), np.array(w))


def load_points(path, format: str | None = None, dim: int | None = None, weights: str = "unit") -> Shape:
    fmt = format or os.path.splitext(str(path))[1].lstrip(".").lower()
    if fmt == "csv":
        return read_csv_points(path, dim=dim)
    if fmt == "xyz":
        return read_xyz(path, weights=weights)
    raise ValueError(f"unsupported point format {fmt!r}")


def _pgm_tokens(data: bytes, path):
    # yields (token, end offset), skipping '#' comments
    pos = 0
    n = len(data)
    while True:
        while pos < n and (data[pos:pos + 1].isspace() or data[pos:pos + 1] == b"#"):
            if data[pos:pos + 1] == b"#":
                while pos < n and data[pos:pos + 1] not in (b"\n", b"\r"):
                    pos += 1
            else:
                pos += 1
        if pos >= n:
            raise ParseError("truncated PGM header", path)
        start = pos
        while pos < n and not data[pos:pos + 1].isspace() and data[pos:pos + 1] != b"#":
            pos += 1
        yield data[start:pos], pos


def read_pgm(path) -> np.ndarray:
    """Read a P2 or P5 PGM into a ``(rows, cols)`` float array of raw gray levels."""
    with open(path, "rb") as fh:
        data = fh.read()
    magic = data[:2]
    if magic not in (b"P2", b"P5"):
        raise ParseError(f"not a P2/P5 PGM (magic {magic!r})", path, 1)
    toks = _pgm_tokens(data[2:], path)
    try:
        width = int(next(toks)[0])
        height = int(next(toks)[0])
        tok, end = next(toks)
        maxval = int(tok)
    except ValueError:
        raise ParseError("malformed PGM header", path, 1) from None
    if width <= 0 or height <= 0 or not 0 < maxval <= 65535:
        raise ParseError(f"invalid PGM header: {width}x{height}, maxval {maxval}", path, 1)
    body = data[2 + end:]
    if magic == b"P5":
        body = body[1:]  # single whitespace after maxval
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
        need = width * height * dtype.itemsize
        if len(body) < need:
            raise ParseError(f"expected {need} bytes of pixel data, got {len(body)}", path)
        img = np.frombuffer(body[:need], dtype=dtype).astype(float)
    else:
        text = re.sub(rb"#[^\n]*", b"", body)
        try:
            img = np.array([float(t) for t in text.split()])
        except ValueError:
            raise ParseError("non-numeric pixel value", path) from None
        if img.size != width * height:
            raise ParseError(f"expected {width * height} pixels, got {img.size}", path)
    if np.any(img > maxval):
        raise ParseError("pixel value exceeds maxval", path)
    return img.reshape(height, width)


def image_to_grid(img) -> np.ndarray:
    """Reorder ``img[row, col]`` so axis 0 is x = col and axis 1 is y = rows-1-row."""
    return np.asarray(img, dtype=float)[::-1, :].T


def grid_to_image(values) -> np.ndarray:
    return np.asarray(values)[:, ::-1].T


def load_grid(path, format: str = "pgm") -> Shape:
    """Image as a 2-D density; pixel ``(row, col)`` sits at ``(col, rows-1-row)``."""
    if format != "pgm":
        raise ValueError(f"unsupported grid format {format!r}")
    img = read_pgm(path)
    if not np.any(img > 0):
        raise ParseError("image is all zero", path)
    return Shape.from_grid(image_to_grid(img))


def load_shape(path, dim: int | None = None, weights: str = "unit") -> Shape:
    ext = os.path.splitext(str(path))[1].lstrip(".").lower()
    if ext == "pgm":
        return load_grid(path)
    return load_points(path, ext, dim=dim, weights=weights)


def write_pgm(path, img, maxval: int = 255, gamma: float = 1.0, clip: bool = True, vmax: float | None = None):
    """Write an ASCII (P2) PGM, scaling ``img`` so that ``vmax`` maps to ``maxval``."""
    a = np.asarray(img, dtype=float)
    if clip:
        a = np.clip(a, 0.0, None)
    top = float(np.max(np.abs(a))) if vmax is None else float(vmax)
    if top > 0:
        a = np.clip(a / top, 0.0, 1.0) ** (1.0 / gamma)
    else:
        a = np.zeros_like(a)
    pix = np.rint(a * maxval).astype(int)
    rows, cols = pix.shape
    with open(path, "w") as fh:
        fh.write(f"P2\n{cols} {rows}\n{maxval}\n")
        for r in pix:
            fh.write(" ".join(str(v) for v in r) + "\n")


def write_points_csv(path, shape: Shape, weights: bool = True):
    """Write points (and a ``w`` column when ``weights``) with a header line."""
    with open(path, "w") as fh:
        cols = [f"x{k}" for k in range(shape.dim)] + (["w"] if weights else [])
        fh.write(",".join(cols) + "\n")
        for x, w in zip(shape.points, shape.weights):
            vals = list(x) + ([w] if weights else [])
            fh.write(",".join(repr(float(v)) for v in vals) + "\n")


def dumps(obj) -> str:
    """Deterministic JSON: sorted keys, shortest round-trip float repr."""
    return json.dumps(_plain(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj
