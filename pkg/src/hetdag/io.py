"""File formats: CSV matrices, ``i j`` edge lists, JSON documents."""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np


class ParseError(ValueError):
    """Malformed input file; the message carries the path and location."""


def _parse_row(cells, path, lineno):
    out = []
    for col, cell in enumerate(cells, start=1):
        try:
            v = float(cell)
        except ValueError:
            raise ParseError(f"{path}: row {lineno}, column {col}: cannot parse {cell.strip()!r} as a number") from None
        if not math.isfinite(v):
            raise ParseError(f"{path}: row {lineno}, column {col}: non-finite value {cell.strip()!r}")
        out.append(v)
    return out


def _is_header(cells):
    try:
        [float(c) for c in cells]
    except ValueError:
        return True
    return False


def read_matrix(path):
    """Read a numeric CSV with an optional header row.

    Returns
    -------
    X : ndarray of shape (rows, cols)
    header : list of str or None
    """
    path = Path(path)
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise OSError(f"{path}: {exc.strerror}") from exc
    header, rows, width = None, [], None
    with fh:
        for lineno, cells in enumerate(csv.reader(fh), start=1):
            if not cells or all(not c.strip() for c in cells):
                continue
            if header is None and not rows and _is_header(cells):
                header = [c.strip() for c in cells]
                width = len(cells)
                continue
            if width is None:
                width = len(cells)
            elif len(cells) != width:
                raise ParseError(f"{path}: row {lineno}: expected {width} columns, found {len(cells)}")
            rows.append(_parse_row(cells, path, lineno))
    if not rows:
        raise ParseError(f"{path}: no data rows")
    return np.array(rows, dtype=float), header


def format_float(v):
    return "%.17g" % v


def write_matrix(path, X, header=None):
    """Write with 17 significant digits so values survive a round trip bit for bit."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    lines = []
    if header is not None:
        lines.append(",".join(header))
    lines.extend(",".join(format_float(v) for v in row) for row in X)
    Path(path).write_text("\n".join(lines) + "\n")


def write_edges(path, B):
    """One ``i j`` line (0-indexed) per nonzero ``B[i, j]``, row-major."""
    rows, cols = np.nonzero(np.asarray(B))
    Path(path).write_text("".join(f"{i} {j}\n" for i, j in zip(rows, cols)))


def read_edges(path, n_nodes=None):
    """Parse an edge list into a binary adjacency.

    Without ``n_nodes`` the size is one more than the largest index seen.
    """
    path = Path(path)
    pairs = []
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ParseError(f"{path}: line {lineno}: expected 'i j', got {line!r}")
        try:
            i, j = int(parts[0]), int(parts[1])
        except ValueError:
            raise ParseError(f"{path}: line {lineno}: node indices must be integers, got {line!r}") from None
        if i < 0 or j < 0:
            raise ParseError(f"{path}: line {lineno}: negative node index")
        pairs.append((i, j))
    top = max((max(p) for p in pairs), default=-1) + 1
    N = top if n_nodes is None else n_nodes
    if top > N:
        raise ParseError(f"{path}: node index {top - 1} out of range for {N} nodes")
    B = np.zeros((N, N), dtype=int)
    for i, j in pairs:
        B[i, j] = 1
    return B


def write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def read_json(path):
    path = Path(path)
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
