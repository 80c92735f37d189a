"""CSV and DOT file formats.

Trajectory CSV: header ``t,y1,...,yN`` and one row per time step (states use
``x1..xN``).  Matrix CSV: header ``x1,...,xN`` and one row per target
series n, so row n / column m holds entry (n, m).  Floats are written with
17 significant digits, which round-trips doubles exactly.  All writes go to
a temporary file that is renamed into place.
"""

from __future__ import annotations

import csv
import io
import os
import tempfile
from pathlib import Path

import numpy as np

FLOAT_FMT = ".17g"


class DataFormatError(ValueError):
    """Malformed input file; ``line`` is the 1-based line number when known."""

    def __init__(self, message: str, path=None, line: int | None = None):
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)
        self.path = path
        self.line = line


def atomic_write_text(path, text: str) -> None:
    path = Path(path)
    directory = path.parent if str(path.parent) else Path(".")
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except FileNotFoundError:
            pass
        raise


def _fmt(x: float) -> str:
    return format(float(x), FLOAT_FMT)


def _table_text(header: list[str], rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(row)
    return buf.getvalue()


def write_series_csv(path, values, prefix: str = "y") -> None:
    """Write a (K, N) array as ``t,<prefix>1..<prefix>N`` with t = 1..K."""
    values = np.atleast_2d(np.asarray(values, dtype=float))
    header = ["t"] + [f"{prefix}{i + 1}" for i in range(values.shape[1])]
    rows = ([str(k + 1)] + [_fmt(v) for v in row] for k, row in enumerate(values))
    atomic_write_text(path, _table_text(header, rows))


def _read_rows(path):
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except UnicodeDecodeError as exc:
        raise DataFormatError("file is not valid UTF-8", path) from exc
    if not rows:
        raise DataFormatError("file is empty, a header row is required", path, 1)
    return rows


def _parse_body(path, rows, width: int, first_line: int = 2) -> np.ndarray:
    out = np.empty((len(rows), width))
    for i, row in enumerate(rows):
        line = first_line + i
        if len(row) != width:
            raise DataFormatError(f"expected {width} fields, found {len(row)}", path, line)
        try:
            out[i] = [float(v) for v in row]
        except ValueError as exc:
            raise DataFormatError(f"could not parse number ({exc})", path, line) from None
    return out


def read_series_csv(path) -> np.ndarray:
    """Read a trajectory CSV, returning the (K, N) value columns (``t`` dropped)."""
    rows = _read_rows(path)
    header, body = rows[0], [r for r in rows[1:] if r]
    if not header or header[0].strip() != "t":
        raise DataFormatError("first header column must be 't'", path, 1)
    if len(header) < 2:
        raise DataFormatError("no data columns", path, 1)
    if not body:
        raise DataFormatError("no data rows", path, 2)
    table = _parse_body(path, body, len(header))
    return table[:, 1:]


def write_matrix_csv(path, M, prefix: str = "x", integer: bool = False) -> None:
    M = np.atleast_2d(np.asarray(M))
    header = [f"{prefix}{i + 1}" for i in range(M.shape[1])]
    if integer:
        rows = ([str(int(v)) for v in row] for row in M)
    else:
        rows = ([_fmt(v) for v in row] for row in M.astype(float))
    atomic_write_text(path, _table_text(header, rows))


def read_matrix_csv(path) -> np.ndarray:
    rows = _read_rows(path)
    header, body = rows[0], [r for r in rows[1:] if r]
    if not body:
        raise DataFormatError("no data rows", path, 2)
    M = _parse_body(path, body, len(header))
    if M.shape[0] != M.shape[1]:
        raise DataFormatError(f"matrix must be square, got {M.shape}", path)
    return M


def to_dot(adjacency, weights=None, names=None, max_penwidth: float = 5.0) -> str:
    """Graphviz digraph with one edge ``m -> n`` per true ``adjacency[n, m]``.

    With ``weights`` each edge is labelled with its weight and drawn with a
    pen width proportional to ``|weight|`` (relative to the largest one),
    capped at ``max_penwidth``.
    """
    adjacency = np.asarray(adjacency, dtype=bool)
    N = adjacency.shape[0]
    names = names or [f"x{i + 1}" for i in range(N)]
    lines = ["digraph G {", "  node [shape=circle];"]
    lines += [f'  "{name}";' for name in names]
    if weights is not None:
        weights = np.asarray(weights, dtype=float)
        wmax = np.abs(weights[adjacency]).max() if adjacency.any() else 1.0
        wmax = wmax or 1.0
    for n in range(N):
        for m in range(N):
            if not adjacency[n, m]:
                continue
            attrs = ""
            if weights is not None:
                w = weights[n, m]
                pen = min(max_penwidth, 0.5 + max_penwidth * abs(w) / wmax)
                color = "black" if w >= 0 else "red"
                attrs = f' [label="{w:.3g}", penwidth={pen:.2f}, color={color}]'
            lines.append(f'  "{names[m]}" -> "{names[n]}"{attrs};')
    lines.append("}")
    return "\n".join(lines) + "\n"
