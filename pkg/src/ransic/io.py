"""File formats: correspondence tables, ASCII PLY clouds, result records.

Correspondence files are plain text, one pair per row, comma- or
whitespace-separated: ``x1 y1 z1 x2 y2 z2`` plus an optional seventh column
holding 1 for ground-truth inliers and 0 for outliers. ``#`` lines and one
leading non-numeric header line are skipped. Coordinates are written with
full float precision (shortest exact decimal), so write-then-read is an
identity.

Result records serialize to CSV or JSON lines with a stable column order and
9 significant digits, enough to round-trip every magnitude this package
produces.
"""

import csv
import json
import math
from contextlib import contextmanager
from dataclasses import dataclass, fields

import numpy as np

from .exceptions import ArityError, InvalidParam, ParseError, UnsupportedFormat

# Stable result column order; `solver` is not part of the error metrics but
# benchmark sweeps would be ambiguous without it.
RESULT_COLUMNS = (
    "problem", "solver", "n", "outlier_ratio", "seed",
    "rot_err_deg", "scale_err", "trans_err",
    "recall", "precision", "samples_drawn", "wall_ms", "terminated",
)


@dataclass(frozen=True)
class ResultRecord:
    """One solver run: identity, error metrics, bookkeeping.

    Error and recall fields are None when inapplicable (no ground truth, or a
    rotation-only problem has no scale/translation errors).
    """

    problem: str
    solver: str
    n: int
    outlier_ratio: float
    seed: int
    rot_err_deg: float = None
    scale_err: float = None
    trans_err: float = None
    recall: float = None
    precision: float = None
    samples_drawn: int = 0
    wall_ms: float = 0.0
    terminated: bool = False


@contextmanager
def _reading(source):
    if hasattr(source, "read"):
        yield source
    else:
        with open(source, "r", encoding="utf-8") as fh:
            yield fh


@contextmanager
def _writing(target):
    if hasattr(target, "write"):
        yield target
    else:
        with open(target, "w", encoding="utf-8", newline="") as fh:
            yield fh


def _fmt_exact(x):
    """Shortest decimal that parses back to exactly the same float."""
    return repr(float(x))


def _fmt9(x):
    """9 significant digits; decimal point, never locale separators."""
    return format(float(x), ".9g")


def read_correspondences(source):
    """Read a correspondence file.

    Parameters
    ----------
    source : path or text stream

    Returns
    -------
    (src, dst, mask)
        ``src`` and ``dst`` are (n, 3) float arrays preserving row order
        (row i is correspondence i); ``mask`` is an (n,) bool array when the
        file carries the 7th column, else None.

    Raises
    ------
    ParseError
        Unparseable or non-finite value (with 1-based line number).
    ArityError
        Mixed row widths, or a width other than 6 or 7.
    """
    rows = []
    arity = None
    header_allowance = 1
    with _reading(source) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.replace(",", " ").split()
            try:
                values = [float(p) for p in parts]
            except ValueError:
                if header_allowance and not rows:
                    header_allowance = 0  # one non-numeric header line is fine
                    continue
                raise ParseError(f"unparseable field in {line!r}", line=lineno) from None
            if arity is None:
                arity = len(values)
                if arity not in (6, 7):
                    raise ArityError(
                        f"rows must have 6 or 7 fields, found {arity}", line=lineno
                    )
            elif len(values) != arity:
                raise ArityError(
                    f"row has {len(values)} fields, expected {arity}", line=lineno
                )
            if not all(math.isfinite(v) for v in values):
                raise ParseError("non-finite value", line=lineno)
            if len(values) == 7 and values[6] not in (0.0, 1.0):
                raise ParseError(
                    f"inlier flag must be 0 or 1, got {values[6]!r}", line=lineno
                )
            rows.append(values)
    if not rows:
        raise ParseError("no data rows found")
    data = np.asarray(rows, dtype=float)
    src = data[:, 0:3]
    dst = data[:, 3:6]
    mask = data[:, 6].astype(bool) if arity == 7 else None
    return src, dst, mask


def write_correspondences(target, src, dst, mask=None):
    """Write a correspondence file (optionally with the inlier mask column)."""
    src = np.asarray(src, dtype=float)
    dst = np.asarray(dst, dtype=float)
    if src.shape != dst.shape or src.ndim != 2 or src.shape[1] != 3:
        raise InvalidParam("src and dst must be matching (n, 3) arrays")
    with _writing(target) as fh:
        if mask is None:
            fh.write("# x1 y1 z1 x2 y2 z2\n")
        else:
            fh.write("# x1 y1 z1 x2 y2 z2 inlier\n")
        for i in range(len(src)):
            vals = [_fmt_exact(v) for v in (*src[i], *dst[i])]
            if mask is not None:
                vals.append(str(int(mask[i])))
            fh.write(" ".join(vals) + "\n")


def read_ply_ascii(source):
    """Read vertex positions from an ASCII PLY file.

    Only the vertex element's x, y, z properties are used; every other
    property and element is skipped. Binary PLY is rejected.

    Returns
    -------
    ndarray of shape (n, 3)

    Raises
    ------
    ParseError
        Malformed header or vertex data.
    UnsupportedFormat
        Binary PLY, or a vertex element with list properties.
    """
    with _reading(source) as fh:
        line = fh.readline()
        if line.strip() != "ply":
            raise ParseError("not a PLY file (missing 'ply' magic)", line=1)
        elements = []  # (name, count) in declaration order
        vertex_props = []
        current = None
        lineno = 1
        saw_format = False
        while True:
            raw = fh.readline()
            if not raw:
                raise ParseError("header ended without end_header")
            lineno += 1
            tok = raw.split()
            if not tok or tok[0] == "comment":
                continue
            if tok[0] == "format":
                if len(tok) < 2 or tok[1] != "ascii":
                    raise UnsupportedFormat(f"unsupported PLY format {raw.strip()!r}")
                saw_format = True
            elif tok[0] == "element":
                if len(tok) != 3:
                    raise ParseError("malformed element line", line=lineno)
                try:
                    count = int(tok[2])
                except ValueError:
                    raise ParseError("element count is not an integer", line=lineno) from None
                current = tok[1]
                elements.append((current, count))
            elif tok[0] == "property":
                if current == "vertex":
                    if tok[1] == "list":
                        raise UnsupportedFormat("list property on vertex element")
                    if len(tok) != 3:
                        raise ParseError("malformed property line", line=lineno)
                    vertex_props.append(tok[2])
            elif tok[0] == "end_header":
                break
            else:
                raise ParseError(f"unexpected header line {raw.strip()!r}", line=lineno)
        if not saw_format:
            raise ParseError("missing format line")
        names = dict((e[0], e[1]) for e in elements)
        if "vertex" not in names:
            raise ParseError("no vertex element declared")
        try:
            cols = [vertex_props.index(axis) for axis in ("x", "y", "z")]
        except ValueError:
            raise ParseError("vertex element lacks x/y/z properties") from None

        points = None
        for name, count in elements:
            if name == "vertex":
                points = np.empty((count, 3))
                for i in range(count):
                    raw = fh.readline()
                    lineno += 1
                    if not raw:
                        raise ParseError("vertex data ended early", line=lineno)
                    parts = raw.split()
                    try:
                        points[i] = [float(parts[c]) for c in cols]
                    except (ValueError, IndexError):
                        raise ParseError("malformed vertex row", line=lineno) from None
            else:
                for _ in range(count):  # skip payload of other elements
                    fh.readline()
                    lineno += 1
        return points


def write_ply_ascii(target, points):
    """Write points as a minimal ASCII PLY vertex cloud."""
    points = np.asarray(points, dtype=float)
    if points.ndim != 2 or points.shape[1] != 3:
        raise InvalidParam("points must be an (n, 3) array")
    with _writing(target) as fh:
        fh.write("ply\n")
        fh.write("format ascii 1.0\n")
        fh.write(f"element vertex {len(points)}\n")
        fh.write("property double x\n")
        fh.write("property double y\n")
        fh.write("property double z\n")
        fh.write("end_header\n")
        for p in points:
            fh.write(f"{_fmt_exact(p[0])} {_fmt_exact(p[1])} {_fmt_exact(p[2])}\n")


def _cell_to_text(value):
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, float):
        return _fmt9(value)
    return str(value)


def write_results(records, fmt, target):
    """Serialize result records.

    Parameters
    ----------
    records : iterable of ResultRecord
    fmt : {"csv", "jsonl"}
        CSV with a header row, or one JSON object per line.
    target : path or text stream
    """
    if fmt not in ("csv", "jsonl"):
        raise InvalidParam(f"fmt must be 'csv' or 'jsonl', got {fmt!r}")
    with _writing(target) as fh:
        if fmt == "csv":
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(RESULT_COLUMNS)
            for rec in records:
                writer.writerow(
                    _cell_to_text(getattr(rec, col)) for col in RESULT_COLUMNS
                )
        else:
            for rec in records:
                obj = {}
                for col in RESULT_COLUMNS:
                    v = getattr(rec, col)
                    if isinstance(v, float):
                        v = float(_fmt9(v))
                    elif isinstance(v, (np.integer,)):
                        v = int(v)
                    obj[col] = v
                fh.write(json.dumps(obj) + "\n")


_INT_COLS = {"n", "seed", "samples_drawn"}
_FLOAT_COLS = {"outlier_ratio", "rot_err_deg", "scale_err", "trans_err",
               "recall", "precision", "wall_ms"}


def read_results(source, fmt):
    """Parse result records back; inverse of :func:`write_results`."""
    if fmt not in ("csv", "jsonl"):
        raise InvalidParam(f"fmt must be 'csv' or 'jsonl', got {fmt!r}")
    records = []
    with _reading(source) as fh:
        if fmt == "csv":
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise ParseError("empty results file") from None
            if tuple(header) != RESULT_COLUMNS:
                raise ParseError(f"unexpected results header {header!r}", line=1)
            for lineno, row in enumerate(reader, start=2):
                if len(row) != len(RESULT_COLUMNS):
                    raise ArityError(
                        f"row has {len(row)} fields, expected {len(RESULT_COLUMNS)}",
                        line=lineno,
                    )
                kw = {}
                for col, cell in zip(RESULT_COLUMNS, row):
                    kw[col] = _cell_from_text(col, cell, lineno)
                records.append(ResultRecord(**kw))
        else:
            known = {f.name for f in fields(ResultRecord)}
            for lineno, raw in enumerate(fh, start=1):
                raw = raw.strip()
                if not raw:
                    continue
                try:
                    obj = json.loads(raw)
                except json.JSONDecodeError as exc:
                    raise ParseError(f"bad JSON: {exc}", line=lineno) from None
                records.append(ResultRecord(**{k: v for k, v in obj.items() if k in known}))
    return records


def _cell_from_text(col, cell, lineno):
    if cell == "":
        return None
    try:
        if col in _INT_COLS:
            return int(cell)
        if col in _FLOAT_COLS:
            return float(cell)
        if col == "terminated":
            if cell not in ("true", "false"):
                raise ValueError(cell)
            return cell == "true"
    except ValueError:
        raise ParseError(f"bad value {cell!r} in column {col}", line=lineno) from None
    return cell
