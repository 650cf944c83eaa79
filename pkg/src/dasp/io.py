"""File formats used by the command-line tool.

Every CSV file starts with a comment line naming its schema and version,
``# schema: dasp.<name>/<version>``, followed by a header row. Numbers are
written with 17 significant digits, enough to round-trip a float64 exactly.
The column lists below are the single source of truth for the schemas; they
are also rendered in ``docs/schemas.md``.
"""

import csv
import hashlib
import io
import json
import math
import os
import tempfile

import numpy as np

from .errors import InvalidParameter, MissingColumns

SCHEMA_VERSION = 1

SCHEMAS = {
    "matrix": None,  # dense square matrix, no header row
    "kl_curve": ("structure", "dim", "rho", "kl"),
    "contours": ("rho", "b1", "b2", "count"),
    "meff": ("prior", "rho", "draw", "meff"),
    "draws": ("chain", "iter", "parameter", "value"),
    "diagnostics": ("parameter", "mean", "sd", "q2.5", "q50", "q97.5", "rhat", "ess_bulk",
                    "degenerate", "stuck_chains"),
    "results": ("rep", "prior", "omega_mode", "metric", "value"),
    "deltas": ("rep", "prior", "omega_mode", "baseline", "metric", "delta"),
    "loo": ("prior", "omega_mode", "fold", "elpd_i"),
    "loo_compare": ("model", "prior", "omega_mode", "elpd", "delta_elpd", "se_delta", "failed_folds"),
    "delta_summary": ("prior", "omega_mode", "metric", "n", "mean", "median", "q25", "q75", "min", "max"),
    "coverage_table": ("Model ID", "Coverage", "Specificity", "Sensitivity (Power)", "Avg. CI Width",
                       "Coverage Zero", "Coverage Nonzero"),
}


def schema_line(name):
    if name not in SCHEMAS:
        raise InvalidParameter(f"unknown schema {name!r}")
    return f"# schema: dasp.{name}/{SCHEMA_VERSION}"


def fmt(value):
    """Format one cell: floats with 17 significant digits, other values verbatim."""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return format(v, ".17g")
    if isinstance(value, np.integer):
        return str(int(value))
    return str(value)


def write_atomic(path, text):
    """Write ``text`` to ``path`` through a temporary file and a rename."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def render_csv(schema, rows):
    """CSV text for ``rows`` (sequences in schema column order)."""
    buf = io.StringIO()
    buf.write(schema_line(schema) + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    columns = SCHEMAS[schema]
    if columns is not None:
        writer.writerow(columns)
    for row in rows:
        if columns is not None and len(row) != len(columns):
            raise InvalidParameter(f"row of length {len(row)} does not fit schema {schema!r}")
        writer.writerow([fmt(v) for v in row])
    return buf.getvalue()


def write_csv(path, schema, rows):
    write_atomic(path, render_csv(schema, rows))


def write_matrix(path, matrix):
    matrix = np.atleast_2d(np.asarray(matrix, float))
    write_csv(path, "matrix", matrix.tolist())


def write_json(path, obj):
    write_atomic(path, json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if hasattr(obj, "value"):  # enums
        return obj.value
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _data_lines(path):
    with open(path, newline="") as fh:
        return [line for line in fh if line.strip() and not line.lstrip().startswith("#")]


def read_schema_name(path):
    """Schema name from the comment line of a file written by this tool, or ``None``."""
    with open(path) as fh:
        first = fh.readline().strip()
    prefix = "# schema: dasp."
    if first.startswith(prefix):
        return first[len(prefix):].split("/")[0]
    return None


def read_table(path, required=()):
    """Read a headed CSV into ``(columns, rows)``; rows are lists of strings.

    Raises
    ------
    MissingColumns
        If the file is empty or lacks one of ``required``.
    """
    lines = _data_lines(path)
    if not lines:
        raise MissingColumns(f"{path} has no header row")
    rows = list(csv.reader(lines))
    header = [h.strip() for h in rows[0]]
    missing = [c for c in required if c not in header]
    if missing:
        raise MissingColumns(f"{path} lacks columns {missing}")
    return header, rows[1:]


def read_matrix(path, header=False):
    """Numeric matrix from a CSV file, skipping comment lines and optionally a header."""
    lines = _data_lines(path)
    rows = list(csv.reader(lines))
    if header:
        rows = rows[1:]
    if not rows:
        raise InvalidParameter(f"{path} holds no numeric rows")
    try:
        m = np.array([[float(v) for v in row] for row in rows])
    except ValueError as err:
        raise InvalidParameter(f"{path}: non-numeric entry ({err}); is there a header row?") from None
    return m


def read_regression(path, response, predictors=None):
    """``(X, y, predictor names)`` from a headed CSV with a response column."""
    header, rows = read_table(path, required=[response] + list(predictors or []))
    names = list(predictors) if predictors else [h for h in header if h != response]
    if not names:
        raise MissingColumns(f"{path} has no predictor columns")
    try:
        table = np.array([[float(v) for v in row] for row in rows])
    except ValueError as err:
        raise InvalidParameter(f"{path}: non-numeric entry ({err})") from None
    if table.ndim != 2 or table.shape[0] == 0:
        raise InvalidParameter(f"{path} holds no data rows")
    col = {h: i for i, h in enumerate(header)}
    return table[:, [col[c] for c in names]], table[:, col[response]], names


def file_sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()
