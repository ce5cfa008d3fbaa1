"""Trace and report persistence.

CSV traces carry every iteration field at 17-significant-digit
precision so parse(write(trace)) reproduces the records exactly;
writes go through a temp file and os.replace so readers never see a
partial file; JSON output is key-sorted for byte-stable reruns.
"""

import json
import os
import re
import tempfile

import numpy as np

from stosqp.driver import IterationRecord
from stosqp.errors import ConfigError, InvalidDimension
from stosqp.merit import INFINITE, Infinite

SCHEMA_VERSION = 1
_VERSION_LINE = "# schema_version=%d" % SCHEMA_VERSION

# iteration-record layout: (field, kind); vec_n/vec_m expand to one
# column per component
_FIELDS = (
    ("k", "int"),
    ("x", "vec_n"),
    ("g", "vec_n"),
    ("d", "vec_n"),
    ("y", "vec_m"),
    ("tau_trial", "float_or_inf"),
    ("tau", "float"),
    ("xi_trial", "float_or_inf"),
    ("xi", "float"),
    ("alpha_hat_init", "float"),
    ("alpha_tilde_init", "float"),
    ("alpha_hat", "float"),
    ("alpha_tilde", "float"),
    ("alpha", "float"),
    ("f", "float"),
    ("c_norm1", "float"),
    ("tau_decreased", "bool"),
    ("xi_decreased", "bool"),
    ("d_true", "vec_n"),
    ("y_true", "vec_m"),
    ("tau_trial_true", "float_or_inf"),
    ("tau_hat", "float"),
    ("delta_q_stoch", "float"),
    ("delta_q_true", "float"),
    ("stationarity", "float"),
    ("phi_before", "float"),
    ("phi_after", "float"),
)


def _fmt_float(v):
    return "%.17g" % v


def atomic_write_text(path, text):
    """Write text to path via a same-directory temp file + rename."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".stosqp-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.remove(tmp)
        raise


def _header(n, m):
    cols = []
    for name, kind in _FIELDS:
        if kind == "vec_n":
            cols.extend("%s_%d" % (name, i) for i in range(n))
        elif kind == "vec_m":
            cols.extend("%s_%d" % (name, i) for i in range(m))
        else:
            cols.append(name)
    return cols


def _record_cells(rec):
    cells = []
    for name, kind in _FIELDS:
        value = getattr(rec, name)
        if kind in ("vec_n", "vec_m"):
            cells.extend(_fmt_float(v) for v in np.asarray(value, dtype=np.float64))
        elif kind == "int":
            cells.append("%d" % value)
        elif kind == "bool":
            cells.append("true" if value else "false")
        elif kind == "float_or_inf":
            cells.append("inf" if isinstance(value, Infinite) else _fmt_float(value))
        else:
            cells.append(_fmt_float(value))
    return cells


def write_trace_csv(path, trace):
    if not trace:
        raise InvalidDimension("refusing to write an empty trace")
    n = int(np.asarray(trace[0].x).size)
    m = int(np.asarray(trace[0].y).size)
    lines = [_VERSION_LINE, ",".join(_header(n, m))]
    lines.extend(",".join(_record_cells(rec)) for rec in trace)
    atomic_write_text(path, "\n".join(lines) + "\n")


def _parse_cell(tok, kind, path):
    if kind == "int":
        return int(tok)
    if kind == "bool":
        if tok == "true":
            return True
        if tok == "false":
            return False
        raise ConfigError("%s: bad boolean cell %r" % (path, tok))
    if kind == "float_or_inf" and tok == "inf":
        return INFINITE
    return float(tok)


def read_trace_csv(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise ConfigError("cannot read %s: %s" % (path, exc)) from exc
    if not lines or not lines[0].startswith("# schema_version="):
        raise ConfigError("%s: missing schema_version line" % path)
    if lines[0] != _VERSION_LINE:
        raise ConfigError("%s: unsupported %s" % (path, lines[0].lstrip("# ")))
    if len(lines) < 2:
        raise ConfigError("%s: missing header row" % path)
    header = lines[1].split(",")
    n = sum(1 for c in header if re.fullmatch(r"x_\d+", c))
    m = sum(1 for c in header if re.fullmatch(r"y_\d+", c))
    if header != _header(n, m):
        raise ConfigError("%s: header does not match the trace layout" % path)

    records = []
    width = len(header)
    for lineno, line in enumerate(lines[2:], start=3):
        toks = line.split(",")
        if len(toks) != width:
            raise ConfigError(
                "%s:%d: expected %d cells, got %d" % (path, lineno, width, len(toks))
            )
        where = "%s:%d" % (path, lineno)
        kwargs = {}
        pos = 0
        for name, kind in _FIELDS:
            if kind in ("vec_n", "vec_m"):
                size = n if kind == "vec_n" else m
                kwargs[name] = np.array(
                    [float(t) for t in toks[pos : pos + size]], dtype=np.float64
                )
                pos += size
            else:
                kwargs[name] = _parse_cell(toks[pos], kind, where)
                pos += 1
        records.append(IterationRecord(**kwargs))
    return records


def _json_default(obj):
    if isinstance(obj, Infinite):
        return "inf"
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError("cannot serialize %r" % type(obj))


def write_json_atomic(path, payload):
    text = json.dumps(
        payload, sort_keys=True, indent=2, allow_nan=False, default=_json_default
    )
    atomic_write_text(path, text + "\n")


def read_json(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise ConfigError("cannot read %s: %s" % (path, exc)) from exc
    except json.JSONDecodeError as exc:
        raise ConfigError("%s is not valid JSON: %s" % (path, exc)) from exc
