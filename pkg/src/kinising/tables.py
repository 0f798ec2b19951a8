"""Tab-separated tables with a ``#`` header.

Header lines are ``# key: value`` pairs followed by one ``# col1<TAB>col2``
line naming the columns.  Floats are written with ``repr`` so that files are
byte-identical across runs and round-trip exactly.  Writes go through a
temporary file and ``os.replace``.
"""
from __future__ import annotations

import os
import tempfile
from pathlib import Path


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    if hasattr(v, "item"):
        return _fmt(v.item())
    return str(v)


def write_table(path, columns, rows, header=()):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"# {h}" for h in header]
    lines.append("# " + "\t".join(columns))
    lines.extend("\t".join(_fmt(v) for v in row) for row in rows)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    with os.fdopen(fd, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    os.replace(tmp, path)
    return path


def read_table(path):
    """Return ``(meta, columns, rows)``; row values are left as strings."""
    meta, header_lines, rows = {}, [], []
    with open(path) as fh:
        for line in fh:
            line = line.rstrip("\n")
            if line.startswith("#"):
                header_lines.append(line[2:] if line.startswith("# ") else line[1:])
            elif line:
                rows.append(line.split("\t"))
    columns = header_lines[-1].split("\t") if header_lines else []
    for h in header_lines[:-1]:
        if ": " in h:
            key, value = h.split(": ", 1)
            meta[key] = value
    return meta, columns, rows
