"""Small shared I/O helpers: shortest round-trip floats and atomic writes."""

from __future__ import annotations

import json
import os
import tempfile


def fmt(v) -> str:
    """Shortest round-trip decimal for a 64-bit float; nan spelled 'nan'."""
    return repr(float(v))


def atomic_write_text(path, text: str) -> None:
    path = os.fspath(path)
    d = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_json(path, obj) -> None:
    atomic_write_text(path, json.dumps(obj, indent=2) + "\n")


def write_csv(path, header: str, rows) -> None:
    lines = [header]
    lines.extend(",".join(fmt(v) for v in row) for row in rows)
    atomic_write_text(path, "\n".join(lines) + "\n")
