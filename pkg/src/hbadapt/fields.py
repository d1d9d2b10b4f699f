"""Plain-text files for per-vertex and per-edge scalar fields: a count line, then one value per line."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from hbadapt.errors import MeshParseError


def write_field(path, values) -> None:
    values = np.asarray(values, dtype=float).ravel()
    Path(path).write_text("\n".join([str(len(values))] + [f"{v:.17g}" for v in values]) + "\n")


def read_field(path) -> np.ndarray:
    rows = [(i, ln.strip()) for i, ln in enumerate(Path(path).read_text().splitlines(), start=1) if ln.strip()]
    if not rows:
        raise MeshParseError("empty field file", 1)
    line, head = rows[0]
    try:
        count = int(head)
    except ValueError:
        raise MeshParseError(f"bad count {head!r}", line) from None
    if len(rows) - 1 != count:
        raise MeshParseError(f"expected {count} values, found {len(rows) - 1}", line)
    out = np.empty(count)
    for k, (ln, tok) in enumerate(rows[1:]):
        try:
            out[k] = float(tok)
        except ValueError:
            raise MeshParseError(f"non-numeric value {tok!r}", ln) from None
    return out
