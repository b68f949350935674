"""Plain-text node-value files.

Header ``<tag> v1 nx ny spacing t`` followed by one ``i j value`` line per
node. Floats are written with ``repr`` so they round-trip exactly.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

STATE_TAG = "lagflow-state"
DUAL_TAG = "lagflow-dual"


def write_nodes(path, values, mask, spacing, t=0.0, tag=STATE_TAG):
    """Write ``values[i, j]`` for every ``(i, j)`` with ``mask[i, j]`` set."""
    nx, ny = values.shape
    lines = [f"{tag} v1 {nx} {ny} {float(spacing)!r} {float(t)!r}"]
    for i, j in zip(*np.nonzero(mask)):
        lines.append(f"{i} {j} {float(values[i, j])!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_nodes(path, tag=STATE_TAG):
    """Return ``(values, mask, spacing, t)``; unset nodes hold 0."""
    text = Path(path).read_text().split("\n")
    head = text[0].split()
    if len(head) != 6 or head[0] != tag or head[1] != "v1":
        raise ValueError(f"{path}: expected header '{tag} v1 nx ny spacing t', got {text[0]!r}")
    nx, ny = int(head[2]), int(head[3])
    spacing, t = float(head[4]), float(head[5])
    values = np.zeros((nx, ny))
    mask = np.zeros((nx, ny), dtype=bool)
    for lineno, line in enumerate(text[1:], start=2):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 3:
            raise ValueError(f"{path}:{lineno}: expected 'i j value'")
        i, j = int(parts[0]), int(parts[1])
        values[i, j] = float(parts[2])
        mask[i, j] = True
    return values, mask, spacing, t
