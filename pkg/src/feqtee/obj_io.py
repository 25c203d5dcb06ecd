"""ASCII OBJ reading and writing for polygonal meshes.

Only `v` and `f` records matter; texture/normal indices inside face
corners are accepted and dropped, everything else (vn, vt, polylines,
groups, materials) is ignored on load and never written.
"""

from __future__ import annotations

import numpy as np

from .errors import MalformedFileError


def read_obj(path) -> tuple[np.ndarray, list[list[int]]]:
    """Parse an OBJ file into (positions (V,3) float64, face vertex cycles).

    Face indices are returned 0-based. Negative (relative) OBJ indices are
    resolved against the vertices seen so far, per the OBJ spec.
    """
    positions = []
    faces = []
    with open(path, "r", encoding="utf-8", errors="replace") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            tag = parts[0]
            if tag == "v":
                if len(parts) < 4:
                    raise MalformedFileError("vertex needs 3 coordinates", lineno)
                try:
                    positions.append([float(parts[1]), float(parts[2]), float(parts[3])])
                except ValueError:
                    raise MalformedFileError(f"bad vertex coordinate in {line!r}", lineno)
            elif tag == "f":
                if len(parts) < 4:
                    raise MalformedFileError("face needs at least 3 vertices", lineno)
                cycle = []
                for corner in parts[1:]:
                    idx_text = corner.split("/")[0]
                    try:
                        idx = int(idx_text)
                    except ValueError:
                        raise MalformedFileError(f"bad face index {corner!r}", lineno)
                    if idx == 0:
                        raise MalformedFileError("OBJ indices are 1-based, got 0", lineno)
                    if idx > 0:
                        cycle.append(idx - 1)
                    else:
                        cycle.append(len(positions) + idx)
                if any(i < 0 or i >= len(positions) for i in cycle):
                    # OBJ allows forward references in principle; we do not.
                    bad = [i + 1 for i in cycle if i < 0 or i >= len(positions)]
                    raise MalformedFileError(f"face index out of range: {bad[0]}", lineno)
                faces.append(cycle)
            # all other record types ignored
    return np.asarray(positions, dtype=np.float64).reshape(-1, 3), faces


def write_obj(path, positions: np.ndarray, faces) -> None:
    """Write positions and 0-based face cycles as a v/f-only OBJ file."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(obj_text(positions, faces))


def obj_text(positions: np.ndarray, faces) -> str:
    lines = []
    for p in np.asarray(positions, dtype=np.float64):
        lines.append(f"v {p[0]:.17g} {p[1]:.17g} {p[2]:.17g}")
    for cycle in faces:
        lines.append("f " + " ".join(str(int(i) + 1) for i in cycle))
    return "\n".join(lines) + "\n"
