"""The generic disk: a fixed high-resolution unit-disk mesh whose vertex ids
quantize continuous uv curves into integer token sequences and back.

Construction is a pure function of the ring count R: vertex 0 sits at the
origin, ring r (1..R) holds 8r vertices at radius r/R and angles 2*pi*j/(8r).
A cosmetic quad loop is attached outside the circle; its vertices are not
addressable by quantization."""

from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree

from .errors import FeqTeeError

DEFAULT_RINGS = 32


class GenericDisk:
    def __init__(self, rings: int = DEFAULT_RINGS):
        if rings < 1:
            raise ValueError("ring count must be >= 1")
        self.rings = rings
        pts = [(0.0, 0.0)]
        ring_start = [0, 1]
        for r in range(1, rings + 1):
            n = 8 * r
            ang = 2.0 * np.pi * np.arange(n) / n
            rad = r / rings
            pts.extend(zip(rad * np.cos(ang), rad * np.sin(ang)))
            ring_start.append(len(pts))
        self.vertices = np.asarray(pts, dtype=np.float64)
        self.ring_start = ring_start  # ring r occupies [ring_start[r], ring_start[r+1])
        self.triangles = self._triangulate()
        self.loop_vertices, self.loop_faces = self._outer_loop()
        self._tree = cKDTree(self.vertices)

    @property
    def vertex_count(self) -> int:
        return len(self.vertices)

    def ring_of(self, vid: int) -> int:
        for r in range(self.rings + 1):
            if vid < self.ring_start[r + 1]:
                return r
        raise IndexError(vid)

    def _ring_ids(self, r):
        return np.arange(self.ring_start[r], self.ring_start[r + 1])

    def _triangulate(self):
        tris = []
        # center fan
        first = self._ring_ids(1)
        for j in range(8):
            tris.append([0, first[j], first[(j + 1) % 8]])
        # annulus strips: merge the two rings by angular progress
        for r in range(1, self.rings):
            inner = self._ring_ids(r)
            outer = self._ring_ids(r + 1)
            ni, no = len(inner), len(outer)
            i = j = 0
            while i < ni or j < no:
                adv_inner = (i + 1) * no <= (j + 1) * ni if i < ni else False
                if j >= no:
                    adv_inner = True
                if adv_inner:
                    tris.append([inner[i % ni], outer[j % no], inner[(i + 1) % ni]])
                    i += 1
                else:
                    tris.append([inner[i % ni], outer[j % no], outer[(j + 1) % no]])
                    j += 1
        tris = np.asarray(tris, dtype=np.int64)
        # enforce CCW orientation
        p = self.vertices
        a, b, c = p[tris[:, 0]], p[tris[:, 1]], p[tris[:, 2]]
        area2 = (b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) \
            - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0])
        flip = area2 < 0
        tris[flip] = tris[flip][:, [0, 2, 1]]
        return tris

    def _outer_loop(self):
        """One ring of quads attached outside the unit circle (structural
        analog of the attached face loop; carries no quantizable ids)."""
        rim = self._ring_ids(self.rings)
        n = len(rim)
        ang = 2.0 * np.pi * np.arange(n) / n
        rad = (self.rings + 1) / self.rings
        outer = np.stack([rad * np.cos(ang), rad * np.sin(ang)], axis=1)
        base = self.vertex_count
        quads = [[rim[j], rim[(j + 1) % n], base + (j + 1) % n, base + j]
                 for j in range(n)]
        return outer, np.asarray(quads, dtype=np.int64)

    def max_spacing(self) -> float:
        """Upper bound on the distance from any disk point to its nearest
        vertex: half the angular arc plus one radial step."""
        return np.pi / (8.0 * self.rings) + 1.0 / self.rings

    def quantize_curve(self, points) -> list:
        """Nearest-vertex ids for a 2D polyline; points outside the circle are
        clamped to it first, consecutive duplicate ids collapse to one."""
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        if pts.size == 0:
            return []
        norms = np.linalg.norm(pts, axis=1)
        over = norms > 1.0
        if over.any():
            pts = pts.copy()
            pts[over] /= norms[over, None]
        _, ids = self._tree.query(pts)
        out = []
        for i in np.atleast_1d(ids):
            i = int(i)
            if not out or out[-1] != i:
                out.append(i)
        return out

    def dequantize_ids(self, ids) -> np.ndarray:
        """Exact vertex positions for a token id sequence.

        Out-of-range ids raise: this is the validity gate for generated
        token streams."""
        arr = np.asarray(list(ids), dtype=np.int64)
        if arr.size and (arr.min() < 0 or arr.max() >= self.vertex_count):
            bad = arr[(arr < 0) | (arr >= self.vertex_count)][0]
            raise FeqTeeError(
                f"generic disk vertex id {bad} out of range "
                f"(0..{self.vertex_count - 1})"
            )
        return self.vertices[arr].copy()


def build_generic_disk(rings: int = DEFAULT_RINGS) -> GenericDisk:
    return GenericDisk(rings)
