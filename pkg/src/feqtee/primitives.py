"""Deterministic construction of small quad meshes used across the toolchain.

These are the substrate for the canonical cluster patch, the CLI demo
assets and most of the test suite.
"""

from __future__ import annotations

import numpy as np

from .mesh import PolyMesh


def cube(size=1.0) -> PolyMesh:
    """Axis-aligned cube, 8 vertices, 6 quads, outward CCW winding."""
    s = size / 2.0
    p = np.array([
        [-s, -s, -s], [s, -s, -s], [s, s, -s], [-s, s, -s],
        [-s, -s, s], [s, -s, s], [s, s, s], [-s, s, s],
    ])
    f = [
        [0, 3, 2, 1],  # bottom (z = -s)
        [4, 5, 6, 7],  # top (z = +s)
        [0, 1, 5, 4],  # front (y = -s)
        [1, 2, 6, 5],  # right
        [2, 3, 7, 6],  # back
        [3, 0, 4, 7],  # left
    ]
    return PolyMesh(p, f)


def grid_patch_mesh(nx: int, ny: int, z=0.0) -> PolyMesh:
    """Open nx-by-ny quad grid in the z-plane, spanning [0,nx] x [0,ny]."""
    xs, ys = np.meshgrid(np.arange(nx + 1), np.arange(ny + 1), indexing="ij")
    pos = np.stack([xs.ravel(), ys.ravel(), np.full(xs.size, float(z))], axis=1)

    def vid(i, j):
        return i * (ny + 1) + j

    faces = []
    for i in range(nx):
        for j in range(ny):
            faces.append([vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)])
    return PolyMesh(pos.astype(float), faces)


def subdivided_cube(n: int, size=1.0, spherify=False) -> PolyMesh:
    """Cube with each side split into an n-by-n quad grid.

    With spherify the vertices are projected onto the circumscribed sphere,
    which yields a genus-0 all-quad mesh with non-trivial face normals.
    """
    s = size / 2.0
    key_to_id = {}
    positions = []

    def vert(p):
        k = (round(p[0], 9), round(p[1], 9), round(p[2], 9))
        if k not in key_to_id:
            key_to_id[k] = len(positions)
            positions.append(list(p))
        return key_to_id[k]

    # each side: origin corner, axis u, axis v chosen so u x v = outward normal
    sides = [
        ([-s, -s, -s], [0, 1, 0], [1, 0, 0]),   # bottom, normal -z
        ([-s, -s, s], [1, 0, 0], [0, 1, 0]),    # top, normal +z
        ([-s, -s, -s], [1, 0, 0], [0, 0, 1]),   # front, normal -y
        ([-s, s, -s], [0, 0, 1], [1, 0, 0]),    # back, normal +y
        ([-s, -s, -s], [0, 0, 1], [0, 1, 0]),   # left, normal -x
        ([s, -s, -s], [0, 1, 0], [0, 0, 1]),    # right, normal +x
    ]
    faces = []
    step = size / n
    for origin, du, dv in sides:
        o = np.asarray(origin, float)
        du = np.asarray(du, float) * step
        dv = np.asarray(dv, float) * step
        for i in range(n):
            for j in range(n):
                c00 = vert(o + i * du + j * dv)
                c10 = vert(o + (i + 1) * du + j * dv)
                c11 = vert(o + (i + 1) * du + (j + 1) * dv)
                c01 = vert(o + i * du + (j + 1) * dv)
                faces.append([c00, c10, c11, c01])
    pos = np.asarray(positions, float)
    if spherify:
        r = np.linalg.norm(pos, axis=1, keepdims=True)
        pos = pos / r * (s * np.sqrt(3.0))
    return PolyMesh(pos, faces)


def disk_quad_patch(n: int = 8, radius=1.0) -> PolyMesh:
    """Open all-quad disk: an n-by-n grid mapped square-to-disk.

    Uses the elliptical square-to-disk map, so the boundary is the circle
    of the given radius. Deterministic connectivity and coordinates; this
    is the canonical base patch for extrusion clustering.
    """
    if n < 2 or n % 2:
        raise ValueError("n must be even and >= 2")
    base = grid_patch_mesh(n, n)
    uv = base.positions[:, :2] / (n / 2.0) - 1.0  # [-1, 1]^2
    x, y = uv[:, 0], uv[:, 1]
    dx = x * np.sqrt(np.maximum(0.0, 1.0 - y * y / 2.0))
    dy = y * np.sqrt(np.maximum(0.0, 1.0 - x * x / 2.0))
    pos = np.stack([dx * radius, dy * radius, np.zeros_like(dx)], axis=1)
    return base.with_positions(pos)
