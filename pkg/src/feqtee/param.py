"""Disk parametrization of mesh patches.

A patch is flattened to the unit disk by fixing its boundary to the circle
(chord-length spaced, reference vertex at (1,0)) and solving the discrete
Laplace equation with uniform weights on the center-split triangulation.
Uniform weights with a convex boundary give an injective (Tutte) embedding,
which every computed map asserts.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import SolverError, TopologyError
from .mesh import Patch, PolyMesh, patch_boundary_halfedges


def angle_of(uv) -> np.ndarray:
    """atan2 angles normalized to [0, 2*pi)."""
    a = np.arctan2(np.asarray(uv)[..., 1], np.asarray(uv)[..., 0])
    return np.mod(a, 2.0 * np.pi)


def center_split(mesh: PolyMesh, faces):
    """Split each quad of a face set into 4 triangles around a center vertex.

    Triangles pass through unsplit (the quad-dominant rebuild produces them).
    Returns (local vertex ids of originals, tri connectivity over local ids,
    source face per tri, {face id: center local id}).
    """
    faces = sorted(int(f) for f in faces)
    verts = sorted({v for f in faces for v in mesh.faces[f]})
    local = {v: i for i, v in enumerate(verts)}
    tris = []
    tri_src = []
    centers = {}
    next_local = len(verts)
    for f in faces:
        cyc = mesh.faces[f]
        if len(cyc) == 3:
            tris.append([local[cyc[0]], local[cyc[1]], local[cyc[2]]])
            tri_src.append(f)
        elif len(cyc) == 4:
            m = next_local
            next_local += 1
            centers[f] = m
            a, b, c, d = (local[v] for v in cyc)
            tris.extend([[a, b, m], [b, c, m], [c, d, m], [d, a, m]])
            tri_src.extend([f, f, f, f])
        else:
            raise TopologyError(f"face {f} has arity {len(cyc)}; expected 3 or 4")
    return verts, np.asarray(tris, dtype=np.int64), np.asarray(tri_src), centers


def smooth_interior(mesh: PolyMesh, patch: Patch, iterations: int = 50,
                    tol_factor: float = 1e-7):
    """Uniform-Laplacian smoothing of the patch interior, boundary fixed.

    Jacobi averaging of 1-ring neighbors; stops early once the largest
    displacement drops below tol_factor times the mesh bbox diagonal.
    Returns (smoothed PolyMesh, converged flag).
    """
    cycle = patch_boundary_halfedges(mesh, patch.faces)
    boundary = {int(mesh.h_origin[h]) for h in cycle}
    pverts = sorted({v for f in patch.faces for v in mesh.faces[f]})
    interior = [v for v in pverts if v not in boundary]
    if not interior:
        return mesh, True

    neighbors = [sorted(mesh.vertex_neighbors(v)) for v in interior]
    counts = np.array([len(ns) for ns in neighbors], dtype=np.float64)
    flat = np.concatenate([np.asarray(ns) for ns in neighbors])
    off = np.zeros(len(interior) + 1, dtype=np.int64)
    np.cumsum([len(ns) for ns in neighbors], out=off[1:])

    pos = mesh.positions.copy()
    idx = np.asarray(interior)
    tol = tol_factor * mesh.bbox_diagonal()
    converged = False
    for _ in range(iterations):
        sums = np.add.reduceat(pos[flat], off[:-1], axis=0)
        new = sums / counts[:, None]
        moved = np.abs(new - pos[idx]).max()
        pos[idx] = new
        if moved < tol:
            converged = True
            break
    return mesh.with_positions(pos), converged


def flatten_interior(mesh: PolyMesh, patch: Patch) -> PolyMesh:
    """Exact fixed point of uniform-Laplacian smoothing: solve the discrete
    Laplace equation for the patch interior in 3D, boundary fixed.

    Used on both the capture and the apply side of extrusion records so the
    flattened base geometry is identical in both pipelines (iterative
    smoothing truncated at a fixed count is not idempotent)."""
    cycle = patch_boundary_halfedges(mesh, patch.faces)
    boundary = {int(mesh.h_origin[h]) for h in cycle}
    pverts = sorted({v for f in patch.faces for v in mesh.faces[f]})
    interior = [v for v in pverts if v not in boundary]
    if not interior:
        return mesh
    index = {v: i for i, v in enumerate(interior)}
    rows, cols, vals = [], [], []
    rhs = np.zeros((len(interior), 3))
    for v in interior:
        ns = sorted(mesh.vertex_neighbors(v))
        rows.append(index[v])
        cols.append(index[v])
        vals.append(float(len(ns)))
        for w in ns:
            if w in index:
                rows.append(index[v])
                cols.append(index[w])
                vals.append(-1.0)
            else:
                rhs[index[v]] += mesh.positions[w]
    A = sp.csr_matrix((vals, (rows, cols)), shape=(len(interior),) * 2)
    try:
        sol = spla.spsolve(A.tocsc(), rhs)
    except Exception as exc:
        raise SolverError(f"interior flattening failed: {exc}")
    sol = np.atleast_2d(sol).reshape(len(interior), 3)
    if not np.isfinite(sol).all():
        raise SolverError("interior flattening produced non-finite positions")
    pos = mesh.positions.copy()
    pos[interior] = sol
    return mesh.with_positions(pos)


@dataclass
class ParamPatch:
    """Harmonic map of a center-split patch onto the unit disk."""

    patch: Patch
    verts: list                 # global vertex ids; local index = position
    local_of: dict              # global id -> local index
    tri_faces: np.ndarray       # (T,3) local indices, centers included
    tri_source_face: np.ndarray  # (T,) mesh face id per triangle
    uv: np.ndarray              # (L,2), L = len(verts) + #centers
    center_locals: dict         # mesh face id -> local index of its center
    boundary_locals: list       # boundary cycle, reference vertex first
    boundary_angles: np.ndarray  # per boundary cycle entry, radians
    positions3d: np.ndarray     # (L,3) current positions (centers: centroids)

    @property
    def n_locals(self):
        return len(self.uv)

    def uv_of_vertex(self, v):
        return self.uv[self.local_of[v]]

    def face_center_uv(self, f):
        return self.uv[self.center_locals[f]]

    def harmonic_residual(self) -> float:
        """Max deviation of interior uv from its neighbor average."""
        L = self.n_locals
        fixed = np.zeros(L, dtype=bool)
        fixed[self.boundary_locals] = True
        nbrs = [set() for _ in range(L)]
        for t in self.tri_faces:
            a, b, c = (int(x) for x in t)
            nbrs[a].update((b, c))
            nbrs[b].update((a, c))
            nbrs[c].update((a, b))
        worst = 0.0
        for i in range(L):
            if fixed[i] or not nbrs[i]:
                continue
            avg = self.uv[sorted(nbrs[i])].mean(axis=0)
            worst = max(worst, float(np.abs(avg - self.uv[i]).max()))
        return worst


def harmonic_disk_map(mesh: PolyMesh, patch: Patch) -> ParamPatch:
    """Flatten a disk patch to the unit circle; see module docstring."""
    cycle = patch_boundary_halfedges(mesh, patch.faces)
    bverts = [int(mesh.h_origin[h]) for h in cycle]
    if patch.reference_vertex not in bverts:
        raise TopologyError(
            f"reference vertex {patch.reference_vertex} not on patch boundary"
        )
    i0 = bverts.index(patch.reference_vertex)
    bverts = bverts[i0:] + bverts[:i0]

    verts, tris, tri_src, centers = center_split(mesh, patch.faces)
    local = {v: i for i, v in enumerate(verts)}
    L = len(verts) + len(centers)

    pts = mesh.positions[bverts]
    chords = np.linalg.norm(np.roll(pts, -1, axis=0) - pts, axis=1)
    total = chords.sum()
    if total <= 0:
        raise SolverError("degenerate patch boundary (zero length)")
    theta = np.zeros(len(bverts))
    theta[1:] = 2.0 * np.pi * np.cumsum(chords[:-1]) / total
    buv = np.stack([np.cos(theta), np.sin(theta)], axis=1)
    buv[0] = (1.0, 0.0)  # exact anchor

    boundary_locals = [local[v] for v in bverts]
    uv = np.zeros((L, 2))
    is_boundary = np.zeros(L, dtype=bool)
    for bl, p in zip(boundary_locals, buv):
        uv[bl] = p
        is_boundary[bl] = True

    free = np.flatnonzero(~is_boundary)
    if free.size:
        free_index = np.full(L, -1, dtype=np.int64)
        free_index[free] = np.arange(free.size)
        edges = set()
        for t in tris:
            a, b, c = (int(x) for x in t)
            edges.update(((min(a, b), max(a, b)), (min(b, c), max(b, c)),
                          (min(a, c), max(a, c))))
        rows, cols, vals = [], [], []
        rhs = np.zeros((free.size, 2))
        deg = np.zeros(L)
        for a, b in edges:
            deg[a] += 1
            deg[b] += 1
            for x, y in ((a, b), (b, a)):
                if not is_boundary[x]:
                    if is_boundary[y]:
                        rhs[free_index[x]] += uv[y]
                    else:
                        rows.append(free_index[x])
                        cols.append(free_index[y])
                        vals.append(-1.0)
        for x in free:
            rows.append(free_index[x])
            cols.append(free_index[x])
            vals.append(deg[x])
        A = sp.csr_matrix((vals, (rows, cols)), shape=(free.size, free.size))
        try:
            sol = spla.spsolve(A.tocsc(), rhs)
        except Exception as exc:
            raise SolverError(f"harmonic solve failed: {exc}")
        sol = np.atleast_2d(sol).reshape(free.size, 2)
        if not np.isfinite(sol).all():
            raise SolverError("harmonic solve produced non-finite uv")
        uv[free] = sol

    # injectivity: all uv triangles must keep positive signed area
    p0, p1, p2 = uv[tris[:, 0]], uv[tris[:, 1]], uv[tris[:, 2]]
    areas = 0.5 * ((p1[:, 0] - p0[:, 0]) * (p2[:, 1] - p0[:, 1])
                   - (p1[:, 1] - p0[:, 1]) * (p2[:, 0] - p0[:, 0]))
    if areas.min() <= 0.0:
        raise SolverError(
            f"harmonic map not injective (min signed area {areas.min():.3e})"
        )

    positions3d = np.zeros((L, 3))
    positions3d[:len(verts)] = mesh.positions[verts]
    for f, cl in centers.items():
        positions3d[cl] = mesh.positions[list(mesh.faces[f])].mean(axis=0)

    return ParamPatch(
        patch=patch, verts=verts, local_of=local, tri_faces=tris,
        tri_source_face=tri_src, uv=uv, center_locals=centers,
        boundary_locals=boundary_locals, boundary_angles=theta,
        positions3d=positions3d,
    )


def locate_points(param: ParamPatch, q) -> tuple[np.ndarray, np.ndarray]:
    """Enclosing triangle and barycentric coordinates for query points.

    Points outside every triangle (numeric gaps near the circle) fall back
    to the triangle with the least-negative barycentric slack, clamped and
    renormalized.
    """
    q = np.atleast_2d(np.asarray(q, dtype=np.float64))
    tris = param.tri_faces
    if len(tris) == 0:
        raise TopologyError("empty parametrized patch")
    a = param.uv[tris[:, 0]]
    b = param.uv[tris[:, 1]]
    c = param.uv[tris[:, 2]]
    v0 = b - a
    v1 = c - a
    det = v0[:, 0] * v1[:, 1] - v0[:, 1] * v1[:, 0]  # positive by injectivity
    d = q[:, None, :] - a[None, :, :]
    w1 = (d[:, :, 0] * v1[None, :, 1] - d[:, :, 1] * v1[None, :, 0]) / det
    w2 = (v0[None, :, 0] * d[:, :, 1] - v0[None, :, 1] * d[:, :, 0]) / det
    w0 = 1.0 - w1 - w2
    slack = np.minimum(np.minimum(w0, w1), w2)
    tri_idx = np.argmax(slack, axis=1)
    rows = np.arange(len(q))
    bary = np.stack([w0[rows, tri_idx], w1[rows, tri_idx], w2[rows, tri_idx]],
                    axis=1)
    outside = slack[rows, tri_idx] < -1e-9
    if outside.any():
        bb = np.clip(bary[outside], 0.0, None)
        bary[outside] = bb / bb.sum(axis=1, keepdims=True)
    return tri_idx, bary


def locate_point(param: ParamPatch, q):
    """Single-point convenience wrapper around locate_points."""
    tri, bary = locate_points(param, np.asarray(q, dtype=np.float64)[None, :])
    return int(tri[0]), bary[0]


def interpolate(param: ParamPatch, values: np.ndarray, q) -> np.ndarray:
    """Barycentric interpolation of per-local values at 2D query points."""
    tri, bary = locate_points(param, q)
    corner = param.tri_faces[tri]
    vals = np.asarray(values)
    return np.einsum("qk,qk...->q...", bary, vals[corner])
