"""Applying extrusions to arbitrary disk patches.

Two halves live here. Selection: given a closed uv loop (a dequantized
region curve) and the harmonic map of a candidate face set, find the faces
the loop encloses, either on the existing quad structure (flux-weighted
spanning forest + DTW cycle matching) or by cutting the patch along the
loop (constrained Delaunay, quad-dominant output). Application: realize an
extrusion record on a patch by interpolating its displacement field over
the patch's harmonic map and averaging across boundary frames.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import shapely
from shapely.geometry import Polygon

from . import kernels
from .errors import FeqTeeError, FrameError, SelectionError, TopologyError
from .mesh import (
    MeshMaps,
    Patch,
    PolyMesh,
    extrude_patch,
    patch_boundary_halfedges,
)
from .param import (
    ParamPatch,
    angle_of,
    flatten_interior,
    harmonic_disk_map,
    interpolate,
    locate_points,
)
from .records import ExtrusionRecord

DEFAULT_EDGE_SAMPLES = 5
DEFAULT_SKIP_MARGIN = 0.05


@dataclass
class LocalFrame:
    """Right-handed orthonormal frame at a patch boundary vertex."""

    origin: np.ndarray
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray

    @property
    def matrix(self) -> np.ndarray:
        """Columns x,y,z: maps local coordinates to world."""
        return np.stack([self.x, self.y, self.z], axis=1)


from dataclasses import field


@dataclass
class SelectionResult:
    faces: set
    cycle: list       # boundary vertex ids of the winning cycle
    dtw_score: float
    new_vertex_uv: dict = field(default_factory=dict)  # cut vertices -> uv


def vertex_normal(mesh: PolyMesh, v: int, faces=None) -> np.ndarray:
    """Area-weighted vertex normal (sum of incident Newell face normals),
    optionally restricted to a face subset."""
    n = np.zeros(3)
    normals = mesh.face_normals()
    for h in mesh.out_halfedges(v):
        f = int(mesh.h_face[h])
        if faces is None or f in faces:
            n += normals[f]
    return n


def _frame_from(pos_v, pos_next, normal):
    x = pos_next - pos_v
    lx = np.linalg.norm(x)
    if lx < 1e-15:
        raise FrameError("zero-length boundary tangent")
    x = x / lx
    z = normal - np.dot(normal, x) * x
    lz = np.linalg.norm(z)
    if lz < 1e-12:
        raise FrameError("degenerate vertex normal (parallel to tangent)")
    z = z / lz
    y = np.cross(z, x)
    return x, y, z


def local_frame(mesh: PolyMesh, boundary_vertex: int, patch: Patch) -> LocalFrame:
    """Frame at one patch boundary vertex: x along the outgoing boundary
    tangent, z the re-orthogonalized patch vertex normal, y = z cross x."""
    cycle = patch_boundary_halfedges(mesh, patch.faces)
    verts = [int(mesh.h_origin[h]) for h in cycle]
    if boundary_vertex not in verts:
        raise FrameError(f"vertex {boundary_vertex} not on the patch boundary")
    i = verts.index(boundary_vertex)
    nxt = verts[(i + 1) % len(verts)]
    n = vertex_normal(mesh, boundary_vertex, patch.faces)
    if np.linalg.norm(n) < 1e-15:
        raise FrameError(f"vertex {boundary_vertex} has a zero normal")
    x, y, z = _frame_from(mesh.positions[boundary_vertex], mesh.positions[nxt], n)
    return LocalFrame(mesh.positions[boundary_vertex].copy(), x, y, z)


def boundary_frames(mesh: PolyMesh, boundary_verts, faces) -> np.ndarray:
    """(B,3,3) frame matrices for an ordered patch boundary vertex cycle."""
    normals = mesh.face_normals()
    faces = set(int(f) for f in faces)
    out = np.empty((len(boundary_verts), 3, 3))
    for i, v in enumerate(boundary_verts):
        n = np.zeros(3)
        for h in mesh.out_halfedges(v):
            f = int(mesh.h_face[h])
            if f in faces:
                n += normals[f]
        nxt = boundary_verts[(i + 1) % len(boundary_verts)]
        x, y, z = _frame_from(mesh.positions[v], mesh.positions[nxt], n)
        out[i] = np.stack([x, y, z], axis=1)
    return out


# -- scoring -----------------------------------------------------------------


def edge_weight(endpoints, loop, k: int = DEFAULT_EDGE_SAMPLES) -> float:
    """Weight of one uv edge against a closed loop polyline.

    Small for edges running parallel and close to the loop, large for
    orthogonal or distant edges; see kernels.edge_weights for the formula.
    """
    if k < 1:
        raise ValueError("need at least one sample")
    loop = np.asarray(loop, dtype=np.float64)
    if len(loop) < 3:
        raise ValueError("loop needs at least 3 segments")
    e = np.asarray(endpoints, dtype=np.float64).reshape(1, 2, 2)
    return float(kernels.edge_weights(e, loop, k)[0])


def dtw_distance(a, b) -> float:
    """Cyclic DTW: min over rotations of `a`, Euclidean cost, symmetric steps."""
    return kernels.dtw_cyclic(np.asarray(a, float), np.asarray(b, float))


def _face_center_uv(param: ParamPatch, mesh: PolyMesh, f: int) -> np.ndarray:
    if f in param.center_locals:
        return param.uv[param.center_locals[f]]
    return np.mean([param.uv_of_vertex(v) for v in mesh.faces[f]], axis=0)


class _Forest:
    def __init__(self):
        self.parent = {}
        self.adj = {}

    def find(self, x):
        r = x
        while self.parent.setdefault(r, r) != r:
            r = self.parent[r]
        while self.parent[x] != r:
            self.parent[x], x = r, self.parent[x]
        return r

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        self.parent[ra] = rb
        self.adj.setdefault(a, []).append(b)
        self.adj.setdefault(b, []).append(a)
        return True

    def path(self, a, b):
        """Unique tree path a..b (BFS over the inserted adjacency)."""
        prev = {a: None}
        queue = [a]
        while queue:
            x = queue.pop(0)
            if x == b:
                break
            for y in self.adj.get(x, ()):
                if y not in prev:
                    prev[y] = x
                    queue.append(y)
        if b not in prev:
            return None
        path = [b]
        while prev[path[-1]] is not None:
            path.append(prev[path[-1]])
        return path[::-1]


def select_patch_pure_quad(mesh: PolyMesh, param: ParamPatch, loop_pts,
                           k: int = DEFAULT_EDGE_SAMPLES,
                           skip_margin: float = DEFAULT_SKIP_MARGIN,
                           faces=None) -> SelectionResult:
    """Find the face set enclosed by a loop, on the existing quad structure.

    Edges are weighted against the loop, inserted ascending into a forest
    (edges strictly inside the loop are skipped), and every edge that would
    close a cycle contributes a candidate; the candidate with the lowest
    cyclic DTW distance to the loop wins.
    """
    loop_pts = np.asarray(loop_pts, dtype=np.float64)
    if len(loop_pts) < 3:
        raise SelectionError("region loop needs at least 3 points")
    face_list = sorted(param.patch.faces if faces is None else faces)

    pairs = set()
    for f in face_list:
        cyc = mesh.faces[f]
        for i in range(len(cyc)):
            a, b = cyc[i], cyc[(i + 1) % len(cyc)]
            pairs.add((min(a, b), max(a, b)))
    pairs = sorted(pairs)
    if not pairs:
        raise SelectionError("no candidate edges")
    ends = np.array([[param.uv_of_vertex(a), param.uv_of_vertex(b)]
                     for a, b in pairs])
    weights = kernels.edge_weights(ends, loop_pts, k)

    # skip edges strictly inside the loop (both endpoints inside and the
    # edge well clear of the curve, so quantization wiggle never skips a
    # true boundary edge)
    flat = ends.reshape(-1, 2)
    winds = kernels.winding_numbers(loop_pts, flat).reshape(-1, 2)
    inside_both = (winds != 0).all(axis=1)
    d0 = np.sqrt(_min_dist2_to_loop(ends[:, 0], loop_pts))
    d1 = np.sqrt(_min_dist2_to_loop(ends[:, 1], loop_pts))
    skip = inside_both & (np.minimum(d0, d1) > skip_margin)

    order = np.argsort(weights, kind="stable")
    forest = _Forest()
    candidates = []
    for ei in order:
        if skip[ei]:
            continue
        a, b = pairs[ei]
        if forest.find(a) == forest.find(b):
            path = forest.path(a, b)
            if path is not None and len(path) >= 3:
                candidates.append(path)
        else:
            forest.union(a, b)
    if not candidates:
        raise SelectionError("no cycle found among weighted edges")

    best, best_score = None, np.inf
    for cyc in candidates:
        poly = np.array([param.uv_of_vertex(v) for v in cyc])
        score = min(dtw_distance(poly, loop_pts),
                    dtw_distance(poly[::-1], loop_pts))
        if score < best_score:
            best, best_score = cyc, score
    poly = np.array([param.uv_of_vertex(v) for v in best])
    centers = np.array([_face_center_uv(param, mesh, f) for f in face_list])
    inside = kernels.winding_numbers(poly, centers) != 0
    chosen = {f for f, keep in zip(face_list, inside) if keep}
    if not chosen:
        raise SelectionError("winning cycle encloses no faces")
    return SelectionResult(chosen, list(best), float(best_score))


def _min_dist2_to_loop(pts, loop):
    s0 = loop
    s1 = np.roll(loop, -1, axis=0)
    d = s1 - s0
    L2 = np.maximum((d * d).sum(axis=1), 1e-300)
    w = pts[:, None, :] - s0[None, :, :]
    t = np.clip((w * d[None, :, :]).sum(axis=2) / L2[None, :], 0.0, 1.0)
    proj = s0[None, :, :] + t[:, :, None] * d[None, :, :]
    diff = pts[:, None, :] - proj
    return (diff * diff).sum(axis=2).min(axis=1)


# -- quad-dominant cut ---------------------------------------------------------


def select_patch_quad_dominant(mesh: PolyMesh, param: ParamPatch, loop_pts,
                               faces=None, snap_tol: float = 1e-6,
                               classify_mesh: PolyMesh | None = None):
    """Cut the patch along the loop's uv preimage and select the inside.

    Faces crossed by the loop are split into their inside and outside
    pieces; each piece is constrained-Delaunay triangulated (the loop edges
    are piece boundaries, hence preserved). Returns
    (new PolyMesh, SelectionResult, MeshMaps).

    Loop points within snap_tol of an existing vertex snap onto it; with a
    tolerance near the generic-disk spacing this turns curves that were
    quantized from vertex polylines back into exact edge paths, so such
    cuts degenerate to no-ops instead of shaving slivers off every face.

    classify_mesh supplies the face cycles matching the param snapshot when
    the current mesh has re-anchored some faces since; only faces the loop
    actually crosses must still have their current corners in the snapshot.
    """
    loop_pts = np.asarray(loop_pts, dtype=np.float64).copy()
    face_list = sorted(param.patch.faces if faces is None else faces)
    cls_mesh = classify_mesh if classify_mesh is not None else mesh

    verts_uv = np.array([param.uv_of_vertex(v) for v in param.verts])
    for i, p in enumerate(loop_pts):
        d2 = ((verts_uv - p) ** 2).sum(axis=1)
        j = int(np.argmin(d2))
        if d2[j] < snap_tol * snap_tol:
            loop_pts[i] = verts_uv[j]
    keep = np.ones(len(loop_pts), dtype=bool)
    for i in range(len(loop_pts)):
        if np.array_equal(loop_pts[i], loop_pts[(i + 1) % len(loop_pts)]):
            keep[(i + 1) % len(loop_pts)] = False
    loop_pts = loop_pts[keep]
    if len(loop_pts) < 3:
        raise SelectionError("region loop is degenerate in uv")
    loop_poly = Polygon(loop_pts)
    if not loop_poly.is_valid or loop_poly.area <= 1e-12:
        raise SelectionError("region loop is degenerate in uv")

    # classify every candidate face against the loop in the snapshot domain
    crossed = []
    cut_pieces = {}
    for f in face_list:
        corners = [param.uv_of_vertex(v) for v in cls_mesh.faces[f]]
        fpoly = Polygon(corners)
        inter = fpoly.intersection(loop_poly)
        if inter.is_empty or inter.area < 1e-12:
            continue  # wholly outside
        if inter.area > fpoly.area - 1e-12:
            continue  # wholly inside, keep the face
        crossed.append(f)
        cut_pieces[f] = (inter, fpoly.difference(loop_poly))

    centers = {f: _face_center_uv(param, cls_mesh, f) for f in face_list}
    winding = kernels.winding_numbers(
        loop_pts, np.array([centers[f] for f in face_list])) != 0
    keep_inside = {f: bool(w) for f, w in zip(face_list, winding)}

    if not crossed:
        # pure classification: the loop follows existing edges
        selected = {f for f in face_list if keep_inside[f]}
        if not selected:
            raise SelectionError("loop encloses no area of the patch")
        cycle_hs = patch_boundary_halfedges(mesh, selected)
        cycle = [int(mesh.h_origin[h]) for h in cycle_hs]
        maps = MeshMaps(np.arange(mesh.n_vertices, dtype=np.int64),
                        np.arange(mesh.n_faces, dtype=np.int64))
        return mesh, SelectionResult(selected, cycle, 0.0), maps

    for f in crossed:
        if any(v not in param.local_of for v in mesh.faces[f]):
            raise SelectionError(
                f"face {f} was re-anchored since the domain snapshot; "
                "quad-dominant cut unavailable"
            )

    # vertex pool keyed by rounded uv, seeded with the existing patch verts
    pool = {}
    for v in param.verts:
        pool[_uvkey(param.uv_of_vertex(v))] = int(v)
    new_positions = []
    # current 3D geometry sampled at every interpolation node
    vals3d = np.zeros((param.n_locals, 3))
    for v in param.verts:
        vals3d[param.local_of[v]] = mesh.positions[v]
    for f, cl in param.center_locals.items():
        vals3d[cl] = mesh.positions[list(cls_mesh.faces[f])].mean(axis=0)

    new_vertex_uv = {}

    def vertex_at(uvp):
        key = _uvkey(uvp)
        if key in pool:
            return pool[key]
        vid = mesh.n_vertices + len(new_positions)
        pool[key] = vid
        new_vertex_uv[vid] = np.asarray(uvp, dtype=float).copy()
        p3 = interpolate(param, vals3d, np.asarray(uvp, dtype=float)[None, :])[0]
        new_positions.append(p3)
        return vid

    replaced = {}   # old face id -> list of new triangle cycles (global ids)
    inside_new = {}  # old face id -> list of booleans per new triangle
    for f in crossed:
        inter, outer = cut_pieces[f]
        cycles, flags = [], []
        for t in _triangulate_piece(inter):
            cycles.append([vertex_at(p) for p in t])
            flags.append(True)
        for t in _triangulate_piece(outer):
            cycles.append([vertex_at(p) for p in t])
            flags.append(False)
        replaced[f] = cycles
        inside_new[f] = flags

    all_faces = []
    face_map = np.full(mesh.n_faces, -1, dtype=np.int64)
    selected = set()
    for f in range(mesh.n_faces):
        if f in replaced:
            continue
        face_map[f] = len(all_faces)
        all_faces.append(list(mesh.faces[f]))
        if keep_inside.get(f, False):
            selected.add(len(all_faces) - 1)
    new_face_ids = []
    for f, cycles in replaced.items():
        for cyc, is_in in zip(cycles, inside_new[f]):
            fid = len(all_faces)
            all_faces.append(cyc)
            new_face_ids.append(fid)
            if is_in:
                selected.add(fid)
    if not selected:
        raise SelectionError("loop encloses no area of the patch")

    pos = np.vstack([mesh.positions] + ([new_positions] if new_positions else []))
    try:
        out = PolyMesh(pos, all_faces)
    except FeqTeeError as exc:
        raise SelectionError(f"quad-dominant cut produced bad connectivity: {exc}")
    # conservation check: a cut must not open the surface (T-junctions from
    # grazing intersections or dropped slivers show up as new boundary edges)
    if int((out.h_twin < 0).sum()) != int((mesh.h_twin < 0).sum()):
        raise SelectionError(
            "quad-dominant cut produced cracks (loop grazes the patch grid)"
        )
    maps = MeshMaps(np.arange(mesh.n_vertices, dtype=np.int64), face_map,
                    new_faces=new_face_ids)
    cycle_hs = patch_boundary_halfedges(out, selected)
    cycle = [int(out.h_origin[h]) for h in cycle_hs]
    return out, SelectionResult(selected, cycle, 0.0, new_vertex_uv), maps


def _uvkey(p):
    return (round(float(p[0]), 9), round(float(p[1]), 9))


def _triangulate_piece(geom):
    """Constrained Delaunay triangles of a (Multi)Polygon as coord triples."""
    tris = []
    if geom.is_empty:
        return tris
    geoms = getattr(geom, "geoms", [geom])
    for g in geoms:
        if g.is_empty or g.area < 1e-12 or not isinstance(g, Polygon):
            continue
        cdt = shapely.constrained_delaunay_triangles(g)
        for t in getattr(cdt, "geoms", [cdt]):
            coords = list(t.exterior.coords)[:3]
            a, b, c = (np.asarray(p) for p in coords)
            area2 = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
            if abs(area2) < 1e-13:
                continue
            if area2 < 0:
                coords = [coords[0], coords[2], coords[1]]
            tris.append(coords)
    return tris


# -- applying records ----------------------------------------------------------


@dataclass
class ApplyOutcome:
    mesh: PolyMesh
    cap: Patch        # the re-anchored base faces (next patch when chaining)
    extended: Patch   # cap plus the new loop, reference on the outer boundary
    loop: object
    maps: MeshMaps
    param: ParamPatch       # map of the (smoothed) input patch
    ext_param: ParamPatch   # map of the extended patch on the output mesh


def min_angle_vertex(uv_by_vertex: dict) -> int:
    """Deterministic representative of a vertex set in a disk domain: the
    vertex with the smallest (angle, radius, id) triple."""
    best = None
    for v, uv in uv_by_vertex.items():
        key = (float(angle_of(np.asarray(uv))), float(np.linalg.norm(uv)), int(v))
        if best is None or key < best[0]:
            best = (key, int(v))
    if best is None:
        raise SelectionError("empty vertex set for reference choice")
    return best[1]


def _circular_nearest(source_angles: np.ndarray, target_angles: np.ndarray):
    """For each target angle, the index of the circularly nearest source."""
    d = np.abs(target_angles[:, None] - source_angles[None, :])
    d = np.minimum(d, 2.0 * np.pi - d)
    return np.argmin(d, axis=1)


def apply_extrusion(mesh: PolyMesh, patch: Patch,
                    rec: ExtrusionRecord) -> ApplyOutcome:
    """Extrude a disk patch with the geometry of an extrusion record.

    Pipeline: flatten the patch interior (harmonic), harmonic-map it,
    topologically extrude, then displace every new-side vertex by the
    record's field sampled at its uv: the field value (one local vector per
    source boundary frame) is pushed through the target boundary frame
    paired by nearest angle and averaged over all target boundary vertices.
    """
    smoothed = flatten_interior(mesh, patch)
    param = harmonic_disk_map(smoothed, patch)

    bverts = [param.verts[i] for i in param.boundary_locals]
    frames = boundary_frames(smoothed, bverts, patch.faces)  # (B_t,3,3)
    pair = _circular_nearest(rec.boundary_angles, param.boundary_angles)
    # combined operator: mean over targets of frame_t applied to the source
    # frame b*(t)'s local vector
    n_src = len(rec.boundary_angles)
    combined = np.zeros((n_src, 3, 3))
    for t, b in enumerate(pair):
        combined[b] += frames[t]
    combined /= len(bverts)

    ext_mesh, loop, maps = extrude_patch(smoothed, patch)

    boundary_set = set(bverts)
    interior = [v for v in param.verts if v not in boundary_set]
    targets = interior + [maps.dup_vertex[v] for v in bverts]
    queries = np.array([param.uv_of_vertex(v) for v in interior]
                       + [param.uv_of_vertex(v) for v in bverts])
    if len(queries):
        tri, bary = locate_points(_record_domain(rec), queries)
        corners = rec.base_tris[tri]                    # (Q,3)
        nodal = rec.displacements[:, corners, :]        # (B_s,Q,3,3)
        local = np.einsum("qk,bqkx->qbx", bary, nodal)  # (Q,B_s,3)
        world = np.einsum("bij,qbj->qi", combined, local)
        pos = ext_mesh.positions.copy()
        pos[targets] += world
        ext_mesh = ext_mesh.with_positions(pos)

    extended = Patch.of(set(patch.faces) | set(loop.faces),
                        patch.reference_vertex)
    ext_param = harmonic_disk_map(ext_mesh, extended)
    cap_ref = min_angle_vertex({
        maps.dup_vertex[v]: ext_param.uv_of_vertex(maps.dup_vertex[v])
        for v in bverts
    })
    cap = Patch.of(patch.faces, cap_ref)
    return ApplyOutcome(ext_mesh, cap, extended, loop, maps, param, ext_param)


class _record_domain:
    """Adapter exposing a record's uv triangulation to locate_points."""

    def __init__(self, rec: ExtrusionRecord):
        self.uv = rec.base_uv
        self.tri_faces = rec.base_tris
