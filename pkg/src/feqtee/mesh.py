"""Halfedge polygonal mesh kernel.

PolyMesh stores vertex positions plus a halfedge structure derived from
face vertex cycles. Operations never mutate a mesh in place: they return
a new PolyMesh together with MeshMaps describing how vertex and face ids
moved, so callers can track entities across a pipeline of operations.

Face loops: on an all-quad mesh each face has two pairs of opposite
edges; walking from a face across one opposite-edge pair and continuing
straight yields a cyclic ribbon of faces. The edges crossed are the
loop's sleepers, the two side boundaries its rails.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateResultError,
    NonManifoldError,
    NotQuadError,
    TopologyError,
    UnsupportedLoopError,
)
from . import obj_io


class PolyMesh:
    """Immutable-by-convention polygonal surface mesh.

    Construction validates edge-level manifoldness (each undirected edge
    carries at most two halfedges, in opposite directions). Vertex-level
    manifoldness (single fans) is checked by validate_manifold(), which
    operations with nontrivial stitching call themselves.
    """

    def __init__(self, positions, faces, _full_check=False):
        self.positions = np.array(positions, dtype=np.float64).reshape(-1, 3)
        self.faces = [tuple(int(v) for v in f) for f in faces]
        nv = len(self.positions)
        nf = len(self.faces)

        counts = np.fromiter((len(f) for f in self.faces), dtype=np.int64, count=nf)
        if nf and counts.min() < 3:
            raise NonManifoldError("face with fewer than 3 vertices")
        self._f_off = np.zeros(nf + 1, dtype=np.int64)
        np.cumsum(counts, out=self._f_off[1:])
        nh = int(self._f_off[-1])

        if nf:
            flat = np.concatenate([np.asarray(f, dtype=np.int64) for f in self.faces])
        else:
            flat = np.zeros(0, dtype=np.int64)
        if nh and (flat.min() < 0 or flat.max() >= nv):
            raise NonManifoldError("face vertex index out of range")

        self.h_origin = flat
        self.h_face = np.repeat(np.arange(nf, dtype=np.int64), counts)
        idx = np.arange(nh, dtype=np.int64)
        self.h_next = idx + 1
        if nf:
            self.h_next[self._f_off[1:] - 1] = self._f_off[:-1]
        self.h_prev = np.empty(nh, dtype=np.int64)
        self.h_prev[self.h_next] = idx
        self.h_dest = self.h_origin[self.h_next]

        # repeated vertex inside one face = degenerate face
        for f, cyc in enumerate(self.faces):
            if len(set(cyc)) != len(cyc):
                raise NonManifoldError(f"face {f} repeats a vertex")

        self._match_twins(nv, nh)
        self._out_csr = None
        if _full_check:
            self.validate_manifold()

    # -- construction internals -------------------------------------------

    def _match_twins(self, nv, nh):
        u, v = self.h_origin, self.h_dest
        key = np.minimum(u, v) * np.int64(nv + 1) + np.maximum(u, v)
        order = np.argsort(key, kind="stable")
        ks = key[order]
        starts = np.flatnonzero(np.r_[True, ks[1:] != ks[:-1]])
        run_len = np.diff(np.r_[starts, nh])
        if nh and run_len.max() > 2:
            i = order[starts[int(np.argmax(run_len > 2))]]
            raise NonManifoldError(
                f"edge ({u[i]}, {v[i]}) is shared by more than 2 faces"
            )
        self.h_twin = np.full(nh, -1, dtype=np.int64)
        pair_starts = starts[run_len == 2]
        if pair_starts.size:
            h1 = order[pair_starts]
            h2 = order[pair_starts + 1]
            same_dir = u[h1] == u[h2]
            if same_dir.any():
                i = h1[int(np.argmax(same_dir))]
                raise NonManifoldError(
                    f"edge ({u[i]}, {v[i]}) traversed twice in the same direction "
                    "(inconsistent orientation or >2 incident faces)"
                )
            self.h_twin[h1] = h2
            self.h_twin[h2] = h1

        # edge table, ordered by sorted (min,max) vertex pair
        ne = starts.size
        self.h_edge = np.empty(nh, dtype=np.int64)
        edge_of_run = np.repeat(np.arange(ne, dtype=np.int64), run_len)
        self.h_edge[order] = edge_of_run
        first_h = order[starts]
        self.edges = np.stack(
            [np.minimum(u, v)[first_h], np.maximum(u, v)[first_h]], axis=1
        ) if ne else np.zeros((0, 2), dtype=np.int64)
        # canonical halfedge per edge: the lower halfedge id
        self.edge_halfedge = first_h.copy()
        if pair_starts.size:
            pair_edges = edge_of_run[pair_starts]
            self.edge_halfedge[pair_edges] = np.minimum(h1, h2)
        self._edge_keys = ks[starts]
        self._nv_key = nv + 1

    # -- basic queries -----------------------------------------------------

    @property
    def n_vertices(self):
        return len(self.positions)

    @property
    def n_faces(self):
        return len(self.faces)

    @property
    def n_edges(self):
        return len(self.edges)

    @property
    def n_halfedges(self):
        return len(self.h_origin)

    def face_halfedges(self, f):
        return range(int(self._f_off[f]), int(self._f_off[f + 1]))

    def find_edge(self, a, b) -> int:
        """Edge id for the undirected vertex pair (a, b), or -1."""
        key = min(a, b) * self._nv_key + max(a, b)
        i = int(np.searchsorted(self._edge_keys, key))
        if i < len(self._edge_keys) and self._edge_keys[i] == key:
            return i
        return -1

    def edge_faces(self, e):
        h = self.edge_halfedge[e]
        t = self.h_twin[h]
        return (int(self.h_face[h]), int(self.h_face[t]) if t >= 0 else -1)

    def is_interior_edge(self, e) -> bool:
        return self.h_twin[self.edge_halfedge[e]] >= 0

    def is_closed(self) -> bool:
        return bool((self.h_twin >= 0).all())

    def _out_halfedges(self):
        """CSR of outgoing halfedges per vertex."""
        if self._out_csr is None:
            order = np.argsort(self.h_origin, kind="stable")
            counts = np.bincount(self.h_origin, minlength=self.n_vertices)
            off = np.zeros(self.n_vertices + 1, dtype=np.int64)
            np.cumsum(counts, out=off[1:])
            self._out_csr = (off, order)
        return self._out_csr

    def out_halfedges(self, v):
        off, order = self._out_halfedges()
        return order[off[v]:off[v + 1]]

    def vertex_neighbors(self, v):
        ns = set()
        for h in self.out_halfedges(v):
            ns.add(int(self.h_dest[h]))
            # boundary incoming edges have no outgoing twin
            p = self.h_prev[h]
            ns.add(int(self.h_origin[p]))
        return ns

    def face_normals(self) -> np.ndarray:
        """Newell normals, not normalized (length = 2 * area for planar faces)."""
        n = np.zeros((self.n_faces, 3))
        p = self.positions
        a = p[self.h_origin]
        b = p[self.h_dest]
        cr = np.cross(a, b)
        np.add.at(n, self.h_face, cr)
        return n

    def face_areas(self) -> np.ndarray:
        return 0.5 * np.linalg.norm(self.face_normals(), axis=1)

    def face_centroid(self, f) -> np.ndarray:
        return self.positions[list(self.faces[f])].mean(axis=0)

    def bbox_diagonal(self) -> float:
        if self.n_vertices == 0:
            return 0.0
        span = self.positions.max(axis=0) - self.positions.min(axis=0)
        return float(np.linalg.norm(span))

    def with_positions(self, positions) -> "PolyMesh":
        """Same connectivity, new coordinates (no revalidation needed)."""
        out = object.__new__(PolyMesh)
        out.__dict__.update(self.__dict__)
        out.positions = np.array(positions, dtype=np.float64).reshape(-1, 3)
        if len(out.positions) != self.n_vertices:
            raise ValueError("position count mismatch")
        return out

    def copy(self) -> "PolyMesh":
        return self.with_positions(self.positions.copy())

    # -- validation ---------------------------------------------------------

    def validate_manifold(self):
        """Full manifoldness check: single fan of faces around every vertex."""
        off, order = self._out_halfedges()
        twin, prev, nxt = self.h_twin, self.h_prev, self.h_next
        for v in range(self.n_vertices):
            k = int(off[v + 1] - off[v])
            if k == 0:
                continue
            start = int(order[off[v]])
            # rotate one way: cross the incoming (previous) edge
            seen = 1
            h = start
            hit_boundary = False
            while seen <= k:
                t = int(twin[prev[h]])
                if t == start:
                    break
                if t < 0:
                    hit_boundary = True
                    break
                h = t
                seen += 1
            if hit_boundary:
                # open fan: also rotate the other way from start
                g = start
                while seen <= k:
                    tw = int(twin[g])
                    if tw < 0:
                        break
                    g = int(nxt[tw])
                    seen += 1
            if seen != k:
                raise NonManifoldError(f"vertex {v} has a non-fan face star")
        return True

    def euler_characteristic(self) -> int:
        used = np.zeros(self.n_vertices, dtype=bool)
        if self.n_halfedges:
            used[self.h_origin] = True
        return int(used.sum()) - self.n_edges + self.n_faces

    def connected_face_components(self, exclude=frozenset()):
        """Face component labels via shared-edge adjacency; excluded get -1."""
        comp = np.full(self.n_faces, -1, dtype=np.int64)
        cid = 0
        for f0 in range(self.n_faces):
            if comp[f0] >= 0 or f0 in exclude:
                continue
            stack = [f0]
            comp[f0] = cid
            while stack:
                f = stack.pop()
                for h in self.face_halfedges(f):
                    t = self.h_twin[h]
                    if t < 0:
                        continue
                    g = int(self.h_face[t])
                    if comp[g] < 0 and g not in exclude:
                        comp[g] = cid
                        stack.append(g)
            cid += 1
        return comp, cid


@dataclass
class MeshMaps:
    """Id bookkeeping for one mesh operation (old mesh -> new mesh)."""

    vertex_map: np.ndarray  # old vertex id -> new id (merged verts land on survivor)
    face_map: np.ndarray    # old face id -> new id, -1 for removed faces
    new_faces: list = field(default_factory=list)     # face ids created by the op
    dup_vertex: dict = field(default_factory=dict)    # extrude: original -> duplicate
    merged_pairs: list = field(default_factory=list)  # collapse: (dying, survivor) old ids


@dataclass
class FaceLoop:
    """Cyclic ribbon of quad faces; sleepers[i] is the edge entering faces[i]."""

    faces: list
    sleepers: list
    rails: tuple
    entry_halfedges: list
    self_intersecting: bool
    self_adjacent: bool

    def __len__(self):
        return len(self.faces)

    def canonical_key(self):
        """Smallest rotation of min(faces, reversed faces); dedup key."""
        seq = tuple(self.faces)
        best = None
        for cand in (seq, tuple(reversed(seq))):
            for r in range(len(cand)):
                rot = cand[r:] + cand[:r]
                if best is None or rot < best:
                    best = rot
        return best


@dataclass(frozen=True)
class Patch:
    """Face subset with a boundary vertex fixing parametric orientation."""

    faces: frozenset
    reference_vertex: int

    @staticmethod
    def of(faces, reference_vertex):
        return Patch(frozenset(int(f) for f in faces), int(reference_vertex))


@dataclass
class FeqReport:
    is_closed: bool
    connected: bool
    genus: int | None
    all_quads: bool
    self_intersecting_loop_ids: list
    self_adjacent_loop_ids: list
    loop_count: int

    @property
    def is_feq(self) -> bool:
        return (
            self.is_closed
            and self.connected
            and self.genus == 0
            and self.all_quads
            and not self.self_intersecting_loop_ids
            and not self.self_adjacent_loop_ids
        )


def load_mesh(path, format="OBJ") -> PolyMesh:
    """Load a polygonal mesh; only the OBJ format is supported."""
    if format.upper() != "OBJ":
        raise ValueError(f"unsupported mesh format: {format}")
    positions, faces = obj_io.read_obj(path)
    mesh = PolyMesh(positions, faces)
    mesh.validate_manifold()
    return mesh


def save_mesh(path, mesh: PolyMesh) -> None:
    obj_io.write_obj(path, mesh.positions, mesh.faces)


def trace_face_loop(mesh: PolyMesh, seed_edge: int) -> FaceLoop:
    """Walk the unique face loop whose sleeper set contains seed_edge.

    Starts at the face on the left of the edge's canonical halfedge and
    repeatedly exits across the opposite edge of each quad.
    """
    h0 = int(mesh.edge_halfedge[seed_edge])
    if mesh.h_twin[h0] < 0:
        raise TopologyError(f"seed edge {seed_edge} is not interior")
    faces, sleepers, entries = [], [], []
    rail_a, rail_b = [], []
    h = h0
    while True:
        f = int(mesh.h_face[h])
        if len(mesh.faces[f]) != 4:
            raise NotQuadError(f"face {f} is not a quad")
        faces.append(f)
        sleepers.append(int(mesh.h_edge[h]))
        entries.append(h)
        rail_a.append(int(mesh.h_edge[mesh.h_next[h]]))
        rail_b.append(int(mesh.h_edge[mesh.h_prev[h]]))
        opp = int(mesh.h_next[mesh.h_next[h]])
        h = int(mesh.h_twin[opp])
        if h < 0:
            raise TopologyError("face loop ran into a mesh boundary")
        if h == h0:
            break

    face_set = set(faces)
    self_intersecting = len(face_set) != len(faces)
    sleeper_set = set(sleepers)
    self_adjacent = False
    for h in entries:
        for side in (mesh.h_next[h], mesh.h_prev[h]):
            if int(mesh.h_edge[side]) in sleeper_set:
                continue
            t = mesh.h_twin[side]
            if t >= 0 and int(mesh.h_face[t]) in face_set:
                self_adjacent = True
                break
        if self_adjacent:
            break
    return FaceLoop(faces, sleepers, (rail_a, rail_b), entries,
                    self_intersecting, self_adjacent)


def enumerate_face_loops(mesh: PolyMesh) -> list:
    """All face loops of an all-quad mesh; every interior edge appears as a
    sleeper of exactly one returned loop."""
    covered = np.zeros(mesh.n_edges, dtype=bool)
    loops = []
    seen_keys = set()
    for e in range(mesh.n_edges):
        if covered[e] or not mesh.is_interior_edge(e):
            continue
        loop = trace_face_loop(mesh, e)
        covered[loop.sleepers] = True
        key = loop.canonical_key()
        if key not in seen_keys:
            seen_keys.add(key)
            loops.append(loop)
    return loops


def validate_feq(mesh: PolyMesh) -> FeqReport:
    """Check the closed / genus-0 / all-quad / clean-loop conditions."""
    closed = mesh.is_closed()
    _, ncomp = mesh.connected_face_components()
    connected = ncomp == 1
    chi = mesh.euler_characteristic()
    genus = (2 - chi) // 2 if (closed and connected and (2 - chi) % 2 == 0) else None
    all_quads = all(len(f) == 4 for f in mesh.faces)
    bad_self_int, bad_self_adj = [], []
    loop_count = 0
    if all_quads and closed:
        loops = enumerate_face_loops(mesh)
        loop_count = len(loops)
        for i, loop in enumerate(loops):
            if loop.self_intersecting:
                bad_self_int.append(i)
            if loop.self_adjacent:
                bad_self_adj.append(i)
    return FeqReport(closed, connected, genus, all_quads,
                     bad_self_int, bad_self_adj, loop_count)


# -- patches ---------------------------------------------------------------


def patch_boundary_halfedges(mesh: PolyMesh, faces) -> list:
    """Ordered boundary halfedge cycle of a disk face set (patch on the left).

    Raises TopologyError unless the boundary is a single simple cycle.
    """
    faces = set(int(f) for f in faces)
    if not faces:
        raise TopologyError("empty patch")
    by_origin = {}
    count = 0
    for f in faces:
        for h in mesh.face_halfedges(f):
            t = mesh.h_twin[h]
            if t < 0 or int(mesh.h_face[t]) not in faces:
                o = int(mesh.h_origin[h])
                if o in by_origin:
                    raise TopologyError(
                        f"patch boundary visits vertex {o} twice (pinched)"
                    )
                by_origin[o] = int(h)
                count += 1
    if count == 0:
        raise TopologyError("patch has no boundary (covers a closed mesh)")
    start = min(by_origin.values())
    cycle = [start]
    h = start
    while True:
        h = by_origin.get(int(mesh.h_dest[h]))
        if h is None:
            raise TopologyError("patch boundary is not a closed cycle")
        if h == start:
            break
        cycle.append(h)
    if len(cycle) != count:
        raise TopologyError("patch boundary has multiple cycles (not a disk)")
    return cycle


def validate_patch_disk(mesh: PolyMesh, faces) -> list:
    """Disk-topology check; returns the boundary halfedge cycle."""
    faces = set(int(f) for f in faces)
    comp, _ = mesh.connected_face_components(
        exclude=frozenset(f for f in range(mesh.n_faces) if f not in faces)
    )
    labels = {int(comp[f]) for f in faces}
    if len(labels) != 1:
        raise TopologyError("patch faces are not edge-connected")
    cycle = patch_boundary_halfedges(mesh, faces)
    verts = set()
    nedges = set()
    for f in faces:
        verts.update(mesh.faces[f])
        for h in mesh.face_halfedges(f):
            nedges.add(int(mesh.h_edge[h]))
    chi = len(verts) - len(nedges) + len(faces)
    if chi != 1:
        raise TopologyError(f"patch is not a disk (Euler characteristic {chi})")
    return cycle


def patch_boundary_vertices(mesh: PolyMesh, patch: Patch) -> list:
    """Boundary vertex cycle starting at the patch reference vertex."""
    cycle = patch_boundary_halfedges(mesh, patch.faces)
    verts = [int(mesh.h_origin[h]) for h in cycle]
    if patch.reference_vertex not in verts:
        raise TopologyError(
            f"reference vertex {patch.reference_vertex} not on patch boundary"
        )
    i = verts.index(patch.reference_vertex)
    return verts[i:] + verts[:i]


# -- collapse / extrude ----------------------------------------------------


def collapse_face_loop(mesh: PolyMesh, loop: FaceLoop, base_faces=None):
    """Remove a face loop and stitch its rails.

    Merged rail vertices keep the id and position of the vertex on the
    surviving (non-base) side; the base side is taken from base_faces or
    defaults to the smaller component. Returns (PolyMesh, MeshMaps).
    """
    if loop.self_intersecting or loop.self_adjacent:
        raise UnsupportedLoopError(
            "cannot collapse a self-intersecting or self-adjacent loop"
        )
    loop_faces = frozenset(loop.faces)
    comp, ncomp = mesh.connected_face_components(exclude=loop_faces)
    n_sides = len({int(c) for c in comp if c >= 0})
    if n_sides != 2:
        raise UnsupportedLoopError(
            f"loop does not separate the mesh into two sides (got {n_sides})"
        )
    side_sizes = {}
    side_min = {}
    for f in range(mesh.n_faces):
        c = int(comp[f])
        if c >= 0:
            side_sizes[c] = side_sizes.get(c, 0) + 1
            side_min[c] = min(side_min.get(c, f), f)
    if base_faces is not None:
        cs = {int(comp[int(f)]) for f in base_faces}
        if len(cs) != 1 or -1 in cs:
            raise UnsupportedLoopError("base_faces hint does not name one side")
        base_comp = cs.pop()
    else:
        base_comp = min(side_sizes, key=lambda c: (side_sizes[c], side_min[c]))

    h0 = loop.entry_halfedges[0]
    t = mesh.h_twin[mesh.h_next[h0]]
    comp_a = int(comp[int(mesh.h_face[t])])  # side of rail_a (dest side)

    merged_pairs = []  # (dying, survivor)
    dying = {}
    for h in loop.entry_halfedges:
        a = int(mesh.h_origin[h])  # rail_b side
        b = int(mesh.h_dest[h])    # rail_a side
        if comp_a == base_comp:
            d, s = b, a
        else:
            d, s = a, b
        merged_pairs.append((d, s))
        if d in dying or d in {p[1] for p in merged_pairs}:
            raise UnsupportedLoopError("loop rails share vertices")
        dying[d] = s
    survivors = {s for _, s in merged_pairs}
    if survivors & dying.keys():
        raise UnsupportedLoopError("loop rails share vertices")

    new_faces = []
    face_map = np.full(mesh.n_faces, -1, dtype=np.int64)
    for f in range(mesh.n_faces):
        if f in loop_faces:
            continue
        cyc = [dying.get(v, v) for v in mesh.faces[f]]
        if len(set(cyc)) != len(cyc):
            raise DegenerateResultError(
                f"collapse would degenerate face {f} (repeated vertex)"
            )
        face_map[f] = len(new_faces)
        new_faces.append(cyc)
    if len(new_faces) == 2:
        raise DegenerateResultError("collapse would leave a 2-face pillow")

    keep = np.ones(mesh.n_vertices, dtype=bool)
    keep[list(dying.keys())] = False
    vertex_map = np.full(mesh.n_vertices, -1, dtype=np.int64)
    vertex_map[keep] = np.arange(int(keep.sum()))
    for d, s in merged_pairs:
        vertex_map[d] = vertex_map[s]
    new_positions = mesh.positions[keep]
    remapped = [[int(vertex_map[v]) for v in cyc] for cyc in new_faces]
    out = PolyMesh(new_positions, remapped)
    out.validate_manifold()
    return out, MeshMaps(vertex_map, face_map, merged_pairs=merged_pairs)


def extrude_patch(mesh: PolyMesh, patch: Patch):
    """Topological extrusion of a disk patch.

    Boundary vertices are duplicated at identical positions, patch faces
    re-anchor to the duplicates, and a quad loop joins the two boundary
    cycles. Geometry is applied separately. Returns
    (PolyMesh, FaceLoop, MeshMaps).
    """
    cycle = validate_patch_disk(mesh, patch.faces)
    if len(cycle) < 3:
        raise TopologyError("patch boundary shorter than 3 edges")
    bverts = [int(mesh.h_origin[h]) for h in cycle]
    if patch.reference_vertex not in bverts:
        raise TopologyError(
            f"reference vertex {patch.reference_vertex} not on patch boundary"
        )
    i = bverts.index(patch.reference_vertex)
    bverts = bverts[i:] + bverts[:i]

    nv = mesh.n_vertices
    dup = {v: nv + k for k, v in enumerate(bverts)}
    faces = []
    for f in range(mesh.n_faces):
        if f in patch.faces:
            faces.append([dup.get(v, v) for v in mesh.faces[f]])
        else:
            faces.append(list(mesh.faces[f]))
    new_ids = []
    n = len(bverts)
    for k in range(n):
        u = bverts[k]
        v = bverts[(k + 1) % n]
        new_ids.append(len(faces))
        faces.append([u, v, dup[v], dup[u]])
    positions = np.vstack([mesh.positions, mesh.positions[bverts]])
    out = PolyMesh(positions, faces)

    seed = out.find_edge(bverts[0], dup[bverts[0]])
    loop = trace_face_loop(out, seed)
    if loop.self_intersecting or loop.self_adjacent:
        raise TopologyError("extrusion produced an invalid loop")
    vertex_map = np.arange(nv, dtype=np.int64)
    face_map = np.arange(mesh.n_faces, dtype=np.int64)
    maps = MeshMaps(vertex_map, face_map, new_faces=new_ids, dup_vertex=dup)
    return out, loop, maps


# -- isomorphism -----------------------------------------------------------


def mesh_isomorphic(a: PolyMesh, b: PolyMesh, position_tol=None) -> bool:
    """Connectivity isomorphism test via halfedge correspondence propagation.

    With position_tol set, the induced vertex bijection must also match
    coordinates within that absolute tolerance.
    """
    if (a.n_vertices != b.n_vertices or a.n_faces != b.n_faces
            or a.n_halfedges != b.n_halfedges):
        return False
    if sorted(len(f) for f in a.faces) != sorted(len(f) for f in b.faces):
        return False
    if a.n_halfedges == 0:
        return True

    ha0 = 0
    arity_a = len(a.faces[int(a.h_face[ha0])])
    pa = a.positions[int(a.h_origin[ha0])]
    candidates = []
    for hb in range(b.n_halfedges):
        if len(b.faces[int(b.h_face[hb])]) != arity_a:
            continue
        if position_tol is not None:
            if np.abs(b.positions[int(b.h_origin[hb])] - pa).max() > position_tol:
                continue
        candidates.append(hb)

    for hb0 in candidates:
        if _propagate(a, b, ha0, hb0, position_tol):
            return True
    return False


def _propagate(a, b, ha0, hb0, position_tol):
    hmap = np.full(a.n_halfedges, -1, dtype=np.int64)
    hmap[ha0] = hb0
    stack = [ha0]
    while stack:
        ha = stack.pop()
        hb = hmap[ha]
        for na, nb in ((int(a.h_next[ha]), int(b.h_next[hb])),
                       (int(a.h_twin[ha]), int(b.h_twin[hb]))):
            if na < 0 or nb < 0:
                if na != nb:
                    return False
                continue
            if hmap[na] == -1:
                hmap[na] = nb
                stack.append(na)
            elif hmap[na] != nb:
                return False
    if (hmap == -1).any():
        return False  # disconnected meshes are out of scope here
    if np.unique(hmap).size != a.n_halfedges:
        return False
    # induced vertex map must be a consistent bijection
    vmap = np.full(a.n_vertices, -1, dtype=np.int64)
    vb = b.h_origin[hmap]
    for h in range(a.n_halfedges):
        va = int(a.h_origin[h])
        if vmap[va] == -1:
            vmap[va] = vb[h]
        elif vmap[va] != vb[h]:
            return False
    used = vmap[vmap >= 0]
    if np.unique(used).size != used.size:
        return False
    if position_tol is not None:
        sel = vmap >= 0
        if sel.any():
            d = np.abs(a.positions[sel] - b.positions[vmap[sel]]).max()
            if d > position_tol:
                return False
    return True
