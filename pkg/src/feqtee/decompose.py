"""Feature decomposition: turn a marked region of an FEQ mesh into an
extrusion graph with reusable records, then linearize it for TEE emission.

Decomposition repeatedly collapses leaf loops (smallest base area first)
until the user-marked root loop collapses. Reference vertices and region
curves live in parent parameter domains that only become available once the
parent itself collapses, so each capture is provisional (anchored at an
arbitrary boundary vertex) and a final top-down pass rotates records,
domains and curves into their true reference frames.

Replay contract mirrored by the TEE interpreter:
  - chained extrusion: next base patch = previous extrusion's re-anchored
    cap, reference = lowest-angle cap vertex in the previous extended map;
  - selected extrusion: per-parent region curves in the parent's extended
    map, union of selections, reference = lowest-angle boundary vertex in
    the first parent's domain.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import builder
from .disk import GenericDisk
from .errors import DecompositionError, FeqTeeError, TopologyError
from .mesh import (
    FaceLoop,
    Patch,
    PolyMesh,
    collapse_face_loop,
    enumerate_face_loops,
    patch_boundary_halfedges,
    trace_face_loop,
    validate_feq,
)
from .param import flatten_interior, harmonic_disk_map
from .records import ExtrusionRecord


@dataclass
class RegionCurve:
    parent_node: int
    ids: list


@dataclass
class ExtrusionNode:
    id: int                      # replay index; root is 0
    record_id: int
    parents: list                # parent node ids, ascending (first = primary)
    curves: dict                 # parent id -> RegionCurve
    chain_parent: int | None     # set when base == that parent's cap


@dataclass
class ExtrusionGraph:
    nodes: dict                  # id -> ExtrusionNode
    edges: list                  # (parent, child) pairs
    root: int = 0

    def children(self, nid):
        return sorted(c for p, c in self.edges if p == nid)


@dataclass
class Decomposition:
    graph: ExtrusionGraph
    records: list                # ExtrusionRecord, index = node id
    base_mesh: PolyMesh
    base_patch: Patch            # replay entry point on base_mesh


@dataclass
class CaptureResult:
    """One recorded collapse, before reference resolution."""

    record: ExtrusionRecord      # provisional anchoring
    mesh: PolyMesh               # collapsed + flattened
    maps: object                 # MeshMaps of the collapse
    base_faces: list             # face ids on the new mesh
    boundary_cycle: list         # base boundary vertex ids (new mesh), from
                                 # the provisional reference


def capture_record(mesh: PolyMesh, loop: FaceLoop, base_faces=None,
                   reference_vertex=None, record_id=0) -> CaptureResult:
    """Record the extrusion that a loop collapse undoes.

    Stores pre-collapse positions of the extended base patch (originals and
    quad centers), collapses the loop, flattens the base interior, then
    keeps per-node displacement vectors re-expressed in every boundary
    vertex's local frame, together with the harmonic map of the flattened
    base patch.
    """
    loop_faces = set(loop.faces)
    if base_faces is None:
        comp, _ = mesh.connected_face_components(exclude=frozenset(loop_faces))
        sizes = {}
        for f in range(mesh.n_faces):
            c = int(comp[f])
            if c >= 0:
                sizes.setdefault(c, []).append(f)
        if len(sizes) != 2:
            raise TopologyError("loop does not bound a base patch")
        areas = mesh.face_areas()
        base_faces = min(sizes.values(), key=lambda fs: areas[fs].sum())
    base_faces = sorted(int(f) for f in base_faces)

    # pre-collapse geometry of the base patch nodes
    areas_faces = {f: mesh.face_centroid(f) for f in base_faces}
    interior_pos = {}
    for f in base_faces:
        for v in mesh.faces[f]:
            interior_pos[int(v)] = mesh.positions[v].copy()

    collapsed, maps = collapse_face_loop(mesh, loop, base_faces=base_faces)
    # inner rail vertices carry the lift: their pre-collapse position is the
    # stored target for the merged boundary vertex
    stored_boundary = {}
    for dying, survivor in maps.merged_pairs:
        new_id = int(maps.vertex_map[survivor])
        stored_boundary[new_id] = mesh.positions[dying].copy()

    new_base = [int(maps.face_map[f]) for f in base_faces]
    if any(f < 0 for f in new_base):
        raise DecompositionError("base patch lost faces during collapse")
    probe_cycle = patch_boundary_halfedges(collapsed, new_base)
    bverts = [int(collapsed.h_origin[h]) for h in probe_cycle]
    if reference_vertex is None:
        reference_vertex = min(bverts)
    patch = Patch.of(new_base, reference_vertex)

    flat = flatten_interior(collapsed, patch)
    param = harmonic_disk_map(flat, patch)

    disp_world = np.zeros((param.n_locals, 3))
    boundary_locals = set(param.boundary_locals)
    old_of_new = {int(maps.vertex_map[o]): o for o in range(mesh.n_vertices)
                  if maps.vertex_map[o] >= 0}
    for i, v in enumerate(param.verts):
        if i in boundary_locals:
            stored = stored_boundary.get(v)
            if stored is None:  # boundary vertex that was not merged
                stored = mesh.positions[old_of_new[v]]
        else:
            stored = interior_pos[old_of_new[v]]
        disp_world[i] = stored - flat.positions[v]
    for f_new, cl in param.center_locals.items():
        f_old = base_faces[new_base.index(f_new)]
        disp_world[cl] = areas_faces[f_old] - flat.face_centroid(f_new)

    cycle_verts = [param.verts[i] for i in param.boundary_locals]
    frames = builder.boundary_frames(flat, cycle_verts, patch.faces)
    disp_local = np.einsum("bji,nj->bni", frames, disp_world)

    record = ExtrusionRecord(
        id=record_id,
        base_uv=param.uv,
        base_tris=param.tri_faces,
        displacements=disp_local,
        boundary_angles=param.boundary_angles,
    )
    return CaptureResult(record, flat, maps, new_base, cycle_verts)


def record_extrusion(mesh: PolyMesh, loop: FaceLoop, base_faces=None,
                     reference_vertex=None, record_id=0):
    """Spec-level wrapper: (ExtrusionRecord, collapsed-and-flattened mesh)."""
    cap = capture_record(mesh, loop, base_faces, reference_vertex, record_id)
    return cap.record, cap.mesh


# -- feature loop discovery -----------------------------------------------------


def _loops_within(mesh: PolyMesh, feature) -> list:
    """Face loops all of whose faces lie inside the feature set."""
    feature = set(int(f) for f in feature)
    covered = set()
    loops = []
    for e in range(mesh.n_edges):
        if e in covered or not mesh.is_interior_edge(e):
            continue
        fa, fb = mesh.edge_faces(e)
        if fa not in feature or fb not in feature:
            continue
        loop = trace_face_loop(mesh, e)
        covered.update(loop.sleepers)
        if all(f in feature for f in loop.faces):
            loops.append(loop)
    return loops


def _base_side(mesh: PolyMesh, loop: FaceLoop, feature) -> list:
    """The disk side of a loop lying inside the feature."""
    comp, _ = mesh.connected_face_components(exclude=frozenset(loop.faces))
    sides = {}
    for f in range(mesh.n_faces):
        c = int(comp[f])
        if c >= 0:
            sides.setdefault(c, []).append(f)
    if len(sides) != 2:
        raise DecompositionError("loop does not separate the mesh")
    inside = [fs for fs in sides.values() if all(f in feature for f in fs)]
    if len(inside) != 1:
        raise DecompositionError("loop has no unique side inside the feature")
    return inside[0]


def find_leaf_loops(mesh: PolyMesh, feature_faces) -> list:
    """Loops inside the feature whose base patch contains no other complete
    feature loop."""
    feature = set(int(f) for f in feature_faces)
    loops = _loops_within(mesh, feature)
    leaves = []
    for i, loop in enumerate(loops):
        try:
            base = set(_base_side(mesh, loop, feature))
        except DecompositionError:
            continue
        is_leaf = True
        for j, other in enumerate(loops):
            if j != i and set(other.faces) <= base:
                is_leaf = False
                break
        if is_leaf:
            leaves.append(loop)
    return leaves


# -- full decomposition ----------------------------------------------------------


@dataclass
class _Pending:
    k: int                      # collapse index
    stable_base: frozenset
    stable_ext: frozenset
    record: ExtrusionRecord     # provisional
    base_boundary_stable: list  # cycle aligned with record.boundary_angles
    ext_uv: dict                # stable vertex label -> provisional ext uv
    true_ref_label: int | None = None  # resolved later (stable)
    child_curves: list = field(default_factory=list)   # (child_k, [labels])
    child_refsets: dict = field(default_factory=dict)  # child_k -> [(lbl, uv)]
    parents: list = field(default_factory=list)        # parent collapse ids
    unclaimed: set = field(default_factory=set)        # base faces not yet
                                                       # attributed to a parent


def decompose_feature(mesh: PolyMesh, root_loop: FaceLoop,
                      area_tiebreak_seed: int = 0,
                      disk: GenericDisk | None = None,
                      feature_face: int | None = None) -> Decomposition:
    """Collapse a feature to its base patch, capturing the extrusion graph.

    The feature is the root loop's extended patch; its side of the loop
    defaults to the smaller total-area side, or to the side containing
    feature_face when given (needed when the feature outgrows its base).
    Leaves collapse first, smallest base area first, ties broken by
    canonical loop key; the seed argument is accepted for interface
    stability but the tie-break is fully deterministic.
    """
    report = validate_feq(mesh)
    if not report.is_feq:
        raise DecompositionError(f"mesh is not FEQ: {report}")
    if root_loop.self_intersecting or root_loop.self_adjacent:
        raise DecompositionError("root loop is not collapsible")
    if disk is None:
        disk = GenericDisk()

    areas = mesh.face_areas()
    comp, _ = mesh.connected_face_components(exclude=frozenset(root_loop.faces))
    sides = {}
    for f in range(mesh.n_faces):
        c = int(comp[f])
        if c >= 0:
            sides.setdefault(c, []).append(f)
    if len(sides) != 2:
        raise DecompositionError("root loop does not separate the mesh")
    if feature_face is not None:
        hit = [fs for fs in sides.values() if int(feature_face) in fs]
        if not hit:
            raise DecompositionError(
                f"feature_face {feature_face} lies on the root loop itself"
            )
        root_base = hit[0]
    else:
        root_base = min(sides.values(), key=lambda fs: float(areas[fs].sum()))
    feature = set(root_base) | set(root_loop.faces)
    root_face_set = frozenset(root_loop.faces)

    cur = mesh
    stable_v = np.arange(mesh.n_vertices, dtype=np.int64)
    stable_f = np.arange(mesh.n_faces, dtype=np.int64)
    feature_stable = {int(stable_f[f]) for f in feature}
    root_stable = frozenset(int(stable_f[f]) for f in root_face_set)
    forward = {}
    pending = []

    while True:
        cur_of_stable = {int(s): i for i, s in enumerate(stable_f)}
        feature_cur = {cur_of_stable[s] for s in feature_stable
                       if s in cur_of_stable}
        loops = _loops_within(cur, feature_cur)
        if not loops:
            raise DecompositionError("feature exhausted before the root loop")

        infos = []
        for loop in loops:
            base = _base_side(cur, loop, feature_cur)
            infos.append((loop, base))
        cur_areas = cur.face_areas()
        leaves = []
        for i, (loop, base) in enumerate(infos):
            bset = set(base)
            if any(j != i and set(infos[j][0].faces) <= bset
                   for j in range(len(infos))):
                continue
            leaves.append((float(cur_areas[base].sum()),
                           loop.canonical_key(), loop, base))
        if not leaves:
            raise DecompositionError(
                "no collapsible leaf loop: inward-branching feature"
            )
        leaves.sort(key=lambda t: (t[0], t[1]))
        _, _, loop, base = leaves[0]

        is_root = frozenset(int(stable_f[f]) for f in loop.faces) == root_stable
        if len(infos) == 1 and not is_root:
            raise DecompositionError("last remaining loop is not the root")

        k = len(pending)
        node = _capture_pending(cur, loop, base, stable_v, stable_f,
                                forward, pending, k)
        pending.append(node)

        # advance the tracked state
        cap = node._capture
        cur = cap.mesh
        maps = cap.maps
        for dying, survivor in maps.merged_pairs:
            forward[int(stable_v[dying])] = int(stable_v[survivor])
        new_stable_v = np.empty(cur.n_vertices, dtype=np.int64)
        for old in range(len(maps.vertex_map)):
            n = int(maps.vertex_map[old])
            if n >= 0:
                new_stable_v[n] = stable_v[old]
        # merged pairs map two olds to one new; survivor label wins
        for dying, survivor in maps.merged_pairs:
            new_stable_v[int(maps.vertex_map[survivor])] = stable_v[survivor]
        stable_v = new_stable_v
        new_stable_f = np.empty(cur.n_faces, dtype=np.int64)
        for old in range(len(maps.face_map)):
            n = int(maps.face_map[old])
            if n >= 0:
                new_stable_f[n] = stable_f[old]
        stable_f = new_stable_f
        feature_stable -= node._loop_stable

        if is_root:
            break

    return _finalize(pending, cur, stable_v, stable_f, disk)


def _capture_pending(cur, loop, base, stable_v, stable_f, forward,
                     pending, k) -> _Pending:
    ext_faces = sorted(set(base) | set(loop.faces))
    probe = patch_boundary_halfedges(cur, ext_faces)
    ext_ref = min(int(cur.h_origin[h]) for h in probe)
    ext_param = harmonic_disk_map(cur, Patch.of(ext_faces, ext_ref))
    ext_uv = {int(stable_v[v]): ext_param.uv_of_vertex(v)
              for v in ext_param.verts}
    ext_stable = frozenset(int(stable_f[f]) for f in ext_faces)

    node = _Pending(
        k=k,
        stable_base=frozenset(int(stable_f[f]) for f in base),
        stable_ext=ext_stable,
        record=None, base_boundary_stable=None, ext_uv=ext_uv,
    )
    node.unclaimed = set(node.stable_base)
    node._loop_stable = frozenset(int(stable_f[f]) for f in loop.faces)

    # edges and raw region curves to every earlier-collapsed node whose base
    # uses faces this extrusion produced: each face of a child base belongs
    # to its most recent producer, so already-claimed faces never create
    # transitive edges (a tower stays a chain)
    cur_of_stable = {int(s): i for i, s in enumerate(stable_f)}
    for child in pending:
        inter = child.unclaimed & ext_stable
        if not inter:
            continue
        child.unclaimed -= inter
        child.parents.append(k)
        region = sorted(cur_of_stable[s] for s in inter)
        try:
            cyc = patch_boundary_halfedges(cur, region)
        except TopologyError as exc:
            raise DecompositionError(
                f"region of node {child.k} in its parent is not a disk: {exc}"
            )
        labels = [int(stable_v[int(cur.h_origin[h])]) for h in cyc]
        i0 = labels.index(min(labels))
        node.child_curves.append((child.k, labels[i0:] + labels[:i0]))
        # resolve the child's post-collapse boundary into this domain for
        # the reference-vertex rule
        pairs = []
        for lbl in child.base_boundary_stable:
            r = lbl
            while r not in ext_uv and r in forward:
                r = forward[r]
            if r in ext_uv:
                pairs.append((lbl, ext_uv[r]))
        node.child_refsets[child.k] = pairs

    cap = capture_record(cur, loop, base_faces=base, record_id=k)
    node.record = cap.record
    node.base_boundary_stable = _boundary_labels(cap, stable_v)
    node._capture = cap
    return node


def _boundary_labels(cap: CaptureResult, stable_v) -> list:
    """Stable labels of the collapsed base boundary cycle.

    cap.boundary_cycle is in post-collapse ids; stable labels come from the
    pre-collapse survivors, which kept their label."""
    maps = cap.maps
    new_to_old = {}
    for old in range(len(maps.vertex_map)):
        n = int(maps.vertex_map[old])
        if n >= 0 and n not in new_to_old:
            new_to_old[n] = old
    for dying, survivor in maps.merged_pairs:
        new_to_old[int(maps.vertex_map[survivor])] = survivor
    return [int(stable_v[new_to_old[v]]) for v in cap.boundary_cycle]


def _finalize(pending, base_mesh, stable_v, stable_f, disk) -> Decomposition:
    n = len(pending)
    by_k = {p.k: p for p in pending}
    replay_of = {p.k: n - 1 - p.k for p in pending}

    # root reference: provisional anchor already uses the lowest current
    # vertex id, which is the output convention, so no rotation
    root = pending[-1]
    root.true_ref_label = root.base_boundary_stable[0]

    records = [None] * n
    nodes = {}
    edges = []
    for p in sorted(pending, key=lambda q: -q.k):  # replay order
        rid = replay_of[p.k]
        i = p.base_boundary_stable.index(p.true_ref_label)
        theta = float(p.record.boundary_angles[i])
        rec = p.record if theta == 0.0 else p.record.rotated(theta)
        rec.id = rid
        records[rid] = rec

        ref_uv = np.asarray(p.ext_uv[p.true_ref_label])
        ext_theta = float(np.arctan2(ref_uv[1], ref_uv[0]))
        rot = _rot2(-ext_theta)

        curves = {}
        for child_k, labels in p.child_curves:
            pts = np.array([p.ext_uv[l] for l in labels]) @ rot.T
            ids = disk.quantize_curve(pts)
            if len(ids) > 1 and ids[0] == ids[-1]:
                ids = ids[:-1]
            if len(set(ids)) < 3:
                raise DecompositionError(
                    f"region curve of node {replay_of[child_k]} degenerates "
                    "at the generic disk resolution"
                )
            by_k[child_k]._resolved_curves = getattr(
                by_k[child_k], "_resolved_curves", {})
            by_k[child_k]._resolved_curves[rid] = RegionCurve(rid, ids)

        for child_k, pairs in p.child_refsets.items():
            child = by_k[child_k]
            if child.true_ref_label is not None:
                continue
            # the primary parent is the earliest applied = largest collapse k
            if max(child.parents) != p.k:
                continue
            best = None
            for lbl, uv in pairs:
                ruv = rot @ np.asarray(uv)
                ang = float(np.mod(np.arctan2(ruv[1], ruv[0]), 2 * np.pi))
                key = (ang, float(np.linalg.norm(ruv)), lbl)
                if best is None or key < best[0]:
                    best = (key, lbl)
            if best is None:
                raise DecompositionError(
                    f"node {replay_of[child_k]} has no boundary vertex in its "
                    "primary parent domain"
                )
            child.true_ref_label = best[1]

    for p in pending:
        rid = replay_of[p.k]
        parent_ids = sorted(replay_of[pk] for pk in p.parents)
        chain_parent = None
        if len(p.parents) == 1:
            parent = by_k[p.parents[0]]
            if parent.stable_base == p.stable_base:
                chain_parent = replay_of[parent.k]
        curves = getattr(p, "_resolved_curves", {})
        nodes[rid] = ExtrusionNode(rid, rid, parent_ids, curves, chain_parent)
        for pk in p.parents:
            edges.append((replay_of[pk], rid))

    cur_of_stable_v = {int(s): i for i, s in enumerate(stable_v)}
    root_patch_faces = sorted(
        i for i, s in enumerate(stable_f) if int(s) in root.stable_base
    )
    ref = root.true_ref_label
    if ref not in cur_of_stable_v:
        raise DecompositionError("root reference vertex lost")
    base_patch = Patch.of(root_patch_faces, cur_of_stable_v[ref])
    graph = ExtrusionGraph(nodes, sorted(set(edges)), root=0)
    return Decomposition(graph, records, base_mesh, base_patch)


def _rot2(theta):
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


# -- linearization and TEE emission ------------------------------------------


def linearize(graph: ExtrusionGraph, seed: int) -> list:
    """Topological order with maximal chains kept contiguous.

    Chains (every node with exactly one predecessor and one successor in
    the chain sense) are condensed into super-nodes; among ready
    super-nodes the choice is uniform under the seed, so branch orders are
    randomized but chains never interleave.
    """
    nodes = sorted(graph.nodes)
    out = {v: [] for v in nodes}
    indeg = {v: 0 for v in nodes}
    for p, c in graph.edges:
        out[p].append(c)
        indeg[c] += 1

    chain_next = {}
    for p in nodes:
        if len(out[p]) == 1 and indeg[out[p][0]] == 1:
            chain_next[p] = out[p][0]
    chain_prev = {c: p for p, c in chain_next.items()}

    chains = {}
    head_of = {}
    for v in nodes:
        if v in chain_prev:
            continue
        chain = [v]
        while chain[-1] in chain_next:
            chain.append(chain_next[chain[-1]])
        chains[v] = chain
        for x in chain:
            head_of[x] = v

    super_indeg = {h: 0 for h in chains}
    super_out = {h: [] for h in chains}
    for p, c in graph.edges:
        hp, hc = head_of[p], head_of[c]
        if hp != hc:
            super_out[hp].append(hc)
            super_indeg[hc] += 1

    rng = np.random.default_rng(seed)
    ready = sorted(h for h, d in super_indeg.items() if d == 0)
    order = []
    while ready:
        idx = int(rng.integers(len(ready))) if len(ready) > 1 else 0
        h = ready.pop(idx)
        order.extend(chains[h])
        for hc in super_out[h]:
            super_indeg[hc] -= 1
            if super_indeg[hc] == 0:
                ready.append(hc)
        ready.sort()
    if len(order) != len(nodes):
        raise FeqTeeError("extrusion graph has a cycle")
    return order


def emit_tee(graph: ExtrusionGraph, seed: int = 0, order=None) -> str:
    """Serialize the graph as TEE text for a given linearization.

    A node directly continuing its emitted predecessor's cap needs no
    selection; every other node selects its base per parent via gp/sv
    pairs, which requires the parent to have been remembered (P<i> Re,
    where i is the parent's extrusion index in this order)."""
    if order is None:
        order = linearize(graph, seed)
    pos = {nid: i for i, nid in enumerate(order)}

    needs_selection = {}
    remembered = set()
    for i, nid in enumerate(order):
        node = graph.nodes[nid]
        chained = (node.chain_parent is not None
                   and i > 0 and order[i - 1] == node.chain_parent)
        needs_selection[nid] = bool(node.parents) and not chained
        if needs_selection[nid]:
            remembered.update(node.parents)

    tokens = []
    for i, nid in enumerate(order):
        node = graph.nodes[nid]
        if needs_selection[nid]:
            for p in node.parents:
                curve = node.curves.get(p)
                if curve is None:
                    raise FeqTeeError(
                        f"node {nid} lacks a region curve for parent {p}"
                    )
                tokens.extend(["gp", f"P{pos[p]}", "sv"])
                tokens.extend(str(int(t)) for t in curve.ids)
        tokens.append(f"E{node.record_id}")
        if nid in remembered:
            tokens.extend([f"P{i}", "Re"])
    return " ".join(tokens)
