import numpy as np
import pytest
from scipy.spatial import cKDTree

from feqtee.decompose import (
    Decomposition,
    ExtrusionGraph,
    ExtrusionNode,
    decompose_feature,
    emit_tee,
    find_leaf_loops,
    linearize,
)
from feqtee.disk import GenericDisk
from feqtee.errors import DecompositionError
from feqtee.mesh import mesh_isomorphic, validate_feq
from feqtee.primitives import cube
from feqtee.tee import ExecuteOptions, execute_tee, parse_tee

from conftest import bump_feature, tower_feature, twin_bump_feature


DISK = GenericDisk()


def reconstruct(decomp, tee_text, options=None):
    program = parse_tee(tee_text)
    library = {r.id: r for r in decomp.records}
    return execute_tee(program, decomp.base_mesh, decomp.base_patch,
                       library, DISK, options or ExecuteOptions())


def roundtrip_error(original, rebuilt):
    ta, tb = cKDTree(original.positions), cKDTree(rebuilt.positions)
    d = max(ta.query(rebuilt.positions)[0].max(),
            tb.query(original.positions)[0].max())
    return d / original.bbox_diagonal()


# -- leaf discovery -----------------------------------------------------------

def test_find_leaf_loops_single_bump():
    mesh, root = bump_feature()
    feature = set(root.faces)
    # base side of the root ring: the cap
    comp, _ = mesh.connected_face_components(exclude=frozenset(root.faces))
    sides = {}
    for f in range(mesh.n_faces):
        if comp[f] >= 0:
            sides.setdefault(int(comp[f]), []).append(f)
    cap_side = min(sides.values(), key=len)
    feature |= set(cap_side)
    leaves = find_leaf_loops(mesh, feature)
    assert len(leaves) == 1
    assert set(leaves[0].faces) == set(root.faces)


def test_find_leaf_loops_tower():
    mesh, root = tower_feature(3)
    # feature = the cap (face 1 of the cube) plus all three rings
    feature = {1} | set(range(6, mesh.n_faces))
    leaves = find_leaf_loops(mesh, feature)
    assert len(leaves) == 1  # only the ring adjacent to the cap is a leaf
    assert set(leaves[0].faces) == set(range(14, 18))
    assert set(leaves[0].faces) != set(root.faces)


# -- decomposition ------------------------------------------------------------

def test_decompose_single_bump():
    mesh, root = bump_feature()
    decomp = decompose_feature(mesh, root)
    assert len(decomp.records) == 1
    assert len(decomp.graph.nodes) == 1
    assert decomp.graph.nodes[0].parents == []
    assert mesh_isomorphic(decomp.base_mesh, cube())
    tee = emit_tee(decomp.graph)
    assert tee == "E0"
    rebuilt, trace = reconstruct(decomp, tee)
    assert mesh_isomorphic(rebuilt, mesh)
    assert roundtrip_error(mesh, rebuilt) < 1e-9


def test_decompose_tower_chain():
    mesh, root = tower_feature(2)
    decomp = decompose_feature(mesh, root)
    assert len(decomp.records) == 2
    g = decomp.graph
    assert g.edges == [(0, 1)]
    assert g.nodes[1].chain_parent == 0
    tee = emit_tee(g)
    assert tee == "E0 E1"  # pure chain, no selections
    rebuilt, _ = reconstruct(decomp, tee)
    assert mesh_isomorphic(rebuilt, mesh)
    assert roundtrip_error(mesh, rebuilt) < 1e-9


def test_decompose_tower_of_four():
    mesh, root = tower_feature(4, dz=0.3)
    decomp = decompose_feature(mesh, root)
    assert len(decomp.records) == 4
    tee = emit_tee(decomp.graph)
    assert tee == "E0 E1 E2 E3"
    rebuilt, _ = reconstruct(decomp, tee)
    assert mesh_isomorphic(rebuilt, mesh)
    assert roundtrip_error(mesh, rebuilt) < 1e-9


def test_decompose_twin_bumps_branches():
    mesh, root = twin_bump_feature()
    decomp = decompose_feature(mesh, root)
    g = decomp.graph
    assert len(g.nodes) == 3
    assert g.children(0) == [1, 2]
    for c in (1, 2):
        assert g.nodes[c].chain_parent is None
        assert list(g.nodes[c].curves) == [0]
        ids = g.nodes[c].curves[0].ids
        assert len(ids) >= 3
        pts = DISK.dequantize_ids(ids)
        assert np.linalg.norm(pts, axis=1).max() <= 1.0 + 1e-9
    tee = emit_tee(g, seed=1)
    assert "gp" in tee and "sv" in tee and "Re" in tee
    rebuilt, _ = reconstruct(decomp, tee)
    assert mesh_isomorphic(rebuilt, mesh)
    assert roundtrip_error(mesh, rebuilt) < 1e-6


def test_twin_bumps_roundtrip_any_order():
    mesh, root = twin_bump_feature()
    decomp = decompose_feature(mesh, root)
    texts = {emit_tee(decomp.graph, seed=s) for s in range(16)}
    assert len(texts) == 2  # the two branch orders
    for tee in texts:
        rebuilt, _ = reconstruct(decomp, tee)
        assert mesh_isomorphic(rebuilt, mesh)
        assert roundtrip_error(mesh, rebuilt) < 1e-6


def bridge_feature():
    """Root cap, two half-lifts, and a bridge extrusion spanning faces of
    both halves: the bridge node has two parents (the multi-parent case)."""
    import numpy as np
    from feqtee.mesh import extrude_patch, validate_patch_disk
    from feqtee.primitives import subdivided_cube
    from conftest import extrude_lifted, root_loop_of

    base = subdivided_cube(2)
    normals = base.face_normals()
    top = [f for f in range(base.n_faces) if normals[f][2] > 1e-9]
    t0, t1, t2, t3 = top  # (x0,y0) (x0,y1) (x1,y0) (x1,y1)

    mesh, _, root_maps = extrude_lifted(base, top, dz=0.4)
    mesh, loop1, _ = extrude_lifted(mesh, [t0, t1], dz=0.3)   # west half
    mesh, loop2, _ = extrude_lifted(mesh, [t2, t3], dz=0.3)   # east half

    # canyon walls: the ring face of each lift that faces the other half
    def neighbors(f):
        out = set()
        for h in mesh.face_halfedges(f):
            t = mesh.h_twin[h]
            if t >= 0:
                out.add(int(mesh.h_face[t]))
        return out

    # the east lift re-anchored t2, so its west wall is the loop2 face
    # between t2 and the west lift's ring; wall_a is its loop1 neighbor
    wall_b = next(f for f in loop2.faces
                  if t2 in neighbors(f) and neighbors(f) & set(loop1.faces))
    wall_a = next(iter(neighbors(wall_b) & set(loop1.faces)))
    assert t0 in neighbors(wall_a)
    bridge = [t0, wall_a, wall_b, t2]
    validate_patch_disk(mesh, bridge)
    mesh, _, _ = extrude_lifted(mesh, bridge, dz=0.15)
    return mesh, root_loop_of(mesh, root_maps), t0


def test_decompose_multi_parent_bridge():
    # the bridge re-anchors ring faces of both lifts, so the mesh's
    # intrinsic loops interleave and the decomposition recovers a valid
    # sequence with multi-parent nodes (not necessarily the construction)
    mesh, root, hint = bridge_feature()
    assert validate_feq(mesh).is_feq
    decomp = decompose_feature(mesh, root, feature_face=hint)
    g = decomp.graph
    assert len(g.nodes) == 4
    multi = [n for n in g.nodes.values() if len(n.parents) >= 2]
    assert multi, "expected at least one multi-parent node"
    for node in multi:
        assert sorted(node.curves) == sorted(node.parents)
    for seed in range(6):
        tee = emit_tee(g, seed=seed)
        # multi-parent nodes emit consecutive gp/sv pairs (union selection)
        assert tee.count("gp") >= 2 * len(multi)
        rebuilt, _ = reconstruct(decomp, tee)
        assert mesh_isomorphic(rebuilt, mesh)
        assert roundtrip_error(mesh, rebuilt) < 1e-6


def test_decompose_rejects_non_feq():
    from feqtee.mesh import PolyMesh, trace_face_loop
    from feqtee.primitives import grid_patch_mesh
    mesh, root = bump_feature()
    # torus-like gluing is rejected before any collapse
    from test_mesh import quad_torus
    torus = quad_torus(4, 4)
    loop = trace_face_loop(torus, 0)
    with pytest.raises(DecompositionError):
        decompose_feature(torus, loop)


# -- linearization -------------------------------------------------------------

def synth_graph(edges, n):
    nodes = {i: ExtrusionNode(i, i, [], {}, None) for i in range(n)}
    for p, c in edges:
        nodes[c].parents.append(p)
    for i in nodes:
        nodes[i].parents.sort()
    return ExtrusionGraph(nodes, sorted(edges), root=0)


def test_linearize_chain_unique():
    g = synth_graph([(0, 1), (1, 2), (2, 3), (3, 4)], 5)
    orders = {tuple(linearize(g, s)) for s in range(10)}
    assert orders == {(0, 1, 2, 3, 4)}


def test_linearize_two_branches():
    # root -> A1 -> A2 and root -> B1 -> B2; chains stay contiguous
    g = synth_graph([(0, 1), (1, 2), (0, 3), (3, 4)], 5)
    orders = {tuple(linearize(g, s)) for s in range(64)}
    assert orders == {(0, 1, 2, 3, 4), (0, 3, 4, 1, 2)}


def test_linearize_seed_deterministic():
    g = synth_graph([(0, 1), (1, 2), (0, 3), (3, 4)], 5)
    assert linearize(g, 42) == linearize(g, 42)
