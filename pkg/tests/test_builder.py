import numpy as np
import pytest

from feqtee.builder import (
    apply_extrusion,
    boundary_frames,
    dtw_distance,
    edge_weight,
    local_frame,
    min_angle_vertex,
    select_patch_pure_quad,
    select_patch_quad_dominant,
)
from feqtee.decompose import record_extrusion
from feqtee.disk import GenericDisk
from feqtee.errors import SelectionError
from feqtee.mesh import Patch, PolyMesh, mesh_isomorphic, validate_feq
from feqtee.param import harmonic_disk_map
from feqtee.primitives import cube, grid_patch_mesh, subdivided_cube

from conftest import make_bumped_cube, top_face_id


# -- edge weights (closed forms, acceptance criterion 6) -----------------------

UNIT_SQUARE = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])


def test_edge_weight_on_segment_parallel():
    # edge lying on the bottom segment of the loop: dot = 0, distance = 0
    w = edge_weight([(0.2, 0.0), (0.6, 0.0)], UNIT_SQUARE, k=5)
    assert w == pytest.approx(0.0, abs=1e-12)


def test_edge_weight_orthogonal_touching():
    # edge perpendicular to and touching the bottom segment: each sample's
    # nearest segment is the bottom one, |dot| = 1, edge touches it
    w = edge_weight([(0.5, 0.0), (0.5, 0.4)], UNIT_SQUARE, k=5)
    assert w == pytest.approx(5.0, abs=1e-12)


def test_edge_weight_parallel_at_distance():
    # inside the square, parallel to the bottom at uniform distance 0.25:
    # w = K * d^2
    w = edge_weight([(0.3, 0.25), (0.7, 0.25)], UNIT_SQUARE, k=5)
    assert w == pytest.approx(5 * 0.25 ** 2, abs=1e-12)


def test_edge_weight_rejects_zero_length():
    with pytest.raises(ValueError):
        edge_weight([(0.5, 0.5), (0.5, 0.5)], UNIT_SQUARE, k=3)


# -- DTW -----------------------------------------------------------------------


def brute_dtw(a, b):
    """Exponential-time reference DTW for tiny inputs."""
    import functools

    @functools.lru_cache(maxsize=None)
    def rec(i, j):
        c = float(np.linalg.norm(np.array(a[i]) - np.array(b[j])))
        if i == 0 and j == 0:
            return c
        best = np.inf
        if i > 0:
            best = min(best, rec(i - 1, j))
        if j > 0:
            best = min(best, rec(i, j - 1))
        if i > 0 and j > 0:
            best = min(best, rec(i - 1, j - 1))
        return c + best

    return rec(len(a) - 1, len(b) - 1)


def test_dtw_identity():
    assert dtw_distance(UNIT_SQUARE, UNIT_SQUARE) == 0.0


def test_dtw_rotation_invariance():
    rolled = np.roll(UNIT_SQUARE, 2, axis=0)
    assert dtw_distance(rolled, UNIT_SQUARE) == 0.0
    assert dtw_distance(UNIT_SQUARE, rolled) == 0.0


def test_dtw_offset_square():
    shifted = UNIT_SQUARE + np.array([0.1, 0.0])
    assert dtw_distance(shifted, UNIT_SQUARE) == pytest.approx(0.4, abs=1e-12)


def test_dtw_matches_bruteforce():
    rng = np.random.default_rng(2)
    for _ in range(10):
        a = rng.uniform(-1, 1, size=(4, 2))
        b = rng.uniform(-1, 1, size=(5, 2))
        expect = min(
            brute_dtw(tuple(map(tuple, np.roll(a, r, axis=0))),
                      tuple(map(tuple, b)))
            for r in range(len(a))
        )
        assert dtw_distance(a, b) == pytest.approx(expect, abs=1e-12)


def test_dtw_duplicate_collapse_is_free():
    doubled = np.repeat(UNIT_SQUARE, 2, axis=0)
    assert dtw_distance(doubled, UNIT_SQUARE) == pytest.approx(0.0, abs=1e-12)


# -- local frames -----------------------------------------------------------------


def test_local_frame_planar_patch():
    mesh = cube()
    top = top_face_id(mesh)
    patch = Patch.of([top], min(mesh.faces[top]))
    for v in mesh.faces[top]:
        fr = local_frame(mesh, v, patch)
        assert np.allclose(fr.z, [0, 0, 1])
        assert abs(np.dot(fr.x, fr.z)) < 1e-12
        assert np.allclose(np.cross(fr.x, fr.y), fr.z, atol=1e-12)
        for vec in (fr.x, fr.y, fr.z):
            assert np.linalg.norm(vec) == pytest.approx(1.0, abs=1e-12)


def test_local_frame_rigid_equivariance():
    mesh = cube()
    top = top_face_id(mesh)
    patch = Patch.of([top], min(mesh.faces[top]))
    v = mesh.faces[top][0]
    fr = local_frame(mesh, v, patch)
    rng = np.random.default_rng(4)
    A = rng.normal(size=(3, 3))
    Q, _ = np.linalg.qr(A)
    if np.linalg.det(Q) < 0:
        Q[:, 0] = -Q[:, 0]
    t = rng.normal(size=3)
    moved = mesh.with_positions(mesh.positions @ Q.T + t)
    fr2 = local_frame(moved, v, patch)
    assert np.allclose(fr2.x, Q @ fr.x, atol=1e-12)
    assert np.allclose(fr2.z, Q @ fr.z, atol=1e-12)


# -- record capture / application round trip ---------------------------------------


def rel_positions_close(a, b, tol):
    scale = max(a.bbox_diagonal(), 1e-12)
    return np.abs(a.positions - b.positions).max() / scale < tol


def test_bump_record_roundtrip():
    mesh, loop, cap = make_bumped_cube(height=0.7, scale=0.8)
    rec, collapsed = record_extrusion(mesh, loop, base_faces=[cap])
    # apply back onto the same cap with the same reference
    verts = collapsed.faces[0]  # placeholder; build the true patch below
    from feqtee.mesh import patch_boundary_halfedges
    cyc = patch_boundary_halfedges(collapsed, [cap])
    ref = min(int(collapsed.h_origin[h]) for h in cyc)
    out = apply_extrusion(collapsed, Patch.of([cap], ref), rec)
    assert out.mesh.n_faces == mesh.n_faces
    assert mesh_isomorphic(out.mesh, mesh)
    # geometry matches the original bump
    d = _hausdorff_vertexwise(out.mesh, mesh)
    assert d / mesh.bbox_diagonal() < 1e-9
    assert validate_feq(out.mesh).is_feq


def _hausdorff_vertexwise(a, b):
    from scipy.spatial import cKDTree
    ta, tb = cKDTree(a.positions), cKDTree(b.positions)
    return max(ta.query(b.positions)[0].max(), tb.query(a.positions)[0].max())


def test_record_rigid_equivariance():
    mesh, loop, cap = make_bumped_cube(height=0.4, scale=1.2)
    rec, collapsed = record_extrusion(mesh, loop, base_faces=[cap])
    rng = np.random.default_rng(9)
    Q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
    if np.linalg.det(Q) < 0:
        Q[:, 0] = -Q[:, 0]
    t = rng.normal(size=3)
    moved = collapsed.with_positions(collapsed.positions @ Q.T + t)
    from feqtee.mesh import patch_boundary_halfedges
    cyc = patch_boundary_halfedges(collapsed, [cap])
    ref = min(int(collapsed.h_origin[h]) for h in cyc)
    out1 = apply_extrusion(collapsed, Patch.of([cap], ref), rec)
    out2 = apply_extrusion(moved, Patch.of([cap], ref), rec)
    expect = out1.mesh.positions @ Q.T + t
    assert np.abs(out2.mesh.positions - expect).max() < 1e-9


def test_record_capture_rigid_invariant_displacements():
    mesh, loop, cap = make_bumped_cube(height=0.5)
    rec1, _ = record_extrusion(mesh, loop, base_faces=[cap])
    rng = np.random.default_rng(12)
    Q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
    if np.linalg.det(Q) < 0:
        Q[:, 0] = -Q[:, 0]
    moved = mesh.with_positions(mesh.positions @ Q.T + rng.normal(size=3))
    loop2 = type(loop)(**loop.__dict__)
    rec2, _ = record_extrusion(moved, loop2, base_faces=[cap])
    assert np.abs(rec1.displacements - rec2.displacements).max() < 1e-9
    assert np.abs(rec1.base_uv - rec2.base_uv).max() < 1e-9


def test_three_records_three_shapes():
    base = cube()
    top = top_face_id(base)
    ref = min(base.faces[top])
    patch = Patch.of([top], ref)
    recs = []
    for h, s in ((0.3, 1.0), (0.8, 0.5), (0.1, 1.6)):
        m, loop, cap = make_bumped_cube(height=h, scale=s)
        rec, _ = record_extrusion(m, loop, base_faces=[cap], record_id=len(recs))
        recs.append(rec)
    outs = [apply_extrusion(base, patch, r).mesh for r in recs]
    for i in range(3):
        for j in range(i + 1, 3):
            d = _hausdorff_vertexwise(outs[i], outs[j])
            assert d > 1e-3  # pairwise distinct shapes


def test_flat_extrusion_small_normal_displacement():
    mesh, loop, cap = make_bumped_cube(height=0.0, scale=1.0)
    rec, _ = record_extrusion(mesh, loop, base_faces=[cap])
    # interior nodes carry (near) zero displacement in every frame
    assert np.abs(rec.displacements).max() < 1e-9


# -- selection -----------------------------------------------------------------------


def grid_param(n):
    mesh = grid_patch_mesh(n, n)
    patch = Patch.of(range(mesh.n_faces), 0)
    return mesh, patch, harmonic_disk_map(mesh, patch)


def test_select_whole_disk_boundary():
    mesh, patch, param = grid_param(3)
    t = np.linspace(0, 2 * np.pi, 48, endpoint=False)
    circle = np.stack([np.cos(t), np.sin(t)], axis=1)
    sel = select_patch_pure_quad(mesh, param, circle)
    assert sel.faces == set(patch.faces)


def test_select_central_faces_of_grid():
    # oracle: the uv boundary polyline of the central 2x2 faces of a 4x4
    # grid, sampled at its boundary vertices (the production convention)
    mesh, patch, param = grid_param(4)
    ring = [5 * 1 + 1, 5 * 1 + 2, 5 * 1 + 3, 5 * 2 + 3, 5 * 3 + 3,
            5 * 3 + 2, 5 * 3 + 1, 5 * 2 + 1]
    poly = np.array([param.uv_of_vertex(v) for v in ring])
    sel = select_patch_pure_quad(mesh, param, poly)
    expected = {5, 6, 9, 10}  # central 2x2 faces (row-major 4x4)
    assert sel.faces == expected
    assert sel.dtw_score < 1e-9  # exact vertex polyline matches its cycle


def test_selection_failure_and_bad_scores():
    mesh, patch, param = grid_param(2)
    with pytest.raises(SelectionError):
        select_patch_pure_quad(mesh, param, UNIT_SQUARE[:2])  # not a loop
    # a tiny off-scale loop still yields some cycle, but with a score that
    # the fallback ladder would reject
    tiny = 0.001 * (UNIT_SQUARE - 0.5)
    sel = select_patch_pure_quad(mesh, param, tiny)
    assert sel.dtw_score / len(tiny) > 0.5


def test_quad_dominant_noop_when_loop_on_edges():
    # loop running exactly along existing mesh edges (the boundary polyline
    # of the central 2x2 block): the cut is a no-op
    mesh, patch, param = grid_param(4)
    ring = [6, 7, 8, 13, 18, 17, 16, 11]
    poly = np.array([param.uv_of_vertex(v) for v in ring])
    new_mesh, sel, maps = select_patch_quad_dominant(mesh, param, poly)
    assert new_mesh.n_vertices == mesh.n_vertices  # no new vertices
    pure = select_patch_pure_quad(mesh, param, poly)
    mapped = {int(maps.face_map[f]) for f in pure.faces}
    assert sel.faces == mapped


def test_quad_dominant_diagonal_cut():
    mesh, patch, param = grid_param(2)
    # a triangle loop cutting through the patch diagonally
    tri = np.array([[0.0, -0.9], [0.9, 0.1], [-0.9, 0.1]])
    new_mesh, sel, maps = select_patch_quad_dominant(mesh, param, tri)
    assert new_mesh.n_faces > mesh.n_faces
    new_mesh.validate_manifold()
    assert len(sel.faces) >= 1


def test_quad_dominant_circle_area_share():
    # Monte-Carlo oracle: selected uv area ~= pi * 0.5^2 of the disk
    mesh, patch, param = grid_param(8)
    t = np.linspace(0, 2 * np.pi, 96, endpoint=False)
    circle = 0.5 * np.stack([np.cos(t), np.sin(t)], axis=1)
    new_mesh, sel, maps = select_patch_quad_dominant(mesh, param, circle)
    # recompute uv areas of selected faces on the cut mesh: new vertices
    # keep their uv in the pool only implicitly, so integrate in 3D where
    # the patch is planar with unit scale ratio per uv area... simpler:
    # the patch is flat in z=0, so 3D face area equals world area; compare
    # the selected world area against the r=0.5 uv circle mapped area by
    # Monte Carlo sampling of uv points located in selected faces.
    areas = new_mesh.face_areas()
    sel_area = areas[sorted(sel.faces)].sum()
    total = areas.sum()
    rng = np.random.default_rng(0)
    pts = rng.uniform(-1, 1, size=(20000, 2))
    pts = pts[np.linalg.norm(pts, axis=1) <= 1.0]
    inside = np.linalg.norm(pts, axis=1) <= 0.5
    share = inside.mean()
    assert abs(sel_area / total - share) < 0.1 * share + 0.02


def test_min_angle_vertex_deterministic():
    uvs = {7: (0.5, 0.5), 3: (0.5, -0.001), 9: (1.0, 0.0)}
    assert min_angle_vertex(uvs) == 9  # angle 0 beats small positive angles
