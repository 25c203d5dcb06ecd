import numpy as np
import pytest

from feqtee.mesh import Patch, PolyMesh, extrude_patch
from feqtee.primitives import cube, subdivided_cube


@pytest.fixture
def cube_mesh():
    return cube()


def top_face_id(mesh: PolyMesh) -> int:
    """Face whose centroid has the largest z."""
    zs = [mesh.face_centroid(f)[2] for f in range(mesh.n_faces)]
    return int(np.argmax(zs))


def make_bumped_cube(height=0.5, scale=1.0):
    """Cube with its top face extruded upward: the canonical 10-quad bump.

    Returns (mesh, bump_loop, cap_face_id). The cap keeps its face id; the
    four new side faces form the bump loop.
    """
    base = cube()
    top = top_face_id(base)
    ref = min(base.faces[top])
    mesh, loop, maps = extrude_patch(base, Patch.of([top], ref))
    pos = mesh.positions.copy()
    dups = sorted(maps.dup_vertex.values())
    originals = sorted(maps.dup_vertex.keys())
    pos[dups, 2] += height
    if scale != 1.0:
        center = pos[dups].mean(axis=0)
        pos[dups, :2] = center[:2] + (pos[dups, :2] - center[:2]) * scale
    return mesh.with_positions(pos), loop, top


@pytest.fixture
def bumped_cube():
    return make_bumped_cube()


@pytest.fixture
def sphere_box():
    return subdivided_cube(4, spherify=True)


def extrude_lifted(mesh, faces, ref=None, dz=0.5, scale=1.0):
    """Extrude a patch and lift the new cap along +z, optionally scaling the
    cap about its centroid. Returns (mesh, loop, maps)."""
    from feqtee.mesh import validate_patch_disk

    if ref is None:
        cycle = validate_patch_disk(mesh, faces)
        ref = int(mesh.h_origin[cycle[0]])
    out, loop, maps = extrude_patch(mesh, Patch.of(faces, ref))
    moved = sorted(maps.dup_vertex.values())
    interior = sorted({v for f in faces for v in out.faces[f]} - set(moved))
    moved = moved + interior
    pos = out.positions.copy()
    pos[moved, 2] += dz
    if scale != 1.0:
        c = pos[moved].mean(axis=0)
        pos[moved, 0] = c[0] + (pos[moved, 0] - c[0]) * scale
        pos[moved, 1] = c[1] + (pos[moved, 1] - c[1]) * scale
    return out.with_positions(pos), loop, maps


def root_loop_of(mesh, first_maps):
    """Re-trace the first extrusion's loop on the final mesh via one of its
    sleeper edges (an original/duplicate vertex pair)."""
    from feqtee.mesh import trace_face_loop

    orig, dup = next(iter(first_maps.dup_vertex.items()))
    e = mesh.find_edge(orig, dup)
    assert e >= 0
    return trace_face_loop(mesh, e)


def bump_feature(height=0.6, scale=0.8):
    """Cube with one lifted bump; returns (mesh, root_loop)."""
    base = cube()
    top = top_face_id(base)
    mesh, loop, maps = extrude_lifted(base, [top], dz=height, scale=scale)
    return mesh, root_loop_of(mesh, maps)


def tower_feature(levels=2, dz=0.4):
    """Stacked bumps: each extrusion lifts the previous cap; chain DAG."""
    base = cube()
    top = top_face_id(base)
    mesh, loop, first_maps = extrude_lifted(base, [top], dz=dz, scale=0.9)
    for i in range(levels - 1):
        mesh, _, _ = extrude_lifted(mesh, [top], dz=dz, scale=0.9)
    return mesh, root_loop_of(mesh, first_maps)


def twin_bump_feature(dz_root=0.5, dz_a=0.3, dz_b=0.45):
    """A lifted 2x2 cap with two separate single-face bumps on it; the
    decomposition branches (root with two children and region curves)."""
    base = subdivided_cube(2)
    normals = base.face_normals()
    top_faces = [f for f in range(base.n_faces)
                 if normals[f][2] > 1e-9]
    assert len(top_faces) == 4
    mesh, root_ring, root_maps = extrude_lifted(base, top_faces, dz=dz_root)
    mesh, _, _ = extrude_lifted(mesh, [top_faces[0]], dz=dz_a, scale=0.7)
    mesh, _, _ = extrude_lifted(mesh, [top_faces[3]], dz=dz_b, scale=0.6)
    return mesh, root_loop_of(mesh, root_maps)
