"""Acceptance suite: one test per acceptance criterion, each printing a
PASS line with its measured numbers when it holds.

Run with `pytest tests/test_acceptance.py -v -s` to see the lines.
"""

import time

import numpy as np
import pytest

from feqtee.builder import edge_weight, select_patch_pure_quad
from feqtee.cluster import build_library, substitute
from feqtee.decompose import (
    ExtrusionGraph,
    ExtrusionNode,
    decompose_feature,
    emit_tee,
    linearize,
)
from feqtee.disk import GenericDisk
from feqtee.errors import FeqTeeError, TeeSemanticError, TeeSyntaxError
from feqtee.mesh import (
    Patch,
    collapse_face_loop,
    enumerate_face_loops,
    extrude_patch,
    mesh_isomorphic,
    trace_face_loop,
    validate_feq,
    validate_patch_disk,
)
from feqtee.metrics import relative_hausdorff
from feqtee.param import harmonic_disk_map
from feqtee.primitives import cube, grid_patch_mesh, subdivided_cube
from feqtee.records import RecordStore
from feqtee.tee import (
    ApplyExtrusion,
    ExecuteOptions,
    GetPrevious,
    Remember,
    SelectVertices,
    TeeProgram,
    execute_tee,
    parse_tee,
    serialize_tee,
)

from conftest import (
    bump_feature,
    extrude_lifted,
    make_bumped_cube,
    root_loop_of,
    tower_feature,
    twin_bump_feature,
)

DISK = GenericDisk()


def _report(name, detail):
    print(f"\nACCEPTANCE {name}: PASS ({detail})")


# -- feature corpus -------------------------------------------------------------


def varied_tower(levels, seed):
    rng = np.random.default_rng(seed)
    base = cube()
    mesh, loop, first = extrude_lifted(
        base, [1], dz=float(rng.uniform(0.2, 0.5)),
        scale=float(rng.uniform(0.7, 1.2)))
    for _ in range(levels - 1):
        mesh, _, _ = extrude_lifted(
            mesh, [1], dz=float(rng.uniform(0.2, 0.5)),
            scale=float(rng.uniform(0.7, 1.2)))
    return mesh, root_loop_of(mesh, first)


def side_patch(mesh, direction, count):
    normals = mesh.face_normals()
    faces = [f for f in range(mesh.n_faces)
             if np.dot(normals[f], direction) > 1e-9 * 0 + 1e-12
             and abs(np.dot(normals[f] / np.linalg.norm(normals[f]),
                            direction) - 1) < 1e-9]
    return faces[:count]


def wide_branch_feature(seed=0):
    """A 3x3 side cap lifted, with three sub-bumps on distinct cap faces."""
    rng = np.random.default_rng(seed)
    base = subdivided_cube(3)
    top = side_patch(base, np.array([0, 0, 1.0]), 9)
    mesh, ring, first = extrude_lifted(base, top, dz=0.45)
    for f in (top[0], top[4], top[8]):
        mesh, _, _ = extrude_lifted(mesh, [f],
                                    dz=float(rng.uniform(0.2, 0.4)),
                                    scale=float(rng.uniform(0.6, 0.9)))
    return mesh, root_loop_of(mesh, first)


def feature_corpus():
    feats = [
        bump_feature(0.6, 0.8),
        bump_feature(0.3, 1.3),
        bump_feature(1.0, 1.0),
        tower_feature(2, dz=0.5),
        tower_feature(3, dz=0.4),
        varied_tower(4, 11),
        varied_tower(5, 12),
        twin_bump_feature(),
        twin_bump_feature(0.4, 0.5, 0.25),
        wide_branch_feature(3),
        wide_branch_feature(4),
    ]
    return feats


def test_criterion_1_lossless_roundtrip():
    t0 = time.perf_counter()
    feats = feature_corpus()
    assert len(feats) >= 10
    worst = 0.0
    for mesh, root in feats:
        assert mesh.n_faces <= 200
        decomp = decompose_feature(mesh, root)
        tee = emit_tee(decomp.graph)
        by_id = {r.id: r for r in decomp.records}
        out, _ = execute_tee(parse_tee(tee), decomp.base_mesh,
                             decomp.base_patch, by_id, DISK)
        assert mesh_isomorphic(out, mesh), "connectivity mismatch"
        err = relative_hausdorff(mesh, out, samples=4000, seed=0)
        worst = max(worst, err)
        assert err <= 1e-5, f"geometry error {err}"
    elapsed = time.perf_counter() - t0
    assert elapsed <= 10.0, f"took {elapsed:.1f}s"
    _report("1 lossless-roundtrip",
            f"{len(feats)} features, worst rel Hausdorff {worst:.2e}, "
            f"{elapsed:.1f}s")


# -- criterion 2: guaranteed manifold ----------------------------------------------


def twenty_record_library():
    records = []
    rng = np.random.default_rng(100)
    for i in range(20):
        h = float(rng.uniform(0.05, 0.9))
        s = float(rng.uniform(0.5, 1.4))
        mesh, loop, cap = make_bumped_cube(height=h, scale=s)
        from feqtee.decompose import record_extrusion
        rec, _ = record_extrusion(mesh, loop, base_faces=[cap], record_id=i)
        records.append(rec)
    return {r.id: r for r in records}


def random_program(rng, ids, max_len=30):
    n = int(rng.integers(1, max_len + 1))
    instrs = [ApplyExtrusion(int(rng.choice(ids)))]
    tags = []
    extrusions = 1
    while len(instrs) < n:
        r = rng.random()
        if r < 0.6:
            instrs.append(ApplyExtrusion(int(rng.choice(ids))))
            extrusions += 1
        elif r < 0.75:
            tag = len(tags)
            tags.append(tag)
            instrs.append(Remember(tag))
        elif tags:
            instrs.append(GetPrevious(int(rng.choice(tags))))
            # a selection loop: a random circle quantized on the disk
            cx, cy = rng.uniform(-0.4, 0.4, size=2)
            rad = float(rng.uniform(0.15, 0.6))
            t = np.linspace(0, 2 * np.pi, 12, endpoint=False)
            pts = np.stack([cx + rad * np.cos(t), cy + rad * np.sin(t)],
                           axis=1)
            sel = DISK.quantize_curve(pts)
            if len(sel) >= 3:
                instrs.append(SelectVertices(tuple(sel)))
        else:
            instrs.append(ApplyExtrusion(int(rng.choice(ids))))
            extrusions += 1
    return TeeProgram(instrs)


def test_criterion_2_guaranteed_manifold():
    t0 = time.perf_counter()
    library = twenty_record_library()
    ids = sorted(library)
    base = subdivided_cube(3)
    top = side_patch(base, np.array([0, 0, 1.0]), 9)
    cycle = validate_patch_disk(base, top)
    patch = Patch.of(top, int(base.h_origin[cycle[0]]))

    rng = np.random.default_rng(2024)
    ok = 0
    failed = 0
    for i in range(1000):
        program = random_program(rng, ids)
        try:
            out, _ = execute_tee(program, base, patch, library, DISK,
                                 ExecuteOptions(validate_result=False))
        except FeqTeeError:
            failed += 1
            continue
        out.validate_manifold()  # raises on any non-manifold output
        assert out.is_closed()
        ok += 1
    elapsed = time.perf_counter() - t0
    assert ok + failed == 1000
    assert ok >= 100, f"too few successful executions ({ok}) to be meaningful"
    assert elapsed <= 60.0, f"took {elapsed:.1f}s"
    _report("2 guaranteed-manifold",
            f"{ok} executed clean, {failed} structured failures, "
            f"0 non-manifold, {elapsed:.1f}s")


# -- criterion 3: clustering degradation --------------------------------------------


def test_criterion_3_cluster_degradation():
    mesh, root = varied_tower(8, seed=77)
    # tall towers outgrow the cube, so name the feature side explicitly
    decomp = decompose_feature(mesh, root, feature_face=1)
    records = decomp.records
    n = len(records)
    assert n >= 8
    vecs = {r.id for r in records}
    program = parse_tee(emit_tee(decomp.graph))
    by_id = {r.id: r for r in records}
    errs = {}
    for k in (n, n // 2, 1):
        lib = build_library(records, k, seed=0)
        prog = substitute([program], lib)[0]
        out, _ = execute_tee(prog, decomp.base_mesh, decomp.base_patch,
                             by_id, DISK)
        errs[k] = relative_hausdorff(mesh, out, samples=4000, seed=0)
    assert errs[n] <= 1e-5
    assert errs[n] <= errs[n // 2] + 1e-12
    assert errs[n // 2] <= errs[1] + 1e-12
    _report("3 cluster-degradation",
            f"N={n}: err(K=N)={errs[n]:.2e} <= err(K=N/2)={errs[n // 2]:.2e}"
            f" <= err(K=1)={errs[1]:.2e}")


# -- criterion 4: parser robustness ---------------------------------------------------


EQ1_PREFIX = ("E8124 E8124 E17698 E15286 E4630 P4 Re gp P4 sv "
              "2222 2402 2562 2742")


def test_criterion_4_parser():
    rng = np.random.default_rng(4)
    for _ in range(10000):
        n = int(rng.integers(0, 80))
        text = bytes(rng.integers(0, 256, size=n).tolist()).decode("latin-1")
        try:
            parse_tee(text)
        except (TeeSyntaxError, TeeSemanticError):
            pass  # positioned structured error

    for i in range(100):
        prng = np.random.default_rng(1000 + i)
        program = random_program(prng, list(range(50)))
        text = serialize_tee(program)
        assert parse_tee(text) == program
        assert serialize_tee(parse_tee(text)) == text

    program = parse_tee(EQ1_PREFIX)
    assert program.instructions == [
        ApplyExtrusion(8124), ApplyExtrusion(8124), ApplyExtrusion(17698),
        ApplyExtrusion(15286), ApplyExtrusion(4630), Remember(4),
        GetPrevious(4), SelectVertices((2222, 2402, 2562, 2742)),
    ]
    assert serialize_tee(program) == EQ1_PREFIX
    _report("4 parser", "10000 fuzz inputs, 100 round-trips, "
            "reference sequence byte-identical")


# -- criterion 5: harmonic injectivity ---------------------------------------------


def test_criterion_5_harmonic_injectivity():
    rng = np.random.default_rng(5)
    worst_res = 0.0
    for _ in range(100):
        n = int(rng.integers(2, 6))
        m = int(rng.integers(2, 6))
        mesh = grid_patch_mesh(n, m)
        pos = mesh.positions.copy()
        pos += rng.uniform(-0.25, 0.25, size=pos.shape)
        mesh = mesh.with_positions(pos)
        patch = Patch.of(range(mesh.n_faces), 0)
        param = harmonic_disk_map(mesh, patch)  # raises on any flipped tri
        worst_res = max(worst_res, param.harmonic_residual())
    assert worst_res <= 1e-8
    _report("5 harmonic-injectivity",
            f"100 jittered grids, zero flips, max residual {worst_res:.2e}")


# -- criterion 6: selection fidelity ----------------------------------------------


def test_criterion_6_selection_fidelity():
    # closed-form edge weights
    square = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    assert edge_weight([(0.2, 0.0), (0.6, 0.0)], square, k=5) == \
        pytest.approx(0.0, abs=1e-12)
    assert edge_weight([(0.5, 0.0), (0.5, 0.4)], square, k=5) == \
        pytest.approx(5.0, abs=1e-12)
    assert edge_weight([(0.3, 0.25), (0.7, 0.25)], square, k=5) == \
        pytest.approx(5 * 0.0625, abs=1e-12)

    # 100 decomposition-style selections: a sub-rectangle of a jittered
    # grid patch, its boundary quantized on the generic disk, must come
    # back as exactly the original face set
    rng = np.random.default_rng(6)
    hits = 0
    for case in range(100):
        n = int(rng.integers(3, 6))
        m = int(rng.integers(3, 6))
        mesh = grid_patch_mesh(n, m)
        pos = mesh.positions.copy()
        pos[:, :2] += rng.uniform(-0.2, 0.2, size=(len(pos), 2))
        mesh = mesh.with_positions(pos)
        patch = Patch.of(range(mesh.n_faces), 0)
        param = harmonic_disk_map(mesh, patch)

        i0 = int(rng.integers(0, n - 1))
        j0 = int(rng.integers(0, m - 1))
        i1 = int(rng.integers(i0 + 1, n))
        j1 = int(rng.integers(j0 + 1, m))
        region = {i * m + j for i in range(i0, i1) for j in range(j0, j1)}
        cyc = validate_patch_disk(mesh, region)
        bverts = [int(mesh.h_origin[h]) for h in cyc]
        poly = np.array([param.uv_of_vertex(v) for v in bverts])
        ids = DISK.quantize_curve(poly)
        if len(ids) > 1 and ids[0] == ids[-1]:
            ids = ids[:-1]
        loop_pts = DISK.dequantize_ids(ids)
        sel = select_patch_pure_quad(mesh, param, loop_pts)
        assert sel.faces == region, f"case {case}: {sel.faces} != {region}"
        hits += 1
    assert hits == 100
    _report("6 selection-fidelity",
            "edge weights exact to 1e-12, 100/100 regions recovered")


# -- criterion 7: loop census and inversion ------------------------------------------


def test_criterion_7_cube_census_and_inversion():
    loops = enumerate_face_loops(cube())
    assert len(loops) == 3
    assert all(len(l) == 4 for l in loops)

    mesh = subdivided_cube(4, spherify=True)
    rng = np.random.default_rng(7)
    done = 0
    attempts = 0
    while done < 50 and attempts < 500:
        attempts += 1
        f0 = int(rng.integers(mesh.n_faces))
        patch = {f0}
        frontier = [f0]
        target = int(rng.integers(1, 8))
        while frontier and len(patch) < target:
            f = frontier.pop(0)
            for h in mesh.face_halfedges(f):
                g = int(mesh.h_face[mesh.h_twin[h]])
                if g not in patch and rng.random() < 0.6:
                    patch.add(g)
                    frontier.append(g)
        try:
            cyc = validate_patch_disk(mesh, patch)
        except FeqTeeError:
            continue
        ref = int(mesh.h_origin[cyc[0]])
        out, loop, _ = extrude_patch(mesh, Patch.of(patch, ref))
        back, _ = collapse_face_loop(out, loop, base_faces=patch)
        assert mesh_isomorphic(back, mesh, position_tol=0.0)
        done += 1
    assert done == 50
    _report("7 census-inversion",
            f"cube: 3 loops of 4; {done} extrude/collapse identities")


# -- criterion 8: randomized linearization -------------------------------------------


def test_criterion_8_randomized_linearization():
    nodes = {i: ExtrusionNode(i, i, [], {}, None) for i in range(5)}
    edges = [(0, 1), (1, 2), (0, 3), (3, 4)]
    for p, c in edges:
        nodes[c].parents.append(p)
    graph = ExtrusionGraph(nodes, edges, root=0)
    allowed = {(0, 1, 2, 3, 4), (0, 3, 4, 1, 2)}
    seen = set()
    for seed in range(1000):
        order = tuple(linearize(graph, seed))
        assert order in allowed, f"illegal order {order}"
        seen.add(order)
    assert seen == allowed
    _report("8 randomized-linearization",
            "1000 seeds, only chain-contiguous orders, both observed")
