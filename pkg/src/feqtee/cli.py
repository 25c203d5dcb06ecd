"""The feqtee command line: decompose, rebuild, roundtrip, cluster,
export-corpus and serve.

Exit codes: 2 = input mesh failed FEQ validation, 3 = feature cannot be
decomposed (e.g. inward branching), 4 = TEE referenced an unknown
extrusion id, 1 = other structured errors.
"""

from __future__ import annotations

import json
import os
import sys
from pathlib import Path

import click
import numpy as np

from . import cluster as cluster_mod
from . import decompose as decompose_mod
from . import metrics
from .disk import DEFAULT_RINGS, GenericDisk
from .errors import DecompositionError, FeqTeeError, UnknownExtrusionError
from .mesh import Patch, load_mesh, mesh_isomorphic, save_mesh, trace_face_loop, validate_feq
from .records import RecordStore
from .tee import ExecuteOptions, execute_tee, parse_tee, serialize_tee

BASE_FORMAT_TAG = "feqtee-base-v1"


def _default_seed() -> int:
    return int(os.environ.get("FEQTEE_SEED", "0"))


def _parse_edge(mesh, text: str) -> int:
    """Edge argument: either an edge index or a 'u,v' vertex pair."""
    if "," in text:
        u, v = (int(x) for x in text.split(",", 1))
        e = mesh.find_edge(u, v)
        if e < 0:
            raise click.ClickException(f"no edge between vertices {u} and {v}")
        return e
    e = int(text)
    if not (0 <= e < mesh.n_edges):
        raise click.ClickException(f"edge index {e} out of range")
    return e


def _load_feq(path):
    mesh = load_mesh(path)
    report = validate_feq(mesh)
    if not report.is_feq:
        click.echo("input is not an FEQ mesh:", err=True)
        click.echo(f"  closed={report.is_closed} connected={report.connected} "
                   f"genus={report.genus} all_quads={report.all_quads}", err=True)
        click.echo(f"  self_intersecting_loops={report.self_intersecting_loop_ids} "
                   f"self_adjacent_loops={report.self_adjacent_loop_ids}", err=True)
        sys.exit(2)
    return mesh


@click.group()
def main():
    """Quad-mesh extrusion decomposition and the TEE toolchain."""


@main.command("decompose")
@click.argument("mesh_path", type=click.Path(exists=True))
@click.option("--root-edge", required=True,
              help="edge of the feature's first loop: index or 'u,v' pair")
@click.option("--out-records", required=True, type=click.Path())
@click.option("--out-tee", required=True, type=click.Path())
@click.option("--out-base", type=click.Path(),
              help="base patch spec JSON (default: <out-tee>.base.json)")
@click.option("--seed", type=int, default=None, help="linearization seed")
@click.option("--feature-face", type=int, default=None,
              help="face id naming the feature side of the root loop")
@click.option("--rings", type=int, default=DEFAULT_RINGS)
def cmd_decompose(mesh_path, root_edge, out_records, out_tee, out_base,
                  seed, feature_face, rings):
    """Decompose the marked feature into records and a TEE program."""
    seed = _default_seed() if seed is None else seed
    mesh = _load_feq(mesh_path)
    root = trace_face_loop(mesh, _parse_edge(mesh, root_edge))
    disk = GenericDisk(rings)
    try:
        decomp = decompose_mod.decompose_feature(mesh, root, seed, disk,
                                                 feature_face=feature_face)
    except DecompositionError as exc:
        click.echo(f"decomposition failed: {exc}", err=True)
        sys.exit(3)
    store = RecordStore(decomp.records)
    store.save(out_records)
    tee = decompose_mod.emit_tee(decomp.graph, seed=seed)
    Path(out_tee).write_text(tee + "\n", encoding="utf-8")
    base_path = out_base or (str(out_tee) + ".base.json")
    Path(base_path).write_text(json.dumps({
        "format": BASE_FORMAT_TAG,
        "base_mesh_obj": _obj_text(decomp.base_mesh),
        "faces": sorted(decomp.base_patch.faces),
        "reference_vertex": decomp.base_patch.reference_vertex,
    }) + "\n", encoding="utf-8")

    g = decomp.graph
    chains = sum(1 for n in g.nodes.values() if n.chain_parent is not None)
    click.echo(f"nodes: {len(g.nodes)}")
    click.echo(f"edges: {len(g.edges)}")
    click.echo(f"chained: {chains}")
    click.echo(f"records: {len(decomp.records)} -> {out_records}")
    click.echo(f"tee: {out_tee}")
    click.echo(f"base patch: {base_path}")


def _obj_text(mesh):
    from .obj_io import obj_text
    return obj_text(mesh.positions, mesh.faces)


def _load_base_patch(base_mesh_path, base_json, faces, ref):
    if base_json:
        spec = json.loads(Path(base_json).read_text(encoding="utf-8"))
        if spec.get("format") != BASE_FORMAT_TAG:
            raise click.ClickException("bad base patch spec format")
        import io
        import tempfile
        if base_mesh_path:
            mesh = load_mesh(base_mesh_path)
        else:
            with tempfile.NamedTemporaryFile("w", suffix=".obj",
                                             delete=False) as fh:
                fh.write(spec["base_mesh_obj"])
                tmp = fh.name
            mesh = load_mesh(tmp)
            os.unlink(tmp)
        return mesh, Patch.of(spec["faces"], spec["reference_vertex"])
    if not (base_mesh_path and faces and ref is not None):
        raise click.ClickException(
            "need --base-json or (mesh path, --faces and --ref)"
        )
    mesh = load_mesh(base_mesh_path)
    ids = [int(x) for x in faces.split(",")]
    return mesh, Patch.of(ids, int(ref))


@main.command("rebuild")
@click.argument("base_mesh_path", type=click.Path(exists=True), required=False)
@click.option("--tee", "tee_path", required=True, type=click.Path(exists=True))
@click.option("--records", "records_path", required=True,
              type=click.Path(exists=True))
@click.option("--base-json", type=click.Path(exists=True),
              help="base patch spec written by decompose")
@click.option("--faces", help="comma-separated base patch face ids")
@click.option("--ref", type=int, help="reference boundary vertex id")
@click.option("--methodology", type=click.Choice(["pure_quad", "quad_dominant"]),
              default="pure_quad")
@click.option("--dtw-threshold", type=float, default=0.5)
@click.option("--out", "out_mesh", required=True, type=click.Path())
@click.option("--rings", type=int, default=DEFAULT_RINGS)
def cmd_rebuild(base_mesh_path, tee_path, records_path, base_json, faces,
                ref, methodology, dtw_threshold, out_mesh, rings):
    """Execute a TEE program on a base patch and write the result."""
    mesh, patch = _load_base_patch(base_mesh_path, base_json, faces, ref)
    store = RecordStore.load(records_path)
    program = parse_tee(Path(tee_path).read_text(encoding="utf-8"))
    options = ExecuteOptions(methodology=methodology,
                             dtw_threshold=dtw_threshold)
    try:
        out, trace = execute_tee(program, mesh, patch, store,
                                 GenericDisk(rings), options)
    except UnknownExtrusionError as exc:
        click.echo(f"unknown extrusion: {exc}", err=True)
        sys.exit(4)
    except FeqTeeError as exc:
        click.echo(f"execution failed: {exc}", err=True)
        sys.exit(1)
    for step in trace.steps:
        line = f"step {step.index}: {step.op} faces={step.face_count}"
        if step.dtw_score is not None:
            line += f" dtw={step.dtw_score:.4g}"
        click.echo(line)
    save_mesh(out_mesh, out)
    click.echo(f"wrote {out_mesh} ({out.n_faces} faces)")


@main.command("roundtrip")
@click.argument("mesh_path", type=click.Path(exists=True))
@click.option("--root-edge", required=True)
@click.option("--k", "k_values", help="comma-separated cluster counts")
@click.option("--seed", type=int, default=None)
@click.option("--samples", type=int, default=10000)
@click.option("--json", "as_json", is_flag=True)
@click.option("--feature-face", type=int, default=None)
@click.option("--rings", type=int, default=DEFAULT_RINGS)
def cmd_roundtrip(mesh_path, root_edge, k_values, seed, samples, as_json,
                  feature_face, rings):
    """Decompose, optionally cluster-substitute, rebuild and report."""
    seed = _default_seed() if seed is None else seed
    mesh = _load_feq(mesh_path)
    root = trace_face_loop(mesh, _parse_edge(mesh, root_edge))
    disk = GenericDisk(rings)
    try:
        decomp = decompose_mod.decompose_feature(mesh, root, seed, disk,
                                                 feature_face=feature_face)
    except DecompositionError as exc:
        click.echo(f"decomposition failed: {exc}", err=True)
        sys.exit(3)
    program = parse_tee(decompose_mod.emit_tee(decomp.graph, seed=seed))
    by_id = {r.id: r for r in decomp.records}

    ks = [None]
    if k_values:
        ks = [int(x) for x in k_values.split(",")]
    rows = []
    for k in ks:
        prog = program
        if k is not None:
            lib = cluster_mod.build_library(decomp.records, k, seed)
            prog = cluster_mod.substitute([program], lib)[0]
        try:
            out, _ = execute_tee(prog, decomp.base_mesh, decomp.base_patch,
                                 by_id, disk)
            err = metrics.relative_hausdorff(mesh, out, samples, seed)
            rows.append({
                "k": k if k is not None else "lossless",
                "hausdorff_rel": err,
                "face_delta": out.n_faces - mesh.n_faces,
                "manifold": _manifold_ok(out),
                "isomorphic": mesh_isomorphic(out, mesh),
            })
        except FeqTeeError as exc:
            rows.append({"k": k, "error": str(exc)})
    if as_json:
        click.echo(json.dumps({"rows": rows}, default=str))
    else:
        for row in rows:
            click.echo(" ".join(f"{k}={v}" for k, v in row.items()))


def _manifold_ok(mesh) -> bool:
    try:
        mesh.validate_manifold()
        return mesh.is_closed()
    except FeqTeeError:
        return False


@main.command("cluster")
@click.argument("records_path", type=click.Path(exists=True))
@click.option("--k", type=int, required=True)
@click.option("--seed", type=int, default=None)
@click.option("--out", "out_path", required=True, type=click.Path())
def cmd_cluster(records_path, k, seed, out_path):
    """Build a cluster library from a record store."""
    seed = _default_seed() if seed is None else seed
    store = RecordStore.load(records_path)
    lib = cluster_mod.build_library(store.records(), k, seed)
    Path(out_path).write_text(lib.to_json() + "\n", encoding="utf-8")
    click.echo(f"library: K={lib.k} representatives={len(lib.representatives)}"
               f" -> {out_path}")


@main.command("export-corpus")
@click.argument("tee_dir", type=click.Path(exists=True, file_okay=False))
@click.option("--records", "records_path", type=click.Path(exists=True),
              help="optional cluster-substitution record store")
@click.option("--library", "library_path", type=click.Path(exists=True),
              help="optional cluster library for substitution")
@click.option("--augmentations", type=int, default=1)
@click.option("--seed", type=int, default=None)
@click.option("--out", "out_path", required=True, type=click.Path())
def cmd_export_corpus(tee_dir, records_path, library_path, augmentations,
                      seed, out_path):
    """Write a one-program-per-line corpus with randomized linearizations."""
    seed = _default_seed() if seed is None else seed
    files = sorted(Path(tee_dir).glob("*.tee"))
    if not files:
        click.echo(f"no .tee files in {tee_dir}", err=True)
        sys.exit(1)
    lib = None
    if library_path:
        lib = cluster_mod.ClusterLibrary.from_json(
            Path(library_path).read_text(encoding="utf-8")
        )
    lines = []
    for fi, path in enumerate(files):
        try:
            program = parse_tee(path.read_text(encoding="utf-8"))
        except FeqTeeError as exc:
            click.echo(f"{path}: {exc}", err=True)
            sys.exit(1)
        graph = program_to_graph(program)
        for a in range(augmentations):
            order = decompose_mod.linearize(graph, seed + 1000 * fi + a)
            text = decompose_mod.emit_tee(graph, order=order)
            if lib is not None:
                text = serialize_tee(
                    cluster_mod.substitute([parse_tee(text)], lib)[0]
                )
            lines.append(text)
    Path(out_path).write_text("\n".join(lines) + "\n", encoding="utf-8")
    click.echo(f"wrote {len(lines)} programs -> {out_path}")


def program_to_graph(program):
    """Reconstruct the extrusion graph implied by a TEE program.

    Chained E tokens depend on their predecessor; gp/sv groups attach the
    following extrusion to every referenced tag's extrusion, keeping the
    selection curves."""
    from .decompose import ExtrusionGraph, ExtrusionNode, RegionCurve
    from .tee import ApplyExtrusion, GetPrevious, Remember, SelectVertices

    nodes = {}
    tag_to_node = {}
    pending = []   # (parent node id, curve ids)
    current_domain = None
    prev_node = None
    idx = 0
    for ins in program:
        if isinstance(ins, ApplyExtrusion):
            if pending:
                parents = [p for p, _ in pending]
                curves = {p: RegionCurve(p, ids) for p, ids in pending}
                node = ExtrusionNode(idx, ins.record_id, sorted(set(parents)),
                                     curves, None)
            elif prev_node is not None:
                node = ExtrusionNode(idx, ins.record_id, [prev_node], {},
                                     prev_node)
            else:
                node = ExtrusionNode(idx, ins.record_id, [], {}, None)
            nodes[idx] = node
            prev_node = idx
            current_domain = None
            pending = []
            idx += 1
        elif isinstance(ins, Remember):
            tag_to_node[ins.tag] = prev_node
        elif isinstance(ins, GetPrevious):
            current_domain = tag_to_node[ins.tag]
        elif isinstance(ins, SelectVertices):
            dom = current_domain if current_domain is not None else prev_node
            pending.append((dom, list(ins.ids)))
    edges = sorted({(p, c) for c in nodes for p in nodes[c].parents})
    return ExtrusionGraph(nodes, edges, root=0)


@main.command("serve")
@click.option("--port", type=int, default=8787)
@click.option("--host", default="127.0.0.1")
@click.option("--records", "records_path", type=click.Path(exists=True),
              help="record store served to clients")
@click.option("--assets", type=click.Path(exists=True, file_okay=False),
              help="static frontend directory to serve at /")
def cmd_serve(port, host, records_path, assets):
    """Run the local editing service (JSON over HTTP, feqtee-wire-v1)."""
    import uvicorn

    from .service import create_app

    store = RecordStore.load(records_path) if records_path else RecordStore()
    app = create_app(store, assets_dir=assets)
    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
