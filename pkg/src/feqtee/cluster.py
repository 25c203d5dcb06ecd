"""Extrusion clustering: canonicalize records onto a fixed generic base
patch, K-means the resulting vertex clouds, and substitute records in TEE
programs by their cluster representative.

The representative is always an actual record (the member nearest the
cluster mean), never a synthetic centroid, so substituted programs keep
executing real captured extrusions."""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass

import numpy as np

from . import builder
from .errors import FeqTeeError, MalformedFileError
from .mesh import Patch, patch_boundary_halfedges
from .primitives import disk_quad_patch
from .records import ExtrusionRecord
from .tee import ApplyExtrusion, TeeProgram

FORMAT_TAG = "feqtee-lib-v1"
CANONICAL_RINGS = 4  # 8x8 grid disk: 4 quad rings between center and rim


def canonical_patch():
    """The fixed disk-shaped quad patch every record is applied to."""
    mesh = disk_quad_patch(2 * CANONICAL_RINGS)
    cycle = patch_boundary_halfedges(mesh, range(mesh.n_faces))
    ref = min(int(mesh.h_origin[h]) for h in cycle)
    return mesh, Patch.of(range(mesh.n_faces), ref)


def canonicalize(rec: ExtrusionRecord, canon=None) -> np.ndarray:
    """Feature vector of a record: the flattened vertex positions of the
    canonical patch after applying the record, in construction order."""
    if canon is None:
        canon = canonical_patch()
    mesh, patch = canon
    outcome = builder.apply_extrusion(mesh, patch, rec)
    return outcome.mesh.positions.reshape(-1).copy()


@dataclass
class ClusterLibrary:
    k: int
    seed: int
    representatives: list        # record ids, sorted
    assignment: dict             # record id -> representative record id
    feature_dim: int

    def substitute_id(self, rid: int) -> int:
        if rid not in self.assignment:
            raise FeqTeeError(f"record id {rid} not in cluster library")
        return self.assignment[rid]

    def to_json(self) -> str:
        return json.dumps({
            "format": FORMAT_TAG,
            "k": self.k,
            "seed": self.seed,
            "feature_dim": self.feature_dim,
            "representatives": list(self.representatives),
            "assignment": {str(k): v for k, v in sorted(self.assignment.items())},
        }, sort_keys=True)

    @staticmethod
    def from_json(text: str) -> "ClusterLibrary":
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise MalformedFileError(f"bad library JSON: {exc}")
        if obj.get("format") != FORMAT_TAG:
            raise MalformedFileError(
                f"unknown library format {obj.get('format')!r}"
            )
        return ClusterLibrary(
            k=int(obj["k"]), seed=int(obj["seed"]),
            representatives=[int(r) for r in obj["representatives"]],
            assignment={int(k): int(v) for k, v in obj["assignment"].items()},
            feature_dim=int(obj["feature_dim"]),
        )


def _kmeans_pp_init(x: np.ndarray, k: int, rng) -> np.ndarray:
    n = len(x)
    centers = np.empty((k, x.shape[1]))
    centers[0] = x[int(rng.integers(n))]
    d2 = ((x - centers[0]) ** 2).sum(axis=1)
    for i in range(1, k):
        total = d2.sum()
        if total <= 0:
            centers[i] = x[int(rng.integers(n))]
            continue
        probs = d2 / total
        centers[i] = x[int(rng.choice(n, p=probs))]
        d2 = np.minimum(d2, ((x - centers[i]) ** 2).sum(axis=1))
    return centers


def kmeans_cluster(vectors, k: int, seed: int, max_iter: int = 100,
                   record_ids=None) -> ClusterLibrary:
    """Seeded k-means++ plus Lloyd iterations to an assignment fixpoint.

    The representative of each cluster is the member vector closest to the
    cluster mean. K larger than the number of vectors is clamped with a
    warning."""
    x = np.asarray(vectors, dtype=np.float64)
    if x.ndim != 2 or len(x) == 0:
        raise ValueError("vectors must be a non-empty 2D array")
    if k < 1:
        raise ValueError("K must be >= 1")
    n = len(x)
    if record_ids is None:
        record_ids = list(range(n))
    if k > n:
        warnings.warn(f"K={k} clamped to the number of records ({n})")
        k = n

    rng = np.random.default_rng(seed)
    centers = _kmeans_pp_init(x, k, rng)
    assign = np.full(n, -1, dtype=np.int64)
    for _ in range(max_iter):
        d2 = ((x[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        new_assign = d2.argmin(axis=1)
        if (new_assign == assign).all():
            break
        assign = new_assign
        for c in range(k):
            members = x[assign == c]
            if len(members):
                centers[c] = members.mean(axis=0)

    reps = {}
    for c in range(k):
        members = np.flatnonzero(assign == c)
        if len(members) == 0:
            continue
        d2 = ((x[members] - centers[c]) ** 2).sum(axis=1)
        reps[c] = int(members[int(d2.argmin())])
    assignment = {record_ids[i]: record_ids[reps[int(assign[i])]]
                  for i in range(n)}
    representatives = sorted({record_ids[r] for r in reps.values()})
    return ClusterLibrary(k, seed, representatives, assignment, x.shape[1])


def build_library(records, k: int, seed: int,
                  max_iter: int = 100) -> ClusterLibrary:
    """Canonicalize a record collection and cluster it.

    Records whose canonical application fails are excluded from clustering
    and map to themselves."""
    canon = canonical_patch()
    vectors = []
    ids = []
    failed = []
    for rec in records:
        try:
            vectors.append(canonicalize(rec, canon))
        except FeqTeeError as exc:
            warnings.warn(f"record {rec.id} excluded from clustering: {exc}")
            failed.append(rec.id)
            continue
        ids.append(rec.id)
    if not vectors:
        raise FeqTeeError("no record could be canonicalized")
    lib = kmeans_cluster(np.asarray(vectors), k, seed, max_iter, record_ids=ids)
    for rid in failed:
        lib.assignment[rid] = rid
        lib.representatives = sorted(set(lib.representatives) | {rid})
    return lib


def substitute(programs, lib: ClusterLibrary):
    """Rewrite every ApplyExtrusion id to its cluster representative."""
    out = []
    for pi, program in enumerate(programs):
        instructions = []
        for ii, ins in enumerate(program):
            if isinstance(ins, ApplyExtrusion):
                if ins.record_id not in lib.assignment:
                    raise FeqTeeError(
                        f"program {pi} instruction {ii}: record id "
                        f"{ins.record_id} not in cluster library"
                    )
                instructions.append(
                    ApplyExtrusion(lib.assignment[ins.record_id])
                )
            else:
                instructions.append(ins)
        out.append(TeeProgram(instructions))
    return out
